#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace proxystream {

/// Input does not conform to the declared schema (unknown label, unknown category, bad width).
class SchemaError : public std::runtime_error {
public:
    explicit SchemaError(const std::string& what) : std::runtime_error(what) {}
};

/// A file could not be parsed. `row()` is 1-based and counts the header line.
class ParseError : public std::runtime_error {
public:
    ParseError(const std::string& what, std::size_t row)
        : std::runtime_error("row " + std::to_string(row) + ": " + what), row_(row) {}

    std::size_t row() const noexcept { return row_; }

private:
    std::size_t row_;
};

/// An entity was handed to an operation whose selection predicate it does not satisfy.
class ContractError : public std::logic_error {
public:
    explicit ContractError(const std::string& what) : std::logic_error(what) {}
};

/// Prediction requested from a model that has not seen any training batch.
class ColdStartError : public std::logic_error {
public:
    explicit ColdStartError(const std::string& what) : std::logic_error(what) {}
};

}  // namespace proxystream
