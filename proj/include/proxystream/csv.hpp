#pragma once

#include <cstdint>
#include <istream>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace proxystream::csv {

/// Splits one RFC-4180 style line. Quoted fields may contain commas and doubled quotes.
std::vector<std::string> split_line(std::string_view line);

/// Reads the next logical record; quoted fields may span lines. Returns false at end of input.
bool read_record(std::istream& in, std::string& record);

std::string escape(std::string_view field);
std::string join(const std::vector<std::string>& fields);

/// Shortest decimal string that parses back to the same double.
std::string format_double(double v);

std::optional<double> parse_double(std::string_view text);

/// Seconds since 1970-01-01T00:00:00Z for "YYYY-MM-DD[T| ]HH:MM[:SS[.fff]][Z|+HH:MM|-HH:MM]"
/// or a bare date. Naive timestamps are read as UTC.
std::optional<double> parse_iso8601(std::string_view text);
/// Same for "DD-MM-YYYY HH:MM[:SS[.fff]]" as used by some process-mining CSV exports.
std::optional<double> parse_day_month_year(std::string_view text);

std::int64_t epoch_seconds(int year, unsigned month, unsigned day);
/// "YYYY-MM-DDTHH:MM:SSZ" with optional milliseconds.
std::string format_iso8601(double epoch_seconds);

}  // namespace proxystream::csv
