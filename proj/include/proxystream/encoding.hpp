#pragma once

#include "proxystream/event_model.hpp"

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace proxystream {

/// Aggregate rows ahead of the label-frequency block: mean freshness, mean item value,
/// mean product density, summed total value, summed item count, visit count.
inline constexpr std::size_t kJourneyAggregateRows = 6;

/// F x tau per-week encoding of a shopper journey, stored column-major (one column per week,
/// oldest week first). F = 6 + |A|.
class JourneyMatrix {
public:
    JourneyMatrix() = default;
    JourneyMatrix(std::size_t rows, std::size_t tau) : rows_(rows), tau_(tau), values_(rows * tau, 0.0) {}

    std::size_t rows() const noexcept { return rows_; }
    std::size_t tau() const noexcept { return tau_; }

    double& at(std::size_t row, std::size_t col) { return values_[col * rows_ + row]; }
    double at(std::size_t row, std::size_t col) const { return values_[col * rows_ + row]; }
    std::span<const double> column(std::size_t col) const { return {values_.data() + col * rows_, rows_}; }

    /// Column-major, oldest week first: the model input layout.
    const std::vector<double>& flat() const noexcept { return values_; }

private:
    std::size_t rows_ = 0;
    std::size_t tau_ = 0;
    std::vector<double> values_;
};

/// Encodes entity c over the tau weeks ending at `journey_end`: column j covers
/// [journey_end - tau + j, journey_end - tau + j + 1). Weeks without visits are all-zero columns.
/// The store must carry the shopper event attributes.
JourneyMatrix encode_journey(const EventStore& store, EntityId c, double journey_end, std::size_t tau);

/// Sum of total_value over entity c's events inside the window.
double shopper_outcome(const EventStore& store, EntityId c, TimeWindow window);

/// Per feature row: least-squares line over (j, value_j), j = 0..tau-1, and its RMS residual.
struct LinearFitCoeffs {
    std::vector<double> slope;
    std::vector<double> intercept;
    std::vector<double> residual;

    /// (slope, intercept, residual) per row, rows in matrix order; 3F values.
    std::vector<double> flat() const;
};

/// Throws std::invalid_argument when tau < 2.
LinearFitCoeffs linear_fit(const JourneyMatrix& matrix);

/// Activity ids of the invoice start (VCI) and end (RIR) markers.
struct InvoiceMarkers {
    ActivityId vci;
    ActivityId rir;
};

/// Resolves marker labels case-insensitively; throws SchemaError when one is absent.
InvoiceMarkers resolve_invoice_markers(const EventStore& store, std::string_view vci_label = "Vendor creates invoice",
                                       std::string_view rir_label = "Record Invoice Receipt");

/// Time of entity c's first event with the given activity.
std::optional<double> first_occurrence(const EventStore& store, EntityId c, ActivityId activity);

struct InvoiceFeatures {
    /// Relative activity frequencies over events strictly before vci(c).
    std::vector<double> activity_freqs;
    /// Entity attributes in schema coding (category index, 0/1 for booleans).
    std::vector<double> attributes;
};

/// Throws ContractError when c has no VCI event.
InvoiceFeatures encode_invoice(const EventStore& store, EntityId c, const InvoiceMarkers& markers);

/// rir(c) - vci(c) in store time units. Throws ContractError unless both exist with vci < rir.
double invoice_outcome(const EventStore& store, EntityId c, const InvoiceMarkers& markers);

/// Frequency block unchanged, categoricals expanded to indicator blocks, booleans as 0/1.
/// Throws SchemaError on an out-of-range category or width mismatch.
std::vector<double> one_hot_encode(const InvoiceFeatures& features, const AttributeSchema& schema);

/// Output width of one_hot_encode.
std::size_t one_hot_width(std::size_t alphabet_size, const AttributeSchema& schema);

/// Per-dimension z-scores using the batch's own mean and population std. Dimensions with zero
/// spread map to 0.
std::vector<std::vector<double>> zscore(std::span<const std::vector<double>> rows);

}  // namespace proxystream
