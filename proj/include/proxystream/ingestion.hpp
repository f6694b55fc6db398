#pragma once

#include "proxystream/event_model.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace proxystream {

enum class TimestampFormat { numeric, iso8601, day_month_year };

/// Binds one CSV column to an attribute. A categorical spec with no categories gets its
/// category list from a scan pass (sorted); a declared list is closed.
struct ColumnBinding {
    std::string column;
    AttributeSpec spec;
};

struct LogSchema {
    std::string entity_column = "entity_id";
    std::string activity_column = "activity";
    std::string timestamp_column = "timestamp";
    TimestampFormat timestamp_format = TimestampFormat::numeric;
    /// Length of one time unit in seconds (86400 = days, 604800 = weeks).
    double unit_seconds = 86400.0;
    /// Wall-clock time of store time 0. For calendar formats an absent origin means
    /// "UTC midnight of the earliest timestamp".
    std::optional<std::int64_t> origin_epoch_seconds;
    std::vector<ColumnBinding> event_attributes;
    std::vector<ColumnBinding> entity_attributes;
    std::optional<std::vector<std::string>> alphabet;

    static LogSchema from_json(const nlohmann::json& j);
    nlohmann::json to_json() const;
    static LogSchema load(const std::filesystem::path& path);
};

/// Schema that reads back exactly what write_event_log produced for `store`.
LogSchema canonical_schema(const EventStore& store);

/// Column bindings for a flattened BPIC 2019 CSV export (case/event column prefixes).
LogSchema bpic2019_schema();

EventStore read_event_log(const std::filesystem::path& path, const LogSchema& schema);
EventStore read_event_log(std::istream& in, const LogSchema& schema);

/// Canonical CSV: entity_id,activity,timestamp,<event attributes>,<entity attributes>.
/// Timestamps are written as numeric store time.
void write_event_log(const EventStore& store, std::ostream& out);
void write_event_log(const EventStore& store, const std::filesystem::path& path);

// ---------------------------------------------------------------------------------------------
// Invoice case filter

/// Names of the eight invoice attributes kept by the filter, in output order.
const std::vector<std::string>& invoice_attribute_names();

struct FilterRules {
    std::string vci_label = "Vendor creates invoice";
    std::string rir_label = "Record Invoice Receipt";
    /// Cases must start on or after Jan 1 of this year and end before Jan 1 of the next (UTC).
    int year = 2018;
    std::vector<std::string> keep_attributes = invoice_attribute_names();
};

struct FilterReport {
    std::size_t cases_in = 0;
    std::size_t cases_kept = 0;
    std::size_t dropped_multiplicity = 0;
    std::size_t dropped_order = 0;
    std::size_t dropped_date_range = 0;
    std::size_t events_kept = 0;
    std::size_t labels_kept = 0;

    std::size_t dropped_total() const { return dropped_multiplicity + dropped_order + dropped_date_range; }
    nlohmann::json to_json() const;
};

/// Keeps cases with exactly one VCI and one RIR event, VCI strictly before RIR, and all events
/// inside the filter year. Markers are matched case-insensitively and written with the rule spelling.
/// The result is re-based to start-of-year and carries only the kept attributes and labels.
/// Requires a calendar store.
std::pair<EventStore, FilterReport> filter_invoice_cases(const EventStore& store, const FilterRules& rules = {});

// ---------------------------------------------------------------------------------------------
// Synthetic streams

struct ShopperArchetype {
    double weight = 1.0;
    /// Weekly spend line: intercept + slope * week.
    double spend_intercept = 50.0;
    double spend_slope = 0.0;
    /// Std of the persistent per-entity multiplier on the spend line.
    double spread = 0.0;
    int visits_per_week = 2;
    std::vector<double> label_weights;
    double freshness = 0.5;
    double freshness_slope = 0.0;
    double item_value = 3.0;
    double item_value_slope = 0.0;
    double product_density = 1.5;
};

struct InvoiceArchetype {
    double weight = 1.0;
    double duration_mean = 10.0;
    /// Per invoice attribute, probabilities over its categories (booleans: two entries).
    std::vector<std::vector<double>> attribute_weights;
    std::vector<double> label_weights;
    double prefix_mean_length = 4.0;
};

enum class SyntheticFlavor { shopper, invoice };

struct SyntheticSpec {
    SyntheticFlavor flavor = SyntheticFlavor::shopper;
    std::size_t n_entities = 1000;
    std::size_t n_archetypes = 5;
    /// Relative noise scale; 0 makes every entity follow its archetype exactly.
    double noise_scale = 0.1;
    /// Weeks (shopper) or arrival days (invoice).
    std::size_t horizon = 20;
    std::uint64_t seed = 1;

    // shopper
    std::size_t n_labels = 8;
    bool poisson_visits = false;
    double start_spread = 0.0;
    std::optional<int> visit_rate;
    double entity_spread = 0.15;
    /// Noise scale of freshness, item value and density; follows noise_scale when unset.
    std::optional<double> attribute_noise;
    std::vector<ShopperArchetype> shopper_archetypes;

    // invoice
    double arrival_rate = 0.0;
    std::vector<InvoiceArchetype> invoice_archetypes;

    /// Throws std::invalid_argument on a violated invariant.
    void validate() const;

    /// Keys mirror the fields; "preset" selects a base spec before the other keys apply.
    static SyntheticSpec from_json(const nlohmann::json& j);
};

/// Named generator presets: "shopper_default", "shopper_noisy", "invoice_default".
SyntheticSpec synthetic_preset(std::string_view name);

struct GroundTruth {
    std::vector<std::size_t> archetype;
    /// Shopper: realized spend per entity and week (weeks before the entity's start are 0).
    std::vector<std::vector<double>> weekly_spend;
    /// Invoice: VCI and RIR times and their difference.
    std::vector<double> vci;
    std::vector<double> rir;
    std::vector<double> duration;
};

void write_ground_truth(const EventStore& store, const GroundTruth& truth, SyntheticFlavor flavor,
                        std::ostream& out);

std::pair<EventStore, GroundTruth> generate_shopper_stream(const SyntheticSpec& spec);
std::pair<EventStore, GroundTruth> generate_invoice_stream(const SyntheticSpec& spec);

/// Shopper event attribute columns, in order.
const std::vector<std::string>& shopper_attribute_names();
AttributeSchema shopper_event_schema();
/// Invoice attribute schema with the generator's category lists.
AttributeSchema synthetic_invoice_schema();

}  // namespace proxystream
