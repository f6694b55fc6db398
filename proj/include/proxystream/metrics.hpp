#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

namespace proxystream {

struct PredictionPair {
    double predicted;
    double truth;
};

/// RMSE over proxies: predicted proxy value vs the mean realized outcome of the members.
/// Empty input is absent.
std::optional<double> cluster_rmse(std::span<const PredictionPair> proxies);

/// RMSE over entities. Empty input is absent.
std::optional<double> entity_rmse(std::span<const PredictionPair> entities);

struct DecileRecord {
    std::uint64_t entity;
    double previous;
    double current;
    double predicted;
};

/// F1 between the floor(n/10) largest true drops (previous - current) and the floor(n/10)
/// largest predicted drops (previous - predicted). Rank ties go to the lower entity id.
/// Absent when n < 10.
std::optional<double> top_decile_f1(std::span<const DecileRecord> records);

/// |T - T_hat| / T * 100 with T the summed truths. Absent when T == 0.
std::optional<double> turnover_ape(std::span<const PredictionPair> entities);

enum class Metric : std::size_t { cluster_rmse = 0, entity_rmse, top_decile_f1, turnover_ape };
inline constexpr std::size_t kMetricCount = 4;
inline constexpr std::array<Metric, kMetricCount> kAllMetrics = {Metric::cluster_rmse, Metric::entity_rmse,
                                                                 Metric::top_decile_f1, Metric::turnover_ape};
std::string_view metric_name(Metric m);

struct StepMetrics {
    /// Step at which the predictions were made.
    std::int64_t step = 0;
    std::array<std::optional<double>, kMetricCount> values;
    std::size_t clusters = 0;
    std::size_t entities = 0;
    std::size_t decile_population = 0;

    std::optional<double> operator[](Metric m) const { return values[static_cast<std::size_t>(m)]; }
};

struct MetricReport {
    std::vector<StepMetrics> steps;

    /// Unweighted mean over the steps where the metric is defined.
    std::optional<double> average(Metric m) const;
};

}  // namespace proxystream
