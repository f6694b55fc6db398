#include "proxystream/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace proxystream {

namespace {

std::optional<double> rmse(std::span<const PredictionPair> pairs) {
    if (pairs.empty()) return std::nullopt;
    double sse = 0;
    for (const auto& p : pairs) sse += (p.predicted - p.truth) * (p.predicted - p.truth);
    return std::sqrt(sse / static_cast<double>(pairs.size()));
}

std::vector<std::uint64_t> top_drops(std::span<const DecileRecord> records, std::size_t m, bool use_prediction) {
    std::vector<std::size_t> order(records.size());
    std::iota(order.begin(), order.end(), 0);
    auto drop = [&](std::size_t i) {
        const auto& r = records[i];
        return r.previous - (use_prediction ? r.predicted : r.current);
    };
    std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(m), order.end(),
                      [&](std::size_t a, std::size_t b) {
                          const double da = drop(a), db = drop(b);
                          if (da != db) return da > db;
                          return records[a].entity < records[b].entity;
                      });
    std::vector<std::uint64_t> ids;
    ids.reserve(m);
    for (std::size_t i = 0; i < m; ++i) ids.push_back(records[order[i]].entity);
    std::sort(ids.begin(), ids.end());
    return ids;
}

}  // namespace

std::optional<double> cluster_rmse(std::span<const PredictionPair> proxies) { return rmse(proxies); }

std::optional<double> entity_rmse(std::span<const PredictionPair> entities) { return rmse(entities); }

std::optional<double> top_decile_f1(std::span<const DecileRecord> records) {
    const std::size_t m = records.size() / 10;
    if (m == 0) return std::nullopt;
    const auto truth = top_drops(records, m, false);
    const auto predicted = top_drops(records, m, true);
    std::vector<std::uint64_t> common;
    std::set_intersection(truth.begin(), truth.end(), predicted.begin(), predicted.end(), std::back_inserter(common));
    // Both label sets have m members, so precision = recall = |common| / m.
    return static_cast<double>(common.size()) / static_cast<double>(m);
}

std::optional<double> turnover_ape(std::span<const PredictionPair> entities) {
    double truth = 0, predicted = 0;
    for (const auto& p : entities) {
        truth += p.truth;
        predicted += p.predicted;
    }
    if (truth == 0) return std::nullopt;
    return std::abs(truth - predicted) / std::abs(truth) * 100.0;
}

std::string_view metric_name(Metric m) {
    switch (m) {
        case Metric::cluster_rmse: return "cluster_rmse";
        case Metric::entity_rmse: return "entity_rmse";
        case Metric::top_decile_f1: return "top_decile_f1";
        case Metric::turnover_ape: return "turnover_ape";
    }
    return "";
}

std::optional<double> MetricReport::average(Metric m) const {
    double sum = 0;
    std::size_t n = 0;
    for (const auto& s : steps) {
        if (auto v = s[m]) {
            sum += *v;
            ++n;
        }
    }
    if (n == 0) return std::nullopt;
    return sum / static_cast<double>(n);
}

}  // namespace proxystream
