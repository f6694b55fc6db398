#pragma once

#include "proxystream/clustering.hpp"
#include "proxystream/encoding.hpp"
#include "proxystream/event_model.hpp"
#include "proxystream/metrics.hpp"
#include "proxystream/model.hpp"

#include <json.hpp>

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace proxystream {

enum class UseCaseKind { supermarket, paint_factory };

struct UseCase {
    UseCaseKind kind = UseCaseKind::supermarket;
    /// Journey length in weeks (supermarket only).
    std::size_t tau = 3;
    /// Supermarket clustering distance: binned_euclidean or euclidean on z-scored fit coefficients.
    DistanceKind distance = DistanceKind::binned_euclidean;
    std::size_t bins = 20;
    std::string vci_label = "Vendor creates invoice";
    std::string rir_label = "Record Invoice Receipt";

    static UseCase supermarket(std::size_t tau);
    static UseCase paint_factory();

    /// Throws std::invalid_argument (tau < 2, bins < 2, gower requested for the supermarket).
    void validate() const;
    std::string name() const;
};

/// Training entities of step t, ascending id. Supermarket: started before t - tau with events in
/// [t - tau - 1, t - 1). Paint factory: RIR in [t - 1, t).
std::vector<EntityId> select_training(const EventStore& store, std::int64_t t, const UseCase& use_case);

/// Prediction entities of step t, ascending id. Supermarket: started before t - tau + 1 with events
/// in [t - tau, t). Paint factory: VCI in [t - 1, t).
std::vector<EntityId> select_prediction(const EventStore& store, std::int64_t t, const UseCase& use_case);

/// Cluster-size target. Empty means "all entities in one cluster".
struct RhoSetting {
    std::optional<std::size_t> rho;

    static RhoSetting all() { return {}; }
    static RhoSetting of(std::size_t r) { return {r}; }
    /// Parses a positive integer or "all".
    static RhoSetting parse(const std::string& text);

    std::size_t clusters(std::size_t n) const;
    std::string label() const;
    bool operator==(const RhoSetting&) const = default;
};

enum class ClusteringMode { kmedoids, random, none };

struct RunConfig {
    UseCase use_case;
    RhoSetting rho = RhoSetting::of(1);
    ClusteringMode clustering = ClusteringMode::kmedoids;
    /// input_width is filled in from the store.
    ModelSpec model;
    std::uint64_t seed = 1;
    std::optional<std::int64_t> first_step;
    std::optional<std::int64_t> last_step;
    std::size_t max_iter = 100;

    static RunConfig from_json(const nlohmann::json& j);
    nlohmann::json to_json() const;
};

struct LedgerRecord {
    EntityId entity = 0;
    std::int64_t step = 0;
    double predicted = 0.0;
    std::size_t cluster = 0;
    double proxy_prediction = 0.0;
    std::optional<double> truth;
    /// Outcome of the period before the predicted one (supermarket only).
    std::optional<double> previous;
};

/// Predictions waiting for their ground truth, and the ones that received it.
class EvaluationLedger {
public:
    void add(LedgerRecord record);
    /// Resolves the pending record of (entity, step). Throws std::logic_error if it is unknown or
    /// already resolved.
    void resolve(EntityId entity, std::int64_t step, double truth);

    const std::vector<LedgerRecord>& records() const noexcept { return records_; }
    std::size_t pending() const noexcept { return pending_.size(); }
    std::vector<std::pair<EntityId, std::int64_t>> pending_keys() const;

private:
    std::vector<LedgerRecord> records_;
    std::map<std::pair<EntityId, std::int64_t>, std::size_t> pending_;
};

enum class Phase { training, prediction };

/// What one clustering/averaging phase saw; handed to the optional observer.
struct PhaseView {
    std::int64_t t;
    Phase phase;
    const std::vector<EntityId>& entities;
    const std::vector<std::vector<double>>& features;
    const std::vector<double>* outcomes;
    const Partition& partition;
    const std::vector<ProxyEntity>& proxies;
    std::size_t expected_k;
};
using PhaseObserver = std::function<void(const PhaseView&)>;

struct StepResult {
    std::int64_t t = 0;
    std::vector<EntityId> training_entities;
    std::vector<EntityId> prediction_entities;
    std::size_t k_train = 0;
    std::size_t k_pred = 0;
    bool trained = false;
    bool predicted = false;
    /// Empty when clustering is bypassed.
    Partition training_partition;
    Partition prediction_partition;
    std::vector<double> proxy_predictions;
    /// Aligned with prediction_entities.
    std::vector<double> entity_predictions;
};

struct RunResult {
    std::vector<StepResult> steps;
    EvaluationLedger ledger;
    MetricReport metrics;
};

/// Stateful step-by-step runner. The store must outlive it.
class StreamRunner {
public:
    StreamRunner(const EventStore& store, RunConfig config, PhaseObserver observer = {});
    ~StreamRunner();
    StreamRunner(StreamRunner&&) noexcept;

    /// Default step range of the configured use case on this store.
    std::int64_t first_step() const;
    std::int64_t last_step() const;

    /// Training phase, then prediction phase, then resolution of matured predictions.
    StepResult run_step(std::int64_t t);

    const Regressor& model() const;
    const EvaluationLedger& ledger() const;
    /// Per-prediction-step metrics over the records resolved so far.
    MetricReport metrics() const;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

RunResult run_stream(const EventStore& store, const RunConfig& config, PhaseObserver observer = {});

/// Metrics grouped by prediction step; `steps` lists every step to report, absent where nothing resolved.
MetricReport evaluate_ledger(const EvaluationLedger& ledger, const std::vector<std::int64_t>& steps);

}  // namespace proxystream
