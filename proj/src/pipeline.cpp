#include "proxystream/pipeline.hpp"

#include "proxystream/errors.hpp"
#include "proxystream/rng.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace proxystream {

UseCase UseCase::supermarket(std::size_t tau) {
    UseCase u;
    u.kind = UseCaseKind::supermarket;
    u.tau = tau;
    return u;
}

UseCase UseCase::paint_factory() {
    UseCase u;
    u.kind = UseCaseKind::paint_factory;
    u.distance = DistanceKind::gower;
    return u;
}

void UseCase::validate() const {
    if (kind == UseCaseKind::supermarket) {
        if (tau < 2) throw std::invalid_argument("supermarket journeys need tau >= 2");
        if (distance == DistanceKind::gower) throw std::invalid_argument("supermarket clustering is Euclidean");
        if (distance == DistanceKind::binned_euclidean && bins < 2)
            throw std::invalid_argument("binned distance needs at least 2 bins");
    }
}

std::string UseCase::name() const { return kind == UseCaseKind::supermarket ? "supermarket" : "paint_factory"; }

namespace {

double as_time(std::int64_t t) { return static_cast<double>(t); }

struct InvoiceTimes {
    std::vector<std::optional<double>> vci;
    std::vector<std::optional<double>> rir;
};

InvoiceTimes invoice_times(const EventStore& store, const UseCase& use_case) {
    const auto markers = resolve_invoice_markers(store, use_case.vci_label, use_case.rir_label);
    InvoiceTimes out;
    out.vci.resize(store.entity_count());
    out.rir.resize(store.entity_count());
    for (EntityId c = 0; c < store.entity_count(); ++c) {
        out.vci[c] = first_occurrence(store, c, markers.vci);
        out.rir[c] = first_occurrence(store, c, markers.rir);
    }
    return out;
}

bool in_step(const std::optional<double>& time, std::int64_t t) {
    return time && *time >= as_time(t - 1) && *time < as_time(t);
}

bool paint_trainable(const InvoiceTimes& times, EntityId c, std::int64_t t) {
    return in_step(times.rir[c], t) && times.vci[c] && *times.vci[c] < *times.rir[c];
}

std::vector<EntityId> shopper_selection(const EventStore& store, double window_end, std::size_t tau) {
    std::vector<EntityId> out;
    // Started no later than the first week of the tau-week window.
    const double start_bound = window_end - static_cast<double>(tau) + 1.0;
    const TimeWindow window(window_end - static_cast<double>(tau), window_end);
    for (EntityId c = 0; c < store.entity_count(); ++c) {
        const auto start = store.start_time(c);
        if (start && *start < start_bound && has_events_in(store, window, c)) out.push_back(c);
    }
    return out;
}

}  // namespace

std::vector<EntityId> select_training(const EventStore& store, std::int64_t t, const UseCase& use_case) {
    if (use_case.kind == UseCaseKind::supermarket) return shopper_selection(store, as_time(t - 1), use_case.tau);
    const auto times = invoice_times(store, use_case);
    std::vector<EntityId> out;
    for (EntityId c = 0; c < store.entity_count(); ++c)
        if (paint_trainable(times, c, t)) out.push_back(c);
    return out;
}

std::vector<EntityId> select_prediction(const EventStore& store, std::int64_t t, const UseCase& use_case) {
    if (use_case.kind == UseCaseKind::supermarket) return shopper_selection(store, as_time(t), use_case.tau);
    const auto times = invoice_times(store, use_case);
    std::vector<EntityId> out;
    for (EntityId c = 0; c < store.entity_count(); ++c)
        if (in_step(times.vci[c], t)) out.push_back(c);
    return out;
}

RhoSetting RhoSetting::parse(const std::string& text) {
    if (text == "all") return all();
    std::size_t value = 0;
    const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    if (ec != std::errc() || ptr != text.data() + text.size() || value == 0)
        throw std::invalid_argument("rho must be a positive integer or \"all\", got '" + text + "'");
    return of(value);
}

std::size_t RhoSetting::clusters(std::size_t n) const { return rho ? cluster_count(n, *rho) : 1; }

std::string RhoSetting::label() const { return rho ? std::to_string(*rho) : "all"; }

namespace {

const char* clustering_name(ClusteringMode m) {
    switch (m) {
        case ClusteringMode::kmedoids: return "kmedoids";
        case ClusteringMode::random: return "random";
        case ClusteringMode::none: return "none";
    }
    return "";
}

const char* distance_name(DistanceKind k) {
    switch (k) {
        case DistanceKind::euclidean: return "euclidean";
        case DistanceKind::binned_euclidean: return "binned_euclidean";
        case DistanceKind::gower: return "gower";
    }
    return "";
}

}  // namespace

RunConfig RunConfig::from_json(const nlohmann::json& j) {
    RunConfig c;
    const auto use_case = j.value("use_case", std::string("supermarket"));
    if (use_case == "supermarket") c.use_case = UseCase::supermarket(j.value("tau", std::size_t{3}));
    else if (use_case == "paint_factory") c.use_case = UseCase::paint_factory();
    else throw std::invalid_argument("unknown use case '" + use_case + "'");
    if (j.contains("distance")) {
        const auto d = j.at("distance").get<std::string>();
        if (d == "euclidean") c.use_case.distance = DistanceKind::euclidean;
        else if (d == "binned_euclidean") c.use_case.distance = DistanceKind::binned_euclidean;
        else if (d == "gower") c.use_case.distance = DistanceKind::gower;
        else throw std::invalid_argument("unknown distance '" + d + "'");
    }
    c.use_case.bins = j.value("bins", c.use_case.bins);
    c.use_case.vci_label = j.value("vci_label", c.use_case.vci_label);
    c.use_case.rir_label = j.value("rir_label", c.use_case.rir_label);
    c.use_case.validate();

    if (j.contains("rho")) {
        const auto& r = j.at("rho");
        c.rho = r.is_string() ? RhoSetting::parse(r.get<std::string>()) : RhoSetting::parse(std::to_string(r.get<long long>()));
    }
    const auto mode = j.value("clustering", std::string("kmedoids"));
    if (mode == "kmedoids") c.clustering = ClusteringMode::kmedoids;
    else if (mode == "random") c.clustering = ClusteringMode::random;
    else if (mode == "none") c.clustering = ClusteringMode::none;
    else throw std::invalid_argument("unknown clustering mode '" + mode + "'");
    if (j.contains("model")) c.model = ModelSpec::from_json(j.at("model"));
    c.seed = j.value("seed", c.seed);
    if (j.contains("first_step")) c.first_step = j.at("first_step").get<std::int64_t>();
    if (j.contains("last_step")) c.last_step = j.at("last_step").get<std::int64_t>();
    c.max_iter = j.value("max_iter", c.max_iter);
    return c;
}

nlohmann::json RunConfig::to_json() const {
    nlohmann::json j;
    j["use_case"] = use_case.name();
    if (use_case.kind == UseCaseKind::supermarket) {
        j["tau"] = use_case.tau;
        j["distance"] = distance_name(use_case.distance);
        j["bins"] = use_case.bins;
    } else {
        j["vci_label"] = use_case.vci_label;
        j["rir_label"] = use_case.rir_label;
    }
    j["rho"] = rho.label();
    j["clustering"] = clustering_name(clustering);
    j["model"] = model.to_json();
    j["seed"] = seed;
    if (first_step) j["first_step"] = *first_step;
    if (last_step) j["last_step"] = *last_step;
    j["max_iter"] = max_iter;
    return j;
}

void EvaluationLedger::add(LedgerRecord record) {
    const auto key = std::make_pair(record.entity, record.step);
    if (pending_.count(key)) throw std::logic_error("ledger already holds a prediction for this entity and step");
    record.truth.reset();
    pending_.emplace(key, records_.size());
    records_.push_back(std::move(record));
}

void EvaluationLedger::resolve(EntityId entity, std::int64_t step, double truth) {
    const auto it = pending_.find({entity, step});
    if (it == pending_.end()) throw std::logic_error("no pending prediction for this entity and step");
    records_[it->second].truth = truth;
    pending_.erase(it);
}

std::vector<std::pair<EntityId, std::int64_t>> EvaluationLedger::pending_keys() const {
    std::vector<std::pair<EntityId, std::int64_t>> out;
    out.reserve(pending_.size());
    for (const auto& [key, idx] : pending_) out.push_back(key);
    return out;
}

namespace {

constexpr std::uint64_t kPartitionTag = 0x70617274;
constexpr std::uint64_t kModelTag = 0x6d6f646c;

/// One encoded selection: model-facing rows and, unless bypassed, its partition.
struct Batch {
    std::vector<EntityId> entities;
    std::vector<std::vector<double>> features;
    Partition partition;
};

std::uint64_t phase_seed(std::uint64_t seed, std::int64_t t, Phase phase) {
    return derive_seed(seed, {kPartitionTag, static_cast<std::uint64_t>(t), phase == Phase::training ? 0u : 1u});
}

}  // namespace

struct StreamRunner::Impl {
    const EventStore& store;
    RunConfig config;
    PhaseObserver observer;
    Regressor model;
    EvaluationLedger ledger;
    std::vector<std::int64_t> steps_run;

    // supermarket
    std::map<std::int64_t, Batch> prediction_cache;
    std::map<std::int64_t, std::vector<EntityId>> awaiting;

    // paint factory
    std::optional<InvoiceMarkers> markers;
    InvoiceTimes times;
    std::vector<std::optional<std::int64_t>> predicted_at;
    std::vector<FeatureKind> gower_kinds;

    Impl(const EventStore& s, RunConfig c, PhaseObserver o) : store(s), config(std::move(c)), observer(std::move(o)) {
        config.use_case.validate();
        if (config.use_case.kind == UseCaseKind::supermarket) {
            config.model.input_width = (kJourneyAggregateRows + store.alphabet().size()) * config.use_case.tau;
        } else {
            markers = resolve_invoice_markers(store, config.use_case.vci_label, config.use_case.rir_label);
            times = invoice_times(store, config.use_case);
            predicted_at.assign(store.entity_count(), std::nullopt);
            config.model.input_width = one_hot_width(store.alphabet().size(), store.entity_schema());
            gower_kinds.assign(store.alphabet().size(), FeatureKind::numeric);
            for (const auto& spec : store.entity_schema().specs())
                gower_kinds.push_back(spec.kind == AttributeKind::numeric ? FeatureKind::numeric
                                                                          : FeatureKind::categorical);
        }
        model = init_model(config.model, derive_seed(config.seed, {kModelTag}));
    }

    bool supermarket() const { return config.use_case.kind == UseCaseKind::supermarket; }

    std::int64_t default_first() const {
        return supermarket() ? static_cast<std::int64_t>(config.use_case.tau) + 1 : 1;
    }

    std::int64_t default_last() const {
        const auto events = store.events();
        if (events.empty()) return default_first() - 1;
        const auto end = static_cast<std::int64_t>(std::ceil(events.back().time));
        return supermarket() ? end : end + 1;
    }

    /// Encodes and partitions the entities; `t` and `phase` only seed the partition.
    Batch build_batch(std::vector<EntityId> entities, double journey_end, std::int64_t t, Phase phase) {
        Batch b;
        b.entities = std::move(entities);
        const std::size_t n = b.entities.size();
        std::vector<std::vector<double>> cluster_rows;
        const bool need_rows = config.clustering == ClusteringMode::kmedoids;
        b.features.reserve(n);
        if (supermarket()) {
            for (auto c : b.entities) {
                auto m = encode_journey(store, c, journey_end, config.use_case.tau);
                if (need_rows) cluster_rows.push_back(linear_fit(m).flat());
                b.features.push_back(m.flat());
            }
        } else {
            for (auto c : b.entities) {
                const auto f = encode_invoice(store, c, *markers);
                if (need_rows) {
                    auto row = f.activity_freqs;
                    row.insert(row.end(), f.attributes.begin(), f.attributes.end());
                    cluster_rows.push_back(std::move(row));
                }
                b.features.push_back(one_hot_encode(f, store.entity_schema()));
            }
        }
        if (n == 0 || config.clustering == ClusteringMode::none) return b;

        const std::size_t k = config.rho.clusters(n);
        const auto seed = phase_seed(config.seed, t, phase);
        if (config.clustering == ClusteringMode::random) {
            b.partition = random_partition(n, k, seed);
            return b;
        }
        DistanceSpec spec;
        if (supermarket()) {
            cluster_rows = zscore(cluster_rows);
            spec = config.use_case.distance == DistanceKind::binned_euclidean
                       ? DistanceSpec::binned(config.use_case.bins, cluster_rows)
                       : DistanceSpec::euclidean();
        } else {
            spec = DistanceSpec::gower(gower_kinds, cluster_rows);
        }
        b.partition = k_medoids(cluster_rows, k, spec, seed, config.max_iter);
        return b;
    }

    Batch prediction_batch(std::int64_t t) {
        const auto it = prediction_cache.find(t);
        if (it != prediction_cache.end()) return it->second;
        const double end = supermarket() ? as_time(t) : 0.0;
        return build_batch(select_prediction(store, t, config.use_case), end, t, Phase::prediction);
    }

    void notify(std::int64_t t, Phase phase, const Batch& b, const std::vector<double>* outcomes,
                const std::vector<ProxyEntity>& proxies) {
        if (!observer) return;
        observer(PhaseView{t, phase, b.entities, b.features, outcomes, b.partition, proxies,
                           config.rho.clusters(b.entities.size())});
    }

    void train(std::int64_t t, StepResult& result) {
        Batch b;
        std::vector<double> ys;
        if (supermarket()) {
            // The training selection of t is the prediction selection of t - 1 over the same window.
            b = prediction_batch(t - 1);
            const TimeWindow outcome_window(as_time(t - 1), as_time(t));
            for (auto c : b.entities) ys.push_back(shopper_outcome(store, c, outcome_window));
        } else {
            std::vector<EntityId> entities;
            for (EntityId c = 0; c < store.entity_count(); ++c)
                if (paint_trainable(times, c, t)) entities.push_back(c);
            b = build_batch(std::move(entities), 0.0, t, Phase::training);
            for (auto c : b.entities) ys.push_back(invoice_outcome(store, c, *markers));
        }
        result.training_entities = b.entities;
        if (b.entities.empty()) return;
        result.k_train = config.rho.clusters(b.entities.size());

        if (config.clustering == ClusteringMode::none) {
            model.update(b.features, ys);
        } else {
            const auto proxies = make_proxies(b.partition, b.features, std::span<const double>(ys));
            notify(t, Phase::training, b, &ys, proxies);
            std::vector<std::vector<double>> xs;
            std::vector<double> targets;
            xs.reserve(proxies.size());
            for (const auto& p : proxies) {
                xs.push_back(p.x_tilde);
                targets.push_back(*p.y_tilde);
            }
            model.update(xs, targets);
            result.training_partition = std::move(b.partition);
        }
        result.trained = true;
    }

    void predict(std::int64_t t, StepResult& result) {
        if (!supermarket() && model.cold()) {
            result.prediction_entities = select_paint_prediction(t);
            return;
        }
        Batch b = supermarket() ? prediction_batch(t)
                                : build_batch(select_paint_prediction(t), 0.0, t, Phase::prediction);
        if (supermarket()) prediction_cache[t] = b;
        result.prediction_entities = b.entities;
        if (b.entities.empty() || model.cold()) return;
        const std::size_t n = b.entities.size();
        result.k_pred = config.rho.clusters(n);

        std::vector<std::size_t> cluster_of(n);
        std::vector<double> proxy_of(n);
        if (config.clustering == ClusteringMode::none) {
            result.proxy_predictions = model.predict(b.features);
            for (std::size_t i = 0; i < n; ++i) {
                cluster_of[i] = i;
                proxy_of[i] = result.proxy_predictions[i];
            }
        } else {
            const auto proxies = make_proxies(b.partition, b.features);
            notify(t, Phase::prediction, b, nullptr, proxies);
            for (const auto& p : proxies) {
                const double y = model.predict_one(p.x_tilde);
                result.proxy_predictions.push_back(y);
                for (auto m : p.members) {
                    cluster_of[m] = p.cluster;
                    proxy_of[m] = y;
                }
            }
            result.prediction_partition = b.partition;
        }
        result.entity_predictions = proxy_of;

        const TimeWindow previous_window(as_time(t - 1), as_time(t));
        for (std::size_t i = 0; i < n; ++i) {
            LedgerRecord r;
            r.entity = b.entities[i];
            r.step = t;
            r.predicted = proxy_of[i];
            r.cluster = cluster_of[i];
            r.proxy_prediction = proxy_of[i];
            if (supermarket()) r.previous = shopper_outcome(store, r.entity, previous_window);
            ledger.add(std::move(r));
            if (supermarket()) awaiting[t].push_back(b.entities[i]);
            else predicted_at[b.entities[i]] = t;
        }
        result.predicted = true;
    }

    std::vector<EntityId> select_paint_prediction(std::int64_t t) const {
        std::vector<EntityId> out;
        for (EntityId c = 0; c < store.entity_count(); ++c)
            if (in_step(times.vci[c], t)) out.push_back(c);
        return out;
    }

    void resolve(std::int64_t t) {
        if (supermarket()) {
            const auto it = awaiting.find(t - 1);
            if (it != awaiting.end()) {
                const TimeWindow window(as_time(t - 1), as_time(t));
                for (auto c : it->second) ledger.resolve(c, t - 1, shopper_outcome(store, c, window));
                awaiting.erase(it);
            }
            prediction_cache.erase(prediction_cache.begin(), prediction_cache.lower_bound(t));
            return;
        }
        for (EntityId c = 0; c < store.entity_count(); ++c) {
            if (!predicted_at[c] || !in_step(times.rir[c], t) || !(*times.vci[c] < *times.rir[c])) continue;
            ledger.resolve(c, *predicted_at[c], invoice_outcome(store, c, *markers));
            predicted_at[c].reset();
        }
    }
};

StreamRunner::StreamRunner(const EventStore& store, RunConfig config, PhaseObserver observer)
    : impl_(std::make_unique<Impl>(store, std::move(config), std::move(observer))) {}
StreamRunner::~StreamRunner() = default;
StreamRunner::StreamRunner(StreamRunner&&) noexcept = default;

std::int64_t StreamRunner::first_step() const { return impl_->config.first_step.value_or(impl_->default_first()); }
std::int64_t StreamRunner::last_step() const { return impl_->config.last_step.value_or(impl_->default_last()); }

StepResult StreamRunner::run_step(std::int64_t t) {
    if (impl_->supermarket() && t < static_cast<std::int64_t>(impl_->config.use_case.tau) + 1)
        throw std::invalid_argument("supermarket steps start at tau + 1");
    if (!impl_->supermarket() && t < 1) throw std::invalid_argument("steps start at 1");
    StepResult result;
    result.t = t;
    try {
        impl_->train(t, result);
        impl_->predict(t, result);
        impl_->resolve(t);
    } catch (const std::exception& e) {
        throw std::runtime_error("step " + std::to_string(t) + ": " + e.what());
    }
    impl_->steps_run.push_back(t);
    return result;
}

const Regressor& StreamRunner::model() const { return impl_->model; }
const EvaluationLedger& StreamRunner::ledger() const { return impl_->ledger; }
MetricReport StreamRunner::metrics() const { return evaluate_ledger(impl_->ledger, impl_->steps_run); }

RunResult run_stream(const EventStore& store, const RunConfig& config, PhaseObserver observer) {
    StreamRunner runner(store, config, std::move(observer));
    RunResult out;
    for (auto t = runner.first_step(); t <= runner.last_step(); ++t) out.steps.push_back(runner.run_step(t));
    out.ledger = runner.ledger();
    out.metrics = runner.metrics();
    return out;
}

MetricReport evaluate_ledger(const EvaluationLedger& ledger, const std::vector<std::int64_t>& steps) {
    std::map<std::int64_t, std::vector<const LedgerRecord*>> by_step;
    for (const auto& r : ledger.records())
        if (r.truth) by_step[r.step].push_back(&r);

    MetricReport report;
    for (auto t : steps) {
        StepMetrics m;
        m.step = t;
        const auto it = by_step.find(t);
        if (it != by_step.end()) {
            std::vector<PredictionPair> entities;
            std::map<std::size_t, std::pair<double, std::pair<double, std::size_t>>> clusters;
            std::vector<DecileRecord> decile;
            for (const auto* r : it->second) {
                entities.push_back({r->predicted, *r->truth});
                auto& slot = clusters[r->cluster];
                slot.first = r->proxy_prediction;
                slot.second.first += *r->truth;
                ++slot.second.second;
                if (r->previous) decile.push_back({r->entity, *r->previous, *r->truth, r->predicted});
            }
            std::vector<PredictionPair> proxies;
            for (const auto& [cluster, v] : clusters)
                proxies.push_back({v.first, v.second.first / static_cast<double>(v.second.second)});
            m.values[static_cast<std::size_t>(Metric::cluster_rmse)] = cluster_rmse(proxies);
            m.values[static_cast<std::size_t>(Metric::entity_rmse)] = entity_rmse(entities);
            m.values[static_cast<std::size_t>(Metric::top_decile_f1)] = top_decile_f1(decile);
            m.values[static_cast<std::size_t>(Metric::turnover_ape)] = turnover_ape(entities);
            m.clusters = proxies.size();
            m.entities = entities.size();
            m.decile_population = decile.size();
        }
        report.steps.push_back(m);
    }
    return report;
}

}  // namespace proxystream
