#include "support.hpp"

#include "proxystream/errors.hpp"
#include "proxystream/ingestion.hpp"
#include "proxystream/pipeline.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>

using namespace proxystream;

namespace {

const std::vector<double> kVisit{0.5, 2, 1, 10, 5};

EventStore toy_shoppers() {
    EventStoreBuilder b;
    b.set_alphabet({"a"}).set_event_schema(shopper_event_schema());
    for (int w = 0; w < 8; ++w) b.add_event("weekly", "a", w + 0.5, kVisit);
    b.add_event("gap", "a", 0.5, kVisit);
    b.add_event("gap", "a", 5.5, kVisit);
    b.add_event("late", "a", 4.5, kVisit);
    b.add_event("recent", "a", 2.5, kVisit);
    b.add_event("recent", "a", 3.5, kVisit);
    return std::move(b).build();
}

EventStore toy_invoices() {
    EventStoreBuilder b;
    b.set_alphabet({"p", "Record Invoice Receipt", "Vendor creates invoice"});
    b.add_event("i1", "p", 0.2);
    b.add_event("i1", "Vendor creates invoice", 0.5);
    b.add_event("i1", "Record Invoice Receipt", 3.5);
    b.add_event("i2", "Vendor creates invoice", 1.25);
    b.add_event("i2", "Record Invoice Receipt", 1.75);
    b.add_event("i3", "Vendor creates invoice", 2.0);
    return std::move(b).build();
}

std::vector<EntityId> ids(const EventStore& store, std::initializer_list<const char*> names) {
    std::vector<EntityId> out;
    for (auto n : names) out.push_back(*store.entity_id(n));
    std::sort(out.begin(), out.end());
    return out;
}

EventStore shopper_data(std::size_t n, std::size_t horizon, std::uint64_t seed, double noise = 0.25) {
    auto spec = synthetic_preset("shopper_default");
    spec.n_entities = n;
    spec.horizon = horizon;
    spec.seed = seed;
    spec.noise_scale = noise;
    spec.start_spread = 4.0;
    return generate_shopper_stream(spec).first;
}

EventStore invoice_data(std::size_t n, std::uint64_t seed) {
    auto spec = synthetic_preset("invoice_default");
    spec.n_entities = n;
    spec.horizon = 30;
    spec.seed = seed;
    return generate_invoice_stream(spec).first;
}

RunConfig shopper_config(std::size_t rho, std::size_t tau = 3) {
    RunConfig c;
    c.use_case = UseCase::supermarket(tau);
    c.rho = RhoSetting::of(rho);
    c.seed = 7;
    return c;
}

RunConfig paint_config(RhoSetting rho) {
    RunConfig c;
    c.use_case = UseCase::paint_factory();
    c.rho = rho;
    c.seed = 7;
    return c;
}

// Same entities (same ids) and alphabet, events strictly before `cut` only.
EventStore truncate(const EventStore& store, double cut) {
    EventStoreBuilder b;
    b.set_alphabet(store.alphabet()).set_event_schema(store.event_schema()).set_entity_schema(store.entity_schema());
    if (store.calendar()) b.set_calendar(*store.calendar());
    for (EntityId c = 0; c < store.entity_count(); ++c) {
        const auto attrs = store.entity_attributes(c);
        b.add_entity(store.entity_name(c), std::vector<double>(attrs.begin(), attrs.end()));
    }
    for (const auto& e : store.events())
        if (e.time < cut) b.add_event(store.entity_name(e.entity), store.alphabet()[e.activity], e.time, e.attributes);
    return std::move(b).build();
}

std::string metrics_fingerprint(const MetricReport& r) {
    std::string s;
    for (const auto& step : r.steps)
        for (auto m : kAllMetrics) s += step[m] ? std::to_string(*step[m]) + "," : "NA,";
    return s;
}

}  // namespace

TEST_CASE("supermarket selection examples") {
    const auto store = toy_shoppers();
    const auto u = UseCase::supermarket(3);
    // t = 5: training needs start < 2 and events in [1, 4); prediction needs start < 3 and events in [2, 5).
    CHECK(select_training(store, 5, u) == ids(store, {"weekly"}));
    CHECK(select_prediction(store, 5, u) == ids(store, {"weekly", "recent"}));
    // "late" started in week t - 1 and is never a prediction entity at t = 5.
    const auto late = *store.entity_id("late");
    for (std::int64_t t = 4; t <= 6; ++t) {
        const auto sel = select_prediction(store, t, u);
        CHECK(std::find(sel.begin(), sel.end(), late) == sel.end());
    }
}

TEST_CASE("prediction selection is the next training selection") {
    const auto store = shopper_data(300, 14, 3);
    for (std::size_t tau : {2, 3, 5, 9}) {
        const auto u = UseCase::supermarket(tau);
        for (std::int64_t t = 0; t <= 16; ++t) CHECK(select_prediction(store, t, u) == select_training(store, t + 1, u));
    }
}

TEST_CASE("paint factory selection examples") {
    const auto store = toy_invoices();
    const auto u = UseCase::paint_factory();
    const auto i1 = *store.entity_id("i1");
    for (std::int64_t t = 1; t <= 6; ++t) {
        const auto train = select_training(store, t, u);
        CHECK((std::find(train.begin(), train.end(), i1) != train.end()) == (t == 4));
    }
    CHECK(select_prediction(store, 1, u) == ids(store, {"i1"}));
    CHECK(select_prediction(store, 2, u) == ids(store, {"i2"}));
    CHECK(select_prediction(store, 3, u) == ids(store, {"i3"}));
    CHECK(select_training(store, 2, u) == ids(store, {"i2"}));
}

TEST_CASE("paint factory selections are pairwise disjoint across steps") {
    const auto store = invoice_data(500, 4);
    const auto u = UseCase::paint_factory();
    std::set<EntityId> trained, predicted;
    std::size_t n_train = 0, n_pred = 0;
    for (std::int64_t t = 1; t <= 400; ++t) {
        for (auto c : select_training(store, t, u)) {
            CHECK(trained.insert(c).second);
            ++n_train;
        }
        for (auto c : select_prediction(store, t, u)) {
            CHECK(predicted.insert(c).second);
            ++n_pred;
        }
    }
    CHECK(n_pred == store.entity_count());
    CHECK(n_train == store.entity_count());
}

TEST_CASE("rho settings and config round trip") {
    CHECK(RhoSetting::parse("all").clusters(57) == 1);
    CHECK(RhoSetting::parse("8").clusters(100) == 13);
    CHECK(RhoSetting::of(1).clusters(57) == 57);
    CHECK(RhoSetting::all().label() == "all");
    CHECK_THROWS_AS(RhoSetting::parse("0"), std::invalid_argument);
    CHECK_THROWS_AS(RhoSetting::parse("x"), std::invalid_argument);

    auto c = shopper_config(32, 5);
    c.clustering = ClusteringMode::random;
    c.last_step = 12;
    const auto back = RunConfig::from_json(c.to_json());
    CHECK(back.to_json() == c.to_json());
    CHECK(back.use_case.tau == 5);
    CHECK(back.rho == RhoSetting::of(32));
    CHECK(back.clustering == ClusteringMode::random);

    CHECK_THROWS_AS(RunConfig::from_json({{"use_case", "supermarket"}, {"tau", 1}}), std::invalid_argument);
    CHECK_THROWS_AS(RunConfig::from_json({{"use_case", "bakery"}}), std::invalid_argument);
    CHECK(RunConfig::from_json({{"use_case", "paint_factory"}, {"rho", "all"}}).rho == RhoSetting::all());
}

TEST_CASE("ledger bookkeeping") {
    EvaluationLedger ledger;
    ledger.add({3, 5, 1.0, 0, 1.0, std::nullopt, std::nullopt});
    CHECK(ledger.pending() == 1);
    CHECK_THROWS_AS(ledger.add({3, 5, 2.0, 0, 2.0, std::nullopt, std::nullopt}), std::logic_error);
    CHECK_THROWS_AS(ledger.resolve(3, 6, 1.0), std::logic_error);
    ledger.resolve(3, 5, 4.0);
    CHECK(*ledger.records()[0].truth == 4.0);
    CHECK_THROWS_AS(ledger.resolve(3, 5, 4.0), std::logic_error);
    CHECK(ledger.pending() == 0);
}

TEST_CASE("supermarket run: laws, exact proxies and one prediction per entity") {
    const auto store = shopper_data(400, 12, 5);
    for (std::size_t rho : {1, 2, 8, 64, 1000}) {
        testing::PhaseAudit audit;
        const auto result = run_stream(store, shopper_config(rho), [&](const PhaseView& v) { audit(v); });
        CHECK(audit.violations.empty());
        CHECK(audit.phases > 0);
        for (const auto& s : result.steps) {
            if (!s.training_entities.empty()) CHECK(s.k_train == cluster_count(s.training_entities.size(), rho));
            if (!s.predicted) continue;
            CHECK(s.k_pred == cluster_count(s.prediction_entities.size(), rho));
            REQUIRE(s.entity_predictions.size() == s.prediction_entities.size());
            for (std::size_t i = 0; i < s.prediction_entities.size(); ++i) {
                const auto c = s.prediction_partition.assignment[i];
                // Entities share their cluster's proxy prediction exactly.
                std::size_t proxy_index = 0;
                for (std::size_t j = 0; j < c; ++j)
                    proxy_index += s.prediction_partition.sizes()[j] > 0 ? 1 : 0;
                CHECK(s.entity_predictions[i] == s.proxy_predictions[proxy_index]);
            }
        }
        // Each supermarket record resolves exactly one step later with the spend of [t, t+1).
        for (const auto& r : result.ledger.records()) {
            if (!r.truth) {
                CHECK(r.step == result.steps.back().t);
                continue;
            }
            const auto t = static_cast<double>(r.step);
            CHECK(*r.truth == shopper_outcome(store, r.entity, {t, t + 1}));
            CHECK(*r.previous == shopper_outcome(store, r.entity, {t - 1, t}));
        }
    }
}

TEST_CASE("paint run: laws, exact proxies and resolution at receipt") {
    const auto store = invoice_data(600, 2);
    const auto markers = resolve_invoice_markers(store);
    for (auto rho : {RhoSetting::of(1), RhoSetting::of(10), RhoSetting::all()}) {
        testing::PhaseAudit audit;
        const auto result = run_stream(store, paint_config(rho), [&](const PhaseView& v) { audit(v); });
        CHECK(audit.violations.empty());
        std::set<EntityId> predicted;
        for (const auto& r : result.ledger.records()) {
            CHECK(predicted.insert(r.entity).second);
            const double vci = *first_occurrence(store, r.entity, markers.vci);
            CHECK(vci >= static_cast<double>(r.step - 1));
            CHECK(vci < static_cast<double>(r.step));
            REQUIRE(r.truth);
            CHECK(*r.truth == invoice_outcome(store, r.entity, markers));
        }
        CHECK(result.ledger.pending() == 0);
        // Cold steps skip prediction but still report who would have been predicted.
        std::size_t skipped = 0;
        for (const auto& s : result.steps)
            if (!s.predicted) skipped += s.prediction_entities.size();
        CHECK(predicted.size() + skipped == store.entity_count());
    }
}

TEST_CASE("a step without training entities still predicts") {
    const auto store = toy_invoices();
    StreamRunner runner(store, paint_config(RhoSetting::of(1)));
    runner.run_step(1);
    const auto s2 = runner.run_step(2);  // i2 trains
    CHECK(s2.trained);
    const auto updates = runner.model().updates();
    const auto s3 = runner.run_step(3);  // nothing receipted in [2, 3); i3 created
    CHECK_FALSE(s3.trained);
    CHECK(runner.model().updates() == updates);
    CHECK(s3.predicted);
    CHECK(s3.prediction_entities == ids(store, {"i3"}));
}

TEST_CASE("rho = 1 equals the bypassed pipeline") {
    const auto store = shopper_data(300, 12, 9);
    auto clustered = shopper_config(1);
    auto bypass = clustered;
    bypass.clustering = ClusteringMode::none;
    const auto a = run_stream(store, clustered), b = run_stream(store, bypass);
    REQUIRE(a.steps.size() == b.steps.size());
    std::size_t predicted = 0;
    for (std::size_t i = 0; i < a.steps.size(); ++i) {
        CHECK(a.steps[i].prediction_entities == b.steps[i].prediction_entities);
        CHECK(a.steps[i].entity_predictions == b.steps[i].entity_predictions);
        predicted += a.steps[i].entity_predictions.size();
    }
    CHECK(predicted > 0);
    for (const auto& s : a.metrics.steps) CHECK(s[Metric::entity_rmse] == s[Metric::cluster_rmse]);

    const auto inv = invoice_data(400, 1);
    auto pa = paint_config(RhoSetting::of(1));
    auto pb = pa;
    pb.clustering = ClusteringMode::none;
    const auto x = run_stream(inv, pa), y = run_stream(inv, pb);
    for (std::size_t i = 0; i < x.steps.size(); ++i) CHECK(x.steps[i].entity_predictions == y.steps[i].entity_predictions);
}

TEST_CASE("noise-free shoppers become predictable") {
    SyntheticSpec spec;
    spec.n_entities = 300;
    spec.n_archetypes = 3;
    spec.horizon = 16;
    spec.noise_scale = 0.0;
    spec.entity_spread = 0.0;
    spec.n_labels = 2;
    for (double spend : {20.0, 45.0, 90.0}) {
        ShopperArchetype a;
        a.spend_intercept = spend;
        a.spread = 0.0;
        a.visits_per_week = 2;
        a.label_weights = {1.0, 1.0};
        spec.shopper_archetypes.push_back(a);
    }
    const auto store = generate_shopper_stream(spec).first;
    const auto result = run_stream(store, shopper_config(1));
    const auto& steps = result.metrics.steps;
    REQUIRE(steps.size() >= 6);
    const auto early = *steps[1][Metric::entity_rmse];
    const auto late = *steps[steps.size() - 2][Metric::entity_rmse];
    CHECK(late < 1e-3);
    CHECK(late <= early);
}

TEST_CASE("horizon of one week resolves nothing") {
    const auto store = shopper_data(50, 1, 2);
    const auto result = run_stream(store, shopper_config(1));
    for (const auto& r : result.ledger.records()) CHECK_FALSE(r.truth);
    for (const auto& s : result.metrics.steps) CHECK_FALSE(s[Metric::entity_rmse]);
}

TEST_CASE("runs are deterministic") {
    const auto store = shopper_data(300, 10, 4);
    for (auto mode : {ClusteringMode::kmedoids, ClusteringMode::random}) {
        auto c = shopper_config(8);
        c.clustering = mode;
        const auto a = run_stream(store, c), b = run_stream(store, c);
        CHECK(metrics_fingerprint(a.metrics) == metrics_fingerprint(b.metrics));
        for (std::size_t i = 0; i < a.steps.size(); ++i) {
            CHECK(a.steps[i].entity_predictions == b.steps[i].entity_predictions);
            CHECK(a.steps[i].prediction_partition.assignment == b.steps[i].prediction_partition.assignment);
        }
    }
    const auto inv = invoice_data(300, 5);
    const auto p = paint_config(RhoSetting::of(10));
    CHECK(metrics_fingerprint(run_stream(inv, p).metrics) == metrics_fingerprint(run_stream(inv, p).metrics));
}

TEST_CASE("no look-ahead") {
    const auto store = shopper_data(250, 12, 6);
    auto config = shopper_config(4);
    const auto full = run_stream(store, config);
    for (std::int64_t cut : {5, 8, 11}) {
        config.last_step = cut;
        const auto partial = run_stream(truncate(store, static_cast<double>(cut)), config);
        for (std::size_t i = 0; i < partial.steps.size(); ++i) {
            CHECK(partial.steps[i].t == full.steps[i].t);
            CHECK(partial.steps[i].prediction_entities == full.steps[i].prediction_entities);
            CHECK(partial.steps[i].entity_predictions == full.steps[i].entity_predictions);
        }
    }

    const auto inv = invoice_data(400, 8);
    auto pc = paint_config(RhoSetting::of(5));
    const auto pfull = run_stream(inv, pc);
    for (std::int64_t cut : {6, 15, 25}) {
        pc.last_step = cut;
        const auto partial = run_stream(truncate(inv, static_cast<double>(cut)), pc);
        for (std::size_t i = 0; i < partial.steps.size(); ++i) {
            CHECK(partial.steps[i].training_entities == pfull.steps[i].training_entities);
            CHECK(partial.steps[i].entity_predictions == pfull.steps[i].entity_predictions);
        }
    }
}

TEST_CASE("step errors carry the step") {
    EventStoreBuilder b;
    b.add_event("s", "a", 0.5);
    b.add_event("s", "a", 3.5);
    const auto store = std::move(b).build();
    StreamRunner runner(store, shopper_config(1));
    try {
        runner.run_step(5);
        FAIL("expected a step error");
    } catch (const std::runtime_error& e) {
        CHECK(std::string(e.what()).rfind("step 5: ", 0) == 0);
    }
    CHECK_THROWS_AS(runner.run_step(2), std::invalid_argument);
}
