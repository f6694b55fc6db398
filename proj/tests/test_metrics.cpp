#include "proxystream/metrics.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <set>

using namespace proxystream;

namespace {

using Pairs = std::vector<PredictionPair>;

// Independent F1: full sort per label, then precision and recall from set sizes.
double reference_f1(const std::vector<DecileRecord>& r) {
    const std::size_t m = r.size() / 10;
    auto top = [&](bool predicted) {
        std::vector<std::pair<double, std::uint64_t>> keyed;
        for (const auto& x : r) keyed.push_back({-(x.previous - (predicted ? x.predicted : x.current)), x.entity});
        std::sort(keyed.begin(), keyed.end());
        std::set<std::uint64_t> out;
        for (std::size_t i = 0; i < m; ++i) out.insert(keyed[i].second);
        return out;
    };
    const auto t = top(false), p = top(true);
    std::size_t tp = 0;
    for (auto id : p) tp += t.count(id);
    const double precision = static_cast<double>(tp) / static_cast<double>(p.size());
    const double recall = static_cast<double>(tp) / static_cast<double>(t.size());
    return precision + recall == 0 ? 0.0 : 2 * precision * recall / (precision + recall);
}

std::vector<DecileRecord> random_records(std::size_t n, std::mt19937_64& rng, bool flat_previous = false) {
    std::uniform_real_distribution<double> u(0, 100);
    std::vector<DecileRecord> r;
    for (std::size_t i = 0; i < n; ++i)
        r.push_back({i * 3 + 1, flat_previous ? 50.0 : u(rng), std::round(u(rng)), std::round(u(rng))});
    std::shuffle(r.begin(), r.end(), rng);
    return r;
}

}  // namespace

TEST_CASE("rmse examples") {
    const Pairs perfect{{3, 3}, {7, 7}};
    CHECK(*cluster_rmse(perfect) == 0.0);
    CHECK(*entity_rmse(perfect) == 0.0);
    const Pairs two{{10, 12}, {20, 16}};
    CHECK(*cluster_rmse(two) == doctest::Approx(std::sqrt(10.0)));
    CHECK(*cluster_rmse(Pairs{{4, 9}}) == 5.0);
    CHECK_FALSE(cluster_rmse(Pairs{}));
    CHECK_FALSE(entity_rmse(Pairs{}));
}

TEST_CASE("cancellation inside a cluster") {
    // Members with truths 0 and 20 share the proxy prediction 10.
    const Pairs cluster{{10, (0 + 20) / 2.0}};
    const Pairs entities{{10, 0}, {10, 20}};
    CHECK(*cluster_rmse(cluster) == 0.0);
    CHECK(*entity_rmse(entities) == 10.0);
}

TEST_CASE("singleton clusters make both rmse values equal") {
    std::mt19937_64 rng(2);
    std::normal_distribution<double> g(0, 30);
    for (int trial = 0; trial < 30; ++trial) {
        Pairs p(1 + rng() % 50);
        for (auto& x : p) x = {g(rng), g(rng)};
        CHECK(*cluster_rmse(p) == *entity_rmse(p));
    }
}

TEST_CASE("cluster rmse stays below entity rmse for equal-size clusters") {
    std::mt19937_64 rng(3);
    std::normal_distribution<double> g(0, 10);
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t k = 1 + rng() % 8, size = 1 + rng() % 6;
        Pairs proxies, entities;
        for (std::size_t c = 0; c < k; ++c) {
            const double pred = g(rng);
            double mean = 0;
            for (std::size_t i = 0; i < size; ++i) {
                const double t = g(rng);
                entities.push_back({pred, t});
                mean += t;
            }
            proxies.push_back({pred, mean / static_cast<double>(size)});
        }
        CHECK(*cluster_rmse(proxies) <= *entity_rmse(entities) + 1e-12);
    }
}

TEST_CASE("top-decile f1 examples") {
    std::vector<DecileRecord> r;
    for (std::uint64_t i = 0; i < 20; ++i) r.push_back({i, 100, 100.0 - static_cast<double>(i), 100.0 - i});
    CHECK(*top_decile_f1(r) == 1.0);

    // Predicted drops reversed: top-2 predicted {0,1}, top-2 true {18,19}.
    for (auto& x : r) x.predicted = 100.0 - static_cast<double>(19 - x.entity);
    CHECK(*top_decile_f1(r) == 0.0);

    // True decile {19, 18}; predicted decile {19, 5}: one shared member.
    for (auto& x : r) x.predicted = 100.0;
    r[19].predicted = 50;
    r[5].predicted = 60;
    CHECK(*top_decile_f1(r) == 0.5);
    CHECK(reference_f1(r) == 0.5);

    r.resize(9);
    CHECK_FALSE(top_decile_f1(r));
}

TEST_CASE("top-decile ties go to the lower entity id") {
    std::vector<DecileRecord> r;
    for (std::uint64_t i = 0; i < 10; ++i) r.push_back({100 - i, 5, 0, 0});
    // All drops tie; both deciles are {91}.
    CHECK(*top_decile_f1(r) == 1.0);
    r[0].current = -1;  // entity 100 now has the largest true drop
    CHECK(*top_decile_f1(r) == 0.0);
}

TEST_CASE("top-decile f1 against the reference") {
    std::mt19937_64 rng(4);
    for (int trial = 0; trial < 300; ++trial) {
        const auto r = random_records(10 + rng() % 200, rng);
        const auto f = *top_decile_f1(r);
        CHECK(f >= 0.0);
        CHECK(f <= 1.0);
        CHECK(f == doctest::Approx(reference_f1(r)));
    }
}

TEST_CASE("top-decile f1 only sees ranks") {
    std::mt19937_64 rng(5);
    for (int trial = 0; trial < 100; ++trial) {
        auto r = random_records(10 + rng() % 100, rng);
        const auto base = *top_decile_f1(r);
        // Strictly increasing transform of the predicted drops.
        auto drops = r;
        for (auto& x : drops) {
            const double d = x.previous - x.predicted;
            x.predicted = x.previous - (std::exp(d / 40.0) * 3.0 + d);
        }
        CHECK(*top_decile_f1(drops) == base);

        // With a common previous value, a strictly increasing transform of the predictions does the same.
        auto flat = random_records(10 + rng() % 100, rng, true);
        const auto flat_base = *top_decile_f1(flat);
        for (auto& x : flat) x.predicted = std::cbrt(x.predicted) * 7.0 - 2.0;
        CHECK(*top_decile_f1(flat) == flat_base);
    }
}

TEST_CASE("turnover ape") {
    CHECK(*turnover_ape(Pairs{{5, 5}, {7, 7}}) == 0.0);
    CHECK(*turnover_ape(Pairs{{90, 100}, {100, 100}}) == doctest::Approx(5.0));
    const Pairs mixed{{15, 10}, {15, 20}};
    CHECK(*turnover_ape(mixed) == 0.0);
    CHECK(*entity_rmse(mixed) > 0.0);
    CHECK_FALSE(turnover_ape(Pairs{{3, 0}, {4, 0}}));

    std::mt19937_64 rng(6);
    std::uniform_real_distribution<double> u(1, 50);
    Pairs p(40);
    for (auto& x : p) x = {u(rng), u(rng)};
    const double base = *turnover_ape(p);
    CHECK(base >= 0.0);
    for (int i = 0; i < 20; ++i) {
        std::shuffle(p.begin(), p.end(), rng);
        CHECK(*turnover_ape(p) == doctest::Approx(base).epsilon(1e-12));
    }
}

TEST_CASE("report averages skip absent steps") {
    MetricReport report;
    StepMetrics a, b, c;
    a.values[static_cast<std::size_t>(Metric::entity_rmse)] = 2.0;
    b.values[static_cast<std::size_t>(Metric::entity_rmse)] = 4.0;
    b.values[static_cast<std::size_t>(Metric::turnover_ape)] = 1.0;
    report.steps = {a, b, c};
    CHECK(*report.average(Metric::entity_rmse) == 3.0);
    CHECK(*report.average(Metric::turnover_ape) == 1.0);
    CHECK_FALSE(report.average(Metric::cluster_rmse));
    CHECK(metric_name(Metric::top_decile_f1) == "top_decile_f1");
}
