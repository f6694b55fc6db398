#include "proxystream/errors.hpp"
#include "proxystream/model.hpp"

#include <doctest.h>

#include <Eigen/Dense>

#include <cmath>
#include <random>

using namespace proxystream;

namespace {

using Rows = std::vector<std::vector<double>>;

ModelSpec rls_spec(std::size_t width, double lambda = 1.0) {
    ModelSpec s;
    s.kind = ModelKind::rls_linear;
    s.input_width = width;
    s.lambda = lambda;
    return s;
}

ModelSpec mlp_spec(std::size_t width, std::size_t hidden = 6) {
    ModelSpec s;
    s.kind = ModelKind::sgd_mlp;
    s.input_width = width;
    s.hidden = hidden;
    s.learning_rate = 0.05;
    s.epochs = 3;
    return s;
}

struct Batch {
    Rows x;
    std::vector<double> y;
};

Batch linear_batch(std::size_t n, std::size_t d, std::uint64_t seed, double noise) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> g(0.0, 1.0);
    Batch b;
    for (std::size_t i = 0; i < n; ++i) {
        std::vector<double> x(d);
        double y = 0.5;
        for (std::size_t j = 0; j < d; ++j) {
            x[j] = 3.0 * g(rng);
            y += static_cast<double>(j + 1) * x[j] * (j % 2 ? -1 : 1);
        }
        b.x.push_back(std::move(x));
        b.y.push_back(y + noise * g(rng));
    }
    return b;
}

}  // namespace

TEST_CASE("cold models") {
    const auto m = init_model(rls_spec(3), 1);
    CHECK(m.updates() == 0);
    CHECK(m.cold());
    CHECK(m.weights() == std::vector<double>{0, 0, 0, 0});
    CHECK_THROWS_AS(m.predict_one(std::vector<double>{1, 2, 3}), ColdStartError);
    CHECK_THROWS_AS(predict(m, Rows{{1, 2, 3}}), ColdStartError);

    const auto a = init_model(mlp_spec(4), 9);
    const auto b = init_model(mlp_spec(4), 9);
    CHECK(a.parameters() == b.parameters());
    CHECK(a.parameters() != init_model(mlp_spec(4), 10).parameters());
    CHECK_THROWS_AS(a.predict_one(std::vector<double>{0, 0, 0, 0}), ColdStartError);
}

TEST_CASE("spec validation") {
    auto s = mlp_spec(3, 0);
    CHECK_THROWS_AS(init_model(s, 1), std::invalid_argument);
    CHECK_THROWS_AS(init_model(rls_spec(0), 1), std::invalid_argument);
    CHECK_THROWS_AS(init_model(rls_spec(2, 0.0), 1), std::invalid_argument);
    s = mlp_spec(3);
    s.learning_rate = -1;
    CHECK_THROWS_AS(s.validate(), std::invalid_argument);

    const auto round = ModelSpec::from_json(mlp_spec(5).to_json());
    CHECK(round.kind == ModelKind::sgd_mlp);
    CHECK(round.hidden == 6);
    CHECK(round.learning_rate == 0.05);
    CHECK_THROWS_AS(ModelSpec::from_json({{"kind", "lstm"}}), std::invalid_argument);
}

TEST_CASE("rls recovers an exact line") {
    auto m = init_model(rls_spec(1, 1e-8), 1);
    m.update(Rows{{0}, {1}, {2}}, std::vector<double>{1, 3, 5});
    const auto w = m.weights();
    CHECK(std::abs(w[0] - 2.0) <= 1e-6);
    CHECK(std::abs(w[1] - 1.0) <= 1e-6);
    CHECK(m.predict_one(std::vector<double>{3}) == doctest::Approx(7.0).epsilon(1e-6));
    CHECK(m.updates() == 1);
}

TEST_CASE("update errors") {
    auto m = init_model(rls_spec(2), 1);
    CHECK_THROWS_AS(m.update(Rows{}, std::vector<double>{}), std::invalid_argument);
    CHECK_THROWS_AS(m.update(Rows{{1, 2, 3}}, std::vector<double>{1}), std::invalid_argument);
    CHECK_THROWS_AS(m.update(Rows{{1, 2}}, std::vector<double>{1, 2}), std::invalid_argument);
    m.update(Rows{{1, 2}}, std::vector<double>{1});
    CHECK_THROWS_AS(m.predict_one(std::vector<double>{1}), std::invalid_argument);
}

TEST_CASE("rls matches batch least squares") {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        const auto data = linear_batch(120, 4, seed, 0.7);
        auto m = init_model(rls_spec(4, 1e-10), seed);
        for (std::size_t start = 0; start < 120; start += 17) {
            const std::size_t end = std::min<std::size_t>(start + 17, 120);
            m.update(std::span(data.x).subspan(start, end - start), std::span(data.y).subspan(start, end - start));
        }
        Eigen::MatrixXd design(120, 5);
        Eigen::VectorXd y(120);
        for (std::size_t i = 0; i < 120; ++i) {
            for (std::size_t j = 0; j < 4; ++j) design(i, j) = data.x[i][j];
            design(i, 4) = 1.0;
            y(i) = data.y[i];
        }
        const Eigen::VectorXd beta = design.colPivHouseholderQr().solve(y);
        const auto w = m.weights();
        for (std::size_t j = 0; j < 5; ++j) CHECK(std::abs(w[j] - beta(j)) <= 1e-6);
    }
}

TEST_CASE("rls batches compose") {
    const auto data = linear_batch(40, 3, 4, 1.0);
    auto split = init_model(rls_spec(3, 0.5), 1);
    split.update(std::span(data.x).first(15), std::span(data.y).first(15));
    split.update(std::span(data.x).subspan(15), std::span(data.y).subspan(15));
    auto whole = init_model(rls_spec(3, 0.5), 1);
    whole.update(data.x, data.y);
    const auto a = split.weights(), b = whole.weights();
    for (std::size_t j = 0; j < a.size(); ++j) CHECK(a[j] == doctest::Approx(b[j]).epsilon(1e-10));
}

TEST_CASE("functional update leaves its input alone") {
    const auto data = linear_batch(10, 2, 8, 0.1);
    const auto cold = init_model(rls_spec(2), 1);
    const auto warm = update(cold, data.x, data.y);
    CHECK(cold.cold());
    CHECK(warm.updates() == 1);
    CHECK(predict(warm, data.x).size() == 10);
}

TEST_CASE("predict has no side effects") {
    const auto a = linear_batch(30, 3, 1, 0.5), b = linear_batch(30, 3, 2, 0.5);
    for (auto spec : {rls_spec(3), mlp_spec(3)}) {
        auto plain = init_model(spec, 4), probed = init_model(spec, 4);
        plain.update(a.x, a.y);
        probed.update(a.x, a.y);
        (void)probed.predict(b.x);
        (void)probed.predict_one(b.x[0]);
        plain.update(b.x, b.y);
        probed.update(b.x, b.y);
        CHECK(plain.predict(b.x) == probed.predict(b.x));
        if (spec.kind == ModelKind::sgd_mlp) CHECK(plain.parameters() == probed.parameters());
        else CHECK(plain.weights() == probed.weights());
    }
}

TEST_CASE("mlp is deterministic and learns") {
    const auto data = linear_batch(200, 3, 6, 0.1);
    auto a = init_model(mlp_spec(3), 2), b = init_model(mlp_spec(3), 2);
    for (int round = 0; round < 5; ++round) {
        a.update(data.x, data.y);
        b.update(data.x, data.y);
    }
    CHECK(a.predict(data.x) == b.predict(data.x));
    CHECK(a.predict_one(data.x[3]) == a.predict_one(data.x[3]));

    auto fresh = init_model(mlp_spec(3), 2);
    fresh.update(std::span(data.x).first(1), std::span(data.y).first(1));
    const double before = fresh.loss(data.x, data.y);
    for (int round = 0; round < 20; ++round) fresh.update(data.x, data.y);
    CHECK(fresh.loss(data.x, data.y) < before);
}

TEST_CASE("mlp gradient matches central differences") {
    const auto data = linear_batch(5, 4, 13, 0.3);
    for (std::uint64_t seed = 0; seed < 3; ++seed) {
        auto m = init_model(mlp_spec(4, 5), seed);
        m.update(data.x, data.y);
        const auto theta = m.parameters();
        const auto grad = m.loss_gradient(data.x, data.y);
        REQUIRE(grad.size() == theta.size());
        for (std::size_t i = 0; i < theta.size(); ++i) {
            const double h = 1e-5 * std::max(1.0, std::abs(theta[i]));
            auto plus = theta, minus = theta;
            plus[i] += h;
            minus[i] -= h;
            m.set_parameters(plus);
            const double lp = m.loss(data.x, data.y);
            m.set_parameters(minus);
            const double lm = m.loss(data.x, data.y);
            const double fd = (lp - lm) / (2 * h);
            const double scale = std::max({std::abs(fd), std::abs(grad[i]), 1e-6});
            CHECK(std::abs(fd - grad[i]) / scale <= 1e-4);
        }
        m.set_parameters(theta);
        CHECK(m.parameters() == theta);
    }
}
