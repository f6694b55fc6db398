#pragma once

#include <json.hpp>

#include <Eigen/Dense>

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace proxystream {

enum class ModelKind { rls_linear, sgd_mlp };

struct ModelSpec {
    ModelKind kind = ModelKind::rls_linear;
    std::size_t input_width = 0;

    /// Ridge prior on the information matrix (rls).
    double lambda = 1.0;

    // sgd_mlp
    std::size_t hidden = 16;
    double learning_rate = 0.01;
    std::size_t epochs = 5;

    /// Throws std::invalid_argument on a non-positive hyperparameter or zero width.
    void validate() const;

    static ModelSpec from_json(const nlohmann::json& j);
    nlohmann::json to_json() const;
};

/// Incremental regressor. Copyable value type; predict never mutates it.
class Regressor {
public:
    const ModelSpec& spec() const noexcept { return spec_; }
    std::size_t updates() const noexcept { return updates_; }
    bool cold() const noexcept { return updates_ == 0; }

    /// Absorbs a batch. Throws std::invalid_argument on an empty batch or width mismatch.
    void update(std::span<const std::vector<double>> xs, std::span<const double> ys);

    /// Throws ColdStartError before the first update.
    std::vector<double> predict(std::span<const std::vector<double>> xs) const;
    double predict_one(std::span<const double> x) const;

    /// rls: coefficients followed by the bias term.
    std::vector<double> weights() const;

    // sgd_mlp internals, exposed for gradient checks.
    std::vector<double> parameters() const;
    void set_parameters(std::span<const double> flat);
    /// Mean of 0.5 * (f(x) - y)^2 in standardized units.
    double loss(std::span<const std::vector<double>> xs, std::span<const double> ys) const;
    /// Gradient of loss() with respect to parameters().
    std::vector<double> loss_gradient(std::span<const std::vector<double>> xs, std::span<const double> ys) const;

private:
    friend Regressor init_model(const ModelSpec& spec, std::uint64_t seed);

    void check_batch(std::span<const std::vector<double>> xs, std::span<const double> ys) const;
    void update_rls(std::span<const std::vector<double>> xs, std::span<const double> ys);
    void update_mlp(std::span<const std::vector<double>> xs, std::span<const double> ys);
    Eigen::VectorXd standardize(std::span<const double> x) const;
    double forward(const Eigen::VectorXd& z, Eigen::VectorXd* hidden = nullptr) const;

    ModelSpec spec_;
    std::size_t updates_ = 0;
    std::uint64_t seed_ = 0;

    Eigen::MatrixXd information_;
    Eigen::VectorXd moment_;
    Eigen::VectorXd weights_;

    Eigen::MatrixXd w1_;
    Eigen::VectorXd b1_;
    Eigen::VectorXd w2_;
    double b2_ = 0.0;
    Eigen::VectorXd x_mean_;
    Eigen::VectorXd x_scale_;
    double y_mean_ = 0.0;
    double y_scale_ = 1.0;
};

/// Deterministic cold model: zero weights and a lambda*I prior (rls) or seeded small weights (mlp).
Regressor init_model(const ModelSpec& spec, std::uint64_t seed);

/// Functional forms of Regressor::update / Regressor::predict.
Regressor update(Regressor state, std::span<const std::vector<double>> xs, std::span<const double> ys);
std::vector<double> predict(const Regressor& state, std::span<const std::vector<double>> xs);

}  // namespace proxystream
