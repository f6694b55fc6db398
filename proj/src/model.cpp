#include "proxystream/model.hpp"

#include "proxystream/errors.hpp"
#include "proxystream/rng.hpp"

#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

namespace proxystream {

void ModelSpec::validate() const {
    if (input_width == 0) throw std::invalid_argument("model input width must be positive");
    if (kind == ModelKind::rls_linear) {
        if (!(lambda > 0)) throw std::invalid_argument("rls lambda must be positive");
    } else {
        if (hidden == 0) throw std::invalid_argument("mlp hidden width must be positive");
        if (!(learning_rate > 0)) throw std::invalid_argument("mlp learning rate must be positive");
        if (epochs == 0) throw std::invalid_argument("mlp needs at least one epoch per batch");
    }
}

ModelSpec ModelSpec::from_json(const nlohmann::json& j) {
    ModelSpec s;
    const auto kind = j.value("kind", std::string("rls_linear"));
    if (kind == "rls_linear") s.kind = ModelKind::rls_linear;
    else if (kind == "sgd_mlp") s.kind = ModelKind::sgd_mlp;
    else throw std::invalid_argument("unknown model kind '" + kind + "'");
    s.input_width = j.value("input_width", s.input_width);
    s.lambda = j.value("lambda", s.lambda);
    s.hidden = j.value("hidden", s.hidden);
    s.learning_rate = j.value("learning_rate", s.learning_rate);
    s.epochs = j.value("epochs", s.epochs);
    return s;
}

nlohmann::json ModelSpec::to_json() const {
    nlohmann::json j;
    j["kind"] = kind == ModelKind::rls_linear ? "rls_linear" : "sgd_mlp";
    if (input_width) j["input_width"] = input_width;
    if (kind == ModelKind::rls_linear) {
        j["lambda"] = lambda;
    } else {
        j["hidden"] = hidden;
        j["learning_rate"] = learning_rate;
        j["epochs"] = epochs;
    }
    return j;
}

Regressor init_model(const ModelSpec& spec, std::uint64_t seed) {
    spec.validate();
    Regressor r;
    r.spec_ = spec;
    r.seed_ = seed;
    const auto p = static_cast<Eigen::Index>(spec.input_width);
    if (spec.kind == ModelKind::rls_linear) {
        r.information_ = Eigen::MatrixXd::Identity(p + 1, p + 1) * spec.lambda;
        r.moment_ = Eigen::VectorXd::Zero(p + 1);
        r.weights_ = Eigen::VectorXd::Zero(p + 1);
        return r;
    }
    const auto h = static_cast<Eigen::Index>(spec.hidden);
    Rng rng(derive_seed(seed, {0}));
    std::uniform_real_distribution<double> in_init(-1.0 / std::sqrt(static_cast<double>(p)),
                                                   1.0 / std::sqrt(static_cast<double>(p)));
    std::uniform_real_distribution<double> out_init(-1.0 / std::sqrt(static_cast<double>(h)),
                                                    1.0 / std::sqrt(static_cast<double>(h)));
    r.w1_.resize(h, p);
    for (Eigen::Index i = 0; i < h; ++i)
        for (Eigen::Index j = 0; j < p; ++j) r.w1_(i, j) = in_init(rng);
    r.b1_ = Eigen::VectorXd::Zero(h);
    r.w2_.resize(h);
    for (Eigen::Index i = 0; i < h; ++i) r.w2_(i) = out_init(rng);
    r.x_mean_ = Eigen::VectorXd::Zero(p);
    r.x_scale_ = Eigen::VectorXd::Ones(p);
    return r;
}

void Regressor::check_batch(std::span<const std::vector<double>> xs, std::span<const double> ys) const {
    if (xs.empty()) throw std::invalid_argument("model update needs a non-empty batch");
    if (xs.size() != ys.size()) throw std::invalid_argument("model update: input and target counts differ");
    for (const auto& x : xs)
        if (x.size() != spec_.input_width)
            throw std::invalid_argument("model input width " + std::to_string(x.size()) + " != " +
                                        std::to_string(spec_.input_width));
}

void Regressor::update(std::span<const std::vector<double>> xs, std::span<const double> ys) {
    check_batch(xs, ys);
    if (spec_.kind == ModelKind::rls_linear) update_rls(xs, ys);
    else update_mlp(xs, ys);
    ++updates_;
}

void Regressor::update_rls(std::span<const std::vector<double>> xs, std::span<const double> ys) {
    const auto p = static_cast<Eigen::Index>(spec_.input_width);
    Eigen::MatrixXd rows(static_cast<Eigen::Index>(xs.size()), p + 1);
    Eigen::VectorXd y(static_cast<Eigen::Index>(xs.size()));
    for (std::size_t i = 0; i < xs.size(); ++i) {
        const auto r = static_cast<Eigen::Index>(i);
        for (Eigen::Index j = 0; j < p; ++j) rows(r, j) = xs[i][static_cast<std::size_t>(j)];
        rows(r, p) = 1.0;
        y(r) = ys[i];
    }
    information_.selfadjointView<Eigen::Lower>().rankUpdate(rows.transpose());
    information_.triangularView<Eigen::StrictlyUpper>() = information_.transpose();
    moment_.noalias() += rows.transpose() * y;
    weights_ = information_.ldlt().solve(moment_);
}

void Regressor::update_mlp(std::span<const std::vector<double>> xs, std::span<const double> ys) {
    const auto p = static_cast<Eigen::Index>(spec_.input_width);
    if (updates_ == 0) {
        // Standardizer is fitted once on the first batch and frozen afterwards.
        const double n = static_cast<double>(xs.size());
        Eigen::VectorXd sum = Eigen::VectorXd::Zero(p), sq = Eigen::VectorXd::Zero(p);
        for (const auto& x : xs)
            for (Eigen::Index j = 0; j < p; ++j) sum(j) += x[static_cast<std::size_t>(j)];
        x_mean_ = sum / n;
        for (const auto& x : xs)
            for (Eigen::Index j = 0; j < p; ++j) {
                const double d = x[static_cast<std::size_t>(j)] - x_mean_(j);
                sq(j) += d * d;
            }
        for (Eigen::Index j = 0; j < p; ++j) {
            const double sd = std::sqrt(sq(j) / n);
            x_scale_(j) = sd > 1e-12 ? sd : 1.0;
        }
        y_mean_ = std::accumulate(ys.begin(), ys.end(), 0.0) / n;
        double var = 0;
        for (double y : ys) var += (y - y_mean_) * (y - y_mean_);
        const double sd = std::sqrt(var / n);
        y_scale_ = sd > 1e-12 ? sd : 1.0;
    }

    std::vector<Eigen::VectorXd> zs;
    zs.reserve(xs.size());
    for (const auto& x : xs) zs.push_back(standardize(x));
    std::vector<std::size_t> order(xs.size());
    Rng rng(derive_seed(seed_, {1, updates_}));
    Eigen::VectorXd hidden;
    for (std::size_t epoch = 0; epoch < spec_.epochs; ++epoch) {
        std::iota(order.begin(), order.end(), 0);
        std::shuffle(order.begin(), order.end(), rng);
        for (auto i : order) {
            const double target = (ys[i] - y_mean_) / y_scale_;
            const double err = forward(zs[i], &hidden) - target;
            const double lr = spec_.learning_rate;
            const Eigen::VectorXd delta = err * w2_.cwiseProduct((1.0 - hidden.array().square()).matrix());
            w2_ -= lr * err * hidden;
            b2_ -= lr * err;
            w1_.noalias() -= lr * delta * zs[i].transpose();
            b1_ -= lr * delta;
        }
    }
}

Eigen::VectorXd Regressor::standardize(std::span<const double> x) const {
    Eigen::VectorXd z(static_cast<Eigen::Index>(x.size()));
    for (Eigen::Index j = 0; j < z.size(); ++j) z(j) = (x[static_cast<std::size_t>(j)] - x_mean_(j)) / x_scale_(j);
    return z;
}

double Regressor::forward(const Eigen::VectorXd& z, Eigen::VectorXd* hidden) const {
    Eigen::VectorXd h = (w1_ * z + b1_).array().tanh().matrix();
    const double out = w2_.dot(h) + b2_;
    if (hidden) *hidden = std::move(h);
    return out;
}

double Regressor::predict_one(std::span<const double> x) const {
    if (cold()) throw ColdStartError("model has not been trained yet");
    if (x.size() != spec_.input_width)
        throw std::invalid_argument("model input width " + std::to_string(x.size()) + " != " +
                                    std::to_string(spec_.input_width));
    if (spec_.kind == ModelKind::rls_linear) {
        const auto p = static_cast<Eigen::Index>(spec_.input_width);
        double s = weights_(p);
        for (Eigen::Index j = 0; j < p; ++j) s += weights_(j) * x[static_cast<std::size_t>(j)];
        return s;
    }
    return forward(standardize(x)) * y_scale_ + y_mean_;
}

std::vector<double> Regressor::predict(std::span<const std::vector<double>> xs) const {
    if (cold()) throw ColdStartError("model has not been trained yet");
    std::vector<double> out;
    out.reserve(xs.size());
    for (const auto& x : xs) out.push_back(predict_one(x));
    return out;
}

std::vector<double> Regressor::weights() const { return {weights_.data(), weights_.data() + weights_.size()}; }

std::vector<double> Regressor::parameters() const {
    if (spec_.kind != ModelKind::sgd_mlp) return weights();
    std::vector<double> flat;
    flat.reserve(static_cast<std::size_t>(w1_.size() + b1_.size() + w2_.size() + 1));
    for (Eigen::Index i = 0; i < w1_.rows(); ++i)
        for (Eigen::Index j = 0; j < w1_.cols(); ++j) flat.push_back(w1_(i, j));
    flat.insert(flat.end(), b1_.data(), b1_.data() + b1_.size());
    flat.insert(flat.end(), w2_.data(), w2_.data() + w2_.size());
    flat.push_back(b2_);
    return flat;
}

void Regressor::set_parameters(std::span<const double> flat) {
    if (spec_.kind != ModelKind::sgd_mlp) throw std::logic_error("set_parameters: mlp only");
    if (flat.size() != parameters().size()) throw std::invalid_argument("set_parameters: wrong parameter count");
    std::size_t k = 0;
    for (Eigen::Index i = 0; i < w1_.rows(); ++i)
        for (Eigen::Index j = 0; j < w1_.cols(); ++j) w1_(i, j) = flat[k++];
    for (Eigen::Index i = 0; i < b1_.size(); ++i) b1_(i) = flat[k++];
    for (Eigen::Index i = 0; i < w2_.size(); ++i) w2_(i) = flat[k++];
    b2_ = flat[k];
}

double Regressor::loss(std::span<const std::vector<double>> xs, std::span<const double> ys) const {
    if (spec_.kind != ModelKind::sgd_mlp) throw std::logic_error("loss: mlp only");
    check_batch(xs, ys);
    double total = 0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        const double err = forward(standardize(xs[i])) - (ys[i] - y_mean_) / y_scale_;
        total += 0.5 * err * err;
    }
    return total / static_cast<double>(xs.size());
}

std::vector<double> Regressor::loss_gradient(std::span<const std::vector<double>> xs,
                                             std::span<const double> ys) const {
    if (spec_.kind != ModelKind::sgd_mlp) throw std::logic_error("loss_gradient: mlp only");
    check_batch(xs, ys);
    Eigen::MatrixXd g_w1 = Eigen::MatrixXd::Zero(w1_.rows(), w1_.cols());
    Eigen::VectorXd g_b1 = Eigen::VectorXd::Zero(b1_.size());
    Eigen::VectorXd g_w2 = Eigen::VectorXd::Zero(w2_.size());
    double g_b2 = 0;
    Eigen::VectorXd hidden;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        const Eigen::VectorXd z = standardize(xs[i]);
        const double err = forward(z, &hidden) - (ys[i] - y_mean_) / y_scale_;
        const Eigen::VectorXd delta = err * w2_.cwiseProduct((1.0 - hidden.array().square()).matrix());
        g_w2 += err * hidden;
        g_b2 += err;
        g_w1 += delta * z.transpose();
        g_b1 += delta;
    }
    const double n = static_cast<double>(xs.size());
    std::vector<double> flat;
    for (Eigen::Index i = 0; i < g_w1.rows(); ++i)
        for (Eigen::Index j = 0; j < g_w1.cols(); ++j) flat.push_back(g_w1(i, j) / n);
    for (Eigen::Index i = 0; i < g_b1.size(); ++i) flat.push_back(g_b1(i) / n);
    for (Eigen::Index i = 0; i < g_w2.size(); ++i) flat.push_back(g_w2(i) / n);
    flat.push_back(g_b2 / n);
    return flat;
}

Regressor update(Regressor state, std::span<const std::vector<double>> xs, std::span<const double> ys) {
    state.update(xs, ys);
    return state;
}

std::vector<double> predict(const Regressor& state, std::span<const std::vector<double>> xs) {
    return state.predict(xs);
}

}  // namespace proxystream
