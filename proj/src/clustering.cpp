#include "proxystream/clustering.hpp"

#include "proxystream/rng.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <stdexcept>
#include <string>

namespace proxystream {

std::size_t cluster_count(std::size_t n, std::size_t rho) {
    if (n == 0) throw std::invalid_argument("cluster_count: no entities");
    if (rho == 0) throw std::invalid_argument("cluster_count: rho must be positive");
    return (n + rho - 1) / rho;
}

DistanceSpec DistanceSpec::euclidean() { return {}; }

DistanceSpec DistanceSpec::binned(std::size_t bins, std::span<const std::vector<double>> batch) {
    if (bins < 2) throw std::invalid_argument("binned distance needs at least 2 bins");
    DistanceSpec spec;
    spec.kind = DistanceKind::binned_euclidean;
    spec.bins = bins;
    if (batch.empty()) return spec;
    const std::size_t dims = batch.front().size();
    spec.bin_low.assign(dims, std::numeric_limits<double>::infinity());
    std::vector<double> high(dims, -std::numeric_limits<double>::infinity());
    for (const auto& row : batch) {
        if (row.size() != dims) throw std::invalid_argument("binned distance: ragged batch");
        for (std::size_t d = 0; d < dims; ++d) {
            spec.bin_low[d] = std::min(spec.bin_low[d], row[d]);
            high[d] = std::max(high[d], row[d]);
        }
    }
    spec.bin_width.resize(dims);
    for (std::size_t d = 0; d < dims; ++d) spec.bin_width[d] = (high[d] - spec.bin_low[d]) / static_cast<double>(bins);
    return spec;
}

DistanceSpec DistanceSpec::gower(std::vector<FeatureKind> kinds, std::span<const std::vector<double>> batch) {
    DistanceSpec spec;
    spec.kind = DistanceKind::gower;
    spec.feature_kinds = std::move(kinds);
    const std::size_t dims = spec.feature_kinds.size();
    spec.ranges.assign(dims, 0.0);
    if (batch.empty()) return spec;
    std::vector<double> low(dims, std::numeric_limits<double>::infinity());
    std::vector<double> high(dims, -std::numeric_limits<double>::infinity());
    for (const auto& row : batch) {
        if (row.size() != dims) throw std::invalid_argument("gower distance: row width does not match feature kinds");
        for (std::size_t d = 0; d < dims; ++d) {
            low[d] = std::min(low[d], row[d]);
            high[d] = std::max(high[d], row[d]);
        }
    }
    for (std::size_t d = 0; d < dims; ++d)
        if (spec.feature_kinds[d] == FeatureKind::numeric) spec.ranges[d] = high[d] - low[d];
    return spec;
}

namespace {

std::size_t bin_index(double v, double low, double width, std::size_t bins) {
    if (!(width > 0)) return 0;
    const double raw = std::floor((v - low) / width);
    if (raw <= 0) return 0;
    return std::min(static_cast<std::size_t>(raw), bins - 1);
}

double euclid(std::span<const double> x, std::span<const double> y) {
    double s = 0;
    for (std::size_t d = 0; d < x.size(); ++d) {
        const double diff = x[d] - y[d];
        s += diff * diff;
    }
    return std::sqrt(s);
}

double gower_kernel(std::span<const double> x, std::span<const double> y, const DistanceSpec& spec) {
    double total = 0;
    std::size_t used = 0;
    for (std::size_t d = 0; d < x.size(); ++d) {
        if (spec.feature_kinds[d] == FeatureKind::categorical) {
            total += x[d] == y[d] ? 0.0 : 1.0;
            ++used;
        } else if (spec.ranges[d] > 0) {
            total += std::min(1.0, std::abs(x[d] - y[d]) / spec.ranges[d]);
            ++used;
        }
    }
    return used == 0 ? 0.0 : total / static_cast<double>(used);
}

void check_width(std::size_t got, const DistanceSpec& spec) {
    std::size_t want = got;
    if (spec.kind == DistanceKind::binned_euclidean) want = spec.bin_low.size();
    if (spec.kind == DistanceKind::gower) want = spec.feature_kinds.size();
    if (got != want)
        throw std::invalid_argument("distance: expected " + std::to_string(want) + " dimensions, got " +
                                    std::to_string(got));
}

}  // namespace

std::vector<double> DistanceSpec::representative(std::span<const double> x) const {
    if (kind != DistanceKind::binned_euclidean) throw std::logic_error("representative: not a binned distance");
    check_width(x.size(), *this);
    std::vector<double> out(x.size());
    for (std::size_t d = 0; d < x.size(); ++d) {
        const auto idx = bin_index(x[d], bin_low[d], bin_width[d], bins);
        out[d] = bin_low[d] + (static_cast<double>(idx) + 0.5) * bin_width[d];
    }
    return out;
}

double distance(std::span<const double> x, std::span<const double> y, const DistanceSpec& spec) {
    if (x.size() != y.size())
        throw std::invalid_argument("distance: dimension mismatch (" + std::to_string(x.size()) + " vs " +
                                    std::to_string(y.size()) + ")");
    check_width(x.size(), spec);
    switch (spec.kind) {
        case DistanceKind::euclidean: return euclid(x, y);
        case DistanceKind::binned_euclidean: return euclid(spec.representative(x), spec.representative(y));
        case DistanceKind::gower: return gower_kernel(x, y, spec);
    }
    return 0.0;
}

std::vector<std::vector<std::size_t>> Partition::members() const {
    std::vector<std::vector<std::size_t>> out(k);
    for (std::size_t i = 0; i < assignment.size(); ++i) out[assignment[i]].push_back(i);
    return out;
}

std::vector<std::size_t> Partition::sizes() const {
    std::vector<std::size_t> out(k, 0);
    for (auto c : assignment) ++out[c];
    return out;
}

namespace {

constexpr std::size_t kGramThreshold = 256;
constexpr std::size_t kTableLimit = 10000;

/// Distinct representatives, numbered in first-appearance order, with their point lists.
struct Groups {
    std::vector<std::vector<double>> reps;
    std::vector<std::vector<std::size_t>> points;
    std::vector<std::size_t> of_point;
};

Groups collapse(std::span<const std::vector<double>> points, const DistanceSpec& spec) {
    Groups g;
    g.of_point.resize(points.size());
    std::map<std::vector<double>, std::size_t> seen;
    for (std::size_t i = 0; i < points.size(); ++i) {
        check_width(points[i].size(), spec);
        auto rep = spec.kind == DistanceKind::binned_euclidean ? spec.representative(points[i]) : points[i];
        auto [it, fresh] = seen.try_emplace(rep, g.reps.size());
        if (fresh) {
            g.reps.push_back(std::move(rep));
            g.points.emplace_back();
        }
        g.points[it->second].push_back(i);
        g.of_point[i] = it->second;
    }
    return g;
}

class GroupDistances {
public:
    GroupDistances(const Groups& groups, const DistanceSpec& spec) : groups_(groups), spec_(spec) {
        n_ = groups.reps.size();
        if (n_ > kTableLimit) return;
        table_.resize(n_ * (n_ - 1) / 2);
        const bool euclidean = spec.kind != DistanceKind::gower;
        if (euclidean && n_ > kGramThreshold) {
            const std::size_t dims = groups.reps.front().size();
            Eigen::MatrixXd x(n_, dims);
            for (std::size_t i = 0; i < n_; ++i)
                for (std::size_t d = 0; d < dims; ++d) x(i, d) = groups.reps[i][d];
            const Eigen::MatrixXd gram = x * x.transpose();
            for (std::size_t i = 0; i < n_; ++i)
                for (std::size_t j = i + 1; j < n_; ++j)
                    table_[slot(i, j)] = std::sqrt(std::max(0.0, gram(i, i) + gram(j, j) - 2.0 * gram(i, j)));
        } else {
            for (std::size_t i = 0; i < n_; ++i)
                for (std::size_t j = i + 1; j < n_; ++j) table_[slot(i, j)] = direct(i, j);
        }
    }

    double operator()(std::size_t a, std::size_t b) const {
        if (a == b) return 0.0;
        if (a > b) std::swap(a, b);
        return table_.empty() ? direct(a, b) : table_[slot(a, b)];
    }

private:
    std::size_t slot(std::size_t i, std::size_t j) const { return i * n_ - i * (i + 1) / 2 + (j - i - 1); }

    double direct(std::size_t a, std::size_t b) const {
        const auto& x = groups_.reps[a];
        const auto& y = groups_.reps[b];
        return spec_.kind == DistanceKind::gower ? gower_kernel(x, y, spec_) : euclid(x, y);
    }

    const Groups& groups_;
    const DistanceSpec& spec_;
    std::size_t n_ = 0;
    std::vector<double> table_;
};

std::vector<std::size_t> sample_distinct(std::size_t n, std::size_t k, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<std::size_t> idx(n);
    for (std::size_t i = 0; i < n; ++i) idx[i] = i;
    for (std::size_t i = 0; i < k; ++i) {
        std::uniform_int_distribution<std::size_t> pick(i, n - 1);
        std::swap(idx[i], idx[pick(rng)]);
    }
    idx.resize(k);
    return idx;
}

class Solver {
public:
    Solver(const Groups& groups, const GroupDistances& dist, std::size_t k)
        : groups_(groups), dist_(dist), k_(k), n_groups_(groups.reps.size()) {
        group_cluster_.assign(n_groups_, 0);
        best_.assign(n_groups_, 0.0);
        medoid_groups_.assign(k, 0);
        medoid_count_.assign(n_groups_, 0);
        medoid_point_.assign(groups.of_point.size(), 0);
    }

    void set_medoids(std::vector<std::size_t> medoids) {
        for (auto p : medoids_) medoid_point_[p] = 0;
        medoids_ = std::move(medoids);
        for (auto p : medoids_) medoid_point_[p] = 1;
        std::fill(medoid_count_.begin(), medoid_count_.end(), 0);
        for (std::size_t j = 0; j < k_; ++j) {
            medoid_groups_[j] = groups_.of_point[medoids_[j]];
            ++medoid_count_[medoid_groups_[j]];
        }
    }

    void assign_full() {
        for (std::size_t g = 0; g < n_groups_; ++g) rescan(g);
    }

    /// Re-assigns after the medoids of `changed` clusters moved; others kept their medoid.
    void assign_incremental(const std::vector<std::size_t>& changed) {
        std::vector<char> moved(k_, 0);
        for (auto j : changed) moved[j] = 1;
        for (std::size_t g = 0; g < n_groups_; ++g) {
            if (moved[group_cluster_[g]]) {
                rescan(g);
                continue;
            }
            for (auto j : changed) {
                const double d = dist_(g, medoid_groups_[j]);
                if (d < best_[g] || (d == best_[g] && j < group_cluster_[g])) {
                    best_[g] = d;
                    group_cluster_[g] = j;
                }
            }
        }
    }

    std::vector<std::size_t> point_assignment() const {
        std::vector<std::size_t> out(groups_.of_point.size());
        for (std::size_t i = 0; i < out.size(); ++i) out[i] = group_cluster_[groups_.of_point[i]];
        for (std::size_t j = 0; j < k_; ++j) out[medoids_[j]] = j;
        return out;
    }

    double cost() const {
        double total = 0;
        for (std::size_t g = 0; g < n_groups_; ++g) {
            const auto free_points = groups_.points[g].size() - medoid_count_[g];
            total += static_cast<double>(free_points) * best_[g];
        }
        return total;
    }

    /// Per cluster, the member minimizing summed distance to all members. Returns clusters whose medoid moved.
    std::vector<std::size_t> update_medoids() {
        // Weighted group composition of every cluster.
        std::vector<std::vector<std::pair<std::size_t, std::size_t>>> comp(k_);
        for (std::size_t g = 0; g < n_groups_; ++g) {
            const auto free_points = groups_.points[g].size() - medoid_count_[g];
            if (free_points > 0) comp[group_cluster_[g]].emplace_back(g, free_points);
        }
        for (std::size_t j = 0; j < k_; ++j) {
            auto& c = comp[j];
            const auto mg = medoid_groups_[j];
            auto it = std::lower_bound(c.begin(), c.end(), std::pair<std::size_t, std::size_t>{mg, 0});
            if (it != c.end() && it->first == mg) ++it->second;
            else c.insert(it, {mg, 1});
        }

        std::vector<std::size_t> next = medoids_;
        std::vector<std::size_t> changed;
        for (std::size_t j = 0; j < k_; ++j) {
            const auto& c = comp[j];
            double best_cost = std::numeric_limits<double>::infinity();
            std::size_t best_point = medoids_[j];
            for (const auto& [h, w_h] : c) {
                (void)w_h;
                double cost = 0;
                for (const auto& [h2, w2] : c) cost += static_cast<double>(w2) * dist_(h, h2);
                const auto candidate = lowest_member(j, h);
                if (cost < best_cost || (cost == best_cost && candidate < best_point)) {
                    best_cost = cost;
                    best_point = candidate;
                }
            }
            if (best_point != medoids_[j]) {
                next[j] = best_point;
                changed.push_back(j);
            }
        }
        if (!changed.empty()) set_medoids(std::move(next));
        return changed;
    }

    const std::vector<std::size_t>& medoids() const { return medoids_; }

private:
    void rescan(std::size_t g) {
        double best = std::numeric_limits<double>::infinity();
        std::size_t arg = 0;
        for (std::size_t j = 0; j < k_; ++j) {
            const double d = dist_(g, medoid_groups_[j]);
            if (d < best) {
                best = d;
                arg = j;
            }
        }
        best_[g] = best;
        group_cluster_[g] = arg;
    }

    /// Lowest point index of cluster j inside group h.
    std::size_t lowest_member(std::size_t j, std::size_t h) const {
        std::size_t lowest = std::numeric_limits<std::size_t>::max();
        if (medoid_groups_[j] == h) lowest = medoids_[j];
        if (group_cluster_[h] == j) {
            for (auto p : groups_.points[h]) {
                if (is_medoid(p, h)) continue;
                lowest = std::min(lowest, p);
                break;
            }
        }
        return lowest;
    }

    bool is_medoid(std::size_t point, std::size_t group) const {
        return medoid_count_[group] != 0 && medoid_point_[point] != 0;
    }

    const Groups& groups_;
    const GroupDistances& dist_;
    std::size_t k_;
    std::size_t n_groups_;
    std::vector<std::size_t> group_cluster_;
    std::vector<double> best_;
    std::vector<std::size_t> medoids_;
    std::vector<std::size_t> medoid_groups_;
    std::vector<std::size_t> medoid_count_;
    std::vector<char> medoid_point_;
};

}  // namespace

KMedoidsResult k_medoids_detailed(std::span<const std::vector<double>> points, std::size_t k,
                                  const DistanceSpec& spec, std::uint64_t seed, const KMedoidsOptions& options) {
    const std::size_t n = points.size();
    if (k == 0) throw std::invalid_argument("k_medoids: k must be positive");
    if (k > n)
        throw std::invalid_argument("k_medoids: k = " + std::to_string(k) + " exceeds " + std::to_string(n) +
                                    " points");

    KMedoidsResult result;
    result.partition.k = k;
    if (k == n) {
        result.partition.assignment.resize(n);
        result.partition.medoids.resize(n);
        for (std::size_t i = 0; i < n; ++i) result.partition.assignment[i] = result.partition.medoids[i] = i;
        result.cost_history.push_back(0.0);
        result.converged = true;
        return result;
    }

    const Groups groups = collapse(points, spec);
    std::vector<std::size_t> initial = options.initial_medoids;
    if (initial.empty()) {
        // Distinct representatives when there are enough of them, so no two clusters start on one bin.
        const std::size_t n_groups = groups.reps.size();
        if (k <= n_groups) {
            initial = sample_distinct(n_groups, k, seed);
            for (auto& g : initial) g = groups.points[g].front();
        } else {
            initial = sample_distinct(n, k, seed);
        }
    } else {
        if (initial.size() != k) throw std::invalid_argument("k_medoids: need exactly k initial medoids");
        auto sorted = initial;
        std::sort(sorted.begin(), sorted.end());
        if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end() || sorted.back() >= n)
            throw std::invalid_argument("k_medoids: initial medoids must be distinct point indices");
    }

    const GroupDistances dist(groups, spec);
    Solver solver(groups, dist, k);
    solver.set_medoids(std::move(initial));
    solver.assign_full();
    auto assignment = solver.point_assignment();
    result.cost_history.push_back(solver.cost());

    while (result.iterations < options.max_iter) {
        ++result.iterations;
        const auto changed = solver.update_medoids();
        if (changed.empty()) {
            result.converged = true;
            break;
        }
        solver.assign_incremental(changed);
        auto next = solver.point_assignment();
        result.cost_history.push_back(solver.cost());
        const bool stable = next == assignment;
        assignment = std::move(next);
        if (stable) {
            result.converged = true;
            break;
        }
    }
    result.partition.assignment = std::move(assignment);
    result.partition.medoids = solver.medoids();
    return result;
}

Partition k_medoids(std::span<const std::vector<double>> points, std::size_t k, const DistanceSpec& spec,
                    std::uint64_t seed, std::size_t max_iter) {
    KMedoidsOptions options;
    options.max_iter = max_iter;
    return k_medoids_detailed(points, k, spec, seed, options).partition;
}

Partition random_partition(std::size_t n_entities, std::size_t k, std::uint64_t seed) {
    if (k == 0) throw std::invalid_argument("random_partition: k must be positive");
    Partition p;
    p.k = k;
    p.assignment.resize(n_entities);
    Rng rng(seed);
    std::uniform_int_distribution<std::size_t> pick(0, k - 1);
    for (auto& a : p.assignment) a = pick(rng);
    return p;
}

std::vector<ProxyEntity> make_proxies(const Partition& partition, std::span<const std::vector<double>> features,
                                      std::optional<std::span<const double>> outcomes) {
    if (features.size() != partition.assignment.size())
        throw std::invalid_argument("make_proxies: feature count does not match the partition");
    if (outcomes && outcomes->size() != features.size())
        throw std::invalid_argument("make_proxies: outcome count does not match the partition");

    std::vector<ProxyEntity> proxies;
    for (auto& members : partition.members()) {
        if (members.empty()) continue;
        ProxyEntity proxy;
        proxy.cluster = partition.assignment[members.front()];
        const std::size_t dims = features[members.front()].size();
        proxy.x_tilde.assign(dims, 0.0);
        double y = 0;
        for (auto m : members) {
            if (features[m].size() != dims) throw std::invalid_argument("make_proxies: ragged features in a cluster");
            for (std::size_t d = 0; d < dims; ++d) proxy.x_tilde[d] += features[m][d];
            if (outcomes) y += (*outcomes)[m];
        }
        const auto count = static_cast<double>(members.size());
        for (auto& v : proxy.x_tilde) v /= count;
        if (outcomes) proxy.y_tilde = y / count;
        proxy.members = std::move(members);
        proxies.push_back(std::move(proxy));
    }
    return proxies;
}

double mean_medoid_gap(std::size_t n, std::size_t d, std::size_t samples, std::uint64_t seed) {
    if (n < 2) throw std::invalid_argument("mean_medoid_gap: need at least two points");
    if (d == 0) throw std::invalid_argument("mean_medoid_gap: dimension must be positive");
    if (samples == 0) throw std::invalid_argument("mean_medoid_gap: need at least one sample");

    Rng rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::vector<std::vector<double>> pts(n, std::vector<double>(d));
    std::vector<double> cost(n);
    double total = 0;
    for (std::size_t s = 0; s < samples; ++s) {
        for (auto& p : pts)
            for (auto& v : p) v = unit(rng);
        std::fill(cost.begin(), cost.end(), 0.0);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = i + 1; j < n; ++j) {
                const double dij = euclid(pts[i], pts[j]);
                cost[i] += dij;
                cost[j] += dij;
            }
        const auto medoid = static_cast<std::size_t>(std::min_element(cost.begin(), cost.end()) - cost.begin());
        std::vector<double> mean(d, 0.0);
        for (const auto& p : pts)
            for (std::size_t k = 0; k < d; ++k) mean[k] += p[k];
        for (auto& v : mean) v /= static_cast<double>(n);
        total += euclid(mean, pts[medoid]);
    }
    return total / static_cast<double>(samples);
}

}  // namespace proxystream
