#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace proxystream {

/// ceil(n / rho). Throws std::invalid_argument when n or rho is zero.
std::size_t cluster_count(std::size_t n, std::size_t rho);

enum class DistanceKind { euclidean, binned_euclidean, gower };
enum class FeatureKind { numeric, categorical };

/// Distance together with whatever it was fitted on: bin edges for binned Euclidean,
/// per-dimension kinds and ranges for Gower.
struct DistanceSpec {
    DistanceKind kind = DistanceKind::euclidean;

    std::size_t bins = 20;
    std::vector<double> bin_low;
    std::vector<double> bin_width;

    std::vector<FeatureKind> feature_kinds;
    /// Numeric range per dimension; 0 excludes the dimension (and categorical entries are unused).
    std::vector<double> ranges;

    static DistanceSpec euclidean();
    /// Equal-width bins over the batch's per-dimension min/max. Throws when bins < 2.
    static DistanceSpec binned(std::size_t bins, std::span<const std::vector<double>> batch);
    /// Numeric ranges taken from the batch.
    static DistanceSpec gower(std::vector<FeatureKind> kinds, std::span<const std::vector<double>> batch);

    /// Bin-center representative of x (binned specs only).
    std::vector<double> representative(std::span<const double> x) const;
};

/// Throws std::invalid_argument on a dimension mismatch.
double distance(std::span<const double> x, std::span<const double> y, const DistanceSpec& spec);

struct Partition {
    std::size_t k = 0;
    std::vector<std::size_t> assignment;
    /// Point index of each cluster's medoid; empty for random partitions.
    std::vector<std::size_t> medoids;

    std::vector<std::vector<std::size_t>> members() const;
    std::vector<std::size_t> sizes() const;
};

struct KMedoidsOptions {
    std::size_t max_iter = 100;
    /// Starting medoids (distinct point indices). When empty, k distinct representatives are sampled
    /// from the seed (k distinct points if there are fewer than k representatives).
    std::vector<std::size_t> initial_medoids;
};

struct KMedoidsResult {
    Partition partition;
    /// Total point-to-medoid distance after every assignment pass.
    std::vector<double> cost_history;
    std::size_t iterations = 0;
    bool converged = false;

    double cost() const { return cost_history.empty() ? 0.0 : cost_history.back(); }
};

/// Lloyd-style alternating k-medoids. Ties: nearest-medoid ties go to the lowest cluster index,
/// medoid-cost ties to the lowest member index; a medoid always stays in its own cluster.
/// Identical points (identical bin representatives for binned specs) are evaluated once with
/// multiplicity weights. k == n yields the identity partition (cluster i = point i).
/// Throws std::invalid_argument when k is 0 or exceeds the number of points.
KMedoidsResult k_medoids_detailed(std::span<const std::vector<double>> points, std::size_t k,
                                  const DistanceSpec& spec, std::uint64_t seed, const KMedoidsOptions& options = {});

Partition k_medoids(std::span<const std::vector<double>> points, std::size_t k, const DistanceSpec& spec,
                    std::uint64_t seed, std::size_t max_iter = 100);

/// Each entity independently uniform over k clusters; empty clusters are kept.
Partition random_partition(std::size_t n_entities, std::size_t k, std::uint64_t seed);

struct ProxyEntity {
    std::size_t cluster = 0;
    std::vector<std::size_t> members;
    std::vector<double> x_tilde;
    std::optional<double> y_tilde;

    std::size_t member_count() const { return members.size(); }
};

/// One proxy per non-empty cluster, in cluster-index order; members are averaged in index order.
std::vector<ProxyEntity> make_proxies(const Partition& partition, std::span<const std::vector<double>> features,
                                      std::optional<std::span<const double>> outcomes = std::nullopt);

/// Monte-Carlo mean of the Euclidean distance between the centroid and the medoid of n uniform
/// points in [0,1]^d. Throws std::invalid_argument when n < 2, d == 0 or samples == 0.
double mean_medoid_gap(std::size_t n, std::size_t d, std::size_t samples, std::uint64_t seed);

}  // namespace proxystream
