#pragma once

#include "proxystream/event_model.hpp"
#include "proxystream/pipeline.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

namespace proxystream::cli {

inline constexpr const char* kVersion = "0.1.0";

/// Where a run's event store comes from: an event CSV plus its LogSchema JSON, or a generator spec.
struct DataSource {
    std::optional<std::filesystem::path> events;
    std::optional<std::filesystem::path> schema;
    std::optional<nlohmann::json> synthetic;

    /// Relative paths are resolved against `base_dir`.
    static DataSource from_json(const nlohmann::json& j, const std::filesystem::path& base_dir);

    /// Throws std::runtime_error when a referenced file does not exist.
    void check() const;
    /// Synthetic data uses `seed` unless the spec pins its own "seed".
    EventStore load(std::uint64_t seed) const;
};

struct StepLog {
    std::int64_t t = 0;
    std::size_t n_train = 0;
    std::size_t n_pred = 0;
    std::size_t k_train = 0;
    std::size_t k_pred = 0;
    bool trained = false;
    bool predicted = false;
};

struct RunSummary {
    std::string run_id;
    RunConfig config;
    MetricReport metrics;
    std::vector<StepLog> steps;
    std::optional<std::string> error;
};

std::string make_run_id(const RunConfig& config);
RunSummary execute_run(const EventStore& store, const RunConfig& config);

/// Long format: run_id,use_case,rho,tau,seed,step,metric,value; "avg" step rows close each run.
void write_results(std::ostream& out, std::span<const RunSummary> runs);
void write_steps(std::ostream& out, std::span<const RunSummary> runs);

/// Writes through a temporary sibling and renames, so a failed write leaves no partial file.
void write_file_atomically(const std::filesystem::path& path, const std::function<void(std::ostream&)>& body);

struct SweepGrid {
    DataSource data;
    RunConfig base;
    std::vector<RhoSetting> rhos;
    std::vector<std::size_t> taus;
    std::vector<std::uint64_t> seeds;
    std::vector<ClusteringMode> modes;

    /// Duplicate rho values are dropped; each drop appends a message to `warnings`.
    static SweepGrid from_json(const nlohmann::json& j, const std::filesystem::path& base_dir,
                               std::vector<std::string>* warnings = nullptr);
    /// Ordered by mode, tau, rho, seed.
    std::vector<RunConfig> expand() const;
};

/// Pivot of time-averaged values (mean over seeds): one row per tau, one column per rho.
void write_pivot(std::ostream& out, std::span<const RunSummary> runs, Metric metric, ClusteringMode mode);

std::uint64_t fnv1a64(std::string_view bytes);

void cmd_gen(const std::filesystem::path& config, std::optional<std::uint64_t> seed, const std::filesystem::path& out);
void cmd_run(const std::filesystem::path& config, std::optional<std::uint64_t> seed, const std::filesystem::path& out);
void cmd_sweep(const std::filesystem::path& config, std::optional<std::uint64_t> seed,
               const std::filesystem::path& out, std::size_t jobs);
void cmd_mean_medoid(const std::vector<std::size_t>& ns, const std::vector<std::size_t>& ds, std::size_t samples,
                     std::uint64_t seed, const std::filesystem::path& out);
void cmd_filter_bpic(const std::filesystem::path& input, const std::filesystem::path& out,
                     const std::optional<std::filesystem::path>& schema);

/// Per-(n, d) seed used by cmd_mean_medoid.
std::uint64_t mean_medoid_seed(std::uint64_t seed, std::size_t n, std::size_t d);

}  // namespace proxystream::cli
