#include "proxystream/cli.hpp"

#include "proxystream/clustering.hpp"
#include "proxystream/csv.hpp"
#include "proxystream/ingestion.hpp"
#include "proxystream/rng.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <mutex>
#include <set>
#include <sstream>
#include <stdexcept>
#include <thread>

namespace fs = std::filesystem;

namespace proxystream::cli {

namespace {

nlohmann::json read_json(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config '" + path.string() + "'");
    try {
        return nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw std::runtime_error("config '" + path.string() + "' is not valid JSON: " + e.what());
    }
}

std::string read_bytes(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

fs::path resolve(const fs::path& base, const std::string& p) {
    const fs::path path(p);
    return path.is_absolute() ? path : base / path;
}

const char* mode_name(ClusteringMode m) {
    switch (m) {
        case ClusteringMode::kmedoids: return "kmedoids";
        case ClusteringMode::random: return "random";
        case ClusteringMode::none: return "none";
    }
    return "";
}

ClusteringMode parse_mode(const std::string& s) {
    if (s == "kmedoids") return ClusteringMode::kmedoids;
    if (s == "random") return ClusteringMode::random;
    if (s == "none") return ClusteringMode::none;
    throw std::invalid_argument("unknown clustering mode '" + s + "'");
}

std::string tau_label(const RunConfig& c) {
    return c.use_case.kind == UseCaseKind::supermarket ? std::to_string(c.use_case.tau) : "NA";
}

std::string value_text(const std::optional<double>& v) { return v ? csv::format_double(*v) : "NA"; }

std::string timestamp_now() {
    const auto now = std::chrono::system_clock::now();
    const auto secs = std::chrono::duration_cast<std::chrono::seconds>(now.time_since_epoch()).count();
    return csv::format_iso8601(static_cast<double>(secs));
}

std::string hex64(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

void write_manifest(const fs::path& out, const std::string& command, std::string_view config_bytes,
                    const nlohmann::json& extra) {
    nlohmann::json m = extra;
    m["command"] = command;
    m["version"] = kVersion;
    m["config_hash"] = hex64(fnv1a64(config_bytes));
    m["created"] = timestamp_now();
    write_file_atomically(out / "manifest.json", [&](std::ostream& os) { os << m.dump(2) << '\n'; });
}

}  // namespace

std::uint64_t fnv1a64(std::string_view bytes) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

DataSource DataSource::from_json(const nlohmann::json& j, const fs::path& base_dir) {
    DataSource d;
    if (j.contains("synthetic")) d.synthetic = j.at("synthetic");
    if (j.contains("events")) d.events = resolve(base_dir, j.at("events").get<std::string>());
    if (j.contains("schema")) d.schema = resolve(base_dir, j.at("schema").get<std::string>());
    if (d.synthetic && d.events) throw std::invalid_argument("data: give either 'events' or 'synthetic', not both");
    if (!d.synthetic && !d.events) throw std::invalid_argument("data: 'events' or 'synthetic' is required");
    return d;
}

void DataSource::check() const {
    if (events && !fs::exists(*events)) throw std::runtime_error("event log '" + events->string() + "' not found");
    if (schema && !fs::exists(*schema)) throw std::runtime_error("schema '" + schema->string() + "' not found");
}

EventStore DataSource::load(std::uint64_t seed) const {
    if (synthetic) {
        auto j = *synthetic;
        if (!j.contains("seed")) j["seed"] = seed;
        const auto spec = SyntheticSpec::from_json(j);
        return spec.flavor == SyntheticFlavor::shopper ? generate_shopper_stream(spec).first
                                                       : generate_invoice_stream(spec).first;
    }
    check();
    const LogSchema log_schema = schema ? LogSchema::load(*schema) : LogSchema{};
    return read_event_log(*events, log_schema);
}

std::string make_run_id(const RunConfig& c) {
    std::string id = c.use_case.name();
    if (c.clustering != ClusteringMode::kmedoids) id += std::string("-") + mode_name(c.clustering);
    if (c.use_case.kind == UseCaseKind::supermarket) id += "-tau" + std::to_string(c.use_case.tau);
    id += "-rho" + c.rho.label() + "-seed" + std::to_string(c.seed);
    return id;
}

RunSummary execute_run(const EventStore& store, const RunConfig& config) {
    RunSummary s;
    s.run_id = make_run_id(config);
    s.config = config;
    const auto result = run_stream(store, config);
    s.metrics = result.metrics;
    for (const auto& step : result.steps)
        s.steps.push_back({step.t, step.training_entities.size(), step.prediction_entities.size(), step.k_train,
                           step.k_pred, step.trained, step.predicted});
    return s;
}

void write_results(std::ostream& out, std::span<const RunSummary> runs) {
    out << "run_id,use_case,rho,tau,seed,step,metric,value\n";
    for (const auto& r : runs) {
        if (r.error) continue;
        const std::string prefix = csv::escape(r.run_id) + ',' + r.config.use_case.name() + ',' + r.config.rho.label() +
                                   ',' + tau_label(r.config) + ',' + std::to_string(r.config.seed) + ',';
        for (const auto& step : r.metrics.steps)
            for (auto m : kAllMetrics)
                out << prefix << step.step << ',' << metric_name(m) << ',' << value_text(step[m]) << '\n';
        for (auto m : kAllMetrics) out << prefix << "avg," << metric_name(m) << ',' << value_text(r.metrics.average(m)) << '\n';
    }
}

void write_steps(std::ostream& out, std::span<const RunSummary> runs) {
    out << "run_id,step,n_train,n_pred,k_train,k_pred,trained,predicted,resolved\n";
    for (const auto& r : runs) {
        if (r.error) continue;
        for (std::size_t i = 0; i < r.steps.size(); ++i) {
            const auto& s = r.steps[i];
            const std::size_t resolved = i < r.metrics.steps.size() ? r.metrics.steps[i].entities : 0;
            out << csv::escape(r.run_id) << ',' << s.t << ',' << s.n_train << ',' << s.n_pred << ',' << s.k_train << ','
                << s.k_pred << ',' << (s.trained ? 1 : 0) << ',' << (s.predicted ? 1 : 0) << ',' << resolved << '\n';
        }
    }
}

void write_file_atomically(const fs::path& path, const std::function<void(std::ostream&)>& body) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    const fs::path tmp = path.string() + ".partial";
    {
        std::ofstream out(tmp, std::ios::binary);
        if (!out) throw std::runtime_error("cannot write '" + tmp.string() + "'");
        try {
            body(out);
        } catch (...) {
            out.close();
            fs::remove(tmp);
            throw;
        }
        out.flush();
        if (!out) {
            fs::remove(tmp);
            throw std::runtime_error("write to '" + path.string() + "' failed");
        }
    }
    fs::rename(tmp, path);
}

SweepGrid SweepGrid::from_json(const nlohmann::json& j, const fs::path& base_dir, std::vector<std::string>* warnings) {
    SweepGrid g;
    if (!j.contains("data")) throw std::invalid_argument("sweep grid needs a 'data' section");
    g.data = DataSource::from_json(j.at("data"), base_dir);
    g.base = RunConfig::from_json(j.value("run", nlohmann::json::object()));

    std::vector<RhoSetting> raw;
    if (j.contains("rho")) {
        const auto& r = j.at("rho");
        if (r.is_array()) {
            for (const auto& v : r)
                raw.push_back(v.is_string() ? RhoSetting::parse(v.get<std::string>())
                                            : RhoSetting::parse(std::to_string(v.get<long long>())));
        } else if (r.is_object()) {
            const auto from = r.at("from").get<long long>();
            const auto to = r.at("to").get<long long>();
            const auto step = r.value("step", 1LL);
            if (from < 1 || step < 1 || to < from) throw std::invalid_argument("rho range needs 1 <= from <= to, step >= 1");
            for (auto v = from; v <= to; v += step) raw.push_back(RhoSetting::of(static_cast<std::size_t>(v)));
        } else {
            throw std::invalid_argument("'rho' must be a list or a {from, to, step} range");
        }
    } else {
        raw.push_back(g.base.rho);
    }
    if (j.value("include_all", false)) raw.push_back(RhoSetting::all());
    for (const auto& r : raw) {
        if (std::find(g.rhos.begin(), g.rhos.end(), r) != g.rhos.end()) {
            if (warnings) warnings->push_back("duplicate rho " + r.label() + " dropped");
            continue;
        }
        g.rhos.push_back(r);
    }

    if (j.contains("tau")) {
        for (const auto& t : j.at("tau")) g.taus.push_back(t.get<std::size_t>());
    } else {
        g.taus.push_back(g.base.use_case.tau);
    }
    if (g.base.use_case.kind == UseCaseKind::paint_factory) g.taus = {g.base.use_case.tau};

    if (j.contains("seeds")) {
        for (const auto& s : j.at("seeds")) g.seeds.push_back(s.get<std::uint64_t>());
    } else {
        g.seeds.push_back(g.base.seed);
    }
    if (j.contains("clustering")) {
        const auto& c = j.at("clustering");
        if (c.is_array()) {
            for (const auto& m : c) g.modes.push_back(parse_mode(m.get<std::string>()));
        } else {
            g.modes.push_back(parse_mode(c.get<std::string>()));
        }
    } else {
        g.modes.push_back(g.base.clustering);
    }
    if (g.rhos.empty() || g.taus.empty() || g.seeds.empty() || g.modes.empty())
        throw std::invalid_argument("sweep grid lists must be non-empty");
    for (auto t : g.taus)
        if (g.base.use_case.kind == UseCaseKind::supermarket && t < 2)
            throw std::invalid_argument("tau values must be >= 2");
    return g;
}

std::vector<RunConfig> SweepGrid::expand() const {
    std::vector<RunConfig> out;
    for (auto mode : modes)
        for (auto tau : taus)
            for (const auto& rho : rhos)
                for (auto seed : seeds) {
                    RunConfig c = base;
                    c.clustering = mode;
                    c.use_case.tau = tau;
                    c.rho = rho;
                    c.seed = seed;
                    out.push_back(c);
                }
    return out;
}

void write_pivot(std::ostream& out, std::span<const RunSummary> runs, Metric metric, ClusteringMode mode) {
    std::vector<std::string> taus, rhos;
    std::map<std::pair<std::string, std::string>, std::pair<double, std::size_t>> cells;
    for (const auto& r : runs) {
        if (r.error || r.config.clustering != mode) continue;
        const auto tau = tau_label(r.config);
        const auto rho = r.config.rho.label();
        if (std::find(taus.begin(), taus.end(), tau) == taus.end()) taus.push_back(tau);
        if (std::find(rhos.begin(), rhos.end(), rho) == rhos.end()) rhos.push_back(rho);
        auto& cell = cells[{tau, rho}];
        if (const auto v = r.metrics.average(metric)) {
            cell.first += *v;
            ++cell.second;
        }
    }
    out << "tau";
    for (const auto& rho : rhos) out << ",rho=" << rho;
    out << '\n';
    for (const auto& tau : taus) {
        out << tau;
        for (const auto& rho : rhos) {
            const auto it = cells.find({tau, rho});
            out << ',';
            if (it != cells.end() && it->second.second > 0)
                out << csv::format_double(it->second.first / static_cast<double>(it->second.second));
            else
                out << "NA";
        }
        out << '\n';
    }
}

void cmd_gen(const fs::path& config, std::optional<std::uint64_t> seed, const fs::path& out) {
    const auto bytes = read_bytes(config);
    auto j = read_json(config);
    if (j.contains("generator")) j = j.at("generator");
    if (seed) j["seed"] = *seed;
    const auto spec = SyntheticSpec::from_json(j);
    auto [store, truth] = spec.flavor == SyntheticFlavor::shopper ? generate_shopper_stream(spec)
                                                                  : generate_invoice_stream(spec);
    write_file_atomically(out / "events.csv", [&](std::ostream& os) { write_event_log(store, os); });
    write_file_atomically(out / "ground_truth.csv",
                          [&](std::ostream& os) { write_ground_truth(store, truth, spec.flavor, os); });
    write_file_atomically(out / "schema.json",
                          [&](std::ostream& os) { os << canonical_schema(store).to_json().dump(2) << '\n'; });
    write_manifest(out, "gen", bytes, {{"seed", spec.seed}, {"entities", store.entity_count()}, {"events", store.size()}});
}

void cmd_run(const fs::path& config, std::optional<std::uint64_t> seed, const fs::path& out) {
    const auto bytes = read_bytes(config);
    const auto j = read_json(config);
    if (!j.contains("data")) throw std::invalid_argument("run config needs a 'data' section");
    const auto data = DataSource::from_json(j.at("data"), config.parent_path());
    auto run = RunConfig::from_json(j);
    if (seed) run.seed = *seed;
    data.check();
    const auto store = data.load(run.seed);
    const RunSummary summary = execute_run(store, run);
    const std::span<const RunSummary> runs(&summary, 1);
    write_file_atomically(out / "results.csv", [&](std::ostream& os) { write_results(os, runs); });
    write_file_atomically(out / "steps.csv", [&](std::ostream& os) { write_steps(os, runs); });
    write_manifest(out, "run", bytes, {{"seed", run.seed}, {"run_id", summary.run_id}, {"config", run.to_json()}});
}

void cmd_sweep(const fs::path& config, std::optional<std::uint64_t> seed, const fs::path& out, std::size_t jobs) {
    const auto bytes = read_bytes(config);
    std::vector<std::string> warnings;
    auto grid = SweepGrid::from_json(read_json(config), config.parent_path(), &warnings);
    for (const auto& w : warnings) std::cerr << "warning: " << w << '\n';
    if (seed) grid.seeds = {*seed};
    grid.data.check();

    // Synthetic data differs per seed; a file-backed log is loaded once and shared.
    std::map<std::uint64_t, EventStore> stores;
    if (grid.data.synthetic) {
        for (auto s : grid.seeds) stores.emplace(s, grid.data.load(s));
    } else {
        stores.emplace(0, grid.data.load(0));
    }
    auto store_for = [&](std::uint64_t s) -> const EventStore& {
        return grid.data.synthetic ? stores.at(s) : stores.at(0);
    };

    const auto configs = grid.expand();
    std::vector<RunSummary> runs(configs.size());
    std::atomic<std::size_t> next{0};
    std::mutex log_mutex;
    auto worker = [&] {
        for (std::size_t i = next++; i < configs.size(); i = next++) {
            try {
                runs[i] = execute_run(store_for(configs[i].seed), configs[i]);
            } catch (const std::exception& e) {
                runs[i].run_id = make_run_id(configs[i]);
                runs[i].config = configs[i];
                runs[i].error = e.what();
                std::lock_guard lock(log_mutex);
                std::cerr << "run " << runs[i].run_id << " failed: " << e.what() << '\n';
            }
        }
    };
    const std::size_t n_threads = std::max<std::size_t>(1, std::min(jobs, configs.size()));
    std::vector<std::thread> pool;
    for (std::size_t t = 1; t < n_threads; ++t) pool.emplace_back(worker);
    worker();
    for (auto& th : pool) th.join();

    write_file_atomically(out / "results.csv", [&](std::ostream& os) { write_results(os, runs); });
    write_file_atomically(out / "steps.csv", [&](std::ostream& os) { write_steps(os, runs); });
    for (auto mode : grid.modes)
        for (auto m : kAllMetrics) {
            const std::string prefix = mode == ClusteringMode::kmedoids ? "pivot_" : std::string("pivot_") + mode_name(mode) + "_";
            write_file_atomically(out / (prefix + std::string(metric_name(m)) + ".csv"),
                                  [&](std::ostream& os) { write_pivot(os, runs, m, mode); });
        }
    nlohmann::json failures = nlohmann::json::array();
    for (const auto& r : runs)
        if (r.error) failures.push_back({{"run_id", r.run_id}, {"error", *r.error}});
    write_manifest(out, "sweep", bytes,
                   {{"seeds", grid.seeds}, {"runs", runs.size()}, {"failures", failures}, {"warnings", warnings}});
}

std::uint64_t mean_medoid_seed(std::uint64_t seed, std::size_t n, std::size_t d) {
    return derive_seed(seed, {static_cast<std::uint64_t>(n), static_cast<std::uint64_t>(d)});
}

void cmd_mean_medoid(const std::vector<std::size_t>& ns, const std::vector<std::size_t>& ds, std::size_t samples,
                     std::uint64_t seed, const fs::path& out) {
    std::vector<std::string> rows;
    for (auto d : ds)
        for (auto n : ns) {
            const double gap = mean_medoid_gap(n, d, samples, mean_medoid_seed(seed, n, d));
            rows.push_back(std::to_string(n) + ',' + std::to_string(d) + ',' + std::to_string(samples) + ',' +
                           std::to_string(seed) + ',' + csv::format_double(gap));
        }
    write_file_atomically(out / "mean_medoid.csv", [&](std::ostream& os) {
        os << "n,d,samples,seed,gap\n";
        for (const auto& r : rows) os << r << '\n';
    });
}

void cmd_filter_bpic(const fs::path& input, const fs::path& out, const std::optional<fs::path>& schema) {
    if (!fs::exists(input)) throw std::runtime_error("input '" + input.string() + "' not found");
    const LogSchema log_schema = schema ? LogSchema::load(*schema) : bpic2019_schema();
    const auto store = read_event_log(input, log_schema);
    auto [filtered, report] = filter_invoice_cases(store);
    write_file_atomically(out / "filtered.csv", [&](std::ostream& os) { write_event_log(filtered, os); });
    write_file_atomically(out / "schema.json",
                          [&](std::ostream& os) { os << canonical_schema(filtered).to_json().dump(2) << '\n'; });
    write_file_atomically(out / "report.json", [&](std::ostream& os) { os << report.to_json().dump(2) << '\n'; });
}

}  // namespace proxystream::cli
