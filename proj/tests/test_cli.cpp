#include "proxystream/cli.hpp"
#include "proxystream/ingestion.hpp"

#include <doctest.h>

#include <unistd.h>

#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

namespace fs = std::filesystem;
using namespace proxystream;

namespace {

struct TempDir {
    fs::path path;
    TempDir() {
        static int counter = 0;
        path = fs::temp_directory_path() /
               ("proxystream_cli_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

void write_json(const fs::path& p, const nlohmann::json& j) { std::ofstream(p) << j.dump(2); }

std::vector<std::string> lines(const std::string& text) {
    std::vector<std::string> out;
    std::istringstream in(text);
    for (std::string l; std::getline(in, l);) out.push_back(l);
    return out;
}

const nlohmann::json kSmallShopper = {{"preset", "shopper_default"}, {"n_entities", 150}, {"horizon", 8}};
const nlohmann::json kSmallInvoice = {{"preset", "invoice_default"}, {"n_entities", 200}, {"horizon", 20}};

}  // namespace

TEST_CASE("gen writes deterministic files") {
    TempDir tmp;
    write_json(tmp.path / "gen.json", kSmallShopper);
    cli::cmd_gen(tmp.path / "gen.json", 5, tmp.path / "a");
    cli::cmd_gen(tmp.path / "gen.json", 5, tmp.path / "b");
    for (const char* f : {"events.csv", "ground_truth.csv", "schema.json"}) {
        REQUIRE(fs::exists(tmp.path / "a" / f));
        CHECK(slurp(tmp.path / "a" / f) == slurp(tmp.path / "b" / f));
    }
    CHECK(fs::exists(tmp.path / "a" / "manifest.json"));
    cli::cmd_gen(tmp.path / "gen.json", 6, tmp.path / "c");
    CHECK(slurp(tmp.path / "a" / "events.csv") != slurp(tmp.path / "c" / "events.csv"));

    // The written log reads back through its schema.
    const auto schema = LogSchema::load(tmp.path / "a" / "schema.json");
    const auto store = read_event_log(tmp.path / "a" / "events.csv", schema);
    CHECK(store.entity_count() == 150);
}

TEST_CASE("gen rejects a negative noise scale") {
    TempDir tmp;
    auto spec = kSmallShopper;
    spec["noise_scale"] = -0.5;
    write_json(tmp.path / "gen.json", spec);
    CHECK_THROWS_AS(cli::cmd_gen(tmp.path / "gen.json", std::nullopt, tmp.path / "out"), std::invalid_argument);
    CHECK_FALSE(fs::exists(tmp.path / "out" / "events.csv"));
}

TEST_CASE("generated invoices survive the filter command") {
    TempDir tmp;
    write_json(tmp.path / "gen.json", kSmallInvoice);
    cli::cmd_gen(tmp.path / "gen.json", 3, tmp.path / "gen");
    // A BPIC-style schema over the canonical columns: calendar time plus the invoice attributes.
    auto schema = LogSchema::load(tmp.path / "gen" / "schema.json");
    write_json(tmp.path / "schema.json", schema.to_json());
    cli::cmd_filter_bpic(tmp.path / "gen" / "events.csv", tmp.path / "f1", tmp.path / "schema.json");
    const auto report = nlohmann::json::parse(slurp(tmp.path / "f1" / "report.json"));
    CHECK(report["cases_in"] == 200);
    CHECK(report["cases_kept"] == 200);

    cli::cmd_filter_bpic(tmp.path / "f1" / "filtered.csv", tmp.path / "f2", tmp.path / "f1" / "schema.json");
    const auto again = nlohmann::json::parse(slurp(tmp.path / "f2" / "report.json"));
    CHECK(again["cases_kept"] == 200);
    CHECK(slurp(tmp.path / "f1" / "filtered.csv") == slurp(tmp.path / "f2" / "filtered.csv"));
}

TEST_CASE("run writes a results table") {
    TempDir tmp;
    write_json(tmp.path / "run.json",
               {{"data", {{"synthetic", kSmallShopper}}}, {"use_case", "supermarket"}, {"tau", 3}, {"rho", 1}});
    cli::cmd_run(tmp.path / "run.json", 2, tmp.path / "out");
    const auto rows = lines(slurp(tmp.path / "out" / "results.csv"));
    REQUIRE(rows.size() > 5);
    CHECK(rows[0] == "run_id,use_case,rho,tau,seed,step,metric,value");
    std::size_t avg_rows = 0;
    for (const auto& r : rows)
        if (r.find(",avg,") != std::string::npos) ++avg_rows;
    CHECK(avg_rows == 4);
    CHECK(rows[1].rfind("supermarket-tau3-rho1-seed2,supermarket,1,3,2,", 0) == 0);

    cli::cmd_run(tmp.path / "run.json", 2, tmp.path / "again");
    CHECK(slurp(tmp.path / "out" / "results.csv") == slurp(tmp.path / "again" / "results.csv"));
    CHECK(slurp(tmp.path / "out" / "steps.csv") == slurp(tmp.path / "again" / "steps.csv"));
}

TEST_CASE("paint run with a single cluster") {
    TempDir tmp;
    write_json(tmp.path / "run.json", {{"data", {{"synthetic", kSmallInvoice}}}, {"use_case", "paint_factory"}, {"rho", "all"}});
    cli::cmd_run(tmp.path / "run.json", std::nullopt, tmp.path / "out");
    const auto steps = lines(slurp(tmp.path / "out" / "steps.csv"));
    REQUIRE(steps.size() > 2);
    bool any = false;
    for (std::size_t i = 1; i < steps.size(); ++i) {
        // k_train and k_pred are 0 or 1 under a single cluster.
        std::vector<std::string> f;
        std::istringstream in(steps[i]);
        for (std::string x; std::getline(in, x, ',');) f.push_back(x);
        CHECK((f[4] == "0" || f[4] == "1"));
        CHECK((f[5] == "0" || f[5] == "1"));
        any = any || f[7] == "1";
    }
    CHECK(any);
}

TEST_CASE("missing data leaves no output behind") {
    TempDir tmp;
    write_json(tmp.path / "run.json", {{"data", {{"events", "nowhere.csv"}}}, {"rho", 1}});
    CHECK_THROWS(cli::cmd_run(tmp.path / "run.json", std::nullopt, tmp.path / "out"));
    CHECK_FALSE(fs::exists(tmp.path / "out"));
    CHECK_THROWS(cli::cmd_run(tmp.path / "absent.json", std::nullopt, tmp.path / "out"));
}

TEST_CASE("atomic writes") {
    TempDir tmp;
    const auto target = tmp.path / "x.csv";
    CHECK_THROWS(cli::write_file_atomically(target, [](std::ostream& os) {
        os << "half";
        throw std::runtime_error("boom");
    }));
    CHECK_FALSE(fs::exists(target));
    CHECK_FALSE(fs::exists(tmp.path / "x.csv.partial"));
    cli::write_file_atomically(target, [](std::ostream& os) { os << "ok\n"; });
    CHECK(slurp(target) == "ok\n");
}

TEST_CASE("shipped sweep grids have the documented sizes") {
    const fs::path configs = fs::path(PROXYSTREAM_SOURCE_DIR) / "configs";
    std::vector<std::string> warnings;
    const auto sm = cli::SweepGrid::from_json(nlohmann::json::parse(slurp(configs / "sweep_supermarket.json")), configs, &warnings);
    CHECK(sm.rhos.size() == 11);
    CHECK(sm.taus.size() == 8);
    CHECK(sm.expand().size() == 88 * sm.seeds.size());
    CHECK(warnings.empty());

    const auto pf = cli::SweepGrid::from_json(nlohmann::json::parse(slurp(configs / "sweep_paint.json")), configs, &warnings);
    CHECK(pf.rhos.size() == 179);
    std::size_t kmedoids_runs = 0;
    for (const auto& c : pf.expand()) kmedoids_runs += c.clustering == ClusteringMode::kmedoids;
    CHECK(kmedoids_runs == 179 * pf.seeds.size());
}

TEST_CASE("grid parsing") {
    std::vector<std::string> warnings;
    const nlohmann::json j{{"data", {{"synthetic", kSmallShopper}}},
                           {"rho", {4, 2, 4, "all"}},
                           {"include_all", true},
                           {"tau", {2, 3}},
                           {"seeds", {1, 2}},
                           {"clustering", {"kmedoids", "random"}}};
    const auto g = cli::SweepGrid::from_json(j, ".", &warnings);
    CHECK(g.rhos.size() == 3);
    CHECK(warnings.size() == 2);
    const auto runs = g.expand();
    CHECK(runs.size() == 2 * 2 * 3 * 2);
    std::set<std::string> ids;
    for (const auto& r : runs) ids.insert(cli::make_run_id(r));
    CHECK(ids.size() == runs.size());
    CHECK(cli::make_run_id(runs.back()) == "supermarket-random-tau3-rhoall-seed2");

    auto range = j;
    range["rho"] = {{"from", 1}, {"to", 10}};
    CHECK(cli::SweepGrid::from_json(range, ".").rhos.size() == 11);
    range["rho"] = {{"from", 0}, {"to", 10}};
    CHECK_THROWS_AS(cli::SweepGrid::from_json(range, "."), std::invalid_argument);
    CHECK_THROWS_AS(cli::SweepGrid::from_json({{"rho", {1}}}, "."), std::invalid_argument);
}

TEST_CASE("sweep output is independent of the job count and matches single runs") {
    TempDir tmp;
    const nlohmann::json grid{{"data", {{"synthetic", kSmallShopper}}},
                              {"rho", {1, 8, "all"}},
                              {"tau", {2, 3}},
                              {"seeds", {1, 2}}};
    write_json(tmp.path / "sweep.json", grid);
    cli::cmd_sweep(tmp.path / "sweep.json", std::nullopt, tmp.path / "serial", 1);
    cli::cmd_sweep(tmp.path / "sweep.json", std::nullopt, tmp.path / "parallel", 4);
    for (const char* f : {"results.csv", "steps.csv", "pivot_entity_rmse.csv", "pivot_top_decile_f1.csv"})
        CHECK(slurp(tmp.path / "serial" / f) == slurp(tmp.path / "parallel" / f));

    const auto pivot = lines(slurp(tmp.path / "serial" / "pivot_cluster_rmse.csv"));
    REQUIRE(pivot.size() == 3);
    CHECK(pivot[0] == "tau,rho=1,rho=8,rho=all");

    write_json(tmp.path / "run.json", {{"data", {{"synthetic", kSmallShopper}}}, {"tau", 3}, {"rho", 8}});
    cli::cmd_run(tmp.path / "run.json", 2, tmp.path / "single");
    const auto single = lines(slurp(tmp.path / "single" / "results.csv"));
    std::vector<std::string> from_sweep;
    for (const auto& l : lines(slurp(tmp.path / "serial" / "results.csv")))
        if (l.rfind("supermarket-tau3-rho8-seed2,", 0) == 0) from_sweep.push_back(l);
    CHECK(std::vector<std::string>(single.begin() + 1, single.end()) == from_sweep);
}

TEST_CASE("mean-medoid command") {
    TempDir tmp;
    cli::cmd_mean_medoid({5, 10}, {2, 3}, 50, 4, tmp.path / "a");
    cli::cmd_mean_medoid({5, 10}, {2, 3}, 50, 4, tmp.path / "b");
    const auto text = slurp(tmp.path / "a" / "mean_medoid.csv");
    CHECK(text == slurp(tmp.path / "b" / "mean_medoid.csv"));
    const auto rows = lines(text);
    REQUIRE(rows.size() == 5);
    CHECK(rows[0] == "n,d,samples,seed,gap");
    CHECK(rows[1].rfind("5,2,50,4,", 0) == 0);
}

TEST_CASE("fnv1a64 reference values") {
    CHECK(cli::fnv1a64("") == 0xcbf29ce484222325ULL);
    CHECK(cli::fnv1a64("a") == 0xaf63dc4c8601ec8cULL);
}
