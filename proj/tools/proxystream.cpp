#include "proxystream/cli.hpp"

#include <CLI11.hpp>

#include <iostream>

namespace cli = proxystream::cli;

int main(int argc, char** argv) {
    CLI::App app{"Proxy-entity streaming prediction: data generation, runs and parameter sweeps"};
    app.set_version_flag("--version", cli::kVersion);
    app.require_subcommand(1);

    std::string config;
    std::string out = ".";
    std::optional<std::uint64_t> seed;
    std::size_t jobs = 1;

    auto* gen = app.add_subcommand("gen", "Generate a synthetic event log and its ground truth");
    gen->add_option("--config", config, "Generator spec (JSON)")->required()->check(CLI::ExistingFile);
    gen->add_option("--seed", seed, "Override the spec seed");
    gen->add_option("--out", out, "Output directory");

    auto* run = app.add_subcommand("run", "Run one stream and write its metric series");
    run->add_option("--config", config, "Run config (JSON)")->required();
    run->add_option("--seed", seed, "Override the run seed");
    run->add_option("--out", out, "Output directory");

    auto* sweep = app.add_subcommand("sweep", "Run a rho/tau/seed grid");
    sweep->add_option("--config", config, "Sweep grid (JSON)")->required();
    sweep->add_option("--seed", seed, "Run only this seed");
    sweep->add_option("--out", out, "Output directory");
    sweep->add_option("--jobs", jobs, "Parallel runs")->check(CLI::PositiveNumber);

    std::vector<std::size_t> ns{5, 10, 20, 50, 100};
    std::vector<std::size_t> ds{2, 5, 10};
    std::size_t samples = 1000;
    std::uint64_t mm_seed = 1;
    auto* mm = app.add_subcommand("mean-medoid", "Distance between sample mean and medoid of uniform points");
    mm->add_option("--n", ns, "Sample sizes")->delimiter(',');
    mm->add_option("--d", ds, "Dimensions")->delimiter(',');
    mm->add_option("--samples", samples, "Draws per (n, d)")->check(CLI::PositiveNumber);
    mm->add_option("--seed", mm_seed, "Base seed");
    mm->add_option("--out", out, "Output directory");

    std::string input;
    std::optional<std::string> schema;
    auto* filter = app.add_subcommand("filter-bpic", "Filter an invoice log export to well-formed cases");
    filter->add_option("--input", input, "Flattened event log CSV")->required();
    filter->add_option("--schema", schema, "Column bindings (JSON); defaults to the BPIC 2019 export layout");
    filter->add_option("--out", out, "Output directory");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*gen) cli::cmd_gen(config, seed, out);
        else if (*run) cli::cmd_run(config, seed, out);
        else if (*sweep) cli::cmd_sweep(config, seed, out, jobs);
        else if (*mm) cli::cmd_mean_medoid(ns, ds, samples, mm_seed, out);
        else if (*filter) {
            std::optional<std::filesystem::path> schema_path;
            if (schema) schema_path = *schema;
            cli::cmd_filter_bpic(input, out, schema_path);
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
