#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "coldstart/errors.hpp"
#include "coldstart/parallel.hpp"
#include "coldstart/pipeline.hpp"

namespace {

struct Overrides {
    std::string config;
    std::optional<std::string> dataset, input, out, coeffs;
    std::optional<long long> k_coeff, t_max, sample, min_ratings;
    std::optional<unsigned long long> seed;
    std::optional<unsigned> threads;
    std::vector<std::string> sets;
};

coldstart::RunConfig resolve(const Overrides& o) {
    coldstart::RunConfig cfg;
    if (!o.config.empty()) cfg.load_file(o.config);
    for (const auto& kv : o.sets) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos) throw coldstart::ArgumentError("--set expects key=value, got '" + kv + "'");
        cfg.set(kv.substr(0, eq), kv.substr(eq + 1));
    }
    if (o.dataset) cfg.set("dataset", *o.dataset);
    if (o.input) cfg.input_path = *o.input;
    if (o.out) cfg.output_dir = *o.out;
    if (o.coeffs) cfg.set("sweep_coeffs", *o.coeffs);
    if (o.k_coeff) cfg.set("k_coeff", std::to_string(*o.k_coeff));
    if (o.t_max) cfg.set("t_max", std::to_string(*o.t_max));
    if (o.sample) cfg.set("sample_size", std::to_string(*o.sample));
    if (o.min_ratings) cfg.set("min_ratings", std::to_string(*o.min_ratings));
    if (o.seed) cfg.seed = *o.seed;
    if (o.threads) cfg.threads = *o.threads;
    cfg.validate();
    return cfg;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Minimal-ratings estimation for cluster-based cold start"};
    app.require_subcommand(1);
    Overrides o;
    app.add_option("--config", o.config, "flat key = value config file");
    app.add_option("--dataset", o.dataset, "movielens or jester");
    app.add_option("--input", o.input, "raw ratings file");
    app.add_option("--k-coeff", o.k_coeff, "users per cluster");
    app.add_option("--seed", o.seed);
    app.add_option("--t-max", o.t_max, "longest prefix evaluated (0: auto)");
    app.add_option("--sample", o.sample, "users sampled for the curves");
    app.add_option("--min-ratings", o.min_ratings);
    app.add_option("--out", o.out, "output directory");
    app.add_option("--threads", o.threads, "worker threads (0: auto)");
    app.add_option("--coeffs", o.coeffs, "comma separated sweep coefficients");
    app.add_option("--set", o.sets, "key=value config override")->take_all();

    const std::vector<std::pair<std::string, std::string>> commands{
        {"ingest", "parse the raw dataset into canonical.csv"},
        {"fit", "cluster users and save model.txt"},
        {"sweep", "rank-metric sweep over cluster coefficients"},
        {"curves", "prefix success and quality curves"},
        {"threshold", "breakpoint and intersection reports"},
        {"pipeline", "every stage, then summary.json"}};
    for (const auto& [name, help] : commands) app.add_subcommand(name, help)->fallthrough();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    const std::string command = app.get_subcommands().front()->get_name();
    try {
        const coldstart::RunConfig cfg = resolve(o);
        coldstart::set_worker_count(cfg.threads);
        coldstart::write_resolved_config(cfg);
        if (command == "ingest")
            coldstart::run_ingest(cfg);
        else if (command == "fit")
            coldstart::run_fit(cfg);
        else if (command == "sweep")
            coldstart::run_sweep(cfg);
        else if (command == "curves")
            coldstart::run_curves(cfg);
        else if (command == "threshold")
            coldstart::run_threshold(cfg);
        else
            coldstart::run_pipeline(cfg);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return coldstart::exit_code_for(e);
    }
    return 0;
}
