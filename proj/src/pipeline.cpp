#include "coldstart/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <fstream>
#include <iostream>
#include <sstream>

#include <json.hpp>

#include "coldstart/curves.hpp"
#include "coldstart/errors.hpp"
#include "coldstart/quality.hpp"
#include "text.hpp"

namespace coldstart {

namespace {

template <typename T>
T parse_or_throw(const std::string& key, const std::string& value) {
    T out{};
    if (!parse_number(value, out))
        throw ArgumentError("bad value '" + value + "' for " + key);
    return out;
}

Index parse_count(const std::string& key, const std::string& value) {
    const auto v = parse_or_throw<Index>(key, value);
    if (v < 0) throw ArgumentError(key + " must be non-negative");
    return v;
}

bool parse_bool(const std::string& key, const std::string& value) {
    if (value == "true" || value == "1" || value == "yes") return true;
    if (value == "false" || value == "0" || value == "no") return false;
    throw ArgumentError("bad boolean '" + value + "' for " + key);
}

std::string join(const std::vector<Index>& values) {
    std::string out;
    for (std::size_t i = 0; i < values.size(); ++i) out += (i ? "," : "") + std::to_string(values[i]);
    return out;
}

std::ifstream open_input(const std::filesystem::path& path, const std::string& what) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open " + what + " '" + path.string() + "'");
    return in;
}

std::ofstream open_output(const std::filesystem::path& path) {
    std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw InputError("cannot write '" + path.string() + "'");
    return out;
}

RatingMatrix load_population(const RunConfig& cfg) {
    auto in = open_input(cfg.out("canonical.csv"), "canonical export (run ingest first)");
    const auto events = read_canonical_csv(in);
    if (events.empty()) throw EmptyResultError("canonical export has no ratings");
    return build_matrix(events, DedupPolicy::KeepLast, cfg.scheme());
}

ClusterModel load_fitted(const RunConfig& cfg, const RatingMatrix& m) {
    auto in = open_input(cfg.out("model.txt"), "model file (run fit first)");
    return load_model(in, m);
}

void print_stage(const std::string& stage, const std::string& msg) {
    std::cout << '[' << stage << "] " << msg << '\n';
}

}  // namespace

void RunConfig::set(const std::string& raw_key, const std::string& raw_value) {
    std::string key(trim(raw_key));
    std::replace(key.begin(), key.end(), '-', '_');
    const std::string value(trim(raw_value));
    if (key == "dataset") {
        if (value == "movielens")
            dataset = DatasetKind::MovieLens;
        else if (value == "jester")
            dataset = DatasetKind::Jester;
        else
            throw ArgumentError("dataset must be movielens or jester, got '" + value + "'");
    } else if (key == "input" || key == "input_path") {
        input_path = value;
    } else if (key == "k_coeff") {
        k_coeff = parse_count(key, value);
    } else if (key == "min_ratings") {
        min_ratings = parse_count(key, value);
    } else if (key == "sample_size" || key == "sample") {
        sample_size = parse_count(key, value);
    } else if (key == "seed") {
        seed = parse_or_throw<std::uint64_t>(key, value);
    } else if (key == "ordering") {
        if (value == "auto")
            ordering.reset();
        else if (value == "by_timestamp")
            ordering = PrefixOrder::ByTimestamp;
        else if (value == "by_item_index")
            ordering = PrefixOrder::ByItemIndex;
        else
            throw ArgumentError("ordering must be auto, by_timestamp or by_item_index");
    } else if (key == "t_max") {
        t_max = parse_count(key, value);
    } else if (key == "subsample_users") {
        subsample_users = parse_count(key, value);
    } else if (key == "restarts") {
        kmeans.restarts = parse_or_throw<int>(key, value);
    } else if (key == "max_steps") {
        kmeans.max_steps = parse_or_throw<int>(key, value);
    } else if (key == "conv_tol") {
        kmeans.conv_tol = parse_or_throw<double>(key, value);
    } else if (key == "init") {
        if (value == "kmeanspp")
            kmeans.init = InitMethod::KMeansPlusPlus;
        else if (value == "random_points")
            kmeans.init = InitMethod::RandomPoints;
        else
            throw ArgumentError("init must be kmeanspp or random_points");
    } else if (key == "holdout_per_user") {
        eval.holdout_per_user = parse_count(key, value);
    } else if (key == "candidate_pool") {
        eval.candidate_pool = parse_count(key, value);
    } else if (key == "relevance_threshold") {
        eval.relevance_threshold = parse_or_throw<double>(key, value);
    } else if (key == "ndcg_cutoff") {
        eval.ndcg_cutoff = parse_count(key, value);
    } else if (key == "sweep_coeffs" || key == "coeffs") {
        sweep_coeffs.clear();
        for (auto part : split(value, ",")) {
            if (trim(part).empty()) continue;
            sweep_coeffs.push_back(parse_count(key, std::string(trim(part))));
        }
    } else if (key == "breakpoint_method") {
        breakpoint_method = parse_breakpoint_method(value);
    } else if (key == "breakpoint_t_min") {
        breakpoint_t_min = parse_count(key, value);
    } else if (key == "breakpoint_t_max") {
        breakpoint_t_max = parse_count(key, value);
    } else if (key == "output_dir" || key == "out") {
        output_dir = value;
    } else if (key == "threads") {
        threads = parse_or_throw<unsigned>(key, value);
    } else if (key == "jester_count_mismatch") {
        if (value == "warn")
            jester_count_mismatch = CountMismatch::Warn;
        else if (value == "fail")
            jester_count_mismatch = CountMismatch::Fail;
        else
            throw ArgumentError("jester_count_mismatch must be warn or fail");
    } else if (key == "movielens_clamp_half_star") {
        movielens_clamp_half_star = parse_bool(key, value);
    } else {
        throw ArgumentError("unknown config key '" + key + "'");
    }
}

void RunConfig::load_file(const std::filesystem::path& path) {
    auto in = open_input(path, "config file");
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto text = trim(line);
        if (text.empty() || text.front() == '#') continue;
        const auto eq = text.find('=');
        if (eq == std::string_view::npos) throw ParseError(line_no, "expected key = value");
        set(std::string(text.substr(0, eq)), std::string(text.substr(eq + 1)));
    }
}

std::string RunConfig::to_text() const {
    std::ostringstream out;
    out << "dataset = " << (dataset == DatasetKind::MovieLens ? "movielens" : "jester") << '\n'
        << "input = " << input_path << '\n'
        << "k_coeff = " << k_coeff << '\n'
        << "min_ratings = " << min_ratings << '\n'
        << "sample_size = " << sample_size << '\n'
        << "seed = " << seed << '\n'
        << "ordering = "
        << (!ordering ? "auto"
                      : (*ordering == PrefixOrder::ByTimestamp ? "by_timestamp" : "by_item_index"))
        << '\n'
        << "t_max = " << t_max << '\n'
        << "subsample_users = " << subsample_users << '\n'
        << "restarts = " << kmeans.restarts << '\n'
        << "max_steps = " << kmeans.max_steps << '\n'
        << "conv_tol = " << format_double(kmeans.conv_tol) << '\n'
        << "init = " << (kmeans.init == InitMethod::KMeansPlusPlus ? "kmeanspp" : "random_points")
        << '\n'
        << "holdout_per_user = " << eval.holdout_per_user << '\n'
        << "candidate_pool = " << eval.candidate_pool << '\n'
        << "relevance_threshold = " << format_double(eval.relevance_threshold) << '\n'
        << "ndcg_cutoff = " << eval.ndcg_cutoff << '\n'
        << "sweep_coeffs = " << join(sweep_coeffs) << '\n'
        << "breakpoint_method = " << to_string(breakpoint_method) << '\n'
        << "breakpoint_t_min = " << breakpoint_t_min << '\n'
        << "breakpoint_t_max = " << breakpoint_t_max << '\n'
        << "output_dir = " << output_dir << '\n'
        << "threads = " << threads << '\n'
        << "jester_count_mismatch = "
        << (jester_count_mismatch == CountMismatch::Warn ? "warn" : "fail") << '\n'
        << "movielens_clamp_half_star = " << (movielens_clamp_half_star ? "true" : "false")
        << '\n';
    return out.str();
}

void RunConfig::validate() const {
    if (k_coeff < 1) throw ArgumentError("k_coeff must be at least 1");
    if (sample_size < 1) throw ArgumentError("sample_size must be at least 1");
    KMeansConfig probe = kmeans;
    probe.n_clusters = 1;
    probe.validate();
    eval.validate();
    if (output_dir.empty()) throw ArgumentError("output_dir must not be empty");
}

PrefixOrder RunConfig::prefix_order() const {
    if (ordering) return *ordering;
    return dataset == DatasetKind::MovieLens ? PrefixOrder::ByTimestamp : PrefixOrder::ByItemIndex;
}

NormalizationScheme RunConfig::scheme() const {
    return dataset == DatasetKind::Jester ? NormalizationScheme::jester()
                                          : NormalizationScheme::identity();
}

std::filesystem::path RunConfig::out(const std::string& name) const {
    return std::filesystem::path(output_dir) / name;
}

void write_resolved_config(const RunConfig& cfg) {
    auto out = open_output(cfg.out("resolved.config"));
    out << cfg.to_text();
}

DatasetStats run_ingest(const RunConfig& cfg) {
    cfg.validate();
    if (cfg.input_path.empty()) throw ArgumentError("no input path given (--input)");
    auto in = open_input(cfg.input_path, "input file");
    RatingMatrix m;
    try {
        if (cfg.dataset == DatasetKind::MovieLens) {
            const auto events = parse_movielens(in, cfg.movielens_clamp_half_star);
            m = build_matrix(events);
        } else {
            JesterOptions opts;
            opts.on_count_mismatch = cfg.jester_count_mismatch;
            m = parse_jester(in, opts);
        }
    } catch (const InputError& e) {
        throw InputError(cfg.input_path + ": " + e.what());
    }
    const DatasetStats full{m.n_users(), m.n_items(), m.n_ratings()};
    print_stage("ingest", std::to_string(full.users) + " users, " + std::to_string(full.items) +
                              " items, " + std::to_string(full.ratings) + " ratings");
    if (cfg.subsample_users > 0 && cfg.subsample_users < m.n_users()) {
        const auto keep = sample_users(m, cfg.subsample_users, cfg.seed);
        m = select_users(m, keep);
        print_stage("ingest", "subsampled " + std::to_string(m.n_users()) + " users, " +
                                  std::to_string(m.n_ratings()) + " ratings");
    }
    auto out = open_output(cfg.out("canonical.csv"));
    write_canonical_csv(m, out);
    return full;
}

FitOutcome run_fit(const RunConfig& cfg) {
    cfg.validate();
    const RatingMatrix m = load_population(cfg);
    if (cfg.k_coeff > m.n_users())
        warn_stderr("k_coeff " + std::to_string(cfg.k_coeff) + " exceeds the user count " +
                    std::to_string(m.n_users()) + "; using a single cluster");
    KMeansConfig kcfg = cfg.kmeans;
    kcfg.seed = cfg.seed;
    kcfg.n_clusters = n_clusters_from_coeff(m.n_users(), cfg.k_coeff);
    const ClusterModel model = fit(m, kcfg);
    {
        auto out = open_output(cfg.out("model.txt"));
        save_model(model, out);
    }
    FitOutcome outcome{model.n_clusters(), model.sse(), std::nullopt};
    try {
        outcome.db_signed = davies_bouldin(model, m).db_signed;
    } catch (const DegenerateModelError& e) {
        warn_stderr(std::string("Davies-Bouldin unavailable: ") + e.what());
    }
    print_stage("fit", std::to_string(outcome.n_clusters) + " clusters, sse " +
                           format_double(outcome.sse) + ", db_signed " +
                           (outcome.db_signed ? format_double(*outcome.db_signed) : "n/a"));
    return outcome;
}

SweepResult run_sweep(const RunConfig& cfg) {
    cfg.validate();
    if (cfg.sweep_coeffs.empty()) throw ArgumentError("empty coefficient list (--coeffs)");
    const RatingMatrix m = load_population(cfg);
    KMeansConfig kcfg = cfg.kmeans;
    kcfg.seed = cfg.seed;
    EvalConfig ecfg = cfg.eval;
    ecfg.seed = cfg.seed;
    const auto result = sweep_coefficient(m, cfg.sweep_coeffs, kcfg, ecfg);
    auto out = open_output(cfg.out("sweep.csv"));
    write_sweep_csv(result, out);
    print_stage("sweep", "best_by_ndcg=" + std::to_string(result.best_by_ndcg) +
                             " best_by_map=" + std::to_string(result.best_by_map));
    return result;
}

CurvesOutcome run_curves(const RunConfig& cfg) {
    cfg.validate();
    const RatingMatrix m = load_population(cfg);
    const ClusterModel model = load_fitted(cfg, m);
    const PrefixOrder order = cfg.prefix_order();

    Index min_len = m.row_length(0);
    for (Index u = 1; u < m.n_users(); ++u) min_len = std::min(min_len, m.row_length(u));
    const bool split_cohorts = cfg.dataset == DatasetKind::MovieLens;

    std::vector<Index> rest, min_cohort;
    for (Index u = 0; u < m.n_users(); ++u) {
        const Index len = m.row_length(u);
        if (split_cohorts && len == min_len)
            min_cohort.push_back(u);
        else if (len >= cfg.min_ratings && (!split_cohorts || len > min_len))
            rest.push_back(u);
    }
    if (rest.empty())
        throw EmptyResultError("no user has at least " + std::to_string(cfg.min_ratings) +
                               " ratings");

    auto draw = [&](const std::vector<Index>& pool, std::uint64_t salt) {
        const Index n = std::min<Index>(cfg.sample_size, static_cast<Index>(pool.size()));
        return sample_from(pool, n, cfg.seed + salt);
    };
    auto longest = [&](const std::vector<Index>& users) {
        Index t = 1;
        for (Index u : users) t = std::max(t, m.row_length(u));
        return t;
    };

    CurvesOutcome outcome;
    const auto sample = draw(rest, 0);
    outcome.rest_users = static_cast<Index>(sample.size());
    const Index t_max = cfg.t_max > 0 ? cfg.t_max : longest(sample);
    const PrefixTable table = prefix_assignments(model, m, sample, t_max, order);
    outcome.success = success_curve(table);
    outcome.quality = quality_curve(table, davies_bouldin(model, m));
    {
        auto out = open_output(cfg.out("success.csv"));
        write_success_csv(outcome.success, out);
    }
    {
        auto out = open_output(cfg.out("quality.csv"));
        write_quality_csv(outcome.quality, out);
    }
    if (split_cohorts && !min_cohort.empty()) {
        const auto cohort = draw(min_cohort, 1);
        outcome.min_cohort_users = static_cast<Index>(cohort.size());
        outcome.success_min_cohort = success_curve(model, m, cohort, min_len, order);
        auto out = open_output(cfg.out("success_mincohort.csv"));
        write_success_csv(*outcome.success_min_cohort, out);
    }
    print_stage("curves", std::to_string(outcome.rest_users) + " users up to t=" +
                              std::to_string(t_max) +
                              (outcome.min_cohort_users
                                   ? ", " + std::to_string(outcome.min_cohort_users) +
                                         " users in the minimum cohort"
                                   : std::string()));
    return outcome;
}

ThresholdOutcome run_threshold(const RunConfig& cfg) {
    cfg.validate();
    SuccessCurve success;
    QualityCurve quality;
    {
        auto in = open_input(cfg.out("success.csv"), "success curve (run curves first)");
        success = read_success_csv(in);
    }
    {
        auto in = open_input(cfg.out("quality.csv"), "quality curve (run curves first)");
        quality = read_quality_csv(in);
    }
    if (success.points.empty()) throw InputError("success curve is empty");
    const Index t_lo = cfg.breakpoint_t_min > 0 ? cfg.breakpoint_t_min : success.points.front().t;
    const Index t_hi = cfg.breakpoint_t_max > 0 ? cfg.breakpoint_t_max : success.points.back().t;

    ThresholdOutcome outcome;
    outcome.breakpoint = detect_breakpoint(success, cfg.breakpoint_method, t_lo, t_hi);
    try {
        outcome.intersection = regression_intersection(quality);
    } catch (const NoIntersectionError& e) {
        outcome.intersection_error = e.what();
    }

    {
        auto out = open_output(cfg.out("threshold.txt"));
        write_report(outcome.breakpoint, out);
        if (outcome.intersection)
            write_report(*outcome.intersection, out);
        else
            out << "intersection_error=" << outcome.intersection_error << '\n';
    }
    print_stage("threshold", "t_star=" + std::to_string(outcome.breakpoint.t_star) +
                                 (outcome.intersection
                                      ? " t_cross=" + format_double(outcome.intersection->t_cross)
                                      : " (no intersection)"));
    if (!outcome.intersection) throw NoIntersectionError(outcome.intersection_error);
    return outcome;
}

void write_summary(const RunConfig& cfg,
                   const std::vector<std::pair<std::string, double>>& stage_seconds) {
    using nlohmann::ordered_json;
    ordered_json j;
    const RatingMatrix m = load_population(cfg);
    j["dataset"] = {{"kind", cfg.dataset == DatasetKind::MovieLens ? "movielens" : "jester"},
                    {"users", m.n_users()},
                    {"items", m.n_items()},
                    {"ratings", m.n_ratings()}};
    if (std::filesystem::exists(cfg.out("model.txt"))) {
        const ClusterModel model = load_fitted(cfg, m);
        j["n_clusters"] = model.n_clusters();
        j["sse"] = model.sse();
        try {
            j["db_signed"] = davies_bouldin(model, m).db_signed;
        } catch (const DegenerateModelError&) {
            j["db_signed"] = nullptr;
        }
    }
    if (std::filesystem::exists(cfg.out("success.csv"))) {
        auto in = open_input(cfg.out("success.csv"), "success curve");
        const auto success = read_success_csv(in);
        if (!success.points.empty()) {
            const Index t_lo = cfg.breakpoint_t_min > 0 ? cfg.breakpoint_t_min : success.points.front().t;
            const Index t_hi = cfg.breakpoint_t_max > 0 ? cfg.breakpoint_t_max : success.points.back().t;
            try {
                const auto bp = detect_breakpoint(success, cfg.breakpoint_method, t_lo, t_hi);
                j["breakpoint"] = {{"t_star", bp.t_star},
                                   {"method", to_string(bp.method)},
                                   {"left_slope", bp.left.slope},
                                   {"right_slope", bp.right.slope},
                                   {"total_sse", bp.total_sse}};
            } catch (const InputError& e) {
                j["breakpoint"] = {{"error", e.what()}};
            }
        }
    }
    if (std::filesystem::exists(cfg.out("quality.csv"))) {
        auto in = open_input(cfg.out("quality.csv"), "quality curve");
        try {
            const auto ix = regression_intersection(read_quality_csv(in));
            j["intersection"] = {{"a", ix.a},
                                 {"b", ix.b},
                                 {"reference_level", ix.reference_level},
                                 {"t_cross", ix.t_cross},
                                 {"extrapolated", ix.extrapolated}};
        } catch (const Error& e) {
            j["intersection"] = {{"error", e.what()}};
        }
    }
    ordered_json timings = ordered_json::object();
    for (const auto& [stage, seconds] : stage_seconds) timings[stage] = seconds;
    j["stage_seconds"] = timings;
    ordered_json config = ordered_json::object();
    std::istringstream lines(cfg.to_text());
    std::string line;
    while (std::getline(lines, line)) {
        const auto eq = line.find(" = ");
        if (eq != std::string::npos) config[line.substr(0, eq)] = line.substr(eq + 3);
    }
    j["config"] = config;
    auto out = open_output(cfg.out("summary.json"));
    out << j.dump(2) << '\n';
}

void run_pipeline(const RunConfig& cfg) {
    std::vector<std::pair<std::string, double>> seconds;
    auto timed = [&](const std::string& name, auto&& stage) {
        const auto start = std::chrono::steady_clock::now();
        stage();
        seconds.emplace_back(
            name, std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count());
    };
    timed("ingest", [&] { run_ingest(cfg); });
    timed("fit", [&] { run_fit(cfg); });
    if (cfg.sweep_coeffs.empty())
        print_stage("sweep", "skipped (no coefficients)");
    else
        timed("sweep", [&] { run_sweep(cfg); });
    timed("curves", [&] { run_curves(cfg); });
    std::exception_ptr failure;
    timed("threshold", [&] {
        try {
            run_threshold(cfg);
        } catch (const NoIntersectionError&) {
            failure = std::current_exception();
        }
    });
    write_summary(cfg, seconds);
    if (failure) std::rethrow_exception(failure);
}

int exit_code_for(const std::exception& e) {
    if (dynamic_cast<const InputError*>(&e)) return 2;
    if (dynamic_cast<const MethodError*>(&e)) return 3;
    return 4;
}

}  // namespace coldstart
