#pragma once

#include <cstdint>
#include <exception>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "coldstart/dataset.hpp"
#include "coldstart/kmeans.hpp"
#include "coldstart/recsys_eval.hpp"
#include "coldstart/threshold.hpp"

namespace coldstart {

enum class DatasetKind { MovieLens, Jester };

/// Everything one run of the methodology needs. Text form is flat
/// `key = value` lines; see set() for the keys.
struct RunConfig {
    DatasetKind dataset = DatasetKind::Jester;
    std::string input_path;
    Index k_coeff = 100;
    Index min_ratings = 50;
    Index sample_size = 100;
    std::uint64_t seed = 42;
    /// Unset: by_timestamp for MovieLens, by_item_index for Jester.
    std::optional<PrefixOrder> ordering;
    /// 0: longest history among the sampled users.
    Index t_max = 0;
    /// 0: keep every user; otherwise a seeded random subset is ingested.
    Index subsample_users = 0;
    KMeansConfig kmeans;
    EvalConfig eval;
    std::vector<Index> sweep_coeffs{25, 50, 100, 200};
    BreakpointMethod breakpoint_method = BreakpointMethod::SegmentedLinear;
    /// 0: first / last point of the success curve.
    Index breakpoint_t_min = 0;
    Index breakpoint_t_max = 0;
    std::string output_dir = "out";
    unsigned threads = 0;
    CountMismatch jester_count_mismatch = CountMismatch::Warn;
    bool movielens_clamp_half_star = false;

    /// Applies one key. Throws ArgumentError for unknown keys or bad values.
    void set(const std::string& key, const std::string& value);
    void load_file(const std::filesystem::path& path);
    /// Resolved configuration in the same `key = value` form load_file reads.
    std::string to_text() const;
    void validate() const;

    PrefixOrder prefix_order() const;
    NormalizationScheme scheme() const;
    std::filesystem::path out(const std::string& name) const;
};

struct DatasetStats {
    Index users = 0;
    Index items = 0;
    Index ratings = 0;
};

struct FitOutcome {
    Index n_clusters = 0;
    double sse = 0.0;
    std::optional<double> db_signed;
};

struct CurvesOutcome {
    SuccessCurve success;
    std::optional<SuccessCurve> success_min_cohort;
    QualityCurve quality;
    Index rest_users = 0;
    Index min_cohort_users = 0;
};

struct ThresholdOutcome {
    BreakpointReport breakpoint;
    std::optional<IntersectionReport> intersection;
    std::string intersection_error;
};

/// Parses the raw input; writes canonical.csv (after the optional subsample).
DatasetStats run_ingest(const RunConfig& cfg);
/// Fits k-means on canonical.csv; writes model.txt.
FitOutcome run_fit(const RunConfig& cfg);
/// Writes sweep.csv. Throws ArgumentError on an empty coefficient list.
SweepResult run_sweep(const RunConfig& cfg);
/// Writes success.csv, success_mincohort.csv (MovieLens) and quality.csv.
CurvesOutcome run_curves(const RunConfig& cfg);
/// Reads the curve CSVs; writes threshold.txt. Throws NoIntersectionError after
/// writing the breakpoint when the quality curve has no intersection.
ThresholdOutcome run_threshold(const RunConfig& cfg);
/// Writes summary.json, recomputing every number from the stage artifacts.
void write_summary(const RunConfig& cfg, const std::vector<std::pair<std::string, double>>& stage_seconds);
/// All stages in order, then the summary.
void run_pipeline(const RunConfig& cfg);

void write_resolved_config(const RunConfig& cfg);

/// 2 input/usage, 3 methodology, 4 internal invariant or anything unexpected.
int exit_code_for(const std::exception& e);

}  // namespace coldstart
