#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "coldstart/dataset.hpp"
#include "coldstart/kmeans.hpp"

namespace coldstart {

struct EvalConfig {
    /// Ratings hidden per user and ranked back.
    Index holdout_per_user = 10;
    /// Items the user never rated, ranked alongside the holdouts with gain 0.
    Index candidate_pool = 100;
    /// Normalized rating at or above which a holdout counts as relevant for MAP.
    double relevance_threshold = 4.0;
    Index ndcg_cutoff = 10;
    std::uint64_t seed = 0;

    void validate() const;
};

struct SweepRow {
    Index k_coeff = 0;
    double ndcg_mean = 0.0;
    double map_mean = 0.0;
    Index n_clusters = 0;
};

struct SweepResult {
    std::vector<SweepRow> rows;
    Index best_by_ndcg = 0;
    Index best_by_map = 0;
};

/// Mean rating of item among the user's cluster co-members who rated it,
/// falling back to the item's mean over all other users, then to 3.0.
double predict_score(const ClusterModel& model, const RatingMatrix& m, Index user, Index item);

/// Per-cluster rating sums for bulk scoring; agrees with predict_score.
class ClusterPredictor {
public:
    ClusterPredictor(const ClusterModel& model, const RatingMatrix& m);
    double score(Index user, Index item) const;

private:
    const RatingMatrix* matrix_;
    std::vector<Index> labels_;
    Eigen::MatrixXd cluster_sum_;
    Eigen::MatrixXi cluster_count_;
    Eigen::VectorXd item_sum_;
    Eigen::VectorXi item_count_;
};

/// DCG/IDCG over the first n positions with gain / log2(position + 1).
/// Returns 1 when the ideal DCG is 0.
double ndcg_at_n(std::span<const double> ranked_gains, std::span<const double> ideal_gains,
                 Index n);

/// Average precision of a ranking; nullopt when relevant is empty (the user
/// is skipped from MAP). Relevant items missing from the ranking count as misses.
std::optional<double> average_precision(std::span<const Index> ranked_items,
                                        std::span<const Index> relevant);

/// Sweeps the cluster-size coefficient: per coeff, fits k-means with
/// n_clusters_from_coeff on the matrix minus each user's holdouts, ranks
/// holdouts and a sampled pool of unrated items by predicted score (ties by
/// ascending item), and averages NDCG@cutoff and AP over users.
SweepResult sweep_coefficient(const RatingMatrix& m, std::span<const Index> coeffs,
                              const KMeansConfig& kmeans_template, const EvalConfig& eval);

/// `k_coeff,n_clusters,ndcg_mean,map_mean` rows plus a `# best_by_ndcg=… best_by_map=…` footer.
void write_sweep_csv(const SweepResult& result, std::ostream& out);

}  // namespace coldstart
