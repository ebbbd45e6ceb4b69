#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <Eigen/SparseCore>

#include "coldstart/dataset.hpp"
#include "coldstart/errors.hpp"

namespace coldstart {

enum class InitMethod { KMeansPlusPlus, RandomPoints };

struct KMeansConfig {
    Index n_clusters = 1;
    int restarts = 10;
    int max_steps = 100;
    /// Converged once no centroid moves farther than this.
    double conv_tol = 1e-6;
    std::uint64_t seed = 0;
    InitMethod init = InitMethod::KMeansPlusPlus;

    void validate() const;
    std::uint64_t fingerprint() const;
};

/// ceil(n_users / k_coeff), clamped to [1, n_users].
Index n_clusters_from_coeff(Index n_users, Index k_coeff);

/// Squared Euclidean distance between a sparse rating row and a dense point.
///
/// Unrated dimensions of the sparse row count as 0.0. Terms are summed in
/// dimension order, so a row that densifies to exactly b yields exactly 0.
/// This is the distance every clustering decision is checked against.
template <typename SparseDerived, typename DenseDerived>
typename DenseDerived::Scalar sq_euclidean(const Eigen::SparseMatrixBase<SparseDerived>& a,
                                           const Eigen::MatrixBase<DenseDerived>& b) {
    using Scalar = typename DenseDerived::Scalar;
    if (a.size() != b.size())
        throw ArgumentError("dimension mismatch: " + std::to_string(a.size()) + " vs " +
                            std::to_string(b.size()));
    const auto& rhs = b.derived();
    Scalar total(0);
    Index d = 0;
    for (typename SparseDerived::InnerIterator it(a.derived(), 0); it; ++it) {
        for (; d < it.index(); ++d) total += rhs(d) * rhs(d);
        const Scalar diff = Scalar(it.value()) - rhs(d);
        total += diff * diff;
        ++d;
    }
    for (; d < b.size(); ++d) total += rhs(d) * rhs(d);
    return total;
}

struct FitTrace;

struct Assignment {
    Index cluster = 0;
    double distance = 0.0;
};

/// A fitted clustering: one centroid per row, one assignment per user.
class ClusterModel {
public:
    ClusterModel() = default;

    /// Builds a model from given centroids and assignments, recomputing SSE
    /// against m. Assignments are taken as given (not re-derived).
    static ClusterModel from_parts(Eigen::MatrixXd centroids, std::vector<Index> assignments,
                                   const RatingMatrix& m, std::uint64_t seed = 0,
                                   std::uint64_t fingerprint = 0);

    Index n_clusters() const { return centroids_.rows(); }
    Index n_items() const { return centroids_.cols(); }
    const Eigen::MatrixXd& centroids() const { return centroids_; }
    auto centroid(Index j) const { return centroids_.row(j); }
    const std::vector<Index>& assignments() const { return assignments_; }
    double sse() const { return sse_; }
    std::uint64_t seed() const { return seed_; }
    std::uint64_t fingerprint() const { return fingerprint_; }
    std::vector<Index> cluster_sizes() const;

private:
    friend ClusterModel fit(const RatingMatrix&, const KMeansConfig&, FitTrace*);
    Eigen::MatrixXd centroids_;
    std::vector<Index> assignments_;
    double sse_ = 0.0;
    std::uint64_t seed_ = 0;
    std::uint64_t fingerprint_ = 0;
};

/// Optional per-run diagnostics from fit.
struct FitTrace {
    std::vector<double> restart_sse;
    /// SSE after initialization and after every (update, assign) step, per restart.
    std::vector<std::vector<double>> step_sse;
    std::vector<int> restart_steps;
};

/// Best-of-restarts Lloyd k-means over zero-filled rating rows.
///
/// Restart r is seeded with cfg.seed + r. Each run alternates a centroid
/// update (coordinate mean) and a nearest-centroid assignment (ties to the
/// lowest index), repairing empty clusters by moving the point farthest from
/// its centroid into them. A run stops when assignments no longer change,
/// no centroid moves more than conv_tol, or max_steps is reached. The run
/// with the lowest SSE wins; ties go to the earlier restart. Output is
/// bit-identical for a fixed config regardless of worker count.
ClusterModel fit(const RatingMatrix& m, const KMeansConfig& cfg, FitTrace* trace = nullptr);

/// Nearest centroid for a row; ties go to the lowest index.
Assignment assign(const ClusterModel& model, const SparseRow& row);
Assignment assign(const ClusterModel& model, const RatingMatrix& m, Index user);

/// Recomputed total squared distance of every user to its assigned centroid.
double sse(const ClusterModel& model, const RatingMatrix& m);

/// Nearest centroids for every user of m (used by fit and model loading).
std::vector<Assignment> assign_all(const Eigen::MatrixXd& centroids, const RatingMatrix& m);

/// Text persistence: `coldstart-kmeans v1 n_clusters n_items seed sse`, then one
/// centroid per line with 17 significant digits.
void save_model(const ClusterModel& model, std::ostream& out);

/// Reads a persisted model and re-derives assignments for m. Throws
/// InvariantError when the recomputed SSE disagrees with the header.
ClusterModel load_model(std::istream& in, const RatingMatrix& m);

}  // namespace coldstart
