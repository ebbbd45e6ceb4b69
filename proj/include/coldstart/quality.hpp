#pragma once

#include <cmath>
#include <vector>

#include <Eigen/Core>

#include "coldstart/dataset.hpp"
#include "coldstart/kmeans.hpp"

namespace coldstart {

/// Davies-Bouldin validity of a clustering, reported both as the usual
/// non-negative index and negated (better clusterings approach 0 from below).
struct ClusterQuality {
    /// Mean Euclidean distance of members to their centroid; NaN for empty clusters.
    Eigen::VectorXd scatter;
    /// max over partners m of (S_j + S_m) / d(c_j, c_m); NaN when cluster j is
    /// empty or every non-empty partner centroid coincides with c_j.
    Eigen::VectorXd db_term;
    double db_index = 0.0;
    double db_signed = 0.0;

    bool usable(Index j) const { return !std::isnan(db_term(j)); }
};

/// Combines per-cluster scatters with centroid separations. Pairs of
/// coincident centroids are left out of each max.
ClusterQuality davies_bouldin_from_scatter(const Eigen::VectorXd& scatter,
                                           const Eigen::MatrixXd& centroids);

double cluster_scatter(const ClusterModel& model, const RatingMatrix& m, Index j);
ClusterQuality davies_bouldin(const ClusterModel& model, const RatingMatrix& m);

/// -D_j for cluster j, the signed contribution of that single cluster.
double per_cluster_quality(const ClusterModel& model, const RatingMatrix& m, Index j);
double per_cluster_quality(const ClusterQuality& quality, Index j);

}  // namespace coldstart
