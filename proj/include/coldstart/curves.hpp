#pragma once

#include <iosfwd>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "coldstart/dataset.hpp"
#include "coldstart/kmeans.hpp"
#include "coldstart/quality.hpp"

namespace coldstart {

struct SuccessPoint {
    Index t = 0;
    double success_fraction = 0.0;
    /// Users with at least t ratings.
    Index n_evaluated = 0;
};

struct SuccessCurve {
    std::vector<SuccessPoint> points;
};

struct QualityPoint {
    Index t = 0;
    double current_quality_mean = 0.0;
    double reference_quality_mean = 0.0;
};

struct QualityCurve {
    std::vector<QualityPoint> points;
};

/// Cluster of every user's t-rating prefix against frozen centroids.
struct PrefixTable {
    std::vector<Index> users;
    std::vector<Index> lengths;
    /// Cluster of the full rating history.
    std::vector<Index> final_cluster;
    /// clusters(r, t - 1) for t = 1..t_max; past a user's row length the
    /// prefix is the full row.
    Eigen::Matrix<Index, Eigen::Dynamic, Eigen::Dynamic> clusters;

    Index t_max() const { return clusters.cols(); }
};

PrefixTable prefix_assignments(const ClusterModel& model, const RatingMatrix& m,
                               std::span<const Index> users, Index t_max, PrefixOrder order);

/// Fraction of users with at least t ratings whose t-prefix lands in their final cluster.
SuccessCurve success_curve(const PrefixTable& table);
SuccessCurve success_curve(const ClusterModel& model, const RatingMatrix& m,
                           std::span<const Index> users, Index t_max, PrefixOrder order);

/// Mean signed Davies-Bouldin term of the prefix-assigned cluster (current)
/// and of the final cluster (reference), over all users at every t.
QualityCurve quality_curve(const PrefixTable& table, const ClusterQuality& quality);
QualityCurve quality_curve(const ClusterModel& model, const RatingMatrix& m,
                           std::span<const Index> users, Index t_max, PrefixOrder order);

/// `t,success_fraction,n_evaluated`
void write_success_csv(const SuccessCurve& curve, std::ostream& out);
SuccessCurve read_success_csv(std::istream& in);
/// `t,current_quality_mean,reference_quality_mean`
void write_quality_csv(const QualityCurve& curve, std::ostream& out);
QualityCurve read_quality_csv(std::istream& in);

}  // namespace coldstart
