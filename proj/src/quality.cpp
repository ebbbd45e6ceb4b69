#include "coldstart/quality.hpp"

#include <cmath>
#include <limits>

#include "coldstart/errors.hpp"

namespace coldstart {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

Eigen::VectorXd all_scatters(const ClusterModel& model, const RatingMatrix& m) {
    if (m.n_items() != model.n_items() ||
        m.n_users() != static_cast<Index>(model.assignments().size()))
        throw ArgumentError("matrix shape does not match the model");
    const Index k = model.n_clusters();
    Eigen::VectorXd sum = Eigen::VectorXd::Zero(k);
    Eigen::VectorXd count = Eigen::VectorXd::Zero(k);
    for (Index u = 0; u < m.n_users(); ++u) {
        const Index j = model.assignments()[u];
        sum(j) += std::sqrt(sq_euclidean(m.values().row(u), model.centroid(j)));
        count(j) += 1.0;
    }
    Eigen::VectorXd scatter(k);
    for (Index j = 0; j < k; ++j) scatter(j) = count(j) > 0 ? sum(j) / count(j) : kNaN;
    return scatter;
}

}  // namespace

ClusterQuality davies_bouldin_from_scatter(const Eigen::VectorXd& scatter,
                                           const Eigen::MatrixXd& centroids) {
    const Index k = centroids.rows();
    if (scatter.size() != k) throw ArgumentError("scatter size does not match cluster count");
    Index non_empty = 0;
    for (Index j = 0; j < k; ++j) non_empty += std::isnan(scatter(j)) ? 0 : 1;
    if (non_empty < 2)
        throw DegenerateModelError("Davies-Bouldin needs at least 2 non-empty clusters, have " +
                                   std::to_string(non_empty));

    ClusterQuality q;
    q.scatter = scatter;
    q.db_term = Eigen::VectorXd::Constant(k, kNaN);
    double sum = 0.0;
    Index usable = 0;
    for (Index j = 0; j < k; ++j) {
        if (std::isnan(scatter(j))) continue;
        double worst = -1.0;
        for (Index other = 0; other < k; ++other) {
            if (other == j || std::isnan(scatter(other))) continue;
            const double sep = (centroids.row(j) - centroids.row(other)).norm();
            if (!(sep > 0.0)) continue;
            worst = std::max(worst, (scatter(j) + scatter(other)) / sep);
        }
        if (worst < 0.0) continue;
        q.db_term(j) = worst;
        sum += worst;
        ++usable;
    }
    if (usable == 0)
        throw DegenerateModelError("all non-empty cluster centroids coincide");
    q.db_index = sum / static_cast<double>(usable);
    q.db_signed = -q.db_index;
    return q;
}

double cluster_scatter(const ClusterModel& model, const RatingMatrix& m, Index j) {
    if (j < 0 || j >= model.n_clusters()) throw ArgumentError("cluster index out of range");
    const double s = all_scatters(model, m)(j);
    if (std::isnan(s)) throw DegenerateModelError("cluster " + std::to_string(j) + " is empty");
    return s;
}

ClusterQuality davies_bouldin(const ClusterModel& model, const RatingMatrix& m) {
    return davies_bouldin_from_scatter(all_scatters(model, m), model.centroids());
}

double per_cluster_quality(const ClusterQuality& quality, Index j) {
    if (j < 0 || j >= quality.db_term.size()) throw ArgumentError("cluster index out of range");
    if (!quality.usable(j))
        throw DegenerateModelError("cluster " + std::to_string(j) +
                                   " is empty or has no separated partner");
    return -quality.db_term(j);
}

double per_cluster_quality(const ClusterModel& model, const RatingMatrix& m, Index j) {
    if (j < 0 || j >= model.n_clusters()) throw ArgumentError("cluster index out of range");
    return per_cluster_quality(davies_bouldin(model, m), j);
}

}  // namespace coldstart
