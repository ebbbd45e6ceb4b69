#include "coldstart/curves.hpp"

#include <algorithm>
#include <istream>
#include <limits>
#include <ostream>
#include <string>

#include "coldstart/errors.hpp"
#include "coldstart/parallel.hpp"
#include "text.hpp"

namespace coldstart {

namespace {

constexpr double kCandidateSlack = 1e-9;

// Nearest centroid of a growing prefix. The running estimate is refined by
// the exact distance for every centroid near the best estimate.
class PrefixAssigner {
public:
    explicit PrefixAssigner(const ClusterModel& model)
        : model_(model), cnorm_(model.centroids().rowwise().squaredNorm()) {
        cmax_ = cnorm_.size() > 0 ? cnorm_.maxCoeff() : 0.0;
    }

    void reset() {
        approx_ = cnorm_;
        xnorm_ = 0.0;
        entries_.clear();
    }

    void add(int item, double value) {
        const auto c = model_.centroids().col(item);
        approx_.array() += (value - c.array()).square() - c.array().square();
        xnorm_ += value * value;
        entries_.insert(std::upper_bound(entries_.begin(), entries_.end(), std::pair{item, value}),
                        {item, value});
    }

    Index nearest() const {
        SparseRow row(model_.n_items());
        row.reserve(static_cast<Index>(entries_.size()));
        for (const auto& [item, value] : entries_) row.insertBack(item) = value;
        const double cutoff = approx_.minCoeff() + kCandidateSlack * (xnorm_ + cmax_) + 1e-300;
        Index best = 0;
        double best_d = std::numeric_limits<double>::infinity();
        for (Index j = 0; j < model_.n_clusters(); ++j) {
            if (approx_(j) > cutoff) continue;
            const double d = sq_euclidean(row, model_.centroid(j));
            if (d < best_d) {
                best_d = d;
                best = j;
            }
        }
        return best;
    }

private:
    const ClusterModel& model_;
    Eigen::VectorXd cnorm_;
    double cmax_ = 0.0;
    Eigen::VectorXd approx_;
    double xnorm_ = 0.0;
    std::vector<std::pair<int, double>> entries_;
};

std::vector<std::string_view> csv_fields(std::string_view line, std::size_t expected,
                                         std::size_t line_no) {
    auto fields = split(line, ",");
    if (fields.size() != expected)
        throw ParseError(line_no, "expected " + std::to_string(expected) + " fields");
    return fields;
}

}  // namespace

PrefixTable prefix_assignments(const ClusterModel& model, const RatingMatrix& m,
                               std::span<const Index> users, Index t_max, PrefixOrder order) {
    if (users.empty()) throw ArgumentError("no users to evaluate");
    if (t_max < 1) throw ArgumentError("t_max must be at least 1");
    if (m.n_items() != model.n_items()) throw ArgumentError("matrix does not match model dimension");
    for (Index u : users)
        if (u < 0 || u >= m.n_users()) throw ArgumentError("unknown user index " + std::to_string(u));

    const auto n = static_cast<Index>(users.size());
    PrefixTable table;
    table.users.assign(users.begin(), users.end());
    table.lengths.resize(users.size());
    table.final_cluster.resize(users.size());
    table.clusters.resize(n, t_max);

    parallel_chunks(users.size(), 8, [&](std::size_t b, std::size_t e) {
        PrefixAssigner assigner(model);
        for (auto r = static_cast<Index>(b); r < static_cast<Index>(e); ++r) {
            const Index u = users[r];
            const auto ordered = ordered_ratings(m, u, order);
            const auto len = static_cast<Index>(ordered.size());
            table.lengths[r] = len;
            table.final_cluster[r] = assign(model, m, u).cluster;
            assigner.reset();
            Index current = assigner.nearest();
            for (Index t = 1; t <= t_max; ++t) {
                if (t <= len) {
                    const auto& [item, value] = ordered[static_cast<std::size_t>(t - 1)];
                    assigner.add(item, value);
                    current = assigner.nearest();
                }
                table.clusters(r, t - 1) = current;
            }
        }
    });
    return table;
}

SuccessCurve success_curve(const PrefixTable& table) {
    SuccessCurve curve;
    const auto n = static_cast<Index>(table.users.size());
    for (Index t = 1; t <= table.t_max(); ++t) {
        Index evaluated = 0, hits = 0;
        for (Index r = 0; r < n; ++r) {
            if (table.lengths[r] < t) continue;
            ++evaluated;
            if (table.clusters(r, t - 1) == table.final_cluster[r]) ++hits;
        }
        if (evaluated == 0) continue;
        curve.points.push_back(
            {t, static_cast<double>(hits) / static_cast<double>(evaluated), evaluated});
    }
    return curve;
}

SuccessCurve success_curve(const ClusterModel& model, const RatingMatrix& m,
                           std::span<const Index> users, Index t_max, PrefixOrder order) {
    return success_curve(prefix_assignments(model, m, users, t_max, order));
}

QualityCurve quality_curve(const PrefixTable& table, const ClusterQuality& quality) {
    const auto n = static_cast<Index>(table.users.size());
    double reference = 0.0;
    for (Index r = 0; r < n; ++r) reference += per_cluster_quality(quality, table.final_cluster[r]);
    reference /= static_cast<double>(n);

    QualityCurve curve;
    for (Index t = 1; t <= table.t_max(); ++t) {
        double current = 0.0;
        for (Index r = 0; r < n; ++r) current += per_cluster_quality(quality, table.clusters(r, t - 1));
        curve.points.push_back({t, current / static_cast<double>(n), reference});
    }
    return curve;
}

QualityCurve quality_curve(const ClusterModel& model, const RatingMatrix& m,
                           std::span<const Index> users, Index t_max, PrefixOrder order) {
    const auto quality = davies_bouldin(model, m);
    return quality_curve(prefix_assignments(model, m, users, t_max, order), quality);
}

void write_success_csv(const SuccessCurve& curve, std::ostream& out) {
    out << "t,success_fraction,n_evaluated\n";
    for (const auto& p : curve.points)
        out << p.t << ',' << format_double(p.success_fraction) << ',' << p.n_evaluated << '\n';
}

SuccessCurve read_success_csv(std::istream& in) {
    SuccessCurve curve;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto text = trim(line);
        if (text.empty() || text.front() == '#' || (line_no == 1 && text.starts_with("t,"))) continue;
        const auto f = csv_fields(text, 3, line_no);
        SuccessPoint p;
        if (!parse_number(f[0], p.t) || !parse_number(f[1], p.success_fraction) ||
            !parse_number(f[2], p.n_evaluated))
            throw ParseError(line_no, "malformed success-curve row");
        curve.points.push_back(p);
    }
    return curve;
}

void write_quality_csv(const QualityCurve& curve, std::ostream& out) {
    out << "t,current_quality_mean,reference_quality_mean\n";
    for (const auto& p : curve.points)
        out << p.t << ',' << format_double(p.current_quality_mean) << ','
            << format_double(p.reference_quality_mean) << '\n';
}

QualityCurve read_quality_csv(std::istream& in) {
    QualityCurve curve;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto text = trim(line);
        if (text.empty() || text.front() == '#' || (line_no == 1 && text.starts_with("t,"))) continue;
        const auto f = csv_fields(text, 3, line_no);
        QualityPoint p;
        if (!parse_number(f[0], p.t) || !parse_number(f[1], p.current_quality_mean) ||
            !parse_number(f[2], p.reference_quality_mean))
            throw ParseError(line_no, "malformed quality-curve row");
        curve.points.push_back(p);
    }
    return curve;
}

}  // namespace coldstart
