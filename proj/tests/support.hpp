#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "coldstart/dataset.hpp"
#include "coldstart/rng.hpp"

namespace testsupport {

using coldstart::Index;
using Dense = std::vector<std::vector<double>>;

// 0.0 marks an unrated cell.
inline coldstart::RatingMatrix dense_matrix(const Dense& rows) {
    std::vector<coldstart::RatingEvent> events;
    std::int64_t n_items = 0;
    for (std::size_t u = 0; u < rows.size(); ++u) {
        n_items = std::max<std::int64_t>(n_items, static_cast<std::int64_t>(rows[u].size()));
        for (std::size_t i = 0; i < rows[u].size(); ++i)
            if (rows[u][i] != 0.0)
                events.push_back({static_cast<std::int64_t>(u), static_cast<std::int64_t>(i),
                                  rows[u][i], std::nullopt});
    }
    auto m = coldstart::build_matrix(events);
    if (m.n_users() != static_cast<Index>(rows.size()) || m.n_items() != n_items)
        throw std::logic_error("dense_matrix: every row and column needs a rating");
    return m;
}

inline Eigen::MatrixXd densify(const coldstart::RatingMatrix& m) {
    return Eigen::MatrixXd(m.values());
}

// Plain loops, no Eigen expressions.
inline double oracle_sq(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
    double s = 0.0;
    for (Index d = 0; d < a.size(); ++d) s += (a[d] - b[d]) * (a[d] - b[d]);
    return s;
}

inline double oracle_dist(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
    return std::sqrt(oracle_sq(a, b));
}

// Minimum SSE over every labeling of the rows into k groups.
inline double exhaustive_kmeans_sse(const Eigen::MatrixXd& x, Index k) {
    const Index n = x.rows();
    std::vector<Index> label(static_cast<std::size_t>(n), 0);
    double best = std::numeric_limits<double>::infinity();
    for (;;) {
        double total = 0.0;
        for (Index j = 0; j < k; ++j) {
            Eigen::VectorXd mean = Eigen::VectorXd::Zero(x.cols());
            Index count = 0;
            for (Index u = 0; u < n; ++u)
                if (label[u] == j) {
                    mean += x.row(u).transpose();
                    ++count;
                }
            if (count == 0) continue;
            mean /= static_cast<double>(count);
            for (Index u = 0; u < n; ++u)
                if (label[u] == j) total += oracle_sq(x.row(u).transpose(), mean);
        }
        best = std::min(best, total);
        Index p = 0;
        while (p < n && ++label[p] == k) label[p++] = 0;
        if (p == n) break;
    }
    return best;
}

struct DbOracle {
    std::vector<double> terms;  // NaN where undefined
    double index = 0.0;
};

// Direct pairwise enumeration over labels and centroids.
inline DbOracle oracle_davies_bouldin(const Eigen::MatrixXd& x, const std::vector<Index>& label,
                                      const Eigen::MatrixXd& centroids) {
    const Index k = centroids.rows();
    std::vector<double> scatter(static_cast<std::size_t>(k), 0.0);
    std::vector<int> count(static_cast<std::size_t>(k), 0);
    for (Index u = 0; u < x.rows(); ++u) {
        scatter[label[u]] += oracle_dist(x.row(u).transpose(), centroids.row(label[u]).transpose());
        ++count[label[u]];
    }
    DbOracle out;
    double sum = 0.0;
    int defined = 0;
    for (Index j = 0; j < k; ++j) {
        double term = std::numeric_limits<double>::quiet_NaN();
        if (count[j] > 0) {
            for (Index m = 0; m < k; ++m) {
                if (m == j || count[m] == 0) continue;
                const double d = oracle_dist(centroids.row(j).transpose(), centroids.row(m).transpose());
                if (d == 0.0) continue;
                const double r = (scatter[j] / count[j] + scatter[m] / count[m]) / d;
                if (std::isnan(term) || r > term) term = r;
            }
        }
        out.terms.push_back(term);
        if (!std::isnan(term)) {
            sum += term;
            ++defined;
        }
    }
    out.index = sum / defined;
    return out;
}

// Random rows on the rating scale; each cell is unrated with probability p_missing.
inline Dense random_dense(coldstart::Rng& rng, Index n, Index d, double p_missing) {
    Dense rows(static_cast<std::size_t>(n), std::vector<double>(static_cast<std::size_t>(d)));
    for (auto& row : rows)
        for (auto& v : row)
            v = rng.uniform() < p_missing ? 0.0 : 1.0 + 0.5 * static_cast<double>(rng.below(9));
    // every row and column rated at least once so the shape survives
    for (auto& row : rows)
        if (std::all_of(row.begin(), row.end(), [](double v) { return v == 0.0; }))
            row[rng.below(static_cast<std::uint64_t>(d))] = 2.0;
    for (Index i = 0; i < d; ++i) {
        bool any = false;
        for (const auto& row : rows) any = any || row[i] != 0.0;
        if (!any) rows[rng.below(static_cast<std::uint64_t>(n))][i] = 3.0;
    }
    return rows;
}

// Four blocs of bloc_size users over 4 * items_per_bloc items: users love
// their own bloc's items and dislike the others. Each user rates a random
// subset of density * items.
inline coldstart::RatingMatrix bloc_matrix(Index bloc_size, Index items_per_bloc, double density,
                                           std::uint64_t seed) {
    coldstart::Rng rng(seed);
    std::vector<coldstart::RatingEvent> events;
    const Index n_items = 4 * items_per_bloc;
    for (Index u = 0; u < 4 * bloc_size; ++u) {
        const Index bloc = u / bloc_size;
        for (Index i = 0; i < n_items; ++i) {
            if (rng.uniform() >= density) continue;
            const bool own = i / items_per_bloc == bloc;
            const double v = own ? 4.5 + 0.5 * static_cast<double>(rng.below(2))
                                 : 1.0 + 0.5 * static_cast<double>(rng.below(2));
            events.push_back({u, i, v, std::nullopt});
        }
    }
    return coldstart::build_matrix(events);
}

// Exponential rise with the given knee, continued along its tangent line.
inline double knee_curve(double t, double knee = 25.0, double tau = 7.0) {
    if (t < knee) return 100.0 * (1.0 - std::exp(-t / tau));
    const double y0 = 100.0 * (1.0 - std::exp(-knee / tau));
    const double slope = 100.0 / tau * std::exp(-knee / tau);
    return y0 + slope * (t - knee);
}

// Jester-shaped text: `count,r1..r100` rows with 99 for unrated cells. Users
// belong to one of n_taste tastes and rate a leading run of jokes.
inline std::string jester_text(Index n_users, Index n_taste, std::uint64_t seed,
                               Index min_rated = 36) {
    coldstart::Rng rng(seed);
    std::vector<std::vector<double>> taste(static_cast<std::size_t>(n_taste),
                                           std::vector<double>(100));
    for (auto& t : taste)
        for (auto& v : t) v = -8.0 + 16.0 * rng.uniform();
    std::string out;
    for (Index u = 0; u < n_users; ++u) {
        const auto& t = taste[rng.below(static_cast<std::uint64_t>(n_taste))];
        const Index n_rated =
            min_rated + static_cast<Index>(rng.below(static_cast<std::uint64_t>(101 - min_rated)));
        std::string row = std::to_string(n_rated);
        for (Index i = 0; i < 100; ++i) {
            double v = 99.0;
            if (i < n_rated) v = std::clamp(t[i] + 2.0 * rng.normal(), -10.0, 10.0);
            char buf[32];
            std::snprintf(buf, sizeof buf, ",%.2f", v);
            row += buf;
        }
        out += row + '\n';
    }
    return out;
}

// MovieLens-shaped text: users in n_taste groups; a fraction rate exactly 20
// items, the rest 21..max_len, with increasing timestamps.
inline std::string movielens_text(Index n_users, Index n_items, Index n_taste, Index max_len,
                                  std::uint64_t seed) {
    coldstart::Rng rng(seed);
    std::vector<std::vector<int>> taste(static_cast<std::size_t>(n_taste),
                                        std::vector<int>(static_cast<std::size_t>(n_items)));
    for (auto& t : taste)
        for (auto& v : t) v = 1 + static_cast<int>(rng.below(5));
    std::string out;
    for (Index u = 1; u <= n_users; ++u) {
        const auto& t = taste[rng.below(static_cast<std::uint64_t>(n_taste))];
        const Index len = rng.uniform() < 0.1
                              ? 20
                              : 21 + static_cast<Index>(rng.below(static_cast<std::uint64_t>(max_len - 20)));
        std::vector<Index> items(static_cast<std::size_t>(n_items));
        for (Index i = 0; i < n_items; ++i) items[i] = i;
        for (Index k = 0; k < len; ++k)
            std::swap(items[k], items[k + static_cast<Index>(rng.below(static_cast<std::uint64_t>(n_items - k)))]);
        std::int64_t ts = 1000000 + static_cast<std::int64_t>(rng.below(100000));
        for (Index k = 0; k < len; ++k) {
            int r = t[items[k]];
            if (rng.uniform() < 0.2) r = 1 + static_cast<int>(rng.below(5));
            ts += 1 + static_cast<std::int64_t>(rng.below(500));
            out += std::to_string(u) + "::" + std::to_string(items[k] + 1) + "::" + std::to_string(r) +
                   "::" + std::to_string(ts) + '\n';
        }
    }
    return out;
}

inline std::filesystem::path scratch_dir(const std::string& name) {
    auto p = std::filesystem::temp_directory_path() / ("coldstart_test_" + name);
    std::filesystem::remove_all(p);
    std::filesystem::create_directories(p);
    return p;
}

}  // namespace testsupport
