#include "coldstart/recsys_eval.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>

#include "coldstart/errors.hpp"
#include "coldstart/parallel.hpp"
#include "coldstart/rng.hpp"
#include "text.hpp"

namespace coldstart {

namespace {

constexpr double kMidpoint = 3.0;

std::optional<double> rating_of(const RatingMatrix& m, Index user, Index item) {
    const auto items = m.row_items(user);
    const auto it = std::lower_bound(items.begin(), items.end(), static_cast<int>(item));
    if (it == items.end() || *it != item) return std::nullopt;
    return m.row_values(user)[static_cast<std::size_t>(it - items.begin())];
}

void check_user_item(const RatingMatrix& m, Index user, Index item) {
    if (user < 0 || user >= m.n_users()) throw ArgumentError("unknown user index " + std::to_string(user));
    if (item < 0 || item >= m.n_items()) throw ArgumentError("unknown item index " + std::to_string(item));
}

// Per-user evaluation split shared by every coefficient of a sweep.
struct UserSplit {
    std::vector<std::pair<int, double>> holdout;
    std::vector<int> pool;
};

std::vector<UserSplit> split_users(const RatingMatrix& m, const EvalConfig& eval) {
    std::vector<Index> infeasible;
    for (Index u = 0; u < m.n_users(); ++u)
        if (m.row_length(u) <= eval.holdout_per_user) infeasible.push_back(u);
    if (!infeasible.empty()) {
        std::string list;
        for (std::size_t k = 0; k < infeasible.size() && k < 20; ++k)
            list += (k ? "," : "") + std::to_string(m.user_ids()[infeasible[k]]);
        if (infeasible.size() > 20) list += ",...";
        throw ArgumentError(std::to_string(infeasible.size()) + " users have at most " +
                            std::to_string(eval.holdout_per_user) +
                            " ratings and cannot hold out: " + list);
    }

    Rng rng(eval.seed);
    std::vector<UserSplit> splits(static_cast<std::size_t>(m.n_users()));
    std::vector<int> positions, unrated;
    for (Index u = 0; u < m.n_users(); ++u) {
        const auto items = m.row_items(u);
        const auto vals = m.row_values(u);
        positions.resize(items.size());
        std::iota(positions.begin(), positions.end(), 0);
        for (Index h = 0; h < eval.holdout_per_user; ++h) {
            const auto j = h + static_cast<Index>(rng.below(positions.size() - h));
            std::swap(positions[h], positions[j]);
        }
        positions.resize(static_cast<std::size_t>(eval.holdout_per_user));
        std::sort(positions.begin(), positions.end());
        for (int p : positions) splits[u].holdout.emplace_back(items[p], vals[p]);

        unrated.clear();
        std::size_t k = 0;
        for (int i = 0; i < m.n_items(); ++i) {
            if (k < items.size() && items[k] == i) {
                ++k;
                continue;
            }
            unrated.push_back(i);
        }
        const auto take = std::min<std::size_t>(unrated.size(), static_cast<std::size_t>(eval.candidate_pool));
        for (std::size_t p = 0; p < take; ++p) {
            const auto j = p + rng.below(unrated.size() - p);
            std::swap(unrated[p], unrated[j]);
        }
        splits[u].pool.assign(unrated.begin(), unrated.begin() + static_cast<std::ptrdiff_t>(take));
        std::sort(splits[u].pool.begin(), splits[u].pool.end());
    }
    return splits;
}

RatingMatrix without_holdouts(const RatingMatrix& m, const std::vector<UserSplit>& splits) {
    SparseRows values(m.n_users(), m.n_items());
    values.reserve(m.n_ratings());
    for (Index u = 0; u < m.n_users(); ++u) {
        values.startVec(u);
        const auto items = m.row_items(u);
        const auto vals = m.row_values(u);
        const auto& hold = splits[u].holdout;
        std::size_t h = 0;
        for (std::size_t k = 0; k < items.size(); ++k) {
            if (h < hold.size() && hold[h].first == items[k]) {
                ++h;
                continue;
            }
            values.insertBack(u, items[k]) = vals[k];
        }
    }
    values.finalize();
    return RatingMatrix(std::move(values), m.user_ids(), m.item_ids(), m.scheme());
}

}  // namespace

void EvalConfig::validate() const {
    if (holdout_per_user < 1) throw ArgumentError("holdout_per_user must be at least 1");
    if (candidate_pool < 0) throw ArgumentError("candidate_pool must be non-negative");
    if (ndcg_cutoff < 1) throw ArgumentError("ndcg_cutoff must be at least 1");
    if (!(relevance_threshold >= kRatingMin && relevance_threshold <= kRatingMax))
        throw ArgumentError("relevance_threshold must lie in [1, 5]");
}

double predict_score(const ClusterModel& model, const RatingMatrix& m, Index user, Index item) {
    check_user_item(m, user, item);
    if (static_cast<Index>(model.assignments().size()) != m.n_users())
        throw ArgumentError("model was not fitted on this matrix");
    const Index cluster = model.assignments()[user];
    double cluster_sum = 0.0, global_sum = 0.0;
    Index cluster_n = 0, global_n = 0;
    for (Index v = 0; v < m.n_users(); ++v) {
        if (v == user) continue;
        const auto r = rating_of(m, v, item);
        if (!r) continue;
        global_sum += *r;
        ++global_n;
        if (model.assignments()[v] == cluster) {
            cluster_sum += *r;
            ++cluster_n;
        }
    }
    if (cluster_n > 0) return cluster_sum / static_cast<double>(cluster_n);
    if (global_n > 0) return global_sum / static_cast<double>(global_n);
    return kMidpoint;
}

ClusterPredictor::ClusterPredictor(const ClusterModel& model, const RatingMatrix& m)
    : matrix_(&m),
      labels_(model.assignments()),
      cluster_sum_(Eigen::MatrixXd::Zero(model.n_clusters(), m.n_items())),
      cluster_count_(Eigen::MatrixXi::Zero(model.n_clusters(), m.n_items())),
      item_sum_(Eigen::VectorXd::Zero(m.n_items())),
      item_count_(Eigen::VectorXi::Zero(m.n_items())) {
    if (static_cast<Index>(labels_.size()) != m.n_users())
        throw ArgumentError("model was not fitted on this matrix");
    for (Index u = 0; u < m.n_users(); ++u) {
        const auto items = m.row_items(u);
        const auto vals = m.row_values(u);
        for (std::size_t k = 0; k < items.size(); ++k) {
            cluster_sum_(labels_[u], items[k]) += vals[k];
            cluster_count_(labels_[u], items[k]) += 1;
            item_sum_(items[k]) += vals[k];
            item_count_(items[k]) += 1;
        }
    }
}

double ClusterPredictor::score(Index user, Index item) const {
    check_user_item(*matrix_, user, item);
    const Index c = labels_[user];
    double sum = cluster_sum_(c, item), global = item_sum_(item);
    int n = cluster_count_(c, item), global_n = item_count_(item);
    if (const auto own = rating_of(*matrix_, user, item)) {
        sum -= *own;
        global -= *own;
        --n;
        --global_n;
    }
    if (n > 0) return sum / n;
    if (global_n > 0) return global / global_n;
    return kMidpoint;
}

double ndcg_at_n(std::span<const double> ranked_gains, std::span<const double> ideal_gains,
                 Index n) {
    if (ranked_gains.size() != ideal_gains.size())
        throw ArgumentError("ranked and ideal gain lists differ in length");
    if (n < 1) throw ArgumentError("ndcg cutoff must be at least 1");
    const auto depth = std::min(ranked_gains.size(), static_cast<std::size_t>(n));
    double dcg = 0.0, idcg = 0.0;
    for (std::size_t i = 0; i < depth; ++i) {
        const double discount = std::log2(static_cast<double>(i) + 2.0);
        dcg += ranked_gains[i] / discount;
        idcg += ideal_gains[i] / discount;
    }
    if (idcg <= 0.0) return 1.0;
    return dcg / idcg;
}

std::optional<double> average_precision(std::span<const Index> ranked_items,
                                        std::span<const Index> relevant) {
    std::vector<Index> rel(relevant.begin(), relevant.end());
    std::sort(rel.begin(), rel.end());
    rel.erase(std::unique(rel.begin(), rel.end()), rel.end());
    if (rel.empty()) return std::nullopt;
    double sum = 0.0;
    Index hits = 0;
    for (std::size_t pos = 0; pos < ranked_items.size(); ++pos) {
        if (!std::binary_search(rel.begin(), rel.end(), ranked_items[pos])) continue;
        ++hits;
        sum += static_cast<double>(hits) / static_cast<double>(pos + 1);
    }
    return sum / static_cast<double>(rel.size());
}

SweepResult sweep_coefficient(const RatingMatrix& m, std::span<const Index> coeffs,
                              const KMeansConfig& kmeans_template, const EvalConfig& eval) {
    eval.validate();
    if (coeffs.empty()) throw ArgumentError("no coefficients to sweep");
    for (Index c : coeffs)
        if (c < 1) throw ArgumentError("every coefficient must be at least 1");
    if (m.n_users() == 0) throw ArgumentError("cannot evaluate an empty matrix");

    const auto splits = split_users(m, eval);
    const RatingMatrix train = without_holdouts(m, splits);

    SweepResult result;
    for (Index coeff : coeffs) {
        KMeansConfig cfg = kmeans_template;
        cfg.n_clusters = n_clusters_from_coeff(train.n_users(), coeff);
        const ClusterModel model = fit(train, cfg);
        const ClusterPredictor predictor(model, train);

        std::vector<double> ndcg(static_cast<std::size_t>(m.n_users()));
        std::vector<std::optional<double>> ap(static_cast<std::size_t>(m.n_users()));
        parallel_chunks(static_cast<std::size_t>(m.n_users()), 64, [&](std::size_t b, std::size_t e) {
            struct Candidate {
                Index item;
                double score;
                double gain;
            };
            std::vector<Candidate> cand;
            std::vector<double> gains, ideal;
            std::vector<Index> ranked, relevant;
            for (auto u = static_cast<Index>(b); u < static_cast<Index>(e); ++u) {
                cand.clear();
                relevant.clear();
                for (const auto& [item, value] : splits[u].holdout) {
                    cand.push_back({item, predictor.score(u, item), value});
                    if (value >= eval.relevance_threshold) relevant.push_back(item);
                }
                for (int item : splits[u].pool) cand.push_back({item, predictor.score(u, item), 0.0});
                std::sort(cand.begin(), cand.end(), [](const Candidate& a, const Candidate& c) {
                    return a.score != c.score ? a.score > c.score : a.item < c.item;
                });
                gains.clear();
                ranked.clear();
                for (const auto& c : cand) {
                    gains.push_back(c.gain);
                    ranked.push_back(c.item);
                }
                ideal = gains;
                std::sort(ideal.begin(), ideal.end(), std::greater<>());
                ndcg[u] = ndcg_at_n(gains, ideal, eval.ndcg_cutoff);
                ap[u] = average_precision(ranked, relevant);
            }
        });

        SweepRow row{coeff, 0.0, 0.0, cfg.n_clusters};
        Index ap_users = 0;
        for (Index u = 0; u < m.n_users(); ++u) {
            row.ndcg_mean += ndcg[u];
            if (ap[u]) {
                row.map_mean += *ap[u];
                ++ap_users;
            }
        }
        row.ndcg_mean /= static_cast<double>(m.n_users());
        row.map_mean = ap_users > 0 ? row.map_mean / static_cast<double>(ap_users) : 0.0;
        result.rows.push_back(row);
    }

    auto argmax = [&](auto metric) {
        const SweepRow* best = &result.rows.front();
        for (const auto& r : result.rows) {
            const double a = metric(r), b = metric(*best);
            if (a > b || (a == b && r.k_coeff < best->k_coeff)) best = &r;
        }
        return best->k_coeff;
    };
    result.best_by_ndcg = argmax([](const SweepRow& r) { return r.ndcg_mean; });
    result.best_by_map = argmax([](const SweepRow& r) { return r.map_mean; });
    return result;
}

void write_sweep_csv(const SweepResult& result, std::ostream& out) {
    out << "k_coeff,n_clusters,ndcg_mean,map_mean\n";
    for (const auto& r : result.rows)
        out << r.k_coeff << ',' << r.n_clusters << ',' << format_double(r.ndcg_mean) << ','
            << format_double(r.map_mean) << '\n';
    out << "# best_by_ndcg=" << result.best_by_ndcg << " best_by_map=" << result.best_by_map
        << '\n';
}

}  // namespace coldstart
