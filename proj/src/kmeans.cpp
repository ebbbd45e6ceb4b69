#include "coldstart/kmeans.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <limits>
#include <numeric>
#include <ostream>
#include <sstream>

#include "coldstart/parallel.hpp"
#include "coldstart/rng.hpp"
#include "text.hpp"

namespace coldstart {

namespace {

constexpr std::size_t kChunk = 256;
constexpr double kInf = std::numeric_limits<double>::infinity();

// Relative slack for the fast norm-expansion distances; anything within it of
// the best estimate is re-ranked with the exact distance.
constexpr double kCandidateSlack = 1e-9;

template <typename Row>
Assignment exact_nearest(const Row& row, const Eigen::MatrixXd& centroids,
                         const Eigen::Ref<const Eigen::VectorXd>& approx, double margin) {
    const double cutoff = approx.minCoeff() + margin;
    Assignment best{0, kInf};
    for (Index j = 0; j < centroids.rows(); ++j) {
        if (approx(j) > cutoff) continue;
        const double d = sq_euclidean(row, centroids.row(j));
        if (d < best.distance) best = {j, d};
    }
    return best;
}

Eigen::VectorXd dense_row(const RatingMatrix& m, Index u) {
    Eigen::VectorXd v = Eigen::VectorXd::Zero(m.n_items());
    const auto items = m.row_items(u);
    const auto vals = m.row_values(u);
    for (std::size_t k = 0; k < items.size(); ++k) v(items[k]) = vals[k];
    return v;
}

// Distance of every user to one dense point y; approximate but deterministic.
void update_nearest_sq(const RatingMatrix& m, const Eigen::VectorXd& y, Eigen::VectorXd& d2) {
    const double ynorm = y.squaredNorm();
    parallel_chunks(static_cast<std::size_t>(m.n_users()), kChunk,
                    [&](std::size_t b, std::size_t e) {
                        for (auto u = static_cast<Index>(b); u < static_cast<Index>(e); ++u) {
                            const auto items = m.row_items(u);
                            const auto vals = m.row_values(u);
                            double d = ynorm;
                            for (std::size_t k = 0; k < items.size(); ++k) {
                                const double yi = y(items[k]);
                                const double diff = vals[k] - yi;
                                d += diff * diff - yi * yi;
                            }
                            d2(u) = std::min(d2(u), std::max(d, 0.0));
                        }
                    });
}

Eigen::MatrixXd init_kmeanspp(const RatingMatrix& m, Index k, Rng& rng) {
    const Index n = m.n_users();
    Eigen::MatrixXd centroids(k, m.n_items());
    Eigen::VectorXd d2 = Eigen::VectorXd::Constant(n, kInf);
    Index pick = static_cast<Index>(rng.below(static_cast<std::uint64_t>(n)));
    for (Index c = 0; c < k; ++c) {
        if (c > 0) {
            double total = 0.0;
            for (Index u = 0; u < n; ++u) total += d2(u);
            if (total > 0.0) {
                const double target = rng.uniform() * total;
                double running = 0.0;
                pick = -1;
                for (Index u = 0; u < n; ++u) {
                    if (d2(u) <= 0.0) continue;
                    running += d2(u);
                    pick = u;
                    if (running > target) break;
                }
            } else {
                pick = static_cast<Index>(rng.below(static_cast<std::uint64_t>(n)));
            }
        }
        const Eigen::VectorXd y = dense_row(m, pick);
        centroids.row(c) = y.transpose();
        if (c + 1 < k) update_nearest_sq(m, y, d2);
    }
    return centroids;
}

Eigen::MatrixXd init_random_points(const RatingMatrix& m, Index k, Rng& rng) {
    const Index n = m.n_users();
    std::vector<Index> pool(static_cast<std::size_t>(n));
    std::iota(pool.begin(), pool.end(), Index{0});
    Eigen::MatrixXd centroids(k, m.n_items());
    for (Index c = 0; c < k; ++c) {
        const auto j = c + static_cast<Index>(rng.below(static_cast<std::uint64_t>(n - c)));
        std::swap(pool[c], pool[j]);
        centroids.row(c) = dense_row(m, pool[c]).transpose();
    }
    return centroids;
}

struct RunState {
    std::vector<Index> labels;
    Eigen::VectorXd dist;
};

RunState assign_and_repair(Eigen::MatrixXd& centroids, const RatingMatrix& m) {
    const Index k = centroids.rows();
    const Index n = m.n_users();
    RunState s;
    s.labels.resize(static_cast<std::size_t>(n));
    s.dist.resize(n);
    for (Index round = 0; round <= k; ++round) {
        const auto nearest = assign_all(centroids, m);
        std::vector<Index> sizes(static_cast<std::size_t>(k), 0);
        for (Index u = 0; u < n; ++u) {
            s.labels[u] = nearest[u].cluster;
            s.dist(u) = nearest[u].distance;
            ++sizes[s.labels[u]];
        }
        if (round == k) break;

        bool repaired = false;
        for (Index j = 0; j < k; ++j) {
            if (sizes[j] > 0) continue;
            Index far = -1;
            for (Index u = 0; u < n; ++u) {
                if (sizes[s.labels[u]] <= 1 || s.dist(u) <= 0.0) continue;
                if (far < 0 || s.dist(u) > s.dist(far)) far = u;
            }
            if (far < 0) break;
            centroids.row(j) = dense_row(m, far).transpose();
            --sizes[s.labels[far]];
            s.labels[far] = j;
            s.dist(far) = 0.0;
            sizes[j] = 1;
            repaired = true;
        }
        if (!repaired) break;
    }
    return s;
}

Eigen::MatrixXd update_centroids(const RatingMatrix& m, const std::vector<Index>& labels,
                                 const Eigen::MatrixXd& previous) {
    Eigen::MatrixXd sums = Eigen::MatrixXd::Zero(previous.rows(), previous.cols());
    std::vector<Index> counts(static_cast<std::size_t>(previous.rows()), 0);
    for (Index u = 0; u < m.n_users(); ++u) {
        const Index j = labels[u];
        ++counts[j];
        const auto items = m.row_items(u);
        const auto vals = m.row_values(u);
        for (std::size_t k = 0; k < items.size(); ++k) sums(j, items[k]) += vals[k];
    }
    for (Index j = 0; j < previous.rows(); ++j) {
        if (counts[j] == 0)
            sums.row(j) = previous.row(j);
        else
            sums.row(j) /= static_cast<double>(counts[j]);
    }
    return sums;
}

double total(const Eigen::VectorXd& dist) {
    double s = 0.0;
    for (Index u = 0; u < dist.size(); ++u) s += dist(u);
    return s;
}

}  // namespace

void KMeansConfig::validate() const {
    if (n_clusters < 1) throw ArgumentError("n_clusters must be at least 1");
    if (restarts < 1) throw ArgumentError("restarts must be at least 1");
    if (max_steps < 1) throw ArgumentError("max_steps must be at least 1");
    if (!(conv_tol > 0.0)) throw ArgumentError("conv_tol must be positive");
}

std::uint64_t KMeansConfig::fingerprint() const {
    Fnv1a h;
    h.add(static_cast<std::uint64_t>(n_clusters));
    h.add(static_cast<std::uint64_t>(restarts));
    h.add(static_cast<std::uint64_t>(max_steps));
    h.add(conv_tol);
    h.add(seed);
    h.add(static_cast<std::uint64_t>(init));
    return h.value();
}

Index n_clusters_from_coeff(Index n_users, Index k_coeff) {
    if (n_users < 1 || k_coeff < 1) throw ArgumentError("n_users and k_coeff must be at least 1");
    const Index k = (n_users + k_coeff - 1) / k_coeff;
    return std::clamp<Index>(k, 1, n_users);
}

std::vector<Index> ClusterModel::cluster_sizes() const {
    std::vector<Index> sizes(static_cast<std::size_t>(n_clusters()), 0);
    for (Index j : assignments_) ++sizes[j];
    return sizes;
}

ClusterModel ClusterModel::from_parts(Eigen::MatrixXd centroids, std::vector<Index> assignments,
                                      const RatingMatrix& m, std::uint64_t seed,
                                      std::uint64_t fingerprint) {
    if (centroids.cols() != m.n_items())
        throw ArgumentError("centroid dimension does not match item count");
    if (static_cast<Index>(assignments.size()) != m.n_users())
        throw ArgumentError("assignment count does not match user count");
    for (Index j : assignments)
        if (j < 0 || j >= centroids.rows()) throw ArgumentError("assignment out of range");
    if (!centroids.allFinite()) throw InvariantError("non-finite centroid");
    ClusterModel model;
    model.centroids_ = std::move(centroids);
    model.assignments_ = std::move(assignments);
    model.seed_ = seed;
    model.fingerprint_ = fingerprint;
    model.sse_ = coldstart::sse(model, m);
    return model;
}

std::vector<Assignment> assign_all(const Eigen::MatrixXd& centroids, const RatingMatrix& m) {
    if (centroids.cols() != m.n_items())
        throw ArgumentError("centroid dimension does not match item count");
    const Eigen::VectorXd cnorm = centroids.rowwise().squaredNorm();
    const double cmax = cnorm.size() > 0 ? cnorm.maxCoeff() : 0.0;
    std::vector<Assignment> out(static_cast<std::size_t>(m.n_users()));
    parallel_chunks(static_cast<std::size_t>(m.n_users()), kChunk,
                    [&](std::size_t b, std::size_t e) {
                        const auto first = static_cast<Index>(b);
                        const auto count = static_cast<Index>(e - b);
                        const Eigen::MatrixXd dots =
                            centroids * m.values().middleRows(first, count).transpose();
                        Eigen::VectorXd approx(centroids.rows());
                        for (Index c = 0; c < count; ++c) {
                            const Index u = first + c;
                            const double xnorm = m.values().row(u).squaredNorm();
                            approx = cnorm - 2.0 * dots.col(c);
                            approx.array() += xnorm;
                            out[u] = exact_nearest(m.values().row(u), centroids, approx,
                                                   kCandidateSlack * (xnorm + cmax) + 1e-300);
                        }
                    });
    return out;
}

ClusterModel fit(const RatingMatrix& m, const KMeansConfig& cfg, FitTrace* trace) {
    cfg.validate();
    if (m.n_users() == 0 || m.n_items() == 0) throw ArgumentError("cannot cluster an empty matrix");
    if (cfg.n_clusters > m.n_users())
        throw ArgumentError("n_clusters (" + std::to_string(cfg.n_clusters) +
                            ") exceeds user count (" + std::to_string(m.n_users()) + ")");
    if (trace) *trace = {};

    Eigen::MatrixXd best_centroids;
    RunState best_state;
    double best_sse = kInf;
    for (int r = 0; r < cfg.restarts; ++r) {
        Rng rng(cfg.seed + static_cast<std::uint64_t>(r));
        Eigen::MatrixXd centroids = cfg.init == InitMethod::KMeansPlusPlus
                                        ? init_kmeanspp(m, cfg.n_clusters, rng)
                                        : init_random_points(m, cfg.n_clusters, rng);
        RunState state = assign_and_repair(centroids, m);
        double run_sse = total(state.dist);
        std::vector<double> steps{run_sse};

        int step = 0;
        while (step < cfg.max_steps) {
            ++step;
            Eigen::MatrixXd updated = update_centroids(m, state.labels, centroids);
            const double moved = (updated - centroids).rowwise().norm().maxCoeff();
            centroids = std::move(updated);
            RunState next = assign_and_repair(centroids, m);
            const bool changed = next.labels != state.labels;
            state = std::move(next);
            run_sse = total(state.dist);
            steps.push_back(run_sse);
            if (!changed || moved < cfg.conv_tol) break;
        }

        if (trace) {
            trace->restart_sse.push_back(run_sse);
            trace->step_sse.push_back(std::move(steps));
            trace->restart_steps.push_back(step);
        }
        if (run_sse < best_sse) {
            best_sse = run_sse;
            best_centroids = std::move(centroids);
            best_state = std::move(state);
        }
    }

    ClusterModel model;
    model.centroids_ = std::move(best_centroids);
    model.assignments_ = std::move(best_state.labels);
    model.sse_ = best_sse;
    model.seed_ = cfg.seed;
    Fnv1a h;
    h.add(cfg.fingerprint());
    h.add(m.checksum());
    model.fingerprint_ = h.value();
    if (!model.centroids_.allFinite()) throw InvariantError("k-means produced a non-finite centroid");
    return model;
}

Assignment assign(const ClusterModel& model, const SparseRow& row) {
    if (row.size() != model.n_items())
        throw ArgumentError("row dimension " + std::to_string(row.size()) +
                            " does not match model dimension " + std::to_string(model.n_items()));
    Assignment best{0, kInf};
    for (Index j = 0; j < model.n_clusters(); ++j) {
        const double d = sq_euclidean(row, model.centroid(j));
        if (d < best.distance) best = {j, d};
    }
    return best;
}

Assignment assign(const ClusterModel& model, const RatingMatrix& m, Index user) {
    if (user < 0 || user >= m.n_users()) throw ArgumentError("unknown user index");
    if (m.n_items() != model.n_items()) throw ArgumentError("matrix does not match model dimension");
    Assignment best{0, kInf};
    for (Index j = 0; j < model.n_clusters(); ++j) {
        const double d = sq_euclidean(m.values().row(user), model.centroid(j));
        if (d < best.distance) best = {j, d};
    }
    return best;
}

double sse(const ClusterModel& model, const RatingMatrix& m) {
    if (m.n_items() != model.n_items() ||
        m.n_users() != static_cast<Index>(model.assignments().size()))
        throw ArgumentError("matrix shape does not match the model");
    double s = 0.0;
    for (Index u = 0; u < m.n_users(); ++u)
        s += sq_euclidean(m.values().row(u), model.centroid(model.assignments()[u]));
    return s;
}

void save_model(const ClusterModel& model, std::ostream& out) {
    out << "coldstart-kmeans v1 " << model.n_clusters() << ' ' << model.n_items() << ' '
        << model.seed() << ' ' << format_sig17(model.sse()) << '\n';
    std::string line;
    for (Index j = 0; j < model.n_clusters(); ++j) {
        line.clear();
        for (Index d = 0; d < model.n_items(); ++d) {
            if (d > 0) line += ' ';
            line += format_sig17(model.centroids()(j, d));
        }
        line += '\n';
        out << line;
    }
}

ClusterModel load_model(std::istream& in, const RatingMatrix& m) {
    std::string header;
    if (!std::getline(in, header)) throw ParseError(1, "empty model file");
    const auto fields = split(trim(header), " ");
    Index k = 0, d = 0;
    std::uint64_t seed = 0;
    double stored_sse = 0.0;
    if (fields.size() != 6 || fields[0] != "coldstart-kmeans" || fields[1] != "v1" ||
        !parse_number(fields[2], k) || !parse_number(fields[3], d) ||
        !parse_number(fields[4], seed) || !parse_number(fields[5], stored_sse) || k < 1 || d < 0)
        throw ParseError(1, "bad model header '" + header + "'");
    if (d != m.n_items())
        throw ArgumentError("model has " + std::to_string(d) + " items, data has " +
                            std::to_string(m.n_items()));

    Eigen::MatrixXd centroids(k, d);
    std::string line;
    for (Index j = 0; j < k; ++j) {
        if (!std::getline(in, line)) throw ParseError(static_cast<std::size_t>(j) + 2, "missing centroid");
        const auto values = split(trim(line), " ");
        if (static_cast<Index>(values.size()) != d)
            throw ParseError(static_cast<std::size_t>(j) + 2, "wrong centroid length");
        for (Index c = 0; c < d; ++c)
            if (!parse_number(values[c], centroids(j, c)))
                throw ParseError(static_cast<std::size_t>(j) + 2, "malformed centroid value");
    }

    const auto nearest = assign_all(centroids, m);
    std::vector<Index> labels;
    labels.reserve(nearest.size());
    for (const auto& a : nearest) labels.push_back(a.cluster);
    auto model = ClusterModel::from_parts(std::move(centroids), std::move(labels), m, seed);
    if (std::abs(model.sse() - stored_sse) > 1e-9 * std::max(1.0, std::abs(stored_sse)))
        throw InvariantError("model SSE " + format_double(model.sse()) +
                             " does not match stored " + format_double(stored_sse));
    return model;
}

}  // namespace coldstart
