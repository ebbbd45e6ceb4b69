#include <doctest.h>

#include <algorithm>
#include <numeric>
#include <sstream>

#include "coldstart/curves.hpp"
#include "coldstart/errors.hpp"
#include "coldstart/parallel.hpp"
#include "support.hpp"

using namespace coldstart;
using testsupport::dense_matrix;

namespace {

struct Fixture {
    RatingMatrix m;
    ClusterModel model;
    std::vector<Index> users;
};

Fixture movielens_fixture(Index n_users, Index k, std::uint64_t seed) {
    std::istringstream in(testsupport::movielens_text(n_users, 120, 4, 70, seed));
    Fixture f{build_matrix(parse_movielens(in)), {}, {}};
    KMeansConfig cfg;
    cfg.n_clusters = k;
    cfg.restarts = 2;
    cfg.seed = seed;
    f.model = fit(f.m, cfg);
    f.users.resize(static_cast<std::size_t>(f.m.n_users()));
    std::iota(f.users.begin(), f.users.end(), Index{0});
    return f;
}

}  // namespace

TEST_CASE("prefix table agrees with assigning each prefix directly") {
    const auto f = movielens_fixture(60, 6, 2);
    const auto table = prefix_assignments(f.model, f.m, f.users, 80, PrefixOrder::ByTimestamp);
    for (std::size_t r = 0; r < f.users.size(); ++r) {
        const Index u = f.users[r];
        CHECK(table.lengths[r] == f.m.row_length(u));
        CHECK(table.final_cluster[r] == f.model.assignments()[u]);
        for (Index t = 1; t <= 80; ++t) {
            const auto direct = assign(f.model, prefix(f.m, u, t, PrefixOrder::ByTimestamp));
            CHECK(table.clusters(static_cast<Index>(r), t - 1) == direct.cluster);
        }
    }
}

TEST_CASE("success curve saturates at every user's full history") {
    const auto f = movielens_fixture(80, 8, 3);
    const auto table = prefix_assignments(f.model, f.m, f.users, 70, PrefixOrder::ByTimestamp);
    for (std::size_t r = 0; r < f.users.size(); ++r)
        CHECK(table.clusters(static_cast<Index>(r), table.lengths[r] - 1) == table.final_cluster[r]);

    const auto curve = success_curve(table);
    REQUIRE_FALSE(curve.points.empty());
    const Index longest = *std::max_element(table.lengths.begin(), table.lengths.end());
    CHECK(curve.points.back().t == longest);
    CHECK(curve.points.back().success_fraction == 1.0);
    for (std::size_t p = 1; p < curve.points.size(); ++p) {
        CHECK(curve.points[p].t > curve.points[p - 1].t);
        CHECK(curve.points[p].n_evaluated <= curve.points[p - 1].n_evaluated);
    }
    for (const auto& p : curve.points) {
        CHECK(p.success_fraction >= 0.0);
        CHECK(p.success_fraction <= 1.0);
    }
}

TEST_CASE("success curve on two users with good first ratings") {
    const auto m = dense_matrix({{5, 1}, {1, 1}});
    Eigen::MatrixXd c(2, 2);
    c << 5, 1, 1, 1;
    const auto model = ClusterModel::from_parts(c, {0, 1}, m);
    const std::vector<Index> users{0, 1};
    const auto curve = success_curve(model, m, users, 2, PrefixOrder::ByItemIndex);
    REQUIRE(curve.points.size() == 2);
    CHECK(curve.points[0].t == 1);
    CHECK(curve.points[0].success_fraction == 1.0);
    CHECK(curve.points[0].n_evaluated == 2);
    CHECK_THROWS_AS(success_curve(model, m, std::vector<Index>{}, 2, PrefixOrder::ByItemIndex),
                    ArgumentError);
    CHECK_THROWS_AS(success_curve(model, m, users, 0, PrefixOrder::ByItemIndex), ArgumentError);
}

TEST_CASE("quality curve meets its reference at saturation") {
    const auto f = movielens_fixture(80, 8, 5);
    const auto curve = quality_curve(f.model, f.m, f.users, 75, PrefixOrder::ByTimestamp);
    Index longest = 0;
    for (Index u : f.users) longest = std::max(longest, f.m.row_length(u));
    for (const auto& p : curve.points) {
        CHECK(p.reference_quality_mean == curve.points.front().reference_quality_mean);
        CHECK(p.current_quality_mean <= 0.0);
        CHECK(p.reference_quality_mean <= 0.0);
        if (p.t >= longest) CHECK(p.current_quality_mean == p.reference_quality_mean);
    }
}

TEST_CASE("quality reference for users sharing one final cluster") {
    const auto m = dense_matrix({{5, 5}, {4.5, 5}, {1, 1}});
    Eigen::MatrixXd c(2, 2);
    c << 4.75, 5, 1, 1;
    const auto model = ClusterModel::from_parts(c, {0, 0, 1}, m);
    const std::vector<Index> users{0, 1};
    const auto curve = quality_curve(model, m, users, 2, PrefixOrder::ByItemIndex);
    CHECK(curve.points.back().reference_quality_mean == per_cluster_quality(model, m, 0));
}

TEST_CASE("curves do not depend on the worker count") {
    const auto f = movielens_fixture(90, 9, 7);
    set_worker_count(1);
    const auto a = prefix_assignments(f.model, f.m, f.users, 70, PrefixOrder::ByTimestamp);
    set_worker_count(8);
    const auto b = prefix_assignments(f.model, f.m, f.users, 70, PrefixOrder::ByTimestamp);
    set_worker_count(1);
    CHECK(a.clusters == b.clusters);
    CHECK(a.final_cluster == b.final_cluster);
}

TEST_CASE("curve csv round trip") {
    const auto f = movielens_fixture(40, 4, 9);
    const auto s = success_curve(f.model, f.m, f.users, 30, PrefixOrder::ByTimestamp);
    std::stringstream io;
    write_success_csv(s, io);
    CHECK(io.str().rfind("t,success_fraction,n_evaluated\n", 0) == 0);
    const auto back = read_success_csv(io);
    REQUIRE(back.points.size() == s.points.size());
    for (std::size_t p = 0; p < s.points.size(); ++p) {
        CHECK(back.points[p].t == s.points[p].t);
        CHECK(back.points[p].success_fraction == s.points[p].success_fraction);
        CHECK(back.points[p].n_evaluated == s.points[p].n_evaluated);
    }

    const auto q = quality_curve(f.model, f.m, f.users, 30, PrefixOrder::ByTimestamp);
    std::stringstream qio;
    write_quality_csv(q, qio);
    const auto qback = read_quality_csv(qio);
    REQUIRE(qback.points.size() == q.points.size());
    for (std::size_t p = 0; p < q.points.size(); ++p) {
        CHECK(qback.points[p].current_quality_mean == q.points[p].current_quality_mean);
        CHECK(qback.points[p].reference_quality_mean == q.points[p].reference_quality_mean);
    }

    std::istringstream bad("t,success_fraction,n_evaluated\n1,0.5\n");
    CHECK_THROWS_AS(read_success_csv(bad), ParseError);
}
