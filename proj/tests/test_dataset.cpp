#include <doctest.h>

#include <algorithm>
#include <set>
#include <sstream>

#include "coldstart/dataset.hpp"
#include "coldstart/errors.hpp"
#include "support.hpp"

using namespace coldstart;

namespace {

std::string jester_row(const std::string& head, const std::vector<std::pair<int, std::string>>& cells) {
    std::vector<std::string> v(100, "99.00");
    for (const auto& [i, s] : cells) v[i] = s;
    std::string row = head;
    for (const auto& s : v) row += "," + s;
    return row + "\n";
}

}  // namespace

TEST_CASE("parse_movielens reads one event per line") {
    std::istringstream in("1::296::5::1147880044\n");
    const auto events = parse_movielens(in);
    REQUIRE(events.size() == 1);
    CHECK(events[0] == RatingEvent{1, 296, 5.0, 1147880044});
}

TEST_CASE("parse_movielens edge cases") {
    std::istringstream empty("");
    CHECK(parse_movielens(empty).empty());

    std::istringstream bad_value("1::296::9::0\n");
    CHECK_THROWS_AS(parse_movielens(bad_value), RangeError);

    std::istringstream malformed("1::2::3::4\n1::2::x::4\n");
    try {
        parse_movielens(malformed);
        FAIL("expected a parse error");
    } catch (const ParseError& e) {
        CHECK(e.line() == 2);
    }

    std::istringstream half("1::2::0.5::4\n");
    CHECK_THROWS_AS(parse_movielens(half), RangeError);
    std::istringstream half_clamped("1::2::0.5::4\n");
    CHECK(parse_movielens(half_clamped, true)[0].value == 1.0);
}

TEST_CASE("parse_jester maps values and drops sentinels") {
    std::istringstream in(jester_row("2", {{0, "-9.68"}, {99, "3.20"}}));
    const auto m = parse_jester(in);
    REQUIRE(m.n_users() == 1);
    CHECK(m.n_items() == 100);
    const auto items = m.row_items(0);
    const auto vals = m.row_values(0);
    REQUIRE(items.size() == 2);
    CHECK(items[0] == 0);
    CHECK(items[1] == 99);
    CHECK(vals[0] == doctest::Approx(1.064).epsilon(1e-12));
    CHECK(vals[1] == doctest::Approx(3.64).epsilon(1e-12));
    CHECK(m.scheme() == NormalizationScheme::jester());
}

TEST_CASE("parse_jester endpoints, ids and delimiters") {
    std::istringstream in(jester_row("2", {{0, "-10.0"}, {1, "10.0"}}) +
                          jester_row("1", {{5, "0.0"}}));
    const auto m = parse_jester(in);
    CHECK(m.row_values(0)[0] == 1.0);
    CHECK(m.row_values(0)[1] == 5.0);
    CHECK(m.row_values(1)[0] == 3.0);
    CHECK(m.user_ids() == std::vector<std::int64_t>{1, 2});

    std::string tabbed = jester_row("7,1", {{3, "2.5"}});
    std::replace(tabbed.begin(), tabbed.end(), ',', '\t');
    std::istringstream tin(tabbed);
    const auto t = parse_jester(tin);
    CHECK(t.user_ids() == std::vector<std::int64_t>{7});
    CHECK(t.row_values(0)[0] == 3.5);
}

TEST_CASE("parse_jester errors and count mismatches") {
    std::istringstream short_row("1,2.0,3.0\n");
    CHECK_THROWS_AS(parse_jester(short_row), ParseError);

    std::istringstream out_of_range(jester_row("1", {{0, "12.0"}}));
    CHECK_THROWS_AS(parse_jester(out_of_range), RangeError);

    std::vector<std::string> warnings;
    JesterOptions warn;
    warn.warn = [&](const std::string& w) { warnings.push_back(w); };
    std::istringstream mismatch(jester_row("5", {{0, "1.0"}}));
    CHECK(parse_jester(mismatch, warn).n_ratings() == 1);
    CHECK(warnings.size() == 1);

    JesterOptions strict;
    strict.on_count_mismatch = CountMismatch::Fail;
    std::istringstream mismatch2(jester_row("5", {{0, "1.0"}}));
    CHECK_THROWS_AS(parse_jester(mismatch2, strict), ParseError);
}

TEST_CASE("parse_jester never leaks the sentinel") {
    Rng rng(3);
    std::istringstream in(testsupport::jester_text(50, 3, 11));
    const auto m = parse_jester(in);
    const double sentinel_image = 1.0 + (99.0 + 10.0) / 20.0 * 4.0;
    for (Index u = 0; u < m.n_users(); ++u)
        for (double v : m.row_values(u)) {
            CHECK(v != sentinel_image);
            CHECK(v <= 5.0);
        }
}

TEST_CASE("normalize_rating") {
    CHECK(normalize_rating(3, NormalizationScheme::identity()) == 3.0);
    CHECK(normalize_rating(0.0, NormalizationScheme::jester()) == 3.0);
    CHECK(normalize_rating(-5.0, NormalizationScheme::jester()) == 2.0);
    CHECK_THROWS_AS(normalize_rating(10.5, NormalizationScheme::jester()), RangeError);
    CHECK_THROWS_AS(normalize_rating(0.5, NormalizationScheme::identity()), RangeError);

    Rng rng(17);
    for (int k = 0; k < 1000; ++k) {
        const double a = -10.0 + 20.0 * rng.uniform();
        const double b = -10.0 + 20.0 * rng.uniform();
        if (a == b) continue;
        const double na = normalize_rating(a, NormalizationScheme::jester());
        const double nb = normalize_rating(b, NormalizationScheme::jester());
        CHECK((a < b) == (na < nb));
        CHECK(na >= 1.0);
        CHECK(na <= 5.0);
    }
}

TEST_CASE("build_matrix shape and dedup") {
    const std::vector<RatingEvent> two{{10, 5, 2.0, std::nullopt}, {20, 7, 4.0, std::nullopt}};
    const auto m = build_matrix(two);
    CHECK(m.n_users() == 2);
    CHECK(m.n_items() == 2);
    CHECK(m.n_ratings() == 2);
    CHECK(m.user_ids() == std::vector<std::int64_t>{10, 20});
    CHECK(m.item_ids() == std::vector<std::int64_t>{5, 7});

    const std::vector<RatingEvent> dup{{1, 1, 3.0, 100}, {1, 1, 5.0, 50}};
    const auto last = build_matrix(dup);
    REQUIRE(last.n_ratings() == 1);
    CHECK(last.row_values(0)[0] == 5.0);
    CHECK(last.row_timestamps(0)[0] == 50);
    CHECK(build_matrix(dup, DedupPolicy::KeepFirst).row_values(0)[0] == 3.0);
}

TEST_CASE("movielens round trip keeps every triple once") {
    const std::string text = testsupport::movielens_text(60, 80, 3, 40, 5);
    std::istringstream in(text);
    const auto events = parse_movielens(in);
    const auto m = build_matrix(events);
    std::set<std::pair<std::int64_t, std::int64_t>> pairs;
    for (const auto& e : events) pairs.insert({e.user_id, e.item_id});
    CHECK(static_cast<std::size_t>(m.n_ratings()) == pairs.size());

    auto back = to_events(m);
    auto sorted = events;
    auto key = [](const RatingEvent& a, const RatingEvent& b) {
        return std::tie(a.user_id, a.item_id) < std::tie(b.user_id, b.item_id);
    };
    std::stable_sort(sorted.begin(), sorted.end(), key);
    // generator never repeats a pair, so the sorted lists must agree
    CHECK(back == sorted);

    std::ostringstream csv;
    write_canonical_csv(m, csv);
    std::istringstream csv_in(csv.str());
    const auto again = build_matrix(read_canonical_csv(csv_in));
    CHECK(again.checksum() == m.checksum());
    CHECK(again.user_ids() == m.user_ids());
    CHECK(again.item_ids() == m.item_ids());
}

TEST_CASE("canonical csv for jester has empty timestamps") {
    std::istringstream in(jester_row("1", {{4, "5.0"}}));
    const auto m = parse_jester(in);
    std::ostringstream out;
    write_canonical_csv(m, out);
    CHECK(out.str() == "user_id,item_id,value,timestamp\n1,5,4,\n");
}

TEST_CASE("filter_min_ratings") {
    const auto m = testsupport::dense_matrix({{1, 2, 3, 4}, {5, 0, 0, 0}, {1, 1, 0, 0}});
    const auto same = filter_min_ratings(m, 0);
    CHECK(same.checksum() == m.checksum());
    const auto kept = filter_min_ratings(m, 2);
    CHECK(kept.n_users() == 2);
    CHECK(kept.n_items() == 4);
    CHECK(kept.user_ids() == std::vector<std::int64_t>{0, 2});
    CHECK_THROWS_AS(filter_min_ratings(m, 5), EmptyResultError);

    std::vector<RatingEvent> events;
    const Index lengths[] = {20, 50, 73};
    for (Index u = 0; u < 3; ++u)
        for (Index i = 0; i < lengths[u]; ++i) events.push_back({u, i, 3.0, std::nullopt});
    CHECK(filter_min_ratings(build_matrix(events), 50).n_users() == 2);
}

TEST_CASE("sample_users") {
    std::vector<RatingEvent> events;
    for (Index u = 0; u < 30; ++u) events.push_back({u, 0, 3.0, std::nullopt});
    const auto m = build_matrix(events);

    auto all = sample_users(m, 30, 4);
    std::sort(all.begin(), all.end());
    for (Index u = 0; u < 30; ++u) CHECK(all[u] == u);

    CHECK(sample_users(m, 10, 9) == sample_users(m, 10, 9));
    CHECK(sample_users(m, 10, 9) != sample_users(m, 10, 10));
    const auto ten = sample_users(m, 10, 9);
    CHECK(std::set<Index>(ten.begin(), ten.end()).size() == 10);
    CHECK_THROWS_AS(sample_users(m, 31, 0), ArgumentError);
}

TEST_CASE("sample_users is uniform over users") {
    std::vector<RatingEvent> events;
    for (Index u = 0; u < 10; ++u) events.push_back({u, 0, 3.0, std::nullopt});
    const auto m = build_matrix(events);
    std::vector<int> hits(10, 0);
    for (std::uint64_t s = 0; s < 4000; ++s)
        for (Index u : sample_users(m, 3, s)) ++hits[u];
    // expected 1200 per user, binomial sd about 29
    for (int h : hits) CHECK(std::abs(h - 1200) < 150);
}

TEST_CASE("prefix by timestamp") {
    // items a=0, b=1, c=2 with timestamps 5, 1, 3
    const std::vector<RatingEvent> events{{1, 0, 4.0, 5}, {1, 1, 2.0, 1}, {1, 2, 3.0, 3}};
    const auto m = build_matrix(events);
    const auto p = prefix(m, 0, 2, PrefixOrder::ByTimestamp);
    CHECK(p.nonZeros() == 2);
    CHECK(p.coeff(1) == 2.0);
    CHECK(p.coeff(2) == 3.0);
    CHECK(p.coeff(0) == 0.0);

    CHECK(prefix(m, 0, 0, PrefixOrder::ByTimestamp).nonZeros() == 0);
    CHECK(prefix(m, 0, 10, PrefixOrder::ByTimestamp).nonZeros() == 3);
    CHECK(prefix(m, 0, 1, PrefixOrder::ByItemIndex).coeff(0) == 4.0);
    CHECK_THROWS_AS(prefix(m, 3, 1, PrefixOrder::ByItemIndex), ArgumentError);

    const std::vector<RatingEvent> untimed{{1, 0, 4.0, std::nullopt}};
    CHECK_THROWS_AS(prefix(build_matrix(untimed), 0, 1, PrefixOrder::ByTimestamp), ArgumentError);
}

TEST_CASE("prefix matches a sort oracle and forms a chain") {
    std::istringstream in(testsupport::movielens_text(40, 60, 2, 45, 21));
    const auto events = parse_movielens(in);
    const auto m = build_matrix(events);
    for (Index u = 0; u < m.n_users(); ++u) {
        std::vector<RatingEvent> mine;
        for (const auto& e : events)
            if (e.user_id == m.user_ids()[u]) mine.push_back(e);
        std::sort(mine.begin(), mine.end(), [](const RatingEvent& a, const RatingEvent& b) {
            return std::tie(*a.timestamp, a.item_id) < std::tie(*b.timestamp, b.item_id);
        });
        SparseRow previous(m.n_items());
        for (Index t = 0; t <= m.row_length(u) + 1; ++t) {
            const auto p = prefix(m, u, t, PrefixOrder::ByTimestamp);
            std::set<std::int64_t> expected;
            for (Index k = 0; k < std::min<Index>(t, static_cast<Index>(mine.size())); ++k)
                expected.insert(mine[k].item_id);
            std::set<std::int64_t> got;
            for (SparseRow::InnerIterator it(p); it; ++it) got.insert(m.item_ids()[it.index()]);
            CHECK(got == expected);
            for (SparseRow::InnerIterator it(previous); it; ++it) CHECK(p.coeff(it.index()) == it.value());
            previous = p;
        }
    }
}
