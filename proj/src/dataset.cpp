#include "coldstart/dataset.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <istream>
#include <numeric>
#include <ostream>
#include <string_view>
#include <tuple>

#include "coldstart/errors.hpp"
#include "coldstart/rng.hpp"
#include "text.hpp"

namespace coldstart {

namespace {

constexpr double kJesterSentinel = 99.0;

bool is_sentinel(double v) { return std::abs(v - kJesterSentinel) < 1e-9; }

}  // namespace

double normalize_rating(double raw, const NormalizationScheme& scheme) {
    if (!std::isfinite(raw) || raw < scheme.source_lo || raw > scheme.source_hi)
        throw RangeError("rating " + format_double(raw) + " outside [" +
                         format_double(scheme.source_lo) + ", " +
                         format_double(scheme.source_hi) + "]");
    switch (scheme.kind) {
        case ScaleKind::Identity1To5:
            return raw;
        case ScaleKind::JesterAffine:
            return (raw - scheme.source_lo) / (scheme.source_hi - scheme.source_lo) *
                       (kRatingMax - kRatingMin) +
                   kRatingMin;
    }
    return raw;
}

RatingMatrix::RatingMatrix(SparseRows values, std::vector<std::int64_t> user_ids,
                           std::vector<std::int64_t> item_ids, NormalizationScheme scheme,
                           std::vector<std::int64_t> timestamps)
    : values_(std::move(values)),
      user_ids_(std::move(user_ids)),
      item_ids_(std::move(item_ids)),
      scheme_(scheme),
      timestamps_(std::move(timestamps)) {
    values_.makeCompressed();
    if (static_cast<Index>(user_ids_.size()) != values_.rows())
        throw ArgumentError("user id map size does not match row count");
    if (static_cast<Index>(item_ids_.size()) != values_.cols())
        throw ArgumentError("item id map size does not match column count");
    if (!timestamps_.empty() && static_cast<Index>(timestamps_.size()) != values_.nonZeros())
        throw ArgumentError("timestamp count does not match rating count");
    for (Index u = 0; u < values_.rows(); ++u) {
        const auto items = row_items(u);
        const auto vals = row_values(u);
        for (std::size_t k = 0; k < items.size(); ++k) {
            if (k > 0 && items[k] <= items[k - 1])
                throw ArgumentError("row " + std::to_string(u) +
                                    " has unsorted or duplicate item indices");
            if (!(vals[k] >= kRatingMin && vals[k] <= kRatingMax))
                throw RangeError("normalized rating " + format_double(vals[k]) +
                                 " outside [1, 5]");
        }
    }
}

std::span<const int> RatingMatrix::row_items(Index user) const {
    const auto* outer = values_.outerIndexPtr();
    return {values_.innerIndexPtr() + outer[user],
            static_cast<std::size_t>(outer[user + 1] - outer[user])};
}

std::span<const double> RatingMatrix::row_values(Index user) const {
    const auto* outer = values_.outerIndexPtr();
    return {values_.valuePtr() + outer[user],
            static_cast<std::size_t>(outer[user + 1] - outer[user])};
}

std::span<const std::int64_t> RatingMatrix::row_timestamps(Index user) const {
    if (timestamps_.empty()) return {};
    const auto* outer = values_.outerIndexPtr();
    return {timestamps_.data() + outer[user],
            static_cast<std::size_t>(outer[user + 1] - outer[user])};
}

std::uint64_t RatingMatrix::checksum() const {
    Fnv1a h;
    h.add(static_cast<std::uint64_t>(n_users()));
    h.add(static_cast<std::uint64_t>(n_items()));
    for (Index u = 0; u < n_users(); ++u) {
        h.add(static_cast<std::uint64_t>(row_length(u)));
        for (int i : row_items(u)) h.add(static_cast<std::uint64_t>(i));
        for (double v : row_values(u)) h.add(std::bit_cast<std::uint64_t>(v));
    }
    return h.value();
}

std::vector<RatingEvent> parse_movielens(std::istream& in, bool clamp_below_min) {
    std::vector<RatingEvent> events;
    std::string line;
    std::size_t line_no = 0;
    const auto scheme = NormalizationScheme::identity();
    while (std::getline(in, line)) {
        ++line_no;
        std::string_view text = trim(line);
        if (text.empty()) continue;
        const auto fields = split(text, "::");
        if (fields.size() != 4)
            throw ParseError(line_no, "expected user::item::rating::timestamp, got " +
                                          std::to_string(fields.size()) + " fields");
        RatingEvent e;
        std::int64_t ts = 0;
        double raw = 0.0;
        if (!parse_number(fields[0], e.user_id) || !parse_number(fields[1], e.item_id) ||
            !parse_number(fields[2], raw) || !parse_number(fields[3], ts))
            throw ParseError(line_no, "malformed field in '" + std::string(text) + "'");
        if (e.user_id < 0 || e.item_id < 0)
            throw ParseError(line_no, "negative user or item id");
        if (clamp_below_min && raw >= 0.0 && raw < kRatingMin) raw = kRatingMin;
        try {
            e.value = normalize_rating(raw, scheme);
        } catch (const RangeError& err) {
            throw RangeError("line " + std::to_string(line_no) + ": " + err.what());
        }
        e.timestamp = ts;
        events.push_back(e);
    }
    return events;
}

RatingMatrix parse_jester(std::istream& in, const JesterOptions& options) {
    constexpr Index kItems = 100;
    const auto scheme = NormalizationScheme::jester();
    std::vector<Eigen::Triplet<double>> triplets;
    std::vector<std::int64_t> user_ids;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        std::string_view text = trim(line);
        if (text.empty()) continue;
        const char delim = text.find('\t') != std::string_view::npos ? '\t' : ',';
        const auto fields = split(text, std::string_view(&delim, 1));
        if (fields.size() != 101 && fields.size() != 102)
            throw ParseError(line_no, "expected 101 or 102 fields, got " +
                                          std::to_string(fields.size()));
        const std::size_t first_rating = fields.size() - kItems;
        std::int64_t user_id = static_cast<std::int64_t>(user_ids.size()) + 1;
        if (fields.size() == 102 && !parse_number(trim(fields[0]), user_id))
            throw ParseError(line_no, "malformed user id");
        double declared = 0.0;
        if (!parse_number(trim(fields[first_rating - 1]), declared))
            throw ParseError(line_no, "malformed rating count");

        const auto row = static_cast<int>(user_ids.size());
        Index observed = 0;
        for (Index item = 0; item < kItems; ++item) {
            double raw = 0.0;
            if (!parse_number(trim(fields[first_rating + item]), raw))
                throw ParseError(line_no, "malformed rating in column " +
                                              std::to_string(first_rating + item + 1));
            if (is_sentinel(raw)) continue;
            if (!(raw >= scheme.source_lo && raw <= scheme.source_hi))
                throw RangeError("line " + std::to_string(line_no) + ": rating " +
                                 format_double(raw) + " outside [-10, 10]");
            triplets.emplace_back(row, static_cast<int>(item), normalize_rating(raw, scheme));
            ++observed;
        }
        if (std::llround(declared) != observed) {
            const std::string msg = "line " + std::to_string(line_no) + ": declared " +
                                    format_double(declared) + " ratings, found " +
                                    std::to_string(observed);
            if (options.on_count_mismatch == CountMismatch::Fail) throw ParseError(line_no, msg);
            if (options.warn)
                options.warn(msg);
            else
                warn_stderr(msg);
        }
        user_ids.push_back(user_id);
    }
    SparseRows values(static_cast<Index>(user_ids.size()), kItems);
    values.setFromTriplets(triplets.begin(), triplets.end());
    std::vector<std::int64_t> item_ids(kItems);
    std::iota(item_ids.begin(), item_ids.end(), 1);
    return RatingMatrix(std::move(values), std::move(user_ids), std::move(item_ids), scheme);
}

RatingMatrix build_matrix(std::span<const RatingEvent> events, DedupPolicy dedup,
                          NormalizationScheme scheme) {
    std::vector<std::int64_t> user_ids, item_ids;
    user_ids.reserve(events.size());
    item_ids.reserve(events.size());
    bool all_timestamped = !events.empty();
    for (const auto& e : events) {
        if (e.user_id < 0 || e.item_id < 0) throw ArgumentError("negative user or item id");
        user_ids.push_back(e.user_id);
        item_ids.push_back(e.item_id);
        all_timestamped = all_timestamped && e.timestamp.has_value();
    }
    auto unique_sorted = [](std::vector<std::int64_t>& ids) {
        std::sort(ids.begin(), ids.end());
        ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
    };
    unique_sorted(user_ids);
    unique_sorted(item_ids);
    auto index_of = [](const std::vector<std::int64_t>& ids, std::int64_t id) {
        return static_cast<int>(std::lower_bound(ids.begin(), ids.end(), id) - ids.begin());
    };

    // (user, item, sequence); keep-last picks the highest sequence per pair.
    std::vector<std::tuple<int, int, std::size_t>> order;
    order.reserve(events.size());
    for (std::size_t s = 0; s < events.size(); ++s)
        order.emplace_back(index_of(user_ids, events[s].user_id),
                           index_of(item_ids, events[s].item_id), s);
    std::sort(order.begin(), order.end());

    SparseRows values(static_cast<Index>(user_ids.size()), static_cast<Index>(item_ids.size()));
    std::vector<std::int64_t> timestamps;
    values.reserve(static_cast<Index>(order.size()));
    int current_row = -1;
    for (std::size_t k = 0; k < order.size();) {
        const auto [u, i, first_seq] = order[k];
        std::size_t end = k;
        while (end < order.size() && std::get<0>(order[end]) == u && std::get<1>(order[end]) == i)
            ++end;
        const std::size_t seq =
            dedup == DedupPolicy::KeepLast ? std::get<2>(order[end - 1]) : first_seq;
        while (current_row < u) values.startVec(++current_row);
        values.insertBack(u, i) = events[seq].value;
        if (all_timestamped) timestamps.push_back(*events[seq].timestamp);
        k = end;
    }
    while (current_row + 1 < values.rows()) values.startVec(++current_row);
    values.finalize();
    return RatingMatrix(std::move(values), std::move(user_ids), std::move(item_ids), scheme,
                        std::move(timestamps));
}

std::vector<RatingEvent> to_events(const RatingMatrix& m) {
    std::vector<RatingEvent> events;
    events.reserve(static_cast<std::size_t>(m.n_ratings()));
    for (Index u = 0; u < m.n_users(); ++u) {
        const auto items = m.row_items(u);
        const auto vals = m.row_values(u);
        const auto ts = m.row_timestamps(u);
        for (std::size_t k = 0; k < items.size(); ++k) {
            RatingEvent e{m.user_ids()[u], m.item_ids()[items[k]], vals[k], std::nullopt};
            if (!ts.empty()) e.timestamp = ts[k];
            events.push_back(e);
        }
    }
    return events;
}

void write_canonical_csv(const RatingMatrix& m, std::ostream& out) {
    out << "user_id,item_id,value,timestamp\n";
    std::string line;
    for (const auto& e : to_events(m)) {
        line.clear();
        line += std::to_string(e.user_id);
        line += ',';
        line += std::to_string(e.item_id);
        line += ',';
        line += format_double(e.value);
        line += ',';
        if (e.timestamp) line += std::to_string(*e.timestamp);
        line += '\n';
        out << line;
    }
}

std::vector<RatingEvent> read_canonical_csv(std::istream& in) {
    std::vector<RatingEvent> events;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        std::string_view text = trim(line);
        if (text.empty() || (line_no == 1 && text.starts_with("user_id"))) continue;
        const auto fields = split(text, ",");
        if (fields.size() != 4) throw ParseError(line_no, "expected 4 fields");
        RatingEvent e;
        if (!parse_number(fields[0], e.user_id) || !parse_number(fields[1], e.item_id) ||
            !parse_number(fields[2], e.value))
            throw ParseError(line_no, "malformed field");
        if (!fields[3].empty()) {
            std::int64_t ts = 0;
            if (!parse_number(fields[3], ts)) throw ParseError(line_no, "malformed timestamp");
            e.timestamp = ts;
        }
        if (!(e.value >= kRatingMin && e.value <= kRatingMax))
            throw RangeError("line " + std::to_string(line_no) + ": value outside [1, 5]");
        events.push_back(e);
    }
    return events;
}

RatingMatrix select_users(const RatingMatrix& m, std::span<const Index> users) {
    SparseRows values(static_cast<Index>(users.size()), m.n_items());
    std::vector<std::int64_t> user_ids, timestamps;
    Index nnz = 0;
    for (Index u : users) {
        if (u < 0 || u >= m.n_users()) throw ArgumentError("unknown user index " + std::to_string(u));
        nnz += m.row_length(u);
    }
    values.reserve(nnz);
    for (std::size_t r = 0; r < users.size(); ++r) {
        const Index u = users[r];
        values.startVec(static_cast<Index>(r));
        const auto items = m.row_items(u);
        const auto vals = m.row_values(u);
        for (std::size_t k = 0; k < items.size(); ++k)
            values.insertBack(static_cast<Index>(r), items[k]) = vals[k];
        const auto ts = m.row_timestamps(u);
        timestamps.insert(timestamps.end(), ts.begin(), ts.end());
        user_ids.push_back(m.user_ids()[u]);
    }
    values.finalize();
    return RatingMatrix(std::move(values), std::move(user_ids), m.item_ids(), m.scheme(),
                        std::move(timestamps));
}

RatingMatrix filter_min_ratings(const RatingMatrix& m, Index min_count) {
    if (min_count < 0) throw ArgumentError("min_count must be non-negative");
    std::vector<Index> keep;
    for (Index u = 0; u < m.n_users(); ++u)
        if (m.row_length(u) >= min_count) keep.push_back(u);
    if (keep.empty())
        throw EmptyResultError("no user has at least " + std::to_string(min_count) + " ratings");
    return select_users(m, keep);
}

std::vector<Index> sample_from(std::span<const Index> pool, Index n, std::uint64_t seed) {
    const auto size = static_cast<Index>(pool.size());
    if (n < 0 || n > size)
        throw ArgumentError("cannot sample " + std::to_string(n) + " of " + std::to_string(size) +
                            " users");
    std::vector<Index> draw(pool.begin(), pool.end());
    Rng rng(seed);
    for (Index k = 0; k < n; ++k) {
        const auto j = k + static_cast<Index>(rng.below(static_cast<std::uint64_t>(size - k)));
        std::swap(draw[k], draw[j]);
    }
    draw.resize(static_cast<std::size_t>(n));
    return draw;
}

std::vector<Index> sample_users(const RatingMatrix& m, Index n, std::uint64_t seed) {
    std::vector<Index> all(static_cast<std::size_t>(m.n_users()));
    std::iota(all.begin(), all.end(), Index{0});
    return sample_from(all, n, seed);
}

std::vector<std::pair<int, double>> ordered_ratings(const RatingMatrix& m, Index user,
                                                    PrefixOrder order) {
    if (user < 0 || user >= m.n_users())
        throw ArgumentError("unknown user index " + std::to_string(user));
    const auto items = m.row_items(user);
    const auto vals = m.row_values(user);
    std::vector<std::pair<int, double>> out;
    out.reserve(items.size());
    for (std::size_t k = 0; k < items.size(); ++k) out.emplace_back(items[k], vals[k]);
    if (order == PrefixOrder::ByTimestamp) {
        const auto ts = m.row_timestamps(user);
        if (ts.empty() && !items.empty())
            throw ArgumentError("timestamp ordering requested but the matrix has no timestamps");
        std::vector<std::size_t> perm(items.size());
        std::iota(perm.begin(), perm.end(), std::size_t{0});
        // Item indices ascend with item ids, so index order is the id tie-break.
        std::stable_sort(perm.begin(), perm.end(),
                         [&](std::size_t a, std::size_t b) { return ts[a] < ts[b]; });
        std::vector<std::pair<int, double>> sorted;
        sorted.reserve(perm.size());
        for (auto p : perm) sorted.push_back(out[p]);
        out = std::move(sorted);
    }
    return out;
}

SparseRow prefix(const RatingMatrix& m, Index user, Index t, PrefixOrder order) {
    if (t < 0) throw ArgumentError("prefix length must be non-negative");
    auto entries = ordered_ratings(m, user, order);
    entries.resize(std::min<std::size_t>(entries.size(), static_cast<std::size_t>(t)));
    std::sort(entries.begin(), entries.end());
    SparseRow row(m.n_items());
    row.reserve(static_cast<Index>(entries.size()));
    for (const auto& [item, value] : entries) row.insertBack(item) = value;
    return row;
}

}  // namespace coldstart
