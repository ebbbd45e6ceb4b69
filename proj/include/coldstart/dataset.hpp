#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>
#include <Eigen/SparseCore>

namespace coldstart {

using Eigen::Index;

/// Users x items, one compressed row per user.
using SparseRows = Eigen::SparseMatrix<double, Eigen::RowMajor>;
/// A single user's ratings over the item index space.
using SparseRow = Eigen::SparseVector<double>;

inline constexpr double kRatingMin = 1.0;
inline constexpr double kRatingMax = 5.0;

enum class ScaleKind { Identity1To5, JesterAffine };

/// Maps a dataset's native rating scale onto the common [1, 5] scale.
struct NormalizationScheme {
    ScaleKind kind = ScaleKind::Identity1To5;
    double source_lo = 1.0;
    double source_hi = 5.0;

    static constexpr NormalizationScheme identity() { return {ScaleKind::Identity1To5, 1.0, 5.0}; }
    static constexpr NormalizationScheme jester() { return {ScaleKind::JesterAffine, -10.0, 10.0}; }

    friend bool operator==(const NormalizationScheme&, const NormalizationScheme&) = default;
};

/// Throws RangeError when raw lies outside the scheme's source range.
double normalize_rating(double raw, const NormalizationScheme& scheme);

struct RatingEvent {
    std::int64_t user_id = 0;
    std::int64_t item_id = 0;
    double value = 0.0;
    std::optional<std::int64_t> timestamp;

    friend bool operator==(const RatingEvent&, const RatingEvent&) = default;
};

/// Immutable sparse rating matrix on the normalized [1, 5] scale.
///
/// Row u holds user u's ratings with strictly increasing item indices; an
/// absent entry means "not rated". Optional per-entry timestamps are stored
/// aligned with the compressed value array. User and item indices map back
/// to dataset ids through user_ids() and item_ids().
class RatingMatrix {
public:
    RatingMatrix() = default;

    /// Validates every invariant; throws RangeError / ArgumentError on violation.
    /// timestamps is either empty or has one entry per stored rating.
    RatingMatrix(SparseRows values, std::vector<std::int64_t> user_ids,
                 std::vector<std::int64_t> item_ids, NormalizationScheme scheme,
                 std::vector<std::int64_t> timestamps = {});

    Index n_users() const { return values_.rows(); }
    Index n_items() const { return values_.cols(); }
    Index n_ratings() const { return values_.nonZeros(); }

    const SparseRows& values() const { return values_; }
    auto row(Index user) const { return values_.row(user); }
    Index row_length(Index user) const {
        return values_.outerIndexPtr()[user + 1] - values_.outerIndexPtr()[user];
    }
    /// Item indices of user's ratings, ascending.
    std::span<const int> row_items(Index user) const;
    std::span<const double> row_values(Index user) const;
    /// Empty when the matrix carries no timestamps.
    std::span<const std::int64_t> row_timestamps(Index user) const;

    bool has_timestamps() const { return !timestamps_.empty(); }
    const std::vector<std::int64_t>& user_ids() const { return user_ids_; }
    const std::vector<std::int64_t>& item_ids() const { return item_ids_; }
    const NormalizationScheme& scheme() const { return scheme_; }

    /// Content hash over shape, indices and value bits.
    std::uint64_t checksum() const;

private:
    SparseRows values_;
    std::vector<std::int64_t> user_ids_;
    std::vector<std::int64_t> item_ids_;
    NormalizationScheme scheme_{};
    std::vector<std::int64_t> timestamps_;
};

/// Parses `user::item::rating::timestamp` lines. Blank lines are skipped.
/// With clamp_below_min, ratings in [0, 1) are raised to 1.0 instead of
/// rejected (MovieLens 10M contains half-star 0.5 ratings).
std::vector<RatingEvent> parse_movielens(std::istream& in, bool clamp_below_min = false);

enum class CountMismatch { Warn, Fail };

struct JesterOptions {
    CountMismatch on_count_mismatch = CountMismatch::Warn;
    /// Receives consistency warnings; null writes them to stderr.
    std::function<void(const std::string&)> warn;
};

/// Parses a Jester-style matrix (comma or tab separated, auto-detected).
///
/// A row is either 101 fields (declared count, 100 ratings; the user id is
/// the 1-based row number) or 102 fields (user id, declared count, 100
/// ratings). Cells equal to 99.0 mean "not rated" and are dropped.
RatingMatrix parse_jester(std::istream& in, const JesterOptions& options = {});

enum class DedupPolicy { KeepLast, KeepFirst };

/// Builds the matrix from normalized events. Users and items are indexed in
/// ascending id order. Timestamps are kept only if every event carries one.
RatingMatrix build_matrix(std::span<const RatingEvent> events,
                          DedupPolicy dedup = DedupPolicy::KeepLast,
                          NormalizationScheme scheme = NormalizationScheme::identity());

/// Flattens the matrix back to events (row-major order).
std::vector<RatingEvent> to_events(const RatingMatrix& m);

/// Canonical export: `user_id,item_id,value,timestamp` with a header line.
void write_canonical_csv(const RatingMatrix& m, std::ostream& out);
std::vector<RatingEvent> read_canonical_csv(std::istream& in);

/// Keeps users with at least min_count ratings; the item space is unchanged.
RatingMatrix filter_min_ratings(const RatingMatrix& m, Index min_count);

/// Restricts the matrix to the given users, in the given order.
RatingMatrix select_users(const RatingMatrix& m, std::span<const Index> users);

/// n distinct user indices drawn uniformly without replacement.
std::vector<Index> sample_users(const RatingMatrix& m, Index n, std::uint64_t seed);

/// n distinct entries of pool drawn uniformly without replacement.
std::vector<Index> sample_from(std::span<const Index> pool, Index n, std::uint64_t seed);

enum class PrefixOrder { ByTimestamp, ByItemIndex };

/// The user's (item_index, value) pairs in prefix order. ByTimestamp sorts
/// by time, then ascending item id.
std::vector<std::pair<int, double>> ordered_ratings(const RatingMatrix& m, Index user,
                                                    PrefixOrder order);

/// The user's first min(t, row length) ratings under order, sorted by item index.
SparseRow prefix(const RatingMatrix& m, Index user, Index t, PrefixOrder order);

}  // namespace coldstart
