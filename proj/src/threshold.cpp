#include "coldstart/threshold.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <vector>

#include "coldstart/errors.hpp"
#include "text.hpp"

namespace coldstart {

namespace {

constexpr std::size_t kMinSidePoints = 4;

}  // namespace

std::string to_string(BreakpointMethod method) {
    return method == BreakpointMethod::Kneedle ? "kneedle" : "segmented_linear";
}

BreakpointMethod parse_breakpoint_method(const std::string& name) {
    if (name == "segmented_linear") return BreakpointMethod::SegmentedLinear;
    if (name == "kneedle") return BreakpointMethod::Kneedle;
    throw ArgumentError("unknown breakpoint method '" + name + "'");
}

LineFit fit_line(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size()) throw ArgumentError("x and y differ in length");
    if (x.size() < 2) throw ArgumentError("a line fit needs at least 2 points");
    const auto n = static_cast<double>(x.size());
    double xm = 0.0, ym = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        xm += x[i];
        ym += y[i];
    }
    xm /= n;
    ym /= n;
    double sxx = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxx += (x[i] - xm) * (x[i] - xm);
        sxy += (x[i] - xm) * (y[i] - ym);
    }
    if (!(sxx > 0.0)) throw ArgumentError("a line fit needs at least 2 distinct x values");
    LineFit fit;
    fit.slope = sxy / sxx;
    fit.intercept = ym - fit.slope * xm;
    fit.n = static_cast<Index>(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double r = y[i] - (fit.intercept + fit.slope * x[i]);
        fit.sse += r * r;
    }
    return fit;
}

BreakpointReport detect_breakpoint(std::span<const double> t, std::span<const double> y,
                                   BreakpointMethod method, Index t_min, Index t_max) {
    if (t.size() != y.size()) throw ArgumentError("t and y differ in length");
    if (t_min >= t_max) throw ArgumentError("t_min must be below t_max");
    std::vector<double> xs, ys;
    for (std::size_t i = 0; i < t.size(); ++i) {
        if (t[i] < static_cast<double>(t_min) || t[i] > static_cast<double>(t_max)) continue;
        if (!xs.empty() && t[i] <= xs.back()) throw ArgumentError("t must be strictly increasing");
        xs.push_back(t[i]);
        ys.push_back(y[i]);
    }

    std::vector<std::size_t> candidates;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        const bool interior = xs[i] > static_cast<double>(t_min) && xs[i] < static_cast<double>(t_max);
        if (interior && i + 1 >= kMinSidePoints && xs.size() - i >= kMinSidePoints)
            candidates.push_back(i);
    }
    if (candidates.empty())
        throw ArgumentError("too few points: need at least 4 on each side of a candidate, have " +
                            std::to_string(xs.size()) + " in range");

    const std::span<const double> x_all(xs), y_all(ys);
    auto split_fit = [&](std::size_t i) {
        BreakpointReport r;
        r.t_star = static_cast<Index>(std::llround(xs[i]));
        r.method = method;
        r.left = fit_line(x_all.first(i + 1), y_all.first(i + 1));
        r.right = fit_line(x_all.subspan(i), y_all.subspan(i));
        r.total_sse = r.left.sse + r.right.sse;
        r.t_min = t_min;
        r.t_max = t_max;
        return r;
    };

    if (method == BreakpointMethod::SegmentedLinear) {
        BreakpointReport best = split_fit(candidates.front());
        for (std::size_t c = 1; c < candidates.size(); ++c) {
            auto r = split_fit(candidates[c]);
            if (r.total_sse < best.total_sse) best = r;
        }
        return best;
    }

    const auto [lo, hi] = std::minmax_element(ys.begin(), ys.end());
    const double y_span = *hi - *lo;
    const double x_span = xs.back() - xs.front();
    if (!(y_span > 0.0)) throw ArgumentError("kneedle needs a non-constant curve");
    auto norm_y = [&](std::size_t i) { return (ys[i] - *lo) / y_span; };
    const double y0 = norm_y(0), y1 = norm_y(ys.size() - 1);
    std::size_t best = candidates.front();
    double best_gap = -1.0;
    for (std::size_t i : candidates) {
        const double xn = (xs[i] - xs.front()) / x_span;
        const double gap = std::abs(norm_y(i) - (y0 + (y1 - y0) * xn));
        if (gap > best_gap) {
            best_gap = gap;
            best = i;
        }
    }
    return split_fit(best);
}

BreakpointReport detect_breakpoint(const SuccessCurve& curve, BreakpointMethod method,
                                   Index t_min, Index t_max) {
    std::vector<double> t, y;
    for (const auto& p : curve.points) {
        t.push_back(static_cast<double>(p.t));
        y.push_back(p.success_fraction);
    }
    return detect_breakpoint(t, y, method, t_min, t_max);
}

IntersectionReport regression_intersection(const QualityCurve& curve) {
    std::vector<double> log_t, current;
    double reference = 0.0, scale = 1.0;
    for (const auto& p : curve.points) {
        if (p.t <= 0) throw ArgumentError("quality curve t must be positive");
        log_t.push_back(std::log(static_cast<double>(p.t)));
        current.push_back(p.current_quality_mean);
        reference += p.reference_quality_mean;
        scale = std::max(scale, std::abs(p.current_quality_mean));
    }
    if (log_t.size() < 3) throw ArgumentError("regression needs at least 3 curve points");
    reference /= static_cast<double>(log_t.size());

    const LineFit fit = fit_line(log_t, current);
    if (!(fit.slope > 1e-12 * scale))
        throw NoIntersectionError("current quality does not rise with ratings (log slope " +
                                  format_double(fit.slope) + ")");
    IntersectionReport r;
    r.a = fit.intercept;
    r.b = fit.slope;
    r.reference_level = reference;
    r.t_cross = std::exp((reference - fit.intercept) / fit.slope);
    r.extrapolated = r.t_cross < static_cast<double>(curve.points.front().t) ||
                     r.t_cross > static_cast<double>(curve.points.back().t);
    return r;
}

void write_report(const BreakpointReport& r, std::ostream& out) {
    out << "t_star=" << r.t_star << '\n'
        << "method=" << to_string(r.method) << '\n'
        << "left_slope=" << format_double(r.left.slope) << '\n'
        << "left_intercept=" << format_double(r.left.intercept) << '\n'
        << "left_sse=" << format_double(r.left.sse) << '\n'
        << "right_slope=" << format_double(r.right.slope) << '\n'
        << "right_intercept=" << format_double(r.right.intercept) << '\n'
        << "right_sse=" << format_double(r.right.sse) << '\n'
        << "total_sse=" << format_double(r.total_sse) << '\n'
        << "search_t_min=" << r.t_min << '\n'
        << "search_t_max=" << r.t_max << '\n';
}

void write_report(const IntersectionReport& r, std::ostream& out) {
    out << "log_fit_a=" << format_double(r.a) << '\n'
        << "log_fit_b=" << format_double(r.b) << '\n'
        << "reference_level=" << format_double(r.reference_level) << '\n'
        << "t_cross=" << format_double(r.t_cross) << '\n'
        << "extrapolated=" << (r.extrapolated ? "true" : "false") << '\n';
}

}  // namespace coldstart
