#pragma once

#include <iosfwd>
#include <span>
#include <string>

#include "coldstart/curves.hpp"

namespace coldstart {

enum class BreakpointMethod { SegmentedLinear, Kneedle };

std::string to_string(BreakpointMethod method);
BreakpointMethod parse_breakpoint_method(const std::string& name);

/// Ordinary least squares line y = intercept + slope * x.
struct LineFit {
    double intercept = 0.0;
    double slope = 0.0;
    double sse = 0.0;
    Index n = 0;
};

LineFit fit_line(std::span<const double> x, std::span<const double> y);

struct BreakpointReport {
    Index t_star = 0;
    BreakpointMethod method = BreakpointMethod::SegmentedLinear;
    /// Fit over t <= t_star.
    LineFit left;
    /// Fit over t >= t_star.
    LineFit right;
    double total_sse = 0.0;
    Index t_min = 0;
    Index t_max = 0;
};

/// Locates where a growth curve changes regime, within points t_min..t_max.
///
/// Candidates are curve points strictly inside (t_min, t_max) with at least
/// four points on each side (the candidate belongs to both sides).
/// SegmentedLinear fits a line to each side and minimizes the summed SSE;
/// Kneedle takes the point farthest from the chord joining the endpoints of
/// the min-max normalized curve. Ties go to the smaller t.
BreakpointReport detect_breakpoint(std::span<const double> t, std::span<const double> y,
                                   BreakpointMethod method, Index t_min, Index t_max);
BreakpointReport detect_breakpoint(const SuccessCurve& curve, BreakpointMethod method,
                                   Index t_min, Index t_max);

struct IntersectionReport {
    /// y = a + b ln t fitted to the current-quality series.
    double a = 0.0;
    double b = 0.0;
    double reference_level = 0.0;
    double t_cross = 0.0;
    /// t_cross lies outside the observed t range.
    bool extrapolated = false;
};

/// Throws NoIntersectionError when the fitted log curve does not rise.
IntersectionReport regression_intersection(const QualityCurve& curve);

/// Plain `key=value` lines.
void write_report(const BreakpointReport& report, std::ostream& out);
void write_report(const IntersectionReport& report, std::ostream& out);

}  // namespace coldstart
