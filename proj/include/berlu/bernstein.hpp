#pragma once

#include <span>
#include <string>
#include <vector>

namespace berlu {

/// b_{k,n}(t) = C(n,k) t^k (1-t)^(n-k). Throws std::out_of_range unless
/// 0 <= k <= n and t in [0,1].
double bernstein_basis(int k, int n, double t);

/// Continuous piecewise-linear function given by its kink locations, the
/// slope of every segment and its value at the origin.
class PiecewiseLinear {
public:
    PiecewiseLinear() = default;
    /// Throws std::invalid_argument if slopes.size() != breakpoints.size() + 1,
    /// breakpoints are not strictly increasing, or any value is non-finite.
    PiecewiseLinear(std::vector<double> breakpoints, std::vector<double> slopes, double value_at_zero);

    static PiecewiseLinear leaky_relu(double alpha);
    static PiecewiseLinear identity();

    const std::vector<double>& breakpoints() const noexcept { return breakpoints_; }
    const std::vector<double>& slopes() const noexcept { return slopes_; }
    double value_at_zero() const noexcept { return value_at_zero_; }

    double value(double x) const;
    /// Slope of the segment containing x; right-hand at a breakpoint.
    double slope(double x) const;

    /// {"breakpoints":[...],"slopes":[...],"value_at_zero":v}
    static PiecewiseLinear from_json(const std::string& text);
    std::string to_json() const;

private:
    std::size_t segment(double x) const;

    std::vector<double> breakpoints_;
    std::vector<double> slopes_ = {1.0};
    double value_at_zero_ = 0.0;
    std::vector<double> knot_values_;
};

/// Bernstein polynomial bridging two linear pieces over [center-eps, center+eps].
struct BernsteinTransition {
    double center = 0.0;
    double epsilon = 1.0;
    int degree = 2;
    std::vector<double> control_points;

    double lower() const noexcept { return center - epsilon; }
    double upper() const noexcept { return center + epsilon; }

    /// Maps x to the local coordinate t = (x - center + eps) / (2 eps).
    double local(double x) const noexcept { return (x - center + epsilon) / (2.0 * epsilon); }

    /// De Casteljau evaluation. Throws std::out_of_range outside the interval.
    double eval(double x) const;
    /// d/dx of the transition polynomial.
    double derivative(double x) const;
};

/// Control points satisfying C0 and C1 matching with the two pieces.
///
/// For degree 2 the solve is exact. For higher degree the four boundary
/// constraints fix b0, b1, b(n-1), bn and the interior points are placed on the
/// segment from b1 to b(n-1).
/// Throws std::invalid_argument on NaN input, degree < 2, eps <= 0, or when the
/// two lines miss each other at `center` by more than 1e-9.
BernsteinTransition solve_transition(double left_slope, double right_slope, double left_value,
                                     double right_value, double center, double epsilon, int degree);

/// De Casteljau on explicit control points, t in [0,1].
double de_casteljau(std::span<const double> beta, double t);

/// Direct sum of beta_k b_{k,n}(t). Retained for cross-checking.
double bernstein_sum(std::span<const double> beta, double t);

/// A piecewise-linear function with each kink replaced by a Bernstein transition.
class SmoothedActivation {
public:
    SmoothedActivation(PiecewiseLinear base, std::vector<BernsteinTransition> transitions);

    const PiecewiseLinear& base() const noexcept { return base_; }
    const std::vector<BernsteinTransition>& transitions() const noexcept { return transitions_; }

    double eval(double x) const;
    double derivative(double x) const;

private:
    const BernsteinTransition* covering(double x) const;

    PiecewiseLinear base_;
    std::vector<BernsteinTransition> transitions_;
};

/// Replaces every breakpoint of `pwl` by a degree-`degree` transition of
/// half-width `epsilon`. Throws std::invalid_argument when two transition
/// intervals would touch or overlap (2 eps >= smallest breakpoint gap).
SmoothedActivation mollify(const PiecewiseLinear& pwl, double epsilon, int degree);

}  // namespace berlu
