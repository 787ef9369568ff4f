#include <berlu/bernstein.hpp>

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace berlu {

namespace {

constexpr double kMeetTolerance = 1e-9;

double binomial(int n, int k) {
    double c = 1.0;
    for (int i = 1; i <= k; ++i)
        c = c * (n - k + i) / i;
    return c;
}

void require_finite(double v, const char* what) {
    if (!std::isfinite(v))
        throw std::invalid_argument(std::string(what) + " must be finite");
}

}  // namespace

double bernstein_basis(int k, int n, double t) {
    if (n < 0 || k < 0 || k > n)
        throw std::out_of_range("bernstein_basis: require 0 <= k <= n");
    if (!(t >= 0.0 && t <= 1.0))
        throw std::out_of_range("bernstein_basis: t must lie in [0,1]");
    return binomial(n, k) * std::pow(t, k) * std::pow(1.0 - t, n - k);
}

double de_casteljau(std::span<const double> beta, double t) {
    if (beta.empty())
        throw std::invalid_argument("de_casteljau: no control points");
    std::vector<double> work(beta.begin(), beta.end());
    const double s = 1.0 - t;
    for (std::size_t r = work.size() - 1; r > 0; --r)
        for (std::size_t i = 0; i < r; ++i)
            work[i] = s * work[i] + t * work[i + 1];
    return work[0];
}

double bernstein_sum(std::span<const double> beta, double t) {
    const int n = static_cast<int>(beta.size()) - 1;
    double sum = 0.0;
    for (int k = 0; k <= n; ++k)
        sum += beta[k] * bernstein_basis(k, n, t);
    return sum;
}

// ---------------------------------------------------------------------------
// PiecewiseLinear

PiecewiseLinear::PiecewiseLinear(std::vector<double> breakpoints, std::vector<double> slopes, double value_at_zero)
    : breakpoints_(std::move(breakpoints)), slopes_(std::move(slopes)), value_at_zero_(value_at_zero) {
    if (slopes_.empty())
        throw std::invalid_argument("piecewise linear: slope list is empty");
    if (slopes_.size() != breakpoints_.size() + 1)
        throw std::invalid_argument("piecewise linear: need exactly one more slope than breakpoints");
    for (double b : breakpoints_)
        require_finite(b, "breakpoint");
    for (double s : slopes_)
        require_finite(s, "slope");
    require_finite(value_at_zero_, "value_at_zero");
    for (std::size_t i = 1; i < breakpoints_.size(); ++i)
        if (!(breakpoints_[i] > breakpoints_[i - 1]))
            throw std::invalid_argument("piecewise linear: breakpoints must be strictly increasing");

    // Anchor on the segment containing the origin and walk outwards.
    knot_values_.resize(breakpoints_.size());
    const std::size_t s0 = segment(0.0);
    for (std::size_t i = s0; i < breakpoints_.size(); ++i) {
        const double x0 = i == s0 ? 0.0 : breakpoints_[i - 1];
        const double v0 = i == s0 ? value_at_zero_ : knot_values_[i - 1];
        knot_values_[i] = v0 + slopes_[i] * (breakpoints_[i] - x0);
    }
    for (std::size_t i = s0; i-- > 0;) {
        const double x0 = i + 1 == s0 ? 0.0 : breakpoints_[i + 1];
        const double v0 = i + 1 == s0 ? value_at_zero_ : knot_values_[i + 1];
        knot_values_[i] = v0 - slopes_[i + 1] * (x0 - breakpoints_[i]);
    }
}

PiecewiseLinear PiecewiseLinear::leaky_relu(double alpha) { return PiecewiseLinear({0.0}, {alpha, 1.0}, 0.0); }

PiecewiseLinear PiecewiseLinear::identity() { return PiecewiseLinear({}, {1.0}, 0.0); }

std::size_t PiecewiseLinear::segment(double x) const {
    return static_cast<std::size_t>(std::upper_bound(breakpoints_.begin(), breakpoints_.end(), x) -
                                    breakpoints_.begin());
}

double PiecewiseLinear::value(double x) const {
    const std::size_t s = segment(x);
    const std::size_t s0 = segment(0.0);
    if (s == s0)
        return value_at_zero_ + slopes_[s] * x;
    if (s > s0)
        return knot_values_[s - 1] + slopes_[s] * (x - breakpoints_[s - 1]);
    return knot_values_[s] + slopes_[s] * (x - breakpoints_[s]);
}

double PiecewiseLinear::slope(double x) const { return slopes_[segment(x)]; }

PiecewiseLinear PiecewiseLinear::from_json(const std::string& text) {
    const auto j = nlohmann::json::parse(text);
    std::vector<double> bps = j.value("breakpoints", std::vector<double>{});
    if (!j.contains("slopes"))
        throw std::invalid_argument("piecewise linear JSON: missing 'slopes'");
    return PiecewiseLinear(std::move(bps), j.at("slopes").get<std::vector<double>>(), j.value("value_at_zero", 0.0));
}

std::string PiecewiseLinear::to_json() const {
    nlohmann::json j;
    j["breakpoints"] = breakpoints_;
    j["slopes"] = slopes_;
    j["value_at_zero"] = value_at_zero_;
    return j.dump();
}

// ---------------------------------------------------------------------------
// BernsteinTransition

double BernsteinTransition::eval(double x) const {
    if (!(x >= lower() && x <= upper()))
        throw std::out_of_range("transition: x outside [center-eps, center+eps]");
    return de_casteljau(control_points, local(x));
}

double BernsteinTransition::derivative(double x) const {
    if (!(x >= lower() && x <= upper()))
        throw std::out_of_range("transition: x outside [center-eps, center+eps]");
    // Hodograph: degree-(n-1) curve on n * (b_{k+1} - b_k), scaled by dt/dx.
    std::vector<double> diff(control_points.size() - 1);
    for (std::size_t k = 0; k + 1 < control_points.size(); ++k)
        diff[k] = control_points[k + 1] - control_points[k];
    return degree / (2.0 * epsilon) * de_casteljau(diff, local(x));
}

BernsteinTransition solve_transition(double left_slope, double right_slope, double left_value, double right_value,
                                     double center, double epsilon, int degree) {
    for (double v : {left_slope, right_slope, left_value, right_value, center, epsilon})
        if (std::isnan(v) || std::isinf(v))
            throw std::invalid_argument("solve_transition: inputs must be finite");
    if (degree < 2)
        throw std::invalid_argument("solve_transition: degree must be >= 2");
    if (!(epsilon > 0.0))
        throw std::invalid_argument("solve_transition: epsilon must be > 0");

    const double left_at_center = left_value + left_slope * epsilon;
    const double right_at_center = right_value - right_slope * epsilon;
    if (std::abs(left_at_center - right_at_center) >= kMeetTolerance)
        throw std::invalid_argument("solve_transition: linear pieces do not meet at the center");

    const int n = degree;
    const double h = 2.0 * epsilon / n;
    BernsteinTransition tr{center, epsilon, degree, std::vector<double>(n + 1)};
    auto& b = tr.control_points;
    b[0] = left_value;
    b[n] = right_value;
    if (n == 2) {
        // Both C1 conditions give the same middle point when the pieces meet.
        b[1] = left_value + h * left_slope;
    } else {
        const double first = left_value + h * left_slope;
        const double last = right_value - h * right_slope;
        for (int k = 1; k < n; ++k)
            b[k] = first + (last - first) * (k - 1) / (n - 2);
    }
    return tr;
}

// ---------------------------------------------------------------------------
// SmoothedActivation

SmoothedActivation::SmoothedActivation(PiecewiseLinear base, std::vector<BernsteinTransition> transitions)
    : base_(std::move(base)), transitions_(std::move(transitions)) {}

const BernsteinTransition* SmoothedActivation::covering(double x) const {
    auto it = std::upper_bound(transitions_.begin(), transitions_.end(), x,
                               [](double v, const BernsteinTransition& t) { return v < t.lower(); });
    if (it == transitions_.begin())
        return nullptr;
    --it;
    return x <= it->upper() ? &*it : nullptr;
}

double SmoothedActivation::eval(double x) const {
    if (const auto* tr = covering(x))
        return tr->eval(x);
    return base_.value(x);
}

double SmoothedActivation::derivative(double x) const {
    if (const auto* tr = covering(x))
        return tr->derivative(x);
    return base_.slope(x);
}

SmoothedActivation mollify(const PiecewiseLinear& pwl, double epsilon, int degree) {
    if (!(epsilon > 0.0) || !std::isfinite(epsilon))
        throw std::invalid_argument("mollify: epsilon must be finite and > 0");
    const auto& bps = pwl.breakpoints();
    for (std::size_t i = 1; i < bps.size(); ++i)
        if (!(2.0 * epsilon < bps[i] - bps[i - 1]))
            throw std::invalid_argument("mollify: transition intervals overlap (2*epsilon >= breakpoint gap)");

    std::vector<BernsteinTransition> trs;
    trs.reserve(bps.size());
    for (std::size_t i = 0; i < bps.size(); ++i) {
        const double c = bps[i];
        const double ls = pwl.slopes()[i];
        const double rs = pwl.slopes()[i + 1];
        const double vc = pwl.value(c);
        trs.push_back(solve_transition(ls, rs, vc - ls * epsilon, vc + rs * epsilon, c, epsilon, degree));
    }
    return SmoothedActivation(pwl, std::move(trs));
}

}  // namespace berlu
