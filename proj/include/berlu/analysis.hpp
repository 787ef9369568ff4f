#pragma once

#include <berlu/activations.hpp>

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

namespace berlu {

// ---------------------------------------------------------------------------
// Lipschitz estimation

struct LipschitzGrid {
    double lo = -10.0;
    double hi = 10.0;
    int coarse_points = 20001;
    int refine_iters = 100;
};

struct LipschitzReport {
    ActivationSpec spec;
    double estimate = 0.0;
    /// Closed-form supremum of |f'| when one is known for the family.
    std::optional<double> exact;
    double argmax_x = 0.0;
    LipschitzGrid grid;
    /// Set when a BerLU/leaky slope has |alpha| > 1, where L = |alpha| > 1.
    bool expansive_slope = false;
};

/// Grid search of |f'| over [lo, hi] followed by golden-section refinement
/// around the best grid point. Throws std::invalid_argument if the range is
/// not finite and ordered or coarse_points < 1000.
LipschitzReport estimate_lipschitz(const ActivationSpec& spec, const LipschitzGrid& grid = {});

/// Closed-form sup |f'| on the real line, when available.
std::optional<double> exact_lipschitz(const ActivationSpec& spec);

// ---------------------------------------------------------------------------
// Gradient checking

struct GradCheckReport {
    ActivationSpec spec;
    double max_rel_error = 0.0;
    double worst_x = 0.0;
    double step = 0.0;
    std::size_t points = 0;
};

/// Compares eval_dx against central differences (f(x+h) - f(x-h)) / 2h. The
/// relative error uses max(|analytic|, 1e-8) as denominator.
GradCheckReport grad_check(const ActivationSpec& spec, std::span<const double> xs, double step);

/// `count` evenly spaced points on [lo, hi] with every point closer than
/// `margin` to a kink of `spec` removed.
std::vector<double> grid_excluding_kinks(const ActivationSpec& spec, double lo, double hi, std::size_t count,
                                         double margin);

// ---------------------------------------------------------------------------
// Mean-field signal propagation

struct CriticalInit {
    double weight_var = 1.0;
    double bias_var = 0.0;
};

/// Solves weight_var * E[f'(sqrt(q) Z)^2] = 1 for Z ~ N(0,1) with bias_var = 0,
/// using 64-node Gauss-Hermite quadrature and bisection on [1e-3, 1e2].
/// Throws std::domain_error when the root is outside the bracket.
CriticalInit find_critical_init(const ActivationSpec& spec, double target_q);

/// E[g(sqrt(q) Z)] for Z ~ N(0,1) by 64-node Gauss-Hermite quadrature.
double gaussian_expectation(double q, const std::function<double(double)>& g);

struct ProbeSettings {
    int depth = 64;
    int width = 1024;
    int trials = 32;
    double c0 = 0.5;
    double target_q = 1.0;
    std::uint64_t seed = 0;
    /// Worker threads for independent trials; 0 picks hardware concurrency.
    unsigned threads = 0;
};

struct CorrelationTrace {
    ActivationSpec spec;
    int depth = 0;
    int width = 0;
    int trials = 0;
    double c0 = 0.0;
    std::uint64_t seed = 0;
    CriticalInit init;
    double target_q = 1.0;
    /// 1 - c_l for l = 1..depth, averaged over trials.
    std::vector<double> one_minus_c;
};

/// Raised when a propagated signal overflows.
class ProbeOverflow : public std::runtime_error {
public:
    ProbeOverflow(int layer, int trial);
    int layer() const noexcept { return layer_; }

private:
    int layer_;
};

/// Propagates two inputs with cosine c0 and squared norm q * width through
/// `depth` random dense layers at critical initialisation (zero bias) and
/// records the cosine of the two pre-activation vectors after every layer.
/// Deterministic given the seed regardless of thread count.
CorrelationTrace correlation_probe(const ActivationSpec& spec, const ProbeSettings& settings);

struct DecayFit {
    double exponent = 0.0;
    double coefficient = 0.0;
    int first_layer = 0;
    int last_layer = 0;
    double r_squared = 0.0;
};

/// Log-log least squares of 1 - c_l against l over the inclusive layer range.
/// Throws std::invalid_argument on a range outside the trace, fewer than
/// 8 layers, or non-positive 1 - c_l inside the range.
DecayFit fit_decay(const CorrelationTrace& trace, int first_layer, int last_layer);
DecayFit fit_decay(std::span<const double> one_minus_c, int first_layer, int last_layer);

}  // namespace berlu
