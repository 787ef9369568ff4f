#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <type_traits>
#include <variant>
#include <vector>

namespace berlu {

/// Dense buffer of 64-bit reals; the currency of every elementwise kernel.
using NumericBuffer = std::vector<double>;

/// Raised when an input buffer holds NaN or infinity.
class NonFiniteInput : public std::domain_error {
public:
    NonFiniteInput(std::size_t index, double value);
    std::size_t index() const noexcept { return index_; }

private:
    std::size_t index_;
};

/// Shape parameters of the Bernstein linear unit.
///
/// `alpha` is the slope of the negative linear piece and `epsilon` the
/// half-width of the quadratic transition centred on the origin. Any finite
/// alpha is accepted; |alpha| > 1 leaves the non-expansive regime and is
/// reported by the analysis tools rather than rejected here.
struct BerLUParams {
    double alpha = 0.01;
    double epsilon = 1e-2;

    /// Throws std::invalid_argument unless epsilon > 0 and both fields are finite.
    void validate() const;
};

// ---------------------------------------------------------------------------
// Scalar BerLU kernels. Branch boundaries are inclusive on the quadratic piece.

inline double berlu_forward_unchecked(double x, double alpha, double eps) noexcept {
    if (x < -eps)
        return alpha * x;
    if (x > eps)
        return x;
    return (1.0 - alpha) / (4.0 * eps) * x * x + 0.5 * (1.0 + alpha) * x + 0.25 * (1.0 - alpha) * eps;
}

inline double berlu_dx_unchecked(double x, double alpha, double eps) noexcept {
    if (x < -eps)
        return alpha;
    if (x > eps)
        return 1.0;
    return (1.0 - alpha) / (2.0 * eps) * x + 0.5 * (1.0 + alpha);
}

inline double berlu_dalpha_unchecked(double x, double /*alpha*/, double eps) noexcept {
    if (x < -eps)
        return x;
    if (x > eps)
        return 0.0;
    const double d = x - eps;
    return -d * d / (4.0 * eps);
}

double berlu_forward(double x, const BerLUParams& p);
double berlu_dx(double x, const BerLUParams& p);
/// Sensitivity of the activation to its negative slope.
double berlu_dalpha(double x, const BerLUParams& p);

// ---------------------------------------------------------------------------
// Activation families.

namespace act {
struct BerLU {
    BerLUParams params;
};
struct LeakyReLU {
    double alpha = 0.01;
};
struct ReLU {};
struct PReLU {
    double alpha = 0.25;
};
/// Exact form x * Phi(x).
struct GELU {};
struct ELU {
    double scale = 1.0;
};
struct CELU {
    double scale = 1.0;
};
struct SiLU {};
struct Mish {};
struct Identity {};
}  // namespace act

using ActivationKind = std::variant<act::BerLU, act::LeakyReLU, act::ReLU, act::PReLU, act::GELU,
                                    act::ELU, act::CELU, act::SiLU, act::Mish, act::Identity>;

/// Immutable handle naming an activation family and its parameters.
class ActivationSpec {
public:
    ActivationSpec() : kind_(act::Identity{}) {}
    /// Throws std::invalid_argument on non-finite parameters, epsilon <= 0 or scale <= 0.
    ActivationSpec(ActivationKind kind);  // NOLINT(google-explicit-constructor)

    template <class Family>
        requires std::is_constructible_v<ActivationKind, Family> &&
                 (!std::is_same_v<std::decay_t<Family>, ActivationKind>)
    ActivationSpec(Family family)  // NOLINT(google-explicit-constructor)
        : ActivationSpec(ActivationKind(std::move(family))) {}

    const ActivationKind& kind() const noexcept { return kind_; }

    /// Canonical lower-case family name ("berlu", "gelu", ...).
    std::string name() const;

    /// True for families whose negative slope is trained (BerLU, PReLU).
    bool is_parametric() const noexcept;

    /// Negative slope for BerLU/LeakyReLU/PReLU; 0 for ReLU. Throws otherwise.
    double alpha() const;

    /// Copy with a replaced learnable slope. Throws if the family is not parametric.
    ActivationSpec with_alpha(double alpha) const;

    /// Points where the first or second derivative is discontinuous.
    std::vector<double> kinks() const;

    template <class T>
    bool holds() const noexcept {
        return std::holds_alternative<T>(kind_);
    }

    friend bool operator==(const ActivationSpec& a, const ActivationSpec& b);

private:
    ActivationKind kind_;
};

/// Names accepted by activation_from_name, in display order.
const std::vector<std::string>& activation_names();

struct ActivationOptions {
    double alpha = 0.01;
    double epsilon = 1e-2;
    double scale = 1.0;
};

/// Builds a spec from a family name. Throws std::invalid_argument listing
/// the valid names when `name` is unknown.
ActivationSpec activation_from_name(std::string_view name, const ActivationOptions& opts = {});

/// One spec per shipped family with default parameters.
std::vector<ActivationSpec> all_activations();

// ---------------------------------------------------------------------------
// Scalar dispatch. Kinks of ReLU/LeakyReLU/PReLU/ELU use the right-hand derivative.

double forward(const ActivationSpec& spec, double x);
double derivative(const ActivationSpec& spec, double x);
/// d f / d alpha for parametric families; 0 elsewhere.
double alpha_derivative(const ActivationSpec& spec, double x);

// ---------------------------------------------------------------------------
// Buffer kernels. Every element is computed by the same inline scalar code as
// the scalar entry points, so results are bit-identical.

NumericBuffer eval_forward(const ActivationSpec& spec, std::span<const double> xs);
NumericBuffer eval_dx(const ActivationSpec& spec, std::span<const double> xs);
NumericBuffer eval_dalpha(const ActivationSpec& spec, std::span<const double> xs);

/// Allocation-free variants; `out` must have the same length as `xs`.
/// Input finiteness is not re-checked.
void apply_forward(const ActivationSpec& spec, std::span<const double> xs, std::span<double> out);
void apply_dx(const ActivationSpec& spec, std::span<const double> xs, std::span<double> out);

/// Throws NonFiniteInput naming the first offending index.
void require_finite(std::span<const double> xs);

}  // namespace berlu
