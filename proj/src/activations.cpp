#include <berlu/activations.hpp>

#include <algorithm>
#include <cmath>
#include <sstream>

namespace berlu {

NonFiniteInput::NonFiniteInput(std::size_t index, double value)
    : std::domain_error([&] {
          std::ostringstream os;
          os << "non-finite input at index " << index << " (" << value << ")";
          return os.str();
      }()),
      index_(index) {}

void BerLUParams::validate() const {
    if (!std::isfinite(alpha))
        throw std::invalid_argument("berlu: alpha must be finite");
    if (!std::isfinite(epsilon) || !(epsilon > 0.0))
        throw std::invalid_argument("berlu: epsilon must be finite and > 0");
}

namespace {

void check_scalar(double x) {
    if (!std::isfinite(x))
        throw NonFiniteInput(0, x);
}

constexpr double kInvSqrt2 = 0.70710678118654752440;
constexpr double kInvSqrt2Pi = 0.39894228040143267794;

inline double sigmoid(double x) noexcept {
    if (x >= 0.0)
        return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

inline double softplus(double x) noexcept { return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))); }

// Each functor provides the scalar forward and derivative for one family. The
// buffer kernels visit the variant once and then run a tight loop over these.
struct Fwd {
    double operator()(const act::BerLU& a, double x) const noexcept {
        return berlu_forward_unchecked(x, a.params.alpha, a.params.epsilon);
    }
    double operator()(const act::LeakyReLU& a, double x) const noexcept { return x >= 0.0 ? x : a.alpha * x; }
    double operator()(const act::ReLU&, double x) const noexcept { return x > 0.0 ? x : 0.0; }
    double operator()(const act::PReLU& a, double x) const noexcept { return x >= 0.0 ? x : a.alpha * x; }
    double operator()(const act::GELU&, double x) const noexcept { return 0.5 * x * std::erfc(-x * kInvSqrt2); }
    double operator()(const act::ELU& a, double x) const noexcept { return x > 0.0 ? x : a.scale * std::expm1(x); }
    double operator()(const act::CELU& a, double x) const noexcept {
        return x > 0.0 ? x : a.scale * std::expm1(x / a.scale);
    }
    double operator()(const act::SiLU&, double x) const noexcept { return x * sigmoid(x); }
    double operator()(const act::Mish&, double x) const noexcept { return x * std::tanh(softplus(x)); }
    double operator()(const act::Identity&, double x) const noexcept { return x; }
};

struct Dx {
    double operator()(const act::BerLU& a, double x) const noexcept {
        return berlu_dx_unchecked(x, a.params.alpha, a.params.epsilon);
    }
    double operator()(const act::LeakyReLU& a, double x) const noexcept { return x >= 0.0 ? 1.0 : a.alpha; }
    double operator()(const act::ReLU&, double x) const noexcept { return x >= 0.0 ? 1.0 : 0.0; }
    double operator()(const act::PReLU& a, double x) const noexcept { return x >= 0.0 ? 1.0 : a.alpha; }
    double operator()(const act::GELU&, double x) const noexcept {
        return 0.5 * std::erfc(-x * kInvSqrt2) + x * kInvSqrt2Pi * std::exp(-0.5 * x * x);
    }
    double operator()(const act::ELU& a, double x) const noexcept { return x >= 0.0 ? 1.0 : a.scale * std::exp(x); }
    double operator()(const act::CELU& a, double x) const noexcept {
        return x >= 0.0 ? 1.0 : std::exp(x / a.scale);
    }
    double operator()(const act::SiLU&, double x) const noexcept {
        const double s = sigmoid(x);
        return s * (1.0 + x * (1.0 - s));
    }
    double operator()(const act::Mish&, double x) const noexcept {
        const double t = std::tanh(softplus(x));
        return t + x * (1.0 - t * t) * sigmoid(x);
    }
    double operator()(const act::Identity&, double) const noexcept { return 1.0; }
};

struct DAlpha {
    double operator()(const act::BerLU& a, double x) const noexcept {
        return berlu_dalpha_unchecked(x, a.params.alpha, a.params.epsilon);
    }
    double operator()(const act::PReLU&, double x) const noexcept { return x >= 0.0 ? 0.0 : x; }
    template <class Other>
    double operator()(const Other&, double) const noexcept {
        return 0.0;
    }
};

template <class Kernel>
double scalar(const ActivationSpec& spec, double x) {
    check_scalar(x);
    return std::visit([x](const auto& a) { return Kernel{}(a, x); }, spec.kind());
}

template <class Kernel>
void apply(const ActivationSpec& spec, std::span<const double> xs, std::span<double> out) {
    if (out.size() != xs.size())
        throw std::invalid_argument("output buffer length differs from input length");
    std::visit(
        [&](const auto& a) {
            const Kernel k{};
            const std::size_t n = xs.size();
            for (std::size_t i = 0; i < n; ++i)
                out[i] = k(a, xs[i]);
        },
        spec.kind());
}

template <class Kernel>
NumericBuffer eval(const ActivationSpec& spec, std::span<const double> xs) {
    require_finite(xs);
    NumericBuffer out(xs.size());
    apply<Kernel>(spec, xs, out);
    return out;
}

}  // namespace

double berlu_forward(double x, const BerLUParams& p) {
    check_scalar(x);
    return berlu_forward_unchecked(x, p.alpha, p.epsilon);
}

double berlu_dx(double x, const BerLUParams& p) {
    check_scalar(x);
    return berlu_dx_unchecked(x, p.alpha, p.epsilon);
}

double berlu_dalpha(double x, const BerLUParams& p) {
    check_scalar(x);
    return berlu_dalpha_unchecked(x, p.alpha, p.epsilon);
}

// ---------------------------------------------------------------------------

ActivationSpec::ActivationSpec(ActivationKind kind) : kind_(std::move(kind)) {
    auto finite = [](double v, const char* what) {
        if (!std::isfinite(v))
            throw std::invalid_argument(std::string(what) + " must be finite");
    };
    std::visit(
        [&](const auto& a) {
            using T = std::decay_t<decltype(a)>;
            if constexpr (std::is_same_v<T, act::BerLU>) {
                a.params.validate();
            } else if constexpr (std::is_same_v<T, act::LeakyReLU> || std::is_same_v<T, act::PReLU>) {
                finite(a.alpha, "alpha");
            } else if constexpr (std::is_same_v<T, act::ELU> || std::is_same_v<T, act::CELU>) {
                finite(a.scale, "scale");
                if (!(a.scale > 0.0))
                    throw std::invalid_argument("scale must be > 0");
            }
        },
        kind_);
}

std::string ActivationSpec::name() const {
    static const char* const names[] = {"berlu", "leaky_relu", "relu", "prelu", "gelu",
                                        "elu",   "celu",       "silu", "mish",  "identity"};
    return names[kind_.index()];
}

bool ActivationSpec::is_parametric() const noexcept { return holds<act::BerLU>() || holds<act::PReLU>(); }

double ActivationSpec::alpha() const {
    if (auto* b = std::get_if<act::BerLU>(&kind_))
        return b->params.alpha;
    if (auto* l = std::get_if<act::LeakyReLU>(&kind_))
        return l->alpha;
    if (auto* p = std::get_if<act::PReLU>(&kind_))
        return p->alpha;
    if (holds<act::ReLU>())
        return 0.0;
    throw std::logic_error(name() + " has no negative slope");
}

ActivationSpec ActivationSpec::with_alpha(double alpha) const {
    if (auto* b = std::get_if<act::BerLU>(&kind_))
        return act::BerLU{{alpha, b->params.epsilon}};
    if (holds<act::PReLU>())
        return act::PReLU{alpha};
    throw std::logic_error(name() + " has no learnable slope");
}

std::vector<double> ActivationSpec::kinks() const {
    if (auto* b = std::get_if<act::BerLU>(&kind_))
        return {-b->params.epsilon, b->params.epsilon};
    if (holds<act::ReLU>() || holds<act::LeakyReLU>() || holds<act::PReLU>() || holds<act::ELU>() ||
        holds<act::CELU>())
        return {0.0};
    return {};
}

bool operator==(const ActivationSpec& a, const ActivationSpec& b) {
    if (a.kind_.index() != b.kind_.index())
        return false;
    return std::visit(
        [&](const auto& x) {
            using T = std::decay_t<decltype(x)>;
            const auto& y = std::get<T>(b.kind_);
            if constexpr (std::is_same_v<T, act::BerLU>)
                return x.params.alpha == y.params.alpha && x.params.epsilon == y.params.epsilon;
            else if constexpr (std::is_same_v<T, act::LeakyReLU> || std::is_same_v<T, act::PReLU>)
                return x.alpha == y.alpha;
            else if constexpr (std::is_same_v<T, act::ELU> || std::is_same_v<T, act::CELU>)
                return x.scale == y.scale;
            else
                return true;
        },
        a.kind_);
}

const std::vector<std::string>& activation_names() {
    static const std::vector<std::string> names = {"berlu", "leaky_relu", "relu", "prelu", "gelu",
                                                   "elu",   "celu",       "silu", "mish",  "identity"};
    return names;
}

ActivationSpec activation_from_name(std::string_view name, const ActivationOptions& o) {
    if (name == "berlu")
        return act::BerLU{{o.alpha, o.epsilon}};
    if (name == "leaky_relu" || name == "leakyrelu")
        return act::LeakyReLU{o.alpha};
    if (name == "relu")
        return act::ReLU{};
    if (name == "prelu")
        return act::PReLU{o.alpha};
    if (name == "gelu")
        return act::GELU{};
    if (name == "elu")
        return act::ELU{o.scale};
    if (name == "celu")
        return act::CELU{o.scale};
    if (name == "silu")
        return act::SiLU{};
    if (name == "mish")
        return act::Mish{};
    if (name == "identity")
        return act::Identity{};
    std::string msg = "unknown activation '" + std::string(name) + "'; valid names:";
    for (const auto& n : activation_names())
        msg += " " + n;
    throw std::invalid_argument(msg);
}

std::vector<ActivationSpec> all_activations() {
    std::vector<ActivationSpec> out;
    for (const auto& n : activation_names())
        out.push_back(activation_from_name(n));
    return out;
}

double forward(const ActivationSpec& spec, double x) { return scalar<Fwd>(spec, x); }
double derivative(const ActivationSpec& spec, double x) { return scalar<Dx>(spec, x); }
double alpha_derivative(const ActivationSpec& spec, double x) { return scalar<DAlpha>(spec, x); }

NumericBuffer eval_forward(const ActivationSpec& spec, std::span<const double> xs) { return eval<Fwd>(spec, xs); }
NumericBuffer eval_dx(const ActivationSpec& spec, std::span<const double> xs) { return eval<Dx>(spec, xs); }
NumericBuffer eval_dalpha(const ActivationSpec& spec, std::span<const double> xs) {
    return eval<DAlpha>(spec, xs);
}

void apply_forward(const ActivationSpec& spec, std::span<const double> xs, std::span<double> out) {
    apply<Fwd>(spec, xs, out);
}
void apply_dx(const ActivationSpec& spec, std::span<const double> xs, std::span<double> out) {
    apply<Dx>(spec, xs, out);
}

void require_finite(std::span<const double> xs) {
    for (std::size_t i = 0; i < xs.size(); ++i)
        if (!std::isfinite(xs[i]))
            throw NonFiniteInput(i, xs[i]);
}

}  // namespace berlu
