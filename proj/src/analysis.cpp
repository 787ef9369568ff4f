#include <berlu/analysis.hpp>
#include <berlu/rng.hpp>

#include <Eigen/Eigenvalues>
#include <boost/random/mersenne_twister.hpp>
#include <boost/random/normal_distribution.hpp>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <string>
#include <thread>

namespace berlu {

// ---------------------------------------------------------------------------
// Lipschitz

std::optional<double> exact_lipschitz(const ActivationSpec& spec) {
    return std::visit(
        [](const auto& a) -> std::optional<double> {
            using T = std::decay_t<decltype(a)>;
            if constexpr (std::is_same_v<T, act::BerLU>)
                return std::max(1.0, std::abs(a.params.alpha));
            else if constexpr (std::is_same_v<T, act::LeakyReLU> || std::is_same_v<T, act::PReLU>)
                return std::max(1.0, std::abs(a.alpha));
            else if constexpr (std::is_same_v<T, act::ReLU> || std::is_same_v<T, act::Identity> ||
                               std::is_same_v<T, act::CELU>)
                return 1.0;
            else if constexpr (std::is_same_v<T, act::ELU>)
                return std::max(1.0, a.scale);
            else if constexpr (std::is_same_v<T, act::GELU>) {
                // f'' = phi(x) (2 - x^2) vanishes at sqrt(2).
                const double r = std::sqrt(2.0);
                return 0.5 * std::erfc(-1.0) + r * std::exp(-1.0) / std::sqrt(2.0 * M_PI);
            } else
                return std::nullopt;
        },
        spec.kind());
}

LipschitzReport estimate_lipschitz(const ActivationSpec& spec, const LipschitzGrid& grid) {
    if (!std::isfinite(grid.lo) || !std::isfinite(grid.hi) || !(grid.lo < grid.hi))
        throw std::invalid_argument("lipschitz: range must be finite with lo < hi");
    if (grid.coarse_points < 1000)
        throw std::invalid_argument("lipschitz: coarse_points must be >= 1000");
    if (grid.refine_iters < 0)
        throw std::invalid_argument("lipschitz: refine_iters must be >= 0");

    const int n = grid.coarse_points;
    const double step = (grid.hi - grid.lo) / (n - 1);
    auto mag = [&](double x) { return std::abs(derivative(spec, x)); };

    int best_i = 0;
    double best = -1.0;
    for (int i = 0; i < n; ++i) {
        const double x = i == n - 1 ? grid.hi : grid.lo + i * step;
        const double v = mag(x);
        if (v > best) {
            best = v;
            best_i = i;
        }
    }
    double best_x = best_i == n - 1 ? grid.hi : grid.lo + best_i * step;

    // Golden-section maximisation on the bracket around the grid winner.
    double a = std::max(grid.lo, best_x - step);
    double b = std::min(grid.hi, best_x + step);
    const double invphi = (std::sqrt(5.0) - 1.0) / 2.0;
    double c = b - invphi * (b - a);
    double d = a + invphi * (b - a);
    double fc = mag(c);
    double fd = mag(d);
    for (int it = 0; it < grid.refine_iters; ++it) {
        if (fc >= fd) {
            b = d;
            d = c;
            fd = fc;
            c = b - invphi * (b - a);
            fc = mag(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + invphi * (b - a);
            fd = mag(d);
        }
    }
    for (double x : {c, d}) {
        const double v = mag(x);
        if (v > best) {
            best = v;
            best_x = x;
        }
    }

    LipschitzReport r{spec, best, exact_lipschitz(spec), best_x, grid, false};
    if (spec.holds<act::BerLU>() || spec.holds<act::LeakyReLU>() || spec.holds<act::PReLU>())
        r.expansive_slope = std::abs(spec.alpha()) > 1.0;
    return r;
}

// ---------------------------------------------------------------------------
// Gradient checking

GradCheckReport grad_check(const ActivationSpec& spec, std::span<const double> xs, double step) {
    if (!(step > 0.0 && step <= 1e-2))
        throw std::invalid_argument("grad_check: step must lie in (0, 1e-2]");
    require_finite(xs);
    const NumericBuffer analytic = eval_dx(spec, xs);
    GradCheckReport r{spec, 0.0, 0.0, step, xs.size()};
    for (std::size_t i = 0; i < xs.size(); ++i) {
        const double x = xs[i];
        const double fd = (forward(spec, x + step) - forward(spec, x - step)) / (2.0 * step);
        const double err = std::abs(fd - analytic[i]) / std::max(std::abs(analytic[i]), 1e-8);
        if (err > r.max_rel_error) {
            r.max_rel_error = err;
            r.worst_x = x;
        }
    }
    return r;
}

std::vector<double> grid_excluding_kinks(const ActivationSpec& spec, double lo, double hi, std::size_t count,
                                         double margin) {
    if (count < 2)
        throw std::invalid_argument("grid needs at least two points");
    const auto kinks = spec.kinks();
    std::vector<double> xs;
    xs.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
        const double x = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(count - 1);
        const bool near = std::any_of(kinks.begin(), kinks.end(), [&](double k) { return std::abs(x - k) < margin; });
        if (!near)
            xs.push_back(x);
    }
    return xs;
}

// ---------------------------------------------------------------------------
// Critical initialisation

namespace {

struct HermiteRule {
    std::vector<double> nodes;
    std::vector<double> weights;
};

// Golub-Welsch for the weight exp(-x^2).
const HermiteRule& hermite64() {
    static const HermiteRule rule = [] {
        constexpr int n = 64;
        Eigen::MatrixXd jacobi = Eigen::MatrixXd::Zero(n, n);
        for (int k = 1; k < n; ++k) {
            jacobi(k, k - 1) = std::sqrt(k / 2.0);
            jacobi(k - 1, k) = jacobi(k, k - 1);
        }
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(jacobi);
        HermiteRule r;
        for (int i = 0; i < n; ++i) {
            r.nodes.push_back(es.eigenvalues()(i));
            const double v0 = es.eigenvectors()(0, i);
            r.weights.push_back(std::sqrt(M_PI) * v0 * v0);
        }
        return r;
    }();
    return rule;
}

}  // namespace

double gaussian_expectation(double q, const std::function<double(double)>& g) {
    const auto& rule = hermite64();
    const double scale = std::sqrt(2.0 * q);
    double sum = 0.0;
    for (std::size_t i = 0; i < rule.nodes.size(); ++i)
        sum += rule.weights[i] * g(scale * rule.nodes[i]);
    return sum / std::sqrt(M_PI);
}

CriticalInit find_critical_init(const ActivationSpec& spec, double target_q) {
    if (!(target_q > 0.0) || !std::isfinite(target_q))
        throw std::invalid_argument("critical init: target_q must be > 0");
    const double chi = gaussian_expectation(target_q, [&](double z) {
        const double d = derivative(spec, z);
        return d * d;
    });
    auto residual = [&](double wv) { return wv * chi - 1.0; };
    double lo = 1e-3;
    double hi = 1e2;
    if (residual(lo) > 0.0 || residual(hi) < 0.0)
        throw std::domain_error("critical init: no root for weight variance in [1e-3, 1e2]");
    for (int it = 0; it < 200 && hi - lo > 1e-14 * hi; ++it) {
        const double mid = 0.5 * (lo + hi);
        (residual(mid) < 0.0 ? lo : hi) = mid;
    }
    return {0.5 * (lo + hi), 0.0};
}

// ---------------------------------------------------------------------------
// Correlation probe

ProbeOverflow::ProbeOverflow(int layer, int trial)
    : std::runtime_error("correlation probe: non-finite signal at layer " + std::to_string(layer) + " (trial " +
                         std::to_string(trial) + ")"),
      layer_(layer) {}

namespace {

double cosine(const std::vector<double>& a, const std::vector<double>& b) {
    double ab = 0.0, aa = 0.0, bb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        ab += a[i] * b[i];
        aa += a[i] * a[i];
        bb += b[i] * b[i];
    }
    return ab / std::sqrt(aa * bb);
}

std::vector<double> run_trial(const ActivationSpec& spec, const ProbeSettings& s, double weight_var, int trial) {
    const std::size_t n = static_cast<std::size_t>(s.width);
    // Ziggurat sampler; the weight draws dominate the probe's run time.
    boost::random::mt19937_64 rng(derive_seed(s.seed, static_cast<std::uint64_t>(trial)));
    boost::random::normal_distribution<double> normal(0.0, 1.0);

    // Two inputs with exact cosine c0 and squared norm q * width.
    std::vector<double> u(n), v(n);
    for (auto& x : u)
        x = normal(rng);
    for (auto& x : v)
        x = normal(rng);
    auto norm = [](const std::vector<double>& x) {
        double s2 = 0.0;
        for (double e : x)
            s2 += e * e;
        return std::sqrt(s2);
    };
    const double nu = norm(u);
    for (auto& x : u)
        x /= nu;
    double uv = 0.0;
    for (std::size_t i = 0; i < n; ++i)
        uv += u[i] * v[i];
    for (std::size_t i = 0; i < n; ++i)
        v[i] -= uv * u[i];
    const double nv = norm(v);
    for (auto& x : v)
        x /= nv;
    const double radius = std::sqrt(s.target_q * s.width);
    const double orth = std::sqrt(1.0 - s.c0 * s.c0);
    std::vector<double> ha(n), hb(n);
    for (std::size_t i = 0; i < n; ++i) {
        ha[i] = radius * u[i];
        hb[i] = radius * (s.c0 * u[i] + orth * v[i]);
    }

    const double wstd = std::sqrt(weight_var / s.width);
    std::vector<double> za(n), zb(n), row(n), trace(static_cast<std::size_t>(s.depth));
    for (int layer = 0; layer < s.depth; ++layer) {
        for (std::size_t i = 0; i < n; ++i) {
            for (auto& w : row)
                w = wstd * normal(rng);
            double sa = 0.0, sb = 0.0;
            for (std::size_t j = 0; j < n; ++j) {
                sa += row[j] * ha[j];
                sb += row[j] * hb[j];
            }
            za[i] = sa;
            zb[i] = sb;
        }
        const double c = cosine(za, zb);
        if (!std::isfinite(c))
            throw ProbeOverflow(layer + 1, trial);
        trace[static_cast<std::size_t>(layer)] = c;
        apply_forward(spec, za, ha);
        apply_forward(spec, zb, hb);
    }
    return trace;
}

}  // namespace

CorrelationTrace correlation_probe(const ActivationSpec& spec, const ProbeSettings& s) {
    if (s.depth < 16 || s.width < 256 || s.trials < 8)
        throw std::invalid_argument("correlation probe: require depth >= 16, width >= 256, trials >= 8");
    if (!(s.c0 > 0.0 && s.c0 < 1.0))
        throw std::invalid_argument("correlation probe: c0 must lie in (0,1)");

    const CriticalInit init = find_critical_init(spec, s.target_q);
    std::vector<std::vector<double>> per_trial(static_cast<std::size_t>(s.trials));

    unsigned workers = s.threads ? s.threads : std::max(1u, std::thread::hardware_concurrency());
    workers = std::min<unsigned>(workers, static_cast<unsigned>(s.trials));
    std::atomic<int> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    auto work = [&] {
        for (int t = next++; t < s.trials; t = next++) {
            try {
                per_trial[static_cast<std::size_t>(t)] = run_trial(spec, s, init.weight_var, t);
            } catch (...) {
                std::lock_guard lock(failure_mutex);
                if (!failure)
                    failure = std::current_exception();
            }
        }
    };
    if (workers == 1) {
        work();
    } else {
        std::vector<std::jthread> pool;
        for (unsigned w = 0; w < workers; ++w)
            pool.emplace_back(work);
    }
    if (failure)
        std::rethrow_exception(failure);

    CorrelationTrace trace{spec, s.depth, s.width, s.trials, s.c0, s.seed, init, s.target_q, {}};
    trace.one_minus_c.resize(static_cast<std::size_t>(s.depth));
    for (int l = 0; l < s.depth; ++l) {
        double sum = 0.0;
        for (const auto& tr : per_trial)
            sum += tr[static_cast<std::size_t>(l)];
        trace.one_minus_c[static_cast<std::size_t>(l)] = 1.0 - sum / s.trials;
    }
    return trace;
}

DecayFit fit_decay(std::span<const double> omc, int first, int last) {
    if (first < 1 || last > static_cast<int>(omc.size()) || first > last)
        throw std::invalid_argument("fit_decay: layer range outside trace");
    if (last - first + 1 < 8)
        throw std::invalid_argument("fit_decay: need at least 8 layers");
    double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
    const int m = last - first + 1;
    std::vector<double> xs, ys;
    for (int l = first; l <= last; ++l) {
        const double y = omc[static_cast<std::size_t>(l - 1)];
        if (!(y > 0.0))
            throw std::invalid_argument("fit_decay: 1 - c_l is not positive at layer " + std::to_string(l) +
                                        "; shorten the fit range");
        xs.push_back(std::log(static_cast<double>(l)));
        ys.push_back(std::log(y));
        sx += xs.back();
        sy += ys.back();
        sxx += xs.back() * xs.back();
        sxy += xs.back() * ys.back();
    }
    const double slope = (m * sxy - sx * sy) / (m * sxx - sx * sx);
    const double intercept = (sy - slope * sx) / m;
    const double ybar = sy / m;
    double ss_res = 0.0, ss_tot = 0.0;
    for (int i = 0; i < m; ++i) {
        const double fit = intercept + slope * xs[static_cast<std::size_t>(i)];
        ss_res += (ys[static_cast<std::size_t>(i)] - fit) * (ys[static_cast<std::size_t>(i)] - fit);
        ss_tot += (ys[static_cast<std::size_t>(i)] - ybar) * (ys[static_cast<std::size_t>(i)] - ybar);
    }
    return {-slope, std::exp(intercept), first, last, ss_tot > 0.0 ? 1.0 - ss_res / ss_tot : 1.0};
}

DecayFit fit_decay(const CorrelationTrace& trace, int first, int last) {
    return fit_decay(std::span<const double>(trace.one_minus_c), first, last);
}

}  // namespace berlu
