// Acceptance suite: one line per criterion, nonzero exit if any fails.

#include <berlu/activations.hpp>
#include <berlu/analysis.hpp>
#include <berlu/bench.hpp>
#include <berlu/bernstein.hpp>
#include <berlu/cli.hpp>
#include <berlu/data.hpp>
#include <berlu/rng.hpp>
#include <berlu/trainer.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

using namespace berlu;

namespace {

using Clock = std::chrono::steady_clock;

struct Outcome {
    bool pass;
    std::string detail;
};

int failures = 0;

void criterion(int id, const char* title, double budget_s, const std::function<Outcome()>& body) {
    const auto t0 = Clock::now();
    Outcome o{false, ""};
    try {
        o = body();
    } catch (const std::exception& e) {
        o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(Clock::now() - t0).count();
    const bool in_time = budget_s <= 0 || secs < budget_s;
    const bool pass = o.pass && in_time;
    if (!pass)
        ++failures;
    std::printf("%s %2d  %s: %s [%.2f s%s]\n", pass ? "PASS" : "FAIL", id, title, o.detail.c_str(), secs,
                in_time ? "" : ", over budget");
    std::fflush(stdout);
}

std::string fmt(const char* f, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

const double kAlphas[] = {0.0, 0.01, 0.25, 1.0};
const double kEpsilons[] = {1e-4, 1e-2, 1.0};

// Second-order one-sided differences; exact on quadratics, so they measure
// each piece's own slope at the seam.
double right_slope(const BerLUParams& p, double x, double h) {
    return (-3 * berlu_forward(x, p) + 4 * berlu_forward(x + h, p) - berlu_forward(x + 2 * h, p)) / (2 * h);
}
double left_slope(const BerLUParams& p, double x, double h) {
    return (3 * berlu_forward(x, p) - 4 * berlu_forward(x - h, p) + berlu_forward(x - 2 * h, p)) / (2 * h);
}

}  // namespace

int main() {
    criterion(1, "closed form equals Bernstein sum", 1.0, [] {
        double worst = 0;
        for (double a : kAlphas)
            for (double e : kEpsilons) {
                const double beta[] = {-a * e, 0.0, e};
                const BerLUParams p{a, e};
                const int n = 100000;
                for (int i = 0; i < n; ++i) {
                    const double x = -e + 2 * e * i / (n - 1);
                    const double t = std::clamp((x + e) / (2 * e), 0.0, 1.0);
                    worst = std::max(worst, std::abs(bernstein_sum(beta, t) - berlu_forward(x, p)));
                }
            }
        return Outcome{worst <= 1e-12, fmt("max |sum - closed| = %.3g (tol 1e-12)", worst)};
    });

    criterion(2, "C1 at the seams", 0, [] {
        double worst_rel = 0, worst_val = 0;
        for (double a : kAlphas)
            for (double e : kEpsilons) {
                const BerLUParams p{a, e};
                const double h = e / 2;  // stays inside one piece on each side
                for (double x : {-e, e}) {
                    const double l = left_slope(p, x, h), r = right_slope(p, x, h);
                    worst_rel = std::max(worst_rel, std::abs(l - r) / std::max({std::abs(l), std::abs(r), 1e-8}));
                }
                worst_val = std::max(worst_val, std::abs(berlu_forward(-e, p) - a * -e));
                worst_val = std::max(worst_val, std::abs(berlu_forward(e, p) - e));
            }
        return Outcome{worst_rel < 1e-8 && worst_val <= 1e-12,
                       fmt("max one-sided slope mismatch %.3g rel (tol 1e-8), max seam value error %.3g (tol 1e-12)",
                           worst_rel, worst_val)};
    });

    criterion(3, "Lipschitz constant of BerLU is max(1,|alpha|)", 5.0, [] {
        double worst = 0, at_001 = 0;
        for (double a : {-1.5, -0.5, 0.0, 0.01, 0.5, 1.5}) {
            const auto r = estimate_lipschitz(act::BerLU{{a, 0.01}});
            worst = std::max(worst, std::abs(r.estimate - std::max(1.0, std::abs(a))));
            if (a == 0.01)
                at_001 = r.estimate;
        }
        return Outcome{worst <= 1e-6 && std::abs(at_001 - 1.0) <= 1e-6,
                       fmt("max |L - max(1,|a|)| = %.3g over 6 slopes, L(0.01) = %.9f (tol 1e-6)", worst, at_001)};
    });

    criterion(4, "competitor Lipschitz constants", 5.0, [] {
        const double gelu = estimate_lipschitz(act::GELU{}).estimate;
        const double silu = estimate_lipschitz(act::SiLU{}).estimate;
        const double mish = estimate_lipschitz(act::Mish{}).estimate;
        const bool g = std::abs(gelu - 1.084) <= 0.005;
        const bool s = std::abs(silu - 1.100) <= 0.005;
        const bool m = std::abs(mish - 1.089) <= 0.005;
        return Outcome{g && s && m, fmt("GELU %.6f (want 1.084+-0.005: %s), SiLU %.6f (1.100: %s), Mish %.6f (1.089: %s)",
                                        gelu, g ? "ok" : "MISS", silu, s ? "ok" : "MISS", mish, m ? "ok" : "MISS")};
    });

    criterion(5, "gradient fidelity", 10.0, [] {
        const double h = 1e-5;
        double worst_act = 0;
        std::string worst_name;
        for (const auto& s : all_activations()) {
            const auto r = grad_check(s, grid_excluding_kinks(s, -5, 5, 10001, 10 * h), h);
            if (r.max_rel_error > worst_act) {
                worst_act = r.max_rel_error;
                worst_name = s.name();
            }
        }

        // Network: [2,16,16,2] BerLU net, weights scaled so activations straddle all pieces.
        auto net = init_net({2, 16, 16, 2}, act::BerLU{{0.01, 0.1}}, 11);
        for (auto& l : net.layers) {
            l.weights *= 50.0;
            l.biases.setConstant(0.05);
        }
        const auto ds = gen_two_moons(64, 0.1, 2);
        const std::vector<int> y(ds.labels.begin(), ds.labels.end());
        const auto lg = forward_backward(net, ds.features, y);

        std::vector<std::pair<double*, double>> params;
        for (std::size_t l = 0; l < net.layers.size(); ++l) {
            auto& L = net.layers[l];
            for (Eigen::Index i = 0; i < L.weights.size(); ++i)
                params.emplace_back(L.weights.data() + i, lg.grads.weights[l].data()[i]);
            for (Eigen::Index i = 0; i < L.biases.size(); ++i)
                params.emplace_back(L.biases.data() + i, lg.grads.biases[l](i));
        }
        // Both slopes are always probed; the other 18 are drawn at random.
        Rng rng(derive_seed(5, 0));
        std::vector<std::size_t> order(params.size());
        for (std::size_t i = 0; i < order.size(); ++i)
            order[i] = i;
        shuffle_in_place(order, rng);
        order.resize(18);
        double worst_net = 0;
        auto fd = [&](double& p) {
            const double keep = p;
            p = keep + h;
            const double up = forward_backward(net, ds.features, y).loss;
            p = keep - h;
            const double dn = forward_backward(net, ds.features, y).loss;
            p = keep;
            return (up - dn) / (2 * h);
        };
        for (auto i : order) {
            const double g = fd(*params[i].first);
            worst_net = std::max(worst_net, std::abs(g - params[i].second) / std::max(std::abs(params[i].second), 1e-8));
        }
        for (std::size_t k = 0; k < net.alphas.size(); ++k) {
            const double g = fd(net.alphas[k]);
            worst_net = std::max(worst_net, std::abs(g - lg.grads.alphas[k]) / std::max(std::abs(lg.grads.alphas[k]), 1e-8));
        }
        return Outcome{worst_act < 1e-6 && worst_net < 1e-4,
                       fmt("activations max rel %.3g (%s; tol 1e-6), network 20 params max rel %.3g (tol 1e-4)", worst_act,
                           worst_name.c_str(), worst_net)};
    });

    criterion(6, "dominance gap over leaky relu", 0, [] {
        bool ok = true;
        double worst = 0, worst_pos = 0;
        for (double a : {0.0, 0.01, 0.25})
            for (double e : kEpsilons) {
                const BerLUParams p{a, e};
                const int n = 200001;
                const double lo = -2 * e, step = 4 * e / (n - 1);
                double sup = -1, arg = 0;
                for (int i = 0; i < n; ++i) {
                    const double x = lo + step * i;
                    const double gap = berlu_forward(x, p) - (x >= 0 ? x : a * x);
                    if (gap > sup) {
                        sup = gap;
                        arg = x;
                    }
                }
                const double err = std::abs(sup - (1 - a) * e / 4);
                worst = std::max(worst, err);
                worst_pos = std::max(worst_pos, std::abs(arg) / step);
                ok = ok && err <= 1e-10 && std::abs(arg) <= step;
            }
        return Outcome{ok, fmt("max |sup gap - (1-a)e/4| = %.3g (tol 1e-10), argmax within %.2f grid steps of 0", worst,
                               worst_pos)};
    });

    criterion(7, "correlation decay ordering", 300.0, [] {
        ProbeSettings s;  // depth 64, width 1024, 32 trials, c0 0.5
        const auto relu = correlation_probe(act::ReLU{}, s);
        const auto ber = correlation_probe(act::BerLU{{0.01, 0.01}}, s);
        const double pr = fit_decay(relu, 8, s.depth).exponent;
        const double pb = fit_decay(ber, 8, s.depth).exponent;
        const bool a = pr >= 1.5 && pr <= 2.5, b = pb >= 0.5 && pb <= 1.5, gap = pr - pb >= 0.5;
        return Outcome{a && b && gap, fmt("p(ReLU) = %.3f in [1.5,2.5]: %s; p(BerLU) = %.3f in [0.5,1.5]: %s; "
                                          "difference %.3f >= 0.5: %s",
                                          pr, a ? "ok" : "MISS", pb, b ? "ok" : "MISS", pr - pb, gap ? "ok" : "MISS")};
    });

    criterion(8, "smoothing-radius sweep shape", 600.0, [] {
        const auto pts = run_sweep(SweepSettings{}, TrainConfig{});
        std::map<double, double> acc;
        for (const auto& p : pts)
            acc[p.epsilon] = p.mean_acc;
        const double drop = acc.at(1e-2) - acc.at(10.0);
        double lo = 1, hi = 0;
        for (double e : {1e-4, 1e-3, 1e-2, 1e-1}) {
            lo = std::min(lo, acc.at(e));
            hi = std::max(hi, acc.at(e));
        }
        std::string table;
        for (const auto& p : pts)
            table += fmt(" %g:%.3f", p.epsilon, p.mean_acc);
        return Outcome{drop >= 0.10 && hi - lo < 0.05,
                       fmt("acc(1e-2) - acc(10) = %.3f (>= 0.10), spread over [1e-4,1e-1] = %.3f (< 0.05);%s", drop,
                           hi - lo, table.c_str())};
    });

    criterion(9, "BerLU forward no slower than GELU", 120.0, [] {
        const auto rs = bench_suite({act::BerLU{{0.01, 0.01}}, act::GELU{}}, 10'000'000, 20, 0);
        const double b = rs[0].forward_ns_per_elem, g = rs[1].forward_ns_per_elem;
        return Outcome{b <= g, fmt("BerLU %.3f ns/elem vs GELU %.3f ns/elem (median of 20 reps, len 1e7)", b, g)};
    });

    criterion(10, "train reports are byte-identical across runs", 0, [] {
        const auto cfg = std::filesystem::temp_directory_path() / "berlu_acceptance_cfg.json";
        {
            std::ofstream os(cfg);
            os << R"({"epochs": 50, "seed": 3})";
        }
        const std::vector<std::string> args = {"--json", "--seed", "3", "train", "--config", cfg.string(),
                                               "--dataset", "spirals", "--n", "400"};
        std::ostringstream a, b, err;
        const int ca = cli::run(args, a, err);
        const int cb = cli::run(args, b, err);
        std::filesystem::remove(cfg);
        const bool same = ca == 0 && cb == 0 && a.str() == b.str() && !a.str().empty();
        return Outcome{same, fmt("two runs, %zu bytes each, identical: %s%s", a.str().size(), same ? "yes" : "no",
                                 err.str().empty() ? "" : (" (" + err.str() + ")").c_str())};
    });

    criterion(11, "table accuracies are out of scope", 0, [] {
        return Outcome{true, "declared non-reproducible at desk scale; no gate depends on them"};
    });

    std::printf("%d criterion(s) failed\n", failures);
    return failures == 0 ? 0 : 1;
}
