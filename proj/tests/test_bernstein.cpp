#include <berlu/activations.hpp>
#include <berlu/bernstein.hpp>

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

using namespace berlu;

namespace {

double choose(int n, int k) {
    double c = 1.0;
    for (int i = 1; i <= k; ++i)
        c = c * (n - k + i) / i;
    return c;
}

}  // namespace

TEST_CASE("basis example and errors") {
    CHECK(bernstein_basis(2, 4, 0.3) == doctest::Approx(6 * 0.09 * 0.49).epsilon(1e-14));
    CHECK(bernstein_basis(0, 3, 0.0) == 1.0);
    CHECK(bernstein_basis(3, 3, 1.0) == 1.0);
    CHECK_THROWS_AS(bernstein_basis(5, 4, 0.5), std::out_of_range);
    CHECK_THROWS_AS(bernstein_basis(-1, 4, 0.5), std::out_of_range);
    CHECK_THROWS_AS(bernstein_basis(1, 4, 1.5), std::out_of_range);
}

TEST_CASE("basis matches the binomial formula") {
    for (int n = 0; n <= 12; ++n)
        for (int k = 0; k <= n; ++k)
            for (double t : {0.0, 0.1, 0.37, 0.5, 0.9, 1.0}) {
                const double expect = choose(n, k) * std::pow(t, k) * std::pow(1 - t, n - k);
                CHECK(std::abs(bernstein_basis(k, n, t) - expect) <= 1e-14);
            }
}

TEST_CASE("property: partition of unity and non-negativity") {
    std::mt19937_64 rng(21);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int n = 1; n <= 20; ++n) {
        for (int i = 0; i < 50; ++i) {
            const double t = u(rng);
            double sum = 0.0;
            for (int k = 0; k <= n; ++k) {
                const double b = bernstein_basis(k, n, t);
                CHECK(b >= 0.0);
                sum += b;
            }
            CHECK(std::abs(sum - 1.0) <= 1e-12);
        }
    }
}

TEST_CASE("property: de casteljau agrees with the direct sum and stays in the hull") {
    std::mt19937_64 rng(22);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::uniform_real_distribution<double> c(-5.0, 5.0);
    for (int n = 1; n <= 10; ++n) {
        std::vector<double> beta(n + 1);
        for (auto& b : beta)
            b = c(rng);
        const auto [lo, hi] = std::minmax_element(beta.begin(), beta.end());
        for (int i = 0; i < 100; ++i) {
            const double t = u(rng);
            const double dc = de_casteljau(beta, t);
            CHECK(std::abs(dc - bernstein_sum(beta, t)) <= 1e-12);
            CHECK(dc >= *lo - 1e-12);
            CHECK(dc <= *hi + 1e-12);
        }
        CHECK(de_casteljau(beta, 0.0) == beta.front());
        CHECK(de_casteljau(beta, 1.0) == beta.back());
    }
}

TEST_CASE("solve_transition example") {
    // LeakyReLU(0.01), eps 0.01: left piece value at -eps is -1e-4, right is 0.01.
    const auto tr = solve_transition(0.01, 1.0, -1e-4, 0.01, 0.0, 0.01, 2);
    REQUIRE(tr.control_points.size() == 3);
    CHECK(tr.control_points[0] == doctest::Approx(-1e-4).epsilon(1e-14));
    CHECK(std::abs(tr.control_points[1]) <= 1e-15);
    CHECK(tr.control_points[2] == doctest::Approx(0.01).epsilon(1e-14));
}

TEST_CASE("solve_transition rejects bad input") {
    CHECK_THROWS_AS(solve_transition(std::nan(""), 1.0, 0.0, 1.0, 0.0, 1.0, 2), std::invalid_argument);
    CHECK_THROWS_AS(solve_transition(0.0, 1.0, 0.0, 1.0, 0.0, 1.0, 1), std::invalid_argument);
    CHECK_THROWS_AS(solve_transition(0.0, 1.0, 0.0, 1.0, 0.0, 0.0, 2), std::invalid_argument);
    // Pieces that miss at the center by 1e-3.
    CHECK_THROWS_AS(solve_transition(0.0, 1.0, 0.0, 1.001, 0.0, 1.0, 2), std::invalid_argument);
}

TEST_CASE("property: transitions are C1 at both seams for every degree") {
    std::mt19937_64 rng(23);
    std::uniform_real_distribution<double> s(-3.0, 3.0);
    std::uniform_real_distribution<double> e(0.01, 2.0);
    for (int degree = 2; degree <= 8; ++degree) {
        for (int i = 0; i < 100; ++i) {
            const double ls = s(rng), rs = s(rng), center = s(rng), eps = e(rng);
            const double at_center = s(rng);
            const double lv = at_center - ls * eps, rv = at_center + rs * eps;
            const auto tr = solve_transition(ls, rs, lv, rv, center, eps, degree);
            CHECK(std::abs(tr.eval(tr.lower()) - lv) <= 1e-12);
            CHECK(std::abs(tr.eval(tr.upper()) - rv) <= 1e-12);
            CHECK(std::abs(tr.derivative(tr.lower()) - ls) <= 1e-10);
            CHECK(std::abs(tr.derivative(tr.upper()) - rs) <= 1e-10);
        }
    }
}

TEST_CASE("transition eval throws outside its interval") {
    const auto tr = solve_transition(0.0, 1.0, 0.0, 1.0, 0.0, 1.0, 2);
    CHECK_THROWS_AS(tr.eval(1.5), std::out_of_range);
    CHECK_THROWS_AS(tr.eval(-1.0001), std::out_of_range);
}

TEST_CASE("piecewise linear values and validation") {
    const PiecewiseLinear abs_fn({0.0}, {-1.0, 1.0}, 0.0);
    CHECK(abs_fn.value(-2.0) == 2.0);
    CHECK(abs_fn.value(3.0) == 3.0);
    CHECK(abs_fn.slope(0.0) == 1.0);
    const PiecewiseLinear clip({-1.0, 1.0}, {0.0, 1.0, 0.0}, 0.0);
    CHECK(clip.value(-5.0) == -1.0);
    CHECK(clip.value(0.5) == 0.5);
    CHECK(clip.value(5.0) == 1.0);
    CHECK_THROWS_AS(PiecewiseLinear({0.0}, {1.0}, 0.0), std::invalid_argument);
    CHECK_THROWS_AS(PiecewiseLinear({1.0, 1.0}, {0.0, 1.0, 0.0}, 0.0), std::invalid_argument);
    CHECK_THROWS_AS(PiecewiseLinear({0.0}, {1.0, std::nan("")}, 0.0), std::invalid_argument);
}

TEST_CASE("piecewise linear json round-trip") {
    const PiecewiseLinear clip({-1.0, 1.0}, {0.0, 1.0, 0.0}, 0.25);
    const auto back = PiecewiseLinear::from_json(clip.to_json());
    CHECK(back.breakpoints() == clip.breakpoints());
    CHECK(back.slopes() == clip.slopes());
    CHECK(back.value_at_zero() == clip.value_at_zero());
    CHECK(PiecewiseLinear::from_json("{\"slopes\":[2]}").value(1.5) == 3.0);
    CHECK_THROWS(PiecewiseLinear::from_json("{\"breakpoints\":[0]}"));
    CHECK_THROWS(PiecewiseLinear::from_json("not json"));
}

TEST_CASE("mollify of leaky relu reproduces the closed form") {
    for (double alpha : {0.01, 0.2, -0.5}) {
        for (double eps : {1e-3, 1e-2, 0.5}) {
            const auto sm = mollify(PiecewiseLinear::leaky_relu(alpha), eps, 2);
            const BerLUParams p{alpha, eps};
            double worst = 0.0, worst_d = 0.0;
            const int n = 100000;
            for (int i = 0; i <= n; ++i) {
                const double x = -3.0 * eps + 6.0 * eps * i / n;
                worst = std::max(worst, std::abs(sm.eval(x) - berlu_forward(x, p)));
                worst_d = std::max(worst_d, std::abs(sm.derivative(x) - berlu_dx(x, p)));
            }
            CHECK(worst <= 1e-12);
            CHECK(worst_d <= 1e-10);
        }
    }
}

TEST_CASE("mollify identity has nothing to smooth") {
    const auto sm = mollify(PiecewiseLinear::identity(), 0.1, 2);
    CHECK(sm.transitions().empty());
    CHECK(sm.eval(0.3) == 0.3);
}

TEST_CASE("mollify multi-kink function and overlap rejection") {
    const PiecewiseLinear clip({-1.0, 1.0}, {0.0, 1.0, 0.0}, 0.0);
    const auto sm = mollify(clip, 0.2, 3);
    REQUIRE(sm.transitions().size() == 2);
    for (double x : {-0.8, -1.2, 0.8, 1.2}) {
        CHECK(std::abs(sm.eval(x) - clip.value(x)) <= 1e-12);
        CHECK(std::abs(sm.derivative(x) - clip.slope(x)) <= 1e-10);
    }
    // Smooth and monotone between the plateaus.
    double prev = sm.eval(-2.0);
    for (int i = 1; i <= 4000; ++i) {
        const double x = -2.0 + i * 1e-3;
        const double v = sm.eval(x);
        CHECK(v >= prev - 1e-15);
        prev = v;
    }
    CHECK_THROWS_AS(mollify(clip, 1.0, 2), std::invalid_argument);
    CHECK_THROWS_AS(mollify(clip, 1.2, 2), std::invalid_argument);
    CHECK_NOTHROW(mollify(clip, 0.99, 2));
}
