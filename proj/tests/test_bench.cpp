#include <berlu/bench.hpp>

#include <doctest.h>

#include <cmath>
#include <sstream>
#include <vector>

using namespace berlu;

TEST_CASE("median ignores outliers") {
    const std::vector<double> reps = {100, 101, 99, 100, 1e9, 100, 98, 102, 100, 1e8};
    CHECK(median_ns_per_elem(reps, 10) == doctest::Approx(10.0).epsilon(0.02));
    const std::vector<double> even = {1, 2, 3, 4};
    CHECK(median_ns_per_elem(even, 1) == 2.5);
    CHECK_THROWS(median_ns_per_elem(std::vector<double>{}, 1));
}

TEST_CASE("bench rejects undersized runs") {
    CHECK_THROWS_AS(bench_activation(act::ReLU{}, kMinBenchLen - 1, 10, 0), std::invalid_argument);
    CHECK_THROWS_AS(bench_activation(act::ReLU{}, kMinBenchLen, 9, 0), std::invalid_argument);
}

TEST_CASE("bench result fields") {
    const auto r = bench_activation(act::BerLU{{0.01, 0.01}}, kMinBenchLen, kMinBenchReps, 1);
    CHECK(r.buffer_len == kMinBenchLen);
    CHECK(r.reps == kMinBenchReps);
    CHECK(r.bytes_touched == 3 * kMinBenchLen * sizeof(double));
    CHECK(r.forward_rep_ns.size() == static_cast<std::size_t>(kMinBenchReps));
    CHECK(r.backward_rep_ns.size() == static_cast<std::size_t>(kMinBenchReps));
    CHECK(r.forward_ns_per_elem > 0.0);
    CHECK(r.backward_ns_per_elem > 0.0);
    CHECK(r.forward_ns_per_elem == median_ns_per_elem(r.forward_rep_ns, r.buffer_len));
    CHECK(std::isfinite(r.checksum));
}

TEST_CASE("checksum is a deterministic function of the input") {
    const auto a = bench_activation(act::Identity{}, kMinBenchLen, kMinBenchReps, 7);
    const auto b = bench_activation(act::Identity{}, kMinBenchLen, kMinBenchReps, 7);
    CHECK(a.checksum == b.checksum);
    // Identity: sum(x) + sum(1) with x uniform on [-3, 3].
    const double n = static_cast<double>(kMinBenchLen);
    CHECK(std::abs(a.checksum - n) < 6.0 * std::sqrt(3.0 * n));
}

TEST_CASE("suite covers every spec and writes csv") {
    const std::vector<ActivationSpec> specs = {act::ReLU{}, act::GELU{}};
    const auto rs = bench_suite(specs, kMinBenchLen, kMinBenchReps, 0);
    REQUIRE(rs.size() == 2);
    CHECK(rs[0].spec.name() == "relu");
    CHECK(rs[1].spec.name() == "gelu");
    std::ostringstream os;
    write_bench_csv(os, rs);
    std::istringstream is(os.str());
    std::string line;
    std::getline(is, line);
    CHECK(line == "activation,buffer_len,forward_ns_per_elem,backward_ns_per_elem,bytes_touched,checksum");
    int rows = 0;
    while (std::getline(is, line))
        rows += line.empty() ? 0 : 1;
    CHECK(rows == 2);
}
