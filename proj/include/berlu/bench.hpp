#pragma once

#include <berlu/activations.hpp>

#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

namespace berlu {

struct BenchResult {
    ActivationSpec spec;
    std::size_t buffer_len = 0;
    double forward_ns_per_elem = 0.0;
    double backward_ns_per_elem = 0.0;
    int reps = 0;
    /// Input, output and derivative buffers: 3 * buffer_len * sizeof(double).
    std::size_t bytes_touched = 0;
    /// Sum of forward outputs plus sum of derivatives; keeps the kernels alive.
    double checksum = 0.0;
    /// Raw per-rep wall times in nanoseconds.
    std::vector<double> forward_rep_ns;
    std::vector<double> backward_rep_ns;
};

constexpr std::size_t kMinBenchLen = 1'000'000;
constexpr int kMinBenchReps = 10;
constexpr int kBenchWarmup = 3;

/// Median of per-rep times divided by the element count.
double median_ns_per_elem(std::span<const double> rep_ns, std::size_t len);

/// Times `reps` forward and `reps` derivative passes over a buffer of values
/// uniform in [-3, 3] after three warmup reps. Throws std::invalid_argument
/// for buffer_len < 1e6 or reps < 10 and std::runtime_error on a non-finite checksum.
BenchResult bench_activation(const ActivationSpec& spec, std::size_t buffer_len, int reps, std::uint64_t seed);

/// Benchmarks every spec with reps interleaved round-robin across specs.
std::vector<BenchResult> bench_suite(const std::vector<ActivationSpec>& specs, std::size_t buffer_len, int reps,
                                     std::uint64_t seed);

/// Header `activation,buffer_len,forward_ns_per_elem,backward_ns_per_elem,bytes_touched,checksum`.
void write_bench_csv(std::ostream& os, const std::vector<BenchResult>& results);

}  // namespace berlu
