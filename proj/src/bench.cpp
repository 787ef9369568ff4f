#include <berlu/bench.hpp>
#include <berlu/rng.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>
#include <ostream>

namespace berlu {

double median_ns_per_elem(std::span<const double> rep_ns, std::size_t len) {
    if (rep_ns.empty() || len == 0)
        throw std::invalid_argument("median_ns_per_elem: no samples");
    std::vector<double> v(rep_ns.begin(), rep_ns.end());
    const std::size_t mid = v.size() / 2;
    std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid), v.end());
    double med = v[mid];
    if (v.size() % 2 == 0) {
        const double lower = *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid));
        med = 0.5 * (med + lower);
    }
    return med / static_cast<double>(len);
}

namespace {

struct Workspace {
    ActivationSpec spec;
    NumericBuffer input;
    NumericBuffer output;
    NumericBuffer grad;
    std::vector<double> fwd_ns;
    std::vector<double> bwd_ns;
};

NumericBuffer uniform_buffer(std::size_t len, std::uint64_t seed) {
    Rng rng(derive_seed(seed, 0xBE4C));
    NumericBuffer xs(len);
    // 53-bit mantissa draw; independent of std distribution implementations.
    for (auto& x : xs)
        x = -3.0 + 6.0 * static_cast<double>(rng() >> 11) * 0x1.0p-53;
    return xs;
}

template <class Fn>
double time_ns(Fn&& fn) {
    const auto t0 = std::chrono::steady_clock::now();
    fn();
    const auto t1 = std::chrono::steady_clock::now();
    return std::chrono::duration<double, std::nano>(t1 - t0).count();
}

void run_rep(Workspace& w, bool record) {
    const double f = time_ns([&] { apply_forward(w.spec, w.input, w.output); });
    const double b = time_ns([&] { apply_dx(w.spec, w.input, w.grad); });
    if (record) {
        w.fwd_ns.push_back(f);
        w.bwd_ns.push_back(b);
    }
}

BenchResult finish(Workspace& w) {
    const double checksum = std::accumulate(w.output.begin(), w.output.end(), 0.0) +
                            std::accumulate(w.grad.begin(), w.grad.end(), 0.0);
    if (!std::isfinite(checksum))
        throw std::runtime_error("bench: non-finite checksum for " + w.spec.name());
    const std::size_t len = w.input.size();
    return BenchResult{w.spec,
                       len,
                       median_ns_per_elem(w.fwd_ns, len),
                       median_ns_per_elem(w.bwd_ns, len),
                       static_cast<int>(w.fwd_ns.size()),
                       3 * len * sizeof(double),
                       checksum,
                       w.fwd_ns,
                       w.bwd_ns};
}

void check_args(std::size_t len, int reps) {
    if (len < kMinBenchLen)
        throw std::invalid_argument("bench: buffer_len must be >= 1000000");
    if (reps < kMinBenchReps)
        throw std::invalid_argument("bench: reps must be >= 10");
}

}  // namespace

BenchResult bench_activation(const ActivationSpec& spec, std::size_t buffer_len, int reps, std::uint64_t seed) {
    return bench_suite({spec}, buffer_len, reps, seed).front();
}

std::vector<BenchResult> bench_suite(const std::vector<ActivationSpec>& specs, std::size_t buffer_len, int reps,
                                     std::uint64_t seed) {
    check_args(buffer_len, reps);
    const NumericBuffer input = uniform_buffer(buffer_len, seed);
    std::vector<Workspace> ws;
    ws.reserve(specs.size());
    for (const auto& s : specs)
        ws.push_back({s, input, NumericBuffer(buffer_len), NumericBuffer(buffer_len), {}, {}});

    for (int r = 0; r < kBenchWarmup + reps; ++r)
        for (auto& w : ws)
            run_rep(w, r >= kBenchWarmup);

    std::vector<BenchResult> out;
    out.reserve(ws.size());
    for (auto& w : ws)
        out.push_back(finish(w));
    return out;
}

void write_bench_csv(std::ostream& os, const std::vector<BenchResult>& results) {
    os << "activation,buffer_len,forward_ns_per_elem,backward_ns_per_elem,bytes_touched,checksum\n";
    const auto old = os.precision(std::numeric_limits<double>::max_digits10);
    for (const auto& r : results)
        os << r.spec.name() << ',' << r.buffer_len << ',' << r.forward_ns_per_elem << ',' << r.backward_ns_per_elem
           << ',' << r.bytes_touched << ',' << r.checksum << '\n';
    os.precision(old);
}

}  // namespace berlu
