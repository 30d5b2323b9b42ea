// Benchmark: path-parallel Monte Carlo throughput, OpenMP runner vs the serial
// reference. Also asserts the two produce byte-identical states, which is the
// determinism contract the parallel kernels must keep.
//
// Usage: sphs_bench [paths] [steps]

#include <chrono>
#include <cstdio>
#include <cstring>
#include <vector>

#include "sphs/ensemble.hpp"
#include "sphs/moments.hpp"
#include "sphs/solver.hpp"
#include "sphs/string_example.hpp"

using namespace sphs;

namespace {
double now_seconds() {
    return std::chrono::duration<double>(
               std::chrono::steady_clock::now().time_since_epoch())
        .count();
}
}  // namespace

int main(int argc, char** argv) {
    const int paths = argc > 1 ? std::atoi(argv[1]) : 2000;
    const int steps = argc > 2 ? std::atoi(argv[2]) : 1000;

    StringModel sm = build_string_model({1.0, 4.0, 0.0, 1.0});
    const DiscreteGenerator disc = discretize_operator(sm.model, 256);
    const ModalBasis basis = eigensystem(sm.model, disc, 16);
    const ResolvedNoise noise = resolve_noise(sm.default_noise, sm.model, basis);
    const TimeGrid tg{1e-3, steps};
    const CVec x0 = CVec::Zero(basis.size());

    std::printf("ensemble benchmark: %d paths x %d steps, K=%d\n", paths, steps,
                basis.size());

    for (const char* scheme_name : {"exact-gaussian", "increment"}) {
        const Scheme scheme = std::strcmp(scheme_name, "exact-gaussian") == 0
                                  ? Scheme::ExactGaussian
                                  : Scheme::Increment;
        MildSimulator sim(sm.model, basis, noise, tg, scheme);
        std::vector<CVec> serial_ends(paths), parallel_ends(paths);

        auto body = [&](std::vector<CVec>& out) {
            return [&sim, &out, &x0, steps](int64_t p) {
                sim.run_with(1234, uint64_t(p), x0, [&](int s, double, const CVec& x) {
                    if (s == steps) out[size_t(p)] = x;
                });
            };
        };

        double t0 = now_seconds();
        serial_paths(paths, body(serial_ends));
        const double t_serial = now_seconds() - t0;

        t0 = now_seconds();
        parallel_paths(paths, 0, body(parallel_ends));
        const double t_parallel = now_seconds() - t0;

        bool identical = true;
        for (int p = 0; p < paths; ++p)
            if (std::memcmp(serial_ends[p].data(), parallel_ends[p].data(),
                            sizeof(cplx) * size_t(basis.size())) != 0)
                identical = false;

        std::printf("  %-15s serial %7.2fs | omp(%d) %7.2fs | speedup %5.2fx | %s\n",
                    scheme_name, t_serial, resolve_workers(0), t_parallel,
                    t_serial / std::max(t_parallel, 1e-9),
                    identical ? "bit-identical" : "MISMATCH");
        if (!identical) return 1;
    }
    return 0;
}
