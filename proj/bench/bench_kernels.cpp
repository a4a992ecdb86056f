// Times the OpenMP matmul kernels against the serial reference and verifies
// the outputs stay bit-identical. Run with OMP_NUM_THREADS to vary threads.
#include <algorithm>
#include <chrono>
#include <cstdio>
#include <functional>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "c2ae/kernels.hpp"
#include "c2ae/rng.hpp"

namespace {

using Clock = std::chrono::steady_clock;

double time_best_of(int reps, const std::function<void()>& fn) {
    double best = 1e300;
    for (int r = 0; r < reps; ++r) {
        const auto t0 = Clock::now();
        fn();
        best = std::min(best, std::chrono::duration<double>(Clock::now() - t0).count());
    }
    return best;
}

void bench_shape(std::size_t ni, std::size_t nk, std::size_t nj) {
    c2ae::Rng rng(42);
    std::vector<double> a(ni * nk), b(nk * nj), c_serial(ni * nj), c_omp(ni * nj);
    for (double& v : a) v = rng.uniform(-1.0, 1.0);
    for (double& v : b) v = rng.uniform(-1.0, 1.0);

    const double flops = 2.0 * static_cast<double>(ni) * nk * nj;
    const double ts = time_best_of(3, [&] {
        c2ae::kernels::serial::matmul(a.data(), b.data(), c_serial.data(), ni, nk, nj);
    });
    const double tp = time_best_of(3, [&] {
        c2ae::kernels::matmul(a.data(), b.data(), c_omp.data(), ni, nk, nj);
    });
    const bool identical = c_serial == c_omp;

    std::printf("matmul %4zux%4zux%4zu  serial %8.2f ms (%6.2f GFLOP/s)  omp %8.2f ms "
                "(%6.2f GFLOP/s)  speedup %.2fx  bit-identical %s\n",
                ni, nk, nj, ts * 1e3, flops / ts * 1e-9, tp * 1e3, flops / tp * 1e-9, ts / tp,
                identical ? "yes" : "NO");
}

}  // namespace

int main() {
#ifdef _OPENMP
    std::printf("OpenMP enabled, max threads %d\n", omp_get_max_threads());
#else
    std::printf("OpenMP disabled in this build\n");
#endif
    bench_shape(256, 256, 256);
    bench_shape(512, 512, 500);
    bench_shape(512, 20, 500);
    bench_shape(64, 512, 2000);
    return 0;
}
