// Timing harness for the hot kernels: the dealiased collocation product
// against the serial convolution reference, and the ensemble loops with one
// worker against the full pool.

#include <chrono>
#include <cstdio>
#include <functional>

#include "dnsl/malliavin.hpp"
#include "dnsl/reference_ops.hpp"

using namespace dnsl;

namespace {

double time_of(const std::function<void()>& body, int repeats) {
    const auto t0 = std::chrono::steady_clock::now();
    for (int r = 0; r < repeats; ++r) body();
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count() / repeats;
}

FlowModel make_model(int n, int threads_hint = 0) {
    (void)threads_hint;
    FlowModel m;
    m.lattice = Lattice::make(n);
    m.viscosity = 0.1;
    m.injection = NoiseInjection(example_forcing_set(0.4), m.lattice);
    return m;
}

void bench_advection() {
    std::printf("dealiased advection: collocation fft vs direct convolution reference\n");
    std::printf("%6s %14s %14s %10s\n", "N", "fft [ms]", "reference [ms]", "ratio");
    for (int n : {4, 8, 16}) {
        const auto lat = Lattice::make(n);
        Workspace ws(lat);
        const CounterRng rng(1, 0);
        ScalarField w(lat);
        for (int i = 0; i < lat->dim(); ++i) w[i] = rng.normal(0, uint64_t(i)) / lat->norm2(i);
        const VelocityField u = biot_savart(w);
        const int reps = n <= 8 ? 200 : 20;
        const double t_fft = time_of([&] { advect(ws, u, w); }, reps);
        const double t_ref = time_of([&] { ref::advect(u, w); }, n <= 8 ? 20 : 2);
        std::printf("%6d %14.3f %14.3f %9.1fx\n", n, 1e3 * t_fft, 1e3 * t_ref, t_ref / t_fft);
    }
}

void bench_ensemble() {
    const auto model = make_model(8);
    const double dt = 1.0 / 32;
    const int steps = 64;
    const int trajectories = 64;
    auto run = [&](int threads) {
        const ParallelMap pool(threads);
        std::vector<double> sink(static_cast<size_t>(trajectories));
        pool.run(trajectories, [&](std::ptrdiff_t p) {
            Workspace& ws = thread_workspace(model.lattice);
            const auto noise = NoisePath::gaussian(7, uint64_t(p), dt, steps, model.channels());
            ScalarField w(model.lattice);
            const Integrator stepper(model, dt);
            for (int k = 0; k < steps; ++k) stepper.step_in_place(ws, w, noise.row(k));
            sink[size_t(p)] = norm(w);
        });
    };
    const int pool_size = ParallelMap::default_threads();
    const double t1 = time_of([&] { run(1); }, 3);
    const double tp = time_of([&] { run(pool_size); }, 3);
    std::printf("\nensemble integration, %d trajectories x %d steps at N=8\n", trajectories, steps);
    std::printf("  serial %7.1f ms   %d threads %7.1f ms   speedup %.2fx\n", 1e3 * t1, pool_size,
                1e3 * tp, t1 / tp);
}

void bench_block_factor() {
    const auto model = make_model(8);
    const double dt = 1.0 / 32;
    const int replicas = 16;
    auto run = [&](int threads) {
        const ParallelMap pool(threads);
        std::vector<double> sink(static_cast<size_t>(replicas));
        pool.run(replicas, [&](std::ptrdiff_t p) {
            Workspace& ws = thread_workspace(model.lattice);
            const auto noise = NoisePath::gaussian(11, uint64_t(p), dt, 16, model.channels());
            const auto traj = simulate(ws, model, ScalarField(model.lattice), 0.5, dt, noise);
            TangentOps ops(ws, model, traj);
            sink[size_t(p)] = ops.factor(0, 16).f.norm();
        });
    };
    const int pool_size = ParallelMap::default_threads();
    const double t1 = time_of([&] { run(1); }, 2);
    const double tp = time_of([&] { run(pool_size); }, 2);
    std::printf("\nhalf-block response factors, %d replicas at N=8\n", replicas);
    std::printf("  serial %7.1f ms   %d threads %7.1f ms   speedup %.2fx\n", 1e3 * t1, pool_size,
                1e3 * tp, t1 / tp);
}

} // namespace

int main() {
    bench_advection();
    bench_ensemble();
    bench_block_factor();
    return 0;
}
