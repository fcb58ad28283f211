#include "doctest.h"

#include <cmath>

#include "dnsl/malliavin.hpp"
#include "test_util.hpp"

using namespace dnsl;
using namespace dnsl::test;

namespace {

FlowModel make_model(int n, double nu, const ForcingSet& k, bool nonlinear = true) {
    FlowModel m;
    m.lattice = Lattice::make(n);
    m.viscosity = nu;
    m.injection = NoiseInjection(k, m.lattice);
    m.nonlinear = nonlinear;
    return m;
}

TrajectoryRecord make_traj(Workspace& ws, const FlowModel& model, double horizon, double dt,
                           uint64_t seed, double w0_scale = 0.4) {
    const ScalarField w0 = random_field(model.lattice, CounterRng(seed, 0), 0, 2.0, w0_scale);
    const auto noise = NoisePath::gaussian(seed, 1, dt, int(std::lround(horizon / dt)), model.channels());
    return simulate(ws, model, w0, horizon, dt, noise);
}

} // namespace

TEST_CASE("control blocks vanish on the second half interval") {
    const auto model = make_model(4, 0.1, example_forcing_set(0.4));
    Workspace ws(model.lattice);
    const double dt = 1.0 / 16;
    const auto traj = make_traj(ws, model, 1.0, dt, 7);
    const ScalarField rho = random_field(model.lattice, CounterRng(1, 1), 0);

    const ControlPath v = build_control_block(ws, model, traj, 0, rho, 1e-2);
    REQUIRE(v.cells() == 16);
    for (int k = 8; k < 16; ++k)
        for (int i = 0; i < 4; ++i) CHECK(v.cell(k)[i] == 0.0);

    CHECK(build_control_block(ws, model, traj, 0, ScalarField(model.lattice), 1e-2).l2_norm() == 0.0);
    CHECK_THROWS_AS(build_control_block(ws, model, traj, 0, rho, 0.0), ValidationError);
    CHECK_THROWS_AS(build_control_block(ws, model, traj, 1, rho, 1e-2), RangeError);
}

TEST_CASE("control norm bound: |v| <= beta^{-1/2} |J rho|") {
    const auto model = make_model(6, 0.1, example_forcing_set(0.4));
    Workspace ws(model.lattice);
    const double dt = 1.0 / 16;
    for (uint64_t trial = 0; trial < 6; ++trial) {
        const auto traj = make_traj(ws, model, 1.0, dt, 100 + trial);
        const ScalarField rho = random_field(model.lattice, CounterRng(2, trial), 0);
        for (double beta : {1e-4, 1e-2, 1.0}) {
            TangentOps ops(ws, model, traj);
            const ControlPath v = build_control_block(ws, model, traj, 0, rho, beta);
            const double jn = norm(ops.tangent(rho, 0, 8));
            CHECK(v.l2_norm() <= jn / std::sqrt(beta) * (1.0 + 1e-6));
        }
    }
}

TEST_CASE("residual curve equals J rho - A v and obeys the pathwise bound") {
    const auto model = make_model(5, 0.1, example_forcing_set(0.4));
    Workspace ws(model.lattice);
    const double dt = 1.0 / 16;
    const auto traj = make_traj(ws, model, 1.0, dt, 31);
    const ScalarField rho = random_field(model.lattice, CounterRng(3, 3), 0);
    const double beta = 1e-2;
    const ControlPath v = build_control_block(ws, model, traj, 0, rho, beta);
    const auto curve = propagate_residual(ws, model, traj, 0, rho, v);
    REQUIRE(curve.size() == 17);

    TangentOps ops(ws, model, traj);
    const double jmid = norm(ops.tangent(rho, 0, 8));
    for (int t : {3, 8, 12, 16}) {
        ScalarField want = ops.tangent(rho, 0, t);
        want -= ops.noise_response(v, 0, t);
        CHECK(rel_err(curve[size_t(t)], want) <= 1e-12);
    }

    // |rho_t| <= |J_{n,t} rho| + |A_{n,t}| beta^{-1/2} |J_{n,mid} rho| with the
    // response norm estimated by power iteration on A A*
    for (int t : {4, 8}) {
        ScalarField z = random_field(model.lattice, CounterRng(4, 9), 1);
        double a_norm2 = 0.0;
        for (int it = 0; it < 25; ++it) {
            z = ops.noise_response(ops.noise_response_adjoint(z, 0, t), 0, t);
            a_norm2 = norm(z);
            z *= 1.0 / a_norm2;
        }
        const double bound = norm(ops.tangent(rho, 0, t)) +
                             std::sqrt(a_norm2) / std::sqrt(beta) * jmid;
        CHECK(norm(curve[size_t(t)]) <= bound * (1.0 + 1e-6));
    }
}

TEST_CASE("oversized regularization turns the control off") {
    const auto model = make_model(4, 0.1, example_forcing_set(0.4));
    Workspace ws(model.lattice);
    const double dt = 1.0 / 16;
    const auto traj = make_traj(ws, model, 1.0, dt, 41);
    const ScalarField rho = random_field(model.lattice, CounterRng(5, 0), 0);

    const ControlPath v = build_control_block(ws, model, traj, 0, rho, 1e12);
    CHECK(v.l2_norm() <= 1e-5);
    const auto curve = propagate_residual(ws, model, traj, 0, rho, v);
    TangentOps ops(ws, model, traj);
    CHECK(rel_err(curve.back(), ops.tangent(rho, 0, 16)) <= 1e-5);
}

TEST_CASE("vanishing regularization cancels the forced range in the linear case") {
    const auto model = make_model(2, 0.1, example_forcing_set(0.8), false);
    Workspace ws(model.lattice);
    const double dt = 1.0 / 16;
    const auto traj = simulate(ws, model, ScalarField(model.lattice), 1.0, dt,
                               NoisePath::zero(dt, 16, 4));
    ScalarField rho(model.lattice);
    for (int i = 0; i < 4; ++i) rho[model.injection.channel_site(i)] = 0.5 + 0.1 * i;

    double prev = 1e300;
    for (double beta : {1e-2, 1e-5, 1e-8}) {
        const ControlPath v = build_control_block(ws, model, traj, 0, rho, beta);
        const auto curve = propagate_residual(ws, model, traj, 0, rho, v);
        const double ratio = norm(curve[8]) / norm(rho);
        CHECK(ratio < prev);
        prev = ratio;
    }
    CHECK(prev <= 1e-4);
}

TEST_CASE("tangent noise derivative matches the noise-bump oracle") {
    const auto model = make_model(4, 0.1, example_forcing_set(0.5));
    Workspace ws(model.lattice);
    const double dt = 1.0 / 16;
    const auto traj = make_traj(ws, model, 1.0, dt, 51);
    const ScalarField xi = random_field(model.lattice, CounterRng(6, 0), 0);

    SUBCASE("linear dynamics have no noise sensitivity") {
        auto lin = model;
        lin.nonlinear = false;
        const auto ltraj = make_traj(ws, lin, 1.0, dt, 52);
        CHECK(norm(malliavin_tangent_derivative(ws, lin, ltraj, 0.25, 1, 0.0, 1.0, xi)) == 0.0);
    }

    SUBCASE("zero at the interval end") {
        CHECK(norm(malliavin_tangent_derivative(ws, model, traj, 1.0, 0, 0.0, 1.0, xi)) == 0.0);
    }

    SUBCASE("bump oracle, both orderings of r and s") {
        const double h = 1e-4;
        for (const auto& [r, s, t] : std::vector<std::array<double, 3>>{
                 {0.25, 0.0, 1.0},   // r inside [s,t]
                 {0.125, 0.5, 1.0},  // r before s
             }) {
            for (int ch : {0, 2}) {
                const ScalarField got = malliavin_tangent_derivative(ws, model, traj, r, ch, s, t, xi);
                const int ri = traj.index_of(r);
                auto bumped = [&](double sign) {
                    NoisePath n2 = traj.noise;
                    n2.row(ri)[ch] += sign * h;
                    const auto t2 = simulate(ws, model, traj.initial(), 1.0, dt, n2);
                    return propagate_tangent(ws, model, t2, s, t, xi);
                };
                ScalarField fd = bumped(1.0) - bumped(-1.0);
                fd *= 1.0 / (2.0 * h);
                CHECK(rel_err(got, fd) <= 1e-4);
            }
        }
    }
}

TEST_CASE("control noise derivative matches the noise-bump oracle") {
    const auto model = make_model(3, 0.1, example_forcing_set(0.5));
    Workspace ws(model.lattice);
    const double dt = 1.0 / 8;
    const auto traj = make_traj(ws, model, 1.0, dt, 61);
    const ScalarField xi = random_field(model.lattice, CounterRng(7, 0), 0);
    const double beta = 1e-2;

    const auto process = ControlProcess::build(ws, model, traj, xi, beta, 1);
    const BlockControl& ctl = process.block(0);

    const double h = 1e-5;
    for (int r : {0, 1, 2}) {
        for (int ch : {0, 3}) {
            const ControlPath got = malliavin_control_derivative(ws, model, traj, ctl, r, ch);
            auto bumped = [&](double sign) {
                NoisePath n2 = traj.noise;
                n2.row(r)[ch] += sign * h;
                const auto t2 = simulate(ws, model, traj.initial(), 1.0, dt, n2);
                return build_control_block(ws, model, t2, 0, xi, beta);
            };
            const ControlPath vp = bumped(1.0), vm = bumped(-1.0);
            double err = 0.0, scale = 0.0;
            for (int k = 0; k < got.cells(); ++k)
                for (int i = 0; i < 4; ++i) {
                    const double fd = (vp.cell(k)[i] - vm.cell(k)[i]) / (2.0 * h);
                    err = std::max(err, std::abs(fd - got.cell(k)[i]));
                    scale = std::max(scale, std::abs(fd));
                }
            CHECK(err <= 2e-4 * std::max(1.0, scale));
        }
    }

    SUBCASE("zero seed gives a zero derivative") {
        const auto zp = ControlProcess::build(ws, model, traj, ScalarField(model.lattice), beta, 1);
        const ControlPath d = malliavin_control_derivative(ws, model, traj, zp.block(0), 1, 1);
        CHECK(d.l2_norm() == 0.0);
    }

    SUBCASE("linear dynamics give a zero derivative") {
        auto lin = model;
        lin.nonlinear = false;
        const auto ltraj = make_traj(ws, lin, 1.0, dt, 62);
        const auto lp = ControlProcess::build(ws, lin, ltraj, xi, beta, 1);
        CHECK(malliavin_control_derivative(ws, lin, ltraj, lp.block(0), 1, 1).l2_norm() == 0.0);
    }
}

TEST_CASE("skorokhod integral of a deterministic integrand is the ito sum") {
    // advection off: the control operators carry no noise, so the trace
    // vanishes and delta(v) = sum v dW with variance |v|^2_{L2}
    const auto model = make_model(2, 0.1, example_forcing_set(0.8), false);
    Workspace ws(model.lattice);
    const double dt = 1.0 / 8;
    ScalarField xi(model.lattice);
    for (int i = 0; i < 4; ++i) xi[model.injection.channel_site(i)] = 0.3 + 0.2 * i;

    const int replicas = 10000;
    double s1 = 0.0, s2 = 0.0, vnorm2 = 0.0;
    for (int p = 0; p < replicas; ++p) {
        const auto noise = NoisePath::gaussian(404, uint64_t(p), dt, 8, 4);
        const auto traj = simulate(ws, model, ScalarField(model.lattice), 1.0, dt, noise);
        const auto process = ControlProcess::build(ws, model, traj, xi, 1e-3, 1);
        const double d = skorokhod_integral(ws, model, traj, process, 0, 0);
        s1 += d;
        s2 += d * d;
        vnorm2 = process.block(0).path.l2_norm_sq();
    }
    const double mean = s1 / replicas;
    const double var = s2 / replicas - mean * mean;
    CHECK(std::abs(mean) <= 3.0 * std::sqrt(vnorm2 / replicas));
    CHECK(std::abs(var - vnorm2) <= 3.0 * vnorm2 * std::sqrt(2.0 / replicas));
}

TEST_CASE("skorokhod duality against the noise-bump derivative of a coordinate") {
    // E[F delta(v)] = E[<DF, v>] for F = w_T[(1,1)], with DF taken from
    // central noise bumps so the oracle never touches the adjoint machinery.
    const auto model = make_model(2, 0.1, example_forcing_set(0.6));
    Workspace ws(model.lattice);
    const double dt = 1.0 / 8;
    const int steps = 8;
    const ScalarField xi = random_field(model.lattice, CounterRng(8, 0), 0, 2.0, 0.7);
    const Mode probe{1, 1};
    const double h = 1e-4;

    const int replicas = 800;
    double acc = 0.0, acc2 = 0.0;
    for (int p = 0; p < replicas; ++p) {
        const ScalarField w0 = random_field(model.lattice, CounterRng(9, uint64_t(p)), 1, 2.0, 0.3);
        const auto noise = NoisePath::gaussian(505, uint64_t(p), dt, steps, 4);
        const auto traj = simulate(ws, model, w0, 1.0, dt, noise);
        const auto process = ControlProcess::build(ws, model, traj, xi, 1e-2, 1);
        const double lhs = traj.final_state().at(probe) *
                           skorokhod_integral(ws, model, traj, process, 0, 0);

        double rhs = 0.0;
        for (int k = 0; k < steps / 2; ++k)
            for (int i = 0; i < 4; ++i) {
                NoisePath np = noise, nm = noise;
                np.row(k)[i] += h;
                nm.row(k)[i] -= h;
                const double fp = simulate(ws, model, w0, 1.0, dt, np).final_state().at(probe);
                const double fm = simulate(ws, model, w0, 1.0, dt, nm).final_state().at(probe);
                rhs += dt * (fp - fm) / (2.0 * h) * process.block(0).path.cell(k)[i];
            }
        const double d = lhs - rhs;
        acc += d;
        acc2 += d * d;
    }
    const double mean = acc / replicas;
    const double se = std::sqrt((acc2 / replicas - mean * mean) / (replicas - 1));
    CHECK(std::abs(mean) <= 3.0 * se);
    CHECK(se > 0.0);
}

TEST_CASE("residual decay experiment: structure and trivial inputs") {
    const auto model = make_model(4, 0.1, example_forcing_set(0.3));
    const ParallelMap pool(1);
    DecayRequest req;
    req.initial = ScalarField(model.lattice);
    req.direction = random_field(model.lattice, CounterRng(10, 0), 0);
    req.direction *= 1.0 / norm(req.direction);
    req.betas = {1e-3, 1e-1};
    req.trajectories = 40;
    req.n_max = 3;
    req.dt = 1.0 / 16;
    req.seed = 77;
    req.bootstrap = 50;

    const auto table = residual_decay_experiment(model, pool, req);
    CHECK(table.condition_h_ok);
    REQUIRE(table.per_beta.size() == 2);
    for (const auto& r : table.per_beta) {
        REQUIRE(r.moment4.size() == 4);
        CHECK(r.moment4[0] == doctest::Approx(1.0).epsilon(1e-12)); // |xi| = 1
        for (double m : r.moment4) CHECK(m >= 0.0);
        CHECK(r.rate > 0.0);
        CHECK(r.rate_lo <= r.rate_hi);
    }
    CHECK(table.best >= 0);

    SUBCASE("zero direction gives an all-zero table") {
        DecayRequest zero = req;
        zero.direction = ScalarField(model.lattice);
        zero.trajectories = 8;
        zero.bootstrap = 10;
        const auto zt = residual_decay_experiment(model, pool, zero);
        for (const auto& r : zt.per_beta)
            for (double m : r.moment4) CHECK(m == 0.0);
    }
}

TEST_CASE("gradient decomposition: exact linear-gaussian case") {
    // V = 0 and a linear terminal functional with the advection off: the
    // derivative of the expectation is psi(J xi), the potential term drops,
    // and the central difference is exact replica by replica.
    const auto model = make_model(2, 0.1, example_forcing_set(0.7), false);
    const ParallelMap pool(1);
    const Mode probe{1, 0};

    GradientRequest req;
    req.initial = ScalarField(model.lattice);
    req.direction = random_field(model.lattice, CounterRng(11, 0), 0);
    req.potential = Observable::constant(0.0);
    req.terminal = Observable::coordinate(probe, 2.0);
    req.horizon = 1.0;
    req.beta = 1e-2;
    req.dt = 1.0 / 8;
    req.replicas = 400;
    req.seed = 99;

    const auto g = gradient_decomposition(model, pool, req);
    const double closed = 2.0 * std::exp(-model.viscosity * probe.norm2() * 1.0) *
                          req.direction.at(probe) / probe.norm2();
    CHECK(g.i2 == 0.0);
    CHECK(std::abs(g.fd - closed) <= 1e-9 * std::abs(closed));
    CHECK(g.se_fd <= 1e-12 * std::abs(closed));
    CHECK(std::abs(g.total - closed) <= 3.0 * g.se_total);
    CHECK(std::abs(g.diff) <= 3.0 * g.se_diff);
}

TEST_CASE("gradient decomposition: zero direction kills every term") {
    const auto model = make_model(2, 0.1, example_forcing_set(0.5));
    const ParallelMap pool(1);
    GradientRequest req;
    req.initial = ScalarField(model.lattice);
    req.direction = ScalarField(model.lattice);
    req.potential = Observable::tanh_of({1, 0}, 0.2);
    req.terminal = Observable::tanh_of({0, 1}, 1.0);
    req.horizon = 1.0;
    req.dt = 1.0 / 8;
    req.replicas = 16;
    req.seed = 13;
    const auto g = gradient_decomposition(model, pool, req);
    CHECK(g.i1 == 0.0);
    CHECK(g.i2 == 0.0);
    CHECK(g.i3 == 0.0);
    CHECK(std::abs(g.fd) <= 1e-12);
}

TEST_CASE("gradient decomposition agrees with the finite difference on the full system") {
    const auto model = make_model(2, 0.1, example_forcing_set(0.5));
    const ParallelMap pool(ParallelMap::default_threads());
    GradientRequest req;
    req.initial = 0.3 * unit_field(model.lattice, {1, 0});
    req.direction = random_field(model.lattice, CounterRng(14, 0), 0);
    req.potential = Observable::tanh_of({1, 0}, 0.3);
    req.terminal = Observable::tanh_of({1, 1}, 1.0);
    req.horizon = 1.0;
    req.beta = 1e-2;
    req.dt = 1.0 / 8;
    req.replicas = 600;
    req.seed = 1234;
    const auto g = gradient_decomposition(model, pool, req);
    CHECK(std::abs(g.diff) <= 3.0 * g.se_diff);
    CHECK(g.se_diff > 0.0);
}
