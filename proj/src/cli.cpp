#include "dnsl/cli.hpp"

#include <chrono>
#include <cmath>
#include <iostream>

#include "CLI11.hpp"

#include "dnsl/fk.hpp"
#include "dnsl/malliavin.hpp"
#include "dnsl/steering.hpp"

namespace dnsl {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

Observable observable_from(const RunConfig::Observable& o) {
    if (o.kind == "constant") return Observable::constant(o.amplitude);
    if (o.kind == "coordinate") return Observable::coordinate(o.mode, o.amplitude);
    if (o.kind == "tanh") return Observable::tanh_of(o.mode, o.amplitude, o.scale);
    return Observable::bump({o.mode}, o.amplitude, o.scale);
}

ScalarField unit_direction(const FlowModel& model, uint64_t seed) {
    ScalarField xi(model.lattice);
    const CounterRng rng(seed, 0xD14);
    for (int i = 0; i < xi.dim(); ++i)
        xi[i] = rng.normal(0, uint64_t(i)) / std::pow(model.lattice->norm2(i), 1.0);
    xi *= 1.0 / norm(xi);
    return xi;
}

} // namespace

FlowModel model_from_config(const RunConfig& c) {
    FlowModel m;
    m.lattice = Lattice::make(c.model.truncation);
    m.viscosity = c.model.viscosity;
    m.injection = NoiseInjection(c.forcing_set(), m.lattice);
    return m;
}

// ---------------------------------------------------------------------------

int run_check_forcing(const RunConfig& c, bool quiet) {
    const auto t0 = Clock::now();
    const auto rep = check_condition_h(c.forcing_set());
    Json j;
    j["condition_H"] = rep.satisfied;
    j["symmetric"] = rep.symmetric;
    j["generator"] = rep.generator;
    j["unequal_nonparallel"] = rep.unequal_nonparallel;
    j["reason"] = rep.reason;
    if (!quiet) std::cout << j.dump() << "\n";
    ensure_directory(c.run.out);
    write_json(c.run.out + "/check_forcing.json",
               make_envelope(c, "check-forcing", j, {{"modes", c.forcing.modes.size()}}, seconds_since(t0)));
    return kOk;
}

int run_simulate(const RunConfig& c, bool quiet) {
    const auto t0 = Clock::now();
    const FlowModel model = model_from_config(c);
    const ParallelMap pool(c.run.threads);
    const double dt = c.model.dt;
    const int steps = int(std::lround(c.simulate.horizon / dt));
    const int stride = std::max(1, int(std::lround(c.simulate.output_stride / dt)));
    const int outputs = steps / stride + 1;
    const double gamma = c.simulate.gamma > 0.0
                             ? c.simulate.gamma
                             : 1.0 / (8.0 * model.injection.forcing().noise_intensity());

    struct Row {
        double w, u, u1, u2, expm, polym;
    };
    std::vector<std::vector<Row>> slots(size_t(c.simulate.trajectories));
    pool.run(c.simulate.trajectories, [&](std::ptrdiff_t p) {
        Workspace& ws = thread_workspace(model.lattice);
        const auto noise = NoisePath::gaussian(c.run.seed, uint64_t(p), dt, steps, model.channels());
        std::vector<Row> rows(static_cast<size_t>(outputs));
        ScalarField final_state(model.lattice);
        integrate_observe(ws, model, ScalarField(model.lattice), noise, [&](int k, const VorticityField& w) {
            if (k == steps) final_state = w;
            if (k % stride != 0) return;
            const VelocityField u = biot_savart(w);
            const double un = sobolev_norm(u, 0.0);
            rows[size_t(k / stride)] = {sobolev_norm(w, 0.0),
                                        un,
                                        sobolev_norm(u, 1.0),
                                        sobolev_norm(u, 2.0),
                                        std::exp(gamma * un * un),
                                        1.0 + std::pow(un * un, c.simulate.moment_m)};
        });
        if (p == 0) {
            ensure_directory(c.run.out);
            write_snapshot(c.run.out + "/simulate_final.snap", final_state);
        }
        slots[size_t(p)] = std::move(rows);
    });

    ensure_directory(c.run.out);
    write_snapshot(c.run.out + "/simulate_initial.snap", ScalarField(model.lattice));
    CsvWriter csv({"t", "norm_w", "norm_u", "norm_u_h1", "norm_u_h2", "exp_moment", "poly_moment"});
    for (int j = 0; j < outputs; ++j) {
        Row acc{0, 0, 0, 0, 0, 0};
        for (const auto& rows : slots) {
            acc.w += rows[size_t(j)].w;
            acc.u += rows[size_t(j)].u;
            acc.u1 += rows[size_t(j)].u1;
            acc.u2 += rows[size_t(j)].u2;
            acc.expm += rows[size_t(j)].expm;
            acc.polym += rows[size_t(j)].polym;
        }
        const double n = c.simulate.trajectories;
        csv.row({j * stride * dt, acc.w / n, acc.u / n, acc.u1 / n, acc.u2 / n, acc.expm / n, acc.polym / n});
    }
    csv.write(c.run.out + "/simulate_series.csv");

    Json payload;
    payload["gamma"] = gamma;
    payload["steps"] = steps;
    write_json(c.run.out + "/simulate.json",
               make_envelope(c, "simulate", payload,
                             {{"seed", c.run.seed}, {"trajectories", c.simulate.trajectories}},
                             seconds_since(t0)));
    if (!quiet) std::cout << "simulate: " << c.simulate.trajectories << " trajectories, T=" << c.simulate.horizon << "\n";
    return kOk;
}

int run_tangent_check(const RunConfig& c, bool quiet) {
    const auto t0 = Clock::now();
    const FlowModel model = model_from_config(c);
    Workspace ws(model.lattice);
    const double dt = c.model.dt;
    const int steps = int(std::lround(0.5 / dt));

    const ScalarField w0 = sample_h2_vorticity(model.lattice, CounterRng(c.run.seed, 1), 0, 1.0);
    const auto noise = NoisePath::gaussian(c.run.seed, 2, dt, steps, model.channels());
    const auto traj = simulate(ws, model, w0, 0.5, dt, noise);
    const ScalarField xi = unit_direction(model, c.run.seed + 1);
    const ScalarField phi = unit_direction(model, c.run.seed + 2);

    auto fit_order = [&](const std::vector<double>& eps, const std::vector<double>& res) {
        double sx = 0, sy = 0, sxx = 0, sxy = 0;
        for (size_t i = 0; i < eps.size(); ++i) {
            const double x = std::log(eps[i]), y = std::log(std::max(res[i], 1e-300));
            sx += x; sy += y; sxx += x * x; sxy += x * y;
        }
        const double n = double(eps.size());
        return (n * sxy - sx * sy) / (n * sxx - sx * sx);
    };

    // first-order consistency
    const ScalarField jxi = propagate_tangent(ws, model, traj, 0.0, 0.5, xi);
    std::vector<double> eps = {1e-2, 1e-3, 1e-4}, res;
    for (double e : eps) {
        ScalarField wp = w0;
        wp.axpy(e, xi);
        ScalarField diff = simulate(ws, model, wp, 0.5, dt, noise).final_state() - traj.final_state();
        diff.axpy(-e, jxi);
        res.push_back(norm(diff));
    }
    const double order1 = fit_order(eps, res);

    // second-order consistency
    const ScalarField j2 = propagate_second_variation(ws, model, traj, 0.0, 0.5, xi, phi);
    std::vector<double> eps2 = {1e-2, 3e-3, 1e-3}, res2;
    for (double e : eps2) {
        auto flow = [&](double a, double b) {
            ScalarField w = w0;
            w.axpy(a, xi);
            w.axpy(b, phi);
            return simulate(ws, model, w, 0.5, dt, noise).final_state();
        };
        ScalarField second = flow(e, e);
        second -= flow(e, 0.0);
        second -= flow(0.0, e);
        second += traj.final_state();
        second.axpy(-e * e, j2);
        res2.push_back(norm(second));
    }
    const double order2 = fit_order(eps2, res2);

    // adjoint duality over random draws
    TangentOps ops(ws, model, traj);
    const CounterRng rng(c.run.seed, 3);
    double max_rel = 0.0;
    for (uint64_t trial = 0; trial < 20; ++trial) {
        ControlPath v(0, dt, model.channels(), steps);
        for (size_t i = 0; i < v.values.size(); ++i) v.values[i] = rng.normal(trial, i);
        const ScalarField eta = sample_h2_vorticity(model.lattice, rng, 1000 + trial, 1.0);
        const double lhs = dot(ops.noise_response(v, 0, steps), eta);
        const double rhs = l2_dot(v, ops.noise_response_adjoint(eta, 0, steps));
        max_rel = std::max(max_rel, std::abs(lhs - rhs) / std::max(1e-300, std::abs(lhs)));
    }

    // amplification sanity over 1e3 trajectories: the worst tangent gain
    // sup over window starts must stay under a gaussian envelope in |w|,
    // fitted on half of the initial states and checked on the rest
    const int states = 8, per_state = 125;
    const double kappa = 0.1;
    std::vector<double> state_amp(states, 0.0), state_norm(states, 0.0);
    double fourth = 0.0;
    for (int q = 0; q < states; ++q) {
        const ScalarField wq = sample_h2_vorticity(model.lattice, CounterRng(c.run.seed, 500 + q), 0, 1.5);
        state_norm[size_t(q)] = norm(wq);
        for (int p = 0; p < per_state; ++p) {
            const auto np = NoisePath::gaussian(c.run.seed, 10000 + uint64_t(q) * 1000 + uint64_t(p), dt,
                                                2 * steps, model.channels());
            const auto tp = simulate(ws, model, wq, 1.0, dt, np);
            TangentOps tops(ws, model, tp);
            double amp = 0.0;
            for (int s0 : {0, steps / 2, steps, 3 * steps / 2})
                amp = std::max(amp, norm(tops.tangent(xi, s0, 2 * steps)));
            state_amp[size_t(q)] = std::max(state_amp[size_t(q)], amp);
            fourth += std::pow(amp, 4) / double(states * per_state);
        }
    }
    double envelope_c = 0.0;
    for (int q = 0; q < states / 2; ++q)
        envelope_c = std::max(envelope_c,
                              state_amp[size_t(q)] / std::exp(kappa * state_norm[size_t(q)] * state_norm[size_t(q)]));
    bool envelope_ok = true;
    for (int q = states / 2; q < states; ++q)
        if (state_amp[size_t(q)] >
            3.0 * envelope_c * std::exp(kappa * state_norm[size_t(q)] * state_norm[size_t(q)]))
            envelope_ok = false;

    Json payload;
    payload["tangent_fd_order"] = order1;
    payload["second_variation_fd_order"] = order2;
    payload["duality_max_rel_error"] = max_rel;
    payload["tangent_norm_fourth_moment"] = fourth;
    payload["amplification_envelope_constant"] = envelope_c;
    payload["amplification_envelope_ok"] = envelope_ok;
    ensure_directory(c.run.out);
    write_json(c.run.out + "/tangent_check.json",
               make_envelope(c, "tangent-check", payload, {{"seed", c.run.seed}}, seconds_since(t0)));
    if (!quiet)
        std::cout << "tangent-check: order1 " << order1 << ", order2 " << order2 << ", duality "
                  << max_rel << "\n";
    return (order1 >= 1.9 && order2 >= 2.5 && max_rel <= 1e-8 && envelope_ok) ? kOk : kFlagged;
}

// ---------------------------------------------------------------------------

namespace {

int malliavin_residual_decay(const RunConfig& c, bool quiet, const Clock::time_point& t0) {
    const FlowModel model = model_from_config(c);
    const ParallelMap pool(c.run.threads);
    DecayRequest req;
    req.initial = ScalarField(model.lattice);
    req.direction = unit_direction(model, c.run.seed);
    req.betas = c.malliavin.beta_sweep;
    req.trajectories = c.malliavin.trajectories;
    req.n_max = c.malliavin.n_max;
    req.dt = c.model.dt;
    req.seed = c.run.seed;
    const auto table = residual_decay_experiment(model, pool, req);

    ensure_directory(c.run.out);
    CsvWriter csv({"beta", "n", "moment4", "stderr"});
    for (const auto& r : table.per_beta)
        for (int n = 0; n <= req.n_max; ++n)
            csv.row({r.beta, double(n), r.moment4[size_t(n)], r.stderr4[size_t(n)]});
    csv.write(c.run.out + "/malliavin_decay.csv");

    Json rates = Json::array();
    for (const auto& r : table.per_beta)
        rates.push_back({{"beta", r.beta},
                         {"rate", r.rate},
                         {"rate_ci", {r.rate_lo, r.rate_hi}},
                         {"final_over_initial", r.final_over_initial},
                         {"ratio_hi", r.ratio_hi},
                         {"decaying", r.decaying}});
    Json payload;
    payload["condition_h"] = table.condition_h_ok;
    payload["rates"] = rates;
    payload["best_beta_index"] = table.best;
    write_json(c.run.out + "/malliavin_decay.json",
               make_envelope(c, "malliavin residual-decay", payload,
                             {{"seed", c.run.seed}, {"trajectories", req.trajectories}}, seconds_since(t0)));
    if (!quiet)
        std::cout << "residual-decay: best rate "
                  << (table.best >= 0 ? table.per_beta[size_t(table.best)].rate : -1.0) << "\n";
    return table.any_decaying ? kOk : kFlagged;
}

int malliavin_duality(const RunConfig& c, bool quiet, const Clock::time_point& t0) {
    const FlowModel model = model_from_config(c);
    Workspace ws(model.lattice);
    const double dt = c.model.dt;
    const int steps = unit_steps(dt);
    const ScalarField xi = unit_direction(model, c.run.seed);
    const Mode probe = model.injection.channel_mode(0);
    const double h = 1e-4;

    double acc = 0.0, acc2 = 0.0;
    for (int p = 0; p < c.malliavin.replicas; ++p) {
        const ScalarField w0 = sample_h2_vorticity(model.lattice, CounterRng(c.run.seed, 77 + p), 0, 1.0);
        const auto noise = NoisePath::gaussian(c.run.seed + 1, uint64_t(p), dt, steps, model.channels());
        const auto traj = simulate(ws, model, w0, 1.0, dt, noise);
        const auto process = ControlProcess::build(ws, model, traj, xi, c.malliavin.beta, 1);
        const double lhs =
            traj.final_state().at(probe) * skorokhod_integral(ws, model, traj, process, 0, 0);
        double rhs = 0.0;
        for (int k = 0; k < steps / 2; ++k)
            for (int i = 0; i < model.channels(); ++i) {
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
    const double mean = acc / c.malliavin.replicas;
    const double se =
        std::sqrt((acc2 / c.malliavin.replicas - mean * mean) / std::max(1, c.malliavin.replicas - 1));
    const double z = se > 0 ? mean / se : 0.0;

    Json payload;
    payload["paired_difference"] = mean;
    payload["stderr"] = se;
    payload["z_score"] = z;
    payload["replicas"] = c.malliavin.replicas;
    ensure_directory(c.run.out);
    write_json(c.run.out + "/malliavin_duality.json",
               make_envelope(c, "malliavin duality-check", payload, {{"seed", c.run.seed}},
                             seconds_since(t0)));
    if (!quiet) std::cout << "duality-check: z = " << z << "\n";
    return std::abs(z) <= 3.0 ? kOk : kFlagged;
}

int malliavin_gradient(const RunConfig& c, bool quiet, const Clock::time_point& t0) {
    const FlowModel model = model_from_config(c);
    const ParallelMap pool(c.run.threads);
    GradientRequest req;
    req.initial = ScalarField(model.lattice);
    req.direction = unit_direction(model, c.run.seed);
    req.potential = Observable::tanh_of(model.injection.channel_mode(0), c.malliavin.amplitude);
    req.terminal = observable_from(c.fk.terminal);
    req.horizon = c.malliavin.horizon;
    req.beta = c.malliavin.beta;
    req.dt = c.model.dt;
    req.replicas = c.malliavin.replicas;
    req.seed = c.run.seed;
    const auto g = gradient_decomposition(model, pool, req);
    const double z = g.se_diff > 0 ? g.diff / g.se_diff : 0.0;

    Json payload;
    payload["i1"] = {{"value", g.i1}, {"stderr", g.se1}};
    payload["i2"] = {{"value", g.i2}, {"stderr", g.se2}};
    payload["i3"] = {{"value", g.i3}, {"stderr", g.se3}};
    payload["total"] = {{"value", g.total}, {"stderr", g.se_total}};
    payload["finite_difference"] = {{"value", g.fd}, {"stderr", g.se_fd}};
    payload["paired_difference"] = {{"value", g.diff}, {"stderr", g.se_diff}, {"z_score", z}};
    ensure_directory(c.run.out);
    write_json(c.run.out + "/malliavin_gradient.json",
               make_envelope(c, "malliavin gradient-check", payload,
                             {{"seed", c.run.seed}, {"replicas", req.replicas}}, seconds_since(t0)));
    if (!quiet) std::cout << "gradient-check: total " << g.total << " vs fd " << g.fd << " (z " << z << ")\n";
    return std::abs(z) <= 3.0 ? kOk : kFlagged;
}

} // namespace

int run_malliavin(const RunConfig& c, const std::string& sub_mode, bool quiet) {
    const auto t0 = Clock::now();
    if (sub_mode == "residual-decay") return malliavin_residual_decay(c, quiet, t0);
    if (sub_mode == "duality-check") return malliavin_duality(c, quiet, t0);
    if (sub_mode == "gradient-check") return malliavin_gradient(c, quiet, t0);
    std::cerr << "unknown malliavin mode '" << sub_mode
              << "' (expected residual-decay, duality-check or gradient-check)\n";
    return kInvalid;
}

// ---------------------------------------------------------------------------

int run_fk_spectrum(const RunConfig& c, bool quiet) {
    const auto t0 = Clock::now();
    const FlowModel model = model_from_config(c);
    const ParallelMap pool(c.run.threads);
    const Observable potential = observable_from(c.fk.potential);

    EigenvalueRequest er;
    er.initial = ScalarField(model.lattice);
    er.potential = potential;
    er.units = c.fk.units;
    er.dt = c.model.dt;
    er.ensemble = c.fk.ensemble;
    er.seed = c.run.seed;
    er.mode = EigenvalueMode::Cloning;
    const auto cloning = eigenvalue_estimate(model, pool, er);
    er.mode = EigenvalueMode::Direct;
    er.stream_salt = 1u << 20;
    const auto direct = eigenvalue_estimate(model, pool, er);
    const double agree_z = std::abs(cloning.lambda - direct.lambda) /
                           std::max(1e-300, std::sqrt(cloning.se * cloning.se + direct.se * direct.se));

    EigenfunctionRequest fr;
    const CounterRng prng(c.run.seed, 4001);
    for (int q = 0; q < c.fk.probes; ++q)
        fr.probes.push_back(sample_h2_vorticity(model.lattice, prng, uint64_t(q), c.fk.probe_radius));
    fr.potential = potential;
    fr.lambda = cloning.lambda;
    fr.units_short = c.fk.units_short;
    fr.units_long = c.fk.units;
    fr.dt = c.model.dt;
    fr.ensemble = c.fk.ensemble;
    fr.seed = c.run.seed;
    fr.stream_salt = 2u << 20;
    const auto h = eigenfunction_estimate(model, pool, fr);

    CloudRequest cr;
    cr.initial = ScalarField(model.lattice);
    cr.potential = potential;
    cr.units = c.fk.units;
    cr.dt = c.model.dt;
    cr.ensemble = c.fk.ensemble;
    cr.seed = c.run.seed;
    cr.stream_salt = 3u << 20;
    cr.report = {Observable::coordinate(model.injection.channel_mode(0)),
                 Observable::bump({model.injection.channel_mode(0)}, 1.0, 1.0)};
    const auto cloud = eigenmeasure_estimate(model, pool, cr);

    ensure_directory(c.run.out);
    CsvWriter lcsv({"unit", "cloning_log_mean_weight", "direct_log_fk"});
    for (size_t u = 0; u < cloning.unit_data.size(); ++u)
        lcsv.row({double(u + 1), cloning.unit_data[u],
                  u + 1 < direct.unit_data.size() ? direct.unit_data[u + 1] : 0.0});
    lcsv.write(c.run.out + "/fk_lambda_units.csv");
    CsvWriter hcsv({"probe", "h", "stderr", "h_short_horizon"});
    for (size_t i = 0; i < h.values.size(); ++i)
        hcsv.row({double(i), h.values[i], h.se[i], h.values_short[i]});
    hcsv.write(c.run.out + "/fk_eigenfunction.csv");

    const double lo = std::exp(potential.min_value()), hi = std::exp(potential.max_value());
    const bool bounds_ok = cloning.lambda >= lo - 1e-12 && cloning.lambda <= hi + 1e-12 &&
                           direct.lambda >= lo - 1e-12 && direct.lambda <= hi + 1e-12;

    // growth ratios of the weighted semigroup against the polynomial and
    // gaussian weight functions
    GrowthRequest gr;
    gr.potential = potential;
    gr.times = c.growth.times;
    gr.moment_m = c.growth.moment_m;
    gr.gamma = c.growth.gamma;
    gr.normalizer_radius = c.growth.radius;
    gr.probes = c.growth.probes;
    gr.dt = c.model.dt;
    gr.ensemble = c.growth.ensemble;
    gr.seed = c.run.seed;
    gr.stream_salt = 4u << 20;
    const auto growth = growth_ratio_report(model, pool, gr);
    CsvWriter gcsv({"t", "poly_weight_ratio", "exp_weight_ratio"});
    for (size_t j = 0; j < growth.times.size(); ++j)
        gcsv.row({growth.times[j], growth.poly_ratio[j], growth.exp_ratio[j]});

    Json payload;
    payload["potential"] = potential.describe();
    payload["potential_sup_norm"] = potential.sup_norm();
    payload["potential_grad_sup_norm"] = potential.grad_sup_norm();
    payload["lambda_cloning"] = {{"value", cloning.lambda}, {"stderr", cloning.se}};
    payload["lambda_direct"] = {{"value", direct.lambda}, {"stderr", direct.se},
                                {"ess_fraction", direct.min_ess_fraction},
                                {"ess_warning", direct.ess_warning}};
    payload["agreement_z"] = agree_z;
    payload["lambda_bounds_ok"] = bounds_ok;
    payload["eigenfunction_stabilized"] = h.stabilized;
    payload["eigenfunction_max_drift"] = h.max_drift;
    payload["cloud"] = {{"ancestor_fraction", cloud.ancestor_fraction},
                        {"collapse_warning", cloud.collapse_warning},
                        {"coordinate_moment", {{"value", cloud.moments[0].value}, {"stderr", cloud.moments[0].se}}},
                        {"bump_moment", {{"value", cloud.moments[1].value}, {"stderr", cloud.moments[1].se}}}};
    payload["growth"] = {{"gamma", growth.gamma},
                         {"poly_ratio_bounded", growth.poly_bounded},
                         {"exp_ratio_bounded", growth.exp_bounded}};
    gcsv.write(c.run.out + "/fk_growth_ratios.csv");
    write_json(c.run.out + "/fk_spectrum.json",
               make_envelope(c, "fk-spectrum", payload,
                             {{"seed", c.run.seed}, {"ensemble", c.fk.ensemble}}, seconds_since(t0)));
    if (!quiet)
        std::cout << "fk-spectrum: lambda " << cloning.lambda << " +- " << cloning.se << " (agreement z "
                  << agree_z << ")\n";
    return (agree_z <= 3.0 && bounds_ok && h.stabilized) ? kOk : kFlagged;
}

int run_feller_check(const RunConfig& c, bool quiet) {
    const auto t0 = Clock::now();
    const FlowModel model = model_from_config(c);
    const ParallelMap pool(c.run.threads);
    FellerRequest req;
    req.potential = observable_from(c.fk.potential);
    req.terminal = observable_from(c.fk.terminal);
    req.pair_radius = c.feller.pair_radius;
    req.normalizer_radius = c.feller.normalizer_radius > 0 ? c.feller.normalizer_radius : c.feller.pair_radius;
    req.pairs = c.feller.pairs;
    req.separation_min = c.feller.separation_min;
    req.separation_max = c.feller.separation_max;
    req.times = c.feller.times;
    req.dt = c.model.dt;
    req.ensemble = c.feller.ensemble;
    req.normalizer_probes = c.feller.normalizer_probes;
    req.seed = c.run.seed;
    const auto rep = uniform_feller_modulus(model, pool, req);

    ensure_directory(c.run.out);
    CsvWriter csv({"separation", "modulus", "stderr", "excluded"});
    for (const auto& p : rep.pairs) csv.row({p.separation, p.modulus, p.se, p.excluded ? 1.0 : 0.0});
    csv.write(c.run.out + "/feller_pairs.csv");

    Json payload;
    payload["identical_pair_modulus"] = rep.identical_pair_modulus;
    payload["holder_exponent"] = rep.holder_exponent;
    payload["exponent_stderr"] = rep.exponent_se;
    payload["used_pairs"] = rep.used_pairs;
    write_json(c.run.out + "/feller_check.json",
               make_envelope(c, "feller-check", payload,
                             {{"seed", c.run.seed}, {"ensemble", c.feller.ensemble}}, seconds_since(t0)));
    if (!quiet)
        std::cout << "feller-check: exponent " << rep.holder_exponent << " +- " << rep.exponent_se << "\n";
    const bool ok = rep.identical_pair_modulus == 0.0 && rep.used_pairs >= 3 &&
                    rep.holder_exponent >= 0.5 - 2.0 * rep.exponent_se;
    return ok ? kOk : kFlagged;
}

int run_ldp(const RunConfig& c, bool quiet) {
    const auto t0 = Clock::now();
    const FlowModel model = model_from_config(c);
    const ParallelMap pool(c.run.threads);
    const Observable direction = observable_from(c.fk.potential);

    ScgfRequest req;
    req.direction = direction;
    for (int j = 0; j < c.ldp.theta_count; ++j)
        req.thetas.push_back(-c.ldp.theta_max +
                             2.0 * c.ldp.theta_max * double(j) / double(c.ldp.theta_count - 1));
    req.ell_count = c.ldp.ell_count;
    req.eigen.initial = ScalarField(model.lattice);
    req.eigen.units = c.ldp.units;
    req.eigen.dt = c.model.dt;
    req.eigen.ensemble = c.ldp.ensemble;
    req.eigen.seed = c.run.seed;
    req.eigen.mode = EigenvalueMode::Cloning;
    const auto est = scgf_and_rate(model, pool, req);

    const auto occ = occupation_average(model, ScalarField(model.lattice), c.ldp.occupation_horizon,
                                        c.model.dt, c.run.seed, 0xACCull, direction);
    const double slope_z = std::abs(est.slope_at_zero - occ.value) /
                           std::max(1e-300, std::sqrt(est.slope_se * est.slope_se + occ.se * occ.se));

    ensure_directory(c.run.out);
    CsvWriter scsv({"theta", "scgf", "stderr"});
    for (size_t j = 0; j < est.thetas.size(); ++j) scsv.row({est.thetas[j], est.scgf[j], est.scgf_se[j]});
    scsv.write(c.run.out + "/ldp_scgf.csv");
    CsvWriter rcsv({"ell", "rate", "bounded"});
    double min_rate = 1e300, min_ell = 0.0;
    for (size_t i = 0; i < est.ell.size(); ++i) {
        rcsv.row({est.ell[i], est.rate[i], est.rate_bounded[i] ? 1.0 : 0.0});
        if (est.rate[i] < min_rate) {
            min_rate = est.rate[i];
            min_ell = est.ell[i];
        }
    }
    rcsv.write(c.run.out + "/ldp_rate.csv");

    Json payload;
    payload["scgf_zero"] = est.scgf[est.thetas.size() / 2];
    payload["convex_within_error"] = est.convex_within_error;
    payload["slope_at_zero"] = {{"value", est.slope_at_zero}, {"stderr", est.slope_se}};
    payload["occupation_mean"] = {{"value", occ.value}, {"stderr", occ.se}};
    payload["slope_vs_occupation_z"] = slope_z;
    payload["rate_minimum"] = {{"ell", min_ell}, {"value", min_rate}};
    write_json(c.run.out + "/ldp.json",
               make_envelope(c, "ldp", payload, {{"seed", c.run.seed}, {"ensemble", c.ldp.ensemble}},
                             seconds_since(t0)));
    if (!quiet)
        std::cout << "ldp: slope(0) " << est.slope_at_zero << " vs occupation " << occ.value << " (z "
                  << slope_z << ")\n";
    return (est.convex_within_error && slope_z <= 3.0) ? kOk : kFlagged;
}

int run_steer(const RunConfig& c, bool quiet) {
    const auto t0 = Clock::now();
    const FlowModel model = model_from_config(c);

    ScalarField wt(model.lattice);
    wt.at(c.steer.target_mode) = c.steer.target_amplitude * c.steer.target_mode.norm2();
    SteeringProblem prob;
    prob.start = VelocityField(model.lattice);
    prob.target = biot_savart(wt);
    prob.tolerance = c.steer.tolerance;
    prob.horizon = c.steer.horizon;
    prob.segments = c.steer.segments;
    SteeringOptions opt;
    opt.dt = c.model.dt;
    opt.max_iterations = c.steer.max_iterations;
    const bool target_forced = model.injection.forcing().contains(c.steer.target_mode);
    if (c.steer.transfer_seed && !target_forced)
        opt.initial_control = transfer_seed_control(model, prob, opt);
    const auto res = steer(model, prob, opt);

    ensure_directory(c.run.out);
    std::vector<std::string> cols = {"segment"};
    for (int i = 0; i < model.channels(); ++i) {
        const Mode m = model.injection.channel_mode(i);
        cols.push_back("ch_" + std::to_string(m.x) + "_" + std::to_string(m.y));
    }
    CsvWriter csv(cols);
    for (int s = 0; s < prob.segments; ++s) {
        std::vector<double> row = {double(s)};
        for (int i = 0; i < model.channels(); ++i) row.push_back(res.control(s, i));
        csv.row(row);
    }
    csv.write(c.run.out + "/steer_control.csv");

    Json payload;
    payload["achieved_distance"] = res.distance;
    payload["tolerance"] = prob.tolerance;
    payload["iterations"] = res.iterations;
    payload["converged"] = res.converged;
    payload["condition_h_warning"] = res.condition_h_warning;
    write_json(c.run.out + "/steer.json",
               make_envelope(c, "steer", payload, {{"target_amplitude", c.steer.target_amplitude}},
                             seconds_since(t0)));
    if (!quiet)
        std::cout << "steer: distance " << res.distance << " after " << res.iterations << " iterations\n";
    return res.converged ? kOk : kFlagged;
}

// ---------------------------------------------------------------------------

int run_cli(int argc, char** argv) {
    CLI::App app{"Galerkin laboratory for the stochastically forced 2D vorticity equation"};
    app.require_subcommand(1);

    std::string config_path;
    std::string out_override;
    int threads_override = -1;
    uint64_t seed_override = 0;
    bool seed_given = false;
    app.add_option("--config", config_path, "run configuration file")->required();
    app.add_option("--out", out_override, "output directory override");
    app.add_option("--threads", threads_override, "worker thread override");
    app.add_option("--seed", seed_override, "master seed override")->each([&](const std::string&) {
        seed_given = true;
    });

    auto* cmd_forcing = app.add_subcommand("check-forcing", "decide the forcing-set hypothesis");
    auto* cmd_sim = app.add_subcommand("simulate", "integrate trajectories and moment diagnostics");
    auto* cmd_tangent = app.add_subcommand("tangent-check", "finite-difference and duality suites");
    auto* cmd_mall = app.add_subcommand("malliavin", "control construction experiments");
    std::string mall_mode = "residual-decay";
    cmd_mall->add_option("mode", mall_mode, "residual-decay | duality-check | gradient-check");
    auto* cmd_fk = app.add_subcommand("fk-spectrum", "principal eigenvalue, eigenfunction, cloud");
    auto* cmd_feller = app.add_subcommand("feller-check", "normalized oscillation modulus");
    auto* cmd_ldp = app.add_subcommand("ldp", "cumulant generating function and rate function");
    auto* cmd_steer = app.add_subcommand("steer", "deterministic control to a target state");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    }

    auto parsed = parse_config_file(config_path);
    if (!parsed.config) {
        for (const auto& e : parsed.errors) std::cerr << "config error: " << e << "\n";
        return kInvalid;
    }
    RunConfig cfg = *parsed.config;
    if (!out_override.empty()) cfg.run.out = out_override;
    if (threads_override >= 0) cfg.run.threads = threads_override;
    if (seed_given) cfg.run.seed = seed_override;

    try {
        if (cmd_forcing->parsed()) return run_check_forcing(cfg);
        if (cmd_sim->parsed()) return run_simulate(cfg);
        if (cmd_tangent->parsed()) return run_tangent_check(cfg);
        if (cmd_mall->parsed()) return run_malliavin(cfg, mall_mode);
        if (cmd_fk->parsed()) return run_fk_spectrum(cfg);
        if (cmd_feller->parsed()) return run_feller_check(cfg);
        if (cmd_ldp->parsed()) return run_ldp(cfg);
        if (cmd_steer->parsed()) return run_steer(cfg);
    } catch (const ValidationError& e) {
        std::cerr << "validation error: " << e.what() << "\n";
        return kInvalid;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kInvalid;
    }
    return kInvalid;
}

} // namespace dnsl
