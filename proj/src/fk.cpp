#include "dnsl/fk.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace dnsl {

ScalarField sample_h2_vorticity(const LatticePtr& lat, const CounterRng& rng, uint64_t salt, double radius) {
    ScalarField w(lat);
    for (int i = 0; i < lat->dim(); ++i)
        w[i] = rng.normal(salt, uint64_t(i)) / std::pow(lat->norm2(i), 1.75);
    const VelocityField u = biot_savart(w);
    const double h2 = sobolev_norm(u, 2.0);
    const double frac = rng.uniform(salt, uint64_t(lat->dim()) + 7);
    if (h2 > 0.0) w *= radius * frac / h2;
    return w;
}

double velocity_norm(const ScalarField& w) {
    return sobolev_norm(biot_savart(w), 0.0);
}

namespace {

double mean_of(const std::vector<double>& v) {
    return std::accumulate(v.begin(), v.end(), 0.0) / double(v.size());
}

double se_of(const std::vector<double>& v, double mean) {
    if (v.size() < 2) return 0.0;
    double var = 0.0;
    for (double x : v) var += (x - mean) * (x - mean);
    return std::sqrt(var / double(v.size()) / double(v.size() - 1));
}

/// Least-squares slope for equally informative abscissae.
double ls_slope(const std::vector<double>& x, const std::vector<double>& y) {
    const double n = double(x.size());
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (size_t i = 0; i < x.size(); ++i) {
        sx += x[i];
        sy += y[i];
        sxx += x[i] * x[i];
        sxy += x[i] * y[i];
    }
    return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

/// Slope standard error from the fit residuals.
double ls_slope_se(const std::vector<double>& x, const std::vector<double>& y) {
    const size_t n = x.size();
    if (n < 3) return 0.0;
    const double slope = ls_slope(x, y);
    const double mx = mean_of(x), my = mean_of(y);
    double sse = 0.0, sxx = 0.0;
    for (size_t i = 0; i < n; ++i) {
        const double fit = my + slope * (x[i] - mx);
        sse += (y[i] - fit) * (y[i] - fit);
        sxx += (x[i] - mx) * (x[i] - mx);
    }
    return std::sqrt(sse / double(n - 2) / sxx);
}

} // namespace

std::vector<std::vector<double>> fk_path_table(const FlowModel& model, const ParallelMap& pool,
                                               const VorticityField& initial,
                                               const std::function<double(const VorticityField&)>& potential,
                                               const std::function<double(const VorticityField&)>& terminal,
                                               const std::vector<int>& grid_steps, double dt, int ensemble,
                                               uint64_t seed, uint64_t salt) {
    const int total = grid_steps.empty() ? 0 : grid_steps.back();
    std::vector<std::vector<double>> table(static_cast<size_t>(ensemble));
    pool.run(ensemble, [&](std::ptrdiff_t p) {
        Workspace& ws = thread_workspace(model.lattice);
        const auto noise = NoisePath::gaussian(seed, salt + uint64_t(p), dt, total, model.channels());
        std::vector<double> row(grid_steps.size());
        double acc = 0.0;   // trapezoid accumulator of the potential integral
        double prev = 0.0;  // potential at the previous step
        size_t next = 0;
        integrate_observe(ws, model, initial, noise, [&](int k, const VorticityField& w) {
            const double val = potential(w);
            if (k > 0) acc += 0.5 * dt * (prev + val);
            prev = val;
            while (next < grid_steps.size() && grid_steps[next] == k) {
                row[next] = std::exp(acc) * terminal(w);
                ++next;
            }
        });
        table[size_t(p)] = std::move(row);
    });
    return table;
}

Estimate fk_expectation(const FlowModel& model, const ParallelMap& pool, const FkRequest& req) {
    const int steps = int(std::lround(req.horizon / req.dt));
    if (std::abs(steps * req.dt - req.horizon) > 1e-9)
        throw ValidationError("fk expectation horizon must be a multiple of dt");
    const auto table = fk_path_table(
        model, pool, req.initial, [&](const VorticityField& w) { return req.potential.value(w); },
        [&](const VorticityField& w) { return req.terminal.value(w); }, {steps}, req.dt, req.ensemble,
        req.seed, req.stream_salt);
    std::vector<double> col(table.size());
    for (size_t p = 0; p < table.size(); ++p) col[p] = table[p][0];
    const double m = mean_of(col);
    return {m, se_of(col, m)};
}

// ---------------------------------------------------------------------------
// Principal eigenvalue
// ---------------------------------------------------------------------------

namespace {

EigenvalueEstimate eigenvalue_direct(const FlowModel& model, const ParallelMap& pool,
                                     const EigenvalueRequest& req) {
    const int s = int(std::lround(1.0 / req.dt));
    std::vector<int> grid(size_t(req.units) + 1);
    for (int u = 0; u <= req.units; ++u) grid[size_t(u)] = u * s;
    const auto table = fk_path_table(
        model, pool, req.initial, [&](const VorticityField& w) { return req.potential.value(w); },
        [](const VorticityField&) { return 1.0; }, grid, req.dt, req.ensemble, req.seed, req.stream_salt);

    EigenvalueEstimate est;
    est.mode = EigenvalueMode::Direct;
    const int tail0 = req.units / 2;
    auto lambda_of = [&](const std::vector<int>& idx) {
        std::vector<double> ts, logs;
        for (int u = tail0; u <= req.units; ++u) {
            double m = 0.0;
            for (int p : idx) m += table[size_t(p)][size_t(u)];
            ts.push_back(u);
            logs.push_back(std::log(m / double(idx.size())));
        }
        return ls_slope(ts, logs);
    };
    std::vector<int> all(size_t(req.ensemble));
    std::iota(all.begin(), all.end(), 0);
    est.log_lambda = lambda_of(all);
    est.lambda = std::exp(est.log_lambda);
    for (int u = 0; u <= req.units; ++u) {
        double m = 0.0;
        for (int p = 0; p < req.ensemble; ++p) m += table[size_t(p)][size_t(u)];
        est.unit_data.push_back(std::log(m / req.ensemble));
    }

    // weight degeneracy at the final horizon
    double sw = 0.0, sw2 = 0.0;
    for (int p = 0; p < req.ensemble; ++p) {
        const double w = table[size_t(p)].back();
        sw += w;
        sw2 += w * w;
    }
    est.min_ess_fraction = sw * sw / (sw2 * req.ensemble);
    est.ess_warning = est.min_ess_fraction < 0.05;

    // bootstrap over paths
    std::vector<double> boot;
    const CounterRng rng(req.seed ^ 0xD1CEull, 4242);
    for (int b = 0; b < req.bootstrap; ++b) {
        std::vector<int> idx(size_t(req.ensemble));
        for (int p = 0; p < req.ensemble; ++p)
            idx[size_t(p)] = int(rng.uniform(uint64_t(b), uint64_t(p)) * req.ensemble);
        boot.push_back(lambda_of(idx));
    }
    est.log_se = se_of(boot, mean_of(boot)) * std::sqrt(double(req.bootstrap));
    est.se = est.lambda * est.log_se;
    return est;
}

struct CloningRun {
    std::vector<double> unit_log_means;
    std::vector<VorticityField> cloud;
    std::vector<int> ancestors;
};

CloningRun cloning_run(const FlowModel& model, const ParallelMap& pool, const VorticityField& initial,
                       const Observable& potential, int units, double dt, int ensemble, uint64_t seed,
                       uint64_t salt) {
    const int s = int(std::lround(1.0 / dt));
    CloningRun run;
    run.cloud.assign(size_t(ensemble), initial);
    run.ancestors.resize(size_t(ensemble));
    std::iota(run.ancestors.begin(), run.ancestors.end(), 0);
    const CounterRng resample_rng(seed ^ 0x5EEDull, salt + 31337);

    std::vector<double> logw(static_cast<size_t>(ensemble));
    for (int u = 0; u < units; ++u) {
        pool.run(ensemble, [&](std::ptrdiff_t p) {
            Workspace& ws = thread_workspace(model.lattice);
            const auto noise =
                NoisePath::gaussian(seed, salt + uint64_t(u) * uint64_t(ensemble) + uint64_t(p), dt, s,
                                    model.channels());
            double acc = 0.0, prev = 0.0;
            ScalarField final_w(model.lattice);
            integrate_observe(ws, model, run.cloud[size_t(p)], noise, [&](int k, const VorticityField& w) {
                const double val = potential.value(w);
                if (k > 0) acc += 0.5 * dt * (prev + val);
                prev = val;
                if (k == s) final_w = w;
            });
            run.cloud[size_t(p)] = std::move(final_w);
            logw[size_t(p)] = acc;
        });

        // mean weight of the unit, then systematic resampling
        double gsum = 0.0;
        double gmax = *std::max_element(logw.begin(), logw.end());
        std::vector<double> g(static_cast<size_t>(ensemble));
        for (int p = 0; p < ensemble; ++p) {
            g[size_t(p)] = std::exp(logw[size_t(p)] - gmax);
            gsum += g[size_t(p)];
        }
        run.unit_log_means.push_back(gmax + std::log(gsum / ensemble));

        const double offset = resample_rng.uniform(uint64_t(u), 0);
        std::vector<VorticityField> next;
        std::vector<int> next_anc;
        next.reserve(size_t(ensemble));
        next_anc.reserve(size_t(ensemble));
        double cum = 0.0;
        int i = -1;
        for (int j = 0; j < ensemble; ++j) {
            const double target = (j + offset) / ensemble * gsum;
            while (cum <= target && i + 1 < ensemble) {
                ++i;
                cum += g[size_t(i)];
            }
            next.push_back(run.cloud[size_t(i)]);
            next_anc.push_back(run.ancestors[size_t(i)]);
        }
        run.cloud = std::move(next);
        run.ancestors = std::move(next_anc);
    }
    return run;
}

} // namespace

EigenvalueEstimate eigenvalue_estimate(const FlowModel& model, const ParallelMap& pool,
                                       const EigenvalueRequest& req) {
    if (req.mode == EigenvalueMode::Direct) return eigenvalue_direct(model, pool, req);

    const auto run = cloning_run(model, pool, req.initial, req.potential, req.units, req.dt, req.ensemble,
                                 req.seed, req.stream_salt);
    EigenvalueEstimate est;
    est.mode = EigenvalueMode::Cloning;
    est.unit_data = run.unit_log_means;
    std::vector<double> used(run.unit_log_means.begin() + req.burn_in_units, run.unit_log_means.end());
    est.log_lambda = mean_of(used);
    est.lambda = std::exp(est.log_lambda);
    est.log_se = se_of(used, est.log_lambda); // unit means treated as independent
    est.se = est.lambda * est.log_se;
    return est;
}

EigenfunctionEstimate eigenfunction_estimate(const FlowModel& model, const ParallelMap& pool,
                                             const EigenfunctionRequest& req) {
    EigenfunctionEstimate out;
    std::vector<double> raw_long(req.probes.size()), raw_short(req.probes.size()), se_long(req.probes.size());
    for (size_t i = 0; i < req.probes.size(); ++i) {
        const int s = int(std::lround(1.0 / req.dt));
        const std::vector<int> grid = {req.units_short * s, req.units_long * s};
        const auto table = fk_path_table(
            model, pool, req.probes[i], [&](const VorticityField& w) { return req.potential.value(w); },
            [](const VorticityField&) { return 1.0; }, grid, req.dt, req.ensemble, req.seed,
            req.stream_salt + 1000 * i);
        std::vector<double> c0(table.size()), c1(table.size());
        for (size_t p = 0; p < table.size(); ++p) {
            c0[p] = table[p][0];
            c1[p] = table[p][1];
        }
        raw_short[i] = mean_of(c0) / std::pow(req.lambda, req.units_short);
        raw_long[i] = mean_of(c1) / std::pow(req.lambda, req.units_long);
        se_long[i] = se_of(c1, mean_of(c1)) / std::pow(req.lambda, req.units_long);
    }
    out.values.resize(raw_long.size());
    out.se.resize(raw_long.size());
    out.values_short.resize(raw_long.size());
    for (size_t i = 0; i < raw_long.size(); ++i) {
        out.values[i] = raw_long[i] / raw_long[0];
        out.values_short[i] = raw_short[i] / raw_short[0];
        out.se[i] = se_long[i] / raw_long[0];
        const double drift = std::abs(out.values[i] - out.values_short[i]) /
                             std::max(1e-300, std::abs(out.values[i]));
        out.max_drift = std::max(out.max_drift, drift);
    }
    out.stabilized = out.max_drift <= 0.10;
    return out;
}

CloudEstimate eigenmeasure_estimate(const FlowModel& model, const ParallelMap& pool, const CloudRequest& req) {
    const auto run = cloning_run(model, pool, req.initial, req.potential, req.units, req.dt, req.ensemble,
                                 req.seed, req.stream_salt);
    CloudEstimate out;
    out.unit_log_means = run.unit_log_means;
    for (const Observable& f : req.report) {
        std::vector<double> vals(run.cloud.size());
        for (size_t p = 0; p < run.cloud.size(); ++p) vals[p] = f.value(run.cloud[p]);
        const double m = mean_of(vals);
        out.moments.push_back({m, se_of(vals, m)});
    }
    std::vector<int> anc = run.ancestors;
    std::sort(anc.begin(), anc.end());
    out.ancestor_fraction =
        double(std::unique(anc.begin(), anc.end()) - anc.begin()) / double(req.ensemble);
    out.collapse_warning = out.ancestor_fraction < 0.01;
    return out;
}

// ---------------------------------------------------------------------------
// Uniform Feller modulus
// ---------------------------------------------------------------------------

FellerReport uniform_feller_modulus(const FlowModel& model, const ParallelMap& pool, const FellerRequest& req) {
    const int s = int(std::lround(1.0 / req.dt));
    std::vector<int> grid;
    for (double t : req.times) grid.push_back(int(std::lround(t * s)));

    auto potential = [&](const VorticityField& w) { return req.potential.value(w); };
    auto terminal = [&](const VorticityField& w) { return req.terminal.value(w); };
    auto ones = [](const VorticityField&) { return 1.0; };

    // denominator: sup over a probe set in the R0 ball of the weighted mass
    const CounterRng probe_rng(req.seed, 7001);
    std::vector<double> normalizer(grid.size(), 0.0);
    for (int q = 0; q < req.normalizer_probes; ++q) {
        const ScalarField probe =
            sample_h2_vorticity(model.lattice, probe_rng, uint64_t(q), req.normalizer_radius);
        const auto tab = fk_path_table(model, pool, probe, potential, ones, grid, req.dt, req.ensemble,
                                       req.seed, req.stream_salt + 50000 + 100 * uint64_t(q));
        for (size_t j = 0; j < grid.size(); ++j) {
            double m = 0.0;
            for (const auto& row : tab) m += row[j];
            normalizer[j] = std::max(normalizer[j], m / double(tab.size()));
        }
    }

    FellerReport rep;
    const CounterRng pair_rng(req.seed, 7002);
    ScalarField dir = sample_h2_vorticity(model.lattice, pair_rng, 999, 1.0);
    dir *= 1.0 / velocity_norm(dir);

    auto pair_modulus = [&](const ScalarField& a, const ScalarField& b, uint64_t salt, double& se_out) {
        const auto ta = fk_path_table(model, pool, a, potential, terminal, grid, req.dt, req.ensemble,
                                      req.seed, salt);
        const auto tb = fk_path_table(model, pool, b, potential, terminal, grid, req.dt, req.ensemble,
                                      req.seed, salt); // common random numbers
        double best = 0.0;
        se_out = 0.0;
        for (size_t j = 0; j < grid.size(); ++j) {
            std::vector<double> diff(ta.size());
            for (size_t p = 0; p < ta.size(); ++p) diff[p] = ta[p][j] - tb[p][j];
            const double m = mean_of(diff);
            const double se = se_of(diff, m);
            const double osc = std::abs(m) / normalizer[j];
            if (osc >= best) {
                best = osc;
                se_out = se / normalizer[j];
            }
        }
        return best;
    };

    // structural zero for an identical pair
    {
        const ScalarField base = sample_h2_vorticity(model.lattice, pair_rng, 0, req.pair_radius);
        double se = 0.0;
        rep.identical_pair_modulus = pair_modulus(base, base, req.stream_salt + 90000, se);
    }

    std::vector<double> log_sep, log_mod;
    for (int j = 0; j < req.pairs; ++j) {
        const double frac = req.pairs == 1 ? 0.0 : double(j) / double(req.pairs - 1);
        const double sep = req.separation_min * std::pow(req.separation_max / req.separation_min, frac);
        const ScalarField base = sample_h2_vorticity(model.lattice, pair_rng, 100 + uint64_t(j), req.pair_radius);
        ScalarField other = base;
        other.axpy(sep, dir);

        FellerPair entry;
        entry.separation = sep;
        entry.modulus = pair_modulus(base, other, req.stream_salt + 10000 * uint64_t(j + 1), entry.se);
        entry.excluded = entry.modulus <= 2.0 * entry.se;
        if (!entry.excluded) {
            log_sep.push_back(std::log(sep));
            log_mod.push_back(std::log(std::max(entry.modulus, 1e-300)));
        }
        rep.pairs.push_back(entry);
    }
    rep.used_pairs = int(log_sep.size());
    if (rep.used_pairs >= 3) {
        rep.holder_exponent = ls_slope(log_sep, log_mod);
        rep.exponent_se = ls_slope_se(log_sep, log_mod);
    }
    return rep;
}

// ---------------------------------------------------------------------------
// Occupation measures and the rate function
// ---------------------------------------------------------------------------

OccupationStats occupation_stats(const TrajectoryRecord& traj, const std::vector<Observable>& observables) {
    OccupationStats out;
    out.horizon = traj.steps() * traj.dt;
    const int batches = std::min(10, std::max(1, traj.steps() / 8));
    for (const Observable& f : observables) {
        double acc = 0.0;
        std::vector<double> batch_acc(size_t(batches), 0.0), batch_len(size_t(batches), 0.0);
        for (int k = 0; k < traj.steps(); ++k) {
            const double cell =
                0.5 * traj.dt * (f.value(traj.state(k)) + f.value(traj.state(k + 1)));
            acc += cell;
            const int b = std::min(batches - 1, k * batches / traj.steps());
            batch_acc[size_t(b)] += cell;
            batch_len[size_t(b)] += traj.dt;
        }
        std::vector<double> means(static_cast<size_t>(batches));
        for (int b = 0; b < batches; ++b) means[size_t(b)] = batch_acc[size_t(b)] / batch_len[size_t(b)];
        const double m = acc / out.horizon;
        out.values.push_back({m, batches > 1 ? se_of(means, mean_of(means)) : 0.0});
    }
    return out;
}

Estimate occupation_average(const FlowModel& model, const VorticityField& initial, double horizon,
                            double dt, uint64_t seed, uint64_t stream, const Observable& f,
                            double batch_length) {
    const int steps = int(std::lround(horizon / dt));
    const auto noise = NoisePath::gaussian(seed, stream, dt, steps, model.channels());
    Workspace& ws = thread_workspace(model.lattice);
    const int batch_steps = std::max(1, int(std::lround(batch_length / dt)));
    std::vector<double> batches;
    double acc = 0.0, total = 0.0, prev = 0.0;
    integrate_observe(ws, model, initial, noise, [&](int k, const VorticityField& w) {
        const double val = f.value(w);
        if (k > 0) {
            const double cell = 0.5 * dt * (prev + val);
            acc += cell;
            total += cell;
            if (k % batch_steps == 0) {
                batches.push_back(acc / (batch_steps * dt));
                acc = 0.0;
            }
        }
        prev = val;
    });
    const double m = total / (steps * dt);
    const double se = batches.size() > 1 ? se_of(batches, mean_of(batches)) : 0.0;
    return {m, se};
}

RateFunctionEstimate scgf_and_rate(const FlowModel& model, const ParallelMap& pool, const ScgfRequest& req) {
    const double vmax = std::max(std::abs(req.direction.min_value()), std::abs(req.direction.max_value()));
    for (size_t i = 0; i < req.thetas.size(); ++i) {
        if (std::abs(req.thetas[i]) * vmax > 2.0 + 1e-12)
            throw ValidationError("theta grid too wide: |theta| sup|V| must stay below 2");
        const double mirror = req.thetas[req.thetas.size() - 1 - i];
        if (std::abs(req.thetas[i] + mirror) > 1e-12)
            throw ValidationError("theta grid must be symmetric around zero");
    }

    RateFunctionEstimate out;
    out.thetas = req.thetas;
    for (double theta : req.thetas) {
        if (theta == 0.0) {
            // weights are identically one: lambda = 1 with no sampling error
            out.scgf.push_back(0.0);
            out.scgf_se.push_back(0.0);
            continue;
        }
        EigenvalueRequest er = req.eigen;
        er.potential = req.direction.scaled(theta);
        er.stream_salt = req.eigen.stream_salt + uint64_t((theta + 8.0) * 1e6);
        const auto est = eigenvalue_estimate(model, pool, er);
        out.scgf.push_back(est.log_lambda);
        out.scgf_se.push_back(est.log_se);
    }

    for (size_t j = 1; j + 1 < out.scgf.size(); ++j) {
        const double d2 = out.scgf[j + 1] - 2.0 * out.scgf[j] + out.scgf[j - 1];
        const double se = std::sqrt(out.scgf_se[j + 1] * out.scgf_se[j + 1] +
                                    4.0 * out.scgf_se[j] * out.scgf_se[j] +
                                    out.scgf_se[j - 1] * out.scgf_se[j - 1]);
        if (d2 < -3.0 * se) out.convex_within_error = false;
    }

    const size_t mid = req.thetas.size() / 2;
    if (req.thetas.size() >= 3) {
        const double dtheta = req.thetas[mid + 1] - req.thetas[mid - 1];
        out.slope_at_zero = (out.scgf[mid + 1] - out.scgf[mid - 1]) / dtheta;
        out.slope_se = std::sqrt(out.scgf_se[mid + 1] * out.scgf_se[mid + 1] +
                                 out.scgf_se[mid - 1] * out.scgf_se[mid - 1]) / dtheta;
    }

    // Legendre transform on a grid spanning the range of V
    const double lo = req.direction.min_value(), hi = req.direction.max_value();
    for (int i = 0; i < req.ell_count; ++i) {
        const double ell = lo + (hi - lo) * double(i) / double(req.ell_count - 1);
        double best = -1e300;
        size_t arg = 0;
        for (size_t j = 0; j < req.thetas.size(); ++j) {
            const double v = req.thetas[j] * ell - out.scgf[j];
            if (v > best) {
                best = v;
                arg = j;
            }
        }
        out.ell.push_back(ell);
        out.rate.push_back(best);
        out.rate_bounded.push_back(arg != 0 && arg != req.thetas.size() - 1);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Growth ratios
// ---------------------------------------------------------------------------

GrowthReport growth_ratio_report(const FlowModel& model, const ParallelMap& pool, const GrowthRequest& req) {
    GrowthReport rep;
    rep.times = req.times;
    rep.gamma = req.gamma > 0.0 ? req.gamma : 1.0 / (8.0 * model.injection.forcing().noise_intensity());
    const int s = int(std::lround(1.0 / req.dt));
    std::vector<int> grid;
    for (double t : req.times) grid.push_back(int(std::lround(t * s)));

    auto potential = [&](const VorticityField& w) { return req.potential.value(w); };
    auto ones = [](const VorticityField&) { return 1.0; };
    auto poly = [&](const VorticityField& w) {
        return 1.0 + std::pow(velocity_norm(w) * velocity_norm(w), req.moment_m);
    };
    auto gauss = [&](const VorticityField& w) {
        const double n = velocity_norm(w);
        return std::exp(rep.gamma * n * n);
    };

    const CounterRng probe_rng(req.seed, 8001);
    std::vector<double> norm_t(grid.size(), 0.0), poly_t(grid.size(), 0.0), exp_t(grid.size(), 0.0);
    for (int q = 0; q < req.probes; ++q) {
        const ScalarField probe =
            q == 0 ? ScalarField(model.lattice)
                   : sample_h2_vorticity(model.lattice, probe_rng, uint64_t(q), req.normalizer_radius);
        const uint64_t salt = req.stream_salt + 1000 * uint64_t(q);
        const auto t1 = fk_path_table(model, pool, probe, potential, ones, grid, req.dt, req.ensemble,
                                      req.seed, salt);
        const auto tp = fk_path_table(model, pool, probe, potential, poly, grid, req.dt, req.ensemble,
                                      req.seed, salt);
        const auto tg = fk_path_table(model, pool, probe, potential, gauss, grid, req.dt, req.ensemble,
                                      req.seed, salt);
        const double wp = poly(probe), wg = gauss(probe);
        for (size_t j = 0; j < grid.size(); ++j) {
            double m1 = 0.0, mp = 0.0, mg = 0.0;
            for (size_t p = 0; p < t1.size(); ++p) {
                m1 += t1[p][j];
                mp += tp[p][j];
                mg += tg[p][j];
            }
            norm_t[j] = std::max(norm_t[j], m1 / double(t1.size()));
            poly_t[j] = std::max(poly_t[j], mp / double(t1.size()) / wp);
            exp_t[j] = std::max(exp_t[j], mg / double(t1.size()) / wg);
        }
    }
    for (size_t j = 0; j < grid.size(); ++j) {
        rep.poly_ratio.push_back(poly_t[j] / norm_t[j]);
        rep.exp_ratio.push_back(exp_t[j] / norm_t[j]);
    }
    auto bounded = [](const std::vector<double>& curve) {
        double head = 0.0;
        for (size_t j = 0; j + 1 < curve.size(); ++j) head = std::max(head, curve[j]);
        return curve.back() <= 1.10 * head + 1e-12;
    };
    rep.poly_bounded = bounded(rep.poly_ratio);
    rep.exp_bounded = bounded(rep.exp_ratio);
    return rep;
}

} // namespace dnsl
