#include "dnsl/malliavin.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace dnsl {

int unit_steps(double dt) {
    const long s = std::lround(1.0 / dt);
    if (std::abs(s * dt - 1.0) > 1e-9 || s < 2 || s % 2 != 0)
        throw ValidationError("control blocks need dt to divide 1/2 exactly");
    return int(s);
}

int unit_steps(const TrajectoryRecord& traj) { return unit_steps(traj.dt); }

namespace {

Eigen::Map<const Eigen::VectorXd> as_vec(const ScalarField& f) {
    return {f.data(), f.dim()};
}

/// A* x through the stored factor: value(cell k, channel i) = <F_(k,i), x>/sqrt(dt).
void add_adjoint_values(const ControlFactor& f, const ScalarField& x, ControlPath& path) {
    const Eigen::VectorXd vals = f.f.transpose() * as_vec(x) / std::sqrt(f.dt);
    const int d = f.channels;
    for (int k = 0; k < f.cells(); ++k)
        for (int i = 0; i < d; ++i) path.cell(k)[i] += vals[Eigen::Index(k) * d + i];
}

/// Shared per-block data for the control derivative passes.
struct BlockWork {
    const TangentOps* ops = nullptr;
    const BlockControl* ctl = nullptr;
    int a = 0, mid = 0;                      // active half window [a, mid)
    std::vector<ScalarField> tangent_chain;  // J_{a,m} rho_n
    std::vector<ScalarField> response_chain; // (A v)_m states
    std::vector<ScalarField> adjoint_chain;  // J*_{m,mid} x
};

BlockWork make_block_work(const TangentOps& ops, const BlockControl& ctl, int steps_per_unit) {
    BlockWork w;
    w.ops = &ops;
    w.ctl = &ctl;
    w.a = ctl.block * steps_per_unit;
    w.mid = w.a + steps_per_unit / 2;
    const size_t h = size_t(w.mid - w.a);

    w.tangent_chain.reserve(h + 1);
    w.tangent_chain.push_back(ctl.rho_curve.front());
    w.response_chain.reserve(h + 1);
    w.response_chain.emplace_back(ops.model().lattice);
    for (int m = w.a; m < w.mid; ++m) {
        ScalarField jt = w.tangent_chain.back();
        ops.tangent_step(jt, m);
        w.tangent_chain.push_back(std::move(jt));

        ScalarField resp = w.response_chain.back();
        ops.forced_tangent_step(resp, m, ctl.path.cell(m - w.a), 1.0);
        w.response_chain.push_back(std::move(resp));
    }

    w.adjoint_chain.assign(h + 1, ScalarField(ops.model().lattice));
    w.adjoint_chain[h] = ctl.solve_x;
    for (int m = w.mid - 1; m >= w.a; --m) {
        ScalarField prev = w.adjoint_chain[size_t(m - w.a + 1)];
        ops.tangent_step_adjoint(prev, m);
        w.adjoint_chain[size_t(m - w.a)] = std::move(prev);
    }
    return w;
}

/// States eta_m of the perturbation injected by a unit bump of channel ch at
/// step r, indexed by m - a for m = r+1 .. mid (entries below stay empty).
std::vector<ScalarField> eta_states(const BlockWork& w, int r, int ch) {
    const TangentOps& ops = *w.ops;
    std::vector<ScalarField> eta(size_t(w.mid - w.a) + 1);
    ScalarField cur = ops.injected_channel(ch);
    eta[size_t(r + 1 - w.a)] = cur;
    for (int m = r + 1; m < w.mid; ++m) {
        ops.tangent_step(cur, m);
        eta[size_t(m + 1 - w.a)] = cur;
    }
    return eta;
}

/// Noise derivative of a linearized chain c_{m+1} = L_m c_m (+ fixed source):
/// one forward sweep with the bilinear coupling of eta against the chain.
ScalarField chain_derivative(Workspace& ws, const BlockWork& w, const std::vector<ScalarField>& chain,
                             const std::vector<ScalarField>& eta, int r) {
    const TangentOps& ops = *w.ops;
    const double dt = ops.dt();
    ScalarField zeta(ops.model().lattice);
    for (int m = r + 1; m < w.mid; ++m) {
        ScalarField src = linearized_advect(ws, eta[size_t(m - w.a)], chain[size_t(m - w.a)]);
        src += linearized_advect(ws, ops.grids(m), zeta);
        zeta.axpy(-dt, src);
        for (int j = 0; j < zeta.dim(); ++j) zeta[j] *= ops.decay()[j];
    }
    return zeta;
}

/// Noise derivative of the adjoint-response values: one backward sweep
/// producing the path (D A* x)(m) for every cell of the half block.
ControlPath adjoint_derivative_values(Workspace& ws, const BlockWork& w,
                                      const std::vector<ScalarField>& eta, int r) {
    const TangentOps& ops = *w.ops;
    const FlowModel& model = ops.model();
    const double dt = ops.dt();
    ControlPath vals(w.a, dt, model.channels(), w.mid - w.a);
    ScalarField delta(model.lattice);
    for (int m = w.mid - 1; m >= w.a; --m) {
        ScalarField tmp = delta; // delta = D(J*_{m+1,mid}) x on entry
        for (int j = 0; j < tmp.dim(); ++j) tmp[j] *= ops.decay()[j];
        const auto row = model.injection.adjoint(tmp);
        std::copy(row.begin(), row.end(), vals.cell(m - w.a));

        ScalarField next = tmp;
        next.axpy(-dt, linearized_advect_adjoint(ws, ops.grids(m), tmp));
        if (m >= r + 1) {
            // sensitivity of this step's operator against the frozen chain
            ScalarField ez = w.adjoint_chain[size_t(m + 1 - w.a)];
            for (int j = 0; j < ez.dim(); ++j) ez[j] *= ops.decay()[j];
            const FlowGrids eg = make_flow_grids(ws, eta[size_t(m - w.a)]);
            next.axpy(-dt, linearized_advect_adjoint(ws, eg, ez));
        }
        delta = std::move(next);
    }
    return vals;
}

/// Full noise derivative of the block control at (step r, channel ch):
///   D v = (D A*) x + A* (M+beta)^{-1} [ (D J) rho - (D A) v - A (D A*) x ].
ControlPath control_derivative_path(Workspace& ws, const BlockWork& w, int r, int ch) {
    const TangentOps& ops = *w.ops;
    const FlowModel& model = ops.model();
    ControlPath path(w.a, ops.dt(), model.channels(), w.mid - w.a);
    if (!model.nonlinear || r >= w.mid - 1) return path; // operators are noise-free

    const auto eta = eta_states(w, r, ch);
    const ScalarField d_tangent = chain_derivative(ws, w, w.tangent_chain, eta, r);
    const ScalarField d_response = chain_derivative(ws, w, w.response_chain, eta, r);
    const ControlPath dstar_vals = adjoint_derivative_values(ws, w, eta, r);
    const ScalarField a_dstar = ops.noise_response(dstar_vals, w.a, w.mid);

    ScalarField rhs = d_tangent;
    rhs -= d_response;
    rhs -= a_dstar;
    const ScalarField dx = regularized_solve(w.ctl->factor, w.ctl->beta, rhs);

    path = dstar_vals;
    add_adjoint_values(w.ctl->factor, dx, path);
    return path;
}

BlockControl make_block(TangentOps& ops, const TrajectoryRecord& traj, int block,
                        const ScalarField& rho_n, double beta, int s_per_unit, bool full = true) {
    if (beta <= 0.0) throw ValidationError("control construction requires beta > 0");
    const int a = block * s_per_unit;
    const int mid = a + s_per_unit / 2;
    const int end = full ? (block + 1) * s_per_unit : mid;
    if (end > traj.steps()) throw RangeError("control block outside the trajectory horizon");

    BlockControl ctl;
    ctl.block = block;
    ctl.beta = beta;
    ctl.factor = ops.factor(a, mid);
    const ScalarField jrho = ops.tangent(rho_n, a, mid);
    ctl.tangent_mid_norm = norm(jrho);
    ctl.solve_x = regularized_solve(ctl.factor, beta, jrho);
    ctl.path = ControlPath(a, traj.dt, ops.model().channels(), s_per_unit);
    add_adjoint_values(ctl.factor, ctl.solve_x, ctl.path); // upper half stays zero

    ctl.rho_curve.reserve(size_t(s_per_unit) + 1);
    ctl.rho_curve.push_back(rho_n);
    ScalarField r = rho_n;
    for (int m = a; m < end; ++m) {
        ops.forced_tangent_step(r, m, ctl.path.cell(m - a), -1.0);
        ctl.rho_curve.push_back(r);
    }
    return ctl;
}

} // namespace

// ---------------------------------------------------------------------------
// Control process
// ---------------------------------------------------------------------------

ControlProcess ControlProcess::build(Workspace& ws, const FlowModel& model, const TrajectoryRecord& traj,
                                     const ScalarField& xi, double beta, int blocks) {
    const int s = unit_steps(traj);
    if (blocks * s > traj.steps()) throw RangeError("trajectory shorter than the requested block count");
    ControlProcess p;
    p.beta_ = beta;
    p.steps_per_unit_ = s;
    TangentOps ops(ws, model, traj);
    ScalarField rho = xi;
    for (int n = 0; n < blocks; ++n) {
        p.blocks_.push_back(make_block(ops, traj, n, rho, beta, s));
        rho = p.blocks_.back().rho_curve.back();
    }
    return p;
}

const VorticityField& ControlProcess::residual(int n) const {
    if (n == blocks()) return blocks_.back().rho_curve.back();
    return blocks_[size_t(n)].rho_curve.front();
}

const VorticityField& ControlProcess::residual_at_step(int step) const {
    const int n = std::min(step / steps_per_unit_, blocks() - 1);
    return blocks_[size_t(n)].rho_curve[size_t(step - n * steps_per_unit_)];
}

ControlPath build_control_block(Workspace& ws, const FlowModel& model, const TrajectoryRecord& traj,
                                int block, const ScalarField& rho_n, double beta) {
    TangentOps ops(ws, model, traj);
    return make_block(ops, traj, block, rho_n, beta, unit_steps(traj)).path;
}

std::vector<VorticityField> propagate_residual(Workspace& ws, const FlowModel& model,
                                               const TrajectoryRecord& traj, int block,
                                               const ScalarField& rho_n, const ControlPath& v) {
    const int s = unit_steps(traj);
    const int a = block * s;
    TangentOps ops(ws, model, traj);
    std::vector<VorticityField> curve;
    curve.reserve(size_t(s) + 1);
    curve.push_back(rho_n);
    ScalarField r = rho_n;
    for (int m = a; m < a + s; ++m) {
        const int cell = m - v.start_index;
        const double* theta = (cell >= 0 && cell < v.cells()) ? v.cell(cell) : nullptr;
        ops.forced_tangent_step(r, m, theta, -1.0);
        curve.push_back(r);
    }
    return curve;
}

ScalarField malliavin_tangent_derivative(Workspace& ws, const FlowModel& model, const TrajectoryRecord& traj,
                                         double r, int ch, double s, double t, const ScalarField& xi) {
    const int ri = traj.index_of(r);
    const int si = traj.index_of(s);
    const int ti = traj.index_of(t);
    if (ch < 0 || ch >= model.channels()) throw RangeError("noise channel out of range");
    return TangentOps(ws, model, traj).tangent_noise_derivative(ri, ch, si, ti, xi);
}

ControlPath malliavin_control_derivative(Workspace& ws, const FlowModel& model, const TrajectoryRecord& traj,
                                         const BlockControl& ctl, int r_step, int ch) {
    TangentOps ops(ws, model, traj);
    const BlockWork work = make_block_work(ops, ctl, unit_steps(traj));
    if (r_step < work.a || r_step >= work.mid)
        throw RangeError("control derivative step must lie in the active half block");
    if (ch < 0 || ch >= model.channels()) throw RangeError("noise channel out of range");
    return control_derivative_path(ws, work, r_step, ch);
}

double skorokhod_integral(Workspace& ws, const FlowModel& model, const TrajectoryRecord& traj,
                          const ControlProcess& process, int first_block, int last_block) {
    const int s = process.steps_per_unit();
    TangentOps ops(ws, model, traj);
    double total = 0.0;
    for (int n = first_block; n <= last_block; ++n) {
        const BlockControl& ctl = process.block(n);
        const int a = n * s;
        const int mid = a + s / 2;
        double ito = 0.0;
        for (int k = a; k < mid; ++k) {
            const double* v = ctl.path.cell(k - a);
            const double* dw = traj.noise.row(k);
            for (int i = 0; i < model.channels(); ++i) ito += v[i] * dw[i];
        }
        double trace = 0.0;
        if (model.nonlinear) {
            const BlockWork work = make_block_work(ops, ctl, s);
            for (int k = a; k < mid - 1; ++k)
                for (int i = 0; i < model.channels(); ++i)
                    trace += control_derivative_path(ws, work, k, i).cell(k - a)[i];
        }
        total += ito - traj.dt * trace;
    }
    return total;
}

// ---------------------------------------------------------------------------
// Residual decay experiment
// ---------------------------------------------------------------------------

DecayTable residual_decay_experiment(const FlowModel& model, const ParallelMap& pool, const DecayRequest& req) {
    const int nb = int(req.betas.size());
    const int rows = req.n_max + 1;
    const int s = unit_steps(req.dt);
    const int h = s / 2;
    const double root_dt = std::sqrt(req.dt);

    // per-replica fourth powers of the residual norms, slot-indexed
    std::vector<std::vector<double>> m4(size_t(req.trajectories),
                                        std::vector<double>(size_t(nb) * rows, 0.0));

    pool.run(req.trajectories, [&](std::ptrdiff_t p) {
        Workspace& ws = thread_workspace(model.lattice);
        const auto noise = NoisePath::gaussian(req.seed, req.stream_salt + uint64_t(p), req.dt,
                                               req.n_max * s, model.channels());
        const auto traj = simulate(ws, model, req.initial, double(req.n_max), req.dt, noise);
        TangentOps ops(ws, model, traj);

        std::vector<ScalarField> rho(size_t(nb), req.direction);
        auto& out = m4[size_t(p)];
        for (int n = 0; n < req.n_max; ++n) {
            for (int j = 0; j < nb; ++j) out[size_t(j) * rows + n] = std::pow(dot(rho[j], rho[j]), 2);
            const int a = n * s, mid = a + h, end = (n + 1) * s;
            const ControlFactor f = ops.factor(a, mid); // shared across the beta sweep
            for (int j = 0; j < nb; ++j) {
                const ScalarField jrho = ops.tangent(rho[size_t(j)], a, mid);
                const ScalarField x = regularized_solve(f, req.betas[size_t(j)], jrho);
                const Eigen::VectorXd vals = f.f.transpose() * as_vec(x) / root_dt;
                ScalarField r = rho[size_t(j)];
                for (int m = a; m < end; ++m) {
                    const double* theta = m < mid ? vals.data() + (m - a) * model.channels() : nullptr;
                    ops.forced_tangent_step(r, m, theta, -1.0);
                }
                rho[size_t(j)] = std::move(r);
            }
        }
        for (int j = 0; j < nb; ++j) out[size_t(j) * rows + req.n_max] = std::pow(dot(rho[j], rho[j]), 2);
    });

    DecayTable table;
    table.condition_h_ok = check_condition_h(model.injection.forcing()).satisfied;

    auto mean_of = [&](int j, int n, const std::vector<int>& idx) {
        double acc = 0.0;
        for (int p : idx) acc += m4[size_t(p)][size_t(j) * rows + n];
        return acc / double(idx.size());
    };
    auto rate_of = [&](int j, const std::vector<int>& idx, double& ratio) {
        // least-squares slope of log E|rho_n|^4 against n; non-finite moments
        // (blown-up samples) poison the fit and are reported as +inf
        double sx = 0, sy = 0, sxx = 0, sxy = 0;
        for (int n = 0; n <= req.n_max; ++n) {
            const double m = std::max(mean_of(j, n, idx), 1e-300);
            if (!std::isfinite(m)) {
                ratio = std::numeric_limits<double>::infinity();
                return std::numeric_limits<double>::infinity();
            }
            const double x = n, y = std::log(m);
            sx += x; sy += y; sxx += x * x; sxy += x * y;
        }
        const double k = rows;
        ratio = mean_of(j, req.n_max, idx) / std::max(mean_of(j, 0, idx), 1e-300);
        return std::exp((k * sxy - sx * sy) / (k * sxx - sx * sx));
    };

    std::vector<int> all(size_t(req.trajectories));
    for (int p = 0; p < req.trajectories; ++p) all[size_t(p)] = p;
    const CounterRng boot_rng(req.seed ^ 0xB007u, 999);

    double best_rate = 2.0;
    for (int j = 0; j < nb; ++j) {
        BetaDecayResult r;
        r.beta = req.betas[size_t(j)];
        r.moment4.resize(rows);
        r.stderr4.resize(rows);
        for (int n = 0; n < rows; ++n) {
            const double m = mean_of(j, n, all);
            double var = 0.0;
            for (int p = 0; p < req.trajectories; ++p) {
                const double d = m4[size_t(p)][size_t(j) * rows + n] - m;
                var += d * d;
            }
            r.moment4[size_t(n)] = m;
            r.stderr4[size_t(n)] = std::sqrt(var / req.trajectories / std::max(1, req.trajectories - 1));
        }
        r.rate = rate_of(j, all, r.final_over_initial);

        std::vector<double> rates, ratios;
        rates.reserve(size_t(req.bootstrap));
        for (int b = 0; b < req.bootstrap; ++b) {
            std::vector<int> idx(size_t(req.trajectories));
            for (int p = 0; p < req.trajectories; ++p)
                idx[size_t(p)] =
                    int(boot_rng.uniform(uint64_t(b), (uint64_t(j) << 32) | uint64_t(p)) * req.trajectories);
            double ratio = 0.0;
            rates.push_back(rate_of(j, idx, ratio));
            ratios.push_back(ratio);
        }
        std::sort(rates.begin(), rates.end());
        std::sort(ratios.begin(), ratios.end());
        const size_t lo = size_t(0.025 * req.bootstrap), hi = size_t(0.975 * req.bootstrap);
        r.rate_lo = rates[lo];
        r.rate_hi = rates[std::min(hi, rates.size() - 1)];
        r.ratio_hi = ratios[std::min(hi, ratios.size() - 1)];
        r.decaying = r.rate_hi < 1.0 && r.ratio_hi < 1.0;
        if (r.rate < best_rate) {
            best_rate = r.rate;
            table.best = j;
        }
        table.any_decaying = table.any_decaying || r.decaying;
        table.per_beta.push_back(std::move(r));
    }
    return table;
}

// ---------------------------------------------------------------------------
// Gradient decomposition
// ---------------------------------------------------------------------------

GradientDecomposition gradient_decomposition(const FlowModel& model, const ParallelMap& pool,
                                             const GradientRequest& req) {
    const int blocks = int(std::lround(req.horizon));
    if (std::abs(req.horizon - blocks) > 1e-9 || blocks < 1)
        throw ValidationError("gradient decomposition horizon must be a whole number of unit blocks");
    const int steps = blocks * unit_steps(req.dt);

    struct Row {
        double i1, i2, i3, fd;
    };
    std::vector<Row> rows(size_t(req.replicas));

    pool.run(req.replicas, [&](std::ptrdiff_t p) {
        Workspace& ws = thread_workspace(model.lattice);
        const auto noise = NoisePath::gaussian(req.seed, req.stream_salt + uint64_t(p), req.dt, steps,
                                               model.channels());
        const auto traj = simulate(ws, model, req.initial, double(blocks), req.dt, noise);
        const auto process = ControlProcess::build(ws, model, traj, req.direction, req.beta, blocks);

        // trapezoid potential integral and the residual pairings
        double pot = 0.0, grad_pot = 0.0;
        for (int k = 0; k <= steps; ++k) {
            const double wgt = (k == 0 || k == steps) ? 0.5 : 1.0;
            pot += wgt * req.potential.value(traj.state(k));
            grad_pot += wgt * req.potential.directional(traj.state(k), process.residual_at_step(k));
        }
        pot *= req.dt;
        grad_pot *= req.dt;
        const double weight = std::exp(pot);
        const double psi_end = req.terminal.value(traj.final_state());
        const double dpsi_end = req.terminal.directional(traj.final_state(), process.residual(blocks));
        const double sk = skorokhod_integral(ws, model, traj, process, 0, blocks - 1);

        // paired central difference of the weighted terminal functional
        auto weighted = [&](const ScalarField& w0) {
            double acc = 0.0, last_psi = 0.0;
            integrate_observe(ws, model, w0, noise, [&](int k, const VorticityField& w) {
                const double wgt = (k == 0 || k == steps) ? 0.5 : 1.0;
                acc += wgt * req.potential.value(w);
                if (k == steps) last_psi = req.terminal.value(w);
            });
            return std::exp(acc * req.dt) * last_psi;
        };
        ScalarField wp = req.initial, wm = req.initial;
        wp.axpy(req.fd_eps, req.direction);
        wm.axpy(-req.fd_eps, req.direction);
        const double fd = (weighted(wp) - weighted(wm)) / (2.0 * req.fd_eps);

        rows[size_t(p)] = {weight * psi_end * sk, weight * psi_end * grad_pot, weight * dpsi_end, fd};
    });

    GradientDecomposition out;
    out.replicas = req.replicas;
    auto finalize = [&](auto pick, double& mean, double& se) {
        double acc = 0.0;
        for (const Row& r : rows) acc += pick(r);
        mean = acc / req.replicas;
        double var = 0.0;
        for (const Row& r : rows) {
            const double d = pick(r) - mean;
            var += d * d;
        }
        se = std::sqrt(var / req.replicas / std::max(1, req.replicas - 1));
    };
    finalize([](const Row& r) { return r.i1; }, out.i1, out.se1);
    finalize([](const Row& r) { return r.i2; }, out.i2, out.se2);
    finalize([](const Row& r) { return r.i3; }, out.i3, out.se3);
    finalize([](const Row& r) { return r.i1 + r.i2 + r.i3; }, out.total, out.se_total);
    finalize([](const Row& r) { return r.fd; }, out.fd, out.se_fd);
    finalize([](const Row& r) { return r.i1 + r.i2 + r.i3 - r.fd; }, out.diff, out.se_diff);
    return out;
}

} // namespace dnsl
