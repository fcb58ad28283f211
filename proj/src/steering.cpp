#include "dnsl/steering.hpp"

#include <cmath>

#include "dnsl/forcing.hpp"

namespace dnsl {

namespace {

/// Control coefficients -> per-step increments; the step map then injects
/// the force exactly like a noise increment dt * Q theta.
NoisePath control_to_increments(const Eigen::MatrixXd& control, int steps, double dt, int channels) {
    const int segments = int(control.rows());
    std::vector<double> data(size_t(steps) * channels);
    for (int k = 0; k < steps; ++k) {
        const int seg = std::min(segments - 1, k * segments / steps);
        for (int i = 0; i < channels; ++i) data[size_t(k) * channels + i] = dt * control(seg, i);
    }
    return NoisePath::from_data(dt, steps, channels, std::move(data));
}

/// 0.5 |K(w - w_target)|_{L2}^2 and its gradient field in the coefficient
/// dot product.
double terminal_cost(const ScalarField& w, const ScalarField& w_target, ScalarField* grad) {
    const Lattice& lat = w.lattice();
    double cost = 0.0;
    for (int i = 0; i < lat.dim(); ++i) {
        const double d = w[i] - w_target[i];
        cost += d * d / lat.norm2(i);
        if (grad) (*grad)[i] = 2.0 * M_PI * M_PI * 2.0 * d / lat.norm2(i) * 0.5;
    }
    return 0.5 * 2.0 * M_PI * M_PI * cost;
}

} // namespace

double steered_distance(Workspace& ws, const FlowModel& model, const SteeringProblem& problem,
                        const SteeringOptions& options, const Eigen::MatrixXd& control) {
    const int steps = int(std::lround(problem.horizon / options.dt));
    const auto noise = control_to_increments(control, steps, options.dt, model.channels());
    const ScalarField w0 = curl(problem.start);
    const ScalarField wt = curl(problem.target);
    const auto traj = simulate(ws, model, w0, problem.horizon, options.dt, noise);
    return std::sqrt(2.0 * terminal_cost(traj.final_state(), wt, nullptr));
}

SteeringResult steer(const FlowModel& model, const SteeringProblem& problem, const SteeringOptions& options) {
    Workspace ws(model.lattice);
    const int steps = int(std::lround(problem.horizon / options.dt));
    if (std::abs(steps * options.dt - problem.horizon) > 1e-9)
        throw ValidationError("steering horizon must be a multiple of dt");
    const int d = model.channels();
    const int segments = problem.segments;

    SteeringResult res;
    res.condition_h_warning = !check_condition_h(model.injection.forcing()).satisfied;
    if (options.initial_control.size() > 0) {
        if (options.initial_control.rows() != segments || options.initial_control.cols() != d)
            throw ValidationError("initial control must be segments x channels");
        res.control = options.initial_control;
    } else {
        res.control = Eigen::MatrixXd::Zero(segments, d);
    }

    const ScalarField w0 = curl(problem.start);
    const ScalarField wt = curl(problem.target);

    auto evaluate = [&](const Eigen::MatrixXd& control, TrajectoryRecord* out) {
        const auto noise = control_to_increments(control, steps, options.dt, d);
        auto traj = simulate(ws, model, w0, problem.horizon, options.dt, noise);
        const double cost = terminal_cost(traj.final_state(), wt, nullptr);
        if (out) *out = std::move(traj);
        return cost;
    };

    TrajectoryRecord traj;
    double cost = evaluate(res.control, &traj);
    res.objective_trace.push_back(cost);
    res.distance = std::sqrt(2.0 * cost);
    if (res.distance < problem.tolerance) {
        res.converged = true;
        return res;
    }

    double step_size = options.initial_step;
    for (res.iterations = 1; res.iterations <= options.max_iterations; ++res.iterations) {
        // adjoint sweep: terminal gradient pulled back through every step,
        // then accumulated per control segment
        ScalarField grad_field(model.lattice);
        terminal_cost(traj.final_state(), wt, &grad_field);
        TangentOps ops(ws, model, traj);
        const ControlPath adj = ops.noise_response_adjoint(grad_field, 0, steps);
        Eigen::MatrixXd grad = Eigen::MatrixXd::Zero(segments, d);
        for (int k = 0; k < steps; ++k) {
            const int seg = std::min(segments - 1, k * segments / steps);
            for (int i = 0; i < d; ++i) grad(seg, i) += options.dt * adj.cell(k)[i];
        }

        const double gnorm2 = grad.squaredNorm();
        if (gnorm2 == 0.0) break;

        // backtracking line search on the accepted objective
        bool accepted = false;
        while (step_size >= 1e-14) {
            const Eigen::MatrixXd candidate = res.control - step_size * grad;
            TrajectoryRecord cand_traj;
            const double cand_cost = evaluate(candidate, &cand_traj);
            if (cand_cost <= cost - options.armijo_slope * step_size * gnorm2) {
                res.control = candidate;
                cost = cand_cost;
                traj = std::move(cand_traj);
                accepted = true;
                break;
            }
            step_size *= 0.5;
        }
        if (!accepted) break;
        res.objective_trace.push_back(cost);
        res.distance = std::sqrt(2.0 * cost);
        if (res.distance < problem.tolerance) {
            res.converged = true;
            return res;
        }
        step_size *= 1.5;
    }
    res.distance = std::sqrt(2.0 * cost);
    return res;
}

Eigen::MatrixXd transfer_seed_control(const FlowModel& model, const SteeringProblem& problem,
                                      const SteeringOptions& options, int windows, int passes,
                                      double pump_amplitude) {
    Workspace ws(model.lattice);
    const int steps = int(std::lround(problem.horizon / options.dt));
    const int d = model.channels();
    const ScalarField w0 = curl(problem.start);
    const ScalarField wt = curl(problem.target);

    auto resid = [&](const Eigen::VectorXd& q) {
        std::vector<double> incr(size_t(steps) * d, 0.0);
        for (int k = 0; k < steps; ++k) {
            const int w = std::min(windows - 1, k * windows / steps);
            for (int i = 0; i < d; ++i) incr[size_t(k) * d + i] = options.dt * q[w * d + i];
        }
        const auto traj = simulate(ws, model, w0, problem.horizon, options.dt,
                                   NoisePath::from_data(options.dt, steps, d, incr));
        Eigen::VectorXd r(model.dim());
        for (int i = 0; i < model.dim(); ++i)
            r[i] = (traj.final_state()[i] - wt[i]) / std::sqrt(model.lattice->norm2(i));
        return r;
    };

    // saddle-breaking pump pulses: pair the sine and cosine branches in the
    // two leading windows so quadratic products reach both branches
    Eigen::VectorXd q = Eigen::VectorXd::Zero(windows * d);
    if (d >= 4) {
        q[0 * d + 0] = pump_amplitude;
        q[0 * d + 3] = -pump_amplitude;
        q[1 * d + 1] = pump_amplitude;
        q[1 * d + 2] = -pump_amplitude;
    } else {
        for (int i = 0; i < d; ++i) q[i] = pump_amplitude;
    }

    double lm = 1e-2;
    Eigen::VectorXd r = resid(q);
    for (int pass = 0; pass < passes; ++pass) {
        Eigen::MatrixXd jac(model.dim(), windows * d);
        const double h = 1e-4;
        for (int i = 0; i < windows * d; ++i) {
            Eigen::VectorXd qp = q;
            qp[i] += h;
            jac.col(i) = (resid(qp) - r) / h;
        }
        for (int tries = 0; tries < 12; ++tries) {
            Eigen::MatrixXd g = jac.transpose() * jac;
            g.diagonal().array() += lm;
            const Eigen::VectorXd dq = g.ldlt().solve(-jac.transpose() * r);
            const Eigen::VectorXd rn = resid(q + dq);
            if (rn.squaredNorm() < r.squaredNorm()) {
                q += dq;
                r = rn;
                lm = std::max(1e-8, 0.3 * lm);
                break;
            }
            lm *= 10.0;
        }
    }

    Eigen::MatrixXd control(problem.segments, d);
    for (int s = 0; s < problem.segments; ++s) {
        const int w = std::min(windows - 1, s * windows / problem.segments);
        for (int i = 0; i < d; ++i) control(s, i) = q[w * d + i];
    }
    return control;
}

IrreducibilityTable irreducibility_probe(const FlowModel& model, const ParallelMap& pool,
                                         const IrreducibilityRequest& req) {
    const int steps = int(std::lround(req.horizon / req.dt));
    IrreducibilityTable table;
    table.frequency.assign(req.starts.size(), std::vector<double>(req.targets.size(), 0.0));

    std::vector<ScalarField> w0s, wts;
    for (const auto& u : req.starts) w0s.push_back(curl(u));
    for (const auto& u : req.targets) wts.push_back(curl(u));

    for (size_t a = 0; a < req.starts.size(); ++a) {
        std::vector<int> hits(size_t(req.trials) * req.targets.size(), 0);
        pool.run(req.trials, [&](std::ptrdiff_t p) {
            Workspace& ws = thread_workspace(model.lattice);
            const auto noise = NoisePath::gaussian(req.seed, req.stream_salt + uint64_t(a) * 1000003 + uint64_t(p),
                                                   req.dt, steps, model.channels());
            ScalarField w = w0s[a];
            const Integrator stepper(model, req.dt);
            for (int k = 0; k < steps; ++k) stepper.step_in_place(ws, w, noise.row(k), k);
            for (size_t b = 0; b < wts.size(); ++b) {
                ScalarField diff = w;
                diff -= wts[b];
                const double dist = sobolev_norm(biot_savart(diff), 0.0);
                hits[size_t(p) * req.targets.size() + b] = dist < req.radius ? 1 : 0;
            }
        });
        for (size_t b = 0; b < req.targets.size(); ++b) {
            long c = 0;
            for (int p = 0; p < req.trials; ++p) c += hits[size_t(p) * req.targets.size() + b];
            table.frequency[a][b] = double(c) / req.trials;
        }
    }
    table.min_frequency = 1.0;
    for (const auto& row : table.frequency)
        for (double f : row) table.min_frequency = std::min(table.min_frequency, f);
    table.all_zero = true;
    for (const auto& row : table.frequency)
        for (double f : row)
            if (f > 0.0) table.all_zero = false;
    return table;
}

} // namespace dnsl
