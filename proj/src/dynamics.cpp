#include "dnsl/dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>

namespace dnsl {

NoisePath NoisePath::gaussian(uint64_t seed, uint64_t stream, double dt, int steps, int channels) {
    NoisePath p;
    p.dt_ = dt;
    p.steps_ = steps;
    p.channels_ = channels;
    p.seed_ = seed;
    p.stream_ = stream;
    p.data_.resize(size_t(steps) * channels);
    const CounterRng rng(seed, stream);
    const double scale = std::sqrt(dt);
    for (int k = 0; k < steps; ++k)
        for (int i = 0; i < channels; ++i) p.data_[size_t(k) * channels + i] = scale * rng.normal(k, i);
    return p;
}

NoisePath NoisePath::zero(double dt, int steps, int channels) {
    NoisePath p;
    p.dt_ = dt;
    p.steps_ = steps;
    p.channels_ = channels;
    p.data_.assign(size_t(steps) * channels, 0.0);
    return p;
}

NoisePath NoisePath::from_data(double dt, int steps, int channels, std::vector<double> increments) {
    if (increments.size() != size_t(steps) * channels)
        throw ValidationError("noise path: increment array dimensions must be steps x channels");
    NoisePath p;
    p.dt_ = dt;
    p.steps_ = steps;
    p.channels_ = channels;
    p.data_ = std::move(increments);
    return p;
}

NoisePath NoisePath::coarsened(int factor) const {
    if (steps_ % factor != 0) throw ValidationError("noise path: steps not divisible by coarsening factor");
    NoisePath p;
    p.dt_ = dt_ * factor;
    p.steps_ = steps_ / factor;
    p.channels_ = channels_;
    p.seed_ = seed_;
    p.stream_ = stream_;
    p.data_.assign(size_t(p.steps_) * channels_, 0.0);
    for (int k = 0; k < steps_; ++k)
        for (int i = 0; i < channels_; ++i) p.data_[size_t(k / factor) * channels_ + i] += data_[size_t(k) * channels_ + i];
    return p;
}

Integrator::Integrator(const FlowModel& model, double dt) : model_(&model), dt_(dt) {
    if (dt <= 0.0) throw ValidationError("integrator: dt must be positive");
    const Lattice& lat = *model.lattice;
    decay_.resize(lat.dim());
    for (int i = 0; i < lat.dim(); ++i) decay_[i] = std::exp(-model.viscosity * lat.norm2(i) * dt);
}

void Integrator::step_in_place(Workspace& ws, ScalarField& w, const double* dW, long step_index) const {
    const FlowModel& m = *model_;
    if (m.nonlinear) {
        const ScalarField b = advect(ws, biot_savart(w), w);
        w.axpy(-dt_, b);
    }
    if (dW != nullptr) m.injection.add_scaled(w, dW, 1.0);
    for (int i = 0; i < w.dim(); ++i) w[i] *= decay_[i];
    if (!w.finite()) {
        std::ostringstream os;
        os << "non-finite state after step " << step_index
           << "; the explicit advection term is unstable at this dt, reduce it";
        throw StepError(os.str(), step_index);
    }
}

int TrajectoryRecord::index_of(double t) const {
    const double r = t / dt;
    const long k = std::lround(r);
    if (std::abs(r - double(k)) > 1e-9 * std::max(1.0, std::abs(r)))
        throw RangeError("time is not on the trajectory step grid");
    if (k < 0 || k > steps()) throw RangeError("time outside the trajectory horizon");
    return int(k);
}

TrajectoryRecord simulate(Workspace& ws, const FlowModel& model, const VorticityField& w0,
                          double horizon, double dt, NoisePath noise) {
    const long steps = std::lround(horizon / dt);
    if (std::abs(steps * dt - horizon) > 1e-9 * std::max(1.0, horizon))
        throw ValidationError("simulate: horizon must be a multiple of dt");
    if (noise.steps() < steps) throw ValidationError("simulate: noise path shorter than horizon");
    if (noise.channels() != model.channels())
        throw ValidationError("simulate: noise path channel count does not match the forcing set");

    TrajectoryRecord traj;
    traj.dt = dt;
    traj.states.reserve(size_t(steps) + 1);
    traj.states.push_back(w0);
    const Integrator stepper(model, dt);
    ScalarField w = w0;
    for (long k = 0; k < steps; ++k) {
        stepper.step_in_place(ws, w, noise.row(int(k)), k);
        traj.states.push_back(w);
    }
    traj.noise = std::move(noise);
    return traj;
}

void integrate_observe(Workspace& ws, const FlowModel& model, const VorticityField& w0,
                       const NoisePath& noise,
                       const std::function<void(int, const VorticityField&)>& observe) {
    const Integrator stepper(model, noise.dt());
    ScalarField w = w0;
    observe(0, w);
    for (int k = 0; k < noise.steps(); ++k) {
        stepper.step_in_place(ws, w, noise.row(k), k);
        observe(k + 1, w);
    }
}

Workspace& thread_workspace(const LatticePtr& lattice) {
    thread_local std::map<int, std::unique_ptr<Workspace>> cache;
    auto& slot = cache[lattice->truncation()];
    if (!slot) slot = std::make_unique<Workspace>(lattice);
    return *slot;
}

// ---------------------------------------------------------------------------
// Lyapunov diagnostics
// ---------------------------------------------------------------------------

LyapunovReport lyapunov_report(const FlowModel& model, const ParallelMap& pool, const LyapunovRequest& req) {
    const double gamma = req.gamma > 0.0 ? req.gamma : 1.0 / (8.0 * model.injection.forcing().noise_intensity());
    const int steps = int(std::lround(req.horizon / req.dt));
    const int stride = std::max(1, int(std::lround(req.output_stride / req.dt)));
    const int outputs = steps / stride + 1;

    LyapunovReport rep;
    rep.gamma = gamma;
    rep.moment_m = req.moment_m;
    rep.times.resize(outputs);
    for (int j = 0; j < outputs; ++j) rep.times[j] = j * stride * req.dt;

    // per-sample moment contributions, gathered by slot for deterministic sums
    std::vector<std::vector<double>> exp_contrib(req.trajectories), poly_contrib(req.trajectories);
    pool.run(req.trajectories, [&](std::ptrdiff_t p) {
        Workspace& ws = thread_workspace(model.lattice);
        auto noise = NoisePath::gaussian(req.seed, req.stream_salt + uint64_t(p), req.dt, steps, model.channels());
        std::vector<double> ec(outputs), pc(outputs);
        integrate_observe(ws, model, req.initial, noise, [&](int k, const VorticityField& w) {
            if (k % stride != 0) return;
            const double u2 = 2.0 * M_PI * M_PI * dot(biot_savart(w), biot_savart(w));
            ec[k / stride] = std::exp(gamma * u2);
            pc[k / stride] = 1.0 + std::pow(u2, req.moment_m);
        });
        exp_contrib[p] = std::move(ec);
        poly_contrib[p] = std::move(pc);
    });

    rep.exp_moment.assign(outputs, 0.0);
    rep.poly_moment.assign(outputs, 0.0);
    for (int p = 0; p < req.trajectories; ++p)
        for (int j = 0; j < outputs; ++j) {
            rep.exp_moment[j] += exp_contrib[p][j];
            rep.poly_moment[j] += poly_contrib[p][j];
        }
    for (int j = 0; j < outputs; ++j) {
        rep.exp_moment[j] /= req.trajectories;
        rep.poly_moment[j] /= req.trajectories;
    }

    // heavy-tail guard: the exp moment should not be carried by a handful of samples
    for (int j = 0; j < outputs && !rep.heavy_tail_warning; ++j) {
        std::vector<double> col(req.trajectories);
        for (int p = 0; p < req.trajectories; ++p) col[p] = exp_contrib[p][j];
        std::sort(col.begin(), col.end(), std::greater<>());
        double total = 0.0, top = 0.0;
        for (int p = 0; p < req.trajectories; ++p) total += col[p];
        for (int p = 0; p < std::min(10, req.trajectories); ++p) top += col[p];
        if (req.trajectories > 10 && top > 0.9 * total) rep.heavy_tail_warning = true;
    }

    // fitted additive constant of the envelope exp(-rate t) init + C, and a
    // boundedness verdict: the last quarter of the curve must not rise above
    // what the earlier part already reached. Decay rates follow the moment
    // bounds: gamma for the exponential moment, 2m for the polynomial one.
    auto fit_and_check = [&](const std::vector<double>& curve, double rate, double& c_out, bool& ok_out) {
        const double init = curve.front();
        double c = 0.0;
        for (int j = 0; j < outputs; ++j)
            c = std::max(c, curve[j] - std::exp(-rate * rep.times[j]) * init);
        c_out = c;
        const int tail = std::max(1, outputs / 4);
        double tail_mean = 0.0, head_max = 0.0;
        for (int j = outputs - tail; j < outputs; ++j) tail_mean += curve[j];
        tail_mean /= tail;
        for (int j = 0; j < outputs - tail; ++j) head_max = std::max(head_max, curve[j]);
        ok_out = tail_mean <= 1.10 * head_max + 1e-12;
    };
    fit_and_check(rep.exp_moment, gamma, rep.exp_envelope_c, rep.exp_bounded);
    fit_and_check(rep.poly_moment, 2.0 * req.moment_m, rep.poly_envelope_c, rep.poly_bounded);
    return rep;
}

} // namespace dnsl
