#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "dnsl/field.hpp"
#include "dnsl/forcing.hpp"
#include "dnsl/parallel.hpp"
#include "dnsl/rng.hpp"
#include "dnsl/spectral_ops.hpp"
#include "dnsl/transform.hpp"

namespace dnsl {

/// The truncated vorticity dynamics: viscosity, forced modes, and a switch
/// that drops the advection term (linear test dynamics).
struct FlowModel {
    LatticePtr lattice;
    double viscosity = 0.1;
    NoiseInjection injection;
    bool nonlinear = true;

    int dim() const { return lattice->dim(); }
    int channels() const { return injection.channels(); }
};

/// Brownian increments of one trajectory, reproducible from (seed, stream).
class NoisePath {
public:
    NoisePath() = default;

    static NoisePath gaussian(uint64_t seed, uint64_t stream, double dt, int steps, int channels);
    static NoisePath zero(double dt, int steps, int channels);
    static NoisePath from_data(double dt, int steps, int channels, std::vector<double> increments);

    double dt() const { return dt_; }
    int steps() const { return steps_; }
    int channels() const { return channels_; }
    uint64_t seed() const { return seed_; }
    uint64_t stream() const { return stream_; }

    const double* row(int step) const { return data_.data() + size_t(step) * channels_; }
    double* row(int step) { return data_.data() + size_t(step) * channels_; }
    const std::vector<double>& data() const { return data_; }

    /// Sum consecutive fine increments into a coarser path (refinement studies).
    NoisePath coarsened(int factor) const;

private:
    double dt_ = 0.0;
    int steps_ = 0;
    int channels_ = 0;
    uint64_t seed_ = 0;
    uint64_t stream_ = 0;
    std::vector<double> data_;
};

/// Exponential Euler-Maruyama step map for a fixed dt: per mode
///   w' = exp(-nu |l|^2 dt) * (w - dt * advect(Kw, w) + Q dW).
/// The linear part is integrated exactly; drift and injection share the
/// end-of-step decay factor.
class Integrator {
public:
    Integrator(const FlowModel& model, double dt);

    double dt() const { return dt_; }
    const FlowModel& model() const { return *model_; }
    const std::vector<double>& decay() const { return decay_; }

    /// One step; dW may be null (unforced). Throws StepError on non-finite state.
    void step_in_place(Workspace& ws, ScalarField& w, const double* dW, long step_index = -1) const;

private:
    const FlowModel* model_;
    double dt_;
    std::vector<double> decay_;
};

/// One solution path: initial state, every intermediate state, and the
/// noise that produced it. Replaying the integrator on (initial, noise)
/// reproduces the stored states bit-exactly.
struct TrajectoryRecord {
    double dt = 0.0;
    NoisePath noise;
    std::vector<VorticityField> states; // size steps()+1

    int steps() const { return int(states.size()) - 1; }
    const VorticityField& state(int k) const { return states[size_t(k)]; }
    const VorticityField& initial() const { return states.front(); }
    const VorticityField& final_state() const { return states.back(); }
    double time(int k) const { return k * dt; }

    /// Grid index of a time value; rejects off-grid times.
    int index_of(double t) const;
};

TrajectoryRecord simulate(Workspace& ws, const FlowModel& model, const VorticityField& w0,
                          double horizon, double dt, NoisePath noise);

/// Streaming integration: invokes observe(step, state) at every step
/// including step 0, storing nothing.
void integrate_observe(Workspace& ws, const FlowModel& model, const VorticityField& w0,
                       const NoisePath& noise,
                       const std::function<void(int, const VorticityField&)>& observe);

/// Per-thread workspace cache for ensemble loops.
Workspace& thread_workspace(const LatticePtr& lattice);

// ---------------------------------------------------------------------------
// Lyapunov-style moment diagnostics
// ---------------------------------------------------------------------------

struct LyapunovReport {
    double gamma = 0.0;
    int moment_m = 1;
    std::vector<double> times;
    std::vector<double> exp_moment;  // mean exp(gamma ||u||^2)
    std::vector<double> poly_moment; // mean (1 + ||u||^{2m})
    double exp_envelope_c = 0.0;     // fitted additive constants
    double poly_envelope_c = 0.0;
    bool exp_bounded = false;        // late curve stays below fitted envelope
    bool poly_bounded = false;
    bool heavy_tail_warning = false; // exp moment dominated by < 10 samples
};

struct LyapunovRequest {
    VorticityField initial;
    double horizon = 10.0;
    double dt = 1.0 / 64;
    int trajectories = 256;
    double gamma = 0.0; // <= 0 selects 1/(8 * noise_intensity)
    int moment_m = 1;
    uint64_t seed = 1;
    uint64_t stream_salt = 0;
    double output_stride = 0.5;
};

LyapunovReport lyapunov_report(const FlowModel& model, const ParallelMap& pool, const LyapunovRequest& req);

} // namespace dnsl
