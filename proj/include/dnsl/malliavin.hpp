#pragma once

#include "dnsl/observables.hpp"
#include "dnsl/variational.hpp"

namespace dnsl {

/// One unit-time block of the control construction: the regularized
/// least-squares control on the first half interval (identically zero on the
/// second half), the residual states it produces, and the factor data needed
/// to differentiate it.
struct BlockControl {
    int block = 0;
    double beta = 0.0;
    ControlPath path;                      // full unit block, upper half zero
    ControlFactor factor;                  // on [n, n+1/2)
    ScalarField solve_x;                   // (M + beta)^{-1} J rho_n
    double tangent_mid_norm = 0.0;         // |J_{n,n+1/2} rho_n|
    std::vector<VorticityField> rho_curve; // residual states, block-local 0..steps_per_unit
};

/// The control process v of the gradient construction over a horizon that is
/// a multiple of 1/2 (the final block may stop at its half point), with its
/// residual decomposition rho = J xi - A v.
class ControlProcess {
public:
    static ControlProcess build(Workspace& ws, const FlowModel& model, const TrajectoryRecord& traj,
                                const ScalarField& xi, double beta, double horizon);
    static ControlProcess build(Workspace& ws, const FlowModel& model, const TrajectoryRecord& traj,
                                const ScalarField& xi, double beta, int blocks) {
        return build(ws, model, traj, xi, beta, double(blocks));
    }

    double beta() const { return beta_; }
    int blocks() const { return int(blocks_.size()); }
    int steps_per_unit() const { return steps_per_unit_; }
    const BlockControl& block(int n) const { return blocks_[size_t(n)]; }

    /// rho_n at the start of block n (n may equal blocks(): final residual).
    const VorticityField& residual(int n) const;
    /// Residual at an arbitrary step index within the horizon.
    const VorticityField& residual_at_step(int step) const;

private:
    double beta_ = 0.0;
    int steps_per_unit_ = 0;
    std::vector<BlockControl> blocks_;
};

/// Steps per unit time of a step grid; rejects grids that do not split a
/// unit block into two equal halves.
int unit_steps(double dt);
int unit_steps(const TrajectoryRecord& traj);

/// The control of one block: A*(M+beta)^{-1} J rho_n on [n, n+1/2], zero on
/// [n+1/2, n+1].
ControlPath build_control_block(Workspace& ws, const FlowModel& model, const TrajectoryRecord& traj,
                                int block, const ScalarField& rho_n, double beta);

/// rho_t = J_{n,t} rho_n - A_{n,t} v across one block; returns the block-local
/// curve (steps_per_unit + 1 states).
std::vector<VorticityField> propagate_residual(Workspace& ws, const FlowModel& model,
                                               const TrajectoryRecord& traj, int block,
                                               const ScalarField& rho_n, const ControlPath& v);

/// Derivative of the tangent propagation J_{s,t} xi with respect to the noise
/// increment of channel ch at time r (the discrete Malliavin derivative).
ScalarField malliavin_tangent_derivative(Workspace& ws, const FlowModel& model, const TrajectoryRecord& traj,
                                         double r, int ch, double s, double t, const ScalarField& xi);

/// Derivative of the block control with respect to the noise increment of
/// channel ch at step r inside the same half block: the operator-derivative
/// terms of A*, M and J assembled around the regularized solve.
ControlPath malliavin_control_derivative(Workspace& ws, const FlowModel& model, const TrajectoryRecord& traj,
                                         const BlockControl& ctl, int r_step, int ch);

/// Discretized Skorokhod integral of the control process over a block range:
/// sum_k v(t_k) . dW_k - dt sum_k trace(D_{t_k} v(t_k)).
double skorokhod_integral(Workspace& ws, const FlowModel& model, const TrajectoryRecord& traj,
                          const ControlProcess& process, int first_block, int last_block);

// ---------------------------------------------------------------------------
// Residual decay experiment
// ---------------------------------------------------------------------------

struct DecayRequest {
    VorticityField initial;
    ScalarField direction;       // xi = rho_0
    std::vector<double> betas;   // sweep values
    int trajectories = 500;
    int n_max = 6;
    double dt = 1.0 / 32;
    uint64_t seed = 1;
    uint64_t stream_salt = 0;
    int bootstrap = 400;
};

struct BetaDecayResult {
    double beta = 0.0;
    std::vector<double> moment4;    // E |rho_n|^4, n = 0..n_max
    std::vector<double> stderr4;
    double rate = 0.0;              // fitted geometric rate of the moments
    double rate_lo = 0.0, rate_hi = 0.0; // bootstrap 95% interval
    double final_over_initial = 0.0;
    double ratio_hi = 0.0;          // bootstrap 97.5% quantile of the ratio
    bool decaying = false;          // rate_hi < 1 and ratio_hi < 1
};

struct DecayTable {
    std::vector<BetaDecayResult> per_beta;
    int best = -1; // smallest fitted rate
    bool condition_h_ok = false;
    bool any_decaying = false;
};

DecayTable residual_decay_experiment(const FlowModel& model, const ParallelMap& pool, const DecayRequest& req);

// ---------------------------------------------------------------------------
// Gradient decomposition
// ---------------------------------------------------------------------------

struct GradientRequest {
    VorticityField initial;
    ScalarField direction; // xi
    Observable potential;  // V
    Observable terminal;   // psi
    double horizon = 2.0;  // integer number of unit blocks
    double beta = 1e-2;
    double dt = 1.0 / 32;
    int replicas = 1000;
    uint64_t seed = 1;
    uint64_t stream_salt = 0;
    double fd_eps = 1e-3;
};

struct GradientDecomposition {
    double i1 = 0, i2 = 0, i3 = 0;      // Monte-Carlo means of the three terms
    double se1 = 0, se2 = 0, se3 = 0;
    double total = 0, se_total = 0;
    double fd = 0, se_fd = 0;           // central-difference reference
    double diff = 0, se_diff = 0;       // paired total - fd
    int replicas = 0;
};

GradientDecomposition gradient_decomposition(const FlowModel& model, const ParallelMap& pool,
                                             const GradientRequest& req);

} // namespace dnsl
