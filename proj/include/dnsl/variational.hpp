#pragma once

#include <Eigen/Dense>
#include <optional>
#include <vector>

#include "dnsl/dynamics.hpp"

namespace dnsl {

/// Piecewise-constant path in the noise coordinates, attached to the step
/// grid of its trajectory. Cell k covers [start+k, start+k+1) * dt; the
/// L2([s,t];R^d) inner product is the dt-weighted Riemann sum.
struct ControlPath {
    int start_index = 0;
    double dt = 0.0;
    int channels = 0;
    std::vector<double> values; // cells * channels

    ControlPath() = default;
    ControlPath(int start, double step, int d, int cells)
        : start_index(start), dt(step), channels(d), values(size_t(cells) * d, 0.0) {}

    int cells() const { return channels == 0 ? 0 : int(values.size()) / channels; }
    double* cell(int k) { return values.data() + size_t(k) * channels; }
    const double* cell(int k) const { return values.data() + size_t(k) * channels; }

    double l2_norm_sq() const {
        double s = 0.0;
        for (double v : values) s += v * v;
        return dt * s;
    }
    double l2_norm() const { return std::sqrt(l2_norm_sq()); }

    ControlPath& operator+=(const ControlPath& o) {
        for (size_t j = 0; j < values.size(); ++j) values[j] += o.values[j];
        return *this;
    }
    ControlPath& operator*=(double a) {
        for (double& v : values) v *= a;
        return *this;
    }
};

inline double l2_dot(const ControlPath& a, const ControlPath& b) {
    double s = 0.0;
    for (size_t j = 0; j < a.values.size(); ++j) s += a.values[j] * b.values[j];
    return a.dt * s;
}

/// Dense noise-controllability Gram matrix on the Galerkin coordinates.
struct MalliavinMatrix {
    int start_index = 0;
    int end_index = 0;
    double dt = 0.0;
    Eigen::MatrixXd mat;
};

/// Low-rank factor of the same Gram matrix: M = F F^T with one column per
/// (step cell, noise channel). Keeps solves exact without forming M.
struct ControlFactor {
    int start_index = 0;
    int end_index = 0;
    double dt = 0.0;
    int channels = 0;
    Eigen::MatrixXd f; // dim x (cells*channels), column = cell*channels + channel

    int cells() const { return end_index - start_index; }
};

/// Tangent, adjoint, second-variation and noise-response propagation along
/// one stored trajectory, with the frozen collocation data of each step
/// cached on first use. Bound to one Workspace: use per thread.
class TangentOps {
public:
    TangentOps(Workspace& ws, const FlowModel& model, const TrajectoryRecord& traj);

    const FlowModel& model() const { return *model_; }
    const TrajectoryRecord& trajectory() const { return *traj_; }
    double dt() const { return traj_->dt; }

    /// One linearized step from index k to k+1 (in place).
    void tangent_step(ScalarField& xi, int k) const;
    /// Adjoint of tangent_step.
    void tangent_step_adjoint(ScalarField& eta, int k) const;
    /// Linearized step with a channel source sharing the decay factor:
    /// x <- E(x - dt T x + scale * dt * Q theta). theta may be null.
    void forced_tangent_step(ScalarField& x, int k, const double* theta, double scale) const;

    /// J_{from,to} xi.
    ScalarField tangent(ScalarField xi, int from, int to) const;
    /// J_{from,to}^* eta.
    ScalarField tangent_adjoint(ScalarField eta, int from, int to) const;

    /// Second variation with zero initial data, sourced by the symmetrized
    /// advection of the two propagated perturbations.
    ScalarField second_variation(ScalarField phi, ScalarField psi, int from, int to) const;

    /// Response of the state at `to` to a noise-path variation v on
    /// [from, to): the forced linearized flow with source Q v, zero start.
    ScalarField noise_response(const ControlPath& v, int from, int to) const;

    /// Adjoint of noise_response in the pairing <.,.>_state vs dt-weighted
    /// path sum: value at cell k is Q* applied to the back-propagated state.
    ControlPath noise_response_adjoint(const ScalarField& xi, int from, int to) const;

    /// Low-rank factor of the Gram matrix of noise_response.
    ControlFactor factor(int from, int to) const;

    /// Derivative of the tangent propagation with respect to the noise
    /// increment of channel `ch` at step r (discrete Malliavin derivative);
    /// equals the second variation seeded with the injected channel field.
    ScalarField tangent_noise_derivative(int r, int ch, int from, int to, ScalarField xi) const;

    /// Injected direction: the state perturbation at step r+1 caused by a
    /// unit bump of noise channel ch at step r.
    ScalarField injected_channel(int ch) const;

    const FlowGrids& grids(int k) const;
    const std::vector<double>& decay() const { return stepper_.decay(); }

private:
    void decay_in_place(ScalarField& f) const;

    Workspace* ws_;
    const FlowModel* model_;
    const TrajectoryRecord* traj_;
    Integrator stepper_;
    mutable std::vector<std::optional<FlowGrids>> cache_;
};

// ---------------------------------------------------------------------------
// One-shot wrappers taking times instead of step indices
// ---------------------------------------------------------------------------

ScalarField propagate_tangent(Workspace& ws, const FlowModel& model, const TrajectoryRecord& traj,
                              double s, double t, const ScalarField& xi);

ScalarField propagate_second_variation(Workspace& ws, const FlowModel& model, const TrajectoryRecord& traj,
                                       double s, double t, const ScalarField& phi, const ScalarField& psi);

ScalarField apply_noise_response(Workspace& ws, const FlowModel& model, const TrajectoryRecord& traj,
                                 double s, double t, const ControlPath& v);

ControlPath apply_noise_response_adjoint(Workspace& ws, const FlowModel& model, const TrajectoryRecord& traj,
                                         double s, double t, const ScalarField& xi);

/// Dense assembly; refuses dimensions above the cap (use the factor form).
MalliavinMatrix assemble_malliavin_matrix(Workspace& ws, const FlowModel& model, const TrajectoryRecord& traj,
                                          double s, double t, int dense_cap = 512);

/// x = (M + beta I)^{-1} xi by SPD factorization with one refinement pass;
/// the residual satisfies |Mx + beta x - xi| <= 1e-10 |xi|.
ScalarField regularized_solve(const MalliavinMatrix& m, double beta, const ScalarField& xi);

/// Same solve through the low-rank factor (exact Woodbury identity).
ScalarField regularized_solve(const ControlFactor& f, double beta, const ScalarField& xi);

} // namespace dnsl
