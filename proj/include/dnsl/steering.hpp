#pragma once

#include <Eigen/Dense>

#include "dnsl/variational.hpp"

namespace dnsl {

/// Deterministic steering problem: drive the system from a start velocity to
/// a target in L2 by a control force acting through the forced modes,
/// piecewise-constant on a coarse segment grid.
struct SteeringProblem {
    VelocityField start;
    VelocityField target;
    double tolerance = 1e-3;
    double horizon = 1.0;
    int segments = 16;
};

struct SteeringOptions {
    double dt = 1.0 / 64;
    int max_iterations = 500;
    double armijo_slope = 1e-4;
    double initial_step = 1.0;
    Eigen::MatrixXd initial_control; // empty selects the zero control; a
                                     // nonzero seed escapes the saddle at
                                     // purely unforced targets
};

struct SteeringResult {
    Eigen::MatrixXd control; // segments x channels force coefficients
    double distance = 0.0;   // |u(T) - target| in L2
    int iterations = 0;
    bool converged = false;
    bool condition_h_warning = false;
    std::vector<double> objective_trace; // 0.5 distance^2 per accepted iterate
};

/// Gradient descent with backtracking line search; the gradient comes from
/// one backward adjoint sweep per iterate. Deterministic given the options.
SteeringResult steer(const FlowModel& model, const SteeringProblem& problem,
                     const SteeringOptions& options = {});

/// Deterministic initial control for targets outside the span of the forced
/// modes. Plain descent from the zero control sits on a saddle for such
/// targets (their response is quadratic in the control), so this seeds a
/// coarse-window damped least-squares pass: mixed-branch pump pulses in the
/// leading windows, then Levenberg-Marquardt on the window constants against
/// the full terminal residual. The result is meant to be polished by steer.
Eigen::MatrixXd transfer_seed_control(const FlowModel& model, const SteeringProblem& problem,
                                      const SteeringOptions& options, int windows = 8,
                                      int passes = 25, double pump_amplitude = 3.0);

/// Run the controlled deterministic system and return the terminal distance.
double steered_distance(Workspace& ws, const FlowModel& model, const SteeringProblem& problem,
                        const SteeringOptions& options, const Eigen::MatrixXd& control);

// ---------------------------------------------------------------------------
// Stochastic hitting frequencies
// ---------------------------------------------------------------------------

struct IrreducibilityRequest {
    std::vector<VelocityField> starts;
    std::vector<VelocityField> targets;
    double radius = 1.0;
    double horizon = 2.0;
    int trials = 1000;
    double dt = 1.0 / 32;
    uint64_t seed = 1;
    uint64_t stream_salt = 0;
};

struct IrreducibilityTable {
    std::vector<std::vector<double>> frequency; // [start][target]
    double min_frequency = 0.0;
    bool all_zero = false; // recommend a larger ball or horizon
};

IrreducibilityTable irreducibility_probe(const FlowModel& model, const ParallelMap& pool,
                                         const IrreducibilityRequest& req);

} // namespace dnsl
