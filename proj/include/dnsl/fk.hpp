#pragma once

#include <functional>

#include "dnsl/dynamics.hpp"
#include "dnsl/observables.hpp"

namespace dnsl {

/// Scalar estimate with its Monte-Carlo standard error.
struct Estimate {
    double value = 0.0;
    double se = 0.0;
};

/// Random state with H^2 norm at most `radius` (probe states, pair samples):
/// coefficients damped like |l|^{-3.5}, then rescaled by a uniform fraction
/// of the radius.
ScalarField sample_h2_vorticity(const LatticePtr& lat, const CounterRng& rng, uint64_t salt, double radius);

/// Velocity L2 norm of a vorticity state (the weight norm of the estimates).
double velocity_norm(const ScalarField& w);

// ---------------------------------------------------------------------------
// Weighted expectations
// ---------------------------------------------------------------------------

/// Per-path table of exp(int_0^{t_j} V) * psi(w(t_j)) over a grid of step
/// indices; the integral is the trapezoid on the step grid. Deterministic
/// given (seed, salt): path p uses stream salt + p.
std::vector<std::vector<double>> fk_path_table(const FlowModel& model, const ParallelMap& pool,
                                               const VorticityField& initial,
                                               const std::function<double(const VorticityField&)>& potential,
                                               const std::function<double(const VorticityField&)>& terminal,
                                               const std::vector<int>& grid_steps, double dt, int ensemble,
                                               uint64_t seed, uint64_t salt);

struct FkRequest {
    VorticityField initial;
    Observable potential;
    Observable terminal;
    double horizon = 1.0;
    double dt = 1.0 / 32;
    int ensemble = 1000;
    uint64_t seed = 1;
    uint64_t stream_salt = 0;
};

Estimate fk_expectation(const FlowModel& model, const ParallelMap& pool, const FkRequest& req);

// ---------------------------------------------------------------------------
// Principal eigenvalue
// ---------------------------------------------------------------------------

enum class EigenvalueMode { Direct, Cloning };

struct EigenvalueRequest {
    VorticityField initial;
    Observable potential;
    int units = 8; // horizon in unit times
    double dt = 1.0 / 32;
    int ensemble = 2000;
    EigenvalueMode mode = EigenvalueMode::Cloning;
    uint64_t seed = 1;
    uint64_t stream_salt = 0;
    int burn_in_units = 0; // cloning only
    int bootstrap = 200;   // direct only
};

struct EigenvalueEstimate {
    EigenvalueMode mode = EigenvalueMode::Cloning;
    double lambda = 0.0;
    double se = 0.0;                  // standard error of lambda
    double log_lambda = 0.0;
    double log_se = 0.0;
    std::vector<double> unit_data;    // cloning: per-unit log mean weights;
                                      // direct: log FK at unit times
    double min_ess_fraction = 1.0;    // direct mode weight degeneracy
    bool ess_warning = false;         // < 5% effective samples: use cloning
};

EigenvalueEstimate eigenvalue_estimate(const FlowModel& model, const ParallelMap& pool,
                                       const EigenvalueRequest& req);

// ---------------------------------------------------------------------------
// Eigenfunction and eigenmeasure
// ---------------------------------------------------------------------------

struct EigenfunctionRequest {
    std::vector<VorticityField> probes;
    Observable potential;
    double lambda = 1.0; // from eigenvalue_estimate
    int units_short = 4;
    int units_long = 8;
    double dt = 1.0 / 32;
    int ensemble = 1000;
    uint64_t seed = 1;
    uint64_t stream_salt = 0;
};

struct EigenfunctionEstimate {
    std::vector<double> values;       // normalized so the first probe maps to 1
    std::vector<double> se;
    std::vector<double> values_short; // same table at the shorter horizon
    double max_drift = 0.0;           // relative drift between the two horizons
    bool stabilized = false;          // drift <= 10%
};

EigenfunctionEstimate eigenfunction_estimate(const FlowModel& model, const ParallelMap& pool,
                                             const EigenfunctionRequest& req);

struct CloudRequest {
    VorticityField initial;
    Observable potential;
    int units = 8;
    double dt = 1.0 / 32;
    int ensemble = 2000;
    uint64_t seed = 1;
    uint64_t stream_salt = 0;
    std::vector<Observable> report; // cloud moments to estimate
};

struct CloudEstimate {
    std::vector<Estimate> moments;  // one per requested observable
    double weight_total = 1.0;      // <1, cloud> after normalization (exactly 1)
    double ancestor_fraction = 1.0; // distinct root ancestors at the end
    bool collapse_warning = false;  // < 1% of ancestors survive
    std::vector<double> unit_log_means;
};

CloudEstimate eigenmeasure_estimate(const FlowModel& model, const ParallelMap& pool, const CloudRequest& req);

// ---------------------------------------------------------------------------
// Uniform Feller modulus
// ---------------------------------------------------------------------------

struct FellerRequest {
    Observable potential;
    Observable terminal;
    double pair_radius = 2.0;   // H^2 ball holding the pair base points
    double normalizer_radius = 2.0; // R0 ball of the denominator sup
    int pairs = 10;
    double separation_max = 1e-1; // separations log-spaced over two decades
    double separation_min = 1e-3;
    std::vector<double> times = {1.0, 2.0, 4.0};
    double dt = 1.0 / 32;
    int ensemble = 500;
    int normalizer_probes = 16;
    uint64_t seed = 1;
    uint64_t stream_salt = 0;
};

struct FellerPair {
    double separation = 0.0;
    double modulus = 0.0; // sup over the time grid of the normalized oscillation
    double se = 0.0;
    bool excluded = false; // noise-dominated at this separation
};

struct FellerReport {
    std::vector<FellerPair> pairs;
    double identical_pair_modulus = 0.0; // structural zero under common noise
    double holder_exponent = 0.0;
    double exponent_se = 0.0;
    int used_pairs = 0;
};

FellerReport uniform_feller_modulus(const FlowModel& model, const ParallelMap& pool, const FellerRequest& req);

// ---------------------------------------------------------------------------
// Occupation measures and the rate function
// ---------------------------------------------------------------------------

struct OccupationStats {
    double horizon = 0.0;
    std::vector<Estimate> values; // trapezoid time averages, batch-means errors
};

/// Time averages along a stored trajectory.
OccupationStats occupation_stats(const TrajectoryRecord& traj, const std::vector<Observable>& observables);

/// Streaming long-run occupation average of one observable.
Estimate occupation_average(const FlowModel& model, const VorticityField& initial, double horizon,
                            double dt, uint64_t seed, uint64_t stream, const Observable& f,
                            double batch_length = 10.0);

struct ScgfRequest {
    Observable direction; // V
    std::vector<double> thetas;
    int ell_count = 41;
    EigenvalueRequest eigen; // per-theta settings (potential ignored)
};

struct RateFunctionEstimate {
    std::vector<double> thetas;
    std::vector<double> scgf;    // Lambda(theta) = log lambda_{theta V}
    std::vector<double> scgf_se;
    bool convex_within_error = true;
    double slope_at_zero = 0.0; // central difference
    double slope_se = 0.0;
    std::vector<double> ell;
    std::vector<double> rate;       // Legendre transform on the ell grid
    std::vector<bool> rate_bounded; // argmax interior to the theta grid
};

RateFunctionEstimate scgf_and_rate(const FlowModel& model, const ParallelMap& pool, const ScgfRequest& req);

// ---------------------------------------------------------------------------
// Growth ratios of the weighted semigroup
// ---------------------------------------------------------------------------

struct GrowthRequest {
    Observable potential;
    std::vector<double> times = {0.5, 1, 2, 4, 8};
    int moment_m = 1;
    double gamma = 0.0; // <= 0 selects 1/(8 noise intensity)
    double normalizer_radius = 2.0;
    int probes = 16;
    double dt = 1.0 / 32;
    int ensemble = 400;
    uint64_t seed = 1;
    uint64_t stream_salt = 0;
};

struct GrowthReport {
    std::vector<double> times;
    std::vector<double> poly_ratio; // sup_u P_t w_m(u)/w_m(u), normalized
    std::vector<double> exp_ratio;  // same for the gaussian weight
    bool poly_bounded = false;
    bool exp_bounded = false;
    double gamma = 0.0;
};

GrowthReport growth_ratio_report(const FlowModel& model, const ParallelMap& pool, const GrowthRequest& req);

} // namespace dnsl
