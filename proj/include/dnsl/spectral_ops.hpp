#pragma once

#include "dnsl/field.hpp"
#include "dnsl/transform.hpp"

namespace dnsl {

// ---------------------------------------------------------------------------
// Coefficient-level operators (exact, no transforms involved)
// ---------------------------------------------------------------------------

/// Spectral partial derivative, axis 0 or 1.
ScalarField derivative(const ScalarField& w, int axis);

/// Velocity reconstruction u with curl(u) = w; per mode the gain is |l|^{-1}
/// in the L2 norm.
VelocityField biot_savart(const ScalarField& w);

/// Scalar curl of a velocity field; left inverse of biot_savart.
ScalarField curl(const VelocityField& u);

/// Adjoint of biot_savart with respect to the coefficient dot product.
ScalarField biot_savart_adjoint(const VelocityField& u);

/// Spectral divergence (diagnostic; vanishes for fields built by biot_savart).
ScalarField divergence(const VelocityField& u);

/// Sobolev norm (sum_l |l|^{2s} w_l^2)^{1/2} scaled to agree with the
/// L2 quadrature of the synthesized field at s = 0.
double sobolev_norm(const ScalarField& w, double s);
double sobolev_norm(const VelocityField& u, double s);

// ---------------------------------------------------------------------------
// Pseudospectral bilinear terms (dealiased collocation products)
// ---------------------------------------------------------------------------

/// Transport term <u, grad> w, computed on the dealiased grid and projected
/// back to the truncation with zero mean.
ScalarField advect(Workspace& ws, const VelocityField& u, const ScalarField& w);

/// Collocation data of one frozen state: velocity components of biot_savart(w)
/// and the two gradient components of w. Reused across many linearized
/// applications against the same state.
struct FlowGrids {
    Grid ux, uy, wx, wy;
};

FlowGrids make_flow_grids(Workspace& ws, const ScalarField& w);

/// Symmetrized linearization of the advection term around w:
/// advect(biot_savart(w), xi) + advect(biot_savart(xi), w).
ScalarField linearized_advect(Workspace& ws, const FlowGrids& w_grids, const ScalarField& xi);
ScalarField linearized_advect(Workspace& ws, const ScalarField& w, const ScalarField& xi);

/// Adjoint of xi -> linearized_advect(w, xi) in the coefficient dot product.
ScalarField linearized_advect_adjoint(Workspace& ws, const FlowGrids& w_grids, const ScalarField& eta);

} // namespace dnsl
