#pragma once

#include "dnsl/field.hpp"

namespace dnsl {
namespace ref {

// Serial reference implementations of the spectral kernels: direct basis
// summation and O(D^2) convolution. Slow but transparent; the unit tests
// and the benchmark pit the FFT path against these.

/// Evaluate the field at one physical point by summing the basis directly.
double evaluate(const ScalarField& w, double x1, double x2);

/// Evaluate one basis function phi_l at a point.
double basis_value(Mode l, double x1, double x2);

/// Velocity basis e_l = l_perp * (cos or sin)<l,x>.
void velocity_basis_value(Mode l, double x1, double x2, double& e1, double& e2);

/// Direct-summation synthesis onto an M x M uniform grid.
std::vector<double> synthesize(const ScalarField& w, int grid_size);

/// Transport term <u, grad> w by exact convolution of the truncated series,
/// projected back to the truncation. Matches the dealiased collocation
/// product to rounding.
ScalarField advect(const VelocityField& u, const ScalarField& w);

} // namespace ref
} // namespace dnsl
