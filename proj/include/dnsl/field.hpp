#pragma once

#include <algorithm>
#include <cassert>
#include <cmath>
#include <iosfwd>
#include <numeric>
#include <string>
#include <vector>

#include "dnsl/lattice.hpp"

namespace dnsl {

/// Real coefficients of a zero-mean scalar field on the truncated lattice,
/// in the trigonometric basis phi_l (sine branch at l with l1>0 or l1=0,l2>0,
/// negative-cosine branch at the mirrored sites). Used for vorticity and for
/// tangent perturbations alike.
class ScalarField {
public:
    ScalarField() = default;
    explicit ScalarField(LatticePtr lat) : lat_(std::move(lat)), c_(lat_->dim(), 0.0) {}
    ScalarField(LatticePtr lat, std::vector<double> coeffs) : lat_(std::move(lat)), c_(std::move(coeffs)) {
        if (int(c_.size()) != lat_->dim()) throw ValidationError("coefficient count does not match lattice");
    }

    const Lattice& lattice() const { return *lat_; }
    const LatticePtr& lattice_ptr() const { return lat_; }
    int dim() const { return int(c_.size()); }

    double& operator[](int i) { return c_[i]; }
    double operator[](int i) const { return c_[i]; }
    double& at(Mode l) { return c_[lat_->index(l)]; }
    double at(Mode l) const { return c_[lat_->index(l)]; }

    double* data() { return c_.data(); }
    const double* data() const { return c_.data(); }
    const std::vector<double>& coeffs() const { return c_; }

    void set_zero() { std::fill(c_.begin(), c_.end(), 0.0); }

    ScalarField& operator+=(const ScalarField& o) {
        for (int i = 0; i < dim(); ++i) c_[i] += o.c_[i];
        return *this;
    }
    ScalarField& operator-=(const ScalarField& o) {
        for (int i = 0; i < dim(); ++i) c_[i] -= o.c_[i];
        return *this;
    }
    ScalarField& operator*=(double a) {
        for (double& v : c_) v *= a;
        return *this;
    }
    friend ScalarField operator+(ScalarField a, const ScalarField& b) { return a += b; }
    friend ScalarField operator-(ScalarField a, const ScalarField& b) { return a -= b; }
    friend ScalarField operator*(double a, ScalarField f) { return f *= a; }

    /// y += a*x
    void axpy(double a, const ScalarField& x) {
        for (int i = 0; i < dim(); ++i) c_[i] += a * x.c_[i];
    }

    bool finite() const {
        return std::all_of(c_.begin(), c_.end(), [](double v) { return std::isfinite(v); });
    }

private:
    LatticePtr lat_;
    std::vector<double> c_;
};

using VorticityField = ScalarField;
using TangentField = ScalarField;

/// Divergence-free velocity field, stored as two scalar component fields
/// in the same trigonometric basis.
struct VelocityField {
    ScalarField x;
    ScalarField y;

    VelocityField() = default;
    explicit VelocityField(const LatticePtr& lat) : x(lat), y(lat) {}

    const Lattice& lattice() const { return x.lattice(); }
    VelocityField& operator+=(const VelocityField& o) {
        x += o.x;
        y += o.y;
        return *this;
    }
    VelocityField& operator-=(const VelocityField& o) {
        x -= o.x;
        y -= o.y;
        return *this;
    }
    VelocityField& operator*=(double a) {
        x *= a;
        y *= a;
        return *this;
    }
    friend VelocityField operator-(VelocityField a, const VelocityField& b) { return a -= b; }
};

/// Coefficient dot product; the Hilbert structure used by all operator
/// algebra (adjoints, Gram matrices, regularized solves).
inline double dot(const ScalarField& a, const ScalarField& b) {
    assert(a.dim() == b.dim());
    double s = 0.0;
    for (int i = 0; i < a.dim(); ++i) s += a[i] * b[i];
    return s;
}

inline double norm(const ScalarField& a) { return std::sqrt(dot(a, a)); }

inline double dot(const VelocityField& a, const VelocityField& b) { return dot(a.x, b.x) + dot(a.y, b.y); }
inline double norm(const VelocityField& a) { return std::sqrt(dot(a, a)); }

// ---------------------------------------------------------------------------
// Binary snapshots: magic "DNSL", format version u32, truncation u32,
// field kind u8 (0 = scalar, 1 = velocity), coefficients as little-endian
// f64 in lattice enumeration order.
// ---------------------------------------------------------------------------

void write_snapshot(const std::string& path, const ScalarField& w);
void write_snapshot(const std::string& path, const VelocityField& u);
ScalarField read_scalar_snapshot(const std::string& path);
VelocityField read_velocity_snapshot(const std::string& path);

} // namespace dnsl
