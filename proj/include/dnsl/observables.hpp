#pragma once

#include <string>
#include <vector>

#include "dnsl/field.hpp"

namespace dnsl {

/// Smooth functional of the velocity field: a catalog function applied to a
/// finite list of velocity-mode coordinates. Evaluated on the vorticity
/// state through the Biot-Savart coordinates a_m = w_m / |m|^2, so values
/// and derivatives stay exact.
class Observable {
public:
    enum class Kind { Constant, Coordinate, Tanh, Bump };

    static Observable constant(double value);
    static Observable coordinate(Mode m, double amplitude = 1.0);
    static Observable tanh_of(Mode m, double amplitude, double scale = 1.0);
    static Observable bump(std::vector<Mode> modes, double amplitude, double width);

    Kind kind() const { return kind_; }
    const std::vector<Mode>& modes() const { return modes_; }
    double amplitude() const { return amplitude_; }

    /// V(K w).
    double value(const ScalarField& w) const;
    /// d/de V(K (w + e rho)) at e = 0.
    double directional(const ScalarField& w, const ScalarField& rho) const;

    /// Range and regularity data recorded with every estimate.
    double sup_norm() const;      // +inf for the coordinate function
    double grad_sup_norm() const; // gradient bound in the velocity space
    double min_value() const;
    double max_value() const;

    /// theta * V (same projection, scaled amplitude).
    Observable scaled(double theta) const;

    std::string describe() const;

private:
    Kind kind_ = Kind::Constant;
    std::vector<Mode> modes_;
    double amplitude_ = 0.0;
    double scale_ = 1.0;
};

} // namespace dnsl
