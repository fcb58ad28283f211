#include "dnsl/observables.hpp"

#include <cmath>
#include <limits>
#include <sstream>

namespace dnsl {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();

double coordinate_of(const ScalarField& w, Mode m) {
    return w.at(m) / double(m.norm2());
}
} // namespace

Observable Observable::constant(double value) {
    Observable v;
    v.kind_ = Kind::Constant;
    v.amplitude_ = value;
    return v;
}

Observable Observable::coordinate(Mode m, double amplitude) {
    Observable v;
    v.kind_ = Kind::Coordinate;
    v.modes_ = {m};
    v.amplitude_ = amplitude;
    return v;
}

Observable Observable::tanh_of(Mode m, double amplitude, double scale) {
    Observable v;
    v.kind_ = Kind::Tanh;
    v.modes_ = {m};
    v.amplitude_ = amplitude;
    v.scale_ = scale;
    return v;
}

Observable Observable::bump(std::vector<Mode> modes, double amplitude, double width) {
    Observable v;
    v.kind_ = Kind::Bump;
    v.modes_ = std::move(modes);
    v.amplitude_ = amplitude;
    v.scale_ = width;
    return v;
}

double Observable::value(const ScalarField& w) const {
    switch (kind_) {
    case Kind::Constant:
        return amplitude_;
    case Kind::Coordinate:
        return amplitude_ * coordinate_of(w, modes_[0]);
    case Kind::Tanh:
        return amplitude_ * std::tanh(coordinate_of(w, modes_[0]) / scale_);
    case Kind::Bump: {
        double q = 0.0;
        for (Mode m : modes_) {
            const double y = coordinate_of(w, m);
            q += y * y;
        }
        return amplitude_ * std::exp(-q / (2.0 * scale_ * scale_));
    }
    }
    return 0.0;
}

double Observable::directional(const ScalarField& w, const ScalarField& rho) const {
    switch (kind_) {
    case Kind::Constant:
        return 0.0;
    case Kind::Coordinate:
        return amplitude_ * coordinate_of(rho, modes_[0]);
    case Kind::Tanh: {
        const double y = coordinate_of(w, modes_[0]) / scale_;
        const double sech2 = 1.0 - std::tanh(y) * std::tanh(y);
        return amplitude_ / scale_ * sech2 * coordinate_of(rho, modes_[0]);
    }
    case Kind::Bump: {
        double q = 0.0, dq = 0.0;
        for (Mode m : modes_) {
            const double y = coordinate_of(w, m);
            q += y * y;
            dq += y * coordinate_of(rho, m);
        }
        return -amplitude_ * std::exp(-q / (2.0 * scale_ * scale_)) * dq / (scale_ * scale_);
    }
    }
    return 0.0;
}

double Observable::sup_norm() const {
    switch (kind_) {
    case Kind::Coordinate:
        return kInf;
    default:
        return std::abs(amplitude_);
    }
}

double Observable::grad_sup_norm() const {
    double inv_min = 0.0;
    for (Mode m : modes_) inv_min = std::max(inv_min, 1.0 / m.norm());
    switch (kind_) {
    case Kind::Constant:
        return 0.0;
    case Kind::Coordinate:
        return std::abs(amplitude_) * inv_min;
    case Kind::Tanh:
        return std::abs(amplitude_) / scale_ * inv_min;
    case Kind::Bump:
        // sup over y of |y| exp(-y^2/(2 width^2)) / width^2
        return std::abs(amplitude_) * std::exp(-0.5) / scale_ * inv_min;
    }
    return 0.0;
}

double Observable::min_value() const {
    switch (kind_) {
    case Kind::Constant:
        return amplitude_;
    case Kind::Coordinate:
        return -kInf;
    case Kind::Tanh:
        return -std::abs(amplitude_);
    case Kind::Bump:
        return std::min(0.0, amplitude_);
    }
    return 0.0;
}

double Observable::max_value() const {
    switch (kind_) {
    case Kind::Constant:
        return amplitude_;
    case Kind::Coordinate:
        return kInf;
    case Kind::Tanh:
        return std::abs(amplitude_);
    case Kind::Bump:
        return std::max(0.0, amplitude_);
    }
    return 0.0;
}

Observable Observable::scaled(double theta) const {
    Observable v = *this;
    v.amplitude_ *= theta;
    return v;
}

std::string Observable::describe() const {
    std::ostringstream os;
    switch (kind_) {
    case Kind::Constant:
        os << "constant(" << amplitude_ << ")";
        break;
    case Kind::Coordinate:
        os << "coordinate[" << modes_[0].x << "," << modes_[0].y << "]*" << amplitude_;
        break;
    case Kind::Tanh:
        os << "tanh[" << modes_[0].x << "," << modes_[0].y << "]*" << amplitude_ << "/" << scale_;
        break;
    case Kind::Bump:
        os << "bump[" << modes_.size() << " modes]*" << amplitude_ << " width " << scale_;
        break;
    }
    return os.str();
}

} // namespace dnsl
