#include "dnsl/forcing.hpp"

#include <algorithm>
#include <cstdlib>
#include <numeric>
#include <sstream>

namespace dnsl {

namespace {
std::string mode_str(Mode l) {
    std::ostringstream os;
    os << "(" << l.x << "," << l.y << ")";
    return os.str();
}
} // namespace

ForcingSet::ForcingSet(std::vector<Mode> modes, std::vector<double> amplitudes)
    : modes_(std::move(modes)), amplitudes_(std::move(amplitudes)) {
    if (modes_.size() != amplitudes_.size())
        throw ValidationError("forcing set: one amplitude per mode required");
    for (size_t i = 0; i < modes_.size(); ++i) {
        if (modes_[i].zero()) throw ValidationError("forcing set: zero mode is not allowed");
        if (amplitudes_[i] == 0.0)
            throw ValidationError("forcing set: amplitude of mode " + mode_str(modes_[i]) + " must be nonzero");
        for (size_t j = 0; j < i; ++j)
            if (modes_[j] == modes_[i])
                throw ValidationError("forcing set: duplicate mode " + mode_str(modes_[i]));
    }
}

bool ForcingSet::contains(Mode l) const {
    return std::find(modes_.begin(), modes_.end(), l) != modes_.end();
}

double ForcingSet::noise_intensity() const {
    double s = 0.0;
    for (double b : amplitudes_) s += b * b;
    return s;
}

ForcingSet example_forcing_set(double amplitude) {
    return ForcingSet({{1, 0}, {-1, 0}, {1, 1}, {-1, -1}},
                      {amplitude, amplitude, amplitude, amplitude});
}

ConditionHReport check_condition_h(const ForcingSet& k) {
    if (k.size() == 0) throw ValidationError("condition check: forcing set is empty");
    ConditionHReport rep;

    rep.symmetric = true;
    for (const Mode& l : k.modes())
        if (!k.contains(l.negated())) {
            rep.symmetric = false;
            break;
        }

    // The integer lattice spanned by the modes is all of Z^2 exactly when the
    // gcd of the 2x2 minors of the mode matrix is 1 (Smith form (1,1)).
    long long minor_gcd = 0;
    for (int i = 0; i < k.size(); ++i)
        for (int j = i + 1; j < k.size(); ++j) {
            const long long det = (long long)k.mode(i).x * k.mode(j).y - (long long)k.mode(j).x * k.mode(i).y;
            minor_gcd = std::gcd(minor_gcd, std::llabs(det));
        }
    rep.generator = (minor_gcd == 1);

    for (int i = 0; i < k.size() && !rep.unequal_nonparallel; ++i)
        for (int j = i + 1; j < k.size(); ++j) {
            const Mode m = k.mode(i), n = k.mode(j);
            const long long det = (long long)m.x * n.y - (long long)n.x * m.y;
            if (det != 0 && m.norm2() != n.norm2()) {
                rep.unequal_nonparallel = true;
                break;
            }
        }

    if (!rep.symmetric)
        rep.reason = "not symmetric";
    else if (!rep.generator)
        rep.reason = "not a generator";
    else if (!rep.unequal_nonparallel)
        rep.reason = "all non-parallel pairs have equal norm";
    rep.satisfied = rep.symmetric && rep.generator && rep.unequal_nonparallel;
    return rep;
}

NoiseInjection::NoiseInjection(const ForcingSet& k, LatticePtr lattice)
    : forcing_(k), lattice_(std::move(lattice)) {
    sites_.reserve(k.size());
    scales_.reserve(k.size());
    for (int i = 0; i < k.size(); ++i) {
        const Mode l = k.mode(i);
        if (!lattice_->contains(l))
            throw ValidationError("forcing mode " + mode_str(l) + " lies outside the truncation N=" +
                                  std::to_string(lattice_->truncation()));
        sites_.push_back(lattice_->index(l));
        scales_.push_back(k.amplitude(i) * double(l.norm2()));
    }
}

ScalarField NoiseInjection::apply(const std::vector<double>& theta) const {
    if (int(theta.size()) != channels()) throw ValidationError("noise vector has wrong dimension");
    ScalarField w(lattice_);
    add_scaled(w, theta.data(), 1.0);
    return w;
}

void NoiseInjection::add_scaled(ScalarField& w, const double* theta, double factor) const {
    for (size_t i = 0; i < sites_.size(); ++i) w[sites_[i]] += factor * scales_[i] * theta[i];
}

std::vector<double> NoiseInjection::adjoint(const ScalarField& w) const {
    std::vector<double> out(scales_.size());
    for (size_t i = 0; i < sites_.size(); ++i) out[i] = scales_[i] * w[sites_[i]];
    return out;
}

ScalarField NoiseInjection::column(int i) const {
    ScalarField w(lattice_);
    w[sites_[i]] = scales_[i];
    return w;
}

} // namespace dnsl
