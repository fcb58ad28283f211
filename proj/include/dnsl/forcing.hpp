#pragma once

#include <string>
#include <vector>

#include "dnsl/field.hpp"

namespace dnsl {

/// The set of directly forced Fourier modes with their amplitudes.
/// Construction rejects zero modes, zero amplitudes and duplicates;
/// symmetry and the generator property are judged by check_condition_h.
class ForcingSet {
public:
    ForcingSet() = default;
    ForcingSet(std::vector<Mode> modes, std::vector<double> amplitudes);

    int size() const { return int(modes_.size()); }
    const std::vector<Mode>& modes() const { return modes_; }
    Mode mode(int i) const { return modes_[i]; }
    double amplitude(int i) const { return amplitudes_[i]; }
    const std::vector<double>& amplitudes() const { return amplitudes_; }
    bool contains(Mode l) const;

    /// sum of squared amplitudes (the noise intensity constant).
    double noise_intensity() const;

private:
    std::vector<Mode> modes_;
    std::vector<double> amplitudes_;
};

/// Paper-standard example set {(1,0),(-1,0),(1,1),(-1,-1)} with unit amplitudes.
ForcingSet example_forcing_set(double amplitude = 1.0);

/// Outcome of the forcing-set hypothesis test. The reason names the first
/// failed clause: symmetry, lattice generation, or the existence of two
/// non-parallel modes of different length.
struct ConditionHReport {
    bool satisfied = false;
    bool symmetric = false;
    bool generator = false;
    bool unequal_nonparallel = false;
    std::string reason; // empty when satisfied
};

ConditionHReport check_condition_h(const ForcingSet& k);

/// Linear map from the noise coordinates R^d into the truncated vorticity
/// space: channel i injects amplitude_i * |l_i|^2 at the basis site l_i.
class NoiseInjection {
public:
    NoiseInjection() = default;
    NoiseInjection(const ForcingSet& k, LatticePtr lattice);

    int channels() const { return int(scales_.size()); }
    const LatticePtr& lattice_ptr() const { return lattice_; }
    const ForcingSet& forcing() const { return forcing_; }
    Mode channel_mode(int i) const { return forcing_.mode(i); }
    int channel_site(int i) const { return sites_[i]; }
    double channel_scale(int i) const { return scales_[i]; }

    /// Q theta: coefficients of sum_i theta_i b_i |l_i|^2 phi_{l_i}.
    ScalarField apply(const std::vector<double>& theta) const;
    void add_scaled(ScalarField& w, const double* theta, double factor) const;

    /// Q* w in the coefficient dot product.
    std::vector<double> adjoint(const ScalarField& w) const;

    /// Basis image Q theta_i as a field.
    ScalarField column(int i) const;

private:
    ForcingSet forcing_;
    LatticePtr lattice_;
    std::vector<int> sites_;
    std::vector<double> scales_;
};

} // namespace dnsl
