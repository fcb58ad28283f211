#pragma once

#include <cmath>
#include <cstdint>
#include <memory>
#include <vector>

#include "dnsl/errors.hpp"

namespace dnsl {

/// Integer Fourier mode on the 2-torus.
struct Mode {
    int x = 0;
    int y = 0;

    int norm2() const { return x * x + y * y; }
    double norm() const { return std::sqrt(double(norm2())); }
    Mode perp() const { return {-y, x}; }
    Mode negated() const { return {-x, -y}; }
    bool zero() const { return x == 0 && y == 0; }

    /// Sine branch of the real trigonometric basis (cosine branch otherwise).
    bool sine_branch() const { return x > 0 || (x == 0 && y > 0); }

    friend bool operator==(const Mode&, const Mode&) = default;
};

/// Enumeration of the truncated lattice {l : |l|_inf <= N, l != 0},
/// row-major over l1 then l2 with the origin removed. The index order is
/// part of the on-disk snapshot format, so it must never change.
class Lattice {
public:
    explicit Lattice(int truncation) : n_(truncation), side_(2 * truncation + 1) {
        if (truncation < 1) throw ValidationError("lattice truncation must be >= 1");
        dim_ = side_ * side_ - 1;
        norm2_.resize(dim_);
        modes_.resize(dim_);
        for (int i = 0; i < dim_; ++i) {
            Mode l = mode_of_raw(i < origin_raw() ? i : i + 1);
            modes_[i] = l;
            norm2_[i] = double(l.norm2());
        }
    }

    static std::shared_ptr<const Lattice> make(int truncation) {
        return std::make_shared<const Lattice>(truncation);
    }

    int truncation() const { return n_; }
    int dim() const { return dim_; }

    bool contains(Mode l) const {
        return !l.zero() && std::abs(l.x) <= n_ && std::abs(l.y) <= n_;
    }

    int index(Mode l) const {
        if (!contains(l)) throw RangeError("mode outside truncated lattice");
        int raw = (l.x + n_) * side_ + (l.y + n_);
        return raw < origin_raw() ? raw : raw - 1;
    }

    Mode mode(int index) const { return modes_[index]; }

    /// |l|^2 by packed index.
    double norm2(int index) const { return norm2_[index]; }
    const std::vector<double>& norm2_table() const { return norm2_; }

    /// Packed index of -l.
    int negated_index(int index) const {
        Mode l = modes_[index];
        return this->index(l.negated());
    }

    friend bool operator==(const Lattice& a, const Lattice& b) { return a.n_ == b.n_; }

private:
    int origin_raw() const { return n_ * side_ + n_; }
    Mode mode_of_raw(int raw) const { return {raw / side_ - n_, raw % side_ - n_}; }

    int n_;
    int side_;
    int dim_;
    std::vector<double> norm2_;
    std::vector<Mode> modes_;
};

using LatticePtr = std::shared_ptr<const Lattice>;

} // namespace dnsl
