#pragma once

#include <memory>
#include <vector>

#include "dnsl/field.hpp"

namespace dnsl {

using Grid = std::vector<double>; // M*M collocation values, row-major in (x1, x2)

/// FFT engine tied to one lattice truncation. Holds FFTW plans and scratch
/// buffers, so it is not thread-safe: use one Workspace per thread.
/// The collocation grid has M >= 3N+1 points per direction, which makes the
/// quadratic terms alias-free on the retained modes (2/3-style dealiasing).
class Workspace {
public:
    explicit Workspace(LatticePtr lattice);
    ~Workspace();
    Workspace(const Workspace&) = delete;
    Workspace& operator=(const Workspace&) = delete;

    const LatticePtr& lattice_ptr() const { return lat_; }
    const Lattice& lattice() const { return *lat_; }
    int grid_size() const { return m_; }
    int grid_points() const { return m_ * m_; }
    double quadrature_weight() const; // cell area of the collocation grid

    /// Coefficients -> collocation values.
    void synthesize(const ScalarField& w, Grid& grid);
    /// Collocation values -> coefficients on the truncated lattice
    /// (modes beyond the truncation are discarded, the mean is dropped).
    void analyze(const Grid& grid, ScalarField& w);

    Grid make_grid() const { return Grid(grid_points(), 0.0); }

    /// Smallest even 5-smooth integer >= 3N+1.
    static int dealiased_grid_size(int truncation);

private:
    struct Impl;
    LatticePtr lat_;
    int m_;
    std::unique_ptr<Impl> impl_;
};

} // namespace dnsl
