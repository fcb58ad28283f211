#include "dnsl/reference_ops.hpp"

#include <cmath>
#include <complex>

namespace dnsl {
namespace ref {

double basis_value(Mode l, double x1, double x2) {
    const double phase = l.x * x1 + l.y * x2;
    return l.sine_branch() ? std::sin(phase) : -std::cos(phase);
}

void velocity_basis_value(Mode l, double x1, double x2, double& e1, double& e2) {
    const double phase = l.x * x1 + l.y * x2;
    const double t = l.sine_branch() ? std::cos(phase) : std::sin(phase);
    e1 = -l.y * t;
    e2 = l.x * t;
}

double evaluate(const ScalarField& w, double x1, double x2) {
    const Lattice& lat = w.lattice();
    double acc = 0.0;
    for (int i = 0; i < lat.dim(); ++i)
        if (w[i] != 0.0) acc += w[i] * basis_value(lat.mode(i), x1, x2);
    return acc;
}

std::vector<double> synthesize(const ScalarField& w, int grid_size) {
    std::vector<double> grid(size_t(grid_size) * grid_size);
    const double h = 2.0 * M_PI / grid_size;
    for (int j1 = 0; j1 < grid_size; ++j1)
        for (int j2 = 0; j2 < grid_size; ++j2) grid[size_t(j1) * grid_size + j2] = evaluate(w, j1 * h, j2 * h);
    return grid;
}

namespace {

// Complex Fourier coefficients over the doubled lattice |l|_inf <= 2N,
// indexed densely; the real basis maps in as c_sin/(2i) and -c_cos/2.
struct ComplexGrid {
    int n;
    int side;
    std::vector<std::complex<double>> v;

    explicit ComplexGrid(int half_width) : n(half_width), side(2 * half_width + 1), v(size_t(side) * side) {}
    std::complex<double>& at(int l1, int l2) { return v[size_t(l1 + n) * side + (l2 + n)]; }
    std::complex<double> at(int l1, int l2) const { return v[size_t(l1 + n) * side + (l2 + n)]; }
    bool inside(int l1, int l2) const { return std::abs(l1) <= n && std::abs(l2) <= n; }
};

ComplexGrid to_complex(const ScalarField& w, int half_width) {
    ComplexGrid g(half_width);
    const Lattice& lat = w.lattice();
    const std::complex<double> half_i(0.0, 0.5);
    for (int i = 0; i < lat.dim(); ++i) {
        const double c = w[i];
        if (c == 0.0) continue;
        const Mode l = lat.mode(i);
        if (l.sine_branch()) {
            g.at(l.x, l.y) += -half_i * c;
            g.at(-l.x, -l.y) += half_i * c;
        } else {
            g.at(l.x, l.y) += std::complex<double>(-0.5 * c, 0.0);
            g.at(-l.x, -l.y) += std::complex<double>(-0.5 * c, 0.0);
        }
    }
    return g;
}

} // namespace

ScalarField advect(const VelocityField& u, const ScalarField& w) {
    const Lattice& lat = w.lattice();
    const int n = lat.truncation();
    const ComplexGrid cu1 = to_complex(u.x, n);
    const ComplexGrid cu2 = to_complex(u.y, n);

    // grad w in complex form: coefficient of e^{i<l,x>} times i*l
    ComplexGrid cw = to_complex(w, n);
    ComplexGrid gx(n), gy(n);
    for (int l1 = -n; l1 <= n; ++l1)
        for (int l2 = -n; l2 <= n; ++l2) {
            const std::complex<double> il(0.0, 1.0);
            gx.at(l1, l2) = il * double(l1) * cw.at(l1, l2);
            gy.at(l1, l2) = il * double(l2) * cw.at(l1, l2);
        }

    // exact convolution of the truncated series, then truncate to |k|_inf <= N
    ComplexGrid prod(n);
    for (int a1 = -n; a1 <= n; ++a1)
        for (int a2 = -n; a2 <= n; ++a2) {
            const std::complex<double> f1 = cu1.at(a1, a2);
            const std::complex<double> f2 = cu2.at(a1, a2);
            if (f1 == 0.0 && f2 == 0.0) continue;
            for (int b1 = -n; b1 <= n; ++b1)
                for (int b2 = -n; b2 <= n; ++b2) {
                    const int k1 = a1 + b1, k2 = a2 + b2;
                    if (!prod.inside(k1, k2)) continue;
                    prod.at(k1, k2) += f1 * gx.at(b1, b2) + f2 * gy.at(b1, b2);
                }
        }

    ScalarField out(w.lattice_ptr());
    for (int i = 0; i < lat.dim(); ++i) {
        const Mode l = lat.mode(i);
        const std::complex<double> f = prod.at(l.x, l.y);
        out[i] = l.sine_branch() ? -2.0 * f.imag() : -2.0 * f.real();
    }
    return out;
}

} // namespace ref
} // namespace dnsl
