#include "dnsl/spectral_ops.hpp"

#include <cmath>

namespace dnsl {

// ---------------------------------------------------------------------------
// Coefficient-level operators. All sign conventions are pinned by the pair
// of identities curl(biot_savart(w)) = w and div(biot_savart(w)) = 0 with
// curl(u) = d2 u1 - d1 u2; the basis tests exercise them symbolically.
// ---------------------------------------------------------------------------

ScalarField derivative(const ScalarField& w, int axis) {
    const Lattice& lat = w.lattice();
    ScalarField out(w.lattice_ptr());
    for (int i = 0; i < lat.dim(); ++i) {
        const Mode l = lat.mode(i);
        const double c = w[lat.negated_index(i)];
        out[i] = (axis == 0 ? l.x : l.y) * c;
    }
    return out;
}

VelocityField biot_savart(const ScalarField& w) {
    const Lattice& lat = w.lattice();
    VelocityField u(w.lattice_ptr());
    for (int i = 0; i < lat.dim(); ++i) {
        const Mode l = lat.mode(i);
        const double c = w[lat.negated_index(i)] / lat.norm2(i);
        u.x[i] = -l.y * c;
        u.y[i] = l.x * c;
    }
    return u;
}

ScalarField curl(const VelocityField& u) {
    const Lattice& lat = u.lattice();
    ScalarField w(u.x.lattice_ptr());
    for (int i = 0; i < lat.dim(); ++i) {
        const Mode l = lat.mode(i);
        const int ni = lat.negated_index(i);
        w[i] = l.y * u.x[ni] - l.x * u.y[ni];
    }
    return w;
}

ScalarField biot_savart_adjoint(const VelocityField& u) {
    const Lattice& lat = u.lattice();
    ScalarField out(u.x.lattice_ptr());
    for (int i = 0; i < lat.dim(); ++i) {
        const Mode l = lat.mode(i);
        const int ni = lat.negated_index(i);
        out[i] = (l.y * u.x[ni] - l.x * u.y[ni]) / lat.norm2(i);
    }
    return out;
}

ScalarField divergence(const VelocityField& u) {
    const Lattice& lat = u.lattice();
    ScalarField d(u.x.lattice_ptr());
    for (int i = 0; i < lat.dim(); ++i) {
        const Mode l = lat.mode(i);
        const int ni = lat.negated_index(i);
        d[i] = l.x * u.x[ni] + l.y * u.y[ni];
    }
    return d;
}

double sobolev_norm(const ScalarField& w, double s) {
    const Lattice& lat = w.lattice();
    double acc = 0.0;
    for (int i = 0; i < lat.dim(); ++i) acc += std::pow(lat.norm2(i), s) * w[i] * w[i];
    // ||phi_l||_{L2}^2 = 2 pi^2 on the 2pi-periodic torus
    return std::sqrt(2.0 * M_PI * M_PI * acc);
}

double sobolev_norm(const VelocityField& u, double s) {
    const Lattice& lat = u.lattice();
    double acc = 0.0;
    for (int i = 0; i < lat.dim(); ++i) {
        const double k2s = std::pow(lat.norm2(i), s);
        acc += k2s * (u.x[i] * u.x[i] + u.y[i] * u.y[i]);
    }
    return std::sqrt(2.0 * M_PI * M_PI * acc);
}

// ---------------------------------------------------------------------------
// Dealiased collocation products
// ---------------------------------------------------------------------------

ScalarField advect(Workspace& ws, const VelocityField& u, const ScalarField& w) {
    Grid ux = ws.make_grid(), uy = ws.make_grid(), wx = ws.make_grid(), wy = ws.make_grid();
    ws.synthesize(u.x, ux);
    ws.synthesize(u.y, uy);
    ws.synthesize(derivative(w, 0), wx);
    ws.synthesize(derivative(w, 1), wy);
    for (size_t j = 0; j < ux.size(); ++j) ux[j] = ux[j] * wx[j] + uy[j] * wy[j];
    ScalarField out(w.lattice_ptr());
    ws.analyze(ux, out);
    return out;
}

FlowGrids make_flow_grids(Workspace& ws, const ScalarField& w) {
    FlowGrids g;
    g.ux = ws.make_grid();
    g.uy = ws.make_grid();
    g.wx = ws.make_grid();
    g.wy = ws.make_grid();
    const VelocityField u = biot_savart(w);
    ws.synthesize(u.x, g.ux);
    ws.synthesize(u.y, g.uy);
    ws.synthesize(derivative(w, 0), g.wx);
    ws.synthesize(derivative(w, 1), g.wy);
    return g;
}

ScalarField linearized_advect(Workspace& ws, const FlowGrids& wg, const ScalarField& xi) {
    Grid vx = ws.make_grid(), vy = ws.make_grid(), gx = ws.make_grid(), gy = ws.make_grid();
    const VelocityField uxi = biot_savart(xi);
    ws.synthesize(uxi.x, vx);
    ws.synthesize(uxi.y, vy);
    ws.synthesize(derivative(xi, 0), gx);
    ws.synthesize(derivative(xi, 1), gy);
    for (size_t j = 0; j < vx.size(); ++j)
        vx[j] = wg.ux[j] * gx[j] + wg.uy[j] * gy[j] + vx[j] * wg.wx[j] + vy[j] * wg.wy[j];
    ScalarField out(xi.lattice_ptr());
    ws.analyze(vx, out);
    return out;
}

ScalarField linearized_advect(Workspace& ws, const ScalarField& w, const ScalarField& xi) {
    const FlowGrids wg = make_flow_grids(ws, w);
    return linearized_advect(ws, wg, xi);
}

ScalarField linearized_advect_adjoint(Workspace& ws, const FlowGrids& wg, const ScalarField& eta) {
    // Adjoint of xi -> B(Kw, xi) is eta -> -B(Kw, eta) (transport by a
    // divergence-free field); adjoint of xi -> B(K xi, w) is
    // eta -> K*(eta * grad w).
    Grid ex = ws.make_grid(), ey = ws.make_grid(), eg = ws.make_grid();
    ws.synthesize(derivative(eta, 0), ex);
    ws.synthesize(derivative(eta, 1), ey);
    ws.synthesize(eta, eg);
    Grid part1 = ws.make_grid(), bx = ws.make_grid(), by = ws.make_grid();
    for (size_t j = 0; j < eg.size(); ++j) {
        part1[j] = -(wg.ux[j] * ex[j] + wg.uy[j] * ey[j]);
        bx[j] = eg[j] * wg.wx[j];
        by[j] = eg[j] * wg.wy[j];
    }
    ScalarField out(eta.lattice_ptr());
    ws.analyze(part1, out);
    VelocityField b(eta.lattice_ptr());
    ws.analyze(bx, b.x);
    ws.analyze(by, b.y);
    out += biot_savart_adjoint(b);
    return out;
}

} // namespace dnsl
