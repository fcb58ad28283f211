#include "dnsl/variational.hpp"

#include <cmath>

namespace dnsl {

namespace {

Eigen::Map<const Eigen::VectorXd> as_vec(const ScalarField& f) {
    return {f.data(), f.dim()};
}

ScalarField from_vec(const LatticePtr& lat, const Eigen::VectorXd& v) {
    ScalarField f(lat);
    for (int i = 0; i < f.dim(); ++i) f[i] = v[i];
    return f;
}

} // namespace

TangentOps::TangentOps(Workspace& ws, const FlowModel& model, const TrajectoryRecord& traj)
    : ws_(&ws), model_(&model), traj_(&traj), stepper_(model, traj.dt), cache_(traj.steps()) {}

const FlowGrids& TangentOps::grids(int k) const {
    auto& slot = cache_[size_t(k)];
    if (!slot) slot = make_flow_grids(*ws_, traj_->state(k));
    return *slot;
}

void TangentOps::decay_in_place(ScalarField& f) const {
    const auto& e = stepper_.decay();
    for (int i = 0; i < f.dim(); ++i) f[i] *= e[i];
}

void TangentOps::tangent_step(ScalarField& xi, int k) const {
    if (model_->nonlinear) xi.axpy(-traj_->dt, linearized_advect(*ws_, grids(k), xi));
    decay_in_place(xi);
}

void TangentOps::tangent_step_adjoint(ScalarField& eta, int k) const {
    decay_in_place(eta);
    if (model_->nonlinear) eta.axpy(-traj_->dt, linearized_advect_adjoint(*ws_, grids(k), eta));
}

void TangentOps::forced_tangent_step(ScalarField& x, int k, const double* theta, double scale) const {
    if (model_->nonlinear) x.axpy(-traj_->dt, linearized_advect(*ws_, grids(k), x));
    if (theta != nullptr) model_->injection.add_scaled(x, theta, scale * traj_->dt);
    decay_in_place(x);
}

ScalarField TangentOps::tangent(ScalarField xi, int from, int to) const {
    for (int k = from; k < to; ++k) tangent_step(xi, k);
    return xi;
}

ScalarField TangentOps::tangent_adjoint(ScalarField eta, int from, int to) const {
    for (int k = to - 1; k >= from; --k) tangent_step_adjoint(eta, k);
    return eta;
}

ScalarField TangentOps::second_variation(ScalarField phi, ScalarField psi, int from, int to) const {
    const double dt = traj_->dt;
    ScalarField zeta(model_->lattice);
    for (int k = from; k < to; ++k) {
        if (model_->nonlinear) {
            ScalarField src = linearized_advect(*ws_, phi, psi);
            src += linearized_advect(*ws_, grids(k), zeta);
            zeta.axpy(-dt, src);
        }
        decay_in_place(zeta);
        tangent_step(phi, k);
        tangent_step(psi, k);
    }
    return zeta;
}

ScalarField TangentOps::noise_response(const ControlPath& v, int from, int to) const {
    ScalarField zeta(model_->lattice);
    for (int k = from; k < to; ++k) {
        const int cell = k - v.start_index;
        const double* theta = (cell >= 0 && cell < v.cells()) ? v.cell(cell) : nullptr;
        forced_tangent_step(zeta, k, theta, 1.0);
    }
    return zeta;
}

ControlPath TangentOps::noise_response_adjoint(const ScalarField& xi, int from, int to) const {
    ControlPath out(from, traj_->dt, model_->channels(), to - from);
    ScalarField zstar = xi;
    for (int k = to - 1; k >= from; --k) {
        decay_in_place(zstar);
        const auto vals = model_->injection.adjoint(zstar);
        std::copy(vals.begin(), vals.end(), out.cell(k - from));
        if (model_->nonlinear) zstar.axpy(-traj_->dt, linearized_advect_adjoint(*ws_, grids(k), zstar));
    }
    return out;
}

ControlFactor TangentOps::factor(int from, int to) const {
    const int d = model_->channels();
    const int cells = to - from;
    ControlFactor f;
    f.start_index = from;
    f.end_index = to;
    f.dt = traj_->dt;
    f.channels = d;
    f.f.resize(model_->dim(), size_t(cells) * d);

    const double root_dt = std::sqrt(traj_->dt);
    std::vector<ScalarField> cols;
    cols.reserve(size_t(cells) * d);
    for (int k = from; k < to; ++k) {
        for (auto& c : cols) tangent_step(c, k);
        for (int i = 0; i < d; ++i) {
            ScalarField c = model_->injection.column(i);
            c *= root_dt;
            decay_in_place(c);
            cols.push_back(std::move(c));
        }
    }
    for (size_t j = 0; j < cols.size(); ++j) f.f.col(Eigen::Index(j)) = as_vec(cols[j]);
    return f;
}

ScalarField TangentOps::injected_channel(int ch) const {
    ScalarField c = model_->injection.column(ch);
    decay_in_place(c);
    return c;
}

ScalarField TangentOps::tangent_noise_derivative(int r, int ch, int from, int to, ScalarField xi) const {
    const double dt = traj_->dt;
    ScalarField zeta(model_->lattice);
    if (!model_->nonlinear || r >= to - 1) return zeta; // linear flow has no noise sensitivity

    ScalarField eta(model_->lattice);
    bool eta_live = false;
    for (int k = std::min(from, r); k < to; ++k) {
        // source uses the states before this step
        if (eta_live && k >= from) {
            ScalarField src = linearized_advect(*ws_, eta, xi);
            src += linearized_advect(*ws_, grids(k), zeta);
            zeta.axpy(-dt, src);
            decay_in_place(zeta);
        }
        if (eta_live) tangent_step(eta, k);
        if (k == r) {
            eta = injected_channel(ch);
            eta_live = true;
        }
        if (k >= from) tangent_step(xi, k);
    }
    return zeta;
}

// ---------------------------------------------------------------------------
// One-shot wrappers
// ---------------------------------------------------------------------------

namespace {
std::pair<int, int> window(const TrajectoryRecord& traj, double s, double t) {
    const int a = traj.index_of(s);
    const int b = traj.index_of(t);
    if (a > b) throw RangeError("interval start exceeds its end");
    return {a, b};
}
} // namespace

ScalarField propagate_tangent(Workspace& ws, const FlowModel& model, const TrajectoryRecord& traj,
                              double s, double t, const ScalarField& xi) {
    const auto [a, b] = window(traj, s, t);
    return TangentOps(ws, model, traj).tangent(xi, a, b);
}

ScalarField propagate_second_variation(Workspace& ws, const FlowModel& model, const TrajectoryRecord& traj,
                                       double s, double t, const ScalarField& phi, const ScalarField& psi) {
    const auto [a, b] = window(traj, s, t);
    return TangentOps(ws, model, traj).second_variation(phi, psi, a, b);
}

ScalarField apply_noise_response(Workspace& ws, const FlowModel& model, const TrajectoryRecord& traj,
                                 double s, double t, const ControlPath& v) {
    const auto [a, b] = window(traj, s, t);
    return TangentOps(ws, model, traj).noise_response(v, a, b);
}

ControlPath apply_noise_response_adjoint(Workspace& ws, const FlowModel& model, const TrajectoryRecord& traj,
                                         double s, double t, const ScalarField& xi) {
    const auto [a, b] = window(traj, s, t);
    return TangentOps(ws, model, traj).noise_response_adjoint(xi, a, b);
}

MalliavinMatrix assemble_malliavin_matrix(Workspace& ws, const FlowModel& model, const TrajectoryRecord& traj,
                                          double s, double t, int dense_cap) {
    if (model.dim() > dense_cap)
        throw ResourceError("Galerkin dimension " + std::to_string(model.dim()) +
                            " exceeds the dense cap " + std::to_string(dense_cap) +
                            "; use the matrix-free factor form (TangentOps::factor)");
    const auto [a, b] = window(traj, s, t);
    const ControlFactor f = TangentOps(ws, model, traj).factor(a, b);
    MalliavinMatrix m;
    m.start_index = a;
    m.end_index = b;
    m.dt = traj.dt;
    m.mat.noalias() = f.f * f.f.transpose();
    return m;
}

ScalarField regularized_solve(const MalliavinMatrix& m, double beta, const ScalarField& xi) {
    if (beta <= 0.0) throw ValidationError("regularized solve requires beta > 0");
    Eigen::MatrixXd g = m.mat;
    g.diagonal().array() += beta;
    const Eigen::LLT<Eigen::MatrixXd> llt(g);
    Eigen::VectorXd x = llt.solve(as_vec(xi));
    x += llt.solve(as_vec(xi) - g * x); // one refinement pass
    return from_vec(xi.lattice_ptr(), x);
}

ScalarField regularized_solve(const ControlFactor& f, double beta, const ScalarField& xi) {
    if (beta <= 0.0) throw ValidationError("regularized solve requires beta > 0");
    // Woodbury: (F F^T + beta)^{-1} b = (b - F (F^T F + beta)^{-1} F^T b) / beta
    Eigen::MatrixXd g = f.f.transpose() * f.f;
    g.diagonal().array() += beta;
    const Eigen::VectorXd rhs = f.f.transpose() * as_vec(xi);
    const Eigen::VectorXd y = Eigen::LLT<Eigen::MatrixXd>(g).solve(rhs);
    const Eigen::VectorXd x = (as_vec(xi) - f.f * y) / beta;
    return from_vec(xi.lattice_ptr(), x);
}

} // namespace dnsl
