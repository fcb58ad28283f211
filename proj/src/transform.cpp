#include "dnsl/transform.hpp"

#include <fftw3.h>

#include <cmath>
#include <mutex>

namespace dnsl {

namespace {
// FFTW's planner mutates global state; executions are thread-safe.
std::mutex planner_mutex;
} // namespace

struct Workspace::Impl {
    fftw_complex* buf = nullptr;
    fftw_plan forward = nullptr;  // sign -1, used by analyze
    fftw_plan backward = nullptr; // sign +1, used by synthesize

    // per packed site: buffer offsets of +l and -l, and the branch flag
    std::vector<size_t> plus, minus;
    std::vector<unsigned char> sine;

    explicit Impl(const Lattice& lat, int m) {
        {
            std::lock_guard<std::mutex> lock(planner_mutex);
            buf = fftw_alloc_complex(size_t(m) * m);
            forward = fftw_plan_dft_2d(m, m, buf, buf, FFTW_FORWARD, FFTW_ESTIMATE);
            backward = fftw_plan_dft_2d(m, m, buf, buf, FFTW_BACKWARD, FFTW_ESTIMATE);
        }
        plus.resize(lat.dim());
        minus.resize(lat.dim());
        sine.resize(lat.dim());
        auto wrap = [m](int v) { return size_t((v % m + m) % m); };
        for (int i = 0; i < lat.dim(); ++i) {
            const Mode l = lat.mode(i);
            plus[size_t(i)] = wrap(l.x) * m + wrap(l.y);
            minus[size_t(i)] = wrap(-l.x) * m + wrap(-l.y);
            sine[size_t(i)] = l.sine_branch() ? 1 : 0;
        }
    }
    ~Impl() {
        std::lock_guard<std::mutex> lock(planner_mutex);
        fftw_destroy_plan(forward);
        fftw_destroy_plan(backward);
        fftw_free(buf);
    }
};

int Workspace::dealiased_grid_size(int truncation) {
    auto smooth = [](int m) {
        for (int p : {2, 3, 5})
            while (m % p == 0) m /= p;
        return m == 1;
    };
    int m = 3 * truncation + 1;
    while (!smooth(m)) ++m;
    return m;
}

Workspace::Workspace(LatticePtr lattice)
    : lat_(std::move(lattice)), m_(dealiased_grid_size(lat_->truncation())),
      impl_(std::make_unique<Impl>(*lat_, m_)) {}

Workspace::~Workspace() = default;

double Workspace::quadrature_weight() const {
    const double h = 2.0 * M_PI / m_;
    return h * h;
}

void Workspace::synthesize(const ScalarField& w, Grid& grid) {
    const int dim = lat_->dim();
    fftw_complex* buf = impl_->buf;
    std::fill(&buf[0][0], &buf[0][0] + 2 * size_t(m_) * m_, 0.0);
    // Real basis -> complex spectrum: a sine-branch coefficient c at l
    // contributes -+ i c/2 at +-l, a cosine-branch coefficient -c/2 at both.
    for (int i = 0; i < dim; ++i) {
        const double half = 0.5 * w[i];
        if (half == 0.0) continue;
        fftw_complex& p = buf[impl_->plus[size_t(i)]];
        fftw_complex& q = buf[impl_->minus[size_t(i)]];
        if (impl_->sine[size_t(i)]) {
            p[1] -= half;
            q[1] += half;
        } else {
            p[0] -= half;
            q[0] -= half;
        }
    }
    fftw_execute(impl_->backward);
    grid.resize(size_t(m_) * m_);
    for (size_t j = 0; j < grid.size(); ++j) grid[j] = buf[j][0];
}

void Workspace::analyze(const Grid& grid, ScalarField& w) {
    fftw_complex* buf = impl_->buf;
    for (size_t j = 0; j < grid.size(); ++j) {
        buf[j][0] = grid[j];
        buf[j][1] = 0.0;
    }
    fftw_execute(impl_->forward);
    const double scale = -2.0 / (double(m_) * m_);
    if (w.dim() != lat_->dim()) w = ScalarField(lat_);
    for (int i = 0; i < lat_->dim(); ++i) {
        const fftw_complex& f = buf[impl_->plus[size_t(i)]];
        w[i] = scale * (impl_->sine[size_t(i)] ? f[1] : f[0]);
    }
}

} // namespace dnsl
