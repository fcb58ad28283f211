#pragma once

#include <atomic>
#include <cstddef>
#include <exception>
#include <functional>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace dnsl {

/// Parallel-map capability handed to experiment modules by the harness.
/// Tasks must be independent; callers collect per-index results into
/// preallocated slots and reduce serially in index order, so the numbers
/// are identical for any thread count.
class ParallelMap {
public:
    explicit ParallelMap(int threads = 0) : threads_(threads > 0 ? threads : default_threads()) {}

    int threads() const { return threads_; }

    static int default_threads() {
#ifdef _OPENMP
        return omp_get_num_procs();
#else
        return 1;
#endif
    }

    template <class F>
    void run(std::ptrdiff_t count, F&& task) const {
        if (threads_ <= 1) {
            for (std::ptrdiff_t i = 0; i < count; ++i) task(i);
            return;
        }
        std::exception_ptr failure = nullptr;
        std::atomic<bool> failed{false};
#ifdef _OPENMP
#pragma omp parallel for schedule(dynamic, 1) num_threads(threads_)
#endif
        for (std::ptrdiff_t i = 0; i < count; ++i) {
            if (failed.load(std::memory_order_relaxed)) continue;
            try {
                task(i);
            } catch (...) {
                if (!failed.exchange(true)) failure = std::current_exception();
            }
        }
        if (failure) std::rethrow_exception(failure);
    }

private:
    int threads_;
};

} // namespace dnsl
