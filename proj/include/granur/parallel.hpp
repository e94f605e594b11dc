#pragma once

#include <cstddef>
#include <exception>
#include <mutex>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace granur {

/// Selects between the OpenMP kernel and its serial reference. Both produce
/// identical results; the serial path exists for testing and --threads 1.
enum class Exec { serial, parallel };

/// Caps worker threads for every parallel kernel (<= 0 restores the default).
void set_thread_cap(int n);
int thread_cap();

/// Runs body(i) for i in [0, n). Iterations must write to disjoint outputs.
/// The first exception thrown by any iteration is rethrown after the loop.
template <typename Body>
void parallel_for(std::size_t n, Exec exec, Body&& body) {
#ifdef _OPENMP
    if (exec == Exec::parallel && n > 1 && thread_cap() != 1) {
        std::exception_ptr failure;
        std::mutex failure_mutex;
        const auto count = static_cast<long long>(n);
#pragma omp parallel for schedule(dynamic, 1) num_threads(thread_cap())
        for (long long i = 0; i < count; ++i) {
            try {
                body(static_cast<std::size_t>(i));
            } catch (...) {
                std::lock_guard lock(failure_mutex);
                if (!failure) failure = std::current_exception();
            }
        }
        if (failure) std::rethrow_exception(failure);
        return;
    }
#endif
    (void)exec;
    for (std::size_t i = 0; i < n; ++i) body(i);
}

}  // namespace granur
