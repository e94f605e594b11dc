#include "granur/parallel.hpp"

#include <atomic>

namespace granur {
namespace {

std::atomic<int> g_thread_cap{0};

}  // namespace

void set_thread_cap(int n) { g_thread_cap.store(n > 0 ? n : 0); }

int thread_cap() {
    const int cap = g_thread_cap.load();
    if (cap > 0) return cap;
#ifdef _OPENMP
    return omp_get_max_threads();
#else
    return 1;
#endif
}

}  // namespace granur
