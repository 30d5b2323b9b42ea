#pragma once

#include <cstdint>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace sphs {

// Worker-count resolution: 0 means "whatever OpenMP gives us", anything else
// is used verbatim (and is also valid without OpenMP, where it degenerates to
// the serial loop).
inline int resolve_workers(int requested) {
#ifdef _OPENMP
    return requested > 0 ? requested : omp_get_max_threads();
#else
    return requested > 0 ? requested : 1;
#endif
}

// Serial reference runner. Kept separate so tests and the benchmark can pin
// the OpenMP runner against it; both must produce identical bytes because
// every path writes only its own slot and draws only its own counters.
template <class F>
void serial_paths(int64_t count, F&& body) {
    for (int64_t p = 0; p < count; ++p) body(p);
}

template <class F>
void parallel_paths(int64_t count, int workers, F&& body) {
#ifdef _OPENMP
    const int w = resolve_workers(workers);
#pragma omp parallel for schedule(dynamic, 4) num_threads(w)
    for (int64_t p = 0; p < count; ++p) body(p);
#else
    (void)workers;
    serial_paths(count, body);
#endif
}

}  // namespace sphs
