#pragma once

#include <cstdint>
#include <exception>

#include <omp.h>

namespace greenpeel {

/// Worker count for the data-parallel kernels. workers == 1 runs the plain
/// serial loop, which is the reference the OpenMP path is tested against.
struct Execution {
    int workers = 1;

    static Execution serial() { return {1}; }
    static Execution all_cores() { return {omp_get_max_threads()}; }
};

/// Runs body(i) for i in [0, count). Each index is processed by exactly one
/// thread, so any reduction inside body is ordered identically for every
/// worker count.
template <class Body>
void parallel_for(Execution exec, std::int64_t count, Body&& body) {
    if (exec.workers <= 1 || count <= 1) {
        for (std::int64_t i = 0; i < count; ++i) body(i);
        return;
    }
    // Exceptions may not leave an OpenMP region; keep the one from the lowest
    // index so the reported failure does not depend on scheduling.
    std::exception_ptr first;
    std::int64_t first_index = count;
#pragma omp parallel for schedule(dynamic) num_threads(exec.workers)
    for (std::int64_t i = 0; i < count; ++i) {
        try {
            body(i);
        } catch (...) {
#pragma omp critical(greenpeel_parallel_for_error)
            if (i < first_index) {
                first_index = i;
                first = std::current_exception();
            }
        }
    }
    if (first) std::rethrow_exception(first);
}

}  // namespace greenpeel
