#pragma once

#include <cstddef>
#include <cstdint>
#include <exception>
#include <mutex>

namespace copydetect {

/// Caps the OpenMP worker pool; n <= 0 restores the default.
void set_num_threads(int n);
int max_threads();
/// Thread count from COPYDETECT_THREADS, or 0 when unset or invalid.
int threads_from_env();

/// OpenMP loop over [0, n) with dynamic scheduling. The first exception (by
/// index) thrown by `body` is rethrown after the loop.
template <class Body>
void parallel_for(std::size_t n, Body&& body) {
    std::exception_ptr error;
    std::size_t error_index = n;
    std::mutex mtx;
    const auto count = static_cast<std::int64_t>(n);
#pragma omp parallel for schedule(dynamic, 8)
    for (std::int64_t k = 0; k < count; ++k) {
        const auto i = static_cast<std::size_t>(k);
        try {
            body(i);
        } catch (...) {
            std::lock_guard lock(mtx);
            if (i < error_index) {
                error_index = i;
                error = std::current_exception();
            }
        }
    }
    if (error)
        std::rethrow_exception(error);
}

} // namespace copydetect
