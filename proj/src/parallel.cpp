#include "copydetect/parallel.hpp"

#include <omp.h>

#include <cstdlib>
#include <string>

namespace copydetect {

namespace {
const int kInitialThreads = omp_get_max_threads();
}

void set_num_threads(int n) {
    omp_set_num_threads(n > 0 ? n : kInitialThreads);
}

int max_threads() {
    return omp_get_max_threads();
}

int threads_from_env() {
    const char* v = std::getenv("COPYDETECT_THREADS");
    if (!v || !*v)
        return 0;
    try {
        const int n = std::stoi(v);
        return n > 0 ? n : 0;
    } catch (const std::exception&) {
        return 0;
    }
}

} // namespace copydetect
