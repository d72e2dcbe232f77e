#include "sinomap/parallel.hpp"

#include <algorithm>
#include <cstdlib>
#include <thread>

namespace sinomap {

int thread_cap() {
    static const int cap = [] {
        int n = static_cast<int>(std::thread::hardware_concurrency());
        if (n < 1) n = 1;
        if (const char* env = std::getenv("SINOMAP_THREADS")) {
            int limit = std::atoi(env);
            if (limit >= 1) n = std::min(n, limit);
        }
        return n;
    }();
    return cap;
}

}  // namespace sinomap
