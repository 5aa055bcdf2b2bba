#include "ctsplat/threading.hpp"

#include <atomic>
#include <cstdlib>
#include <thread>

namespace ctsplat {

namespace {
std::atomic<int> g_thread_cap{0};  // 0 = unset
}

int thread_count() {
    const int cap = g_thread_cap.load(std::memory_order_relaxed);
    if (cap > 0) return cap;
    if (const char* env = std::getenv("CTSPLAT_THREADS")) {
        const int n = std::atoi(env);
        if (n > 0) return n;
    }
    const unsigned hw = std::thread::hardware_concurrency();
    return hw > 0 ? static_cast<int>(hw) : 1;
}

void set_thread_count(int n) {
    g_thread_cap.store(n > 0 ? n : 0, std::memory_order_relaxed);
}

}  // namespace ctsplat
