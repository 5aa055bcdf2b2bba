// threading.hpp: process-wide worker thread cap.
//
// All parallel loops in this library are decomposed so that results are
// bit-identical for any worker count; these helpers only bound resource use.
#pragma once

namespace ctsplat {

// Effective worker count: the last set_thread_count() value if any, else the
// CTSPLAT_THREADS environment variable, else the hardware concurrency.
int thread_count();

// Caps workers for subsequent parallel regions; n < 1 restores the default.
void set_thread_count(int n);

}  // namespace ctsplat
