#pragma once

#include <cstddef>
#include <functional>
#include <thread>

namespace stdown::util {

// Global worker budget (CLI --threads / STDOWN_THREADS). 0 = hardware.
void set_thread_count(int n);
int thread_count();

// Runs fn(i) for i in [0, n). Work is split into contiguous chunks, one
// per worker; fn must write only to slot i so results are independent of
// the worker count. threads <= 1 runs inline.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

}  // namespace stdown::util
