#pragma once

#include <algorithm>
#include <cstddef>
#include <exception>
#include <functional>
#include <thread>
#include <vector>

namespace rarelab {

/// Process-wide cap on worker threads (the CLI's --threads knob); 0 means hardware concurrency.
void set_thread_limit(unsigned limit);
unsigned thread_limit();

/**
 * Runs body(k) for k in [0, count) on up to thread_limit() workers.
 * Each index is handled exactly once; the first exception is rethrown after all workers join.
 */
void parallel_for(std::size_t count, const std::function<void(std::size_t)>& body);

}  // namespace rarelab
