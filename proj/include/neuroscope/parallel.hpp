#pragma once

#include <cstddef>
#include <functional>

namespace neuroscope {

/// Worker count used when a call passes jobs = 0. Starts at the number of
/// hardware threads.
std::size_t default_jobs();
void set_default_jobs(std::size_t jobs);

/// Runs fn(i) for i in [0, n) on up to `jobs` threads. Each index is visited
/// exactly once; results must be written to per-index slots. The first
/// exception thrown by a worker is rethrown on the caller.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn, std::size_t jobs = 0);

}  // namespace neuroscope
