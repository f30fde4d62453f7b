#pragma once

#include <cstddef>
#include <functional>

namespace mvtensor {

/// Worker count used by parallel loops: hardware concurrency, capped by the
/// MVTENSOR_THREADS environment variable when it holds a positive integer.
std::size_t worker_count();

/// Runs body(i) for i in [0, n). Each index is visited exactly once; callers
/// write results into per-index slots so the outcome does not depend on
/// scheduling. Exceptions thrown by body are rethrown (lowest index first).
void parallel_for(std::size_t n, const std::function<void(std::size_t)> &body);

} // namespace mvtensor
