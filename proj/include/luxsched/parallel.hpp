#pragma once

#include <cstddef>
#include <functional>

namespace luxsched {

/// Worker count: LUXSCHED_THREADS when set to a positive integer, otherwise
/// the hardware concurrency (at least 1).
std::size_t thread_count();

/// Runs body(i) for i in [0, n) across up to thread_count() threads. Each index
/// is visited exactly once; callers write results into pre-sized slots so the
/// outcome does not depend on scheduling. The first exception is rethrown.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

}  // namespace luxsched
