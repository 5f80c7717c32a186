#pragma once

#include <cstddef>
#include <functional>

namespace attnshap {

/// Worker cap: ATTNSHAP_THREADS when set (minimum 1), otherwise the hardware
/// concurrency.
unsigned thread_cap();

/// Runs fn(0..n-1) across up to thread_cap() workers with a static block
/// partition. The work per index must be independent; results therefore do
/// not depend on the worker count. The first exception thrown by any worker
/// is rethrown in the caller.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

}  // namespace attnshap
