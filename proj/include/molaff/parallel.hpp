#pragma once

#include <cstddef>
#include <functional>

namespace molaff {

/// Worker count: MOLAFF_THREADS if set and positive, else hardware concurrency.
std::size_t thread_count();

/// Runs body(i) for i in [0, n). Each index is handled by exactly one worker,
/// so bodies that only write slot i produce schedule-independent results.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

}  // namespace molaff
