#pragma once

#include <cstddef>
#include <functional>

namespace flpo {

// Worker thread cap: FLPO_THREADS when set and positive, else hardware concurrency.
std::size_t default_thread_count();

// Runs fn(i) for i in [0, n) on up to `threads` workers (0 = default_thread_count()).
// Work is split into contiguous blocks; callers write to per-index slots and
// reduce afterwards so results never depend on scheduling.
void parallel_for(std::size_t n, std::size_t threads, const std::function<void(std::size_t)>& fn);

}  // namespace flpo
