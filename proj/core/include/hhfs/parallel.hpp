#pragma once

#include <cstddef>
#include <functional>

namespace hhfs {

/// Number of worker threads to use for `requested` (0 = all hardware threads).
int resolve_threads(int requested);

/// Runs fn(i) for every i in [0, count) across up to `threads` workers using a
/// static block partition. Work items must be independent; exceptions are
/// captured and the first one rethrown after all workers join. Results written
/// to distinct slots by index are deterministic regardless of thread count.
void parallel_for(std::size_t count, int threads, const std::function<void(std::size_t)>& fn);

}  // namespace hhfs
