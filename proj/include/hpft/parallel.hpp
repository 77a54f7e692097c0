// SPDX-License-Identifier: Apache-2.0
#pragma once

// Static-partition parallel loop for independent cells. Each index is
// processed exactly once; workers write only to their own slots, so results
// are deterministic regardless of the thread count. The first exception
// thrown by any task is rethrown on the calling thread after all workers
// finish.

#include <functional>

namespace hpft {

void parallel_for(int n, int threads, const std::function<void(int)>& fn);

// Thread-count resolution used by the command-line tools: explicit value,
// else hardware concurrency, clamped to at least 1.
int resolve_threads(int requested);

}  // namespace hpft
