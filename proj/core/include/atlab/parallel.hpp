#pragma once

#include <cstdint>
#include <functional>

namespace atlab {

// Number of worker threads used by parallel_for. Defaults to the hardware
// concurrency, overridable with the ATLAB_THREADS environment variable.
int worker_threads();

// Splits [0, n) into contiguous chunks and runs body(begin, end) on each,
// possibly concurrently. Chunks never overlap, so writes to disjoint output
// ranges are race-free, and per-element work stays in a fixed sequential
// order no matter how many threads run. Falls through to a plain loop for
// small n or a single worker.
void parallel_for(std::int64_t n, const std::function<void(std::int64_t, std::int64_t)>& body);

}  // namespace atlab
