#pragma once

#include <cstdint>
#include <functional>

namespace stavc {

// Number of worker threads used by heavy kernels (GEMM). Defaults to the
// hardware concurrency, capped by the STAVC_THREADS environment variable.
int worker_threads();

// Runs fn(begin, end) over a static contiguous partition of [0, n). Every
// index is processed by exactly one worker with a fixed per-index reduction
// order, so results are bitwise identical for any thread count.
void parallel_for(int64_t n, const std::function<void(int64_t, int64_t)>& fn);

}  // namespace stavc
