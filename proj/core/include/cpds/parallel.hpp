#pragma once

#include <cstdint>
#include <functional>

namespace cpds {

// Number of hardware threads, at least 1.
int hardware_workers();

// Resolve a requested worker count: values >= 1 are taken as-is; 0 means
// "auto" (the CPDS_WORKERS environment variable if set, otherwise the
// hardware count).  Negative counts are rejected.
int resolve_worker_count(int requested);

// Run fn(begin, end, worker) over a contiguous partition of [0, total) into
// at most `workers` chunks.  Chunk boundaries depend only on (total,
// workers), never on scheduling, so any value-independent reduction done per
// chunk and then merged in chunk order is reproducible.  Exceptions from
// workers are rethrown (first one wins) after all threads join.
void parallel_chunks(int64_t total, int workers,
                     const std::function<void(int64_t, int64_t, int)>& fn);

}  // namespace cpds
