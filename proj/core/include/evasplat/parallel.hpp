#pragma once

#include <cstdint>
#include <functional>

namespace evasplat {

/// Process-wide worker cap. 0 means hardware concurrency. The CLI sets this
/// from --threads / EVA_SPLAT_THREADS before dispatching a command.
void set_worker_count(int n);
int worker_count();

/// Runs fn(begin..end) split into contiguous chunks, one per worker.
/// Work items must write disjoint outputs; reductions are the caller's
/// responsibility and must run in fixed order for deterministic results.
void parallel_for(std::int64_t begin, std::int64_t end,
                  const std::function<void(std::int64_t, std::int64_t)>& fn);

}  // namespace evasplat
