#pragma once

#include <cstddef>
#include <functional>

namespace geoflow {

/// Worker count: GEOFLOW_THREADS if set, else hardware concurrency, clamped to [1, 16].
std::size_t worker_count();

/// Runs fn over [begin, end) split into fixed-size chunks processed by a small
/// thread team. Chunk boundaries depend only on the range and grain, never on
/// the worker count, so reductions accumulated per chunk stay deterministic.
void parallel_for(std::size_t begin, std::size_t end,
                  const std::function<void(std::size_t, std::size_t)>& fn,
                  std::size_t grain = 1024);

}  // namespace geoflow
