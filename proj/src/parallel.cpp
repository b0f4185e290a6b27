#include "geoflow/parallel.hpp"

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <thread>
#include <vector>

namespace geoflow {

std::size_t worker_count() {
  static const std::size_t n = [] {
    if (const char* env = std::getenv("GEOFLOW_THREADS")) {
      long v = std::strtol(env, nullptr, 10);
      if (v >= 1) return std::min<std::size_t>(static_cast<std::size_t>(v), 16);
    }
    unsigned hw = std::thread::hardware_concurrency();
    return std::min<std::size_t>(hw ? hw : 1, 16);
  }();
  return n;
}

void parallel_for(std::size_t begin, std::size_t end,
                  const std::function<void(std::size_t, std::size_t)>& fn,
                  std::size_t grain) {
  if (end <= begin) return;
  const std::size_t total = end - begin;
  const std::size_t workers = worker_count();
  if (workers == 1 || total <= grain) {
    fn(begin, end);
    return;
  }
  const std::size_t chunks = (total + grain - 1) / grain;
  std::atomic<std::size_t> next{0};
  auto run = [&] {
    for (;;) {
      std::size_t c = next.fetch_add(1);
      if (c >= chunks) break;
      std::size_t lo = begin + c * grain;
      std::size_t hi = std::min(end, lo + grain);
      fn(lo, hi);
    }
  };
  std::vector<std::thread> team;
  const std::size_t spawn = std::min(workers, chunks) - 1;
  team.reserve(spawn);
  for (std::size_t i = 0; i < spawn; ++i) team.emplace_back(run);
  run();
  for (auto& t : team) t.join();
}

}  // namespace geoflow
