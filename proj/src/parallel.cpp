#include "fwnet/parallel.hpp"

#include <algorithm>
#include <cstdlib>
#include <thread>
#include <vector>

namespace fwnet {

int thread_count() {
  static const int n = [] {
    if (const char* env = std::getenv("FWNET_THREADS")) {
      int v = std::atoi(env);
      if (v >= 1) return v;
    }
    unsigned hw = std::thread::hardware_concurrency();
    return hw ? static_cast<int>(hw) : 1;
  }();
  return n;
}

namespace {
thread_local bool in_parallel_region = false;
}

void parallel_for(int64_t n, int64_t grain, const std::function<void(int64_t, int64_t)>& fn) {
  if (n <= 0) return;
  const int nt = thread_count();
  if (nt == 1 || n <= grain || in_parallel_region) {
    fn(0, n);
    return;
  }
  const int workers = static_cast<int>(std::min<int64_t>(nt, (n + grain - 1) / grain));
  const int64_t chunk = (n + workers - 1) / workers;
  std::vector<std::thread> pool;
  pool.reserve(workers - 1);
  for (int t = 1; t < workers; ++t) {
    int64_t b = t * chunk, e = std::min<int64_t>(n, b + chunk);
    if (b >= e) break;
    pool.emplace_back([&fn, b, e] {
      in_parallel_region = true;
      fn(b, e);
      in_parallel_region = false;
    });
  }
  in_parallel_region = true;
  fn(0, std::min<int64_t>(n, chunk));
  in_parallel_region = false;
  for (auto& th : pool) th.join();
}

}  // namespace fwnet
