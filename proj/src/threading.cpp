#include "longmix/threading.hpp"

#include <algorithm>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace longmix {

namespace {

int g_max_threads = 0;  // 0: not yet resolved

int resolve_default() {
  if (const char* env = std::getenv("LONGMIX_THREADS")) {
    int n = std::atoi(env);
    if (n >= 1) return n;
  }
  unsigned hc = std::thread::hardware_concurrency();
  return hc == 0 ? 1 : static_cast<int>(hc);
}

}  // namespace

int max_threads() {
  if (g_max_threads == 0) g_max_threads = resolve_default();
  return g_max_threads;
}

void set_max_threads(int n) { g_max_threads = n < 1 ? 1 : n; }

void parallel_for(std::size_t n,
                  const std::function<void(std::size_t, std::size_t)>& fn) {
  int workers = max_threads();
  if (workers <= 1 || n < 2 * static_cast<std::size_t>(workers)) {
    fn(0, n);
    return;
  }
  std::size_t chunk = (n + workers - 1) / workers;
  std::vector<std::thread> pool;
  pool.reserve(workers);
  std::exception_ptr error;
  std::mutex error_mutex;
  for (int t = 0; t < workers; ++t) {
    std::size_t begin = t * chunk;
    if (begin >= n) break;
    std::size_t end = std::min(n, begin + chunk);
    pool.emplace_back([&, begin, end] {
      try {
        fn(begin, end);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!error) error = std::current_exception();
      }
    });
  }
  for (std::thread& th : pool) th.join();
  if (error) std::rethrow_exception(error);
}

}  // namespace longmix
