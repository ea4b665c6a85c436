#include "kakeya/parallel.hpp"

#include <atomic>
#include <cstdlib>
#include <exception>
#include <thread>
#include <vector>

namespace kakeya {

namespace {
int g_cap = -1;  // -1: unset, consult env

int env_threads() {
  if (const char* s = std::getenv("KKY_THREADS")) {
    int v = std::atoi(s);
    if (v > 0) return v;
  }
  return 0;
}
}  // namespace

void set_thread_cap(int n) { g_cap = n; }

int thread_count() {
  int cap = g_cap >= 0 ? g_cap : env_threads();
  if (cap <= 0) cap = static_cast<int>(std::thread::hardware_concurrency());
  if (cap <= 0) cap = 1;
  return cap;
}

void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn) {
  const int workers = thread_count();
  if (n == 0) return;
  if (workers <= 1 || n == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr err;
  std::atomic<bool> failed{false};
  auto body = [&] {
    for (;;) {
      std::size_t i = next.fetch_add(1);
      if (i >= n || failed.load(std::memory_order_relaxed)) break;
      try {
        fn(i);
      } catch (...) {
        if (!failed.exchange(true)) err = std::current_exception();
        break;
      }
    }
  };
  std::vector<std::thread> pool;
  const std::size_t k = std::min<std::size_t>(workers, n);
  pool.reserve(k - 1);
  for (std::size_t t = 1; t < k; ++t) pool.emplace_back(body);
  body();
  for (auto& th : pool) th.join();
  if (failed && err) std::rethrow_exception(err);
}

}  // namespace kakeya
