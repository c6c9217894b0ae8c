#pragma once

#include <atomic>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace sdp {

/*  Bounded worker pool over an index range. Each task owns its state and
 *  writes only to its own result slot; callers get determinism by reducing
 *  results in index order afterwards.  */
template <typename F>
void parallel_for(long n, int workers, F&& body) {
  if (n <= 0) return;
  if (workers <= 1 || n == 1) {
    for (long i = 0; i < n; ++i) body(i);
    return;
  }
  std::atomic<long> next{0};
  std::exception_ptr error;
  std::mutex error_mu;
  auto run = [&] {
    for (;;) {
      long i = next.fetch_add(1);
      if (i >= n) return;
      try {
        body(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mu);
        if (!error) error = std::current_exception();
        return;
      }
    }
  };
  std::vector<std::thread> pool;
  int count = static_cast<int>(std::min<long>(workers, n));
  pool.reserve(count);
  for (int t = 0; t < count; ++t) pool.emplace_back(run);
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

}  // namespace sdp
