#include "tghf/parallel.hpp"

#include <atomic>
#include <exception>
#include <thread>
#include <vector>

#include "tghf/error.hpp"

namespace tghf {

Parallel::Parallel(int threads) : threads_(threads) {
  require(threads >= 1, errc::input, "Parallel: thread count must be >= 1");
}

void Parallel::for_each(std::size_t n, const std::function<void(std::size_t)>& body) const {
  if (n == 0) return;
  const std::size_t workers = std::min<std::size_t>(static_cast<std::size_t>(threads_), n);
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::atomic<bool> failed{false};
  std::exception_ptr first_error;
  std::vector<std::thread> pool;
  pool.reserve(workers);
  std::atomic<int> error_guard{0};
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&]() {
      for (;;) {
        const std::size_t i = next.fetch_add(1);
        if (i >= n || failed.load()) return;
        try {
          body(i);
        } catch (...) {
          if (error_guard.fetch_add(1) == 0) first_error = std::current_exception();
          failed.store(true);
          return;
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (first_error) std::rethrow_exception(first_error);
}

const Parallel& Parallel::serial() {
  static const Parallel p;
  return p;
}

}  // namespace tghf
