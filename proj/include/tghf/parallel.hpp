#pragma once

#include <cstddef>
#include <functional>

namespace tghf {

// Parallel-map capability handed down from the command line's worker pool.
// Modules never spawn threads themselves; they take a Parallel and call
// for_each. Results must be written to preallocated per-index slots so the
// output is identical for any thread count.
class Parallel {
 public:
  Parallel() : threads_(1) {}
  explicit Parallel(int threads);

  int threads() const { return threads_; }

  // Runs body(i) for i in [0, n). Exceptions from workers are captured and
  // the first one is rethrown on the calling thread.
  void for_each(std::size_t n, const std::function<void(std::size_t)>& body) const;

  static const Parallel& serial();

 private:
  int threads_;
};

}  // namespace tghf
