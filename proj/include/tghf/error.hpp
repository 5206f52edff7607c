#pragma once

#include <stdexcept>
#include <string>

namespace tghf {

// Failure taxonomy. Every throw site picks a category so callers (and the
// command-line exit-code mapping) can tell bad input from numeric breakdown.
enum class errc {
  input,          // malformed or out-of-contract arguments
  domain,         // parameter outside the mathematical domain (h < 0, u not in (0,1), ...)
  numeric,        // iteration did not converge, overflow, non-finite intermediate
  decomposition,  // matrix factorization failure / numerical singularity
  fit,            // estimation-level failure (zero variance, rank deficiency, ...)
  state,          // object used before required setup
  metric,         // evaluation metric undefined (degenerate clusters, ...)
  io              // file parse or write problem
};

const char* errc_name(errc c) noexcept;

class error : public std::runtime_error {
 public:
  error(errc c, const std::string& msg) : std::runtime_error(msg), code_(c) {}
  errc code() const noexcept { return code_; }

 private:
  errc code_;
};

[[noreturn]] inline void fail(errc c, const std::string& msg) { throw error(c, msg); }

inline void require(bool ok, errc c, const std::string& msg) {
  if (!ok) fail(c, msg);
}

}  // namespace tghf
