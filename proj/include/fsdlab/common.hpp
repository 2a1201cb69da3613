#pragma once

#include <atomic>
#include <stdexcept>
#include <string>

namespace fsdlab {

// Every failure surfaces as a typed exception so callers (and the CLI) can
// report the category without parsing message strings.
struct ShapeError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ValueError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Parse errors carry the 1-based source line of the offending input.
struct ParseError : std::runtime_error {
  int line;
  ParseError(const std::string& msg, int line_no)
      : std::runtime_error("line " + std::to_string(line_no) + ": " + msg), line(line_no) {}
};

struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct BuildError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct AnalysisError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Raised when training hits a non-finite loss; carries enough context to
// diagnose the blow-up.
struct TrainAbort : std::runtime_error {
  long long iter;
  double lr;
  double grad_norm;
  TrainAbort(const std::string& msg, long long iter_, double lr_, double grad_norm_)
      : std::runtime_error(msg), iter(iter_), lr(lr_), grad_norm(grad_norm_) {}
};

// Global engine flag. All built-in kernels accumulate each output element in a
// fixed serial order, so results are bitwise reproducible in either mode; the
// flag is recorded in run snapshots and reserved for kernels that may want a
// faster non-reproducible schedule.
inline std::atomic<bool>& deterministic_flag() {
  static std::atomic<bool> flag{true};
  return flag;
}

inline void set_deterministic(bool on) { deterministic_flag().store(on); }
inline bool deterministic() { return deterministic_flag().load(); }

}  // namespace fsdlab
