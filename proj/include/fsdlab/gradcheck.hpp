#pragma once

#include <cmath>
#include <functional>
#include <string>

#include "fsdlab/tensor.hpp"

namespace fsdlab {

struct GradCheckReport {
  int checked = 0;
  int failures = 0;
  double max_rel_err = 0.0;
  double max_abs_err = 0.0;
  bool pass() const { return failures == 0 && checked > 0; }
};

// Central finite differences against an analytic gradient, in double
// precision. `loss` must re-read the checked values on every call. An
// element passes when |a - n| <= max(tol * max(|a|,|n|), abs_floor); `skip`
// excludes elements sitting on a non-differentiable point (ReLU kinks,
// pooling ties).
inline GradCheckReport grad_check_span(const std::function<double()>& loss, double* values,
                                       std::size_t n, const double* analytic, double h = 1e-5,
                                       double tol = 1e-4,
                                       const std::function<bool(std::size_t)>& skip = nullptr,
                                       double abs_floor = 1e-8) {
  GradCheckReport report;
  for (std::size_t i = 0; i < n; ++i) {
    if (skip && skip(i)) continue;
    const double saved = values[i];
    values[i] = saved + h;
    const double up = loss();
    values[i] = saved - h;
    const double down = loss();
    values[i] = saved;
    const double numeric = (up - down) / (2.0 * h);
    const double a = analytic[i];
    const double abs_err = std::abs(a - numeric);
    const double denom = std::max(std::abs(a), std::abs(numeric));
    const double rel_err = denom > 0.0 ? abs_err / denom : 0.0;
    ++report.checked;
    report.max_abs_err = std::max(report.max_abs_err, abs_err);
    if (abs_err > abs_floor) report.max_rel_err = std::max(report.max_rel_err, rel_err);
    if (abs_err > std::max(tol * denom, abs_floor)) ++report.failures;
  }
  return report;
}

inline GradCheckReport grad_check(const std::function<double()>& loss, DTensor& x,
                                  const DTensor& analytic, double h = 1e-5, double tol = 1e-4,
                                  const std::function<bool(std::size_t)>& skip = nullptr,
                                  double abs_floor = 1e-8) {
  if (!x.same_shape(analytic)) throw ShapeError("grad_check: gradient shape mismatch");
  return grad_check_span(loss, x.data.data(), x.numel(), analytic.data.data(), h, tol, skip,
                         abs_floor);
}

}  // namespace fsdlab
