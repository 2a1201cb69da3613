#pragma once

// Learning-rate decay policies.  All six are evaluated literally from their
// closed forms; `iter` counts optimizer steps from 0.
//
//   fixed        rate = c
//   exponential  rate = lambda0 * gamma^iter
//   step         rate = lambda0 * gamma^floor(iter / step)
//   inverse      rate = lambda0 * (1 + gamma * iter)^(-c)
//   poly         rate = lambda0 * (1 - iter / max_iter)^c
//   sigmoid      rate = lambda0 / (1 + exp(-gamma + (iter - step)))
//
// Note on sigmoid: the exponent couples gamma and (iter - step) additively,
// which makes gamma a horizontal shift rather than a slope.  That is the
// published form of this family and is kept verbatim; the conventional
// variant would multiply, exp(-gamma * (iter - step)).

#include <cmath>
#include <string>

#include "fsdlab/common.hpp"

namespace fsdlab {

enum class DecayKind { Fixed, Exponential, Step, Inverse, Poly, Sigmoid };

inline const char* decay_kind_name(DecayKind k) {
  switch (k) {
    case DecayKind::Fixed: return "fixed";
    case DecayKind::Exponential: return "exponential";
    case DecayKind::Step: return "step";
    case DecayKind::Inverse: return "inverse";
    case DecayKind::Poly: return "poly";
    case DecayKind::Sigmoid: return "sigmoid";
  }
  return "?";
}

inline DecayKind decay_kind_from(const std::string& s) {
  if (s == "fixed") return DecayKind::Fixed;
  if (s == "exponential") return DecayKind::Exponential;
  if (s == "step") return DecayKind::Step;
  if (s == "inverse") return DecayKind::Inverse;
  if (s == "poly") return DecayKind::Poly;
  if (s == "sigmoid") return DecayKind::Sigmoid;
  throw ValueError("unknown decay policy '" + s +
                   "' (valid: fixed, exponential, step, inverse, poly, sigmoid)");
}

struct DecayPolicy {
  DecayKind kind = DecayKind::Fixed;
  double lambda0 = 0.0;  // initial rate
  double gamma = 0.0;
  double c = 0.0;
  long step = 1;
  long max_iter = 1;

  void validate() const {
    if (kind == DecayKind::Fixed) {
      if (c <= 0.0) throw ValueError("fixed policy: rate c must be > 0");
      return;
    }
    if (lambda0 <= 0.0) throw ValueError("decay policy: lambda0 must be > 0");
    if (kind != DecayKind::Poly && gamma <= 0.0)
      throw ValueError("decay policy: gamma must be > 0");
    if ((kind == DecayKind::Step || kind == DecayKind::Sigmoid) && step < 1)
      throw ValueError("decay policy: step must be >= 1");
    if (kind == DecayKind::Poly && max_iter < 1)
      throw ValueError("poly policy: max_iter must be >= 1");
  }

  static DecayPolicy fixed(double rate) {
    DecayPolicy p;
    p.kind = DecayKind::Fixed;
    p.c = rate;
    p.lambda0 = rate;
    return p;
  }
  static DecayPolicy exponential(double lambda0, double gamma) {
    DecayPolicy p;
    p.kind = DecayKind::Exponential;
    p.lambda0 = lambda0;
    p.gamma = gamma;
    return p;
  }
  static DecayPolicy staircase(double lambda0, double gamma, long step) {
    DecayPolicy p;
    p.kind = DecayKind::Step;
    p.lambda0 = lambda0;
    p.gamma = gamma;
    p.step = step;
    return p;
  }
  static DecayPolicy inverse(double lambda0, double gamma, double c) {
    DecayPolicy p;
    p.kind = DecayKind::Inverse;
    p.lambda0 = lambda0;
    p.gamma = gamma;
    p.c = c;
    return p;
  }
  static DecayPolicy poly(double lambda0, double c, long max_iter) {
    DecayPolicy p;
    p.kind = DecayKind::Poly;
    p.lambda0 = lambda0;
    p.c = c;
    p.max_iter = max_iter;
    return p;
  }
  static DecayPolicy sigmoid(double lambda0, double gamma, long step) {
    DecayPolicy p;
    p.kind = DecayKind::Sigmoid;
    p.lambda0 = lambda0;
    p.gamma = gamma;
    p.step = step;
    return p;
  }
};

// Rate at optimizer step `iter`.  For the poly policy past max_iter the rate
// clamps to 0 and `*clamped` (when given) is set.
inline double lr_at(const DecayPolicy& p, long iter, bool* clamped = nullptr) {
  p.validate();
  if (iter < 0) throw ValueError("lr_at: iter must be >= 0");
  if (clamped) *clamped = false;
  switch (p.kind) {
    case DecayKind::Fixed:
      return p.c;
    case DecayKind::Exponential:
      return p.lambda0 * std::pow(p.gamma, static_cast<double>(iter));
    case DecayKind::Step:
      return p.lambda0 * std::pow(p.gamma, static_cast<double>(iter / p.step));
    case DecayKind::Inverse:
      return p.lambda0 * std::pow(1.0 + p.gamma * static_cast<double>(iter), -p.c);
    case DecayKind::Poly: {
      if (iter > p.max_iter) {
        if (clamped) *clamped = true;
        return 0.0;
      }
      const double frac = 1.0 - static_cast<double>(iter) / static_cast<double>(p.max_iter);
      return p.lambda0 * std::pow(frac, p.c);
    }
    case DecayKind::Sigmoid:
      return p.lambda0 / (1.0 + std::exp(-p.gamma + static_cast<double>(iter - p.step)));
  }
  throw ValueError("lr_at: unknown policy kind");
}

}  // namespace fsdlab
