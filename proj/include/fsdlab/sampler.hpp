#pragma once

// Mini-batch index streams with three balancing strategies:
//
//   none        a fresh seeded shuffle of all indices each epoch
//   uniform     each draw: class uniform, then an instance of it uniform
//               (with replacement — rebalances the stream regardless of the
//               label histogram)
//   stratified  each batch holds floor(batch/10) of every class; the
//               remainder is filled class-by-class from a seeded rotation,
//               so per-class counts within a batch differ by at most one
//
// One epoch always yields exactly `labels.size()` indices.

#include <algorithm>
#include <cstdint>
#include <string>
#include <vector>

#include "fsdlab/common.hpp"
#include "fsdlab/rng.hpp"

namespace fsdlab {

enum class Balancing { None, Uniform, Stratified };

inline Balancing balancing_from(const std::string& s) {
  if (s == "none") return Balancing::None;
  if (s == "uniform") return Balancing::Uniform;
  if (s == "stratified") return Balancing::Stratified;
  throw ValueError("unknown balancing strategy '" + s + "' (valid: none, uniform, stratified)");
}

inline const char* balancing_name(Balancing b) {
  switch (b) {
    case Balancing::None: return "none";
    case Balancing::Uniform: return "uniform";
    case Balancing::Stratified: return "stratified";
  }
  return "?";
}

class Sampler {
 public:
  Sampler(std::vector<int> labels, Balancing strategy, int num_classes = 10)
      : labels_(std::move(labels)), strategy_(strategy), num_classes_(num_classes) {
    if (labels_.empty()) throw ValueError("sampler: empty label list");
    by_class_.resize(static_cast<std::size_t>(num_classes_));
    for (std::size_t i = 0; i < labels_.size(); ++i) {
      const int c = labels_[i];
      if (c < 0 || c >= num_classes_)
        throw ValueError("sampler: label " + std::to_string(c) + " outside [0, " +
                         std::to_string(num_classes_) + ")");
      by_class_[static_cast<std::size_t>(c)].push_back(static_cast<int>(i));
    }
    if (strategy_ != Balancing::None) {
      for (int c = 0; c < num_classes_; ++c)
        if (by_class_[static_cast<std::size_t>(c)].empty())
          throw ValueError("sampler: class " + std::to_string(c) +
                           " has no instances; cannot balance");
    }
    cursor_.assign(static_cast<std::size_t>(num_classes_), 0);
  }

  // Index order for one epoch, grouped into batches of `batch_size` by the
  // caller (a trailing partial batch is fine).
  std::vector<int> epoch(int batch_size, Rng& rng) {
    if (batch_size < 1) throw ValueError("sampler: batch_size must be >= 1");
    const std::size_t n = labels_.size();
    std::vector<int> order;
    order.reserve(n);
    switch (strategy_) {
      case Balancing::None: {
        order.resize(n);
        for (std::size_t i = 0; i < n; ++i) order[i] = static_cast<int>(i);
        shuffle(order, rng);
        break;
      }
      case Balancing::Uniform: {
        for (std::size_t i = 0; i < n; ++i) {
          const auto& pool =
              by_class_[static_cast<std::size_t>(rng.below(static_cast<std::uint64_t>(num_classes_)))];
          order.push_back(pool[rng.below(pool.size())]);
        }
        break;
      }
      case Balancing::Stratified: {
        // Per-class pools are consumed in shuffled order and reshuffled when
        // exhausted, so instances rotate through before repeating.
        for (auto& pool : by_class_) shuffle(pool, rng);
        std::fill(cursor_.begin(), cursor_.end(), 0);
        int round_robin = 0;
        while (order.size() < n) {
          const int remaining = static_cast<int>(n - order.size());
          const int batch = std::min(batch_size, remaining);
          const int quota = batch / num_classes_;
          const int extra = batch % num_classes_;
          for (int c = 0; c < num_classes_; ++c)
            for (int k = 0; k < quota; ++k) order.push_back(draw_from_class(c, rng));
          for (int k = 0; k < extra; ++k) {
            order.push_back(draw_from_class(round_robin, rng));
            round_robin = (round_robin + 1) % num_classes_;
          }
        }
        break;
      }
    }
    return order;
  }

 private:
  void shuffle(std::vector<int>& v, Rng& rng) {
    for (std::size_t i = v.size(); i > 1; --i)
      std::swap(v[i - 1], v[rng.below(i)]);
  }

  int draw_from_class(int c, Rng& rng) {
    auto& pool = by_class_[static_cast<std::size_t>(c)];
    auto& cur = cursor_[static_cast<std::size_t>(c)];
    if (cur >= pool.size()) {
      shuffle(pool, rng);
      cur = 0;
    }
    return pool[cur++];
  }

  std::vector<int> labels_;
  Balancing strategy_;
  int num_classes_;
  std::vector<std::vector<int>> by_class_;
  std::vector<std::size_t> cursor_;
};

}  // namespace fsdlab
