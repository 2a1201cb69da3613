#pragma once

// Plain SGD with weight-norm penalties and per-epoch metrics.
//
// The loop is deliberately bare — no momentum, no gradient clipping — so the
// effect of normalization, schedules, and penalties stays attributable.
// Everything random flows from TrainConfig::seed through named derived
// streams (init / batches / augmentation / dropout), which makes a run
// bit-for-bit reproducible.

#include <cmath>
#include <cstdint>
#include <functional>
#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "fsdlab/augment.hpp"
#include "fsdlab/cifar.hpp"
#include "fsdlab/common.hpp"
#include "fsdlab/model.hpp"
#include "fsdlab/sampler.hpp"
#include "fsdlab/schedule.hpp"

namespace fsdlab {

// ---------------------------------------------------------------------------
// Penalties: loss' = loss + l1 * sum|w| + l2 * sum w^2, applied to the views
// marked `penalized` (conv kernels; batch-norm affine params are exempt).

template <typename T>
double penalty_value(const std::vector<ParamViewT<T>>& params, double l1, double l2) {
  if (l1 < 0 || l2 < 0) throw ValueError("penalty: coefficients must be >= 0");
  double acc = 0.0;
  for (const auto& p : params) {
    if (!p.penalized) continue;
    for (std::size_t i = 0; i < p.size; ++i) {
      const double w = static_cast<double>(p.value[i]);
      acc += l1 * std::abs(w) + l2 * w * w;
    }
  }
  return acc;
}

template <typename T>
double regularized_loss(double data_loss, const std::vector<ParamViewT<T>>& params, double l1,
                        double l2) {
  return data_loss + penalty_value(params, l1, l2);
}

// Gradient contribution: l1 * sign(w) + 2 * l2 * w, with sign(0) = 0.
template <typename T>
void accumulate_penalty_grads(std::vector<ParamViewT<T>>& params, double l1, double l2) {
  if (l1 == 0.0 && l2 == 0.0) return;
  for (auto& p : params) {
    if (!p.penalized) continue;
    for (std::size_t i = 0; i < p.size; ++i) {
      const double w = static_cast<double>(p.value[i]);
      const double sign = w > 0.0 ? 1.0 : (w < 0.0 ? -1.0 : 0.0);
      p.grad[i] += static_cast<T>(l1 * sign + 2.0 * l2 * w);
    }
  }
}

template <typename T>
void sgd_step(std::vector<ParamViewT<T>>& params, double lr) {
  for (auto& p : params)
    for (std::size_t i = 0; i < p.size; ++i)
      p.value[i] -= static_cast<T>(lr * static_cast<double>(p.grad[i]));
}

template <typename T>
double grad_norm(const std::vector<ParamViewT<T>>& params) {
  double acc = 0.0;
  for (const auto& p : params)
    for (std::size_t i = 0; i < p.size; ++i)
      acc += static_cast<double>(p.grad[i]) * static_cast<double>(p.grad[i]);
  return std::sqrt(acc);
}

// ---------------------------------------------------------------------------

struct TrainConfig {
  int batch_size = 128;
  int epochs = 20;
  std::uint64_t seed = 1;
  DecayPolicy policy = DecayPolicy::fixed(0.01);
  double l1_coeff = 0.0;
  double l2_coeff = 0.0;
  bool dropout_enabled = true;
  bool bn_enabled = true;
  bool augment_enabled = true;
  Balancing balancing = Balancing::None;
  AugmentConfig augment;
  int eval_batch = 256;

  void validate() const {
    if (batch_size < 2) throw ValueError("train: batch_size must be >= 2 (batch norm)");
    if (epochs < 0) throw ValueError("train: epochs must be >= 0");
    if (l1_coeff < 0 || l2_coeff < 0) throw ValueError("train: penalty coefficients must be >= 0");
    policy.validate();
  }
};

struct EpochMetrics {
  int epoch = 0;
  double train_loss = 0.0;  // mean over steps, penalties included
  double train_acc = 0.0;   // over the training stream of this epoch
  double test_acc = 0.0;
  double lr = 0.0;          // rate at the first step of the epoch
};

struct MetricsLog {
  std::vector<EpochMetrics> epochs;
  double final_test_acc = 0.0;
  long total_steps = 0;

  std::string to_csv() const {
    std::ostringstream out;
    out << "epoch,train_loss,train_acc,test_acc,lr\n";
    out << std::setprecision(17);
    for (const auto& e : epochs)
      out << e.epoch << "," << e.train_loss << "," << e.train_acc << "," << e.test_acc << ","
          << e.lr << "\n";
    return out.str();
  }

  nlohmann::json summary_json() const {
    nlohmann::json j;
    j["final_test_acc"] = final_test_acc;
    j["epochs"] = epochs.size();
    j["total_steps"] = total_steps;
    if (!epochs.empty()) {
      j["final_train_loss"] = epochs.back().train_loss;
      j["final_train_acc"] = epochs.back().train_acc;
    }
    return j;
  }
};

namespace detail {

// Assembles preprocessed images into one NHWC batch tensor.
inline Tensor stack_batch(const std::vector<Tensor>& images) {
  const auto& s = images.front().shape;
  Tensor out({static_cast<int>(images.size()), s[0], s[1], s[2]});
  const std::size_t per = images.front().numel();
  for (std::size_t i = 0; i < images.size(); ++i)
    std::copy(images[i].data.begin(), images[i].data.end(), out.data.begin() + i * per);
  return out;
}

}  // namespace detail

// Accuracy of `model` over `images` in eval mode (central-crop pipeline).
inline double evaluate(Model& model, const std::vector<LabeledImage>& images, int crop,
                       int eval_batch = 256) {
  if (images.empty()) return 0.0;
  Rng unused(0);
  std::size_t correct = 0, done = 0;
  while (done < images.size()) {
    const std::size_t take = std::min<std::size_t>(static_cast<std::size_t>(eval_batch),
                                                   images.size() - done);
    std::vector<Tensor> batch;
    std::vector<int> labels;
    batch.reserve(take);
    for (std::size_t i = 0; i < take; ++i) {
      batch.push_back(preprocess_eval(images[done + i], crop, crop));
      labels.push_back(images[done + i].label);
    }
    auto logits = model.forward(detail::stack_batch(batch), Mode::Eval, unused);
    auto pred = argmax_rows(logits);
    for (std::size_t i = 0; i < take; ++i)
      if (pred[i] == labels[i]) ++correct;
    done += take;
  }
  return static_cast<double>(correct) / static_cast<double>(images.size());
}

using EpochCallback = std::function<void(const EpochMetrics&)>;

// Full training loop.  Throws TrainAbort the moment the loss leaves the
// finite range, carrying (iteration, lr, gradient norm) for diagnosis.
inline MetricsLog train(Model& model, const Dataset& data, const TrainConfig& config,
                        const EpochCallback& on_epoch = nullptr) {
  config.validate();
  if (data.train.empty()) throw ValueError("train: empty training set");

  MetricsLog log;
  std::vector<int> labels(data.train.size());
  for (std::size_t i = 0; i < labels.size(); ++i) labels[i] = data.train[i].label;
  Sampler sampler(labels, config.balancing);

  AugmentConfig aug = config.augment;
  if (!config.augment_enabled) {
    aug.random_crop = false;
    aug.flips = false;
    aug.color_jitter = false;
  }

  auto params = model.params();
  long iter = 0;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    Rng batch_rng(Rng::derive(config.seed, "batches", static_cast<std::uint64_t>(epoch)));
    auto order = sampler.epoch(config.batch_size, batch_rng);

    double loss_sum = 0.0;
    long steps = 0;
    std::size_t seen = 0, correct = 0;
    const double epoch_lr = lr_at(config.policy, iter);

    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t take =
          std::min<std::size_t>(static_cast<std::size_t>(config.batch_size), order.size() - start);
      if (take < 2) break;  // batch norm needs at least two samples

      std::vector<Tensor> images;
      std::vector<int> batch_labels;
      images.reserve(take);
      for (std::size_t i = 0; i < take; ++i) {
        const int idx = order[start + i];
        Rng aug_rng(Rng::derive(config.seed, "augment", static_cast<std::uint64_t>(epoch),
                                static_cast<std::uint64_t>(start + i)));
        images.push_back(preprocess_train(data.train[static_cast<std::size_t>(idx)], aug, aug_rng));
        batch_labels.push_back(data.train[static_cast<std::size_t>(idx)].label);
      }

      Rng drop_rng(Rng::derive(config.seed, "dropout", static_cast<std::uint64_t>(iter)));
      auto logits = model.forward(detail::stack_batch(images), Mode::Train, drop_rng);
      auto xent = softmax_cross_entropy(logits, batch_labels);

      model.zero_grads();
      model.backward(xent.d_logits);
      accumulate_penalty_grads(params, config.l1_coeff, config.l2_coeff);

      const double loss = regularized_loss(xent.loss, params, config.l1_coeff, config.l2_coeff);
      if (!std::isfinite(loss))
        throw TrainAbort("loss left the finite range", iter, lr_at(config.policy, iter),
                         grad_norm(params));

      const double lr = lr_at(config.policy, iter);
      sgd_step(params, lr);
      ++iter;
      ++steps;
      loss_sum += loss;

      auto pred = argmax_rows(logits);
      for (std::size_t i = 0; i < take; ++i)
        if (pred[i] == batch_labels[i]) ++correct;
      seen += take;
    }

    EpochMetrics m;
    m.epoch = epoch;
    m.train_loss = steps > 0 ? loss_sum / static_cast<double>(steps) : 0.0;
    m.train_acc = seen > 0 ? static_cast<double>(correct) / static_cast<double>(seen) : 0.0;
    m.test_acc = evaluate(model, data.test, config.augment.crop, config.eval_batch);
    m.lr = epoch_lr;
    log.epochs.push_back(m);
    if (on_epoch) on_epoch(m);
  }

  log.total_steps = iter;
  log.final_test_acc = log.epochs.empty() ? 0.0 : log.epochs.back().test_acc;
  return log;
}

}  // namespace fsdlab
