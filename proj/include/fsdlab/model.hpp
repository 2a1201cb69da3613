#pragma once

// Turns a NetSpec into an executable layer graph with parameter storage,
// cached forward activations, and a full backward pass.
//
// Expansion rules:
//   - each convolution of a composition becomes conv -> batch norm -> ReLU
//     (the composition's stride sits on its first conv; all convs use
//     same-padding; no conv biases — batch norm absorbs them);
//   - the output block keeps raw logits: no batch norm / ReLU;
//   - when the activation entering the output block still has spatial extent
//     > 1, a global average pool is inserted in front of it, so the network
//     ends in (batch, classes) logits.

#include <cmath>
#include <cstddef>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "fsdlab/common.hpp"
#include "fsdlab/netspec.hpp"
#include "fsdlab/ops.hpp"
#include "fsdlab/rng.hpp"
#include "fsdlab/tensor.hpp"

namespace fsdlab {

enum class LayerKind { Conv, BatchNorm, Relu, MaxPool, Dropout, ResidualAdd, GlobalAvgPool };

// A mutable view of one parameter array and its gradient accumulator.
template <typename T>
struct ParamViewT {
  std::string name;
  T* value = nullptr;
  T* grad = nullptr;
  std::size_t size = 0;
  bool penalized = false;  // weight-norm penalties apply (conv kernels only)
};

struct BuildOptions {
  bool batchnorm = true;  // off: compositions become conv -> ReLU
  bool dropout = true;    // off: dropout blocks are skipped entirely
};

template <typename T>
class ModelT {
 public:
  struct Layer {
    LayerKind kind;
    std::string block;   // spec block this layer was expanded from
    int in0 = 0;         // activation slot of the (first) input
    int in1 = -1;        // second input, residual only
    int out = 0;         // activation slot this layer writes
    // conv
    int stride = 1;
    TensorT<T> kernel, d_kernel;
    // batch norm
    BatchNormStateT<T> bn{0};
    TensorT<T> d_gamma, d_beta;
    BatchNormCacheT<T> bn_cache;
    // dropout
    double rate = 0.5;
    TensorT<std::uint8_t> drop_mask;
    // max pool
    std::vector<std::int64_t> argmax;
  };

  std::string name;
  InputShape input;
  std::vector<Layer> layers;
  Shape output_shape;  // per-sample, (h, w, c) of the last activation

  // Output slot of each spec block, in topological order (for reports).
  std::vector<std::pair<std::string, int>> block_slots;

  int num_slots() const { return static_cast<int>(layers.size()) + 1; }

  int logit_width() const {
    return output_shape[0] * output_shape[1] * output_shape[2];
  }

  // Runs the network; activations stay cached for backward().  `rng` feeds
  // dropout only (unused in Eval mode).
  TensorT<T> forward(const TensorT<T>& batch, Mode mode, Rng& rng) {
    if (batch.rank() != 4 || batch.dim(1) != input.h || batch.dim(2) != input.w ||
        batch.dim(3) != input.c)
      throw ShapeError("forward: batch shape " + shape_str(batch.shape) + " does not match input " +
                       std::to_string(input.h) + "x" + std::to_string(input.w) + "x" +
                       std::to_string(input.c));
    acts_.assign(static_cast<std::size_t>(num_slots()), TensorT<T>());
    acts_[0] = batch;
    for (auto& layer : layers) {
      const TensorT<T>& x = acts_[static_cast<std::size_t>(layer.in0)];
      TensorT<T>& y = acts_[static_cast<std::size_t>(layer.out)];
      switch (layer.kind) {
        case LayerKind::Conv:
          y = conv2d_forward(x, layer.kernel, layer.stride, Padding::Same);
          break;
        case LayerKind::BatchNorm:
          y = batchnorm_forward(x, layer.bn, mode, &layer.bn_cache);
          break;
        case LayerKind::Relu:
          y = relu(x);
          break;
        case LayerKind::MaxPool: {
          auto res = maxpool2d(x);
          y = std::move(res.output);
          layer.argmax = std::move(res.argmax);
          break;
        }
        case LayerKind::Dropout: {
          auto res = dropout(x, layer.rate, rng, mode);
          y = std::move(res.output);
          layer.drop_mask = std::move(res.mask);
          break;
        }
        case LayerKind::ResidualAdd: {
          const TensorT<T>& b = acts_[static_cast<std::size_t>(layer.in1)];
          if (!x.same_shape(b))
            throw ShapeError("residual '" + layer.block + "': shapes " + shape_str(x.shape) +
                             " vs " + shape_str(b.shape));
          y = x;
          for (std::size_t i = 0; i < y.numel(); ++i) y.data[i] += b.data[i];
          break;
        }
        case LayerKind::GlobalAvgPool:
          y = global_avg_pool(x);
          break;
      }
    }
    const TensorT<T>& last = acts_.back();
    TensorT<T> logits({last.dim(0), logit_width()});
    logits.data = last.data;
    return logits;
  }

  void zero_grads() {
    for (auto& layer : layers) {
      std::fill(layer.d_kernel.data.begin(), layer.d_kernel.data.end(), T(0));
      std::fill(layer.d_gamma.data.begin(), layer.d_gamma.data.end(), T(0));
      std::fill(layer.d_beta.data.begin(), layer.d_beta.data.end(), T(0));
    }
  }

  // Accumulates parameter gradients from d_logits (shape (batch, classes)).
  // Requires a preceding forward() in the mode being differentiated.
  void backward(const TensorT<T>& d_logits) {
    if (acts_.empty()) throw ValueError("backward: no cached forward pass");
    const TensorT<T>& last = acts_.back();
    if (d_logits.rank() != 2 || d_logits.dim(0) != last.dim(0) ||
        d_logits.dim(1) != logit_width())
      throw ShapeError("backward: d_logits shape " + shape_str(d_logits.shape));

    std::vector<TensorT<T>> d_acts(acts_.size());
    d_acts.back() = TensorT<T>(last.shape);
    d_acts.back().data = d_logits.data;

    auto add_into = [](TensorT<T>& dst, const Shape& shape, const TensorT<T>& src) {
      if (dst.numel() == 0) {
        dst = src;
        return;
      }
      (void)shape;
      for (std::size_t i = 0; i < dst.numel(); ++i) dst.data[i] += src.data[i];
    };

    for (auto it = layers.rbegin(); it != layers.rend(); ++it) {
      Layer& layer = *it;
      TensorT<T>& d_out = d_acts[static_cast<std::size_t>(layer.out)];
      if (d_out.numel() == 0) continue;  // dead branch
      const TensorT<T>& x = acts_[static_cast<std::size_t>(layer.in0)];
      TensorT<T>& d_in = d_acts[static_cast<std::size_t>(layer.in0)];
      switch (layer.kind) {
        case LayerKind::Conv: {
          auto grad = conv2d_backward(x, layer.kernel, layer.stride, Padding::Same, d_out);
          for (std::size_t i = 0; i < layer.d_kernel.numel(); ++i)
            layer.d_kernel.data[i] += grad.d_params[0].data[i];
          add_into(d_in, x.shape, grad.d_input);
          break;
        }
        case LayerKind::BatchNorm: {
          auto grad = batchnorm_backward(x, layer.bn, layer.bn_cache, d_out);
          for (std::size_t i = 0; i < layer.d_gamma.numel(); ++i) {
            layer.d_gamma.data[i] += grad.d_params[0].data[i];
            layer.d_beta.data[i] += grad.d_params[1].data[i];
          }
          add_into(d_in, x.shape, grad.d_input);
          break;
        }
        case LayerKind::Relu:
          add_into(d_in, x.shape, relu_backward(x, d_out));
          break;
        case LayerKind::MaxPool:
          add_into(d_in, x.shape, maxpool2d_backward(layer.argmax, x.shape, d_out));
          break;
        case LayerKind::Dropout:
          add_into(d_in, x.shape, dropout_backward(layer.drop_mask, layer.rate, d_out));
          break;
        case LayerKind::ResidualAdd: {
          add_into(d_in, x.shape, d_out);
          TensorT<T>& d_in1 = d_acts[static_cast<std::size_t>(layer.in1)];
          add_into(d_in1, x.shape, d_out);
          break;
        }
        case LayerKind::GlobalAvgPool:
          add_into(d_in, x.shape, global_avg_pool_backward(x.shape, d_out));
          break;
      }
    }
  }

  std::vector<ParamViewT<T>> params() {
    std::vector<ParamViewT<T>> out;
    int conv_idx = 0, bn_idx = 0;
    for (auto& layer : layers) {
      if (layer.kind == LayerKind::Conv) {
        out.push_back({layer.block + "/conv" + std::to_string(conv_idx++), layer.kernel.data.data(),
                       layer.d_kernel.data.data(), layer.kernel.numel(), true});
      } else if (layer.kind == LayerKind::BatchNorm) {
        const std::string base = layer.block + "/bn" + std::to_string(bn_idx++);
        out.push_back({base + "/gamma", layer.bn.gamma.data(), layer.d_gamma.data.data(),
                       layer.bn.gamma.size(), false});
        out.push_back({base + "/beta", layer.bn.beta.data(), layer.d_beta.data.data(),
                       layer.bn.beta.size(), false});
      }
    }
    return out;
  }

  std::size_t param_count() {
    std::size_t n = 0;
    for (const auto& p : params()) n += p.size;
    return n;
  }

  // Cached activation for a slot of the latest forward pass.
  const TensorT<T>& activation(int slot) const {
    return acts_.at(static_cast<std::size_t>(slot));
  }
  bool has_activations() const { return !acts_.empty(); }

 private:
  std::vector<TensorT<T>> acts_;
};

using Model = ModelT<float>;
using DModel = ModelT<double>;

namespace detail {

struct SlotShape {
  int h, w, c;
};

}  // namespace detail

template <typename T>
ModelT<T> build_model_t(const NetSpec& spec, Rng& init_rng, BuildOptions opts = {}) {
  spec.validate();
  ModelT<T> model;
  model.name = spec.name;
  model.input = spec.input;

  std::map<std::string, int> slot_of;     // block name -> activation slot
  std::map<std::string, detail::SlotShape> shape_of;
  slot_of[""] = 0;
  shape_of[""] = {spec.input.h, spec.input.w, spec.input.c};

  const std::string sink = spec.output_block().name;
  int next_slot = 1;

  auto push = [&](typename ModelT<T>::Layer layer) {
    layer.out = next_slot++;
    model.layers.push_back(std::move(layer));
    return model.layers.back().out;
  };

  for (const Block* bp : topo_order(spec)) {
    const Block& b = *bp;
    int cur = slot_of.at(b.inputs[0]);
    detail::SlotShape cur_shape = shape_of.at(b.inputs[0]);

    if (b.name == sink && b.is_conv() && (cur_shape.h > 1 || cur_shape.w > 1)) {
      typename ModelT<T>::Layer gap;
      gap.kind = LayerKind::GlobalAvgPool;
      gap.block = b.name;
      gap.in0 = cur;
      cur = push(std::move(gap));
      cur_shape.h = cur_shape.w = 1;
    }

    switch (b.kind) {
      case BlockKind::ConvComposition: {
        int in_ch = cur_shape.c;
        for (int i = 0; i < b.repeat; ++i) {
          const int stride = i == 0 ? b.stride : 1;
          typename ModelT<T>::Layer conv;
          conv.kind = LayerKind::Conv;
          conv.block = b.name;
          conv.in0 = cur;
          conv.stride = stride;
          conv.kernel = TensorT<T>({b.kernel, b.kernel, in_ch, b.out_channels});
          const double stddev =
              std::sqrt(2.0 / (static_cast<double>(b.kernel) * b.kernel * in_ch));
          for (auto& v : conv.kernel.data)
            v = static_cast<T>(init_rng.normal(0.0, stddev));
          conv.d_kernel = TensorT<T>(conv.kernel.shape, T(0));
          cur = push(std::move(conv));
          cur_shape.h = detail::conv_out_extent(cur_shape.h, b.kernel, stride, Padding::Same);
          cur_shape.w = detail::conv_out_extent(cur_shape.w, b.kernel, stride, Padding::Same);
          cur_shape.c = b.out_channels;
          in_ch = b.out_channels;

          if (b.with_bn_relu && opts.batchnorm) {
            typename ModelT<T>::Layer bn;
            bn.kind = LayerKind::BatchNorm;
            bn.block = b.name;
            bn.in0 = cur;
            bn.bn = BatchNormStateT<T>(b.out_channels);
            bn.d_gamma = TensorT<T>({b.out_channels}, T(0));
            bn.d_beta = TensorT<T>({b.out_channels}, T(0));
            cur = push(std::move(bn));
          }
          if (b.with_bn_relu) {
            typename ModelT<T>::Layer act;
            act.kind = LayerKind::Relu;
            act.block = b.name;
            act.in0 = cur;
            cur = push(std::move(act));
          }
        }
        break;
      }
      case BlockKind::MaxPool: {
        if (cur_shape.h < 2 || cur_shape.w < 2)
          throw BuildError("block '" + b.name + "': cannot pool a " + std::to_string(cur_shape.h) +
                           "x" + std::to_string(cur_shape.w) + " activation");
        typename ModelT<T>::Layer pool;
        pool.kind = LayerKind::MaxPool;
        pool.block = b.name;
        pool.in0 = cur;
        cur = push(std::move(pool));
        cur_shape.h = (cur_shape.h - 2) / 2 + 1;
        cur_shape.w = (cur_shape.w - 2) / 2 + 1;
        break;
      }
      case BlockKind::Dropout: {
        if (!opts.dropout) break;  // block collapses to a wire
        typename ModelT<T>::Layer drop;
        drop.kind = LayerKind::Dropout;
        drop.block = b.name;
        drop.in0 = cur;
        drop.rate = b.rate;
        cur = push(std::move(drop));
        break;
      }
      case BlockKind::ResidualAdd: {
        const int a_slot = slot_of.at(b.inputs[0]);
        const int b_slot = slot_of.at(b.inputs[1]);
        const auto sa = shape_of.at(b.inputs[0]);
        const auto sb = shape_of.at(b.inputs[1]);
        if (sa.h != sb.h || sa.w != sb.w || sa.c != sb.c)
          throw BuildError("residual '" + b.name + "' joins mismatched shapes: '" + b.inputs[0] +
                           "' is " + std::to_string(sa.h) + "x" + std::to_string(sa.w) + "x" +
                           std::to_string(sa.c) + ", '" + b.inputs[1] + "' is " +
                           std::to_string(sb.h) + "x" + std::to_string(sb.w) + "x" +
                           std::to_string(sb.c));
        typename ModelT<T>::Layer add;
        add.kind = LayerKind::ResidualAdd;
        add.block = b.name;
        add.in0 = a_slot;
        add.in1 = b_slot;
        cur = push(std::move(add));
        cur_shape = sa;
        break;
      }
    }

    slot_of[b.name] = cur;
    shape_of[b.name] = cur_shape;
    model.block_slots.emplace_back(b.name, cur);
  }

  const auto out_shape = shape_of.at(sink);
  model.output_shape = {out_shape.h, out_shape.w, out_shape.c};
  return model;
}

inline Model build_model(const NetSpec& spec, Rng& init_rng, BuildOptions opts = {}) {
  return build_model_t<float>(spec, init_rng, opts);
}

// Class predictions from logits: row-wise argmax.
template <typename T>
std::vector<int> argmax_rows(const TensorT<T>& logits) {
  if (logits.rank() != 2) throw ShapeError("argmax_rows: need (batch, classes)");
  const int n = logits.dim(0), c = logits.dim(1);
  std::vector<int> out(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    int best = 0;
    for (int j = 1; j < c; ++j)
      if (logits.at(i, j) > logits.at(i, best)) best = j;
    out[static_cast<std::size_t>(i)] = best;
  }
  return out;
}

}  // namespace fsdlab
