#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

#include "fsdlab/common.hpp"
#include "fsdlab/detail/gemm.hpp"
#include "fsdlab/rng.hpp"
#include "fsdlab/tensor.hpp"

namespace fsdlab {

enum class Padding { Same, Valid };
enum class Mode { Train, Eval };

template <typename T>
struct LayerGradT {
  TensorT<T> d_input;
  std::vector<TensorT<T>> d_params;
};
using LayerGrad = LayerGradT<float>;

namespace detail {

// Reusable per-thread scratch arenas; ops stay pure and thread-safe.
template <typename T>
inline T* scratch(int arena, std::size_t n) {
  thread_local std::array<std::vector<T>, 6> bufs;
  auto& b = bufs[static_cast<std::size_t>(arena)];
  if (b.size() < n) b.resize(n);
  return b.data();
}

inline int conv_out_extent(int in, int k, int stride, Padding pad) {
  if (pad == Padding::Same) return (in + stride - 1) / stride;
  return (in - k) / stride + 1;
}

inline int same_pad_before(int in, int out, int k, int stride) {
  int total = std::max(0, (out - 1) * stride + k - in);
  return total / 2;
}

// Patch matrix for one image: rows (oh, ow), columns (kh, kw, ci), matching
// the kernel's natural (kh*kw*ci) x co reshape.
template <typename T>
void im2col(const TensorT<T>& input, int n, int kh, int kw, int stride, int pad_h, int pad_w,
            int out_h, int out_w, T* patches) {
  const int H = input.dim(1), W = input.dim(2), C = input.dim(3);
  const T* base = input.ptr() + static_cast<std::size_t>(n) * H * W * C;
  std::size_t row = 0;
  for (int oh = 0; oh < out_h; ++oh) {
    for (int ow = 0; ow < out_w; ++ow, ++row) {
      T* dst = patches + row * (static_cast<std::size_t>(kh) * kw * C);
      for (int dh = 0; dh < kh; ++dh) {
        const int ih = oh * stride - pad_h + dh;
        for (int dw = 0; dw < kw; ++dw) {
          const int iw = ow * stride - pad_w + dw;
          if (ih < 0 || ih >= H || iw < 0 || iw >= W) {
            for (int c = 0; c < C; ++c) *dst++ = T(0);
          } else {
            const T* src = base + (static_cast<std::size_t>(ih) * W + iw) * C;
            for (int c = 0; c < C; ++c) *dst++ = src[c];
          }
        }
      }
    }
  }
}

// Transposed patch matrix: rows (kh, kw, ci), columns (oh, ow).
template <typename T>
void im2col_t(const TensorT<T>& input, int n, int kh, int kw, int stride, int pad_h, int pad_w,
              int out_h, int out_w, T* patches_t) {
  const int H = input.dim(1), W = input.dim(2), C = input.dim(3);
  const std::size_t M = static_cast<std::size_t>(out_h) * out_w;
  const T* base = input.ptr() + static_cast<std::size_t>(n) * H * W * C;
  std::size_t row = 0;
  for (int oh = 0; oh < out_h; ++oh) {
    for (int ow = 0; ow < out_w; ++ow, ++row) {
      for (int dh = 0; dh < kh; ++dh) {
        const int ih = oh * stride - pad_h + dh;
        for (int dw = 0; dw < kw; ++dw) {
          const int iw = ow * stride - pad_w + dw;
          T* dst = patches_t + (static_cast<std::size_t>(dh) * kw + dw) * C * M + row;
          if (ih < 0 || ih >= H || iw < 0 || iw >= W) {
            for (int c = 0; c < C; ++c) dst[static_cast<std::size_t>(c) * M] = T(0);
          } else {
            const T* src = base + (static_cast<std::size_t>(ih) * W + iw) * C;
            for (int c = 0; c < C; ++c) dst[static_cast<std::size_t>(c) * M] = src[c];
          }
        }
      }
    }
  }
}

template <typename T>
void check_conv_args(const TensorT<T>& input, const TensorT<T>& kernel, int stride) {
  if (input.rank() != 4) throw ShapeError("conv2d: input must be NHWC, got " + shape_str(input.shape));
  if (kernel.rank() != 4)
    throw ShapeError("conv2d: kernel must be (kh,kw,in,out), got " + shape_str(kernel.shape));
  if (kernel.dim(2) != input.dim(3))
    throw ShapeError("conv2d: kernel expects " + std::to_string(kernel.dim(2)) +
                     " input channels, input has " + std::to_string(input.dim(3)));
  if (stride < 1) throw ValueError("conv2d: stride must be >= 1");
}

}  // namespace detail

template <typename T>
TensorT<T> conv2d_forward(const TensorT<T>& input, const TensorT<T>& kernel, int stride,
                          Padding pad) {
  detail::check_conv_args(input, kernel, stride);
  const int N = input.dim(0), H = input.dim(1), W = input.dim(2);
  const int kh = kernel.dim(0), kw = kernel.dim(1), ci = kernel.dim(2), co = kernel.dim(3);
  const int out_h = detail::conv_out_extent(H, kh, stride, pad);
  const int out_w = detail::conv_out_extent(W, kw, stride, pad);
  if (out_h < 1 || out_w < 1)
    throw ShapeError("conv2d: zero-sized output for input " + shape_str(input.shape) +
                     " kernel " + shape_str(kernel.shape));
  const int pad_h = pad == Padding::Same ? detail::same_pad_before(H, out_h, kh, stride) : 0;
  const int pad_w = pad == Padding::Same ? detail::same_pad_before(W, out_w, kw, stride) : 0;

  const std::size_t M = static_cast<std::size_t>(out_h) * out_w;
  const std::size_t K = static_cast<std::size_t>(kh) * kw * ci;

  TensorT<T> output({N, out_h, out_w, co});

  // 1x1 stride-1 convolutions are a plain channel mix: one batched matrix
  // product straight off the activation memory, no patch copy.
  if (kh == 1 && kw == 1 && stride == 1) {
    detail::gemm(input.ptr(), kernel.ptr(), output.ptr(),
                 static_cast<int>(static_cast<std::size_t>(N) * M), static_cast<int>(K), co);
    return output;
  }

  T* patches = detail::scratch<T>(1, M * K);
  for (int n = 0; n < N; ++n) {
    detail::im2col(input, n, kh, kw, stride, pad_h, pad_w, out_h, out_w, patches);
    detail::gemm(patches, kernel.ptr(), output.ptr() + static_cast<std::size_t>(n) * M * co,
                 static_cast<int>(M), static_cast<int>(K), co);
  }
  return output;
}

template <typename T>
LayerGradT<T> conv2d_backward(const TensorT<T>& input, const TensorT<T>& kernel, int stride,
                              Padding pad, const TensorT<T>& d_output) {
  detail::check_conv_args(input, kernel, stride);
  const int N = input.dim(0), H = input.dim(1), W = input.dim(2);
  const int kh = kernel.dim(0), kw = kernel.dim(1), ci = kernel.dim(2), co = kernel.dim(3);
  const int out_h = detail::conv_out_extent(H, kh, stride, pad);
  const int out_w = detail::conv_out_extent(W, kw, stride, pad);
  if (d_output.shape != Shape{N, out_h, out_w, co})
    throw ShapeError("conv2d_backward: d_output shape " + shape_str(d_output.shape) +
                     " does not match forward output (" + std::to_string(N) + "," +
                     std::to_string(out_h) + "," + std::to_string(out_w) + "," +
                     std::to_string(co) + ")");
  const int pad_h = pad == Padding::Same ? detail::same_pad_before(H, out_h, kh, stride) : 0;
  const int pad_w = pad == Padding::Same ? detail::same_pad_before(W, out_w, kw, stride) : 0;

  const std::size_t M = static_cast<std::size_t>(out_h) * out_w;
  const std::size_t K = static_cast<std::size_t>(kh) * kw * ci;

  // W^T (co x K) for the input gradient.
  T* wt = detail::scratch<T>(0, static_cast<std::size_t>(co) * K);
  for (std::size_t k = 0; k < K; ++k)
    for (int c = 0; c < co; ++c)
      wt[static_cast<std::size_t>(c) * K + k] = kernel.data[k * co + c];

  LayerGradT<T> grad;
  grad.d_input = TensorT<T>(input.shape);
  TensorT<T> d_kernel(kernel.shape);

  if (kh == 1 && kw == 1 && stride == 1) {
    // Batched channel-mix gradients: dX = dOut * W^T in place, and
    // dK = X^T * dOut via one transposed copy of the activations.
    const std::size_t rows = static_cast<std::size_t>(N) * M;
    detail::gemm(d_output.ptr(), wt, grad.d_input.ptr(), static_cast<int>(rows), co,
                 static_cast<int>(K));
    T* xt = detail::scratch<T>(1, K * rows);
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t k = 0; k < K; ++k) xt[k * rows + r] = input.data[r * K + k];
    detail::gemm(xt, d_output.ptr(), d_kernel.ptr(), static_cast<int>(K),
                 static_cast<int>(rows), co);
    grad.d_params.push_back(std::move(d_kernel));
    return grad;
  }

  T* patches_t = detail::scratch<T>(1, K * M);
  T* dpatch = detail::scratch<T>(3, M * K);
  std::fill(d_kernel.data.begin(), d_kernel.data.end(), T(0));

  for (int n = 0; n < N; ++n) {
    const T* dout = d_output.ptr() + static_cast<std::size_t>(n) * M * co;

    // dK += P^T * dOut, images accumulated in order.
    detail::im2col_t(input, n, kh, kw, stride, pad_h, pad_w, out_h, out_w, patches_t);
    detail::gemm(patches_t, dout, d_kernel.ptr(), static_cast<int>(K), static_cast<int>(M), co,
                 true);

    // dP = dOut * W^T, then scatter back through the patch map.
    detail::gemm(dout, wt, dpatch, static_cast<int>(M), co, static_cast<int>(K));
    T* dinp_img = grad.d_input.ptr() + static_cast<std::size_t>(n) * H * W * ci;
    std::fill(dinp_img, dinp_img + static_cast<std::size_t>(H) * W * ci, T(0));
    std::size_t row = 0;
    for (int oh = 0; oh < out_h; ++oh) {
      for (int ow = 0; ow < out_w; ++ow, ++row) {
        const T* src = dpatch + row * K;
        for (int dh = 0; dh < kh; ++dh) {
          const int ih = oh * stride - pad_h + dh;
          if (ih < 0 || ih >= H) {
            src += static_cast<std::size_t>(kw) * ci;
            continue;
          }
          for (int dw = 0; dw < kw; ++dw) {
            const int iw = ow * stride - pad_w + dw;
            if (iw < 0 || iw >= W) {
              src += ci;
              continue;
            }
            T* dst = dinp_img + (static_cast<std::size_t>(ih) * W + iw) * ci;
            for (int c = 0; c < ci; ++c) dst[c] += src[c];
            src += ci;
          }
        }
      }
    }
  }

  grad.d_params.push_back(std::move(d_kernel));
  return grad;
}

// Two chained 1-d convolutions (1 x n, then n x 1), stride 1, same padding.
// Equivalent to a full n x n convolution exactly when that kernel is
// spatially rank-1; only that case is supported or tested.
template <typename T>
TensorT<T> conv2d_separable(const TensorT<T>& input, const TensorT<T>& col_kernel,
                            const TensorT<T>& row_kernel, int stride) {
  if (stride != 1) throw ValueError("conv2d_separable: only stride 1 is supported");
  if (col_kernel.rank() != 4 || col_kernel.dim(0) != 1)
    throw ShapeError("conv2d_separable: col kernel must be (1,n,ci,co)");
  if (row_kernel.rank() != 4 || row_kernel.dim(1) != 1)
    throw ShapeError("conv2d_separable: row kernel must be (n,1,ci,co)");
  if (col_kernel.dim(1) != row_kernel.dim(0))
    throw ShapeError("conv2d_separable: kernel lengths differ: " +
                     std::to_string(col_kernel.dim(1)) + " vs " +
                     std::to_string(row_kernel.dim(0)));
  TensorT<T> mid = conv2d_forward(input, col_kernel, 1, Padding::Same);
  return conv2d_forward(mid, row_kernel, 1, Padding::Same);
}

template <typename T>
struct PoolResultT {
  TensorT<T> output;
  std::vector<std::int64_t> argmax;  // flat input index per output element
};

// Fixed 2x2 window, stride 2; odd extents drop the trailing row/column.
template <typename T>
PoolResultT<T> maxpool2d(const TensorT<T>& input) {
  if (input.rank() != 4) throw ShapeError("maxpool2d: input must be NHWC");
  const int N = input.dim(0), H = input.dim(1), W = input.dim(2), C = input.dim(3);
  if (H < 2 || W < 2)
    throw ShapeError("maxpool2d: spatial extents must be >= 2, got " + shape_str(input.shape));
  const int out_h = (H - 2) / 2 + 1;
  const int out_w = (W - 2) / 2 + 1;
  PoolResultT<T> res;
  res.output = TensorT<T>({N, out_h, out_w, C});
  res.argmax.resize(res.output.numel());
  std::size_t o = 0;
  for (int n = 0; n < N; ++n) {
    for (int oh = 0; oh < out_h; ++oh) {
      for (int ow = 0; ow < out_w; ++ow) {
        for (int c = 0; c < C; ++c, ++o) {
          T best{};
          std::int64_t best_idx = -1;
          for (int dh = 0; dh < 2; ++dh) {
            for (int dw = 0; dw < 2; ++dw) {
              const int ih = oh * 2 + dh, iw = ow * 2 + dw;
              const std::int64_t idx =
                  ((static_cast<std::int64_t>(n) * H + ih) * W + iw) * C + c;
              const T v = input.data[static_cast<std::size_t>(idx)];
              if (best_idx < 0 || v > best) {  // ties keep the first in scan order
                best = v;
                best_idx = idx;
              }
            }
          }
          res.output.data[o] = best;
          res.argmax[o] = best_idx;
        }
      }
    }
  }
  return res;
}

template <typename T>
TensorT<T> maxpool2d_backward(const std::vector<std::int64_t>& argmax, const Shape& input_shape,
                              const TensorT<T>& d_output) {
  if (argmax.size() != d_output.numel())
    throw ShapeError("maxpool2d_backward: argmax/d_output size mismatch");
  TensorT<T> d_input = zeros<T>(input_shape);
  for (std::size_t i = 0; i < argmax.size(); ++i)
    d_input.data[static_cast<std::size_t>(argmax[i])] += d_output.data[i];
  return d_input;
}

template <typename T>
struct BatchNormStateT {
  std::vector<T> gamma, beta, running_mean, running_var;
  double epsilon = 1e-5;
  double momentum = 0.1;  // weight of the new batch statistic

  explicit BatchNormStateT(int channels = 0)
      : gamma(channels, T(1)), beta(channels, T(0)), running_mean(channels, T(0)),
        running_var(channels, T(1)) {}

  int channels() const { return static_cast<int>(gamma.size()); }

  void validate() const {
    if (epsilon <= 0.0) throw ValueError("batchnorm: epsilon must be > 0");
    if (momentum <= 0.0 || momentum >= 1.0) throw ValueError("batchnorm: momentum must be in (0,1)");
    for (T v : running_var)
      if (v < T(0)) throw ValueError("batchnorm: running_var must be >= 0");
  }
};
using BatchNormState = BatchNormStateT<float>;

template <typename T>
struct BatchNormCacheT {
  std::vector<double> mean, var;  // biased batch statistics per channel
};

template <typename T>
TensorT<T> batchnorm_forward(const TensorT<T>& input, BatchNormStateT<T>& state, Mode mode,
                             BatchNormCacheT<T>* cache = nullptr) {
  if (input.rank() != 4) throw ShapeError("batchnorm: input must be NHWC");
  const int N = input.dim(0), H = input.dim(1), W = input.dim(2), C = input.dim(3);
  if (C != state.channels())
    throw ShapeError("batchnorm: state has " + std::to_string(state.channels()) +
                     " channels, input has " + std::to_string(C));
  state.validate();
  TensorT<T> out(input.shape);
  const std::size_t plane = static_cast<std::size_t>(N) * H * W;

  if (mode == Mode::Train) {
    if (N < 2) throw ValueError("batchnorm: train mode requires batch size >= 2");
    for (int c = 0; c < C; ++c) {
      double sum = 0.0;
      for (std::size_t i = 0; i < plane; ++i) sum += input.data[i * C + c];
      const double mean = sum / static_cast<double>(plane);
      double sq = 0.0;
      for (std::size_t i = 0; i < plane; ++i) {
        const double d = input.data[i * C + c] - mean;
        sq += d * d;
      }
      const double var = sq / static_cast<double>(plane);
      const double inv = 1.0 / std::sqrt(var + state.epsilon);
      const double g = state.gamma[c], b = state.beta[c];
      for (std::size_t i = 0; i < plane; ++i)
        out.data[i * C + c] = static_cast<T>((input.data[i * C + c] - mean) * inv * g + b);

      const double unbiased =
          plane > 1 ? sq / static_cast<double>(plane - 1) : var;
      state.running_mean[c] = static_cast<T>((1.0 - state.momentum) * state.running_mean[c] +
                                             state.momentum * mean);
      state.running_var[c] = static_cast<T>((1.0 - state.momentum) * state.running_var[c] +
                                            state.momentum * unbiased);
      if (cache) {
        cache->mean.resize(C);
        cache->var.resize(C);
        cache->mean[c] = mean;
        cache->var[c] = var;
      }
    }
  } else {
    for (int c = 0; c < C; ++c) {
      const double inv = 1.0 / std::sqrt(static_cast<double>(state.running_var[c]) + state.epsilon);
      const double mean = state.running_mean[c];
      const double g = state.gamma[c], b = state.beta[c];
      for (std::size_t i = 0; i < plane; ++i)
        out.data[i * C + c] = static_cast<T>((input.data[i * C + c] - mean) * inv * g + b);
    }
  }
  return out;
}

// Gradient of the train-mode transform; d_params = {d_gamma, d_beta}.
template <typename T>
LayerGradT<T> batchnorm_backward(const TensorT<T>& input, const BatchNormStateT<T>& state,
                                 const BatchNormCacheT<T>& cache, const TensorT<T>& d_output) {
  if (!input.same_shape(d_output)) throw ShapeError("batchnorm_backward: shape mismatch");
  const int N = input.dim(0), H = input.dim(1), W = input.dim(2), C = input.dim(3);
  const std::size_t plane = static_cast<std::size_t>(N) * H * W;
  const double m = static_cast<double>(plane);

  LayerGradT<T> grad;
  grad.d_input = TensorT<T>(input.shape);
  TensorT<T> d_gamma({C});
  TensorT<T> d_beta({C});

  for (int c = 0; c < C; ++c) {
    const double mean = cache.mean[c], var = cache.var[c];
    const double inv = 1.0 / std::sqrt(var + state.epsilon);
    double s1 = 0.0, s2 = 0.0;  // sum dy, sum dy * x_hat
    for (std::size_t i = 0; i < plane; ++i) {
      const double dy = d_output.data[i * C + c];
      const double xh = (input.data[i * C + c] - mean) * inv;
      s1 += dy;
      s2 += dy * xh;
    }
    const double g = state.gamma[c];
    for (std::size_t i = 0; i < plane; ++i) {
      const double dy = d_output.data[i * C + c];
      const double xh = (input.data[i * C + c] - mean) * inv;
      grad.d_input.data[i * C + c] =
          static_cast<T>(g * inv / m * (m * dy - s1 - xh * s2));
    }
    d_gamma.data[static_cast<std::size_t>(c)] = static_cast<T>(s2);
    d_beta.data[static_cast<std::size_t>(c)] = static_cast<T>(s1);
  }
  grad.d_params.push_back(std::move(d_gamma));
  grad.d_params.push_back(std::move(d_beta));
  return grad;
}

template <typename T>
TensorT<T> relu(const TensorT<T>& input) {
  TensorT<T> out(input.shape);
  for (std::size_t i = 0; i < input.numel(); ++i)
    out.data[i] = input.data[i] > T(0) ? input.data[i] : T(0);
  return out;
}

template <typename T>
TensorT<T> relu_backward(const TensorT<T>& input, const TensorT<T>& d_output) {
  if (!input.same_shape(d_output)) throw ShapeError("relu_backward: shape mismatch");
  TensorT<T> out(input.shape);
  for (std::size_t i = 0; i < input.numel(); ++i)
    out.data[i] = input.data[i] > T(0) ? d_output.data[i] : T(0);
  return out;
}

template <typename T>
struct DropoutResultT {
  TensorT<T> output;
  TensorT<std::uint8_t> mask;  // 1 = kept
};

// Inverted dropout: survivors are scaled at train time so eval is an identity.
template <typename T>
DropoutResultT<T> dropout(const TensorT<T>& input, double rate, Rng& rng, Mode mode) {
  if (rate < 0.0 || rate >= 1.0) throw ValueError("dropout: rate must be in [0,1)");
  DropoutResultT<T> res;
  res.mask = TensorT<std::uint8_t>(input.shape, std::uint8_t(1));
  if (mode == Mode::Eval || rate == 0.0) {
    res.output = input;
    return res;
  }
  res.output = TensorT<T>(input.shape);
  const double scale = 1.0 / (1.0 - rate);
  for (std::size_t i = 0; i < input.numel(); ++i) {
    if (rng.uniform() < rate) {
      res.mask.data[i] = 0;
      res.output.data[i] = T(0);
    } else {
      res.output.data[i] = static_cast<T>(input.data[i] * scale);
    }
  }
  return res;
}

template <typename T>
TensorT<T> dropout_backward(const TensorT<std::uint8_t>& mask, double rate,
                            const TensorT<T>& d_output) {
  if (mask.shape != d_output.shape) throw ShapeError("dropout_backward: shape mismatch");
  TensorT<T> out(d_output.shape);
  const double scale = 1.0 / (1.0 - rate);
  for (std::size_t i = 0; i < out.numel(); ++i)
    out.data[i] = mask.data[i] ? static_cast<T>(d_output.data[i] * scale) : T(0);
  return out;
}

template <typename T>
struct XentResultT {
  double loss = 0.0;                // mean negative log-likelihood
  TensorT<T> d_logits;              // (p - onehot) / batch
  TensorT<T> probs;
};

template <typename T>
XentResultT<T> softmax_cross_entropy(const TensorT<T>& logits, const std::vector<int>& labels) {
  if (logits.rank() != 2) throw ShapeError("softmax_cross_entropy: logits must be (batch, classes)");
  const int N = logits.dim(0), C = logits.dim(1);
  if (static_cast<int>(labels.size()) != N)
    throw ShapeError("softmax_cross_entropy: got " + std::to_string(labels.size()) +
                     " labels for batch " + std::to_string(N));
  XentResultT<T> res;
  res.d_logits = TensorT<T>({N, C});
  res.probs = TensorT<T>({N, C});
  double total = 0.0;
  for (int n = 0; n < N; ++n) {
    const int label = labels[static_cast<std::size_t>(n)];
    if (label < 0 || label >= C)
      throw ValueError("softmax_cross_entropy: label " + std::to_string(label) +
                       " out of range [0," + std::to_string(C) + ")");
    const T* row = logits.ptr() + static_cast<std::size_t>(n) * C;
    double mx = row[0];
    for (int c = 1; c < C; ++c) mx = std::max(mx, static_cast<double>(row[c]));
    double sum = 0.0;
    for (int c = 0; c < C; ++c) sum += std::exp(static_cast<double>(row[c]) - mx);
    const double log_sum = std::log(sum);
    for (int c = 0; c < C; ++c) {
      const double logp = static_cast<double>(row[c]) - mx - log_sum;
      const double p = std::exp(logp);
      res.probs.at(n, c) = static_cast<T>(p);
      res.d_logits.at(n, c) = static_cast<T>((p - (c == label ? 1.0 : 0.0)) / N);
      if (c == label) total -= logp;
    }
  }
  res.loss = total / N;
  return res;
}

template <typename T>
TensorT<T> global_avg_pool(const TensorT<T>& input) {
  if (input.rank() != 4) throw ShapeError("global_avg_pool: input must be NHWC");
  const int N = input.dim(0), H = input.dim(1), W = input.dim(2), C = input.dim(3);
  TensorT<T> out({N, 1, 1, C});
  const double inv = 1.0 / (static_cast<double>(H) * W);
  for (int n = 0; n < N; ++n) {
    for (int c = 0; c < C; ++c) {
      double sum = 0.0;
      for (int h = 0; h < H; ++h)
        for (int w = 0; w < W; ++w) sum += input.at(n, h, w, c);
      out.at(n, 0, 0, c) = static_cast<T>(sum * inv);
    }
  }
  return out;
}

template <typename T>
TensorT<T> global_avg_pool_backward(const Shape& input_shape, const TensorT<T>& d_output) {
  const int N = input_shape[0], H = input_shape[1], W = input_shape[2], C = input_shape[3];
  if (d_output.shape != Shape{N, 1, 1, C})
    throw ShapeError("global_avg_pool_backward: d_output shape mismatch");
  TensorT<T> d_input(input_shape);
  const double inv = 1.0 / (static_cast<double>(H) * W);
  for (int n = 0; n < N; ++n)
    for (int c = 0; c < C; ++c) {
      const T v = static_cast<T>(d_output.at(n, 0, 0, c) * inv);
      for (int h = 0; h < H; ++h)
        for (int w = 0; w < W; ++w) d_input.at(n, h, w, c) = v;
    }
  return d_input;
}

}  // namespace fsdlab
