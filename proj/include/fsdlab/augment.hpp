#pragma once

// Image preprocessing: the training pipeline (random crop, flips, color
// jitter, per-image standardization), the deterministic eval pipeline
// (central crop), and bilinear resizing.
//
// Training pipeline order: scale to [0,1] -> random 28x28 crop -> LR flip
// coin -> UD flip coin -> hue shift -> contrast scale -> saturation scale ->
// standardize.  Each knob draws from `rng` only when enabled, so a given
// (config, stream) pair is fully reproducible.

#include <algorithm>
#include <cmath>

#include "fsdlab/cifar.hpp"
#include "fsdlab/common.hpp"
#include "fsdlab/rng.hpp"
#include "fsdlab/tensor.hpp"

namespace fsdlab {

struct AugmentConfig {
  int crop = 28;
  bool random_crop = true;       // off: top-left corner, for reproducible tests
  bool flips = true;             // LR and UD, probability 0.5 each
  bool color_jitter = true;      // hue / contrast / saturation
  double hue_delta = 0.08;       // uniform shift in [-hue_delta, +hue_delta] of the hue circle
  double contrast_lo = 0.7, contrast_hi = 1.3;
  double saturation_lo = 0.6, saturation_hi = 1.4;

  void validate() const {
    if (crop < 1 || crop > kCifarDim)
      throw ValueError("augment: crop must be in [1, 32]");
    if (contrast_lo > contrast_hi || saturation_lo > saturation_hi)
      throw ValueError("augment: jitter ranges must be ordered");
  }
};

namespace detail {

struct Hsv {
  float h, s, v;  // h in [0,1)
};

inline Hsv rgb_to_hsv(float r, float g, float b) {
  const float mx = std::max({r, g, b});
  const float mn = std::min({r, g, b});
  const float d = mx - mn;
  Hsv out{0.0f, 0.0f, mx};
  if (mx > 0.0f) out.s = d / mx;
  if (d > 0.0f) {
    float h;
    if (mx == r)
      h = (g - b) / d;
    else if (mx == g)
      h = 2.0f + (b - r) / d;
    else
      h = 4.0f + (r - g) / d;
    h /= 6.0f;
    if (h < 0.0f) h += 1.0f;
    out.h = h;
  }
  return out;
}

inline void hsv_to_rgb(const Hsv& in, float& r, float& g, float& b) {
  const float h = in.h * 6.0f;
  const int i = static_cast<int>(h) % 6;
  const float f = h - std::floor(h);
  const float p = in.v * (1.0f - in.s);
  const float q = in.v * (1.0f - in.s * f);
  const float t = in.v * (1.0f - in.s * (1.0f - f));
  switch (i) {
    case 0: r = in.v, g = t, b = p; break;
    case 1: r = q, g = in.v, b = p; break;
    case 2: r = p, g = in.v, b = t; break;
    case 3: r = p, g = q, b = in.v; break;
    case 4: r = t, g = p, b = in.v; break;
    default: r = in.v, g = p, b = q; break;
  }
}

}  // namespace detail

// In-place standardization over all values jointly: x <- (x - mean) / std,
// with the standard deviation floored at 1e-6 (population convention).
template <typename T>
void standardize(TensorT<T>& t) {
  double mean = 0.0;
  for (T v : t.data) mean += static_cast<double>(v);
  mean /= static_cast<double>(t.numel());
  double var = 0.0;
  for (T v : t.data) {
    const double d = static_cast<double>(v) - mean;
    var += d * d;
  }
  var /= static_cast<double>(t.numel());
  const double stddev = std::max(std::sqrt(var), 1e-6);
  for (T& v : t.data) v = static_cast<T>((static_cast<double>(v) - mean) / stddev);
}

// Align-corners-false bilinear resampling; an exact copy when sizes match.
inline Tensor bilinear_resize(const Tensor& img, int out_h, int out_w) {
  if (img.rank() != 3) throw ShapeError("bilinear_resize: need (h, w, c)");
  if (out_h < 1 || out_w < 1) throw ValueError("bilinear_resize: output extents must be >= 1");
  const int in_h = img.dim(0), in_w = img.dim(1), C = img.dim(2);
  if (out_h == in_h && out_w == in_w) return img;
  Tensor out({out_h, out_w, C});
  const float sh = static_cast<float>(in_h) / out_h;
  const float sw = static_cast<float>(in_w) / out_w;
  for (int oh = 0; oh < out_h; ++oh) {
    float fy = (oh + 0.5f) * sh - 0.5f;
    fy = std::min(std::max(fy, 0.0f), static_cast<float>(in_h - 1));
    const int y0 = static_cast<int>(fy);
    const int y1 = std::min(y0 + 1, in_h - 1);
    const float wy = fy - y0;
    for (int ow = 0; ow < out_w; ++ow) {
      float fx = (ow + 0.5f) * sw - 0.5f;
      fx = std::min(std::max(fx, 0.0f), static_cast<float>(in_w - 1));
      const int x0 = static_cast<int>(fx);
      const int x1 = std::min(x0 + 1, in_w - 1);
      const float wx = fx - x0;
      for (int c = 0; c < C; ++c) {
        const float top = img.at(y0, x0, c) * (1 - wx) + img.at(y0, x1, c) * wx;
        const float bot = img.at(y1, x0, c) * (1 - wx) + img.at(y1, x1, c) * wx;
        out.at(oh, ow, c) = top * (1 - wy) + bot * wy;
      }
    }
  }
  return out;
}

inline Tensor crop(const Tensor& img, int off_h, int off_w, int size) {
  const int in_h = img.dim(0), in_w = img.dim(1), C = img.dim(2);
  if (off_h < 0 || off_w < 0 || off_h + size > in_h || off_w + size > in_w)
    throw ValueError("crop: window exceeds the image");
  Tensor out({size, size, C});
  for (int h = 0; h < size; ++h)
    for (int w = 0; w < size; ++w)
      for (int c = 0; c < C; ++c) out.at(h, w, c) = img.at(h + off_h, w + off_w, c);
  return out;
}

inline Tensor preprocess_train(const LabeledImage& img, const AugmentConfig& cfg, Rng& rng) {
  cfg.validate();
  Tensor x = to_float_image(img);

  const int slack = kCifarDim - cfg.crop;
  int off_h = 0, off_w = 0;
  if (cfg.random_crop && slack > 0) {
    off_h = static_cast<int>(rng.below(static_cast<std::uint64_t>(slack) + 1));
    off_w = static_cast<int>(rng.below(static_cast<std::uint64_t>(slack) + 1));
  }
  x = crop(x, off_h, off_w, cfg.crop);

  if (cfg.flips) {
    const int n = cfg.crop, C = x.dim(2);
    if (rng.bernoulli(0.5)) {  // left-right
      for (int h = 0; h < n; ++h)
        for (int w = 0; w < n / 2; ++w)
          for (int c = 0; c < C; ++c) std::swap(x.at(h, w, c), x.at(h, n - 1 - w, c));
    }
    if (rng.bernoulli(0.5)) {  // up-down
      for (int h = 0; h < n / 2; ++h)
        for (int w = 0; w < n; ++w)
          for (int c = 0; c < C; ++c) std::swap(x.at(h, w, c), x.at(n - 1 - h, w, c));
    }
  }

  if (cfg.color_jitter) {
    const float hue_shift = static_cast<float>(rng.uniform(-cfg.hue_delta, cfg.hue_delta));
    const float contrast = static_cast<float>(rng.uniform(cfg.contrast_lo, cfg.contrast_hi));
    const float saturation = static_cast<float>(rng.uniform(cfg.saturation_lo, cfg.saturation_hi));

    // Hue: rotate around the hue circle.
    for (std::size_t i = 0; i < x.numel(); i += 3) {
      auto hsv = detail::rgb_to_hsv(x.data[i], x.data[i + 1], x.data[i + 2]);
      hsv.h += hue_shift;
      hsv.h -= std::floor(hsv.h);
      detail::hsv_to_rgb(hsv, x.data[i], x.data[i + 1], x.data[i + 2]);
    }
    // Contrast: scale around the image mean, clamped back to [0,1].
    double mean = 0.0;
    for (float v : x.data) mean += v;
    mean /= static_cast<double>(x.numel());
    for (float& v : x.data)
      v = std::min(1.0f, std::max(0.0f, static_cast<float>(mean + (v - mean) * contrast)));
    // Saturation: scale in HSV.
    for (std::size_t i = 0; i < x.numel(); i += 3) {
      auto hsv = detail::rgb_to_hsv(x.data[i], x.data[i + 1], x.data[i + 2]);
      hsv.s = std::min(1.0f, hsv.s * saturation);
      detail::hsv_to_rgb(hsv, x.data[i], x.data[i + 1], x.data[i + 2]);
    }
  }

  standardize(x);
  return x;
}

// Deterministic eval path: central crop, optional resize, standardize.
inline Tensor preprocess_eval(const LabeledImage& img, int crop_size = 28, int target = 28) {
  if (crop_size < 1 || crop_size > kCifarDim)
    throw ValueError("preprocess_eval: crop must be in [1, 32]");
  Tensor x = to_float_image(img);
  const int off = (kCifarDim - crop_size) / 2;
  x = crop(x, off, off, crop_size);
  if (target != crop_size) x = bilinear_resize(x, target, target);
  standardize(x);
  return x;
}

}  // namespace fsdlab
