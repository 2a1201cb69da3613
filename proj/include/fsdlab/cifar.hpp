#pragma once

// CIFAR-10 binary ingestion and a seeded synthetic stand-in dataset.
//
// Disk layout (one record): 1 label byte, then 3072 pixel bytes channel-major
// (1024 red, 1024 green, 1024 blue; each plane row-major 32x32).  A file is a
// plain concatenation of records.

#include <array>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include "fsdlab/common.hpp"
#include "fsdlab/rng.hpp"
#include "fsdlab/tensor.hpp"

namespace fsdlab {

inline constexpr int kCifarDim = 32;
inline constexpr int kCifarClasses = 10;
inline constexpr std::size_t kCifarRecordBytes = 1 + 3 * kCifarDim * kCifarDim;

struct LabeledImage {
  std::array<std::uint8_t, 3 * kCifarDim * kCifarDim> pixels{};  // channel-major planes
  int label = 0;
};

struct Dataset {
  std::vector<LabeledImage> train;
  std::vector<LabeledImage> test;
};

inline std::vector<LabeledImage> decode_cifar_records(const std::vector<std::uint8_t>& bytes,
                                                      const std::string& origin) {
  if (bytes.size() % kCifarRecordBytes != 0)
    throw IoError(origin + ": truncated record at byte offset " +
                  std::to_string(bytes.size() - bytes.size() % kCifarRecordBytes) + " (file size " +
                  std::to_string(bytes.size()) + " is not a multiple of " +
                  std::to_string(kCifarRecordBytes) + ")");
  std::vector<LabeledImage> out(bytes.size() / kCifarRecordBytes);
  for (std::size_t i = 0; i < out.size(); ++i) {
    const std::uint8_t* rec = bytes.data() + i * kCifarRecordBytes;
    if (rec[0] >= kCifarClasses)
      throw IoError(origin + ": corrupt record " + std::to_string(i) + ": label byte " +
                    std::to_string(int(rec[0])) + " is outside [0, 10)");
    out[i].label = rec[0];
    std::copy(rec + 1, rec + kCifarRecordBytes, out[i].pixels.begin());
  }
  return out;
}

inline std::vector<LabeledImage> load_cifar_batch(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "'");
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  return decode_cifar_records(bytes, path);
}

inline std::vector<std::uint8_t> encode_cifar_records(const std::vector<LabeledImage>& images) {
  std::vector<std::uint8_t> bytes;
  bytes.reserve(images.size() * kCifarRecordBytes);
  for (const auto& img : images) {
    bytes.push_back(static_cast<std::uint8_t>(img.label));
    bytes.insert(bytes.end(), img.pixels.begin(), img.pixels.end());
  }
  return bytes;
}

inline void save_cifar_batch(const std::string& path, const std::vector<LabeledImage>& images) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  auto bytes = encode_cifar_records(images);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("short write to '" + path + "'");
}

// Pixels scaled to [0,1], interleaved HWC (h, w, channel) — the tensor layout
// the ops work in.
inline Tensor to_float_image(const LabeledImage& img) {
  Tensor out({kCifarDim, kCifarDim, 3});
  const int plane = kCifarDim * kCifarDim;
  for (int h = 0; h < kCifarDim; ++h)
    for (int w = 0; w < kCifarDim; ++w)
      for (int c = 0; c < 3; ++c)
        out.at(h, w, c) =
            static_cast<float>(img.pixels[static_cast<std::size_t>(c * plane + h * kCifarDim + w)]) /
            255.0f;
  return out;
}

inline LabeledImage from_float_image(const Tensor& t, int label) {
  if (t.shape != Shape{kCifarDim, kCifarDim, 3})
    throw ShapeError("from_float_image: need 32x32x3, got " + shape_str(t.shape));
  LabeledImage img;
  img.label = label;
  const int plane = kCifarDim * kCifarDim;
  for (int h = 0; h < kCifarDim; ++h)
    for (int w = 0; w < kCifarDim; ++w)
      for (int c = 0; c < 3; ++c) {
        float v = std::min(1.0f, std::max(0.0f, t.at(h, w, c)));
        img.pixels[static_cast<std::size_t>(c * plane + h * kCifarDim + w)] =
            static_cast<std::uint8_t>(std::lround(v * 255.0f));
      }
  return img;
}

// ---------------------------------------------------------------------------
// Synthetic stand-in: class identity is carried by texture frequency alone.
//
// Each image is a sinusoidal grating whose spatial frequency belongs to a
// per-class geometric band (bands of adjacent classes overlap, so the task
// has genuine confusions), drawn at a random orientation and phase, under a
// random grey-ish tint, with a random-frequency distractor grating and
// strong pixel noise on top.  Orientation, phase, tint, and contrast carry
// no class information; flips, crops, and color jitter leave the label cue
// intact.  High-class frequencies sit near the sampling limit, so early
// downsampling genuinely discards the evidence needed to tell neighboring
// classes apart.

inline LabeledImage synthetic_image(int label, std::uint64_t seed, std::uint64_t index) {
  Rng rng(Rng::derive(seed, "synthetic", static_cast<std::uint64_t>(label), index));
  constexpr double kTau = 6.28318530717958647692;
  // Class frequency ladder: 2.0 .. ~11.9 cycles per image width, geometric
  // steps of 1.22, jittered so adjacent classes overlap.
  const double band = 2.0 * std::pow(1.22, label);
  const double freq = band * std::exp(rng.normal(0.0, 0.06));
  const double angle = rng.uniform(0.0, kTau / 2.0);  // nuisance
  const double phase = rng.uniform(0.0, kTau);
  const double amp = rng.uniform(0.16, 0.30);
  const double ca = std::cos(angle), sa = std::sin(angle);

  // Distractor grating: random frequency anywhere in the ladder's range.
  const double d_freq = rng.uniform(2.0, 12.0);
  const double d_angle = rng.uniform(0.0, kTau / 2.0);
  const double d_phase = rng.uniform(0.0, kTau);
  const double d_amp = rng.uniform(0.05, 0.12);
  const double dca = std::cos(d_angle), dsa = std::sin(d_angle);

  // Random tint, identically distributed for every class.
  const double base_r = rng.uniform(0.40, 0.60);
  const double base_g = rng.uniform(0.40, 0.60);
  const double base_b = rng.uniform(0.40, 0.60);

  LabeledImage img;
  img.label = label;
  const int plane = kCifarDim * kCifarDim;
  for (int h = 0; h < kCifarDim; ++h) {
    for (int w = 0; w < kCifarDim; ++w) {
      const double u = (ca * w + sa * h) / kCifarDim;
      const double ud = (dca * w + dsa * h) / kCifarDim;
      const double g = amp * std::sin(kTau * freq * u + phase) +
                       d_amp * std::sin(kTau * d_freq * ud + d_phase);
      const double rgb[3] = {base_r + g, base_g + g, base_b + g};
      for (int c = 0; c < 3; ++c) {
        double v = rgb[c] + rng.normal(0.0, 0.22);
        v = std::min(1.0, std::max(0.0, v));
        img.pixels[static_cast<std::size_t>(c * plane + h * kCifarDim + w)] =
            static_cast<std::uint8_t>(std::lround(v * 255.0));
      }
    }
  }
  return img;
}

inline std::vector<LabeledImage> synthetic_batch(int count, std::uint64_t seed,
                                                 std::uint64_t index_offset = 0) {
  std::vector<LabeledImage> out;
  out.reserve(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i)
    out.push_back(synthetic_image(i % kCifarClasses, seed, index_offset + static_cast<std::uint64_t>(i)));
  return out;
}

inline Dataset synthetic_dataset(int train_count, int test_count, std::uint64_t seed) {
  Dataset ds;
  ds.train = synthetic_batch(train_count, seed, 0);
  ds.test = synthetic_batch(test_count, seed, 1u << 24);
  return ds;
}

// Loads the standard five training files + one test file from a directory.
// `train_limit`/`test_limit` truncate after loading (0 = keep everything).
inline Dataset load_cifar_dir(const std::string& dir, int train_limit = 0, int test_limit = 0) {
  Dataset ds;
  for (int i = 1; i <= 5; ++i) {
    auto part = load_cifar_batch(dir + "/data_batch_" + std::to_string(i) + ".bin");
    ds.train.insert(ds.train.end(), part.begin(), part.end());
    if (train_limit > 0 && static_cast<int>(ds.train.size()) >= train_limit) break;
  }
  ds.test = load_cifar_batch(dir + "/test_batch.bin");
  if (train_limit > 0 && static_cast<int>(ds.train.size()) > train_limit)
    ds.train.resize(static_cast<std::size_t>(train_limit));
  if (test_limit > 0 && static_cast<int>(ds.test.size()) > test_limit)
    ds.test.resize(static_cast<std::size_t>(test_limit));
  return ds;
}

}  // namespace fsdlab
