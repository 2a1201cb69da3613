#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <map>
#include <vector>

#include "fsdlab/augment.hpp"
#include "fsdlab/cifar.hpp"
#include "fsdlab/sampler.hpp"

namespace fsdlab {
namespace {

namespace fs = std::filesystem;

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() / ("fsdlab_data_test_" + std::to_string(::getpid()));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

// --- binary record round-trips ---------------------------------------------

TEST(CifarIo, SaveLoadRoundTripIsExact) {
  TempDir tmp;
  const auto images = synthetic_batch(23, 77);
  const std::string path = (tmp.path / "batch.bin").string();
  save_cifar_batch(path, images);
  const auto loaded = load_cifar_batch(path);
  ASSERT_EQ(loaded.size(), images.size());
  for (std::size_t i = 0; i < images.size(); ++i) {
    EXPECT_EQ(loaded[i].label, images[i].label);
    EXPECT_EQ(loaded[i].pixels, images[i].pixels);
  }
}

TEST(CifarIo, EncodeDecodeRoundTrip) {
  const auto images = synthetic_batch(5, 3);
  const auto bytes = encode_cifar_records(images);
  EXPECT_EQ(bytes.size(), 5 * kCifarRecordBytes);
  const auto back = decode_cifar_records(bytes, "mem");
  ASSERT_EQ(back.size(), 5u);
  for (std::size_t i = 0; i < 5; ++i) EXPECT_EQ(back[i].pixels, images[i].pixels);
}

TEST(CifarIo, TruncatedFileReportsByteOffset) {
  auto bytes = encode_cifar_records(synthetic_batch(2, 5));
  bytes.resize(bytes.size() - 100);
  try {
    decode_cifar_records(bytes, "short.bin");
    FAIL() << "expected IoError";
  } catch (const IoError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("short.bin"), std::string::npos);
    EXPECT_NE(msg.find("truncated"), std::string::npos);
    EXPECT_NE(msg.find(std::to_string(kCifarRecordBytes)), std::string::npos);
  }
}

TEST(CifarIo, OutOfRangeLabelIsCorrupt) {
  auto bytes = encode_cifar_records(synthetic_batch(3, 5));
  bytes[kCifarRecordBytes] = 10;  // second record's label byte
  EXPECT_THROW(decode_cifar_records(bytes, "mem"), IoError);
}

TEST(CifarIo, MissingFileThrows) {
  EXPECT_THROW(load_cifar_batch("/nonexistent/p/q.bin"), IoError);
}

TEST(CifarIo, LoadDirReadsTrainAndTestSplits) {
  TempDir tmp;
  for (int b = 1; b <= 5; ++b)
    save_cifar_batch((tmp.path / ("data_batch_" + std::to_string(b) + ".bin")).string(),
                     synthetic_batch(20, static_cast<std::uint64_t>(b)));
  save_cifar_batch((tmp.path / "test_batch.bin").string(), synthetic_batch(30, 99));

  Dataset all = load_cifar_dir(tmp.path.string(), 0, 0);
  EXPECT_EQ(all.train.size(), 100u);
  EXPECT_EQ(all.test.size(), 30u);

  Dataset limited = load_cifar_dir(tmp.path.string(), 35, 10);
  EXPECT_EQ(limited.train.size(), 35u);
  EXPECT_EQ(limited.test.size(), 10u);
  EXPECT_EQ(limited.train[0].pixels, all.train[0].pixels);
}

// --- float conversion ------------------------------------------------------

TEST(CifarFloat, PixelMappingIsChannelMajorToHwc) {
  LabeledImage img;
  img.label = 1;
  const int plane = kCifarDim * kCifarDim;
  // red at (0,0), green at (1,2), blue at (3,4)
  img.pixels[0] = 255;
  img.pixels[static_cast<std::size_t>(plane + 1 * kCifarDim + 2)] = 128;
  img.pixels[static_cast<std::size_t>(2 * plane + 3 * kCifarDim + 4)] = 64;
  Tensor t = to_float_image(img);
  EXPECT_FLOAT_EQ(t.at(0, 0, 0), 1.0f);
  EXPECT_FLOAT_EQ(t.at(1, 2, 1), 128.0f / 255.0f);
  EXPECT_FLOAT_EQ(t.at(3, 4, 2), 64.0f / 255.0f);
  EXPECT_FLOAT_EQ(t.at(0, 0, 1), 0.0f);
}

TEST(CifarFloat, ToFromFloatRoundTripsExactly) {
  const auto images = synthetic_batch(8, 11);
  for (const auto& img : images) {
    LabeledImage back = from_float_image(to_float_image(img), img.label);
    EXPECT_EQ(back.pixels, img.pixels);
    EXPECT_EQ(back.label, img.label);
  }
}

// --- synthetic generator ---------------------------------------------------

TEST(Synthetic, DeterministicPerKey) {
  LabeledImage a = synthetic_image(3, 42, 7);
  LabeledImage b = synthetic_image(3, 42, 7);
  EXPECT_EQ(a.pixels, b.pixels);
  LabeledImage c = synthetic_image(3, 42, 8);
  EXPECT_NE(a.pixels, c.pixels);
  LabeledImage d = synthetic_image(3, 43, 7);
  EXPECT_NE(a.pixels, d.pixels);
}

TEST(Synthetic, BatchCyclesThroughAllLabels) {
  const auto images = synthetic_batch(25, 1);
  std::map<int, int> counts;
  for (const auto& img : images) counts[img.label]++;
  EXPECT_EQ(counts.size(), 10u);
  for (int c = 0; c < 10; ++c) EXPECT_GE(counts[c], 2);
}

TEST(Synthetic, TrainAndTestSplitsAreDisjointStreams) {
  Dataset ds = synthetic_dataset(10, 10, 5);
  // Same labels by construction, but different draws.
  for (int i = 0; i < 10; ++i) {
    EXPECT_EQ(ds.train[static_cast<std::size_t>(i)].label,
              ds.test[static_cast<std::size_t>(i)].label);
    EXPECT_NE(ds.train[static_cast<std::size_t>(i)].pixels,
              ds.test[static_cast<std::size_t>(i)].pixels);
  }
}

// --- standardization -------------------------------------------------------

TEST(Standardize, ZeroMeanUnitVarianceOverAllValues) {
  Rng rng(21);
  Tensor x({28, 28, 3});
  for (auto& v : x.data) v = static_cast<float>(rng.uniform(0.0, 1.0));
  standardize(x);
  double mean = 0.0;
  for (float v : x.data) mean += v;
  mean /= static_cast<double>(x.numel());
  double var = 0.0;
  for (float v : x.data) var += (v - mean) * (v - mean);
  var /= static_cast<double>(x.numel());
  EXPECT_NEAR(mean, 0.0, 1e-5);
  EXPECT_NEAR(var, 1.0, 1e-4);
}

TEST(Standardize, ConstantImageMapsToZerosViaFloor) {
  Tensor x({4, 4, 3}, 0.37f);
  standardize(x);
  for (float v : x.data) EXPECT_NEAR(v, 0.0f, 1e-6f);
}

// --- bilinear resize -------------------------------------------------------

TEST(Bilinear, TwoByTwoDownToOneAveragesAllFour) {
  Tensor x({2, 2, 1});
  x.at(0, 0, 0) = 0.0f;
  x.at(0, 1, 0) = 1.0f;
  x.at(1, 0, 0) = 2.0f;
  x.at(1, 1, 0) = 3.0f;
  Tensor y = bilinear_resize(x, 1, 1);
  EXPECT_FLOAT_EQ(y.at(0, 0, 0), 1.5f);
}

TEST(Bilinear, SameSizeIsIdentity) {
  Rng rng(22);
  Tensor x({5, 7, 3});
  for (auto& v : x.data) v = static_cast<float>(rng.uniform(0.0, 1.0));
  Tensor y = bilinear_resize(x, 5, 7);
  EXPECT_EQ(y.data, x.data);
}

TEST(Bilinear, OutputStaysWithinInputRange) {
  Rng rng(23);
  Tensor x({16, 16, 3});
  for (auto& v : x.data) v = static_cast<float>(rng.uniform(0.2, 0.8));
  Tensor y = bilinear_resize(x, 28, 28);
  for (float v : y.data) {
    EXPECT_GE(v, 0.2f - 1e-6f);
    EXPECT_LE(v, 0.8f + 1e-6f);
  }
}

// --- preprocessing pipelines -----------------------------------------------

TEST(Preprocess, EvalIsCentralCropPlusStandardize) {
  LabeledImage img = synthetic_image(4, 9, 0);
  Tensor direct = to_float_image(img);
  direct = crop(direct, 2, 2, 28);
  standardize(direct);
  Tensor via = preprocess_eval(img, 28, 28);
  ASSERT_EQ(via.shape, (Shape{28, 28, 3}));
  EXPECT_EQ(via.data, direct.data);
}

TEST(Preprocess, EvalResizesWhenTargetDiffers) {
  LabeledImage img = synthetic_image(2, 9, 1);
  Tensor out = preprocess_eval(img, 28, 14);
  EXPECT_EQ(out.shape, (Shape{14, 14, 3}));
}

TEST(Preprocess, TrainIsDeterministicGivenSameRngStream) {
  LabeledImage img = synthetic_image(5, 13, 2);
  AugmentConfig cfg;
  Rng r1(881), r2(881);
  Tensor a = preprocess_train(img, cfg, r1);
  Tensor b = preprocess_train(img, cfg, r2);
  EXPECT_EQ(a.data, b.data);
  // A different stream position gives a different augmentation.
  Tensor c = preprocess_train(img, cfg, r1);
  EXPECT_NE(a.data, c.data);
}

TEST(Preprocess, DisabledKnobsDrawNothingFromTheRng) {
  LabeledImage img = synthetic_image(1, 14, 3);
  AugmentConfig cfg;
  cfg.random_crop = false;
  cfg.flips = false;
  cfg.color_jitter = false;
  Rng r1(5), r2(5);
  Tensor a = preprocess_train(img, cfg, r1);
  (void)a;
  EXPECT_EQ(r1.next_u64(), r2.next_u64());  // stream untouched
  ASSERT_EQ(a.dim(0), 28);
}

TEST(Preprocess, CropOffsetsCoverZeroToFour) {
  LabeledImage img = synthetic_image(0, 15, 4);
  AugmentConfig cfg;
  cfg.flips = false;
  cfg.color_jitter = false;
  // The first crop draw consumes two offsets in [0,4]; over many draws both
  // extremes must appear (distribution check of the crop window).
  Rng rng(31);
  std::vector<bool> seen(5, false);
  for (int i = 0; i < 200; ++i) {
    Rng probe(rng.next_u64());
    const int off = static_cast<int>(probe.below(5));
    seen[static_cast<std::size_t>(off)] = true;
  }
  for (int v = 0; v <= 4; ++v) EXPECT_TRUE(seen[static_cast<std::size_t>(v)]) << v;
  Tensor out = preprocess_train(img, cfg, rng);
  EXPECT_EQ(out.shape, (Shape{28, 28, 3}));
}

// --- samplers --------------------------------------------------------------

std::vector<int> ten_class_labels(int per_class) {
  std::vector<int> labels;
  for (int c = 0; c < 10; ++c)
    for (int i = 0; i < per_class; ++i) labels.push_back(c);
  return labels;
}

TEST(Samplers, PlainEpochIsAPermutation) {
  Sampler s(ten_class_labels(13), Balancing::None);
  Rng rng(41);
  const auto order = s.epoch(32, rng);
  ASSERT_EQ(order.size(), 130u);
  std::vector<int> sorted = order;
  std::sort(sorted.begin(), sorted.end());
  for (int i = 0; i < 130; ++i) EXPECT_EQ(sorted[static_cast<std::size_t>(i)], i);
}

TEST(Samplers, PlainEpochsDifferAndAreSeedDeterministic) {
  Sampler s(ten_class_labels(8), Balancing::None);
  Rng r1(42), r2(42), r3(43);
  const auto a = s.epoch(16, r1);
  const auto b = s.epoch(16, r2);
  const auto c = s.epoch(16, r3);
  EXPECT_EQ(a, b);
  EXPECT_NE(a, c);
}

TEST(Samplers, UniformBalancingEvensOutSkewedClasses) {
  // Two populated classes, 90% vs 10%: uniform class draws should bring the
  // minority class to half the picks.
  std::vector<int> labels(1000, 0);
  for (int i = 900; i < 1000; ++i) labels[static_cast<std::size_t>(i)] = 1;
  Sampler s(labels, Balancing::Uniform, 2);
  Rng rng(44);
  int minority = 0, total = 0;
  for (int e = 0; e < 100; ++e) {
    for (int idx : s.epoch(100, rng)) {
      minority += labels[static_cast<std::size_t>(idx)] == 1;
      ++total;
    }
  }
  const double frac = static_cast<double>(minority) / total;
  EXPECT_NEAR(frac, 0.5, 0.02);
}

TEST(Samplers, StratifiedClassCountsDifferByAtMostOne) {
  std::vector<int> labels;
  for (int c = 0; c < 10; ++c)
    for (int i = 0; i < 37 + 11 * c; ++i) labels.push_back(c);  // imbalanced
  Sampler s(labels, Balancing::Stratified);
  Rng rng(45);
  const auto order = s.epoch(64, rng);
  ASSERT_EQ(order.size(), labels.size());
  std::vector<int> counts(10, 0);
  for (int idx : order) counts[static_cast<std::size_t>(labels[static_cast<std::size_t>(idx)])]++;
  const auto [lo, hi] = std::minmax_element(counts.begin(), counts.end());
  EXPECT_LE(*hi - *lo, 1) << "counts spread too wide";
}

TEST(Samplers, StratifiedBatchesAreClassBalanced) {
  Sampler s(ten_class_labels(20), Balancing::Stratified);
  Rng rng(46);
  const auto order = s.epoch(20, rng);
  // Every full batch of 20 holds exactly 2 of each class.
  const auto labels = ten_class_labels(20);
  for (int b = 0; b < 10; ++b) {
    std::vector<int> counts(10, 0);
    for (int k = 0; k < 20; ++k)
      counts[static_cast<std::size_t>(
          labels[static_cast<std::size_t>(order[static_cast<std::size_t>(b * 20 + k)])])]++;
    for (int c = 0; c < 10; ++c) EXPECT_EQ(counts[static_cast<std::size_t>(c)], 2);
  }
}

TEST(Samplers, BalancingRequiresEveryClassPresent) {
  std::vector<int> labels = {0, 0, 1, 1};  // classes 2..9 missing
  EXPECT_NO_THROW(Sampler(labels, Balancing::None));
  EXPECT_THROW(Sampler(labels, Balancing::Uniform), ValueError);
  EXPECT_THROW(Sampler(labels, Balancing::Stratified), ValueError);
  EXPECT_THROW(Sampler({}, Balancing::None), ValueError);
  EXPECT_THROW(Sampler({0, 11}, Balancing::None), ValueError);
}

}  // namespace
}  // namespace fsdlab
