#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "fsdlab/model.hpp"
#include "fsdlab/netspec.hpp"
#include "fsdlab/optim.hpp"

using namespace fsdlab;

namespace {

using View = ParamViewT<double>;

struct FakeParams {
  std::vector<double> w;
  std::vector<double> g;
  std::vector<View> views;

  FakeParams(std::vector<double> init, bool penalized) : w(std::move(init)), g(w.size(), 0.0) {
    views.push_back(View{"w", w.data(), g.data(), w.size(), penalized});
  }
};

// Input matches the 28x28x3 tensors the preprocessing pipeline emits.
const char* kSmokeDoc = R"(
design: smoke
input: 28 x 28 x 3
stem: 1 x conv3x3, 2, 8
mid: 1 x conv3x3, 2, 16
head: 1 x conv1x1, 1, 10
)";

Dataset two_class_dataset(int per_class, int test_per_class) {
  Dataset ds;
  for (int i = 0; i < per_class; ++i) {
    ds.train.push_back(synthetic_image(0, 101, static_cast<std::uint64_t>(i)));
    ds.train.push_back(synthetic_image(9, 101, static_cast<std::uint64_t>(i)));
  }
  for (int i = 0; i < test_per_class; ++i) {
    ds.test.push_back(synthetic_image(0, 202, static_cast<std::uint64_t>(i)));
    ds.test.push_back(synthetic_image(9, 202, static_cast<std::uint64_t>(i)));
  }
  return ds;
}

}  // namespace

// --- penalties --------------------------------------------------------------

TEST(Penalty, ValueMatchesHandComputation) {
  FakeParams p({0.5, -2.0, 0.0, 3.0}, true);
  // l1 part: 0.1 * (0.5 + 2.0 + 0.0 + 3.0) = 0.55
  // l2 part: 0.01 * (0.25 + 4.0 + 0.0 + 9.0) = 0.1325
  EXPECT_NEAR(penalty_value(p.views, 0.1, 0.01), 0.6825, 1e-15);
  EXPECT_DOUBLE_EQ(penalty_value(p.views, 0.0, 0.0), 0.0);
  EXPECT_NEAR(regularized_loss(2.0, p.views, 0.1, 0.01), 2.6825, 1e-15);
}

TEST(Penalty, ExemptViewsContributeNothing) {
  FakeParams p({1.0, 2.0, 3.0}, false);
  EXPECT_DOUBLE_EQ(penalty_value(p.views, 0.5, 0.5), 0.0);
  accumulate_penalty_grads(p.views, 0.5, 0.5);
  for (double g : p.g) EXPECT_DOUBLE_EQ(g, 0.0);
}

TEST(Penalty, NegativeCoefficientsRejected) {
  FakeParams p({1.0}, true);
  EXPECT_THROW(penalty_value(p.views, -0.1, 0.0), ValueError);
  EXPECT_THROW(penalty_value(p.views, 0.0, -0.1), ValueError);
}

TEST(Penalty, GradMatchesFiniteDifferenceAwayFromZero) {
  // All weights far from 0 so |w| is differentiable at every probe point.
  FakeParams p({0.7, -1.3, 2.1, -0.4}, true);
  const double l1 = 0.3, l2 = 0.05, h = 1e-6;
  accumulate_penalty_grads(p.views, l1, l2);
  for (std::size_t i = 0; i < p.w.size(); ++i) {
    const double keep = p.w[i];
    p.w[i] = keep + h;
    const double up = penalty_value(p.views, l1, l2);
    p.w[i] = keep - h;
    const double dn = penalty_value(p.views, l1, l2);
    p.w[i] = keep;
    EXPECT_NEAR(p.g[i], (up - dn) / (2 * h), 1e-7) << "weight " << i;
  }
}

TEST(Penalty, SignOfZeroIsZero) {
  FakeParams p({0.0}, true);
  accumulate_penalty_grads(p.views, 5.0, 0.0);
  EXPECT_DOUBLE_EQ(p.g[0], 0.0);
}

// --- SGD --------------------------------------------------------------------

TEST(Sgd, PinnedSingleStep) {
  FakeParams p({1.0}, true);
  p.g[0] = 2.0;
  sgd_step(p.views, 0.1);
  EXPECT_DOUBLE_EQ(p.w[0], 0.8);
}

TEST(Sgd, ZeroRateLeavesWeightsUntouched) {
  FakeParams p({1.5, -2.5}, true);
  p.g = {100.0, -100.0};
  sgd_step(p.views, 0.0);
  EXPECT_DOUBLE_EQ(p.w[0], 1.5);
  EXPECT_DOUBLE_EQ(p.w[1], -2.5);
}

TEST(Sgd, ContractsAQuadraticToItsMinimum) {
  // f(w) = w^2 / 2, grad = w; each step multiplies the distance by (1 - lr).
  FakeParams p({4.0}, true);
  for (int i = 0; i < 100; ++i) {
    p.g[0] = p.w[0];
    sgd_step(p.views, 0.2);
  }
  EXPECT_NEAR(p.w[0], 4.0 * std::pow(0.8, 100), 1e-12);
  EXPECT_LT(std::abs(p.w[0]), 1e-8);
}

TEST(Sgd, GradNormIsEuclidean) {
  FakeParams p({0.0, 0.0}, true);
  p.g = {3.0, 4.0};
  EXPECT_DOUBLE_EQ(grad_norm(p.views), 5.0);
}

// --- training loop ----------------------------------------------------------

TEST(Train, ZeroEpochsIsANoOp) {
  auto spec = parse_spec(kSmokeDoc);
  Rng init(1);
  auto model = build_model(spec, init);
  std::vector<float> before;
  for (const auto& v : model.params())
    before.insert(before.end(), v.value, v.value + v.size);

  Dataset ds = two_class_dataset(8, 4);
  TrainConfig cfg;
  cfg.epochs = 0;
  cfg.batch_size = 4;
  auto log = train(model, ds, cfg);
  EXPECT_TRUE(log.epochs.empty());
  EXPECT_EQ(log.total_steps, 0);
  EXPECT_DOUBLE_EQ(log.final_test_acc, 0.0);

  std::vector<float> after;
  for (const auto& v : model.params())
    after.insert(after.end(), v.value, v.value + v.size);
  EXPECT_EQ(before, after);
}

TEST(Train, ConfigValidationRejectsBadValues) {
  TrainConfig cfg;
  cfg.batch_size = 1;
  EXPECT_THROW(cfg.validate(), ValueError);
  cfg = TrainConfig{};
  cfg.epochs = -1;
  EXPECT_THROW(cfg.validate(), ValueError);
  cfg = TrainConfig{};
  cfg.l2_coeff = -1e-9;
  EXPECT_THROW(cfg.validate(), ValueError);
}

TEST(Train, TwoClassSmokeLearnsTheTrainingSet) {
  auto spec = parse_spec(kSmokeDoc);
  Rng init(7);
  auto model = build_model(spec, init);

  Dataset ds = two_class_dataset(60, 20);
  TrainConfig cfg;
  cfg.epochs = 12;
  cfg.batch_size = 30;
  cfg.seed = 7;
  cfg.policy = DecayPolicy::fixed(0.05);
  cfg.augment_enabled = false;

  auto log = train(model, ds, cfg);
  ASSERT_EQ(log.epochs.size(), 12u);
  EXPECT_EQ(log.total_steps, 12 * 4);
  EXPECT_GT(log.epochs.back().train_acc, 0.95);
  EXPECT_GT(log.final_test_acc, 0.9);
  EXPECT_DOUBLE_EQ(log.final_test_acc, log.epochs.back().test_acc);
  for (const auto& e : log.epochs) {
    EXPECT_TRUE(std::isfinite(e.train_loss));
    EXPECT_DOUBLE_EQ(e.lr, 0.05);
  }
}

TEST(Train, PenaltyTermRaisesTheReportedLoss) {
  Dataset ds = two_class_dataset(16, 4);
  auto run = [&](double l2) {
    auto spec = parse_spec(kSmokeDoc);
    Rng init(3);
    auto model = build_model(spec, init);
    TrainConfig cfg;
    cfg.epochs = 1;
    cfg.batch_size = 16;
    cfg.seed = 3;
    cfg.policy = DecayPolicy::fixed(1e-12);  // negligible movement: isolate the penalty
    cfg.l2_coeff = l2;
    cfg.augment_enabled = false;
    return train(model, ds, cfg).epochs.front().train_loss;
  };
  const double base = run(0.0);
  const double withl2 = run(10.0);
  EXPECT_GT(withl2, base) << "penalized loss must exceed the data loss";
}

TEST(Train, DivergenceRaisesDiagnosticAbort) {
  auto spec = parse_spec(kSmokeDoc);
  Rng init(9);
  auto model = build_model(spec, init);
  Dataset ds = two_class_dataset(16, 2);
  TrainConfig cfg;
  cfg.epochs = 50;
  cfg.batch_size = 8;
  cfg.seed = 9;
  cfg.policy = DecayPolicy::fixed(1e5);
  cfg.augment_enabled = false;
  try {
    train(model, ds, cfg);
    FAIL() << "expected TrainAbort";
  } catch (const TrainAbort& e) {
    EXPECT_GE(e.iter, 1);
    EXPECT_DOUBLE_EQ(e.lr, 1e5);
    const std::string msg = e.what();
    EXPECT_NE(msg.find("finite"), std::string::npos);
  }
}

TEST(Train, RerunWithSameSeedIsBitwiseIdentical) {
  Dataset ds = two_class_dataset(24, 8);
  auto run = [&] {
    auto spec = parse_spec(kSmokeDoc);
    Rng init(11);
    auto model = build_model(spec, init);
    TrainConfig cfg;
    cfg.epochs = 3;
    cfg.batch_size = 16;
    cfg.seed = 11;
    cfg.policy = DecayPolicy::poly(0.05, 1.0, 9);
    return train(model, ds, cfg).to_csv();
  };
  const std::string a = run();
  const std::string b = run();
  EXPECT_EQ(a, b);
  EXPECT_NE(a.find("epoch,train_loss,train_acc,test_acc,lr\n"), std::string::npos);
}

TEST(Train, DifferentSeedsGiveDifferentTrajectories) {
  Dataset ds = two_class_dataset(24, 8);
  auto run = [&](std::uint64_t seed) {
    auto spec = parse_spec(kSmokeDoc);
    Rng init(seed);
    auto model = build_model(spec, init);
    TrainConfig cfg;
    cfg.epochs = 2;
    cfg.batch_size = 16;
    cfg.seed = seed;
    cfg.policy = DecayPolicy::fixed(0.05);
    return train(model, ds, cfg).to_csv();
  };
  EXPECT_NE(run(1), run(2));
}

TEST(Train, MetricsCsvHasOneRowPerEpoch) {
  Dataset ds = two_class_dataset(8, 2);
  auto spec = parse_spec(kSmokeDoc);
  Rng init(5);
  auto model = build_model(spec, init);
  TrainConfig cfg;
  cfg.epochs = 2;
  cfg.batch_size = 8;
  cfg.seed = 5;
  cfg.policy = DecayPolicy::fixed(0.01);
  auto log = train(model, ds, cfg);
  const std::string csv = log.to_csv();
  const long rows = std::count(csv.begin(), csv.end(), '\n');
  EXPECT_EQ(rows, 1 + 2);  // header + one line per epoch

  auto j = log.summary_json();
  EXPECT_EQ(j["epochs"], 2);
  EXPECT_EQ(j["total_steps"], log.total_steps);
  EXPECT_DOUBLE_EQ(j["final_test_acc"].get<double>(), log.final_test_acc);
}
