// Copyright 2026 The hazepark Authors
// SPDX-License-Identifier: Apache-2.0
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.


#include "hazepark/training.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <memory>
#include <set>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "hazepark/checkpoint.hpp"
#include "hazepark/codec.hpp"
#include "hazepark/error.hpp"
#include "hazepark/evaluate.hpp"
#include "hazepark/loss.hpp"
#include "test_support.hpp"

namespace hazepark {
namespace {

using testutil::ScratchDir;

// One toy corpus and one small haze corpus shared by the whole suite.
class TrainingTest : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    dir_ = std::make_unique<ScratchDir>("training");
    toy_ = make_toy_corpus(46, 3, dir_->path() / "toy");  // 32 + 32 train
    Manifest few = toy_.train;
    few.records.resize(4);
    haze_ = build_haze_corpus(few, HazeGrid{{0.8, 1.0}, {0.1, 0.2}},
                              dir_->path() / "haze");
    hazy_only_ = haze_;
    std::erase_if(hazy_only_.records,
                  [](const ManifestRecord& r) { return r.has_tag("clear"); });
  }
  static void TearDownTestSuite() { dir_.reset(); }

  static TrainConfig small_classifier_cfg() {
    TrainConfig c = TrainConfig::classifier_default();
    c.input_size = 32;
    c.batch_size = 16;
    c.epochs = 2;
    c.seed = 5;
    return c;
  }
  static TrainConfig small_dehazer_cfg(Regime r) {
    TrainConfig c = TrainConfig::dehazer_default(r);
    c.input_size = 16;
    c.batch_size = 8;
    c.epochs = 1;
    c.seed = 5;
    if (r == Regime::kDehazerM3) c.lambda = 0.5;
    return c;
  }

  static std::unique_ptr<ScratchDir> dir_;
  static ToyCorpus toy_;
  static Manifest haze_;
  static Manifest hazy_only_;
};

std::unique_ptr<ScratchDir> TrainingTest::dir_;
ToyCorpus TrainingTest::toy_;
Manifest TrainingTest::haze_;
Manifest TrainingTest::hazy_only_;

// ---- configuration ----

TEST(TrainConfig, PresetsMatchPublishedRecipes) {
  const TrainConfig c = TrainConfig::classifier_default();
  EXPECT_EQ(c.optimizer.kind, OptimizerKind::kAdam);
  EXPECT_DOUBLE_EQ(c.optimizer.lr, 1e-3);
  EXPECT_DOUBLE_EQ(c.optimizer.weight_decay, 5e-4);
  EXPECT_DOUBLE_EQ(c.optimizer.beta1, 0.9);
  EXPECT_DOUBLE_EQ(c.optimizer.beta2, 0.999);
  EXPECT_EQ(c.batch_size, 64);
  EXPECT_GE(c.epochs, 5);
  EXPECT_LE(c.epochs, 10);
  EXPECT_EQ(c.input_size, 224);

  const TrainConfig d = TrainConfig::dehazer_default(Regime::kDehazerM2);
  EXPECT_EQ(d.optimizer.kind, OptimizerKind::kSgdMomentum);
  EXPECT_DOUBLE_EQ(d.optimizer.lr, 1e-3);
  EXPECT_DOUBLE_EQ(d.optimizer.momentum, 0.9);
  EXPECT_DOUBLE_EQ(d.optimizer.weight_decay, 1e-4);
  ASSERT_TRUE(d.optimizer.clip.has_value());
  EXPECT_DOUBLE_EQ(d.optimizer.clip->lo, -0.1);
  EXPECT_DOUBLE_EQ(d.optimizer.clip->hi, 0.1);
  EXPECT_EQ(d.epochs, 5);

  const TrainConfig j = TrainConfig::joint_default();
  EXPECT_DOUBLE_EQ(j.optimizer.lr, 1e-4);
  EXPECT_EQ(j.epochs, 5);
  EXPECT_DOUBLE_EQ(j.optimizer.momentum, 0.9);
  EXPECT_TRUE(j.optimizer.clip.has_value());
}

TEST(TrainConfig, ValidateRejectsInconsistencies) {
  auto expect_bad = [](auto mutate) {
    TrainConfig c = TrainConfig::dehazer_default(Regime::kDehazerM3);
    c.lambda = 0.5;
    mutate(c);
    EXPECT_THROW(c.validate(), ConfigError);
  };
  expect_bad([](TrainConfig& c) { c.batch_size = 1; });
  expect_bad([](TrainConfig& c) { c.epochs = 0; });
  expect_bad([](TrainConfig& c) { c.lambda.reset(); });
  expect_bad([](TrainConfig& c) { c.lambda = 1.5; });
  expect_bad([](TrainConfig& c) { c.lambda = -0.1; });
  expect_bad([](TrainConfig& c) { c.regime = Regime::kDehazerM2; });
  expect_bad([](TrainConfig& c) { c.optimizer.lr = 0; });
  expect_bad([](TrainConfig& c) { c.optimizer.momentum = 1.0; });
  expect_bad([](TrainConfig& c) { c.optimizer.clip = ClipRange{0.1, -0.1}; });
  expect_bad([](TrainConfig& c) {
    c.regime = Regime::kJoint;
    c.lambda.reset();
    c.freeze_dehazer = true;
  });
  TrainConfig ok = TrainConfig::dehazer_default(Regime::kDehazerM3);
  ok.lambda = 0.0;
  EXPECT_NO_THROW(ok.validate());
  ok.lambda = 1.0;
  EXPECT_NO_THROW(ok.validate());
}

TEST(TrainConfig, JsonRoundTrip) {
  TrainConfig c = TrainConfig::dehazer_default(Regime::kDehazerM3);
  c.lambda = 0.4291;
  c.seed = 77;
  c.input_size = 64;
  const TrainConfig back = TrainConfig::from_json(c.to_json());
  EXPECT_EQ(back.regime, Regime::kDehazerM3);
  EXPECT_EQ(back.lambda, c.lambda);
  EXPECT_EQ(back.seed, 77u);
  EXPECT_EQ(back.input_size, 64);
  EXPECT_EQ(back.optimizer.clip->hi, 0.1);
  EXPECT_EQ(back.to_json(), c.to_json());
}

TEST(TrainConfig, RegimeNames) {
  EXPECT_EQ(parse_regime("m1"), Regime::kDehazerM1);
  EXPECT_EQ(parse_regime("dehazer_m3"), Regime::kDehazerM3);
  EXPECT_EQ(parse_regime(to_string(Regime::kJoint)), Regime::kJoint);
  EXPECT_THROW(parse_regime("m4"), ConfigError);
}

// ---- batching ----

TEST(EpochBatches, CoversEverySampleOnceAndDropsSingletons) {
  const auto b = epoch_batches(21, 4, 9, 1);
  ASSERT_EQ(b.size(), 5u);  // 5 x 4, the trailing single sample dropped
  std::set<std::size_t> seen;
  for (const auto& batch : b) {
    EXPECT_EQ(batch.size(), 4u);
    seen.insert(batch.begin(), batch.end());
  }
  EXPECT_EQ(seen.size(), 20u);
  EXPECT_EQ(epoch_batches(22, 4, 9, 1).back().size(), 2u);
}

TEST(EpochBatches, ShuffleDependsOnSeedAndEpoch) {
  EXPECT_EQ(epoch_batches(50, 8, 1, 1), epoch_batches(50, 8, 1, 1));
  EXPECT_NE(epoch_batches(50, 8, 1, 1), epoch_batches(50, 8, 1, 2));
  EXPECT_NE(epoch_batches(50, 8, 1, 1), epoch_batches(50, 8, 2, 1));
  const auto plain = epoch_batches(6, 3, 1, 1, false);
  EXPECT_EQ(plain, (std::vector<std::vector<std::size_t>>{{0, 1, 2}, {3, 4, 5}}));
}

// ---- clear/hazy schedule ----

TEST_F(TrainingTest, ScheduleOneClearPerGridOfHazy) {
  const auto m2 = clear_ratio_schedule(haze_, Regime::kDehazerM2);
  std::map<std::filesystem::path, std::pair<int, int>> per_source;  // clear, hazy
  for (const auto& s : m2) {
    auto& [c, h] = per_source[s.target];
    (s.y == 1 ? c : h) += 1;
    if (s.y == 1) {
      EXPECT_EQ(s.input, s.target);
    }
  }
  EXPECT_EQ(per_source.size(), 4u);
  for (const auto& [target, counts] : per_source) {
    EXPECT_EQ(counts.first, 1) << target;
    EXPECT_EQ(counts.second, 4) << target;
  }
  const auto m1 = clear_ratio_schedule(haze_, Regime::kDehazerM1);
  EXPECT_EQ(m1.size(), 16u);
  EXPECT_TRUE(std::none_of(m1.begin(), m1.end(), [](const DehazeSample& s) { return s.y; }));
}

TEST_F(TrainingTest, StandardGridGivesOneToThirtyFive) {
  ScratchDir out("sched");
  Manifest one = toy_.train;
  one.records.resize(2);
  const Manifest corpus = build_haze_corpus(one, HazeGrid::standard(), out.path());
  const auto plan = clear_ratio_schedule(corpus, Regime::kDehazerM3);
  const auto clear = std::count_if(plan.begin(), plan.end(),
                                   [](const DehazeSample& s) { return s.y == 1; });
  EXPECT_EQ(clear, 2);
  EXPECT_EQ(static_cast<long>(plan.size()) - clear, 70);
}

TEST_F(TrainingTest, ScheduleNeedsPairedTargets) {
  Manifest broken = hazy_only_;
  std::erase_if(broken.records[0].tags,
                [](const std::string& t) { return t.rfind("target=", 0) == 0; });
  EXPECT_THROW(clear_ratio_schedule(broken, Regime::kDehazerM1), DataError);
  EXPECT_THROW(clear_ratio_schedule(haze_, Regime::kClassifier), ConfigError);
}

// ---- classifier ----

TEST_F(TrainingTest, OneEpochIsOneStepPerBatch) {
  TrainConfig c = small_classifier_cfg();
  c.batch_size = 64;
  c.epochs = 1;
  std::int64_t steps = 0;
  double last = NAN;
  const auto run = train_classifier(toy_.train, Manifest{}, c,
                                    [&](std::int64_t s, double loss, const auto&) {
                                      steps = s;
                                      last = loss;
                                    });
  EXPECT_EQ(toy_.train.size(), 64u);
  EXPECT_EQ(steps, 1);
  EXPECT_EQ(run.report.steps, 1);
  EXPECT_TRUE(std::isfinite(last));
  ASSERT_EQ(run.report.curve.size(), 1u);
  EXPECT_TRUE(std::isfinite(run.report.curve[0].loss));
}

TEST_F(TrainingTest, ClassifierIsDeterministic) {
  const TrainConfig c = small_classifier_cfg();
  const auto a = train_classifier(toy_.train, toy_.test, c);
  const auto b = train_classifier(toy_.train, toy_.test, c);
  EXPECT_EQ(save_checkpoint(a.net.to_checkpoint()), save_checkpoint(b.net.to_checkpoint()));
  EXPECT_EQ(a.report.final_metrics, b.report.final_metrics);
  TrainConfig other = c;
  other.seed = 6;
  const auto d = train_classifier(toy_.train, toy_.test, other);
  EXPECT_NE(save_checkpoint(a.net.to_checkpoint()), save_checkpoint(d.net.to_checkpoint()));
}

TEST_F(TrainingTest, ReturnsBestValidationEpoch) {
  TrainConfig c = small_classifier_cfg();
  c.epochs = 4;
  auto run = train_classifier(toy_.train, toy_.test, c);
  double best = -1;
  int best_epoch = 0;
  for (const auto& e : run.report.curve) {
    if (e.split == "val" && *e.accuracy > best) {
      best = *e.accuracy;
      best_epoch = e.epoch;
    }
  }
  EXPECT_EQ(run.report.best_epoch, best_epoch);
  const EvalResult r = evaluate_classifier(run.net, toy_.test, "m", "val");
  EXPECT_DOUBLE_EQ(r.accuracy, best);
}

TEST_F(TrainingTest, SingleClassManifestIsDataError) {
  Manifest one_class = toy_.train;
  std::erase_if(one_class.records, [](const ManifestRecord& r) { return r.label == 1; });
  EXPECT_THROW(train_classifier(one_class, Manifest{}, small_classifier_cfg()), DataError);
  TrainConfig wrong = small_classifier_cfg();
  wrong.regime = Regime::kJoint;
  EXPECT_THROW(train_classifier(toy_.train, Manifest{}, wrong), ConfigError);
}

TEST_F(TrainingTest, ReportFilesHaveCurve) {
  ScratchDir out("report");
  TrainConfig c = small_classifier_cfg();
  const auto run = train_classifier(toy_.train, toy_.test, c);
  run.report.write(out.path(), "train_report");
  ASSERT_TRUE(std::filesystem::exists(out / "train_report.json"));
  const std::string csv = run.report.curve_csv();
  EXPECT_EQ(csv.rfind("epoch,split,loss,accuracy\n", 0), 0u);
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 1 + 2 * c.epochs);
  for (const auto& e : run.report.curve) EXPECT_TRUE(std::isfinite(e.loss));
}

// ---- dehazer ----

TEST_F(TrainingTest, RegimePreconditions) {
  EXPECT_THROW(train_dehazer(haze_, small_dehazer_cfg(Regime::kDehazerM1)), DataError);
  EXPECT_THROW(train_dehazer(hazy_only_, small_dehazer_cfg(Regime::kDehazerM2)), DataError);
  TrainConfig no_lambda = small_dehazer_cfg(Regime::kDehazerM3);
  no_lambda.lambda.reset();
  EXPECT_THROW(train_dehazer(haze_, no_lambda), ConfigError);
  EXPECT_NO_THROW(train_dehazer(hazy_only_, small_dehazer_cfg(Regime::kDehazerM1)));
}

TEST_F(TrainingTest, DehazerIsDeterministic) {
  const TrainConfig c = small_dehazer_cfg(Regime::kDehazerM3);
  const auto a = train_dehazer(haze_, c);
  const auto b = train_dehazer(haze_, c);
  EXPECT_EQ(save_checkpoint(a.net.to_checkpoint()), save_checkpoint(b.net.to_checkpoint()));
}

TrainConfig plain_sgd(TrainConfig c, double lr) {
  c.optimizer.weight_decay = 0.0;
  c.optimizer.clip.reset();
  c.optimizer.lr = lr;
  return c;
}

TEST_F(TrainingTest, HalfLambdaWithDoubledLrMatchesModelTwo) {
  // Weights of 0.5 halve every gradient exactly; doubling lr cancels that
  // through SGD momentum bit for bit.
  TrainConfig m2 = plain_sgd(small_dehazer_cfg(Regime::kDehazerM2), 1e-2);
  m2.epochs = 2;
  TrainConfig m3 = plain_sgd(small_dehazer_cfg(Regime::kDehazerM3), 2e-2);
  m3.epochs = 2;
  m3.lambda = 0.5;
  std::vector<double> l2, l3;
  const auto a = train_dehazer(haze_, m2, {}, [&](auto, double l, const auto&) { l2.push_back(l); });
  const auto b = train_dehazer(haze_, m3, {}, [&](auto, double l, const auto&) { l3.push_back(l); });
  EXPECT_EQ(save_checkpoint(a.net.to_checkpoint()), save_checkpoint(b.net.to_checkpoint()));
  ASSERT_EQ(l2.size(), l3.size());
  for (std::size_t i = 0; i < l2.size(); ++i) EXPECT_NEAR(l3[i], 0.5 * l2[i], 1e-12 * l2[i]);
}

TEST_F(TrainingTest, HalfLambdaAtSameLrIsCollinearStep) {
  TrainConfig m2 = plain_sgd(small_dehazer_cfg(Regime::kDehazerM2), 1e-2);
  m2.batch_size = 20;  // the whole corpus: a single step
  TrainConfig m3 = m2;
  m3.regime = Regime::kDehazerM3;
  m3.lambda = 0.5;
  DehazeNet<float> init;
  init.init(m2.seed);
  auto a = train_dehazer(haze_, m2).net;
  auto b = train_dehazer(haze_, m3).net;
  const auto p0 = init.parameters();
  const auto pa = a.parameters();
  const auto pb = b.parameters();
  double dot = 0, na = 0, nb = 0;
  for (std::size_t i = 0; i < p0.size(); ++i) {
    for (std::size_t j = 0; j < p0[i].value->size(); ++j) {
      const double da = (*pa[i].value)[j] - (*p0[i].value)[j];
      const double db = (*pb[i].value)[j] - (*p0[i].value)[j];
      dot += da * db;
      na += da * da;
      nb += db * db;
    }
  }
  ASSERT_GT(na, 0.0);
  EXPECT_NEAR(dot / std::sqrt(na * nb), 1.0, 1e-5);
  EXPECT_NEAR(std::sqrt(nb / na), 0.5, 1e-3);
}

TEST_F(TrainingTest, LambdaExtremesSilenceOneSampleKind) {
  // A live batch from the schedule with both clear and hazy samples.
  const auto plan = clear_ratio_schedule(haze_, Regime::kDehazerM3);
  std::vector<Image> inputs, targets;
  std::vector<int> ys;
  for (std::size_t i = 0; i < 6; ++i) {
    const auto& s = plan[i];
    inputs.push_back(resize(read_image(s.input), 16, 16));
    targets.push_back(resize(read_image(s.target), 16, 16));
    ys.push_back(s.y);
  }
  ASSERT_NE(std::count(ys.begin(), ys.end(), 1), 0);
  ASSERT_NE(std::count(ys.begin(), ys.end(), 0), 0);
  const std::vector<std::size_t> idx{0, 1, 2, 3, 4, 5};

  for (const double lambda : {0.0, 1.0}) {
    const int silent = lambda == 1.0 ? 0 : 1;
    DehazeNet<float> net;
    net.init(1);
    auto grads_with = [&](const std::vector<Image>& in) {
      std::vector<double> w;
      for (int y : ys) w.push_back(dehaze_loss_weight(y, lambda));
      net.zero_grad();
      const auto out = net.forward(gather_batch<float>(in, idx));
      const auto loss = weighted_mse_loss(out.clean, gather_batch<float>(targets, idx), w);
      for (int n = 0; n < loss.grad.n(); ++n) {
        if (ys[n] != silent) continue;
        for (std::size_t k = 0; k < loss.grad.shape().per_sample(); ++k) {
          EXPECT_EQ(loss.grad.sample(n)[k], 0.0f);
        }
      }
      net.backward(loss.grad);
      std::vector<float> flat;
      for (const auto& p : net.parameters()) {
        flat.insert(flat.end(), p.grad->data().begin(), p.grad->data().end());
      }
      return flat;
    };
    const auto base = grads_with(inputs);
    // Replacing the silenced samples' inputs by noise leaves every gradient
    // unchanged: they contribute exactly zero.
    std::vector<Image> scrambled = inputs;
    Rng rng(2);
    for (std::size_t i = 0; i < ys.size(); ++i) {
      if (ys[i] == silent) scrambled[i] = testutil::random_image(16, 16, 3, rng);
    }
    EXPECT_EQ(grads_with(scrambled), base) << "lambda " << lambda;
    EXPECT_TRUE(std::any_of(base.begin(), base.end(), [](float g) { return g != 0.0f; }));
  }
}

TEST_F(TrainingTest, ClippingBoundsEveryEffectiveGradient) {
  // A huge weight decay makes raw effective gradients far exceed 0.1.
  TrainConfig c = small_dehazer_cfg(Regime::kDehazerM2);
  c.optimizer.weight_decay = 100.0;
  c.optimizer.lr = 1e-6;
  double unclipped_max = 0;
  TrainConfig raw = c;
  raw.optimizer.clip.reset();
  train_dehazer(haze_, raw, {}, [&](auto, double, const OptimizerState<float>& s) {
    unclipped_max = std::max(unclipped_max, s.last_max_abs_grad);
  });
  ASSERT_GT(unclipped_max, 0.1);
  int steps = 0;
  train_dehazer(haze_, c, {}, [&](auto, double, const OptimizerState<float>& s) {
    ++steps;
    EXPECT_LE(s.last_max_abs_grad, 0.1 + 1e-7);
  });
  EXPECT_GT(steps, 0);
}

TEST(TrainingStep, SmallLrStepDecreasesLossOnFixedBatch) {
  Rng rng(12);
  // Dehazer
  {
    DehazeNet<float> net;
    net.init(4);
    const auto x = testutil::random_tensor<float>({4, 3, 12, 12}, rng, 0.2, 0.9);
    const auto target = testutil::random_tensor<float>({4, 3, 12, 12}, rng, 0.0, 1.0);
    const auto params = net.parameters();
    OptimizerState<float> opt;
    opt.config.kind = OptimizerKind::kSgdMomentum;
    opt.config.momentum = 0.0;
    opt.config.lr = 1e-4;
    init_optimizer<float>(opt, params);
    double prev = INFINITY;
    for (int rep = 0; rep < 10; ++rep) {
      net.zero_grad();
      const auto loss = mse_loss(net.forward(x).clean, target);
      EXPECT_LT(loss.value, prev) << "rep " << rep;
      prev = loss.value;
      net.backward(loss.grad);
      optimizer_step<float>(opt, params);
    }
  }
  // Classifier in train mode
  {
    ClassifierNet<float> net(ClassifierSpec::reduced(32));
    net.init(4);
    const auto x = testutil::random_tensor<float>({6, 3, 32, 32}, rng, 0.0, 1.0);
    const std::vector<int> labels{0, 1, 1, 0, 1, 0};
    const auto params = net.parameters();
    OptimizerState<float> opt;
    opt.config.kind = OptimizerKind::kSgdMomentum;
    opt.config.momentum = 0.0;
    opt.config.lr = 1e-4;
    init_optimizer<float>(opt, params);
    double prev = INFINITY;
    for (int rep = 0; rep < 10; ++rep) {
      net.zero_grad();
      const auto ce = cross_entropy(net.forward(x, Mode::kTrain), labels);
      EXPECT_LT(ce.value, prev) << "rep " << rep;
      prev = ce.value;
      net.backward(ce.grad);
      optimizer_step<float>(opt, params);
    }
  }
}

// ---- joint ----

TEST_F(TrainingTest, JointUpdatesBothSubnets) {
  DehazeNet<float> d;
  d.init(1);
  ClassifierNet<float> c(ClassifierSpec::reduced(32));
  c.init(2);
  const Checkpoint d0 = d.to_checkpoint();
  const Checkpoint c0 = c.to_checkpoint();
  TrainConfig cfg = TrainConfig::joint_default();
  cfg.epochs = 1;
  cfg.batch_size = 16;
  auto run = joint_finetune(d, c, toy_.train, cfg);
  auto changed = [](const Checkpoint& before, const Checkpoint& after) {
    for (const auto& t : before.tensors) {
      const auto* u = after.find(t.name);
      if (u != nullptr && u->data != t.data) return true;
    }
    return false;
  };
  EXPECT_TRUE(changed(d0, run.net.dehazer().to_checkpoint()));
  EXPECT_TRUE(changed(c0, run.net.classifier().to_checkpoint()));
  EXPECT_EQ(run.report.steps, 4);
}

TEST_F(TrainingTest, JointRejectsFreezing) {
  DehazeNet<float> d;
  d.init(1);
  ClassifierNet<float> c(ClassifierSpec::reduced(32));
  c.init(2);
  TrainConfig cfg = TrainConfig::joint_default();
  cfg.freeze_classifier = true;
  EXPECT_THROW(joint_finetune(d, c, toy_.train, cfg), ConfigError);
  cfg.freeze_classifier = false;
  cfg.freeze_dehazer = true;
  EXPECT_THROW(joint_finetune(d, c, toy_.train, cfg), ConfigError);
  cfg.freeze_dehazer = false;
  EXPECT_THROW(joint_finetune(d, c, Manifest{}, cfg), DataError);
}

}  // namespace
}  // namespace hazepark
