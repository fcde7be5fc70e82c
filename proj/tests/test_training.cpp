#include <algorithm>
#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "darer/gradcheck.hpp"
#include "darer/optim.hpp"
#include "darer/training.hpp"
#include "fixtures.hpp"
#include "oracles.hpp"

using namespace darer;

namespace {

Tensor probs(std::initializer_list<std::initializer_list<double>> rows) { return Tensor::matrix(rows); }

StepOutputs random_outputs(std::size_t n, std::size_t steps, std::mt19937_64& rng) {
  StepOutputs out;
  for (std::size_t t = 0; t <= steps; ++t) {
    out.sentiment.push_back(softmax_rows(Tensor::uniform({n, 3}, -2, 2, rng, true)));
    out.act.push_back(softmax_rows(Tensor::uniform({n, 5}, -2, 2, rng, true)));
  }
  return out;
}

}  // namespace

TEST(EstimateLoss, TwoClassHalfIsLn2) {
  const std::vector<std::size_t> gold{0};
  std::vector<Tensor> steps{probs({{0.5, 0.5}})};
  EXPECT_NEAR(estimate_loss(steps, gold).item(), std::log(2.0), 1e-15);
}

TEST(EstimateLoss, PerfectAndEmpty) {
  const std::vector<std::size_t> gold{1, 0};
  std::vector<Tensor> steps{probs({{0, 1}, {1, 0}}), probs({{0, 1}, {1, 0}})};
  EXPECT_EQ(estimate_loss(steps, gold).item(), 0.0);
  EXPECT_EQ(estimate_loss(std::span<const Tensor>{}, gold).item(), 0.0);
  std::vector<Tensor> zero{probs({{1, 0}, {1, 0}})};
  EXPECT_NEAR(estimate_loss(zero, gold).item(), -std::log(kLogClamp), 1e-9);
}

TEST(MarginLoss, DropFromPointSixToPointFive) {
  const std::vector<std::size_t> gold{0};
  std::vector<Tensor> steps{probs({{0.6, 0.4}}), probs({{0.5, 0.5}})};
  EXPECT_NEAR(margin_loss(steps, gold).item(), 0.1, 1e-15);
}

TEST(MarginLoss, MonotoneSequenceIsZero) {
  const std::vector<std::size_t> gold{0, 1};
  std::vector<Tensor> steps{probs({{0.3, 0.7}, {0.6, 0.4}}), probs({{0.5, 0.5}, {0.5, 0.5}}),
                            probs({{0.9, 0.1}, {0.2, 0.8}})};
  EXPECT_EQ(margin_loss(steps, gold).item(), 0.0);
}

TEST(MarginLoss, AdditiveOverUtterances) {
  const std::vector<std::size_t> g1{0}, g2{1}, both{0, 1};
  std::vector<Tensor> a{probs({{0.6, 0.4}}), probs({{0.5, 0.5}})};
  std::vector<Tensor> b{probs({{0.2, 0.8}}), probs({{0.7, 0.3}})};
  std::vector<Tensor> ab{probs({{0.6, 0.4}, {0.2, 0.8}}), probs({{0.5, 0.5}, {0.7, 0.3}})};
  EXPECT_NEAR(margin_loss(ab, both).item(), margin_loss(a, g1).item() + margin_loss(b, g2).item(), 1e-15);
}

TEST(TotalLoss, BreakdownIdentityOnRandomRuns) {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n = 1 + trial % 5, steps = trial % 4;
    StepOutputs out = random_outputs(n, steps, rng);
    std::vector<std::size_t> gs(n), ga(n);
    for (auto& g : gs) g = std::uniform_int_distribution<std::size_t>(0, 2)(rng);
    for (auto& g : ga) g = std::uniform_int_distribution<std::size_t>(0, 4)(rng);
    const double gam_s = std::uniform_real_distribution<double>(0, 10)(rng);
    const double gam_a = std::uniform_real_distribution<double>(0, 10)(rng);
    const LossBreakdown b = total_loss(out, gs, ga, gam_s, gam_a).breakdown;
    const double sum = b.prediction_s + b.prediction_a + b.estimate_s + b.estimate_a +
                       gam_s * b.margin_s + gam_a * b.margin_a;
    EXPECT_NEAR(b.total, sum, 1e-9);
  }
}

TEST(TotalLoss, NoStepsMeansPredictionOnly) {
  std::mt19937_64 rng(2);
  StepOutputs out = random_outputs(3, 0, rng);
  const std::vector<std::size_t> gs{0, 1, 2}, ga{4, 3, 2};
  LossResult r = total_loss(out, gs, ga, 10.0, 1.0);
  EXPECT_EQ(r.breakdown.estimate_s, 0.0);
  EXPECT_EQ(r.breakdown.margin_a, 0.0);
  EXPECT_DOUBLE_EQ(r.breakdown.total, r.breakdown.prediction_s + r.breakdown.prediction_a);
  EXPECT_DOUBLE_EQ(r.breakdown.prediction_s, nll_loss(out.sentiment[0], gs).item());
}

TEST(TotalLoss, ZeroGammaExcludesMargin) {
  std::mt19937_64 rng(4);
  StepOutputs out = random_outputs(4, 3, rng);
  const std::vector<std::size_t> gs{0, 1, 2, 0}, ga{4, 3, 2, 1};
  const LossBreakdown b = total_loss(out, gs, ga, 0.0, 0.0).breakdown;
  EXPECT_GT(b.margin_s + b.margin_a, 0.0);
  EXPECT_DOUBLE_EQ(b.total, b.prediction_s + b.prediction_a + b.estimate_s + b.estimate_a);
}

TEST(TotalLoss, GradientsReachEveryStep) {
  std::mt19937_64 rng(6);
  std::vector<Tensor> logits;
  for (int t = 0; t < 3; ++t) logits.push_back(Tensor::uniform({2, 3}, -1, 1, rng, true));
  const std::vector<std::size_t> gs{0, 2}, ga{1, 1};
  GradCheckReport r = grad_check(
      [&] {
        StepOutputs out;
        for (const auto& l : logits) {
          out.sentiment.push_back(softmax_rows(l));
          out.act.push_back(softmax_rows(scale(l, 0.5)));
        }
        return total_loss(out, gs, ga, 3.0, 1.0).total;
      },
      logits);
  EXPECT_TRUE(r.passed()) << r.worst;
}

TEST(Metrics, HandComputedMacroF1IsOneThird) {
  // class 0: TP=1 FP=1 FN=0; class 1: TP=0 FP=0 FN=1
  const std::vector<std::size_t> gold{0, 1}, pred{0, 0};
  TaskMetrics m = compute_metrics(gold, pred, 2);
  EXPECT_DOUBLE_EQ(m.macro_f1, 1.0 / 3.0);
  EXPECT_DOUBLE_EQ(m.macro_f1, oracle::macro_f1(gold, pred, 2));
  EXPECT_DOUBLE_EQ(m.accuracy, 0.5);
  EXPECT_DOUBLE_EQ(m.per_class[0].precision, 0.5);
  EXPECT_DOUBLE_EQ(m.per_class[0].recall, 1.0);
  EXPECT_EQ(m.per_class[1].support, 1u);
}

TEST(Metrics, AllCorrectIsOne) {
  const std::vector<std::size_t> gold{0, 1, 2, 2}, pred{0, 1, 2, 2};
  TaskMetrics m = compute_metrics(gold, pred, 3);
  for (double v : {m.macro_precision, m.macro_recall, m.macro_f1, m.weighted_f1, m.accuracy}) EXPECT_EQ(v, 1.0);
}

TEST(Metrics, IgnoredClassDroppedFromAveragesOnly) {
  // class 1 is ignored; one class-2 utterance is predicted as class 1
  const std::vector<std::size_t> gold{0, 1, 2, 2, 1}, pred{0, 1, 2, 1, 1};
  TaskMetrics all = compute_metrics(gold, pred, 3);
  TaskMetrics ign = compute_metrics(gold, pred, 3, std::size_t{1});
  const double f0 = 1.0, f2 = 2.0 * 1.0 * 0.5 / 1.5, f1 = 2.0 * (2.0 / 3.0) * 1.0 / (5.0 / 3.0);
  EXPECT_NEAR(all.macro_f1, (f0 + f1 + f2) / 3.0, 1e-15);
  EXPECT_NEAR(ign.macro_f1, (f0 + f2) / 2.0, 1e-15);
  EXPECT_NEAR(ign.weighted_f1, (1.0 * f0 + 2.0 * f2) / 3.0, 1e-15);
  EXPECT_DOUBLE_EQ(ign.accuracy, all.accuracy);
  EXPECT_NEAR(ign.per_class[1].f1, f1, 1e-15);
}

TEST(Metrics, IgnoringTheOnlyFailingClassLeavesOne) {
  // class 1 is the only class scoring below 1 (never seen, F1 0)
  const std::vector<std::size_t> g{0, 0, 2, 2}, p{0, 0, 2, 2};
  TaskMetrics m = compute_metrics(g, p, 3, std::size_t{1});
  EXPECT_EQ(m.macro_f1, 1.0);
  EXPECT_EQ(m.macro_precision, 1.0);
  EXPECT_EQ(compute_metrics(g, p, 3).macro_f1, 2.0 / 3.0);
}

TEST(Metrics, AbsentClassContributesZero) {
  const std::vector<std::size_t> gold{0, 0}, pred{0, 0};
  TaskMetrics m = compute_metrics(gold, pred, 2);
  EXPECT_DOUBLE_EQ(m.macro_f1, 0.5);
  EXPECT_DOUBLE_EQ(m.weighted_f1, 1.0);
  EXPECT_THROW(compute_metrics(gold, std::vector<std::size_t>{0}, 2), std::invalid_argument);
}

TEST(Metrics, MatchesOracleOnRandomLabels) {
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<std::size_t> gold(30), pred(30);
    for (auto& g : gold) g = std::uniform_int_distribution<std::size_t>(0, 4)(rng);
    for (auto& p : pred) p = std::uniform_int_distribution<std::size_t>(0, 4)(rng);
    EXPECT_NEAR(compute_metrics(gold, pred, 5).macro_f1, oracle::macro_f1(gold, pred, 5), 1e-15);
  }
}

TEST(Metrics, WeightedF1UsesGoldSupport) {
  const std::vector<std::size_t> gold{0, 0, 0, 1}, pred{0, 0, 1, 1};
  TaskMetrics m = compute_metrics(gold, pred, 2);
  const double f0 = 2.0 * 1.0 * (2.0 / 3.0) / (1.0 + 2.0 / 3.0);
  const double f1 = 2.0 * 0.5 * 1.0 / 1.5;
  EXPECT_NEAR(m.weighted_f1, 0.75 * f0 + 0.25 * f1, 1e-15);
  EXPECT_NEAR(m.macro_f1, 0.5 * (f0 + f1), 1e-15);
}

TEST(Adam, FirstStepIsSignedLearningRate) {
  Tensor w = Tensor::matrix({{1.0, -2.0, 0.5}});
  w.set_requires_grad(true);
  auto g = w.grad_storage();
  g[0] = 3.0;
  g[1] = -0.01;
  g[2] = 40.0;
  std::vector<Tensor> params{w};
  AdamState s = AdamState::for_params(params);
  adam_update(params, s, {0.01, 0.9, 0.999, 1e-14});
  EXPECT_NEAR(w.at(0), 1.0 - 0.01, 1e-9);
  EXPECT_NEAR(w.at(1), -2.0 + 0.01, 1e-9);
  EXPECT_NEAR(w.at(2), 0.5 - 0.01, 1e-9);
}

TEST(Adam, ConvergesOnQuadratic) {
  Tensor w = Tensor::scalar(0.0, true);
  std::vector<Tensor> params{w};
  AdamState s = AdamState::for_params(params);
  for (int i = 0; i < 200; ++i) {
    zero_grads(params);
    w.grad_storage()[0] = 2.0 * (w.item() - 3.0);
    adam_update(params, s, {0.1});
  }
  EXPECT_LT(std::abs(w.item() - 3.0), 0.05);
}

TEST(Adam, RejectsNonPositiveLearningRate) {
  Tensor w = Tensor::scalar(0.0, true);
  std::vector<Tensor> params{w};
  AdamState s = AdamState::for_params(params);
  EXPECT_THROW(adam_update(params, s, {0.0}), ConfigError);
  EXPECT_THROW(adam_update(params, s, {-1.0}), ConfigError);
}

TEST(Train, ZeroLearningRateLeavesParametersUnchanged) {
  auto data = fixtures::tiny_data();
  auto model = fixtures::small_model(data, {"dropout=0.3"});
  const auto before = model->snapshot();
  TrainConfig cfg;
  cfg.lr = 0.0;
  cfg.epochs = 1;
  train(*model, data.train, data.dev, cfg);
  EXPECT_EQ(model->snapshot(), before);
}

TEST(Train, HistoryDeterministicUnderSeed) {
  auto data = fixtures::tiny_data();
  TrainConfig cfg;
  cfg.epochs = 2;
  cfg.batch = 4;
  auto run = [&] {
    auto model = fixtures::small_model(data, {"dropout=0.2"});
    TrainResult r = train(*model, data.train, data.dev, cfg);
    std::vector<double> trace;
    for (const auto& e : r.history) trace.insert(trace.end(), {e.train_loss.total, e.dev.f1_s, e.dev.f1_a});
    return std::make_pair(trace, model->snapshot());
  };
  EXPECT_EQ(run(), run());
}

TEST(Train, KeepsBestDevEpoch) {
  auto data = fixtures::tiny_data();
  auto model = fixtures::small_model(data);
  TrainConfig cfg;
  cfg.epochs = 3;
  cfg.lr = 5e-3;
  std::vector<std::vector<double>> snaps;
  TrainResult r = train(*model, data.train, data.dev, cfg);
  ASSERT_EQ(r.history.size(), 3u);
  double best = -1.0;
  std::size_t best_epoch = 0;
  for (const auto& e : r.history)
    if (e.dev.selection() > best) {
      best = e.dev.selection();
      best_epoch = e.epoch;
    }
  EXPECT_EQ(r.best_epoch, best_epoch);
  const Metrics m = evaluate(*model, data.dev, {});
  EXPECT_DOUBLE_EQ(m.selection(), best);
}

TEST(Train, RejectsEmptySplits) {
  auto data = fixtures::tiny_data();
  auto model = fixtures::small_model(data);
  EXPECT_THROW(train(*model, {}, data.dev, {}), std::invalid_argument);
  EXPECT_THROW(train(*model, data.train, {}, {}), std::invalid_argument);
}

TEST(Evaluate, InvariantToDialogOrder) {
  auto data = fixtures::tiny_data(4, 10);
  auto model = fixtures::small_model(data);
  std::vector<EncodedDialog> shuffled = data.dev;
  std::mt19937_64 rng(1);
  std::shuffle(shuffled.begin(), shuffled.end(), rng);
  std::reverse(shuffled.begin(), shuffled.end());
  const Metrics a = evaluate(*model, data.dev, {}), b = evaluate(*model, shuffled, {});
  EXPECT_DOUBLE_EQ(a.f1_s, b.f1_s);
  EXPECT_DOUBLE_EQ(a.f1_a, b.f1_a);
  EXPECT_DOUBLE_EQ(a.sentiment.weighted_f1, b.sentiment.weighted_f1);
  EXPECT_DOUBLE_EQ(a.act.accuracy, b.act.accuracy);
}

TEST(Evaluate, PerStepHasOneEntryPerStep) {
  auto data = fixtures::tiny_data(4, 3);
  auto model = fixtures::small_model(data, {"T=3"});
  const auto steps = evaluate_per_step(*model, data.dev, {});
  ASSERT_EQ(steps.size(), 4u);
  const Metrics final_step = evaluate(*model, data.dev, {});
  EXPECT_DOUBLE_EQ(steps.back().f1_s, final_step.f1_s);
}

class FirstStep : public ::testing::TestWithParam<std::uint64_t> {};

TEST_P(FirstStep, AdamStepDecreasesPredictionAndEstimateLoss) {
  auto data = prepare_data(generate_synthetic({}, {16, 1, 1}, 7));
  auto model = fixtures::small_model(data, {"d_hidden=16", "d_word=16", "seed=" + std::to_string(GetParam())});
  const ModelConfig& mc = model->config();
  auto batch_loss = [&](bool backward) {
    LossBreakdown b;
    for (const auto& d : data.train) {
      Tape tape;
      TapeScope scope(tape);
      LossResult r = total_loss(model->forward(d), d.sentiment, d.act, mc.gamma_s, mc.gamma_a);
      b += r.breakdown;
      if (backward) tape.backward(r.total);
    }
    return b;
  };
  std::vector<Tensor> params = model->parameters();
  zero_grads(params);
  const LossBreakdown before = batch_loss(true);
  AdamState s = AdamState::for_params(params);
  adam_update(params, s, {1e-3});
  const LossBreakdown after = batch_loss(false);
  EXPECT_GE(before.prediction_s, 0.0);
  EXPECT_GE(before.estimate_a, 0.0);
  EXPECT_LT(after.prediction_s + after.prediction_a, before.prediction_s + before.prediction_a);
  EXPECT_LT(after.estimate_s + after.estimate_a, before.estimate_s + before.estimate_a);
}

INSTANTIATE_TEST_SUITE_P(Seeds, FirstStep, ::testing::Range<std::uint64_t>(1, 6));
