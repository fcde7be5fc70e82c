#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "darer/data.hpp"
#include "darer/model.hpp"
#include "darer/optim.hpp"
#include "darer/tensor.hpp"

namespace darer {

inline constexpr double kLogClamp = 1e-12;

/// Negative log-likelihood of the gold classes summed over utterances.
Tensor nll_loss(const Tensor& probs, std::span<const std::size_t> gold);

/// Sum of NLL over the given steps (callers pass t = 0..T-1). Zero when empty.
Tensor estimate_loss(std::span<const Tensor> steps, std::span<const std::size_t> gold);

/// sum_{t>=1} sum_i max(0, p^{t-1}_i[gold] - p^t_i[gold]) over consecutive steps.
Tensor margin_loss(std::span<const Tensor> steps, std::span<const std::size_t> gold);

struct LossBreakdown {
  double prediction_s = 0, prediction_a = 0;
  double estimate_s = 0, estimate_a = 0;
  double margin_s = 0, margin_a = 0;
  double total = 0;

  LossBreakdown& operator+=(const LossBreakdown& o);
};

struct LossResult {
  Tensor total;  // differentiable
  LossBreakdown breakdown;
};

LossResult total_loss(const StepOutputs& out, std::span<const std::size_t> gold_s,
                      std::span<const std::size_t> gold_a, double gamma_s, double gamma_a);

// ---------------------------------------------------------------------------
// Metrics

struct ClassScore {
  double precision = 0, recall = 0, f1 = 0;
  std::size_t support = 0;
};

struct TaskMetrics {
  double macro_precision = 0, macro_recall = 0, macro_f1 = 0;
  double weighted_precision = 0, weighted_recall = 0, weighted_f1 = 0;
  double accuracy = 0;
  std::vector<ClassScore> per_class;
};

/// Macro averages weight each class equally; weighted averages weight by
/// gold support. `ignore` is dropped from both averages but still counts as
/// a prediction (and in accuracy). A class with no gold and no predictions
/// contributes F1 = 0 to the macro average.
TaskMetrics compute_metrics(std::span<const std::size_t> gold, std::span<const std::size_t> pred,
                            std::size_t num_classes, std::optional<std::size_t> ignore = std::nullopt);

enum class F1Kind { macro, weighted };
double task_f1(const TaskMetrics& m, F1Kind kind);

struct MetricConfig {
  std::optional<std::size_t> ignore_sentiment;
  F1Kind sentiment_f1 = F1Kind::macro;
  F1Kind act_f1 = F1Kind::macro;
};

struct Metrics {
  TaskMetrics sentiment;
  TaskMetrics act;
  double f1_s = 0, f1_a = 0;  // per MetricConfig
  double selection() const { return 0.5 * (f1_s + f1_a); }
};

/// Argmax predictions for every step t = 0..T of every dialog.
struct Predictions {
  std::vector<std::vector<std::size_t>> sentiment;  // [t][utterance], dialogs concatenated
  std::vector<std::vector<std::size_t>> act;
  std::vector<std::size_t> gold_s, gold_a;
};

Predictions predict(const DarerModel& model, std::span<const EncodedDialog> dialogs);
Metrics score(const Predictions& p, std::size_t step, std::size_t num_sentiments,
              std::size_t num_acts, const MetricConfig& mc);
/// Metrics at the final step.
Metrics evaluate(const DarerModel& model, std::span<const EncodedDialog> dialogs,
                 const MetricConfig& mc);
/// Metrics for each step t = 0..T.
std::vector<Metrics> evaluate_per_step(const DarerModel& model, std::span<const EncodedDialog> dialogs,
                                       const MetricConfig& mc);

// ---------------------------------------------------------------------------
// Training loop

struct TrainConfig {
  double lr = 1e-3;
  double beta1 = 0.9, beta2 = 0.999, adam_eps = 1e-8;
  std::size_t batch = 16;
  std::size_t epochs = 50;
  std::uint64_t seed = 1;
  MetricConfig metrics;
  /// Stop once dev selection score reaches this value (disabled when unset).
  std::optional<double> stop_at;
};

struct EpochRecord {
  std::size_t epoch = 0;  // 1-based
  LossBreakdown train_loss;
  Metrics dev;
  bool best = false;
};

struct TrainResult {
  std::vector<EpochRecord> history;
  std::size_t best_epoch = 0;
  Metrics best_dev;
};

using EpochCallback = std::function<void(const EpochRecord&)>;

/// Shuffled epochs with Adam updates every `batch` dialogs; the model is
/// left holding the parameters of the best dev epoch (mean of the two task
/// F1 scores, ties keep the earlier epoch). lr == 0 runs the loop without
/// parameter updates.
TrainResult train(DarerModel& model, std::span<const EncodedDialog> train_set,
                  std::span<const EncodedDialog> dev_set, const TrainConfig& cfg,
                  const EpochCallback& on_epoch = {});

}  // namespace darer
