#include "darer/training.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <stdexcept>

namespace darer {

Tensor nll_loss(const Tensor& probs, std::span<const std::size_t> gold) {
  return scale(sum(log_clamped(pick(probs, gold), kLogClamp)), -1.0);
}

Tensor estimate_loss(std::span<const Tensor> steps, std::span<const std::size_t> gold) {
  if (steps.empty()) return Tensor::scalar(0.0);
  Tensor total = nll_loss(steps[0], gold);
  for (std::size_t t = 1; t < steps.size(); ++t) total = add(total, nll_loss(steps[t], gold));
  return total;
}

Tensor margin_loss(std::span<const Tensor> steps, std::span<const std::size_t> gold) {
  if (steps.size() < 2) return Tensor::scalar(0.0);
  Tensor total;
  for (std::size_t t = 1; t < steps.size(); ++t) {
    Tensor drop = sum(relu(sub(pick(steps[t - 1], gold), pick(steps[t], gold))));
    total = t == 1 ? drop : add(total, drop);
  }
  return total;
}

LossBreakdown& LossBreakdown::operator+=(const LossBreakdown& o) {
  prediction_s += o.prediction_s;
  prediction_a += o.prediction_a;
  estimate_s += o.estimate_s;
  estimate_a += o.estimate_a;
  margin_s += o.margin_s;
  margin_a += o.margin_a;
  total += o.total;
  return *this;
}

LossResult total_loss(const StepOutputs& out, std::span<const std::size_t> gold_s,
                      std::span<const std::size_t> gold_a, double gamma_s, double gamma_a) {
  const std::size_t T = out.steps();
  std::span<const Tensor> ps(out.sentiment);
  std::span<const Tensor> pa(out.act);

  Tensor pred_s = nll_loss(ps[T], gold_s);
  Tensor pred_a = nll_loss(pa[T], gold_a);
  Tensor est_s = estimate_loss(ps.first(T), gold_s);
  Tensor est_a = estimate_loss(pa.first(T), gold_a);
  Tensor mar_s = margin_loss(ps, gold_s);
  Tensor mar_a = margin_loss(pa, gold_a);

  Tensor total = add(pred_s, pred_a);
  if (T > 0) {
    total = add(add(total, est_s), est_a);
    if (gamma_s != 0.0) total = add(total, scale(mar_s, gamma_s));
    if (gamma_a != 0.0) total = add(total, scale(mar_a, gamma_a));
  }

  LossResult r;
  r.total = total;
  r.breakdown.prediction_s = pred_s.item();
  r.breakdown.prediction_a = pred_a.item();
  r.breakdown.estimate_s = est_s.item();
  r.breakdown.estimate_a = est_a.item();
  r.breakdown.margin_s = mar_s.item();
  r.breakdown.margin_a = mar_a.item();
  r.breakdown.total = total.item();
  return r;
}

// ---------------------------------------------------------------------------

TaskMetrics compute_metrics(std::span<const std::size_t> gold, std::span<const std::size_t> pred,
                            std::size_t num_classes, std::optional<std::size_t> ignore) {
  if (gold.size() != pred.size())
    throw std::invalid_argument("compute_metrics: gold and prediction lengths differ");
  std::vector<std::size_t> tp(num_classes, 0), fp(num_classes, 0), fn(num_classes, 0);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < gold.size(); ++i) {
    if (gold[i] >= num_classes || pred[i] >= num_classes)
      throw std::out_of_range("compute_metrics: class id out of range");
    if (gold[i] == pred[i]) {
      ++tp[gold[i]];
      ++correct;
    } else {
      ++fp[pred[i]];
      ++fn[gold[i]];
    }
  }
  TaskMetrics m;
  m.accuracy = gold.empty() ? 0.0 : static_cast<double>(correct) / static_cast<double>(gold.size());
  std::size_t counted = 0, support_total = 0;
  for (std::size_t c = 0; c < num_classes; ++c) {
    ClassScore s;
    s.support = tp[c] + fn[c];
    const double p_den = static_cast<double>(tp[c] + fp[c]);
    const double r_den = static_cast<double>(tp[c] + fn[c]);
    s.precision = p_den > 0 ? static_cast<double>(tp[c]) / p_den : 0.0;
    s.recall = r_den > 0 ? static_cast<double>(tp[c]) / r_den : 0.0;
    s.f1 = s.precision + s.recall > 0 ? 2 * s.precision * s.recall / (s.precision + s.recall) : 0.0;
    m.per_class.push_back(s);
    if (ignore && *ignore == c) continue;
    ++counted;
    support_total += s.support;
    m.macro_precision += s.precision;
    m.macro_recall += s.recall;
    m.macro_f1 += s.f1;
  }
  if (counted > 0) {
    m.macro_precision /= static_cast<double>(counted);
    m.macro_recall /= static_cast<double>(counted);
    m.macro_f1 /= static_cast<double>(counted);
  }
  if (support_total > 0) {
    for (std::size_t c = 0; c < num_classes; ++c) {
      if (ignore && *ignore == c) continue;
      const double w = static_cast<double>(m.per_class[c].support) / static_cast<double>(support_total);
      m.weighted_precision += w * m.per_class[c].precision;
      m.weighted_recall += w * m.per_class[c].recall;
      m.weighted_f1 += w * m.per_class[c].f1;
    }
  }
  return m;
}

double task_f1(const TaskMetrics& m, F1Kind kind) {
  return kind == F1Kind::macro ? m.macro_f1 : m.weighted_f1;
}

namespace {

std::size_t argmax_row(const Tensor& p, std::size_t i) {
  std::size_t best = 0;
  for (std::size_t k = 1; k < p.cols(); ++k)
    if (p.at(i, k) > p.at(i, best)) best = k;
  return best;
}

}  // namespace

Predictions predict(const DarerModel& model, std::span<const EncodedDialog> dialogs) {
  Predictions p;
  const std::size_t steps = static_cast<std::size_t>(model.config().steps) + 1;
  p.sentiment.resize(steps);
  p.act.resize(steps);
  for (const auto& d : dialogs) {
    StepOutputs out = model.forward(d);
    for (std::size_t t = 0; t < steps; ++t)
      for (std::size_t i = 0; i < d.size(); ++i) {
        p.sentiment[t].push_back(argmax_row(out.sentiment[t], i));
        p.act[t].push_back(argmax_row(out.act[t], i));
      }
    p.gold_s.insert(p.gold_s.end(), d.sentiment.begin(), d.sentiment.end());
    p.gold_a.insert(p.gold_a.end(), d.act.begin(), d.act.end());
  }
  return p;
}

Metrics score(const Predictions& p, std::size_t step, std::size_t num_sentiments,
              std::size_t num_acts, const MetricConfig& mc) {
  Metrics m;
  m.sentiment = compute_metrics(p.gold_s, p.sentiment.at(step), num_sentiments, mc.ignore_sentiment);
  m.act = compute_metrics(p.gold_a, p.act.at(step), num_acts);
  m.f1_s = task_f1(m.sentiment, mc.sentiment_f1);
  m.f1_a = task_f1(m.act, mc.act_f1);
  return m;
}

Metrics evaluate(const DarerModel& model, std::span<const EncodedDialog> dialogs, const MetricConfig& mc) {
  const auto& c = model.config();
  return score(predict(model, dialogs), static_cast<std::size_t>(c.steps), c.num_sentiments,
               c.num_acts, mc);
}

std::vector<Metrics> evaluate_per_step(const DarerModel& model, std::span<const EncodedDialog> dialogs,
                                       const MetricConfig& mc) {
  const auto& c = model.config();
  Predictions p = predict(model, dialogs);
  std::vector<Metrics> out;
  for (std::size_t t = 0; t <= static_cast<std::size_t>(c.steps); ++t)
    out.push_back(score(p, t, c.num_sentiments, c.num_acts, mc));
  return out;
}

// ---------------------------------------------------------------------------

TrainResult train(DarerModel& model, std::span<const EncodedDialog> train_set,
                  std::span<const EncodedDialog> dev_set, const TrainConfig& cfg,
                  const EpochCallback& on_epoch) {
  if (train_set.empty()) throw std::invalid_argument("train: empty training split");
  if (dev_set.empty()) throw std::invalid_argument("train: empty dev split");
  if (cfg.lr < 0.0) throw ConfigError("lr must be >= 0");
  if (cfg.batch == 0) throw ConfigError("batch must be positive");

  const ModelConfig& mc = model.config();
  std::vector<Tensor> params = model.parameters();
  AdamState adam = AdamState::for_params(params);
  const AdamConfig adam_cfg{cfg.lr, cfg.beta1, cfg.beta2, cfg.adam_eps};
  const bool update = cfg.lr > 0.0;

  std::mt19937_64 shuffle_rng(cfg.seed);
  std::mt19937_64 dropout_rng(cfg.seed ^ 0x9E3779B97F4A7C15ULL);
  std::vector<std::size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), std::size_t{0});

  TrainResult result;
  double best_score = -1.0;
  std::vector<std::vector<double>> best_params = model.snapshot();
  zero_grads(params);

  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    EpochRecord rec;
    rec.epoch = epoch;
    std::size_t in_batch = 0;
    for (std::size_t k = 0; k < order.size(); ++k) {
      const EncodedDialog& d = train_set[order[k]];
      Tape tape;
      TapeScope scope(tape);
      ForwardOptions opts;
      opts.dropout_rng = mc.dropout > 0.0 ? &dropout_rng : nullptr;
      StepOutputs out = model.forward(d, opts);
      LossResult loss = total_loss(out, d.sentiment, d.act, mc.gamma_s, mc.gamma_a);
      if (!std::isfinite(loss.breakdown.total))
        throw std::runtime_error("non-finite loss in epoch " + std::to_string(epoch) + " on dialog '" +
                                 d.id + "' (prediction_s=" + std::to_string(loss.breakdown.prediction_s) +
                                 ", prediction_a=" + std::to_string(loss.breakdown.prediction_a) + ")");
      rec.train_loss += loss.breakdown;
      tape.backward(loss.total);
      if (++in_batch == cfg.batch || k + 1 == order.size()) {
        if (update) adam_update(params, adam, adam_cfg);
        zero_grads(params);
        in_batch = 0;
      }
    }
    rec.dev = evaluate(model, dev_set, cfg.metrics);
    if (rec.dev.selection() > best_score) {
      best_score = rec.dev.selection();
      best_params = model.snapshot();
      result.best_epoch = epoch;
      result.best_dev = rec.dev;
      rec.best = true;
    }
    result.history.push_back(rec);
    if (on_epoch) on_epoch(rec);
    if (cfg.stop_at && best_score >= *cfg.stop_at) break;
  }
  model.restore(best_params);
  return result;
}

}  // namespace darer
