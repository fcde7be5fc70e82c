#include "darer/report.hpp"

namespace darer {

using nlohmann::json;

json task_metrics_json(const TaskMetrics& m, const std::vector<std::string>& labels) {
  json per_class = json::object();
  for (std::size_t c = 0; c < m.per_class.size(); ++c) {
    const ClassScore& s = m.per_class[c];
    per_class[labels.at(c)] = {
        {"precision", s.precision}, {"recall", s.recall}, {"f1", s.f1}, {"support", s.support}};
  }
  return {{"accuracy", m.accuracy},
          {"macro", {{"precision", m.macro_precision}, {"recall", m.macro_recall}, {"f1", m.macro_f1}}},
          {"weighted",
           {{"precision", m.weighted_precision}, {"recall", m.weighted_recall}, {"f1", m.weighted_f1}}},
          {"per_class", std::move(per_class)}};
}

json metrics_json(const Metrics& m, const std::vector<std::string>& sentiment_labels,
                  const std::vector<std::string>& act_labels) {
  return {{"sentiment", task_metrics_json(m.sentiment, sentiment_labels)},
          {"act", task_metrics_json(m.act, act_labels)},
          {"f1_s", m.f1_s},
          {"f1_a", m.f1_a},
          {"selection", m.selection()}};
}

json loss_json(const LossBreakdown& b) {
  return {{"prediction_s", b.prediction_s}, {"prediction_a", b.prediction_a},
          {"estimate_s", b.estimate_s},     {"estimate_a", b.estimate_a},
          {"margin_s", b.margin_s},         {"margin_a", b.margin_a},
          {"total", b.total}};
}

std::vector<json> epoch_records(const EpochRecord& rec, const std::vector<std::string>& sentiment_labels,
                                const std::vector<std::string>& act_labels) {
  return {{{"type", "epoch"}, {"epoch", rec.epoch}, {"split", "train"}, {"loss", loss_json(rec.train_loss)}},
          {{"type", "epoch"},
           {"epoch", rec.epoch},
           {"split", "dev"},
           {"metrics", metrics_json(rec.dev, sentiment_labels, act_labels)},
           {"best", rec.best}}};
}

}  // namespace darer
