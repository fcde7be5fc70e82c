#include "darer/inspect.hpp"

#include <stdexcept>

namespace darer {

namespace {

std::vector<std::string> argmax_labels(const Tensor& p, const std::vector<std::string>& names) {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < p.rows(); ++i) {
    std::size_t best = 0;
    for (std::size_t k = 1; k < p.cols(); ++k)
      if (p.at(i, k) > p.at(i, best)) best = k;
    out.push_back(names.at(best));
  }
  return out;
}

}  // namespace

nlohmann::json attention_dump(const DarerModel& model, const EncodedDialog& dialog, int step,
                              const std::vector<std::string>& sentiment_labels,
                              const std::vector<std::string>& act_labels) {
  const ModelConfig& c = model.config();
  if (c.variant != Variant::reteformer)
    throw ConfigError("unsupported variant '" + to_string(c.variant) +
                      "': attention maps need the reteformer variant");
  if (!c.use_dtr_layer) throw ConfigError("unsupported model: the dual-task layer is disabled");
  if (step < 1 || step > c.steps)
    throw std::out_of_range("step " + std::to_string(step) + " outside 1.." + std::to_string(c.steps));

  ForwardOptions opts;
  opts.record_attention = true;
  StepOutputs out = model.forward(dialog, opts);
  const auto& maps = out.attention.at(static_cast<std::size_t>(step - 1));
  const RelationalGraph& g = model.drtg(dialog.size());

  nlohmann::json nodes = nlohmann::json::array();
  for (std::size_t i = 0; i < dialog.size(); ++i) nodes.push_back("s_" + std::to_string(i + 1));
  for (std::size_t i = 0; i < dialog.size(); ++i) nodes.push_back("a_" + std::to_string(i + 1));

  nlohmann::json relations = nlohmann::json::array();
  for (std::size_t r = 0; r < maps.size(); ++r) {
    const int id = static_cast<int>(r + 1);
    const Tensor& m = maps[r];
    nlohmann::json rows = nlohmann::json::array();
    for (std::size_t i = 0; i < g.num_nodes; ++i) {
      nlohmann::json row = nlohmann::json::array();
      for (std::size_t j = 0; j < g.num_nodes; ++j) row.push_back(m.at(i, j));
      rows.push_back(std::move(row));
    }
    relations.push_back({{"id", id}, {"name", drtg_relation_name(id)}, {"weights", std::move(rows)}});
  }

  const auto t = static_cast<std::size_t>(step);
  return {{"dialog_id", dialog.id},
          {"step", step},
          {"nodes", std::move(nodes)},
          {"relations", std::move(relations)},
          {"predicted",
           {{"sentiment", argmax_labels(out.sentiment[t], sentiment_labels)},
            {"act", argmax_labels(out.act[t], act_labels)}}}};
}

}  // namespace darer
