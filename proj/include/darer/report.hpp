#pragma once

#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "darer/training.hpp"

namespace darer {

nlohmann::json task_metrics_json(const TaskMetrics& m, const std::vector<std::string>& labels);
nlohmann::json metrics_json(const Metrics& m, const std::vector<std::string>& sentiment_labels,
                            const std::vector<std::string>& act_labels);
nlohmann::json loss_json(const LossBreakdown& b);

/// One history record per (epoch, split): the train record carries every
/// loss term, the dev record every metric.
std::vector<nlohmann::json> epoch_records(const EpochRecord& rec,
                                          const std::vector<std::string>& sentiment_labels,
                                          const std::vector<std::string>& act_labels);

}  // namespace darer
