#pragma once

#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "darer/data.hpp"
#include "darer/model.hpp"

namespace darer {

/// Attention weights of the dual-task layer at reasoning step `step`
/// (1..T), one 2N x 2N matrix per DRTG relation. Row i holds the weights
/// node i places on its in-neighbours; rows and columns follow `nodes`
/// (s_1..s_N, a_1..a_N). Also records the labels predicted at that step.
///
/// Throws ConfigError for models without a relational-transformer DTR layer
/// and std::out_of_range for a step outside 1..T.
nlohmann::json attention_dump(const DarerModel& model, const EncodedDialog& dialog, int step,
                              const std::vector<std::string>& sentiment_labels,
                              const std::vector<std::string>& act_labels);

}  // namespace darer
