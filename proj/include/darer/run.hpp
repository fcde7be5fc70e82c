#pragma once

#include <memory>
#include <vector>

#include "darer/config.hpp"
#include "darer/data.hpp"
#include "darer/model.hpp"

namespace darer {

/// A corpus with its train-split vocabulary and encoded splits.
struct PreparedData {
  Corpus corpus;
  Vocabulary vocab;
  std::vector<EncodedDialog> train, dev, test;
};

PreparedData prepare_data(Corpus corpus);

/// Run model settings completed with the corpus-derived sizes.
ModelConfig resolve_model_config(const RunConfig& run, const PreparedData& data);

/// Fresh model; word embeddings come from `run.word_vectors` when set and
/// from seeded fallback vectors otherwise.
std::unique_ptr<DarerModel> build_model(const RunConfig& run, const PreparedData& data);

}  // namespace darer
