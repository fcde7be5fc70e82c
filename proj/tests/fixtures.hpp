#pragma once

// Small corpora and models shared by the model-level tests.

#include <memory>
#include <string>
#include <vector>

#include "darer/config.hpp"
#include "darer/data.hpp"
#include "darer/model.hpp"
#include "darer/run.hpp"

namespace darer::fixtures {

inline PreparedData tiny_data(std::size_t train = 12, std::size_t dev = 4, std::uint64_t seed = 3) {
  return prepare_data(generate_synthetic({}, {train, dev, dev}, seed));
}

/// Narrow run config; `extra` holds KEY=VALUE overrides applied last.
inline RunConfig small_run(std::vector<std::string> extra = {}) {
  std::vector<std::string> kv{"d_hidden=8", "d_word=8", "T=2", "dropout=0", "seed=1"};
  kv.insert(kv.end(), extra.begin(), extra.end());
  return load_run_config(std::nullopt, kv);
}

inline std::unique_ptr<DarerModel> small_model(const PreparedData& data,
                                               std::vector<std::string> extra = {}) {
  return build_model(small_run(std::move(extra)), data);
}

}  // namespace darer::fixtures
