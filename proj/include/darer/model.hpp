#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "darer/data.hpp"
#include "darer/graphs.hpp"
#include "darer/layers.hpp"
#include "darer/tensor.hpp"

namespace darer {

enum class Variant { rgcn, reteformer };
enum class DecoderWiring { crossed, straight };

std::string to_string(Variant v);
std::string to_string(DecoderWiring w);
Variant parse_variant(const std::string& s);
DecoderWiring parse_wiring(const std::string& s);

struct ModelConfig {
  Variant variant = Variant::reteformer;
  std::size_t d_hidden = 256;
  std::size_t d_label = 256;  // must equal d_hidden: label vectors are superimposed on node states
  std::size_t d_word = 300;
  int steps = 5;  // T
  int num_speakers = 2;
  std::size_t num_sentiments = 3;
  std::size_t num_acts = 15;
  std::size_t vocab_size = 2;
  double dropout = 0.4;
  double gamma_s = 10.0;
  double gamma_a = 1.0;
  std::size_t max_dialog_len = 128;
  DecoderWiring decoder_wiring = DecoderWiring::crossed;
  bool use_label_embeddings = true;
  bool use_sat_layer = true;
  bool use_dtr_layer = true;
  bool share_ts_lstm = false;
  std::size_t sat_layers = 1;
  std::size_t dtr_layers = 1;

  /// Mastodon presets for each variant.
  static ModelConfig darer_defaults();
  static ModelConfig darer2_defaults();
  static ModelConfig defaults_for(Variant v);

  /// Throws ConfigError naming the offending field.
  void validate() const;
  std::size_t satg_relations() const { return static_cast<std::size_t>(2 * num_speakers * num_speakers); }
};

/// Per-step label distributions, t = 0..T.
struct StepOutputs {
  std::vector<Tensor> sentiment;
  std::vector<Tensor> act;
  /// attention[t - 1][r] for reasoning step t (reteformer with DTR layer only).
  std::vector<std::vector<Tensor>> attention;

  std::size_t steps() const { return sentiment.size() - 1; }
};

struct ForwardOptions {
  /// Non-null enables dropout.
  std::mt19937_64* dropout_rng = nullptr;
  bool record_attention = false;
};

struct TaskStates {
  Tensor h_s, h_a;  // N x d
  Tensor p_s, p_a;  // N x |C|
};

using NamedTensor = std::pair<std::string, Tensor>;

class DarerModel {
 public:
  /// Random initialization. `word_init`, when given, holds vocab_size x
  /// d_word embedding values.
  DarerModel(ModelConfig config, std::uint64_t seed,
             const std::vector<double>* word_init = nullptr);

  const ModelConfig& config() const { return config_; }

  StepOutputs forward(const EncodedDialog& dialog, const ForwardOptions& opts = {}) const;

  Tensor dialog_understanding(const EncodedDialog& dialog, const DropoutContext& drop) const;
  TaskStates initial_estimation(const Tensor& utterances) const;
  TaskStates reasoning_step(const TaskStates& prev, const RelationalGraph& drtg,
                            const DropoutContext& drop, std::vector<Tensor>* attention = nullptr) const;

  /// Every learnable tensor with a stable name; handles alias model storage.
  std::vector<NamedTensor> named_parameters() const;
  std::vector<Tensor> parameters() const;
  std::size_t parameter_count() const;

  /// Deep copy of every parameter value, in named_parameters() order.
  std::vector<std::vector<double>> snapshot() const;
  void restore(const std::vector<std::vector<double>>& values);

  const RelationalGraph& satg(const std::vector<int>& speakers) const;
  const RelationalGraph& drtg(std::size_t n) const;

 private:
  Tensor sat_layer(const RelationalGraph& g, const Tensor& h, const DropoutContext& drop) const;
  Tensor dtr_layer(const RelationalGraph& g, const Tensor& h, const DropoutContext& drop,
                   std::vector<Tensor>* attention) const;

  ModelConfig config_;
  EncoderParams encoder_;
  std::vector<RgcnParams> sat_rgcn_, dtr_rgcn_;
  std::vector<ReTeFormerParams> sat_tf_, dtr_tf_;
  TsLstmParams init_s_, init_a_;
  TsLstmParams step_s_, step_a_;
  LabelEmbeddings labels_;
  DecoderParams dec_s_, dec_a_;

  // Graphs depend only on (N, speakers); memoized behind a mutex so frozen
  // models can serve concurrent inference.
  mutable std::mutex cache_mutex_;
  mutable std::map<std::vector<int>, std::unique_ptr<RelationalGraph>> satg_cache_;
  mutable std::map<std::size_t, std::unique_ptr<RelationalGraph>> drtg_cache_;
};

/// Everything needed to run a trained model on raw dialogs.
struct Checkpoint {
  ModelConfig config;
  std::vector<std::string> vocabulary;
  std::vector<std::string> sentiment_labels;
  std::vector<std::string> act_labels;
  std::vector<std::pair<std::string, std::vector<double>>> parameters;
  /// Extra key/value metadata (run settings, best epoch).
  std::map<std::string, std::string> meta;
};

/// Flat key -> value view of a model config (keys as in run config files).
std::map<std::string, std::string> model_config_kv(const ModelConfig& c);
/// Sets one field by key. Returns false for an unknown key; throws
/// ConfigError for an unparsable value.
bool set_model_key(ModelConfig& c, const std::string& key, const std::string& value);

Checkpoint make_checkpoint(const DarerModel& model, const Vocabulary& vocab,
                           const std::vector<std::string>& sentiment_labels,
                           const std::vector<std::string>& act_labels);
std::unique_ptr<DarerModel> model_from_checkpoint(const Checkpoint& ckpt);

/// Versioned container: a magic line, a JSON header (config, vocabulary,
/// labels, tensor table) and little-endian float64 payload.
void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace darer
