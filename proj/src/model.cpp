#include "darer/model.hpp"

#include <bit>
#include <charconv>
#include <cstring>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

namespace darer {

std::string to_string(Variant v) { return v == Variant::rgcn ? "rgcn" : "reteformer"; }
std::string to_string(DecoderWiring w) { return w == DecoderWiring::crossed ? "crossed" : "straight"; }

Variant parse_variant(const std::string& s) {
  if (s == "rgcn" || s == "darer") return Variant::rgcn;
  if (s == "reteformer" || s == "darer2") return Variant::reteformer;
  throw ConfigError("variant must be rgcn or reteformer, got '" + s + "'");
}

DecoderWiring parse_wiring(const std::string& s) {
  if (s == "crossed") return DecoderWiring::crossed;
  if (s == "straight") return DecoderWiring::straight;
  throw ConfigError("decoder_wiring must be crossed or straight, got '" + s + "'");
}

ModelConfig ModelConfig::darer_defaults() {
  ModelConfig c;
  c.variant = Variant::rgcn;
  c.d_hidden = c.d_label = 128;
  c.steps = 3;
  c.gamma_s = c.gamma_a = 3.0;
  c.dropout = 0.2;
  return c;
}

ModelConfig ModelConfig::darer2_defaults() {
  ModelConfig c;
  c.variant = Variant::reteformer;
  c.d_hidden = c.d_label = 256;
  c.steps = 5;
  c.gamma_s = 10.0;
  c.gamma_a = 1.0;
  c.dropout = 0.4;
  return c;
}

ModelConfig ModelConfig::defaults_for(Variant v) {
  return v == Variant::rgcn ? darer_defaults() : darer2_defaults();
}

void ModelConfig::validate() const {
  auto fail = [](const std::string& m) { throw ConfigError(m); };
  if (d_hidden == 0 || d_hidden % 2 != 0) fail("d_hidden must be a positive even number");
  if (d_label != d_hidden) fail("d_label must equal d_hidden (label vectors are added to node states)");
  if (d_word == 0) fail("d_word must be positive");
  if (steps < 0) fail("T must be >= 0");
  if (num_speakers < 1) fail("num_speakers must be >= 1");
  if (num_sentiments == 0 || num_acts == 0) fail("label sets must be non-empty");
  if (vocab_size < 2) fail("vocab_size must cover the reserved tokens");
  if (!(dropout >= 0.0 && dropout < 1.0)) fail("dropout must lie in [0, 1)");
  if (gamma_s < 0.0 || gamma_a < 0.0) fail("gamma_s and gamma_a must be >= 0");
  if (max_dialog_len == 0) fail("max_dialog_len must be positive");
  if (sat_layers == 0 || dtr_layers == 0) fail("layer counts must be positive");
}

// ---------------------------------------------------------------------------

DarerModel::DarerModel(ModelConfig config, std::uint64_t seed, const std::vector<double>* word_init)
    : config_(std::move(config)) {
  config_.validate();
  const auto d = config_.d_hidden;
  std::mt19937_64 rng(seed);
  encoder_ = make_encoder_params(config_.vocab_size, config_.d_word, d, rng);
  if (word_init) {
    if (word_init->size() != config_.vocab_size * config_.d_word)
      throw DimensionError("word embedding init has " + std::to_string(word_init->size()) +
                           " values, expected vocab_size x d_word");
    std::copy(word_init->begin(), word_init->end(), encoder_.word_embeddings.data().begin());
  }
  for (std::size_t l = 0; l < config_.sat_layers; ++l) {
    if (config_.variant == Variant::rgcn)
      sat_rgcn_.push_back(make_rgcn_params(d, config_.satg_relations(), rng));
    else
      sat_tf_.push_back(make_reteformer_params(d, config_.satg_relations(), config_.max_dialog_len, rng));
  }
  init_s_ = make_ts_lstm_params(d, rng);
  init_a_ = make_ts_lstm_params(d, rng);
  if (!config_.share_ts_lstm) {
    step_s_ = make_ts_lstm_params(d, rng);
    step_a_ = make_ts_lstm_params(d, rng);
  } else {
    step_s_ = init_s_;
    step_a_ = init_a_;
  }
  labels_ = make_label_embeddings(config_.num_sentiments, config_.num_acts, d, rng);
  dec_s_ = make_decoder_params(d, config_.num_sentiments, rng);
  dec_a_ = make_decoder_params(d, config_.num_acts, rng);
  for (std::size_t l = 0; l < config_.dtr_layers; ++l) {
    if (config_.variant == Variant::rgcn)
      dtr_rgcn_.push_back(make_rgcn_params(d, kDrtgRelations, rng));
    else
      dtr_tf_.push_back(make_reteformer_params(d, kDrtgRelations, config_.max_dialog_len, rng));
  }
}

const RelationalGraph& DarerModel::satg(const std::vector<int>& speakers) const {
  std::lock_guard lock(cache_mutex_);
  auto& slot = satg_cache_[speakers];
  if (!slot) slot = std::make_unique<RelationalGraph>(build_satg(speakers, config_.num_speakers));
  return *slot;
}

const RelationalGraph& DarerModel::drtg(std::size_t n) const {
  std::lock_guard lock(cache_mutex_);
  auto& slot = drtg_cache_[n];
  if (!slot) slot = std::make_unique<RelationalGraph>(build_drtg(n));
  return *slot;
}

Tensor DarerModel::sat_layer(const RelationalGraph& g, const Tensor& h, const DropoutContext& drop) const {
  Tensor x = h;
  if (config_.variant == Variant::rgcn)
    for (const auto& p : sat_rgcn_) x = rgcn_forward(g, x, p);
  else
    for (const auto& p : sat_tf_) x = reteformer_forward(g, x, p, drop);
  return x;
}

Tensor DarerModel::dtr_layer(const RelationalGraph& g, const Tensor& h, const DropoutContext& drop,
                             std::vector<Tensor>* attention) const {
  Tensor x = h;
  if (config_.variant == Variant::rgcn) {
    for (const auto& p : dtr_rgcn_) x = rgcn_forward(g, x, p);
  } else {
    // Attention maps are reported for the last layer of the stack.
    for (std::size_t l = 0; l < dtr_tf_.size(); ++l)
      x = reteformer_forward(g, x, dtr_tf_[l], drop, l + 1 == dtr_tf_.size() ? attention : nullptr);
  }
  return x;
}

Tensor DarerModel::dialog_understanding(const EncodedDialog& dialog, const DropoutContext& drop) const {
  if (dialog.size() == 0) throw DimensionError("dialog has no utterances");
  if (dialog.size() > config_.max_dialog_len)
    throw ConfigError("dialog '" + dialog.id + "' has " + std::to_string(dialog.size()) +
                      " utterances, above max_dialog_len " + std::to_string(config_.max_dialog_len));
  Tensor h = drop.apply(encode_utterances(dialog.tokens, encoder_));
  if (!config_.use_sat_layer) return h;
  return sat_layer(satg(dialog.speakers), h, drop);
}

TaskStates DarerModel::initial_estimation(const Tensor& utterances) const {
  TaskStates s;
  s.h_s = ts_lstm(utterances, init_s_);
  s.h_a = ts_lstm(utterances, init_a_);
  const bool crossed = config_.decoder_wiring == DecoderWiring::crossed;
  s.p_s = decode(crossed ? s.h_a : s.h_s, dec_s_);
  s.p_a = decode(crossed ? s.h_s : s.h_a, dec_a_);
  return s;
}

TaskStates DarerModel::reasoning_step(const TaskStates& prev, const RelationalGraph& drtg,
                                      const DropoutContext& drop, std::vector<Tensor>* attention) const {
  const std::size_t n = prev.h_s.rows();
  Tensor hs = prev.h_s;
  Tensor ha = prev.h_a;
  if (config_.use_label_embeddings) {
    Tensor e_s = project_labels(prev.p_s, labels_.sentiment);
    Tensor e_a = project_labels(prev.p_a, labels_.act);
    hs = superimpose(hs, e_s, e_a);
    ha = superimpose(ha, e_s, e_a);
  }
  if (config_.use_dtr_layer) {
    Tensor nodes = dtr_layer(drtg, concat_rows({hs, ha}), drop, attention);
    hs = slice_rows(nodes, 0, n);
    ha = slice_rows(nodes, n, 2 * n);
  }
  TaskStates next;
  next.h_s = ts_lstm(hs, step_s_);
  next.h_a = ts_lstm(ha, step_a_);
  next.p_s = decode(next.h_s, dec_s_);
  next.p_a = decode(next.h_a, dec_a_);
  return next;
}

StepOutputs DarerModel::forward(const EncodedDialog& dialog, const ForwardOptions& opts) const {
  DropoutContext drop{config_.dropout, opts.dropout_rng};
  Tensor h = dialog_understanding(dialog, drop);
  TaskStates state = initial_estimation(h);
  StepOutputs out;
  out.sentiment.push_back(state.p_s);
  out.act.push_back(state.p_a);
  const bool want_attention =
      opts.record_attention && config_.variant == Variant::reteformer && config_.use_dtr_layer;
  for (int t = 1; t <= config_.steps; ++t) {
    std::vector<Tensor> maps;
    state = reasoning_step(state, drtg(dialog.size()), drop, want_attention ? &maps : nullptr);
    out.sentiment.push_back(state.p_s);
    out.act.push_back(state.p_a);
    if (want_attention) out.attention.push_back(std::move(maps));
  }
  return out;
}

namespace {

void push_lstm(std::vector<NamedTensor>& out, const std::string& prefix, const LstmParams& p) {
  out.emplace_back(prefix + ".w_x", p.w_x);
  out.emplace_back(prefix + ".w_h", p.w_h);
  out.emplace_back(prefix + ".bias", p.bias);
}

void push_bilstm(std::vector<NamedTensor>& out, const std::string& prefix, const BiLstmParams& p) {
  push_lstm(out, prefix + ".fwd", p.forward);
  push_lstm(out, prefix + ".bwd", p.backward);
}

void push_ts(std::vector<NamedTensor>& out, const std::string& prefix, const TsLstmParams& p) {
  push_bilstm(out, prefix + ".lstm", p.lstm);
  out.emplace_back(prefix + ".proj_w", p.proj_w);
  out.emplace_back(prefix + ".proj_b", p.proj_b);
}

void push_rgcn(std::vector<NamedTensor>& out, const std::string& prefix, const RgcnParams& p) {
  out.emplace_back(prefix + ".w_self", p.w_self);
  for (std::size_t r = 0; r < p.w_rel.size(); ++r)
    out.emplace_back(prefix + ".w_rel." + std::to_string(r + 1), p.w_rel[r]);
}

void push_tf(std::vector<NamedTensor>& out, const std::string& prefix, const ReTeFormerParams& p) {
  for (std::size_t r = 0; r < p.num_relations(); ++r) {
    const std::string rel = "." + std::to_string(r + 1);
    out.emplace_back(prefix + ".w_q" + rel, p.w_q[r]);
    out.emplace_back(prefix + ".w_k" + rel, p.w_k[r]);
    out.emplace_back(prefix + ".w_v" + rel, p.w_v[r]);
    out.emplace_back(prefix + ".u_q" + rel, p.u_q[r]);
    out.emplace_back(prefix + ".u_k" + rel, p.u_k[r]);
  }
  out.emplace_back(prefix + ".position_table", p.position_table);
  out.emplace_back(prefix + ".ln1_gain", p.ln1_gain);
  out.emplace_back(prefix + ".ln1_bias", p.ln1_bias);
  out.emplace_back(prefix + ".ff_w1", p.ff_w1);
  out.emplace_back(prefix + ".ff_b1", p.ff_b1);
  out.emplace_back(prefix + ".ff_w2", p.ff_w2);
  out.emplace_back(prefix + ".ff_b2", p.ff_b2);
  out.emplace_back(prefix + ".ln2_gain", p.ln2_gain);
  out.emplace_back(prefix + ".ln2_bias", p.ln2_bias);
}

}  // namespace

std::vector<NamedTensor> DarerModel::named_parameters() const {
  std::vector<NamedTensor> out;
  out.emplace_back("encoder.word_embeddings", encoder_.word_embeddings);
  push_bilstm(out, "encoder.lstm", encoder_.lstm);
  for (std::size_t l = 0; l < sat_rgcn_.size(); ++l) push_rgcn(out, "sat." + std::to_string(l), sat_rgcn_[l]);
  for (std::size_t l = 0; l < sat_tf_.size(); ++l) push_tf(out, "sat." + std::to_string(l), sat_tf_[l]);
  push_ts(out, "init_s", init_s_);
  push_ts(out, "init_a", init_a_);
  if (!config_.share_ts_lstm) {
    push_ts(out, "step_s", step_s_);
    push_ts(out, "step_a", step_a_);
  }
  out.emplace_back("label.sentiment", labels_.sentiment);
  out.emplace_back("label.act", labels_.act);
  out.emplace_back("dec_s.weight", dec_s_.weight);
  out.emplace_back("dec_s.bias", dec_s_.bias);
  out.emplace_back("dec_a.weight", dec_a_.weight);
  out.emplace_back("dec_a.bias", dec_a_.bias);
  for (std::size_t l = 0; l < dtr_rgcn_.size(); ++l) push_rgcn(out, "dtr." + std::to_string(l), dtr_rgcn_[l]);
  for (std::size_t l = 0; l < dtr_tf_.size(); ++l) push_tf(out, "dtr." + std::to_string(l), dtr_tf_[l]);
  return out;
}

std::vector<Tensor> DarerModel::parameters() const {
  std::vector<Tensor> out;
  for (auto& [name, t] : named_parameters()) out.push_back(t);
  return out;
}

std::size_t DarerModel::parameter_count() const {
  std::size_t n = 0;
  for (const auto& t : parameters()) n += t.numel();
  return n;
}

std::vector<std::vector<double>> DarerModel::snapshot() const {
  std::vector<std::vector<double>> out;
  for (const auto& t : parameters()) out.push_back(t.values());
  return out;
}

void DarerModel::restore(const std::vector<std::vector<double>>& values) {
  auto params = parameters();
  if (values.size() != params.size())
    throw DimensionError("restore: " + std::to_string(values.size()) + " tensors for " +
                         std::to_string(params.size()) + " parameters");
  for (std::size_t k = 0; k < params.size(); ++k) {
    if (values[k].size() != params[k].numel())
      throw DimensionError("restore: size mismatch at parameter " + std::to_string(k));
    std::copy(values[k].begin(), values[k].end(), params[k].data().begin());
  }
}

// ---------------------------------------------------------------------------
// Config key/value mapping

namespace {

std::string fmt_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

std::string fmt_bool(bool b) { return b ? "true" : "false"; }

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ConfigError(key + ": expected true/false, got '" + v + "'");
}

double parse_double(const std::string& key, const std::string& v) {
  double out = 0.0;
  auto res = std::from_chars(v.data(), v.data() + v.size(), out);
  if (res.ec != std::errc() || res.ptr != v.data() + v.size())
    throw ConfigError(key + ": expected a number, got '" + v + "'");
  return out;
}

long long parse_int(const std::string& key, const std::string& v) {
  long long out = 0;
  auto res = std::from_chars(v.data(), v.data() + v.size(), out);
  if (res.ec != std::errc() || res.ptr != v.data() + v.size())
    throw ConfigError(key + ": expected an integer, got '" + v + "'");
  return out;
}

std::size_t parse_size(const std::string& key, const std::string& v) {
  const long long x = parse_int(key, v);
  if (x < 0) throw ConfigError(key + ": must be non-negative, got '" + v + "'");
  return static_cast<std::size_t>(x);
}

}  // namespace

std::map<std::string, std::string> model_config_kv(const ModelConfig& c) {
  return {
      {"variant", to_string(c.variant)},
      {"d_hidden", std::to_string(c.d_hidden)},
      {"d_label", std::to_string(c.d_label)},
      {"d_word", std::to_string(c.d_word)},
      {"T", std::to_string(c.steps)},
      {"num_speakers", std::to_string(c.num_speakers)},
      {"num_sentiments", std::to_string(c.num_sentiments)},
      {"num_acts", std::to_string(c.num_acts)},
      {"vocab_size", std::to_string(c.vocab_size)},
      {"dropout", fmt_double(c.dropout)},
      {"gamma_s", fmt_double(c.gamma_s)},
      {"gamma_a", fmt_double(c.gamma_a)},
      {"max_dialog_len", std::to_string(c.max_dialog_len)},
      {"decoder_wiring", to_string(c.decoder_wiring)},
      {"use_label_embeddings", fmt_bool(c.use_label_embeddings)},
      {"use_sat_layer", fmt_bool(c.use_sat_layer)},
      {"use_dtr_layer", fmt_bool(c.use_dtr_layer)},
      {"share_ts_lstm", fmt_bool(c.share_ts_lstm)},
      {"sat_layers", std::to_string(c.sat_layers)},
      {"dtr_layers", std::to_string(c.dtr_layers)},
  };
}

bool set_model_key(ModelConfig& c, const std::string& key, const std::string& v) {
  if (key == "variant") c.variant = parse_variant(v);
  else if (key == "d_hidden") c.d_hidden = parse_size(key, v);
  else if (key == "d_label") c.d_label = parse_size(key, v);
  else if (key == "d_word") c.d_word = parse_size(key, v);
  else if (key == "T") c.steps = static_cast<int>(parse_int(key, v));
  else if (key == "num_speakers") c.num_speakers = static_cast<int>(parse_int(key, v));
  else if (key == "num_sentiments") c.num_sentiments = parse_size(key, v);
  else if (key == "num_acts") c.num_acts = parse_size(key, v);
  else if (key == "vocab_size") c.vocab_size = parse_size(key, v);
  else if (key == "dropout") c.dropout = parse_double(key, v);
  else if (key == "gamma_s") c.gamma_s = parse_double(key, v);
  else if (key == "gamma_a") c.gamma_a = parse_double(key, v);
  else if (key == "max_dialog_len") c.max_dialog_len = parse_size(key, v);
  else if (key == "decoder_wiring") c.decoder_wiring = parse_wiring(v);
  else if (key == "use_label_embeddings") c.use_label_embeddings = parse_bool(key, v);
  else if (key == "use_sat_layer") c.use_sat_layer = parse_bool(key, v);
  else if (key == "use_dtr_layer") c.use_dtr_layer = parse_bool(key, v);
  else if (key == "share_ts_lstm") c.share_ts_lstm = parse_bool(key, v);
  else if (key == "sat_layers") c.sat_layers = parse_size(key, v);
  else if (key == "dtr_layers") c.dtr_layers = parse_size(key, v);
  else return false;
  return true;
}

// ---------------------------------------------------------------------------
// Checkpoints

namespace {
constexpr const char* kMagic = "DARER-CHECKPOINT";
constexpr int kVersion = 1;
}  // namespace

Checkpoint make_checkpoint(const DarerModel& model, const Vocabulary& vocab,
                           const std::vector<std::string>& sentiment_labels,
                           const std::vector<std::string>& act_labels) {
  Checkpoint c;
  c.config = model.config();
  c.vocabulary = vocab.tokens();
  c.sentiment_labels = sentiment_labels;
  c.act_labels = act_labels;
  for (const auto& [name, t] : model.named_parameters()) c.parameters.emplace_back(name, t.values());
  return c;
}

std::unique_ptr<DarerModel> model_from_checkpoint(const Checkpoint& ckpt) {
  auto model = std::make_unique<DarerModel>(ckpt.config, 0);
  auto named = model->named_parameters();
  if (named.size() != ckpt.parameters.size())
    throw ParseError("checkpoint holds " + std::to_string(ckpt.parameters.size()) +
                     " tensors, model expects " + std::to_string(named.size()));
  for (std::size_t k = 0; k < named.size(); ++k) {
    const auto& [name, values] = ckpt.parameters[k];
    if (name != named[k].first)
      throw ParseError("checkpoint tensor '" + name + "' where model expects '" + named[k].first + "'");
    if (values.size() != named[k].second.numel())
      throw ParseError("checkpoint tensor '" + name + "' has " + std::to_string(values.size()) +
                       " values, expected " + std::to_string(named[k].second.numel()));
    std::copy(values.begin(), values.end(), named[k].second.data().begin());
  }
  return model;
}

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  nlohmann::json header;
  header["config"] = model_config_kv(ckpt.config);
  header["vocabulary"] = ckpt.vocabulary;
  header["sentiment_labels"] = ckpt.sentiment_labels;
  header["act_labels"] = ckpt.act_labels;
  header["meta"] = ckpt.meta;
  nlohmann::json table = nlohmann::json::array();
  for (const auto& [name, values] : ckpt.parameters) table.push_back({{"name", name}, {"size", values.size()}});
  header["tensors"] = table;
  const std::string h = header.dump();

  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write checkpoint " + path.string());
  out << kMagic << ' ' << kVersion << '\n' << h.size() << '\n' << h;
  for (const auto& [name, values] : ckpt.parameters) {
    for (double v : values) {
      auto bits = std::bit_cast<std::uint64_t>(v);
      unsigned char bytes[8];
      for (int b = 0; b < 8; ++b) bytes[b] = static_cast<unsigned char>(bits >> (8 * b));
      out.write(reinterpret_cast<const char*>(bytes), 8);
    }
  }
  if (!out) throw std::runtime_error("failed writing checkpoint " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open checkpoint " + path.string());
  std::string magic;
  int version = 0;
  std::size_t header_len = 0;
  in >> magic >> version >> header_len;
  if (magic != kMagic) throw ParseError(path.string() + " is not a checkpoint");
  if (version != kVersion) throw ParseError("unsupported checkpoint version " + std::to_string(version));
  in.get();  // newline
  std::string h(header_len, '\0');
  in.read(h.data(), static_cast<std::streamsize>(header_len));
  if (!in) throw ParseError("truncated checkpoint header");

  Checkpoint c;
  try {
    auto header = nlohmann::json::parse(h);
    for (const auto& [k, v] : header.at("config").items())
      if (!set_model_key(c.config, k, v.get<std::string>()))
        throw ParseError("checkpoint config has unknown key '" + k + "'");
    c.vocabulary = header.at("vocabulary").get<std::vector<std::string>>();
    c.sentiment_labels = header.at("sentiment_labels").get<std::vector<std::string>>();
    c.act_labels = header.at("act_labels").get<std::vector<std::string>>();
    c.meta = header.at("meta").get<std::map<std::string, std::string>>();
    for (const auto& t : header.at("tensors")) {
      std::vector<double> values(t.at("size").get<std::size_t>());
      for (auto& v : values) {
        unsigned char bytes[8];
        in.read(reinterpret_cast<char*>(bytes), 8);
        std::uint64_t bits = 0;
        for (int b = 0; b < 8; ++b) bits |= static_cast<std::uint64_t>(bytes[b]) << (8 * b);
        v = std::bit_cast<double>(bits);
      }
      c.parameters.emplace_back(t.at("name").get<std::string>(), std::move(values));
    }
  } catch (const nlohmann::json::exception& e) {
    throw ParseError("malformed checkpoint header: " + std::string(e.what()));
  }
  if (!in) throw ParseError("truncated checkpoint payload");
  c.config.validate();
  return c;
}

}  // namespace darer
