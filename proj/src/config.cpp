#include "darer/config.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>

namespace darer {

namespace {

// Data-derived model fields; never taken from user configuration.
const std::vector<std::string> kDerivedModelKeys = {"num_speakers", "num_sentiments", "num_acts",
                                                    "vocab_size"};

const std::vector<std::string> kRunKeys = {
    "lr", "beta1", "beta2", "adam_eps", "batch", "epochs", "seed", "init_seed", "stop_at",
    "data_dir", "word_vectors", "ignore_sentiment_label", "sentiment_f1", "act_f1"};

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::string fmt(double v) {
  char buf[64];
  auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

double num(const std::string& key, const std::string& v) {
  double out = 0;
  auto r = std::from_chars(v.data(), v.data() + v.size(), out);
  if (r.ec != std::errc() || r.ptr != v.data() + v.size())
    throw ConfigError(key + ": expected a number, got '" + v + "'");
  return out;
}

std::uint64_t uint(const std::string& key, const std::string& v) {
  std::uint64_t out = 0;
  auto r = std::from_chars(v.data(), v.data() + v.size(), out);
  if (r.ec != std::errc() || r.ptr != v.data() + v.size())
    throw ConfigError(key + ": expected a non-negative integer, got '" + v + "'");
  return out;
}

}  // namespace

const std::vector<std::string>& run_config_keys() {
  static const std::vector<std::string> keys = [] {
    std::vector<std::string> k;
    for (const auto& [key, v] : model_config_kv(ModelConfig{}))
      if (std::find(kDerivedModelKeys.begin(), kDerivedModelKeys.end(), key) == kDerivedModelKeys.end())
        k.push_back(key);
    k.insert(k.end(), kRunKeys.begin(), kRunKeys.end());
    std::sort(k.begin(), k.end());
    return k;
  }();
  return keys;
}

F1Kind parse_f1_kind(const std::string& s) {
  if (s == "macro") return F1Kind::macro;
  if (s == "weighted") return F1Kind::weighted;
  throw ConfigError("f1 kind must be macro or weighted, got '" + s + "'");
}

RunConfig RunConfig::from_kv(const std::map<std::string, std::string>& kv) {
  const auto& keys = run_config_keys();
  for (const auto& [k, v] : kv)
    if (std::find(keys.begin(), keys.end(), k) == keys.end())
      throw ConfigError("unknown config key '" + k + "'");

  RunConfig c;
  const auto variant_it = kv.find("variant");
  c.model = ModelConfig::defaults_for(variant_it == kv.end() ? Variant::reteformer
                                                             : parse_variant(variant_it->second));
  for (const auto& [k, v] : kv) {
    if (set_model_key(c.model, k, v)) continue;
    if (k == "lr") c.train.lr = num(k, v);
    else if (k == "beta1") c.train.beta1 = num(k, v);
    else if (k == "beta2") c.train.beta2 = num(k, v);
    else if (k == "adam_eps") c.train.adam_eps = num(k, v);
    else if (k == "batch") c.train.batch = uint(k, v);
    else if (k == "epochs") c.train.epochs = uint(k, v);
    else if (k == "seed") c.train.seed = uint(k, v);
    else if (k == "init_seed") c.init_seed = uint(k, v);
    else if (k == "stop_at") c.train.stop_at = (v == "none" || v.empty()) ? std::nullopt : std::optional(num(k, v));
    else if (k == "data_dir") c.data_dir = v;
    else if (k == "word_vectors") c.word_vectors = v;
    else if (k == "ignore_sentiment_label") c.ignore_sentiment_label = v;
    else if (k == "sentiment_f1") c.sentiment_f1 = v;
    else if (k == "act_f1") c.act_f1 = v;
  }
  if (!kv.count("d_label")) c.model.d_label = c.model.d_hidden;
  parse_f1_kind(c.sentiment_f1);
  parse_f1_kind(c.act_f1);
  if (c.train.lr < 0) throw ConfigError("lr must be >= 0");
  if (c.train.batch == 0) throw ConfigError("batch must be positive");
  return c;
}

std::map<std::string, std::string> RunConfig::to_kv() const {
  auto kv = model_config_kv(model);
  for (const auto& k : kDerivedModelKeys) kv.erase(k);
  kv["lr"] = fmt(train.lr);
  kv["beta1"] = fmt(train.beta1);
  kv["beta2"] = fmt(train.beta2);
  kv["adam_eps"] = fmt(train.adam_eps);
  kv["batch"] = std::to_string(train.batch);
  kv["epochs"] = std::to_string(train.epochs);
  kv["seed"] = std::to_string(train.seed);
  kv["init_seed"] = std::to_string(init_seed);
  kv["stop_at"] = train.stop_at ? fmt(*train.stop_at) : "none";
  kv["data_dir"] = data_dir;
  kv["word_vectors"] = word_vectors;
  kv["ignore_sentiment_label"] = ignore_sentiment_label;
  kv["sentiment_f1"] = sentiment_f1;
  kv["act_f1"] = act_f1;
  return kv;
}

MetricConfig RunConfig::metric_config(const std::vector<std::string>& sentiment_labels) const {
  MetricConfig mc;
  mc.sentiment_f1 = parse_f1_kind(sentiment_f1);
  mc.act_f1 = parse_f1_kind(act_f1);
  if (!ignore_sentiment_label.empty()) {
    auto it = std::find(sentiment_labels.begin(), sentiment_labels.end(), ignore_sentiment_label);
    if (it == sentiment_labels.end())
      throw ConfigError("ignore_sentiment_label '" + ignore_sentiment_label + "' is not a sentiment label");
    mc.ignore_sentiment = static_cast<std::size_t>(it - sentiment_labels.begin());
  }
  return mc;
}

std::map<std::string, std::string> read_kv_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  std::map<std::string, std::string> kv;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError(path.filename().string() + ":" + std::to_string(line_no) + ": expected key = value");
    kv[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
  }
  return kv;
}

std::pair<std::string, std::string> parse_assignment(const std::string& s) {
  const auto eq = s.find('=');
  if (eq == std::string::npos || eq == 0) throw ConfigError("expected KEY=VALUE, got '" + s + "'");
  return {trim(s.substr(0, eq)), trim(s.substr(eq + 1))};
}

RunConfig load_run_config(const std::optional<std::filesystem::path>& path,
                          const std::vector<std::string>& overrides) {
  std::map<std::string, std::string> kv;
  if (path) kv = read_kv_file(*path);
  for (const auto& o : overrides) {
    auto [k, v] = parse_assignment(o);
    kv[k] = v;
  }
  return RunConfig::from_kv(kv);
}

}  // namespace darer
