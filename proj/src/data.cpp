#include "darer/data.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <random>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

namespace darer {

using nlohmann::json;

std::vector<int> Dialog::speakers() const {
  std::vector<int> s;
  s.reserve(utterances.size());
  for (const auto& u : utterances) s.push_back(u.speaker);
  return s;
}

const std::vector<Dialog>& Corpus::split(const std::string& name) const {
  if (name == "train") return train;
  if (name == "dev") return dev;
  if (name == "test") return test;
  throw std::invalid_argument("unknown split '" + name + "' (expected train, dev or test)");
}

namespace {

std::optional<std::size_t> find_label(const std::vector<std::string>& labels, const std::string& l) {
  auto it = std::find(labels.begin(), labels.end(), l);
  if (it == labels.end()) return std::nullopt;
  return static_cast<std::size_t>(it - labels.begin());
}

}  // namespace

std::optional<std::size_t> Corpus::sentiment_id(const std::string& label) const {
  return find_label(sentiment_labels, label);
}

std::optional<std::size_t> Corpus::act_id(const std::string& label) const {
  return find_label(act_labels, label);
}

std::vector<std::string> tokenize(const std::string& text) {
  static const std::string punct = ".,!?;:\"()[]{}";
  std::string spaced;
  spaced.reserve(text.size() * 2);
  for (char ch : text) {
    const auto c = static_cast<unsigned char>(ch);
    if (punct.find(ch) != std::string::npos) {
      spaced += ' ';
      spaced += ch;
      spaced += ' ';
    } else {
      spaced += static_cast<char>(std::tolower(c));
    }
  }
  std::istringstream is(spaced);
  std::vector<std::string> out;
  for (std::string tok; is >> tok;) out.push_back(tok);
  return out;
}

Vocabulary::Vocabulary() {
  add("<pad>");
  add("<unk>");
}

void Vocabulary::add(const std::string& token) {
  if (index_.count(token)) return;
  index_.emplace(token, tokens_.size());
  tokens_.push_back(token);
}

Vocabulary Vocabulary::build(const std::vector<Dialog>& train) {
  Vocabulary v;
  for (const auto& d : train)
    for (const auto& u : d.utterances)
      for (const auto& t : tokenize(u.text)) v.add(t);
  return v;
}

Vocabulary Vocabulary::from_tokens(const std::vector<std::string>& tokens_in_index_order) {
  if (tokens_in_index_order.size() < 2 || tokens_in_index_order[0] != "<pad>" ||
      tokens_in_index_order[1] != "<unk>")
    throw ParseError("vocabulary must start with <pad> and <unk>");
  Vocabulary v;
  for (const auto& t : tokens_in_index_order) {
    if (v.index_.count(t) && v.index_.at(t) >= 2) throw ParseError("duplicate vocabulary token '" + t + "'");
    v.add(t);
  }
  return v;
}

std::size_t Vocabulary::index(const std::string& token) const {
  auto it = index_.find(token);
  return it == index_.end() ? kUnk : it->second;
}

std::vector<std::size_t> Vocabulary::encode(const std::string& text) const {
  std::vector<std::size_t> ids;
  for (const auto& t : tokenize(text)) ids.push_back(index(t));
  if (ids.empty()) ids.push_back(kUnk);
  return ids;
}

EncodedDialog encode_dialog(const Dialog& dialog, const Vocabulary& vocab, const Corpus& labels) {
  EncodedDialog e;
  e.id = dialog.id;
  for (const auto& u : dialog.utterances) {
    e.tokens.push_back(vocab.encode(u.text));
    e.speakers.push_back(u.speaker);
    auto s = labels.sentiment_id(u.sentiment);
    auto a = labels.act_id(u.act);
    if (!s) throw ParseError("dialog " + dialog.id + ": unknown sentiment label '" + u.sentiment + "'");
    if (!a) throw ParseError("dialog " + dialog.id + ": unknown act label '" + u.act + "'");
    e.sentiment.push_back(*s);
    e.act.push_back(*a);
  }
  return e;
}

std::vector<EncodedDialog> encode_split(const std::vector<Dialog>& dialogs, const Vocabulary& vocab,
                                        const Corpus& labels) {
  std::vector<EncodedDialog> out;
  out.reserve(dialogs.size());
  for (const auto& d : dialogs) out.push_back(encode_dialog(d, vocab, labels));
  return out;
}

Dialog parse_dialog_record(const std::string& line, std::size_t line_no) {
  const std::string where = "line " + std::to_string(line_no) + ": ";
  json j;
  try {
    j = json::parse(line);
  } catch (const json::parse_error& e) {
    throw ParseError(where + "malformed JSON (" + e.what() + ")");
  }
  if (!j.is_object()) throw ParseError(where + "record must be an object");
  Dialog d;
  if (!j.contains("id") || !(j["id"].is_string() || j["id"].is_number_integer()))
    throw ParseError(where + "missing dialog id");
  d.id = j["id"].is_string() ? j["id"].get<std::string>() : std::to_string(j["id"].get<long long>());
  if (!j.contains("utterances") || !j["utterances"].is_array() || j["utterances"].empty())
    throw ParseError(where + "dialog '" + d.id + "' has no utterances");
  std::size_t k = 0;
  for (const auto& u : j["utterances"]) {
    const std::string uw = where + "utterance " + std::to_string(k++) + ": ";
    if (!u.is_object()) throw ParseError(uw + "must be an object");
    Utterance ut;
    if (!u.contains("speaker") || !u["speaker"].is_number_integer() || u["speaker"].get<int>() < 1)
      throw ParseError(uw + "speaker must be a positive integer");
    ut.speaker = u["speaker"].get<int>();
    for (const char* key : {"text", "sentiment", "act"})
      if (!u.contains(key) || !u[key].is_string())
        throw ParseError(uw + "missing string field '" + key + "'");
    ut.text = u["text"].get<std::string>();
    ut.sentiment = u["sentiment"].get<std::string>();
    ut.act = u["act"].get<std::string>();
    if (ut.text.empty()) throw ParseError(uw + "empty utterance text");
    if (ut.sentiment.empty() || ut.act.empty()) throw ParseError(uw + "empty label");
    d.utterances.push_back(std::move(ut));
  }
  return d;
}

std::string dialog_record(const Dialog& dialog) {
  json utts = json::array();
  for (const auto& u : dialog.utterances)
    utts.push_back({{"speaker", u.speaker}, {"text", u.text}, {"sentiment", u.sentiment}, {"act", u.act}});
  json j = {{"id", dialog.id}, {"utterances", utts}};
  return j.dump();
}

namespace {

std::vector<Dialog> read_split(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw ParseError("cannot open " + file.string());
  std::vector<Dialog> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(parse_dialog_record(line, line_no));
    } catch (const ParseError& e) {
      throw ParseError(file.filename().string() + ": " + e.what());
    }
  }
  return out;
}

void check_labels(const std::vector<Dialog>& split, const std::string& name, const Corpus& c) {
  for (const auto& d : split)
    for (const auto& u : d.utterances) {
      if (!c.sentiment_id(u.sentiment))
        throw ParseError(name + ": dialog '" + d.id + "' uses unknown sentiment label '" + u.sentiment + "'");
      if (!c.act_id(u.act))
        throw ParseError(name + ": dialog '" + d.id + "' uses unknown act label '" + u.act + "'");
    }
}

}  // namespace

Corpus load_corpus(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) throw ParseError("corpus directory not found: " + dir.string());
  Corpus c;
  c.train = read_split(dir / "train.jsonl");
  c.dev = read_split(dir / "dev.jsonl");
  if (std::filesystem::exists(dir / "test.jsonl")) c.test = read_split(dir / "test.jsonl");
  if (c.train.empty()) throw ParseError("train split is empty");

  const auto manifest_path = dir / "manifest.json";
  if (std::filesystem::exists(manifest_path)) {
    std::ifstream in(manifest_path);
    json m;
    try {
      m = json::parse(in);
      c.sentiment_labels = m.at("sentiment_labels").get<std::vector<std::string>>();
      c.act_labels = m.at("act_labels").get<std::vector<std::string>>();
      if (m.contains("num_speakers")) c.num_speakers = m["num_speakers"].get<int>();
    } catch (const json::exception& e) {
      throw ParseError("manifest.json: " + std::string(e.what()));
    }
  } else {
    for (const auto& d : c.train)
      for (const auto& u : d.utterances) {
        if (!c.sentiment_id(u.sentiment)) c.sentiment_labels.push_back(u.sentiment);
        if (!c.act_id(u.act)) c.act_labels.push_back(u.act);
      }
  }
  check_labels(c.train, "train.jsonl", c);
  check_labels(c.dev, "dev.jsonl", c);
  check_labels(c.test, "test.jsonl", c);

  std::set<std::string> ids;
  int max_speaker = 0;
  for (const auto* split : {&c.train, &c.dev, &c.test})
    for (const auto& d : *split) {
      if (!ids.insert(d.id).second) throw ParseError("dialog id '" + d.id + "' appears more than once");
      for (const auto& u : d.utterances) max_speaker = std::max(max_speaker, u.speaker);
    }
  if (c.num_speakers == 0) c.num_speakers = max_speaker;
  if (max_speaker > c.num_speakers)
    throw ParseError("speaker id " + std::to_string(max_speaker) + " exceeds num_speakers " +
                     std::to_string(c.num_speakers));
  return c;
}

void save_corpus(const Corpus& corpus, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  json m = {{"sentiment_labels", corpus.sentiment_labels},
            {"act_labels", corpus.act_labels},
            {"num_speakers", corpus.num_speakers}};
  std::ofstream(dir / "manifest.json") << m.dump(2) << '\n';
  auto write = [&](const std::vector<Dialog>& split, const char* name) {
    std::ofstream out(dir / name);
    for (const auto& d : split) out << dialog_record(d) << '\n';
  };
  write(corpus.train, "train.jsonl");
  write(corpus.dev, "dev.jsonl");
  write(corpus.test, "test.jsonl");
}

WordVectors load_word_vectors(const std::filesystem::path& path, std::size_t dim) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open word vectors " + path.string());
  WordVectors out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::istringstream is(line);
    std::string token;
    if (!(is >> token)) continue;
    std::vector<double> v;
    v.reserve(dim);
    std::string field;
    while (is >> field) {
      try {
        std::size_t used = 0;
        v.push_back(std::stod(field, &used));
        if (used != field.size()) throw std::invalid_argument(field);
      } catch (const std::exception&) {
        throw ParseError(path.filename().string() + ":" + std::to_string(line_no) +
                         ": bad number '" + field + "'");
      }
    }
    if (v.size() != dim)
      throw ParseError(path.filename().string() + ":" + std::to_string(line_no) + ": expected " +
                       std::to_string(dim) + " values, found " + std::to_string(v.size()));
    out[token] = std::move(v);
  }
  return out;
}

std::vector<double> fallback_vector(const std::string& token, std::size_t dim, std::uint64_t seed) {
  // FNV-1a keeps the vector independent of vocabulary order.
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : token) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  std::mt19937_64 rng(seed ^ h);
  std::uniform_real_distribution<double> u(-0.1, 0.1);
  std::vector<double> v(dim);
  for (auto& x : v) x = u(rng);
  return v;
}

std::vector<double> embedding_matrix(const Vocabulary& vocab, const WordVectors& vectors,
                                     std::size_t dim, std::uint64_t seed) {
  std::vector<double> m(vocab.size() * dim, 0.0);
  for (std::size_t i = 1; i < vocab.size(); ++i) {
    auto it = vectors.find(vocab.token(i));
    const auto v = it != vectors.end() ? it->second : fallback_vector(vocab.token(i), dim, seed);
    std::copy(v.begin(), v.end(), m.begin() + static_cast<std::ptrdiff_t>(i * dim));
  }
  return m;
}

// ---------------------------------------------------------------------------

namespace synth {

std::string flip(const std::string& sentiment) {
  if (sentiment == "positive") return "negative";
  if (sentiment == "negative") return "positive";
  return sentiment;
}

namespace {

const std::vector<std::vector<std::string>> kSentimentWords = {
    {"terrible", "hate", "awful", "sad", "horrible", "annoying", "worst", "angry"},
    {"okay", "fine", "normal", "usual", "average", "plain", "ordinary", "standard"},
    {"great", "love", "wonderful", "happy", "awesome", "nice", "glad", "fantastic"},
};

// Statements and answers share one inventory; only context separates them.
const std::vector<std::string> kStatementPhrases = {"i think", "in my view", "honestly", "you know",
                                                    "well", "to be fair"};
const std::vector<std::string> kQuestionPhrases = {"why", "how come", "what about", "do you think",
                                                   "is it true"};
const std::vector<std::string> kAgreePhrases = {"i agree", "exactly", "yes indeed", "so true",
                                                "absolutely"};
const std::vector<std::string> kDisagreePhrases = {"i disagree", "no way", "not at all",
                                                   "that is wrong", "nonsense"};
// Replies that do not reveal whether they agree.
const std::vector<std::string> kReplyPhrases = {"hmm", "i see", "right so", "ok then", "wait"};
const std::vector<std::string> kNoise = {
    "the", "weather", "movie", "game", "food", "city", "music", "book", "team", "show",
    "day", "night", "trip", "work", "class", "park", "phone", "car", "dinner", "party",
    "news", "song", "match", "coffee", "office", "train", "beach", "shop", "plan", "story"};

template <typename T>
const T& choose(const std::vector<T>& v, std::mt19937_64& rng) {
  std::uniform_int_distribution<std::size_t> d(0, v.size() - 1);
  return v[d(rng)];
}

std::string draw_sentiment(std::mt19937_64& rng) {
  std::discrete_distribution<int> d({0.4, 0.2, 0.4});
  return kSentiments[static_cast<std::size_t>(d(rng))];
}

std::size_t sentiment_index(const std::string& s) {
  return static_cast<std::size_t>(std::find(kSentiments.begin(), kSentiments.end(), s) - kSentiments.begin());
}

std::string render(const std::string& act, const std::optional<std::string>& keyword, bool implicit,
                   std::mt19937_64& rng) {
  const std::vector<std::string>* phrases = &kStatementPhrases;
  if (act == "question") phrases = &kQuestionPhrases;
  if (act == "agreement") phrases = &kAgreePhrases;
  if (act == "disagreement") phrases = &kDisagreePhrases;
  if (implicit) phrases = &kReplyPhrases;
  std::vector<std::string> words;
  std::uniform_int_distribution<int> n_noise(2, 5);
  for (int k = n_noise(rng); k > 0; --k) words.push_back(choose(kNoise, rng));
  if (keyword) {
    std::uniform_int_distribution<std::size_t> at(0, words.size());
    words.insert(words.begin() + static_cast<std::ptrdiff_t>(at(rng)), *keyword);
  }
  std::string text = choose(*phrases, rng);
  for (const auto& w : words) text += " " + w;
  text += act == "question" ? " ?" : " .";
  return text;
}

Dialog make_dialog(const RuleSet& rules, const std::string& id, std::mt19937_64& rng) {
  Dialog d;
  d.id = id;
  std::uniform_int_distribution<int> len(4, 10);
  std::bernoulli_distribution repeat(0.2);
  std::bernoulli_distribution decoy(rules.decoy_rate);
  std::bernoulli_distribution implicit_reply(rules.implicit_reply_rate);
  const int n = len(rng);
  int speaker = 1;
  for (int i = 0; i < n; ++i) {
    if (i > 0 && !repeat(rng)) speaker = 3 - speaker;
    Utterance u;
    u.speaker = speaker;
    const Utterance* prev = i > 0 ? &d.utterances.back() : nullptr;
    if (!prev) {
      u.act = std::bernoulli_distribution(0.6)(rng) ? "statement" : "question";
    } else if (rules.question_answer && prev->act == "question") {
      u.act = "answer";
    } else {
      std::discrete_distribution<int> pick({0.25, 0.2, 0.3, 0.25});
      static const char* acts[] = {"statement", "question", "agreement", "disagreement"};
      u.act = acts[pick(rng)];
    }

    std::optional<std::string> keyword;
    const bool copies = u.act == "agreement" && rules.agreement_copies;
    const bool flips = u.act == "disagreement" && rules.disagreement_flips;
    bool implicit = false;
    if (copies || flips) {
      u.sentiment = copies ? prev->sentiment : flip(prev->sentiment);
      // A neutral predecessor would leave an implicit reply's act undetermined.
      implicit = prev->sentiment != "neutral" && implicit_reply(rng);
      if (implicit)
        keyword = choose(kSentimentWords[sentiment_index(u.sentiment)], rng);
      else if (decoy(rng))
        keyword = choose(kSentimentWords[sentiment_index(draw_sentiment(rng))], rng);
    } else {
      u.sentiment = draw_sentiment(rng);
      keyword = choose(kSentimentWords[sentiment_index(u.sentiment)], rng);
    }
    u.text = render(u.act, keyword, implicit, rng);
    d.utterances.push_back(std::move(u));
  }
  return d;
}

}  // namespace
}  // namespace synth

Corpus generate_synthetic(const RuleSet& rules, const SplitSizes& sizes, std::uint64_t seed) {
  if (rules.empty()) throw std::invalid_argument("generate_synthetic: rule set enables no rule");
  std::mt19937_64 rng(seed);
  Corpus c;
  c.sentiment_labels = synth::kSentiments;
  c.act_labels = synth::kActs;
  c.num_speakers = 2;
  auto fill = [&](std::vector<Dialog>& split, std::size_t count, const std::string& name) {
    for (std::size_t i = 0; i < count; ++i) {
      std::ostringstream id;
      id << "syn-" << name << "-" << i;
      split.push_back(synth::make_dialog(rules, id.str(), rng));
    }
  };
  fill(c.train, sizes.train, "train");
  fill(c.dev, sizes.dev, "dev");
  fill(c.test, sizes.test, "test");
  return c;
}

std::vector<std::size_t> rule_violations(const Dialog& dialog, const RuleSet& rules) {
  std::vector<std::size_t> bad;
  for (std::size_t i = 1; i < dialog.utterances.size(); ++i) {
    const auto& u = dialog.utterances[i];
    const auto& p = dialog.utterances[i - 1];
    bool ok = true;
    if (rules.disagreement_flips && u.act == "disagreement") ok = ok && u.sentiment == synth::flip(p.sentiment);
    if (rules.agreement_copies && u.act == "agreement") ok = ok && u.sentiment == p.sentiment;
    if (rules.question_answer && p.act == "question") ok = ok && u.act == "answer";
    if (!ok) bad.push_back(i);
  }
  return bad;
}

}  // namespace darer
