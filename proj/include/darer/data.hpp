#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

namespace darer {

class ParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Utterance {
  int speaker = 1;  // 1-based
  std::string text;
  std::string sentiment;
  std::string act;

  bool operator==(const Utterance&) const = default;
};

struct Dialog {
  std::string id;
  std::vector<Utterance> utterances;

  std::vector<int> speakers() const;
  bool operator==(const Dialog&) const = default;
};

struct Corpus {
  std::vector<Dialog> train;
  std::vector<Dialog> dev;
  std::vector<Dialog> test;
  std::vector<std::string> sentiment_labels;  // index = class id
  std::vector<std::string> act_labels;
  int num_speakers = 0;

  const std::vector<Dialog>& split(const std::string& name) const;
  std::optional<std::size_t> sentiment_id(const std::string& label) const;
  std::optional<std::size_t> act_id(const std::string& label) const;

  bool operator==(const Corpus&) const = default;
};

/// Lowercases, detaches punctuation and splits on whitespace.
std::vector<std::string> tokenize(const std::string& text);

/// Token index map with reserved PAD = 0 and UNK = 1.
class Vocabulary {
 public:
  static constexpr std::size_t kPad = 0;
  static constexpr std::size_t kUnk = 1;

  Vocabulary();
  /// Indices assigned in order of first occurrence over the dialogs.
  static Vocabulary build(const std::vector<Dialog>& train);
  static Vocabulary from_tokens(const std::vector<std::string>& tokens_in_index_order);

  std::size_t size() const { return tokens_.size(); }
  std::size_t index(const std::string& token) const;
  const std::string& token(std::size_t index) const { return tokens_.at(index); }
  const std::vector<std::string>& tokens() const { return tokens_; }
  /// Token ids of an utterance; an utterance with no tokens maps to [UNK].
  std::vector<std::size_t> encode(const std::string& text) const;

 private:
  void add(const std::string& token);
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, std::size_t> index_;
};

/// Model-ready view of one dialog.
struct EncodedDialog {
  std::string id;
  std::vector<std::vector<std::size_t>> tokens;
  std::vector<int> speakers;
  std::vector<std::size_t> sentiment;
  std::vector<std::size_t> act;

  std::size_t size() const { return tokens.size(); }
};

EncodedDialog encode_dialog(const Dialog& dialog, const Vocabulary& vocab, const Corpus& labels);
std::vector<EncodedDialog> encode_split(const std::vector<Dialog>& dialogs, const Vocabulary& vocab,
                                        const Corpus& labels);

/// Reads a corpus directory: manifest.json, train.jsonl, dev.jsonl and an
/// optional test.jsonl.
Corpus load_corpus(const std::filesystem::path& dir);
void save_corpus(const Corpus& corpus, const std::filesystem::path& dir);

/// Parses one JSONL dialog record; `line_no` is used in error messages.
Dialog parse_dialog_record(const std::string& line, std::size_t line_no);
std::string dialog_record(const Dialog& dialog);

using WordVectors = std::unordered_map<std::string, std::vector<double>>;

/// Text format: one token followed by `dim` decimals per line.
WordVectors load_word_vectors(const std::filesystem::path& path, std::size_t dim);
/// Deterministic per-token vector in [-0.1, 0.1] for tokens without a
/// pretrained entry.
std::vector<double> fallback_vector(const std::string& token, std::size_t dim, std::uint64_t seed);
/// Vocabulary-aligned embedding rows (PAD row zero).
std::vector<double> embedding_matrix(const Vocabulary& vocab, const WordVectors& vectors,
                                     std::size_t dim, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Synthetic corpus with planted dual-task rules.

struct RuleSet {
  /// Disagreement flips the previous utterance's sentiment (neutral stays neutral).
  bool disagreement_flips = true;
  /// Agreement copies the previous utterance's sentiment.
  bool agreement_copies = true;
  /// An utterance following a question is an answer.
  bool question_answer = true;
  /// Probability that an agreement/disagreement utterance carries a
  /// misleading sentiment keyword.
  double decoy_rate = 0.3;
  /// Probability that an agreement/disagreement utterance after a
  /// non-neutral one uses a reply phrase shared by both acts and carries its
  /// true sentiment keyword, so its act follows only from comparing
  /// sentiments.
  double implicit_reply_rate = 0.0;

  bool empty() const { return !disagreement_flips && !agreement_copies && !question_answer; }
};

struct SplitSizes {
  std::size_t train = 500;
  std::size_t dev = 100;
  std::size_t test = 100;
};

namespace synth {
inline const std::vector<std::string> kSentiments = {"negative", "neutral", "positive"};
inline const std::vector<std::string> kActs = {"statement", "question", "answer", "agreement",
                                               "disagreement"};
std::string flip(const std::string& sentiment);
}  // namespace synth

Corpus generate_synthetic(const RuleSet& rules, const SplitSizes& sizes, std::uint64_t seed);

/// Indices of utterances that violate an enabled rule (empty when consistent).
std::vector<std::size_t> rule_violations(const Dialog& dialog, const RuleSet& rules);

}  // namespace darer
