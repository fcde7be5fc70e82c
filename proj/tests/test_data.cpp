#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <random>
#include <string>

#include <gtest/gtest.h>
#include <unistd.h>

#include "darer/data.hpp"

using namespace darer;
namespace fs = std::filesystem;

namespace {

class TempDir {
 public:
  TempDir() {
    static int counter = 0;
    path_ = fs::temp_directory_path() /
            ("darer_data_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    fs::create_directories(path_);
  }
  ~TempDir() { fs::remove_all(path_); }
  const fs::path& path() const { return path_; }

 private:
  fs::path path_;
};

void write_file(const fs::path& p, const std::string& text) { std::ofstream(p) << text; }

const char* kDialogA =
    R"({"id": "a", "utterances": [{"speaker": 1, "text": "I love it!", "sentiment": "pos", "act": "st"},)"
    R"( {"speaker": 2, "text": "Why?", "sentiment": "neu", "act": "q"}]})";
const char* kDialogB =
    R"({"id": "b", "utterances": [{"speaker": 2, "text": "no way", "sentiment": "neg", "act": "st"}]})";

// Multinomial logistic regression over bag-of-words counts of a single
// utterance, trained by full-batch gradient descent.
double bag_of_words_sentiment_accuracy(const Corpus& c) {
  std::map<std::string, std::size_t> vocab;
  auto features = [&](const std::string& text, bool grow) {
    std::map<std::size_t, double> f;
    for (const auto& t : tokenize(text)) {
      auto it = vocab.find(t);
      if (it == vocab.end()) {
        if (!grow) continue;
        it = vocab.emplace(t, vocab.size()).first;
      }
      f[it->second] += 1.0;
    }
    return f;
  };
  struct Example {
    std::map<std::size_t, double> x;
    std::size_t y;
  };
  std::vector<Example> train, dev;
  for (const auto& d : c.train)
    for (const auto& u : d.utterances) train.push_back({features(u.text, true), *c.sentiment_id(u.sentiment)});
  for (const auto& d : c.dev)
    for (const auto& u : d.utterances) dev.push_back({features(u.text, false), *c.sentiment_id(u.sentiment)});

  const std::size_t k = c.sentiment_labels.size(), v = vocab.size();
  std::vector<double> w(k * (v + 1), 0.0);
  auto probs = [&](const Example& e) {
    std::vector<double> z(k);
    for (std::size_t c2 = 0; c2 < k; ++c2) {
      z[c2] = w[c2 * (v + 1) + v];
      for (const auto& [f, x] : e.x) z[c2] += w[c2 * (v + 1) + f] * x;
    }
    const double mx = *std::max_element(z.begin(), z.end());
    double s = 0.0;
    for (double& x : z) s += (x = std::exp(x - mx));
    for (double& x : z) x /= s;
    return z;
  };
  for (int epoch = 0; epoch < 300; ++epoch) {
    std::vector<double> g(w.size(), 0.0);
    for (const auto& e : train) {
      const auto p = probs(e);
      for (std::size_t c2 = 0; c2 < k; ++c2) {
        const double r = p[c2] - (c2 == e.y ? 1.0 : 0.0);
        g[c2 * (v + 1) + v] += r;
        for (const auto& [f, x] : e.x) g[c2 * (v + 1) + f] += r * x;
      }
    }
    for (std::size_t i = 0; i < w.size(); ++i) w[i] -= 0.5 * g[i] / static_cast<double>(train.size());
  }
  std::size_t correct = 0;
  for (const auto& e : dev) {
    const auto p = probs(e);
    correct += static_cast<std::size_t>(std::max_element(p.begin(), p.end()) - p.begin()) == e.y;
  }
  return static_cast<double>(correct) / static_cast<double>(dev.size());
}

}  // namespace

TEST(Tokenize, LowercasesAndDetachesPunctuation) {
  EXPECT_EQ(tokenize("Hello, World!"), (std::vector<std::string>{"hello", ",", "world", "!"}));
  EXPECT_EQ(tokenize("  a   b "), (std::vector<std::string>{"a", "b"}));
  EXPECT_TRUE(tokenize(" ").empty());
}

TEST(Vocabulary, ReservedIndicesAndFirstOccurrenceOrder) {
  Dialog d{"x", {{1, "b a", "s", "a"}, {2, "a c", "s", "a"}}};
  Vocabulary v = Vocabulary::build({d});
  EXPECT_EQ(v.size(), 5u);
  EXPECT_EQ(v.index("b"), 2u);
  EXPECT_EQ(v.index("a"), 3u);
  EXPECT_EQ(v.index("c"), 4u);
  EXPECT_EQ(v.index("zzz"), Vocabulary::kUnk);
  EXPECT_EQ(v.encode("b zzz"), (std::vector<std::size_t>{2, Vocabulary::kUnk}));
  EXPECT_EQ(v.encode("   "), (std::vector<std::size_t>{Vocabulary::kUnk}));
}

TEST(Vocabulary, DeterministicForSameTrainSplit) {
  Corpus c = generate_synthetic({}, {30, 5, 5}, 3);
  EXPECT_EQ(Vocabulary::build(c.train).tokens(), Vocabulary::build(c.train).tokens());
  Vocabulary v = Vocabulary::build(c.train);
  EXPECT_EQ(Vocabulary::from_tokens(v.tokens()).tokens(), v.tokens());
}

TEST(ParseRecord, EmptyUtteranceRejectedWithLineNumber) {
  const std::string line =
      R"({"id": "x", "utterances": [{"speaker": 1, "text": "", "sentiment": "a", "act": "b"}]})";
  try {
    parse_dialog_record(line, 7);
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_NE(std::string(e.what()).find("line 7"), std::string::npos) << e.what();
  }
}

TEST(ParseRecord, MalformedInputs) {
  EXPECT_THROW(parse_dialog_record("{not json", 1), ParseError);
  EXPECT_THROW(parse_dialog_record(R"({"id": "x", "utterances": []})", 1), ParseError);
  EXPECT_THROW(parse_dialog_record(
                   R"({"id": "x", "utterances": [{"speaker": 0, "text": "a", "sentiment": "a", "act": "b"}]})", 1),
               ParseError);
  EXPECT_THROW(parse_dialog_record(R"({"id": "x", "utterances": [{"speaker": 1, "text": "a", "act": "b"}]})", 1),
               ParseError);
}

TEST(LoadCorpus, UnknownDevLabelIsNamed) {
  TempDir a;
  write_file(a.path() / "train.jsonl", std::string(kDialogA) + "\n");
  write_file(a.path() / "dev.jsonl", std::string(kDialogB) + "\n");
  try {
    load_corpus(a.path());
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_NE(std::string(e.what()).find("'neg'"), std::string::npos) << e.what();
  }
}

TEST(LoadCorpus, SaveLoadRoundTripIsExact) {
  TempDir a, b;
  write_file(a.path() / "train.jsonl", std::string(kDialogA) + "\n" + kDialogB + "\n");
  write_file(a.path() / "dev.jsonl", std::string(kDialogB).replace(8, 1, "c") + "\n");
  const auto before = fs::last_write_time(a.path() / "train.jsonl");
  Corpus c = load_corpus(a.path());
  EXPECT_EQ(fs::last_write_time(a.path() / "train.jsonl"), before);
  save_corpus(c, b.path());
  Corpus d = load_corpus(b.path());
  EXPECT_EQ(c, d);
  save_corpus(generate_synthetic({}, {4, 2, 2}, 1), b.path());
  EXPECT_EQ(load_corpus(b.path()), generate_synthetic({}, {4, 2, 2}, 1));
}

TEST(LoadCorpus, DuplicateIdsAndMissingDirRejected) {
  TempDir a;
  write_file(a.path() / "train.jsonl", std::string(kDialogA) + "\n");
  write_file(a.path() / "dev.jsonl", std::string(kDialogA) + "\n");
  EXPECT_THROW(load_corpus(a.path()), ParseError);
  EXPECT_THROW(load_corpus(a.path() / "missing"), ParseError);
}

TEST(LoadCorpus, MalformedLineReportsLine) {
  TempDir a;
  write_file(a.path() / "train.jsonl", std::string(kDialogA) + "\n\n{oops\n");
  write_file(a.path() / "dev.jsonl", "");
  try {
    load_corpus(a.path());
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_NE(std::string(e.what()).find("train.jsonl: line 3"), std::string::npos) << e.what();
  }
}

TEST(LoadCorpus, AcceptsMastodonSizedSplits) {
  TempDir a;
  Corpus c = generate_synthetic({}, {269, 266, 0}, 2);
  save_corpus(c, a.path());
  Corpus d = load_corpus(a.path());
  EXPECT_EQ(d.train.size(), 269u);
  EXPECT_EQ(d.dev.size(), 266u);
}

TEST(WordVectors, ParsesLine) {
  TempDir a;
  write_file(a.path() / "v.txt", "the 0.1 0.2 0.3\n");
  WordVectors v = load_word_vectors(a.path() / "v.txt", 3);
  ASSERT_EQ(v.count("the"), 1u);
  EXPECT_EQ(v["the"], (std::vector<double>{0.1, 0.2, 0.3}));
}

TEST(WordVectors, DimensionMismatchRejectedWithLine) {
  TempDir a;
  write_file(a.path() / "v.txt", "the 0.1 0.2 0.3\nof 0.1 0.2\n");
  try {
    load_word_vectors(a.path() / "v.txt", 3);
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_NE(std::string(e.what()).find(":2:"), std::string::npos) << e.what();
  }
  write_file(a.path() / "w.txt", "the 0.1 x 0.3\n");
  EXPECT_THROW(load_word_vectors(a.path() / "w.txt", 3), ParseError);
}

TEST(WordVectors, FallbackIsSeededAndBounded) {
  const auto a = fallback_vector("zebra", 16, 5);
  EXPECT_EQ(a, fallback_vector("zebra", 16, 5));
  EXPECT_NE(a, fallback_vector("zebra", 16, 6));
  EXPECT_NE(a, fallback_vector("zebras", 16, 5));
  for (double x : a) {
    EXPECT_GE(x, -0.1);
    EXPECT_LE(x, 0.1);
  }
}

TEST(WordVectors, EmbeddingMatrixUsesPretrainedRows) {
  Vocabulary v = Vocabulary::from_tokens({"<pad>", "<unk>", "the", "cat"});
  WordVectors wv{{"the", {1.0, 2.0}}};
  const auto m = embedding_matrix(v, wv, 2, 9);
  EXPECT_EQ(m[0], 0.0);
  EXPECT_EQ(m[1], 0.0);
  EXPECT_EQ(m[4], 1.0);
  EXPECT_EQ(m[5], 2.0);
  EXPECT_EQ(std::vector<double>(m.begin() + 6, m.end()), fallback_vector("cat", 2, 9));
}

TEST(Synthetic, BitIdenticalPerSeed) {
  TempDir a, b;
  save_corpus(generate_synthetic({}, {50, 10, 10}, 7), a.path());
  save_corpus(generate_synthetic({}, {50, 10, 10}, 7), b.path());
  for (const char* f : {"train.jsonl", "dev.jsonl", "test.jsonl", "manifest.json"}) {
    std::ifstream x(a.path() / f), y(b.path() / f);
    EXPECT_EQ(std::string(std::istreambuf_iterator<char>(x), {}), std::string(std::istreambuf_iterator<char>(y), {}));
  }
  EXPECT_NE(generate_synthetic({}, {50, 10, 10}, 8), generate_synthetic({}, {50, 10, 10}, 7));
}

TEST(Synthetic, PlantedRulesHoldOnEveryDialog) {
  RuleSet rules;
  Corpus c = generate_synthetic(rules, {500, 100, 100}, 7);
  std::size_t disagreements = 0;
  for (const auto* split : {&c.train, &c.dev, &c.test})
    for (const auto& d : *split) {
      EXPECT_TRUE(rule_violations(d, rules).empty()) << d.id;
      EXPECT_GE(d.utterances.size(), 4u);
      EXPECT_LE(d.utterances.size(), 10u);
      for (std::size_t i = 1; i < d.utterances.size(); ++i)
        if (d.utterances[i].act == "disagreement") {
          ++disagreements;
          EXPECT_EQ(d.utterances[i].sentiment, synth::flip(d.utterances[i - 1].sentiment));
        }
    }
  EXPECT_GT(disagreements, 100u);
}

TEST(Synthetic, SpeakersAlternateWithOccasionalRepeats) {
  Corpus c = generate_synthetic({}, {500, 0, 0}, 7);
  std::size_t turns = 0, repeats = 0;
  for (const auto& d : c.train)
    for (std::size_t i = 1; i < d.utterances.size(); ++i) {
      ++turns;
      repeats += d.utterances[i].speaker == d.utterances[i - 1].speaker;
    }
  const double rate = static_cast<double>(repeats) / static_cast<double>(turns);
  EXPECT_NEAR(rate, 0.2, 0.03);
}

TEST(Synthetic, DisabledRulesAreNotPlanted) {
  RuleSet only_qa;
  only_qa.disagreement_flips = false;
  only_qa.agreement_copies = false;
  Corpus c = generate_synthetic(only_qa, {200, 0, 0}, 7);
  RuleSet flips;
  flips.agreement_copies = false;
  flips.question_answer = false;
  std::size_t violations = 0;
  for (const auto& d : c.train) violations += rule_violations(d, flips).size();
  EXPECT_GT(violations, 0u);
  EXPECT_THROW(generate_synthetic(RuleSet{false, false, false, 0.3}, {1, 0, 0}, 1), std::invalid_argument);
}

TEST(Synthetic, BagOfWordsBaselineLeavesHeadroom) {
  Corpus c = generate_synthetic({}, {500, 100, 100}, 7);
  const double acc = bag_of_words_sentiment_accuracy(c);
  EXPECT_LE(acc, 0.80);
  EXPECT_GT(acc, 0.40);
}
