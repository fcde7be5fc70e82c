#include "darer/run.hpp"

namespace darer {

PreparedData prepare_data(Corpus corpus) {
  PreparedData d;
  d.corpus = std::move(corpus);
  d.vocab = Vocabulary::build(d.corpus.train);
  d.train = encode_split(d.corpus.train, d.vocab, d.corpus);
  d.dev = encode_split(d.corpus.dev, d.vocab, d.corpus);
  d.test = encode_split(d.corpus.test, d.vocab, d.corpus);
  return d;
}

ModelConfig resolve_model_config(const RunConfig& run, const PreparedData& data) {
  ModelConfig m = run.model;
  m.num_speakers = data.corpus.num_speakers;
  m.num_sentiments = data.corpus.sentiment_labels.size();
  m.num_acts = data.corpus.act_labels.size();
  m.vocab_size = data.vocab.size();
  m.validate();
  return m;
}

std::unique_ptr<DarerModel> build_model(const RunConfig& run, const PreparedData& data) {
  const ModelConfig m = resolve_model_config(run, data);
  const std::uint64_t seed = run.init_seed != 0 ? run.init_seed : run.train.seed;
  WordVectors vectors;
  if (!run.word_vectors.empty()) vectors = load_word_vectors(run.word_vectors, m.d_word);
  const std::vector<double> init = embedding_matrix(data.vocab, vectors, m.d_word, seed);
  return std::make_unique<DarerModel>(m, seed, &init);
}

}  // namespace darer
