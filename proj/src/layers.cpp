#include "darer/layers.hpp"

#include <cmath>
#include <string>

namespace darer {

Tensor glorot(std::size_t rows, std::size_t cols, std::mt19937_64& rng) {
  const double bound = std::sqrt(6.0 / static_cast<double>(rows + cols));
  return Tensor::uniform({rows, cols}, -bound, bound, rng, true);
}

BiLstmParams make_bilstm_params(std::size_t d_in, std::size_t hidden, std::mt19937_64& rng) {
  BiLstmParams p{make_lstm_params(d_in, hidden, rng), make_lstm_params(d_in, hidden, rng)};
  return p;
}

Tensor bilstm(const Tensor& seq, const BiLstmParams& params) {
  return concat_cols({lstm_sequence(seq, params.forward, false),
                      lstm_sequence(seq, params.backward, true)});
}

EncoderParams make_encoder_params(std::size_t vocab_size, std::size_t d_word, std::size_t d,
                                  std::mt19937_64& rng) {
  if (d % 2 != 0) throw ConfigError("encoder width must be even, got " + std::to_string(d));
  EncoderParams p;
  p.word_embeddings = Tensor::uniform({vocab_size, d_word}, -0.1, 0.1, rng, true);
  p.lstm = make_bilstm_params(d_word, d / 2, rng);
  return p;
}

Tensor encode_utterances(std::span<const std::vector<std::size_t>> token_ids,
                         const EncoderParams& params) {
  if (token_ids.empty()) throw DimensionError("encode_utterances: dialog has no utterances");
  std::vector<Tensor> rows;
  rows.reserve(token_ids.size());
  for (const auto& tokens : token_ids) {
    if (tokens.empty()) throw DimensionError("encode_utterances: empty utterance");
    Tensor words = gather_rows(params.word_embeddings, tokens);
    Tensor states = bilstm(words, params.lstm);
    Tensor pooled = max_pool_time(states);
    rows.push_back(reshape(pooled, {1, pooled.numel()}));
  }
  return concat_rows(rows);
}

RgcnParams make_rgcn_params(std::size_t d, std::size_t num_relations, std::mt19937_64& rng) {
  RgcnParams p;
  p.w_self = glorot(d, d, rng);
  for (std::size_t r = 0; r < num_relations; ++r) p.w_rel.push_back(glorot(d, d, rng));
  return p;
}

Tensor rgcn_forward(const RelationalGraph& graph, const Tensor& h, const RgcnParams& params) {
  const std::size_t m = graph.num_nodes;
  if (h.rows() != m || h.rank() != 2)
    throw DimensionError("rgcn_forward: " + shape_str(h.shape()) + " for a graph of " +
                         std::to_string(m) + " nodes");
  if (params.w_rel.size() != graph.num_relations)
    throw DimensionError("rgcn_forward: " + std::to_string(params.w_rel.size()) +
                         " relation weights for " + std::to_string(graph.num_relations) +
                         " relations");
  if (params.w_self.rows() != h.cols())
    throw DimensionError("rgcn_forward: weights " + shape_str(params.w_self.shape()) +
                         " for input " + shape_str(h.shape()));
  Tensor out = matmul(h, params.w_self);
  for (std::size_t r = 0; r < graph.num_relations; ++r) {
    const BoolMatrix& adj = graph.adjacency[r];
    if (adj.count() == 0) continue;
    // Row-normalized incoming adjacency.
    Tensor norm({m, m});
    auto v = norm.data();
    for (std::size_t i = 0; i < m; ++i) {
      std::size_t deg = 0;
      for (std::size_t j = 0; j < m; ++j) deg += adj(j, i) ? 1 : 0;
      if (deg == 0) continue;
      for (std::size_t j = 0; j < m; ++j)
        if (adj(j, i)) v[i * m + j] = 1.0 / static_cast<double>(deg);
    }
    out = add(out, matmul(norm, matmul(h, params.w_rel[r])));
  }
  return out;
}

ReTeFormerParams make_reteformer_params(std::size_t d, std::size_t num_relations,
                                        std::size_t max_len, std::mt19937_64& rng) {
  ReTeFormerParams p;
  for (std::size_t r = 0; r < num_relations; ++r) {
    p.w_q.push_back(glorot(d, d, rng));
    p.w_k.push_back(glorot(d, d, rng));
    p.w_v.push_back(glorot(d, d, rng));
    p.u_q.push_back(glorot(d, d, rng));
    p.u_k.push_back(glorot(d, d, rng));
  }
  p.position_table = Tensor::uniform({max_len, d}, -0.1, 0.1, rng, true);
  p.ln1_gain = Tensor::full({d}, 1.0, true);
  p.ln1_bias = Tensor::zeros({d}, true);
  p.ff_w1 = glorot(d, 4 * d, rng);
  p.ff_b1 = Tensor::zeros({4 * d}, true);
  p.ff_w2 = glorot(4 * d, d, rng);
  p.ff_b2 = Tensor::zeros({d}, true);
  p.ln2_gain = Tensor::full({d}, 1.0, true);
  p.ln2_bias = Tensor::zeros({d}, true);
  return p;
}

Tensor position_embeddings(std::span<const std::size_t> positions, const ReTeFormerParams& params) {
  for (auto p : positions)
    if (p >= params.max_len())
      throw ConfigError("position " + std::to_string(p) + " exceeds max_len " +
                        std::to_string(params.max_len()));
  return gather_rows(params.position_table, positions);
}

namespace {

double inv_sqrt(std::size_t d) { return 1.0 / std::sqrt(static_cast<double>(d)); }

// Scores of query rows (h_q, p_q) against key rows (h_k, p_k).
Tensor scores_between(const Tensor& h_q, const Tensor& p_q, const Tensor& h_k, const Tensor& p_k,
                      const ReTeFormerParams& params, std::size_t r) {
  const double s = inv_sqrt(params.width());
  Tensor content = matmul(matmul(h_q, params.w_q[r]), transpose(matmul(h_k, params.w_k[r])));
  Tensor position = matmul(matmul(p_q, params.u_q[r]), transpose(matmul(p_k, params.u_k[r])));
  return scale(add(content, position), s);
}

void check_relation(const ReTeFormerParams& params, int relation_id) {
  if (relation_id < 1 || static_cast<std::size_t>(relation_id) > params.num_relations())
    throw std::out_of_range("relation id " + std::to_string(relation_id) + " outside 1.." +
                            std::to_string(params.num_relations()));
}

}  // namespace

Tensor reteformer_scores(const Tensor& h, std::span<const std::size_t> positions,
                         const ReTeFormerParams& params, int relation_id) {
  check_relation(params, relation_id);
  if (h.rows() != positions.size())
    throw DimensionError("reteformer_scores: " + std::to_string(positions.size()) +
                         " positions for input " + shape_str(h.shape()));
  Tensor pos = position_embeddings(positions, params);
  return scores_between(h, pos, h, pos, params, static_cast<std::size_t>(relation_id - 1));
}

Tensor relational_attention(const RelationalGraph& graph, const Tensor& h,
                            const ReTeFormerParams& params, const DropoutContext& drop,
                            std::vector<Tensor>* attention) {
  const std::size_t m = graph.num_nodes;
  if (h.rows() != m || h.rank() != 2 || h.cols() != params.width())
    throw DimensionError("reteformer: input " + shape_str(h.shape()) + " for " + std::to_string(m) +
                         " nodes of width " + std::to_string(params.width()));
  if (params.num_relations() != graph.num_relations)
    throw DimensionError("reteformer: " + std::to_string(params.num_relations()) + " heads for " +
                         std::to_string(graph.num_relations) + " relations");
  if (attention) attention->clear();
  Tensor out;
  bool any = false;
  for (std::size_t r = 0; r < graph.num_relations; ++r) {
    // Only nodes that receive (rows) or send (columns) an edge of this
    // relation take part; every other entry of the weight matrix is 0.
    const BoolMatrix& adj = graph.adjacency[r];
    std::vector<std::size_t> tgt, src;
    for (std::size_t i = 0; i < m; ++i) {
      bool in = false, outgoing = false;
      for (std::size_t j = 0; j < m; ++j) {
        in = in || adj(j, i);
        outgoing = outgoing || adj(i, j);
      }
      if (in) tgt.push_back(i);
      if (outgoing) src.push_back(i);
    }
    if (tgt.empty()) {
      if (attention) attention->push_back(Tensor::zeros({m, m}));
      continue;
    }
    BoolMatrix mask(tgt.size(), src.size(), false);
    std::vector<std::size_t> pos_t, pos_s;
    for (std::size_t a = 0; a < tgt.size(); ++a) {
      pos_t.push_back(graph.node_position[tgt[a]]);
      for (std::size_t b = 0; b < src.size(); ++b) mask.set(a, b, adj(src[b], tgt[a]));
    }
    for (auto j : src) pos_s.push_back(graph.node_position[j]);
    Tensor h_t = gather_rows(h, tgt), h_s = gather_rows(h, src);
    Tensor scores = scores_between(h_t, position_embeddings(pos_t, params), h_s,
                                   position_embeddings(pos_s, params), params, r);
    Tensor alpha = masked_softmax(scores, mask);
    if (attention) {
      Tensor full = Tensor::zeros({m, m});
      for (std::size_t a = 0; a < tgt.size(); ++a)
        for (std::size_t b = 0; b < src.size(); ++b) full.data()[tgt[a] * m + src[b]] = alpha.at(a, b);
      attention->push_back(full);
    }
    Tensor head = scatter_rows(matmul(drop.apply(alpha), matmul(h_s, params.w_v[r])), tgt, m);
    out = any ? add(out, head) : head;
    any = true;
  }
  return any ? out : Tensor::zeros({m, params.width()});
}

Tensor reteformer_forward(const RelationalGraph& graph, const Tensor& h,
                          const ReTeFormerParams& params, const DropoutContext& drop,
                          std::vector<Tensor>* attention) {
  Tensor attn = relational_attention(graph, h, params, drop, attention);
  Tensor x1 = layer_norm(add(h, attn), params.ln1_gain, params.ln1_bias);
  Tensor ff = add_bias(matmul(relu(add_bias(matmul(x1, params.ff_w1), params.ff_b1)), params.ff_w2),
                       params.ff_b2);
  return layer_norm(add(x1, ff), params.ln2_gain, params.ln2_bias);
}

LabelEmbeddings make_label_embeddings(std::size_t num_sentiments, std::size_t num_acts,
                                      std::size_t d, std::mt19937_64& rng) {
  return {glorot(num_sentiments, d, rng), glorot(num_acts, d, rng)};
}

Tensor project_labels(const Tensor& distributions, const Tensor& label_matrix) {
  if (distributions.cols() != label_matrix.rows())
    throw DimensionError("project_labels: distributions " + shape_str(distributions.shape()) +
                         " vs label embeddings " + shape_str(label_matrix.shape()));
  for (std::size_t i = 0; i < distributions.rows(); ++i) {
    double s = 0.0;
    for (std::size_t k = 0; k < distributions.cols(); ++k) s += distributions.at(i, k);
    if (std::abs(s - 1.0) > 1e-6)
      throw ContractError("project_labels: row " + std::to_string(i) + " sums to " + std::to_string(s));
  }
  return matmul(distributions, label_matrix);
}

Tensor superimpose(const Tensor& h, const Tensor& e_s, const Tensor& e_a) {
  return add(add(h, e_s), e_a);
}

DecoderParams make_decoder_params(std::size_t d, std::size_t num_classes, std::mt19937_64& rng) {
  return {glorot(d, num_classes, rng), Tensor::zeros({num_classes}, true)};
}

Tensor decode_logits(const Tensor& h, const DecoderParams& params) {
  return add_bias(matmul(h, params.weight), params.bias);
}

Tensor decode(const Tensor& h, const DecoderParams& params) {
  return softmax_rows(decode_logits(h, params));
}

TsLstmParams make_ts_lstm_params(std::size_t d, std::mt19937_64& rng) {
  TsLstmParams p;
  p.lstm = make_bilstm_params(d, d, rng);
  p.proj_w = glorot(2 * d, d, rng);
  p.proj_b = Tensor::zeros({d}, true);
  return p;
}

Tensor ts_lstm(const Tensor& h, const TsLstmParams& params) {
  return add_bias(matmul(bilstm(h, params.lstm), params.proj_w), params.proj_b);
}

double ScoreDecomposition::term_sum() const {
  double s = 0.0;
  for (double t : terms) s += t;
  return s;
}

namespace {

// x A B^T y^T / sqrt(d) for row vectors x (into A) and y (into B).
double bilinear(std::span<const double> x, const Tensor& a, std::span<const double> y, const Tensor& b) {
  const std::size_t din = a.rows(), dout = a.cols();
  double s = 0.0;
  for (std::size_t c = 0; c < dout; ++c) {
    double qx = 0.0, ky = 0.0;
    for (std::size_t k = 0; k < din; ++k) {
      qx += x[k] * a.at(k, c);
      ky += y[k] * b.at(k, c);
    }
    s += qx * ky;
  }
  return s * inv_sqrt(dout);
}

std::vector<double> add3(const std::vector<double>& a, const std::vector<double>& b,
                         const std::vector<double>& c) {
  std::vector<double> r(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) r[i] = a[i] + b[i] + c[i];
  return r;
}

}  // namespace

ScoreDecomposition decompose_score(const ScoreInputs& in, const ReTeFormerParams& params,
                                   int relation_id) {
  check_relation(params, relation_id);
  const auto r = static_cast<std::size_t>(relation_id - 1);
  const Tensor& wq = params.w_q[r];
  const Tensor& wk = params.w_k[r];
  const std::size_t d = params.width();
  for (const auto* v : {&in.h_s_i, &in.h_a_j, &in.e_s_i, &in.e_a_i, &in.e_s_j, &in.e_a_j})
    if (v->size() != d) throw DimensionError("decompose_score: vector width " + std::to_string(v->size()));
  if (in.p_i.size() != params.u_q[r].rows() || in.p_j.size() != params.u_k[r].rows())
    throw DimensionError("decompose_score: position width mismatch");

  ScoreDecomposition out;
  // Direct score through the tensor path on the superimposed inputs.
  auto row = [](const std::vector<double>& v) { return Tensor({1, v.size()}, v); };
  const Tensor q_in = row(add3(in.h_s_i, in.e_s_i, in.e_a_i));
  const Tensor k_in = row(add3(in.h_a_j, in.e_s_j, in.e_a_j));
  const Tensor content = matmul(matmul(q_in, wq), transpose(matmul(k_in, wk)));
  const Tensor pos = matmul(matmul(row(in.p_i), params.u_q[r]), transpose(matmul(row(in.p_j), params.u_k[r])));
  out.direct = (content.item() + pos.item()) * inv_sqrt(d);

  const std::array<const std::vector<double>*, 3> left{&in.h_s_i, &in.e_s_i, &in.e_a_i};
  const std::array<const std::vector<double>*, 3> right{&in.h_a_j, &in.e_s_j, &in.e_a_j};
  std::size_t t = 0;
  for (const auto* x : left)
    for (const auto* y : right) out.terms[t++] = bilinear(*x, wq, *y, wk);
  out.terms[9] = bilinear(in.p_i, params.u_q[r], in.p_j, params.u_k[r]);
  return out;
}

}  // namespace darer
