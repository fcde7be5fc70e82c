#pragma once

#include <array>
#include <cstddef>
#include <random>
#include <span>
#include <stdexcept>
#include <vector>

#include "darer/graphs.hpp"
#include "darer/ops.hpp"
#include "darer/tensor.hpp"

namespace darer {

class ContractError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Dropout settings for one forward pass. A null rng disables dropout.
struct DropoutContext {
  double ratio = 0.0;
  std::mt19937_64* rng = nullptr;

  bool active() const { return rng != nullptr && ratio > 0.0; }
  Tensor apply(const Tensor& x) const { return active() ? dropout(x, ratio, *rng) : x; }
};

/// Glorot-uniform matrix of shape rows x cols.
Tensor glorot(std::size_t rows, std::size_t cols, std::mt19937_64& rng);

// ---------------------------------------------------------------------------
// Bidirectional LSTM

struct BiLstmParams {
  LstmParams forward;
  LstmParams backward;
};

BiLstmParams make_bilstm_params(std::size_t d_in, std::size_t hidden, std::mt19937_64& rng);
/// L x d_in -> L x 2H, forward states in the first H columns.
Tensor bilstm(const Tensor& seq, const BiLstmParams& params);

// ---------------------------------------------------------------------------
// Utterance encoder: word BiLSTM + max-pool over time.

struct EncoderParams {
  Tensor word_embeddings;  // V x d_word
  BiLstmParams lstm;       // hidden = d / 2 per direction
};

EncoderParams make_encoder_params(std::size_t vocab_size, std::size_t d_word, std::size_t d,
                                  std::mt19937_64& rng);

/// One row per utterance (N x d). Each token list must be non-empty.
Tensor encode_utterances(std::span<const std::vector<std::size_t>> token_ids,
                         const EncoderParams& params);

// ---------------------------------------------------------------------------
// Relational graph convolution

struct RgcnParams {
  Tensor w_self;               // d x d
  std::vector<Tensor> w_rel;   // one d x d per relation id (index id - 1)
};

RgcnParams make_rgcn_params(std::size_t d, std::size_t num_relations, std::mt19937_64& rng);

/// out_i = h_i W_self + sum_r sum_{j in N_i^r} h_j W_rel^r / |N_i^r|.
Tensor rgcn_forward(const RelationalGraph& graph, const Tensor& h, const RgcnParams& params);

// ---------------------------------------------------------------------------
// Relational temporal transformer

struct ReTeFormerParams {
  std::vector<Tensor> w_q, w_k, w_v;  // per relation, d x d
  std::vector<Tensor> u_q, u_k;       // per relation, d_pos x d
  Tensor position_table;              // max_len x d_pos
  Tensor ln1_gain, ln1_bias;
  Tensor ff_w1, ff_b1;  // d x 4d, 4d
  Tensor ff_w2, ff_b2;  // 4d x d, d
  Tensor ln2_gain, ln2_bias;

  std::size_t num_relations() const { return w_q.size(); }
  std::size_t width() const { return w_q.front().rows(); }
  std::size_t max_len() const { return position_table.rows(); }
};

ReTeFormerParams make_reteformer_params(std::size_t d, std::size_t num_relations,
                                        std::size_t max_len, std::mt19937_64& rng);

/// Position embedding rows for the given node positions (M x d_pos).
Tensor position_embeddings(std::span<const std::size_t> positions, const ReTeFormerParams& params);

/// Unmasked correlation scores for relation `relation_id`: content and
/// position terms computed with separate projections, each scaled by
/// 1/sqrt(d), then summed.
Tensor reteformer_scores(const Tensor& h, std::span<const std::size_t> positions,
                         const ReTeFormerParams& params, int relation_id);

/// Relation-masked multi-head attention (one head per relation, outputs
/// summed) without the residual and feed-forward sublayers.
Tensor relational_attention(const RelationalGraph& graph, const Tensor& h,
                            const ReTeFormerParams& params, const DropoutContext& drop = {},
                            std::vector<Tensor>* attention = nullptr);

/// Full layer: attention -> add & norm -> feed-forward -> add & norm.
/// When `attention` is given it receives one M x M weight matrix per relation.
Tensor reteformer_forward(const RelationalGraph& graph, const Tensor& h,
                          const ReTeFormerParams& params, const DropoutContext& drop = {},
                          std::vector<Tensor>* attention = nullptr);

// ---------------------------------------------------------------------------
// Prediction-level interaction

struct LabelEmbeddings {
  Tensor sentiment;  // |C_s| x d
  Tensor act;        // |C_a| x d
};

LabelEmbeddings make_label_embeddings(std::size_t num_sentiments, std::size_t num_acts,
                                      std::size_t d, std::mt19937_64& rng);

/// P * M; each row of P must sum to 1 within 1e-6.
Tensor project_labels(const Tensor& distributions, const Tensor& label_matrix);

Tensor superimpose(const Tensor& h, const Tensor& e_s, const Tensor& e_a);

// ---------------------------------------------------------------------------
// Decoders and task-specific recurrent encoders

struct DecoderParams {
  Tensor weight;  // d x C
  Tensor bias;    // C
};

DecoderParams make_decoder_params(std::size_t d, std::size_t num_classes, std::mt19937_64& rng);
Tensor decode_logits(const Tensor& h, const DecoderParams& params);
/// Row-wise softmax(h W + b).
Tensor decode(const Tensor& h, const DecoderParams& params);

struct TsLstmParams {
  BiLstmParams lstm;  // hidden = d per direction
  Tensor proj_w;      // 2d x d
  Tensor proj_b;      // d
};

TsLstmParams make_ts_lstm_params(std::size_t d, std::mt19937_64& rng);
/// BiLSTM over the utterance sequence, projected back to width d.
Tensor ts_lstm(const Tensor& h, const TsLstmParams& params);

// ---------------------------------------------------------------------------
// Score decomposition between a sentiment node i and an act node j.

struct ScoreDecomposition {
  double direct = 0.0;
  /// Content bilinear terms in the order (h,h) (h,e_s) (h,e_a) (e_s,h)
  /// (e_s,e_s) (e_s,e_a) (e_a,h) (e_a,e_s) (e_a,e_a), then the position term.
  std::array<double, 10> terms{};
  double term_sum() const;
};

struct ScoreInputs {
  std::vector<double> h_s_i, h_a_j;
  std::vector<double> e_s_i, e_a_i;
  std::vector<double> e_s_j, e_a_j;
  std::vector<double> p_i, p_j;
};

ScoreDecomposition decompose_score(const ScoreInputs& in, const ReTeFormerParams& params,
                                   int relation_id);

}  // namespace darer
