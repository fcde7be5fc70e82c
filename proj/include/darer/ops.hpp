#pragma once

#include <cstddef>
#include <random>
#include <span>
#include <utility>
#include <vector>

#include "darer/tensor.hpp"

namespace darer {

// Linear algebra
Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);

// Elementwise (shapes must match exactly)
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double s);
/// a[m x n] + bias[n], bias broadcast over rows.
Tensor add_bias(const Tensor& a, const Tensor& bias);

Tensor sigmoid(const Tensor& a);
Tensor tanh(const Tensor& a);
Tensor relu(const Tensor& a);
/// log(max(a, eps)); the gradient is zero where the clamp is active.
Tensor log_clamped(const Tensor& a, double eps);

// Reductions
Tensor sum(const Tensor& a);

// Normalization
Tensor softmax_rows(const Tensor& scores);
/// Row softmax where entries with mask false are treated as -inf. A row with
/// no surviving entry yields all zeros.
Tensor masked_softmax(const Tensor& scores, const BoolMatrix& mask);
/// Per-row layer normalization with learned gain and bias of width cols.
Tensor layer_norm(const Tensor& a, const Tensor& gain, const Tensor& bias, double eps = 1e-5);

// Shape manipulation
Tensor reshape(const Tensor& a, Shape shape);
Tensor slice_rows(const Tensor& a, std::size_t begin, std::size_t end);
Tensor slice_cols(const Tensor& a, std::size_t begin, std::size_t end);
Tensor concat_rows(const std::vector<Tensor>& parts);
Tensor concat_cols(const std::vector<Tensor>& parts);
/// Rows table[idx[0]], table[idx[1]], ...; gradient scatter-adds into table.
Tensor gather_rows(const Tensor& table, std::span<const std::size_t> idx);
/// out[i] = a[i][idx[i]]; shape {rows}.
/// rows x cols result with row idx[i] = src row i (duplicates accumulate), other rows zero.
Tensor scatter_rows(const Tensor& src, std::span<const std::size_t> idx, std::size_t rows);
Tensor pick(const Tensor& a, std::span<const std::size_t> idx);

/// Per-column maximum over rows; ties resolve to the earliest row.
Tensor max_pool_time(const Tensor& seq);

/// Inverted dropout. Identity when p == 0.
Tensor dropout(const Tensor& a, double p, std::mt19937_64& rng);

/// Weights of one LSTM direction. Gate order in the 4H axis: input, forget,
/// candidate, output.
struct LstmParams {
  Tensor w_x;   // d_in x 4H
  Tensor w_h;   // H x 4H
  Tensor bias;  // 4H

  std::size_t hidden() const { return w_h.rows(); }
  std::size_t input() const { return w_x.rows(); }
};

struct LstmState {
  Tensor h;  // 1 x H
  Tensor c;  // 1 x H
};

LstmParams make_lstm_params(std::size_t d_in, std::size_t hidden, std::mt19937_64& rng);
LstmState zero_lstm_state(std::size_t hidden);

/// One gated update. `x` is a 1 x d_in row (or rank-1 of d_in).
LstmState lstm_step(const Tensor& x, const LstmState& state, const LstmParams& params);
/// Same update given the precomputed input projection x * w_x (1 x 4H).
LstmState lstm_step_projected(const Tensor& x_proj, const LstmState& state,
                              const LstmParams& params);
/// Runs a direction over every row of `seq` (L x d_in) and returns L x H.
/// When `reverse` the rows are visited last to first; output rows stay
/// aligned with input rows.
Tensor lstm_sequence(const Tensor& seq, const LstmParams& params, bool reverse);

}  // namespace darer
