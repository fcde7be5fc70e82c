#pragma once

// Naive reference implementations used by unit and acceptance tests. They
// work on plain nested vectors, visit one edge at a time and share no code
// with the library's tensor kernels.

#include <cmath>
#include <cstddef>
#include <vector>

#include "darer/graphs.hpp"
#include "darer/layers.hpp"
#include "darer/tensor.hpp"

namespace darer::oracle {

using Mat = std::vector<std::vector<double>>;

inline Mat to_mat(const Tensor& t) {
  Mat m(t.rows(), std::vector<double>(t.cols()));
  for (std::size_t i = 0; i < t.rows(); ++i)
    for (std::size_t j = 0; j < t.cols(); ++j) m[i][j] = t.at(i, j);
  return m;
}

inline std::vector<double> to_vec(const Tensor& t) {
  return std::vector<double>(t.data().begin(), t.data().end());
}

// Row vector x times matrix w.
inline std::vector<double> vecmat(const std::vector<double>& x, const Mat& w) {
  std::vector<double> out(w.front().size(), 0.0);
  for (std::size_t k = 0; k < x.size(); ++k)
    for (std::size_t c = 0; c < out.size(); ++c) out[c] += x[k] * w[k][c];
  return out;
}

inline double dot(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) s += a[k] * b[k];
  return s;
}

inline void axpy(double alpha, const std::vector<double>& x, std::vector<double>& y) {
  for (std::size_t k = 0; k < x.size(); ++k) y[k] += alpha * x[k];
}

inline std::vector<double> layer_norm(const std::vector<double>& x, const std::vector<double>& g,
                                      const std::vector<double>& b, double eps = 1e-5) {
  double mean = 0.0;
  for (double v : x) mean += v;
  mean /= static_cast<double>(x.size());
  double var = 0.0;
  for (double v : x) var += (v - mean) * (v - mean);
  var /= static_cast<double>(x.size());
  std::vector<double> out(x.size());
  for (std::size_t k = 0; k < x.size(); ++k) out[k] = g[k] * (x[k] - mean) / std::sqrt(var + eps) + b[k];
  return out;
}

/// out_i = h_i W_self + sum over relations of the mean of h_j W_r over
/// edges j -> i of that relation.
inline Mat rgcn(const RelationalGraph& g, const Mat& h, const RgcnParams& p) {
  const Mat w_self = to_mat(p.w_self);
  Mat out;
  for (std::size_t i = 0; i < g.num_nodes; ++i) out.push_back(vecmat(h[i], w_self));
  for (std::size_t r = 0; r < g.num_relations; ++r) {
    const Mat w = to_mat(p.w_rel[r]);
    for (std::size_t i = 0; i < g.num_nodes; ++i) {
      std::vector<std::size_t> nbrs;
      for (std::size_t j = 0; j < g.num_nodes; ++j)
        if (g.adjacency[r](j, i)) nbrs.push_back(j);
      for (auto j : nbrs) axpy(1.0 / static_cast<double>(nbrs.size()), vecmat(h[j], w), out[i]);
    }
  }
  return out;
}

/// Full relational transformer layer computed edge by edge.
inline Mat reteformer(const RelationalGraph& g, const Mat& h, const ReTeFormerParams& p) {
  const std::size_t m = g.num_nodes, d = h.front().size();
  const double scale = 1.0 / std::sqrt(static_cast<double>(d));
  const Mat table = to_mat(p.position_table);
  Mat attn(m, std::vector<double>(d, 0.0));
  for (std::size_t r = 0; r < g.num_relations; ++r) {
    const Mat wq = to_mat(p.w_q[r]), wk = to_mat(p.w_k[r]), wv = to_mat(p.w_v[r]);
    const Mat uq = to_mat(p.u_q[r]), uk = to_mat(p.u_k[r]);
    for (std::size_t i = 0; i < m; ++i) {
      std::vector<std::size_t> nbrs;
      std::vector<double> score;
      for (std::size_t j = 0; j < m; ++j) {
        if (!g.adjacency[r](j, i)) continue;
        const double content = dot(vecmat(h[i], wq), vecmat(h[j], wk));
        const double position =
            dot(vecmat(table[g.node_position[i]], uq), vecmat(table[g.node_position[j]], uk));
        nbrs.push_back(j);
        score.push_back((content + position) * scale);
      }
      if (nbrs.empty()) continue;
      double mx = score.front();
      for (double s : score) mx = std::max(mx, s);
      double z = 0.0;
      for (double& s : score) z += (s = std::exp(s - mx));
      for (std::size_t e = 0; e < nbrs.size(); ++e) axpy(score[e] / z, vecmat(h[nbrs[e]], wv), attn[i]);
    }
  }
  const auto g1 = to_vec(p.ln1_gain), b1 = to_vec(p.ln1_bias);
  const auto g2 = to_vec(p.ln2_gain), b2 = to_vec(p.ln2_bias);
  const Mat w1 = to_mat(p.ff_w1), w2 = to_mat(p.ff_w2);
  const auto fb1 = to_vec(p.ff_b1), fb2 = to_vec(p.ff_b2);
  Mat out;
  for (std::size_t i = 0; i < m; ++i) {
    std::vector<double> x(d);
    for (std::size_t k = 0; k < d; ++k) x[k] = h[i][k] + attn[i][k];
    x = layer_norm(x, g1, b1);
    std::vector<double> hid = vecmat(x, w1);
    for (std::size_t k = 0; k < hid.size(); ++k) hid[k] = std::max(0.0, hid[k] + fb1[k]);
    std::vector<double> ff = vecmat(hid, w2);
    for (std::size_t k = 0; k < d; ++k) ff[k] += fb2[k] + x[k];
    out.push_back(layer_norm(ff, g2, b2));
  }
  return out;
}

inline double max_abs_diff(const Tensor& t, const Mat& m) {
  double worst = 0.0;
  for (std::size_t i = 0; i < m.size(); ++i)
    for (std::size_t j = 0; j < m[i].size(); ++j) worst = std::max(worst, std::abs(t.at(i, j) - m[i][j]));
  return worst;
}

/// Macro F1 from a confusion count, classes without gold or predictions
/// scoring 0.
inline double macro_f1(const std::vector<std::size_t>& gold, const std::vector<std::size_t>& pred,
                       std::size_t classes) {
  double total = 0.0;
  for (std::size_t c = 0; c < classes; ++c) {
    double tp = 0, fp = 0, fn = 0;
    for (std::size_t i = 0; i < gold.size(); ++i) {
      tp += gold[i] == c && pred[i] == c;
      fp += gold[i] != c && pred[i] == c;
      fn += gold[i] == c && pred[i] != c;
    }
    total += tp == 0 ? 0.0 : 2 * tp / (2 * tp + fp + fn);
  }
  return total / static_cast<double>(classes);
}

}  // namespace darer::oracle
