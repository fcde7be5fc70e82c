#include "darer/ops.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <limits>

namespace darer {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapC = Eigen::Map<const RowMat>;
using MapM = Eigen::Map<RowMat>;

MapC view(std::span<const double> s, std::size_t r, std::size_t c) {
  return MapC(s.data(), static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
}
MapM view(std::span<double> s, std::size_t r, std::size_t c) {
  return MapM(s.data(), static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
}

void require_same(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape())
    throw DimensionError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " +
                         shape_str(b.shape()));
}

Tensor like(const Tensor& a) { return Tensor(a.shape()); }

// Applies f elementwise; df(x, y) is the local derivative given input x and output y.
template <typename F, typename DF>
Tensor unary(const Tensor& a, F f, DF df) {
  Tensor out = like(a);
  auto in = a.data();
  auto o = out.data();
  for (std::size_t i = 0; i < in.size(); ++i) o[i] = f(in[i]);
  record_op(out, {&a}, [a, out, df](std::span<const double> g) mutable {
    auto ga = a.grad_storage();
    auto x = a.data();
    auto y = out.data();
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * df(x[i], y[i]);
  });
  return out;
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.rank() > 2 || b.rank() > 2 || a.rank() == 0 || b.rank() == 0 || a.cols() != b.rows())
    throw DimensionError("matmul: incompatible shapes " + shape_str(a.shape()) + " and " +
                         shape_str(b.shape()));
  const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
  Tensor out({m, n});
  view(out.data(), m, n).noalias() = view(a.data(), m, k) * view(b.data(), k, n);
  record_op(out, {&a, &b}, [a, b, m, k, n](std::span<const double> g) mutable {
    auto G = view(g, m, n);
    if (a.requires_grad()) view(a.grad_storage(), m, k).noalias() += G * view(b.data(), k, n).transpose();
    if (b.requires_grad()) view(b.grad_storage(), k, n).noalias() += view(a.data(), m, k).transpose() * G;
  });
  return out;
}

Tensor transpose(const Tensor& a) {
  const std::size_t m = a.rows(), n = a.cols();
  Tensor out({n, m});
  view(out.data(), n, m) = view(a.data(), m, n).transpose();
  record_op(out, {&a}, [a, m, n](std::span<const double> g) mutable {
    view(a.grad_storage(), m, n) += view(g, n, m).transpose();
  });
  return out;
}

Tensor add(const Tensor& a, const Tensor& b) {
  require_same(a, b, "add");
  Tensor out = like(a);
  auto o = out.data();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] = a.at(i) + b.at(i);
  record_op(out, {&a, &b}, [a, b](std::span<const double> g) mutable {
    if (a.requires_grad()) {
      auto ga = a.grad_storage();
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
    }
    if (b.requires_grad()) {
      auto gb = b.grad_storage();
      for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i];
    }
  });
  return out;
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_same(a, b, "sub");
  Tensor out = like(a);
  auto o = out.data();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] = a.at(i) - b.at(i);
  record_op(out, {&a, &b}, [a, b](std::span<const double> g) mutable {
    if (a.requires_grad()) {
      auto ga = a.grad_storage();
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
    }
    if (b.requires_grad()) {
      auto gb = b.grad_storage();
      for (std::size_t i = 0; i < g.size(); ++i) gb[i] -= g[i];
    }
  });
  return out;
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same(a, b, "mul");
  Tensor out = like(a);
  auto o = out.data();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] = a.at(i) * b.at(i);
  record_op(out, {&a, &b}, [a, b](std::span<const double> g) mutable {
    if (a.requires_grad()) {
      auto ga = a.grad_storage();
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * b.at(i);
    }
    if (b.requires_grad()) {
      auto gb = b.grad_storage();
      for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * a.at(i);
    }
  });
  return out;
}

Tensor scale(const Tensor& a, double s) {
  return unary(a, [s](double x) { return s * x; }, [s](double, double) { return s; });
}

Tensor add_bias(const Tensor& a, const Tensor& bias) {
  const std::size_t m = a.rows(), n = a.cols();
  if (bias.numel() != n)
    throw DimensionError("add_bias: bias " + shape_str(bias.shape()) + " does not match " +
                         shape_str(a.shape()));
  Tensor out = like(a);
  auto o = out.data();
  auto x = a.data();
  auto bv = bias.data();
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) o[i * n + j] = x[i * n + j] + bv[j];
  record_op(out, {&a, &bias}, [a, bias, m, n](std::span<const double> g) mutable {
    if (a.requires_grad()) {
      auto ga = a.grad_storage();
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
    }
    if (bias.requires_grad()) {
      auto gb = bias.grad_storage();
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) gb[j] += g[i * n + j];
    }
  });
  return out;
}

Tensor sigmoid(const Tensor& a) {
  return unary(
      a, [](double x) { return 1.0 / (1.0 + std::exp(-x)); },
      [](double, double y) { return y * (1.0 - y); });
}

Tensor tanh(const Tensor& a) {
  return unary(
      a, [](double x) { return std::tanh(x); }, [](double, double y) { return 1.0 - y * y; });
}

Tensor relu(const Tensor& a) {
  return unary(
      a, [](double x) { return x > 0.0 ? x : 0.0; },
      [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

Tensor log_clamped(const Tensor& a, double eps) {
  return unary(
      a, [eps](double x) { return std::log(std::max(x, eps)); },
      [eps](double x, double) { return x > eps ? 1.0 / x : 0.0; });
}

Tensor sum(const Tensor& a) {
  double s = 0.0;
  for (double x : a.data()) s += x;
  Tensor out = Tensor::scalar(s);
  record_op(out, {&a}, [a](std::span<const double> g) mutable {
    auto ga = a.grad_storage();
    for (auto& x : ga) x += g[0];
  });
  return out;
}

namespace {

// Shared backward for row-softmax: dx = y * (g - <g, y>) per row.
void softmax_backward(std::span<const double> g, std::span<const double> y, std::span<double> gx,
                      std::size_t m, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    double dot = 0.0;
    for (std::size_t j = 0; j < n; ++j) dot += g[i * n + j] * y[i * n + j];
    for (std::size_t j = 0; j < n; ++j) gx[i * n + j] += y[i * n + j] * (g[i * n + j] - dot);
  }
}

}  // namespace

Tensor softmax_rows(const Tensor& scores) {
  const std::size_t m = scores.rows(), n = scores.cols();
  Tensor out = like(scores);
  auto x = scores.data();
  auto y = out.data();
  for (std::size_t i = 0; i < m; ++i) {
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < n; ++j) mx = std::max(mx, x[i * n + j]);
    double z = 0.0;
    for (std::size_t j = 0; j < n; ++j) z += (y[i * n + j] = std::exp(x[i * n + j] - mx));
    for (std::size_t j = 0; j < n; ++j) y[i * n + j] /= z;
  }
  record_op(out, {&scores}, [scores, out, m, n](std::span<const double> g) mutable {
    softmax_backward(g, out.data(), scores.grad_storage(), m, n);
  });
  return out;
}

Tensor masked_softmax(const Tensor& scores, const BoolMatrix& mask) {
  const std::size_t m = scores.rows(), n = scores.cols();
  if (scores.rank() != 2 || mask.rows() != m || mask.cols() != n)
    throw DimensionError("masked_softmax: mask [" + std::to_string(mask.rows()) + "x" +
                         std::to_string(mask.cols()) + "] does not match scores " +
                         shape_str(scores.shape()));
  Tensor out = like(scores);
  auto x = scores.data();
  auto y = out.data();
  for (std::size_t i = 0; i < m; ++i) {
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < n; ++j)
      if (mask(i, j)) mx = std::max(mx, x[i * n + j]);
    if (!std::isfinite(mx)) continue;  // fully masked row stays zero
    double z = 0.0;
    for (std::size_t j = 0; j < n; ++j)
      if (mask(i, j)) z += (y[i * n + j] = std::exp(x[i * n + j] - mx));
    for (std::size_t j = 0; j < n; ++j) y[i * n + j] /= z;
  }
  // Masked entries have y == 0, so the generic backward routes nothing to them.
  record_op(out, {&scores}, [scores, out, m, n](std::span<const double> g) mutable {
    softmax_backward(g, out.data(), scores.grad_storage(), m, n);
  });
  return out;
}

Tensor layer_norm(const Tensor& a, const Tensor& gain, const Tensor& bias, double eps) {
  const std::size_t m = a.rows(), n = a.cols();
  if (gain.numel() != n || bias.numel() != n)
    throw DimensionError("layer_norm: gain/bias width does not match " + shape_str(a.shape()));
  Tensor out = like(a);
  auto x = a.data();
  auto y = out.data();
  std::vector<double> xhat(m * n), inv_std(m);
  for (std::size_t i = 0; i < m; ++i) {
    double mean = 0.0;
    for (std::size_t j = 0; j < n; ++j) mean += x[i * n + j];
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (std::size_t j = 0; j < n; ++j) var += (x[i * n + j] - mean) * (x[i * n + j] - mean);
    var /= static_cast<double>(n);
    inv_std[i] = 1.0 / std::sqrt(var + eps);
    for (std::size_t j = 0; j < n; ++j) {
      xhat[i * n + j] = (x[i * n + j] - mean) * inv_std[i];
      y[i * n + j] = xhat[i * n + j] * gain.at(j) + bias.at(j);
    }
  }
  record_op(out, {&a, &gain, &bias},
            [a, gain, bias, m, n, xhat = std::move(xhat), inv_std = std::move(inv_std)](
                std::span<const double> g) mutable {
              if (gain.requires_grad()) {
                auto gg = gain.grad_storage();
                for (std::size_t i = 0; i < m; ++i)
                  for (std::size_t j = 0; j < n; ++j) gg[j] += g[i * n + j] * xhat[i * n + j];
              }
              if (bias.requires_grad()) {
                auto gb = bias.grad_storage();
                for (std::size_t i = 0; i < m; ++i)
                  for (std::size_t j = 0; j < n; ++j) gb[j] += g[i * n + j];
              }
              if (a.requires_grad()) {
                auto ga = a.grad_storage();
                const double dn = static_cast<double>(n);
                for (std::size_t i = 0; i < m; ++i) {
                  double s1 = 0.0, s2 = 0.0;
                  for (std::size_t j = 0; j < n; ++j) {
                    double dxh = g[i * n + j] * gain.at(j);
                    s1 += dxh;
                    s2 += dxh * xhat[i * n + j];
                  }
                  for (std::size_t j = 0; j < n; ++j) {
                    double dxh = g[i * n + j] * gain.at(j);
                    ga[i * n + j] += inv_std[i] / dn * (dn * dxh - s1 - xhat[i * n + j] * s2);
                  }
                }
              }
            });
  return out;
}

Tensor reshape(const Tensor& a, Shape shape) {
  if (shape_numel(shape) != a.numel())
    throw DimensionError("reshape: " + shape_str(a.shape()) + " to " + shape_str(shape));
  Tensor out(std::move(shape), a.values());
  record_op(out, {&a}, [a](std::span<const double> g) mutable {
    auto ga = a.grad_storage();
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
  });
  return out;
}

Tensor slice_rows(const Tensor& a, std::size_t begin, std::size_t end) {
  const std::size_t m = a.rows(), n = a.cols();
  if (begin >= end || end > m)
    throw DimensionError("slice_rows: [" + std::to_string(begin) + "," + std::to_string(end) +
                         ") out of " + shape_str(a.shape()));
  auto src = a.data();
  std::vector<double> v(src.begin() + static_cast<std::ptrdiff_t>(begin * n),
                        src.begin() + static_cast<std::ptrdiff_t>(end * n));
  Tensor out({end - begin, n}, std::move(v));
  record_op(out, {&a}, [a, begin, n](std::span<const double> g) mutable {
    auto ga = a.grad_storage();
    for (std::size_t i = 0; i < g.size(); ++i) ga[begin * n + i] += g[i];
  });
  return out;
}

Tensor slice_cols(const Tensor& a, std::size_t begin, std::size_t end) {
  const std::size_t m = a.rows(), n = a.cols();
  if (begin >= end || end > n)
    throw DimensionError("slice_cols: [" + std::to_string(begin) + "," + std::to_string(end) +
                         ") out of " + shape_str(a.shape()));
  const std::size_t w = end - begin;
  Tensor out({m, w});
  auto src = a.data();
  auto o = out.data();
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < w; ++j) o[i * w + j] = src[i * n + begin + j];
  record_op(out, {&a}, [a, begin, m, n, w](std::span<const double> g) mutable {
    auto ga = a.grad_storage();
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < w; ++j) ga[i * n + begin + j] += g[i * w + j];
  });
  return out;
}

Tensor concat_rows(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw DimensionError("concat_rows: no inputs");
  const std::size_t n = parts.front().cols();
  std::size_t m = 0;
  for (const auto& p : parts) {
    if (p.cols() != n)
      throw DimensionError("concat_rows: width mismatch " + shape_str(parts.front().shape()) +
                           " vs " + shape_str(p.shape()));
    m += p.rows();
  }
  std::vector<double> v;
  v.reserve(m * n);
  for (const auto& p : parts) v.insert(v.end(), p.data().begin(), p.data().end());
  Tensor out({m, n}, std::move(v));
  record_op(out, parts, [parts](std::span<const double> g) mutable {
    std::size_t off = 0;
    for (auto& p : parts) {
      if (p.requires_grad()) {
        auto gp = p.grad_storage();
        for (std::size_t i = 0; i < gp.size(); ++i) gp[i] += g[off + i];
      }
      off += p.numel();
    }
  });
  return out;
}

Tensor concat_cols(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw DimensionError("concat_cols: no inputs");
  const std::size_t m = parts.front().rows();
  std::size_t n = 0;
  for (const auto& p : parts) {
    if (p.rows() != m)
      throw DimensionError("concat_cols: height mismatch " + shape_str(parts.front().shape()) +
                           " vs " + shape_str(p.shape()));
    n += p.cols();
  }
  Tensor out({m, n});
  auto o = out.data();
  std::size_t off = 0;
  for (const auto& p : parts) {
    const std::size_t w = p.cols();
    auto s = p.data();
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < w; ++j) o[i * n + off + j] = s[i * w + j];
    off += w;
  }
  record_op(out, parts, [parts, m, n](std::span<const double> g) mutable {
    std::size_t off = 0;
    for (auto& p : parts) {
      const std::size_t w = p.cols();
      if (p.requires_grad()) {
        auto gp = p.grad_storage();
        for (std::size_t i = 0; i < m; ++i)
          for (std::size_t j = 0; j < w; ++j) gp[i * w + j] += g[i * n + off + j];
      }
      off += w;
    }
  });
  return out;
}

Tensor gather_rows(const Tensor& table, std::span<const std::size_t> idx) {
  const std::size_t rows = table.rows(), n = table.cols();
  if (idx.empty()) throw DimensionError("gather_rows: empty index list");
  Tensor out({idx.size(), n});
  auto o = out.data();
  auto t = table.data();
  for (std::size_t i = 0; i < idx.size(); ++i) {
    if (idx[i] >= rows)
      throw DimensionError("gather_rows: index " + std::to_string(idx[i]) + " out of " +
                           shape_str(table.shape()));
    std::copy_n(t.begin() + static_cast<std::ptrdiff_t>(idx[i] * n), n,
                o.begin() + static_cast<std::ptrdiff_t>(i * n));
  }
  std::vector<std::size_t> ix(idx.begin(), idx.end());
  record_op(out, {&table}, [table, ix = std::move(ix), n](std::span<const double> g) mutable {
    auto gt = table.grad_storage();
    for (std::size_t i = 0; i < ix.size(); ++i)
      for (std::size_t j = 0; j < n; ++j) gt[ix[i] * n + j] += g[i * n + j];
  });
  return out;
}

Tensor scatter_rows(const Tensor& src, std::span<const std::size_t> idx, std::size_t rows) {
  const std::size_t n = src.cols();
  if (idx.size() != src.rows())
    throw DimensionError("scatter_rows: " + std::to_string(idx.size()) + " indices for " +
                         shape_str(src.shape()));
  Tensor out = Tensor::zeros({rows, n});
  auto o = out.data();
  auto x = src.data();
  for (std::size_t i = 0; i < idx.size(); ++i) {
    if (idx[i] >= rows)
      throw DimensionError("scatter_rows: index " + std::to_string(idx[i]) + " out of " + std::to_string(rows));
    for (std::size_t j = 0; j < n; ++j) o[idx[i] * n + j] += x[i * n + j];
  }
  std::vector<std::size_t> ix(idx.begin(), idx.end());
  record_op(out, {&src}, [src, ix = std::move(ix), n](std::span<const double> g) mutable {
    auto gs = src.grad_storage();
    for (std::size_t i = 0; i < ix.size(); ++i)
      for (std::size_t j = 0; j < n; ++j) gs[i * n + j] += g[ix[i] * n + j];
  });
  return out;
}

Tensor pick(const Tensor& a, std::span<const std::size_t> idx) {
  const std::size_t m = a.rows(), n = a.cols();
  if (idx.size() != m)
    throw DimensionError("pick: " + std::to_string(idx.size()) + " indices for " + shape_str(a.shape()));
  Tensor out({m});
  auto o = out.data();
  for (std::size_t i = 0; i < m; ++i) {
    if (idx[i] >= n) throw DimensionError("pick: column " + std::to_string(idx[i]) + " out of range");
    o[i] = a.at(i, idx[i]);
  }
  std::vector<std::size_t> ix(idx.begin(), idx.end());
  record_op(out, {&a}, [a, ix = std::move(ix), n](std::span<const double> g) mutable {
    auto ga = a.grad_storage();
    for (std::size_t i = 0; i < ix.size(); ++i) ga[i * n + ix[i]] += g[i];
  });
  return out;
}

Tensor max_pool_time(const Tensor& seq) {
  if (seq.rank() == 2 && seq.rows() == 0) throw DimensionError("max_pool_time: empty sequence");
  const std::size_t L = seq.rows(), d = seq.cols();
  Tensor out({d});
  std::vector<std::size_t> arg(d, 0);
  auto s = seq.data();
  auto o = out.data();
  for (std::size_t j = 0; j < d; ++j) {
    double best = s[j];
    for (std::size_t t = 1; t < L; ++t)
      if (s[t * d + j] > best) {
        best = s[t * d + j];
        arg[j] = t;
      }
    o[j] = best;
  }
  record_op(out, {&seq}, [seq, arg = std::move(arg), d](std::span<const double> g) mutable {
    auto gs = seq.grad_storage();
    for (std::size_t j = 0; j < d; ++j) gs[arg[j] * d + j] += g[j];
  });
  return out;
}

Tensor dropout(const Tensor& a, double p, std::mt19937_64& rng) {
  if (p <= 0.0) return a;
  if (p >= 1.0) throw ConfigError("dropout ratio must be < 1");
  std::bernoulli_distribution keep(1.0 - p);
  const double inv = 1.0 / (1.0 - p);
  std::vector<double> m(a.numel());
  for (auto& x : m) x = keep(rng) ? inv : 0.0;
  Tensor out = like(a);
  auto o = out.data();
  for (std::size_t i = 0; i < m.size(); ++i) o[i] = a.at(i) * m[i];
  record_op(out, {&a}, [a, m = std::move(m)](std::span<const double> g) mutable {
    auto ga = a.grad_storage();
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * m[i];
  });
  return out;
}

LstmParams make_lstm_params(std::size_t d_in, std::size_t hidden, std::mt19937_64& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(hidden));
  LstmParams p{Tensor::uniform({d_in, 4 * hidden}, -bound, bound, rng, true),
               Tensor::uniform({hidden, 4 * hidden}, -bound, bound, rng, true),
               Tensor::zeros({4 * hidden}, true)};
  // Forget-gate bias starts at 1.
  auto b = p.bias.data();
  for (std::size_t j = hidden; j < 2 * hidden; ++j) b[j] = 1.0;
  return p;
}

LstmState zero_lstm_state(std::size_t hidden) {
  return {Tensor::zeros({1, hidden}), Tensor::zeros({1, hidden})};
}

LstmState lstm_step_projected(const Tensor& x_proj, const LstmState& state, const LstmParams& params) {
  const std::size_t H = params.hidden();
  if (x_proj.numel() != 4 * H || state.h.numel() != H || state.c.numel() != H)
    throw DimensionError("lstm_step: state/projection sizes do not match hidden width " +
                         std::to_string(H));
  Tensor z = add_bias(add(reshape(x_proj, {1, 4 * H}), matmul(state.h, params.w_h)), params.bias);
  Tensor i = sigmoid(slice_cols(z, 0, H));
  Tensor f = sigmoid(slice_cols(z, H, 2 * H));
  Tensor g = tanh(slice_cols(z, 2 * H, 3 * H));
  Tensor o = sigmoid(slice_cols(z, 3 * H, 4 * H));
  Tensor c = add(mul(f, reshape(state.c, {1, H})), mul(i, g));
  Tensor h = mul(o, tanh(c));
  return {h, c};
}

LstmState lstm_step(const Tensor& x, const LstmState& state, const LstmParams& params) {
  if (x.numel() != params.input())
    throw DimensionError("lstm_step: input " + shape_str(x.shape()) + " vs weights " +
                         shape_str(params.w_x.shape()));
  return lstm_step_projected(matmul(reshape(x, {1, x.numel()}), params.w_x), state, params);
}

Tensor lstm_sequence(const Tensor& seq, const LstmParams& params, bool reverse) {
  const std::size_t L = seq.rows(), D = params.input(), H = params.hidden(), G = 4 * H;
  if (seq.cols() != D)
    throw DimensionError("lstm_sequence: input " + shape_str(seq.shape()) + " vs weights " +
                         shape_str(params.w_x.shape()));

  // Gate activations (i, f, g, o), cell states and previous hidden states
  // are kept per row for the backward pass.
  auto gates = std::make_shared<RowMat>(L, G);
  auto cells = std::make_shared<RowMat>(L, H);
  auto prev_h = std::make_shared<RowMat>(L, H);
  auto prev_c = std::make_shared<RowMat>(L, H);
  gates->noalias() = view(seq.data(), L, D) * view(params.w_x.data(), D, G);
  gates->rowwise() += Eigen::Map<const Eigen::RowVectorXd>(params.bias.data().data(), static_cast<Eigen::Index>(G));
  const auto Wh = view(params.w_h.data(), H, G);

  Tensor out({L, H});
  auto Hout = view(out.data(), L, H);
  Eigen::RowVectorXd h = Eigen::RowVectorXd::Zero(static_cast<Eigen::Index>(H));
  Eigen::RowVectorXd c = Eigen::RowVectorXd::Zero(static_cast<Eigen::Index>(H));
  const auto n = static_cast<Eigen::Index>(H);
  auto sig = [](double x) { return 1.0 / (1.0 + std::exp(-x)); };
  for (std::size_t k = 0; k < L; ++k) {
    const auto t = static_cast<Eigen::Index>(reverse ? L - 1 - k : k);
    prev_h->row(t) = h;
    prev_c->row(t) = c;
    auto z = gates->row(t);
    z.noalias() += h * Wh;
    for (Eigen::Index j = 0; j < n; ++j) {
      z(j) = sig(z(j));
      z(n + j) = sig(z(n + j));
      z(2 * n + j) = std::tanh(z(2 * n + j));
      z(3 * n + j) = sig(z(3 * n + j));
      c(j) = z(n + j) * c(j) + z(j) * z(2 * n + j);
      h(j) = z(3 * n + j) * std::tanh(c(j));
    }
    cells->row(t) = c;
    Hout.row(t) = h;
  }

  record_op(out, {&seq, &params.w_x, &params.w_h, &params.bias},
            [seq, wx = params.w_x, wh = params.w_h, bias = params.bias, gates, cells, prev_h, prev_c,
             L, D, H, G, n, reverse](std::span<const double> g) mutable {
    const auto dH = view(g, L, H);
    const auto Wh = view(wh.data(), H, G);
    RowMat dZ(L, G);
    Eigen::RowVectorXd dh_next = Eigen::RowVectorXd::Zero(n);
    Eigen::RowVectorXd dc_next = Eigen::RowVectorXd::Zero(n);
    for (std::size_t k = L; k-- > 0;) {
      const auto t = static_cast<Eigen::Index>(reverse ? L - 1 - k : k);
      const auto z = gates->row(t);
      auto dz = dZ.row(t);
      for (Eigen::Index j = 0; j < n; ++j) {
        const double i_g = z(j), f_g = z(n + j), c_g = z(2 * n + j), o_g = z(3 * n + j);
        const double tc = std::tanh((*cells)(t, j));
        const double dh = dH(t, j) + dh_next(j);
        const double dc = dc_next(j) + dh * o_g * (1.0 - tc * tc);
        dz(j) = dc * c_g * i_g * (1.0 - i_g);
        dz(n + j) = dc * (*prev_c)(t, j) * f_g * (1.0 - f_g);
        dz(2 * n + j) = dc * i_g * (1.0 - c_g * c_g);
        dz(3 * n + j) = dh * tc * o_g * (1.0 - o_g);
        dc_next(j) = dc * f_g;
      }
      dh_next.noalias() = dz * Wh.transpose();
    }
    if (seq.requires_grad())
      view(seq.grad_storage(), L, D).noalias() += dZ * view(wx.data(), D, G).transpose();
    if (wx.requires_grad()) view(wx.grad_storage(), D, G).noalias() += view(seq.data(), L, D).transpose() * dZ;
    if (wh.requires_grad()) view(wh.grad_storage(), H, G).noalias() += prev_h->transpose() * dZ;
    if (bias.requires_grad()) view(bias.grad_storage(), 1, G) += dZ.colwise().sum();
  });
  return out;
}

}  // namespace darer
