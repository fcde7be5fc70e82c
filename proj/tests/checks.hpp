#pragma once

// Randomized checks shared by the unit tests and the acceptance runner.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "darer/graphs.hpp"
#include "darer/layers.hpp"
#include "oracles.hpp"

namespace darer::checks {

enum class GraphKind { satg, drtg };

inline void jitter(Tensor t, double lo, double hi, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(lo, hi);
  for (double& v : t.data()) v = u(rng);
}

inline Tensor random_states(std::size_t m, std::size_t d, std::mt19937_64& rng) {
  return Tensor::uniform({m, d}, -1.0, 1.0, rng);
}

/// Every SATG over two speakers with 1..5 utterances and every DRTG with
/// 1..4 utterances.
inline std::vector<RelationalGraph> all_small_graphs(GraphKind kind) {
  std::vector<RelationalGraph> out;
  if (kind == GraphKind::drtg) {
    for (std::size_t n = 1; n <= 4; ++n) out.push_back(build_drtg(n));
    return out;
  }
  for (std::size_t n = 1; n <= 5; ++n)
    for (std::size_t bits = 0; bits < (std::size_t{1} << n); ++bits) {
      std::vector<int> speakers(n);
      for (std::size_t i = 0; i < n; ++i) speakers[i] = 1 + static_cast<int>((bits >> i) & 1);
      out.push_back(build_satg(speakers, 2));
    }
  return out;
}

/// Max abs difference between rgcn_forward and the per-edge oracle.
inline double rgcn_oracle_error(const RelationalGraph& g, std::uint64_t seed, std::size_t d = 6) {
  std::mt19937_64 rng(seed);
  RgcnParams p = make_rgcn_params(d, g.num_relations, rng);
  Tensor h = random_states(g.num_nodes, d, rng);
  return oracle::max_abs_diff(rgcn_forward(g, h, p), oracle::rgcn(g, oracle::to_mat(h), p));
}

/// Max abs difference between reteformer_forward and the per-edge oracle.
inline double reteformer_oracle_error(const RelationalGraph& g, std::uint64_t seed, std::size_t d = 6) {
  std::mt19937_64 rng(seed);
  ReTeFormerParams p = make_reteformer_params(d, g.num_relations, 8, rng);
  for (const Tensor* t : {&p.ln1_gain, &p.ln2_gain}) jitter(*t, 0.5, 1.5, rng);
  for (const Tensor* t : {&p.ln1_bias, &p.ln2_bias, &p.ff_b1, &p.ff_b2}) jitter(*t, -0.3, 0.3, rng);
  jitter(p.position_table, -1.0, 1.0, rng);
  Tensor h = random_states(g.num_nodes, d, rng);
  return oracle::max_abs_diff(reteformer_forward(g, h, p), oracle::reteformer(g, oracle::to_mat(h), p));
}

struct ScoreTrial {
  int relation = 0;
  double identity_error = 0.0;  // |direct - sum of terms|
  double layer_error = 0.0;     // |direct - score computed by the layer|
};

/// One random instantiation of the score decomposition on a DRTG edge of
/// the given relation: node states, label projections and positions are
/// random, and the layer's own score matrix supplies a second reference.
inline ScoreTrial score_trial(int relation, std::uint64_t seed, std::size_t d = 5) {
  std::mt19937_64 rng(seed);
  const auto n = std::uniform_int_distribution<std::size_t>(2, 5)(rng);
  RelationalGraph g = build_drtg(n);
  ReTeFormerParams p = make_reteformer_params(d, kDrtgRelations, n, rng);
  jitter(p.position_table, -1.0, 1.0, rng);

  std::vector<std::pair<std::size_t, std::size_t>> edges;  // (target, source)
  for (std::size_t i = 0; i < g.num_nodes; ++i)
    for (std::size_t j = 0; j < g.num_nodes; ++j)
      if (g.view(relation)(j, i)) edges.emplace_back(i, j);
  const auto [tgt, src] = edges[std::uniform_int_distribution<std::size_t>(0, edges.size() - 1)(rng)];

  Tensor h = random_states(2 * n, d, rng);
  Tensor e_s = random_states(n, d, rng), e_a = random_states(n, d, rng);
  auto row = [&](const Tensor& t, std::size_t i) {
    std::vector<double> v(d);
    for (std::size_t k = 0; k < d; ++k) v[k] = t.at(i, k);
    return v;
  };
  const std::size_t ui = g.node_position[tgt], uj = g.node_position[src];
  ScoreInputs in;
  in.h_s_i = row(h, tgt);
  in.h_a_j = row(h, src);
  in.e_s_i = row(e_s, ui);
  in.e_a_i = row(e_a, ui);
  in.e_s_j = row(e_s, uj);
  in.e_a_j = row(e_a, uj);
  in.p_i = row(p.position_table, ui);
  in.p_j = row(p.position_table, uj);
  const ScoreDecomposition dec = decompose_score(in, p, relation);

  Tensor nodes = add(h, concat_rows({add(e_s, e_a), add(e_s, e_a)}));
  Tensor scores = reteformer_scores(nodes, g.node_position, p, relation);
  return {relation, std::abs(dec.direct - dec.term_sum()), std::abs(dec.direct - scores.at(tgt, src))};
}

}  // namespace darer::checks
