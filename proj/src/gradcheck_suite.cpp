#include "darer/gradcheck_suite.hpp"

#include <algorithm>
#include <functional>
#include <random>

#include "darer/gradcheck.hpp"
#include "darer/layers.hpp"
#include "darer/model.hpp"
#include "darer/training.hpp"

namespace darer {

namespace {

constexpr std::size_t kWidth = 4;
constexpr std::size_t kMaxNodes = 8;

struct Case {
  std::function<Tensor()> f;
  std::vector<Tensor> inputs;
  std::size_t nodes = 0;
};

std::size_t pick_size(std::mt19937_64& rng, std::size_t lo, std::size_t hi) {
  return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
}

std::vector<int> random_speakers(std::size_t n, std::mt19937_64& rng) {
  std::vector<int> s(n);
  for (auto& v : s) v = static_cast<int>(pick_size(rng, 1, 2));
  s[0] = 1;
  if (n > 1) s[1] = 2;
  return s;
}

void append(std::vector<Tensor>& dst, const LstmParams& p) {
  dst.insert(dst.end(), {p.w_x, p.w_h, p.bias});
}

void append(std::vector<Tensor>& dst, const BiLstmParams& p) {
  append(dst, p.forward);
  append(dst, p.backward);
}

void append(std::vector<Tensor>& dst, const ReTeFormerParams& p) {
  for (std::size_t r = 0; r < p.num_relations(); ++r)
    dst.insert(dst.end(), {p.w_q[r], p.w_k[r], p.w_v[r], p.u_q[r], p.u_k[r]});
  dst.insert(dst.end(), {p.position_table, p.ln1_gain, p.ln1_bias, p.ff_w1, p.ff_b1, p.ff_w2,
                         p.ff_b2, p.ln2_gain, p.ln2_bias});
}

// Layer-norm gains and biases start at 1 and 0; jitter them so their
// gradients are exercised away from the identity.
void jitter(ReTeFormerParams& p, std::mt19937_64& rng) {
  for (Tensor* t : {&p.ln1_gain, &p.ln1_bias, &p.ln2_gain, &p.ln2_bias, &p.ff_b1, &p.ff_b2})
    for (double& v : t->data()) v += std::uniform_real_distribution<double>(-0.3, 0.3)(rng);
}

Case encoder_case(std::mt19937_64& rng) {
  const std::size_t vocab = 7, d_word = 3;
  const std::size_t n = pick_size(rng, 1, kMaxNodes);
  auto params = std::make_shared<EncoderParams>(make_encoder_params(vocab, d_word, kWidth, rng));
  for (double& v : params->word_embeddings.data()) v = std::uniform_real_distribution<double>(-1, 1)(rng);
  auto tokens = std::make_shared<std::vector<std::vector<std::size_t>>>(n);
  for (auto& u : *tokens) {
    u.resize(pick_size(rng, 1, 4));
    for (auto& t : u) t = pick_size(rng, 1, vocab - 1);
  }
  Tensor w = Tensor::uniform({n, kWidth}, -1, 1, rng);
  Case c;
  c.nodes = n;
  c.inputs = {params->word_embeddings};
  append(c.inputs, params->lstm);
  c.f = [params, tokens, w] { return sum(mul(encode_utterances(*tokens, *params), w)); };
  return c;
}

std::shared_ptr<RelationalGraph> random_graph(bool dual, std::mt19937_64& rng) {
  if (dual) return std::make_shared<RelationalGraph>(build_drtg(pick_size(rng, 1, kMaxNodes / 2)));
  return std::make_shared<RelationalGraph>(build_satg(random_speakers(pick_size(rng, 1, kMaxNodes), rng), 2));
}

Case rgcn_case(bool dual, std::mt19937_64& rng) {
  auto g = random_graph(dual, rng);
  auto params = std::make_shared<RgcnParams>(make_rgcn_params(kWidth, g->num_relations, rng));
  Tensor h = Tensor::uniform({g->num_nodes, kWidth}, -1, 1, rng);
  Tensor w = Tensor::uniform({g->num_nodes, kWidth}, -1, 1, rng);
  Case c;
  c.nodes = g->num_nodes;
  c.inputs = {h, params->w_self};
  c.inputs.insert(c.inputs.end(), params->w_rel.begin(), params->w_rel.end());
  c.f = [g, params, h, w] { return sum(mul(rgcn_forward(*g, h, *params), w)); };
  return c;
}

Case reteformer_case(bool dual, std::mt19937_64& rng) {
  auto g = random_graph(dual, rng);
  auto params = std::make_shared<ReTeFormerParams>(
      make_reteformer_params(kWidth, g->num_relations, kMaxNodes, rng));
  jitter(*params, rng);
  Tensor h = Tensor::uniform({g->num_nodes, kWidth}, -1, 1, rng);
  Tensor w = Tensor::uniform({g->num_nodes, kWidth}, -1, 1, rng);
  Case c;
  c.nodes = g->num_nodes;
  c.inputs = {h};
  append(c.inputs, *params);
  c.f = [g, params, h, w] { return sum(mul(reteformer_forward(*g, h, *params), w)); };
  return c;
}

Case projection_case(std::mt19937_64& rng) {
  const std::size_t n = pick_size(rng, 1, kMaxNodes);
  const std::size_t cs = pick_size(rng, 2, 4), ca = pick_size(rng, 2, 5);
  Tensor h = Tensor::uniform({n, kWidth}, -1, 1, rng);
  Tensor logit_s = Tensor::uniform({n, cs}, -2, 2, rng);
  Tensor logit_a = Tensor::uniform({n, ca}, -2, 2, rng);
  auto labels = std::make_shared<LabelEmbeddings>(make_label_embeddings(cs, ca, kWidth, rng));
  Tensor w = Tensor::uniform({n, kWidth}, -1, 1, rng);
  Case c;
  c.nodes = n;
  c.inputs = {h, logit_s, logit_a, labels->sentiment, labels->act};
  c.f = [h, logit_s, logit_a, labels, w] {
    Tensor e_s = project_labels(softmax_rows(logit_s), labels->sentiment);
    Tensor e_a = project_labels(softmax_rows(logit_a), labels->act);
    return sum(mul(superimpose(h, e_s, e_a), w));
  };
  return c;
}

Case ts_lstm_case(std::mt19937_64& rng) {
  const std::size_t n = pick_size(rng, 1, kMaxNodes);
  auto params = std::make_shared<TsLstmParams>(make_ts_lstm_params(kWidth, rng));
  Tensor h = Tensor::uniform({n, kWidth}, -1, 1, rng);
  Tensor w = Tensor::uniform({n, kWidth}, -1, 1, rng);
  Case c;
  c.nodes = n;
  c.inputs = {h, params->proj_w, params->proj_b};
  append(c.inputs, params->lstm);
  c.f = [params, h, w] { return sum(mul(ts_lstm(h, *params), w)); };
  return c;
}

Case decoder_case(std::mt19937_64& rng) {
  const std::size_t n = pick_size(rng, 1, kMaxNodes);
  const std::size_t classes = pick_size(rng, 2, 6);
  auto params = std::make_shared<DecoderParams>(make_decoder_params(kWidth, classes, rng));
  for (double& v : params->bias.data()) v = std::uniform_real_distribution<double>(-0.5, 0.5)(rng);
  Tensor h = Tensor::uniform({n, kWidth}, -1, 1, rng);
  Tensor w = Tensor::uniform({n, classes}, -1, 1, rng);
  Case c;
  c.nodes = n;
  c.inputs = {h, params->weight, params->bias};
  c.f = [params, h, w] { return sum(mul(decode(h, *params), w)); };
  return c;
}

struct LossFixture {
  std::vector<Tensor> logits_s, logits_a;
  std::vector<std::size_t> gold_s, gold_a;
  double gamma_s = 0, gamma_a = 0;

  StepOutputs outputs() const {
    StepOutputs out;
    for (const auto& l : logits_s) out.sentiment.push_back(softmax_rows(l));
    for (const auto& l : logits_a) out.act.push_back(softmax_rows(l));
    return out;
  }
};

std::shared_ptr<LossFixture> loss_fixture(std::mt19937_64& rng, std::size_t& n) {
  auto fx = std::make_shared<LossFixture>();
  n = pick_size(rng, 1, kMaxNodes);
  const std::size_t steps = pick_size(rng, 1, 3) + 1;
  const std::size_t cs = 3, ca = 4;
  for (std::size_t t = 0; t < steps; ++t) {
    fx->logits_s.push_back(Tensor::uniform({n, cs}, -2, 2, rng));
    fx->logits_a.push_back(Tensor::uniform({n, ca}, -2, 2, rng));
  }
  for (std::size_t i = 0; i < n; ++i) {
    fx->gold_s.push_back(pick_size(rng, 0, cs - 1));
    fx->gold_a.push_back(pick_size(rng, 0, ca - 1));
  }
  fx->gamma_s = std::uniform_real_distribution<double>(0.5, 10)(rng);
  fx->gamma_a = std::uniform_real_distribution<double>(0.5, 10)(rng);
  return fx;
}

Case loss_case(const std::string& which, std::mt19937_64& rng) {
  Case c;
  auto fx = loss_fixture(rng, c.nodes);
  c.inputs = fx->logits_s;
  c.inputs.insert(c.inputs.end(), fx->logits_a.begin(), fx->logits_a.end());
  if (which == "estimate_loss") {
    c.f = [fx] {
      StepOutputs out = fx->outputs();
      std::span<const Tensor> s(out.sentiment);
      return estimate_loss(s.first(s.size() - 1), fx->gold_s);
    };
  } else if (which == "margin_loss") {
    c.f = [fx] {
      StepOutputs out = fx->outputs();
      return add(margin_loss(out.sentiment, fx->gold_s), margin_loss(out.act, fx->gold_a));
    };
  } else if (which == "prediction_loss") {
    c.f = [fx] {
      StepOutputs out = fx->outputs();
      return nll_loss(out.act.back(), fx->gold_a);
    };
  } else {
    c.f = [fx] { return total_loss(fx->outputs(), fx->gold_s, fx->gold_a, fx->gamma_s, fx->gamma_a).total; };
  }
  return c;
}

Case build_case(const std::string& layer, std::mt19937_64& rng) {
  if (layer == "encoder") return encoder_case(rng);
  if (layer == "rgcn_satg") return rgcn_case(false, rng);
  if (layer == "rgcn_drtg") return rgcn_case(true, rng);
  if (layer == "reteformer_satg") return reteformer_case(false, rng);
  if (layer == "reteformer_drtg") return reteformer_case(true, rng);
  if (layer == "label_projection") return projection_case(rng);
  if (layer == "ts_lstm") return ts_lstm_case(rng);
  if (layer == "decoder") return decoder_case(rng);
  return loss_case(layer, rng);
}

}  // namespace

bool GradCheckSuiteResult::passed() const {
  return !cases.empty() && std::all_of(cases.begin(), cases.end(), [](const auto& c) { return c.passed; });
}

const std::vector<std::string>& gradcheck_layers() {
  static const std::vector<std::string> layers = {
      "encoder",          "rgcn_satg", "rgcn_drtg", "reteformer_satg", "reteformer_drtg",
      "label_projection", "ts_lstm",   "decoder",   "prediction_loss", "estimate_loss",
      "margin_loss",      "total_loss"};
  return layers;
}

GradCheckSuiteResult run_gradcheck_suite(std::size_t num_seeds, double h, double tol) {
  GradCheckSuiteResult result;
  const auto& layers = gradcheck_layers();
  for (std::size_t li = 0; li < layers.size(); ++li) {
    for (std::uint64_t seed = 1; seed <= num_seeds; ++seed) {
      std::mt19937_64 rng(seed * 1000003ULL + li);
      Case c = build_case(layers[li], rng);
      GradCheckReport rep = grad_check(c.f, c.inputs, h, tol);
      result.cases.push_back({layers[li], seed, c.nodes, rep.worst, rep.passed()});
      result.worst = std::max(result.worst, rep.worst);
    }
  }
  return result;
}

}  // namespace darer
