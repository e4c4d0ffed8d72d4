#include "fisherfuse/fusion.hpp"

#include <cmath>

#include "fisherfuse/errors.hpp"

namespace ff {

namespace {
Matrix fan_init(int r, int c, int fan, Rng& rng) {
  double s = 1.0 / std::sqrt(static_cast<double>(fan));
  return random_uniform(r, c, -s, s, rng);
}
}  // namespace

void init_fusion_params(ParamStore& store, const FusionConfig& cfg, Rng& rng) {
  if (cfg.d % cfg.heads != 0)
    throw ParameterError("init_fusion_params: d must be divisible by head count");
  int d = cfg.d;
  store.add("dfa.wq", fan_init(d, d, d, rng));
  store.add("dfa.wk", fan_init(d, d, d, rng));
  store.add("dfa.wv", fan_init(d, d, d, rng));
  store.add("dfa.wo", Matrix(d, d));  // zero init: fusion enters as an exact no-op
  Matrix gain(1, d);
  for (double& v : gain.data) v = 1.0;
  store.add("dfa.ln_gain", gain);  // identity init keeps the stage switch smooth
  store.add("dfa.ln_bias", Matrix(1, d));
  store.add("gate.w", fan_init(2 * d, 1, 2 * d, rng));
  store.add("gate.b", Matrix(1, 1));
  store.add("cls.w", fan_init(d, 2, d, rng));
  store.add("cls.b", Matrix(1, 2));
}

int dfa_query(Bound& b, int h_ncs, const Matrix& u, const FusionConfig& cfg) {
  Tape& t = *b.tape;
  int base = h_ncs;
  if (cfg.fisher_guidance && u.cols > 0) {
    int proj = t.leaf(matmul(u, transpose(u)));  // constant: no gradient into U
    int enh = t.layer_norm_rows(t.matmul(h_ncs, proj), b.p("dfa.ln_gain"),
                                b.p("dfa.ln_bias"));
    base = t.add(h_ncs, enh);
  }
  return t.matmul(base, b.p("dfa.wq"));
}

int complementary_attention(Bound& b, int q_dfa, int h_cpg, const Matrix& u,
                            const FusionConfig& cfg) {
  Tape& t = *b.tape;
  if (t.value(h_cpg).rows < 1)
    throw EmptyAuxiliaryError("complementary_attention: empty graph");
  int h_par = h_cpg;
  if (cfg.fisher_guidance && u.cols > 0) {
    int proj = t.leaf(matmul(u, transpose(u)));
    h_par = t.matmul(h_cpg, proj);
  }
  int keys = t.matmul(h_par, b.p("dfa.wk"));
  int values = t.matmul(h_par, b.p("dfa.wv"));
  int dk = cfg.d / cfg.heads;
  std::vector<int> heads;
  for (int h = 0; h < cfg.heads; ++h) {
    int qh = t.slice_cols(q_dfa, h * dk, dk);
    int kh = t.slice_cols(keys, h * dk, dk);
    int vh = t.slice_cols(values, h * dk, dk);
    int logits = t.scale(t.matmul(qh, t.transpose(kh)), 1.0 / std::sqrt(dk));
    int attn = t.softmax_rows(logits);
    heads.push_back(t.matmul(attn, vh));
  }
  int out = heads[0];
  for (size_t h = 1; h < heads.size(); ++h) out = t.concat_cols(out, heads[h]);
  return out;
}

GateOut adaptive_gate(Bound& b, int h_cls, int h_comp_pool, const FusionConfig& cfg) {
  Tape& t = *b.tape;
  GateOut out;
  if (cfg.gate_closed) {
    out.alpha = t.leaf(Matrix(1, 1));
    out.h_final = h_cls;
    return out;
  }
  int cat = t.concat_cols(h_cls, h_comp_pool);
  int pre = t.add(t.matmul(cat, b.p("gate.w")), b.p("gate.b"));
  int alpha = t.sigmoid(pre);
  if (!cfg.adaptive_gate) {
    Matrix one(1, 1);
    one.at(0, 0) = 1.0;
    alpha = t.leaf(std::move(one));
  }
  int contrib = t.mul_scalar(alpha, t.matmul(h_comp_pool, b.p("dfa.wo")));
  out.alpha = alpha;
  out.h_final = t.add(h_cls, contrib);
  return out;
}

int classify(Bound& b, int h_final) {
  Tape& t = *b.tape;
  return t.add(t.matmul(h_final, b.p("cls.w")), b.p("cls.b"));
}

}  // namespace ff
