#include "fisherfuse/encoders.hpp"

#include <cmath>

#include "fisherfuse/errors.hpp"

namespace ff {

Matrix sinusoidal_positions(int max_len, int d) {
  Matrix p(max_len, d);
  for (int pos = 0; pos < max_len; ++pos) {
    for (int i = 0; i < d; i += 2) {
      double freq = std::pow(10000.0, -static_cast<double>(i) / d);
      p.at(pos, i) = std::sin(pos * freq);
      if (i + 1 < d) p.at(pos, i + 1) = std::cos(pos * freq);
    }
  }
  return p;
}

namespace {
Matrix fan_init(int r, int c, int fan, Rng& rng) {
  double s = 1.0 / std::sqrt(static_cast<double>(fan));
  return random_uniform(r, c, -s, s, rng);
}
}  // namespace

void init_ncs_params(ParamStore& store, const EncoderConfig& cfg, Rng& rng) {
  int d = cfg.d;
  store.add("ncs.embed", fan_init(cfg.vocab, d, d, rng));
  store.add("ncs.wq", fan_init(d, d, d, rng));
  store.add("ncs.wk", fan_init(d, d, d, rng));
  store.add("ncs.wv", fan_init(d, d, d, rng));
  store.add("ncs.wo", fan_init(d, d, d, rng));
  Matrix gain(1, d);
  for (double& v : gain.data) v = 1.0;
  store.add("ncs.ln_gain", gain);
  store.add("ncs.ln_bias", Matrix(1, d));
}

void init_rgcn_params(ParamStore& store, const EncoderConfig& cfg, Rng& rng) {
  int d = cfg.d;
  store.add("rgcn.kind_embed", fan_init(lang::kNodeKinds, d, d, rng));
  // The graph view keeps its own token table: sharing the sequence embedding
  // would couple the two views at initialization.
  store.add("rgcn.tok_embed", fan_init(cfg.vocab, d, d, rng));
  for (int l = 0; l < cfg.rgcn_layers; ++l) {
    std::string pre = "rgcn.l" + std::to_string(l) + ".";
    store.add(pre + "w0", fan_init(d, d, d, rng));
    for (int r = 0; r < lang::kRelations; ++r)
      store.add(pre + "w" + lang::relation_name(static_cast<lang::Relation>(r)),
                fan_init(d, d, d, rng));
  }
}

NcsOut encode_ncs(Bound& b, const lang::TokenSequence& seq, const EncoderConfig& cfg,
                  const Matrix& pos_table) {
  Tape& t = *b.tape;
  for (int id : seq.tokens)
    if (id < 0 || id >= cfg.vocab)
      throw EncodingError("encode_ncs: token id out of vocabulary");
  int L = seq.length();
  int emb = t.gather_rows(b.p("ncs.embed"), seq.tokens);
  Matrix pos(L, cfg.d);
  for (int i = 0; i < L; ++i)
    for (int j = 0; j < cfg.d; ++j) pos.at(i, j) = pos_table.at(i, j);
  int x = t.add(emb, t.leaf(std::move(pos)));
  // pre-norm single-head self-attention with residual
  int xn = t.layer_norm_rows(x, b.p("ncs.ln_gain"), b.p("ncs.ln_bias"));
  int q = t.matmul(xn, b.p("ncs.wq"));
  int k = t.matmul(xn, b.p("ncs.wk"));
  int v = t.matmul(xn, b.p("ncs.wv"));
  int logits = t.scale(t.matmul(q, t.transpose(k)), 1.0 / std::sqrt(cfg.d));
  int attn = t.softmax_rows(logits);
  int ctx = t.matmul(t.matmul(attn, v), b.p("ncs.wo"));
  int h = t.add(x, ctx);
  NcsOut out;
  out.h = h;
  out.cls = t.row(h, 0);
  return out;
}

Matrix relation_adjacency(const lang::Cpg& g, lang::Relation rel) {
  int n = static_cast<int>(g.nodes.size());
  Matrix a(n, n);
  std::vector<int> in_deg(n, 0);
  for (const lang::CpgEdge& e : g.edges)
    if (e.rel == rel) ++in_deg[e.dst];
  for (const lang::CpgEdge& e : g.edges)
    if (e.rel == rel) a.at(e.dst, e.src) += 1.0 / in_deg[e.dst];
  return a;
}

Matrix span_average_matrix(const lang::Cpg& g, const lang::TokenSequence& seq,
                           int vocab) {
  int n = static_cast<int>(g.nodes.size());
  Matrix s(n, vocab);
  for (const lang::CpgNode& node : g.nodes) {
    // raw span index i maps to sequence position i+1 (CLS offset)
    int lo = node.tok_begin + 1;
    int hi = std::min(node.tok_end + 1, seq.length());
    int count = std::max(0, hi - lo);
    if (count == 0) continue;
    for (int i = lo; i < hi; ++i) s.at(node.id, seq.tokens[i]) += 1.0 / count;
  }
  return s;
}

CpgOut encode_cpg(Bound& b, const lang::Cpg& g, const lang::TokenSequence& seq,
                  const EncoderConfig& cfg) {
  Tape& t = *b.tape;
  std::vector<int> kinds;
  kinds.reserve(g.nodes.size());
  for (const lang::CpgNode& n : g.nodes) kinds.push_back(static_cast<int>(n.kind));
  int h = t.gather_rows(b.p("rgcn.kind_embed"), kinds);
  int span = t.leaf(span_average_matrix(g, seq, cfg.vocab));
  h = t.add(h, t.matmul(span, b.p("rgcn.tok_embed")));

  std::vector<int> adj;
  for (int r = 0; r < lang::kRelations; ++r)
    adj.push_back(t.leaf(relation_adjacency(g, static_cast<lang::Relation>(r))));

  for (int l = 0; l < cfg.rgcn_layers; ++l) {
    std::string pre = "rgcn.l" + std::to_string(l) + ".";
    int acc = t.matmul(h, b.p(pre + "w0"));
    for (int r = 0; r < lang::kRelations; ++r) {
      int msg = t.matmul(adj[r], t.matmul(h, b.p(pre + "w" +
                                                 lang::relation_name(
                                                     static_cast<lang::Relation>(r)))));
      acc = t.add(acc, msg);
    }
    h = t.relu(acc);
  }
  CpgOut out;
  out.h = h;
  out.pool = t.mean_rows(h);
  return out;
}

}  // namespace ff
