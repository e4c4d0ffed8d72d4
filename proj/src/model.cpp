#include "fisherfuse/model.hpp"

#include <cmath>

#include "fisherfuse/errors.hpp"

namespace ff {

EncodedSample preprocess(const lang::CodeSample& s, const AblationFlags& flags,
                         Rng& rng, int max_len) {
  EncodedSample out;
  out.seq = lang::tokenize(s.source, max_len);
  auto ast = lang::parse(s.source);
  out.cpg = lang::build_cpg(*ast);
  out.label = s.label;
  if (flags.graph_perturbation == "edge_shuffle") {
    out.cpg = lang::edge_shuffle(out.cpg, flags.edge_shuffle_fraction, rng);
  } else if (flags.graph_perturbation == "degree_rewire") {
    int swaps = 2 * static_cast<int>(out.cpg.edges.size());
    out.cpg = lang::degree_preserving_rewire(out.cpg, swaps, rng);
  } else if (flags.graph_perturbation == "remove_ddg") {
    out.cpg = lang::remove_relation(out.cpg, lang::Relation::Ddg);
  } else if (flags.graph_perturbation == "remove_cdg") {
    out.cpg = lang::remove_relation(out.cpg, lang::Relation::Cdg);
  } else if (!flags.graph_perturbation.empty()) {
    throw UnsupportedAblationError("unknown graph perturbation: " + flags.graph_perturbation);
  }
  return out;
}

ParamStore init_model_params(const ModelConfig& cfg, uint64_t seed) {
  ParamStore store;
  Rng rng(seed);
  Rng r_ncs = rng.split(1), r_rgcn = rng.split(2), r_proj = rng.split(3), r_fus = rng.split(4);
  init_ncs_params(store, cfg.enc, r_ncs);
  init_rgcn_params(store, cfg.enc, r_rgcn);
  init_projection_params(store, cfg.align, r_proj);
  init_fusion_params(store, cfg.fusion, r_fus);
  return store;
}

SampleForward forward_sample(Bound& b, const EncodedSample& s, const ModelConfig& cfg,
                             const AblationFlags& flags, const Matrix& u_pub,
                             const Matrix& pos_table, bool stage2) {
  SampleForward f;
  NcsOut ncs = encode_ncs(b, s.seq, cfg.enc, pos_table);
  f.h_ncs = ncs.h;
  f.h_cls = ncs.cls;

  FusionConfig fus = cfg.fusion;
  if (flags.no_fisher || !stage2) fus.fisher_guidance = false;
  if (flags.no_gate) fus.adaptive_gate = false;
  if (!stage2) fus.gate_closed = true;

  if (flags.ncs_only) {
    fus.gate_closed = true;
    GateOut g = adaptive_gate(b, f.h_cls, /*h_comp_pool=*/-1, fus);
    f.alpha = g.alpha;
    f.h_final = g.h_final;
    f.logits = classify(b, f.h_final);
    return f;
  }

  CpgOut cpg = encode_cpg(b, s.cpg, s.seq, cfg.enc);
  f.h_cpg = cpg.h;
  f.h_cpg_pool = cpg.pool;
  Projected pr = project(b, f.h_cls, f.h_cpg_pool);
  f.z_ncs = pr.z_ncs;
  f.z_cpg = pr.z_cpg;

  if (fus.gate_closed) {
    GateOut g = adaptive_gate(b, f.h_cls, /*h_comp_pool=*/-1, fus);
    f.alpha = g.alpha;
    f.h_final = g.h_final;
    f.logits = classify(b, f.h_final);
    return f;
  }

  int q = dfa_query(b, f.h_ncs, u_pub, fus);
  f.h_comp = complementary_attention(b, q, f.h_cpg, u_pub, fus);
  f.h_comp_pool = b.tape->mean_rows(f.h_comp);
  GateOut g = adaptive_gate(b, f.h_cls, f.h_comp_pool, fus);
  f.alpha = g.alpha;
  f.h_final = g.h_final;
  f.logits = classify(b, f.h_final);
  return f;
}

double prob_vulnerable(const Matrix& logits) {
  if (logits.rows != 1 || logits.cols != 2) throw ShapeError("logits must be 1x2");
  double a = logits.at(0, 0), v = logits.at(0, 1);
  double m = std::max(a, v);
  double ea = std::exp(a - m), ev = std::exp(v - m);
  return ev / (ea + ev);
}

}  // namespace ff
