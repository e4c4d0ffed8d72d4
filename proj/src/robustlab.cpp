#include "fisherfuse/robustlab.hpp"

#include <cmath>
#include <cstdio>
#include <map>

#include "json.hpp"

namespace ff {

std::string noise_mode_name(NoiseMode m) {
  switch (m) {
    case NoiseMode::Parallel: return "parallel";
    case NoiseMode::Perpendicular: return "perpendicular";
    case NoiseMode::Isotropic: return "isotropic";
  }
  return "?";
}

FusionSnapshot make_snapshot(int d, int k, int heads, int seq_len, int graph_nodes,
                             uint64_t seed, bool fisher_guidance) {
  if (d <= 0 || k <= 0 || k > d) throw ParameterError("make_snapshot: bad (d, k)");
  FusionSnapshot snap;
  snap.fusion.d = d;
  snap.fusion.heads = heads;
  snap.fusion.fisher_guidance = fisher_guidance;
  Rng rng(seed);
  Rng rp = rng.split(1), ru = rng.split(2), rh = rng.split(3), rg = rng.split(4);
  init_fusion_params(snap.params, snap.fusion, rp);
  // The trained model starts W_o at zero; the probe needs a live fusion path,
  // so draw it at the same scale as the other attention maps.
  double s = 1.0 / std::sqrt(static_cast<double>(d));
  snap.params.at("dfa.wo") = random_uniform(d, d, -s, s, rp);
  snap.u = random_orthogonal(d, k, ru);
  snap.h_ncs = random_normal(seq_len, d, rh);
  snap.h_cpg = random_normal(graph_nodes, d, rg);
  return snap;
}

std::vector<double> default_epsilon_grid(const Matrix& h_cpg, int points) {
  if (points < 1) throw ParameterError("epsilon grid needs at least one point");
  double scale_norm = frob_norm(h_cpg);
  std::vector<double> eps;
  double lo = std::log(0.01), hi = std::log(1.0);
  for (int i = 0; i < points; ++i) {
    double t = points == 1 ? 0.0 : static_cast<double>(i) / (points - 1);
    eps.push_back(std::exp(lo + t * (hi - lo)) * scale_norm);
  }
  return eps;
}

namespace {

Matrix rowwise_sigmoid(const Matrix& m) {
  Matrix out = m;
  for (double& v : out.data) {
    double x = std::min(30.0, std::max(-30.0, v));
    v = 1.0 / (1.0 + std::exp(-x));
  }
  return out;
}

Matrix slice_cols_plain(const Matrix& m, int begin, int len) {
  Matrix out(m.rows, len);
  for (int r = 0; r < m.rows; ++r)
    for (int c = 0; c < len; ++c) out.at(r, c) = m.at(r, begin + c);
  return out;
}

/// Per-node attention weight of the CLS query, averaged over heads.
std::vector<double> cls_attention_weights(const FusionSnapshot& snap,
                                          const Matrix& h_cpg) {
  const ParamStore& p = snap.params;
  int d = snap.fusion.d, heads = snap.fusion.heads, dk = d / heads;
  Matrix base = snap.h_ncs;
  if (snap.fusion.fisher_guidance) {
    Matrix proj = matmul(snap.u, transpose(snap.u));
    Matrix enh = layer_norm(matmul(snap.h_ncs, proj), p.at("dfa.ln_gain").data,
                            p.at("dfa.ln_bias").data);
    base = add(snap.h_ncs, enh);
  }
  Matrix q = matmul(base, p.at("dfa.wq"));
  Matrix h_par = h_cpg;
  if (snap.fusion.fisher_guidance)
    h_par = matmul(h_cpg, matmul(snap.u, transpose(snap.u)));
  Matrix keys = matmul(h_par, p.at("dfa.wk"));
  std::vector<double> mass(static_cast<size_t>(h_cpg.rows), 0.0);
  for (int h = 0; h < heads; ++h) {
    Matrix qh = slice_cols_plain(q, h * dk, dk);
    Matrix kh = slice_cols_plain(keys, h * dk, dk);
    Matrix logits = scale(matmul(qh, transpose(kh)), 1.0 / std::sqrt(dk));
    Matrix attn = softmax_rows(logits);
    for (int j = 0; j < h_cpg.rows; ++j) mass[j] += attn.at(0, j) / heads;
  }
  return mass;
}

}  // namespace

Matrix snapshot_forward(const FusionSnapshot& snap, const Matrix& h_cpg,
                        Matrix* h_comp_pool) {
  const ParamStore& p = snap.params;
  int d = snap.fusion.d, heads = snap.fusion.heads, dk = d / heads;
  Matrix base = snap.h_ncs;
  Matrix proj;
  if (snap.fusion.fisher_guidance) {
    proj = matmul(snap.u, transpose(snap.u));
    Matrix enh = layer_norm(matmul(snap.h_ncs, proj), p.at("dfa.ln_gain").data,
                            p.at("dfa.ln_bias").data);
    base = add(snap.h_ncs, enh);
  }
  Matrix q = matmul(base, p.at("dfa.wq"));
  Matrix h_par = snap.fusion.fisher_guidance ? matmul(h_cpg, proj) : h_cpg;
  Matrix keys = matmul(h_par, p.at("dfa.wk"));
  Matrix values = matmul(h_par, p.at("dfa.wv"));
  Matrix h_comp(q.rows, d);
  for (int h = 0; h < heads; ++h) {
    Matrix qh = slice_cols_plain(q, h * dk, dk);
    Matrix kh = slice_cols_plain(keys, h * dk, dk);
    Matrix vh = slice_cols_plain(values, h * dk, dk);
    Matrix attn = softmax_rows(scale(matmul(qh, transpose(kh)), 1.0 / std::sqrt(dk)));
    Matrix oh = matmul(attn, vh);
    for (int r = 0; r < oh.rows; ++r)
      for (int c = 0; c < dk; ++c) h_comp.at(r, h * dk + c) = oh.at(r, c);
  }
  Matrix pool(1, d);
  for (int r = 0; r < h_comp.rows; ++r)
    for (int c = 0; c < d; ++c) pool.at(0, c) += h_comp.at(r, c) / h_comp.rows;
  if (h_comp_pool) *h_comp_pool = pool;

  Matrix h_cls(1, d);
  for (int c = 0; c < d; ++c) h_cls.at(0, c) = snap.h_ncs.at(0, c);
  Matrix cat(1, 2 * d);
  for (int c = 0; c < d; ++c) {
    cat.at(0, c) = h_cls.at(0, c);
    cat.at(0, d + c) = pool.at(0, c);
  }
  Matrix pre = add(matmul(cat, p.at("gate.w")), p.at("gate.b"));
  double alpha = rowwise_sigmoid(pre).at(0, 0);
  Matrix contrib = scale(matmul(pool, p.at("dfa.wo")), alpha);
  return add(h_cls, contrib);
}

std::vector<NoiseRow> inject_and_measure(const FusionSnapshot& snap,
                                         const NoiseExperiment& exp) {
  if (exp.epsilons.empty()) throw ParameterError("noise: empty epsilon grid");
  for (double e : exp.epsilons)
    if (e <= 0) throw ParameterError("noise: epsilons must be positive");
  if (exp.trials < 1) throw ParameterError("noise: trials must be >= 1");

  Matrix proj = matmul(snap.u, transpose(snap.u));
  Matrix eye = Matrix::identity(snap.fusion.d);
  Matrix baseline = snapshot_forward(snap, snap.h_cpg);
  Matrix base_pool;
  snapshot_forward(snap, snap.h_cpg, &base_pool);

  Rng rng(exp.seed);
  std::vector<NoiseRow> rows;
  for (size_t ei = 0; ei < exp.epsilons.size(); ++ei) {
    double eps = exp.epsilons[ei];
    double sum = 0, sum2 = 0, sum_comp = 0;
    for (int t = 0; t < exp.trials; ++t) {
      Rng rt = rng.split((ei + 1) * 100003 + t);
      Matrix delta = random_normal(snap.h_cpg.rows, snap.fusion.d, rt);
      if (exp.mode == NoiseMode::Parallel) {
        delta = matmul(delta, proj);
      } else if (exp.mode == NoiseMode::Perpendicular) {
        delta = matmul(delta, sub(eye, proj));
      }
      double n = frob_norm(delta);
      if (n < 1e-300) throw EstimatorError("noise: degenerate sample");
      delta = scale(delta, eps / n);
      Matrix pool;
      Matrix out = snapshot_forward(snap, add(snap.h_cpg, delta), &pool);
      double dev = frob_norm(sub(out, baseline));
      sum += dev;
      sum2 += dev * dev;
      sum_comp += frob_norm(sub(pool, base_pool));
    }
    NoiseRow r;
    r.epsilon = eps;
    r.mode = exp.mode;
    r.trials = exp.trials;
    r.mean_dev = sum / exp.trials;
    r.mean_dev_comp = sum_comp / exp.trials;
    double var = sum2 / exp.trials - r.mean_dev * r.mean_dev;
    r.std_dev = var > 0 ? std::sqrt(var) : 0.0;
    rows.push_back(r);
  }
  return rows;
}

SlopeFit fit_slope(const std::vector<NoiseRow>& rows) {
  if (rows.size() < 3) throw InsufficientDataError("fit_slope: need >= 3 points");
  double sxy = 0, sxx = 0, syy = 0;
  for (const NoiseRow& r : rows) {
    sxy += r.epsilon * r.mean_dev;
    sxx += r.epsilon * r.epsilon;
    syy += r.mean_dev * r.mean_dev;
  }
  SlopeFit f;
  if (syy == 0.0) {
    f.degenerate = true;
    return f;
  }
  f.slope = sxy / sxx;
  double ss_res = 0;
  for (const NoiseRow& r : rows) {
    double e = r.mean_dev - f.slope * r.epsilon;
    ss_res += e * e;
  }
  f.r2 = 1.0 - ss_res / syy;
  return f;
}

std::string noise_csv(const std::vector<NoiseRow>& rows) {
  std::string out = "epsilon,mode,mean_dev,std_dev,mean_dev_comp,trials\n";
  char buf[256];
  for (const NoiseRow& r : rows) {
    std::snprintf(buf, sizeof(buf), "%.17g,%s,%.17g,%.17g,%.17g,%d\n", r.epsilon,
                  noise_mode_name(r.mode).c_str(), r.mean_dev, r.std_dev, r.mean_dev_comp,
                  r.trials);
    out += buf;
  }
  return out;
}

std::string NoiseSummary::to_json() const {
  nlohmann::json j;
  j["d"] = d;
  j["k"] = k;
  j["theoretical_ratio"] = theoretical_ratio;
  j["measured_ratio"] = measured_ratio;
  auto fit = [](const SlopeFit& f) {
    return nlohmann::json{{"slope", f.slope}, {"r2", f.r2}, {"degenerate", f.degenerate}};
  };
  j["dfa_parallel"] = fit(dfa_parallel);
  j["dfa_perpendicular"] = fit(dfa_perpendicular);
  j["dfa_isotropic"] = fit(dfa_isotropic);
  j["full_isotropic"] = fit(full_isotropic);
  return j.dump(2);
}

NoiseSummary run_noise_experiment(int d, int k, int heads, int trials, uint64_t seed,
                                  std::vector<NoiseRow>* out_rows) {
  if (trials < 3) throw ParameterError("noise: trials must be >= 3");
  int seq_len = 24, graph_nodes = 24;
  FusionSnapshot dfa = make_snapshot(d, k, heads, seq_len, graph_nodes, seed, true);
  FusionSnapshot full = dfa;
  full.fusion.fisher_guidance = false;

  NoiseExperiment exp;
  exp.epsilons = default_epsilon_grid(dfa.h_cpg);
  exp.trials = trials;
  exp.seed = seed ^ 0xA5A5;

  NoiseSummary s;
  s.d = d;
  s.k = k;
  s.theoretical_ratio = std::sqrt(static_cast<double>(k) / d);

  exp.mode = NoiseMode::Parallel;
  auto rows_par = inject_and_measure(dfa, exp);
  s.dfa_parallel = fit_slope(rows_par);
  exp.mode = NoiseMode::Perpendicular;
  auto rows_perp = inject_and_measure(dfa, exp);
  s.dfa_perpendicular = fit_slope(rows_perp);
  exp.mode = NoiseMode::Isotropic;
  auto rows_iso = inject_and_measure(dfa, exp);
  s.dfa_isotropic = fit_slope(rows_iso);
  auto rows_full = inject_and_measure(full, exp);
  s.full_isotropic = fit_slope(rows_full);
  if (s.full_isotropic.slope == 0.0)
    throw UndefinedRatioError("noise: full-spectrum slope is zero");
  s.measured_ratio = s.dfa_isotropic.slope / s.full_isotropic.slope;

  if (out_rows) {
    out_rows->clear();
    for (auto* v : {&rows_par, &rows_perp, &rows_iso})
      out_rows->insert(out_rows->end(), v->begin(), v->end());
    for (NoiseRow r : rows_full) out_rows->push_back(r);
  }
  return s;
}

std::string LineAttention::to_csv() const {
  std::string out = "line,standard_mass,fisher_mass\n";
  char buf[128];
  for (size_t i = 0; i < lines.size(); ++i) {
    std::snprintf(buf, sizeof(buf), "%d,%.17g,%.17g\n", lines[i], standard_mass[i],
                  fisher_mass[i]);
    out += buf;
  }
  return out;
}

LineAttention attention_report(const lang::CodeSample& sample, const TrainState& state) {
  AblationFlags clean;  // report on the intact graph
  Rng r(sample.seed + 1);
  EncodedSample enc = preprocess(sample, clean, r, state.cfg.max_len);

  const ModelConfig mc = state.cfg.model_config();
  Matrix pos = sinusoidal_positions(mc.enc.max_len + 1, mc.enc.d);

  // Materialize encoder outputs once, then score both attention modes.
  Tape tape;
  Bound b = Bound::bind(tape, state.params);
  SampleForward f = forward_sample(b, enc, mc, clean, state.fisher.u_pub, pos, true);

  FusionSnapshot snap;
  snap.params = state.params;
  snap.u = state.fisher.u_pub;
  snap.h_ncs = tape.value(f.h_ncs);
  snap.h_cpg = tape.value(f.h_cpg);
  snap.fusion = mc.fusion;

  snap.fusion.fisher_guidance = false;
  std::vector<double> std_node = cls_attention_weights(snap, snap.h_cpg);
  snap.fusion.fisher_guidance = true;
  std::vector<double> fis_node = cls_attention_weights(snap, snap.h_cpg);

  std::map<int, std::pair<double, double>> per_line;
  for (size_t i = 0; i < enc.cpg.nodes.size(); ++i) {
    int line = enc.cpg.nodes[i].line;
    per_line[line].first += std_node[i];
    per_line[line].second += fis_node[i];
  }
  double s0 = 0, s1 = 0;
  for (auto& [l, m] : per_line) {
    s0 += m.first;
    s1 += m.second;
  }
  LineAttention out;
  for (auto& [l, m] : per_line) {
    out.lines.push_back(l);
    out.standard_mass.push_back(s0 > 0 ? m.first / s0 : 0.0);
    out.fisher_mass.push_back(s1 > 0 ? m.second / s1 : 0.0);
  }
  return out;
}

double cka_redundancy(const TrainState& state,
                      const std::vector<lang::CodeSample>& eval_set, bool stage2) {
  if (eval_set.size() < 50)
    throw InsufficientDataError("cka_redundancy: need >= 50 samples");
  Evaluation ev = evaluate_corpus(state, eval_set, stage2);
  return cka_linear(ev.ncs_pool, ev.cpg_pool);
}

}  // namespace ff
