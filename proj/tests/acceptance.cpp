// Acceptance suite: one pass/fail line per criterion, nonzero exit on any
// failure. Criteria are ordered fast-to-slow except the end-to-end training
// comparisons, which dominate the runtime.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "fisherfuse/corpus.hpp"
#include "fisherfuse/fisher.hpp"
#include "fisherfuse/model.hpp"
#include "fisherfuse/robustlab.hpp"
#include "fisherfuse/training.hpp"

using namespace ff;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

// ---------------------------------------------------------------------------
// 1. Perpendicular-subspace noise is annihilated exactly (up to roundoff).

Outcome criterion1() {
  FusionSnapshot snap = make_snapshot(64, 8, 4, 12, 20, 42, true);
  NoiseExperiment exp;
  exp.epsilons = default_epsilon_grid(snap.h_cpg, 8);
  exp.mode = NoiseMode::Perpendicular;
  exp.trials = 20;
  exp.seed = 43;
  double worst = 0;
  for (const NoiseRow& r : inject_and_measure(snap, exp))
    worst = std::max(worst, r.mean_dev + r.std_dev);
  std::ostringstream os;
  os << "max perpendicular deviation " << worst << " (< 1e-8 required)";
  return {worst < 1e-8, os.str()};
}

// ---------------------------------------------------------------------------
// 2. Isotropic slope ratio matches sqrt(k/d) within 20% at two shapes.

Outcome criterion2() {
  struct Shape {
    int d, k;
  };
  bool ok = true;
  std::ostringstream os;
  for (Shape s : {Shape{64, 8}, Shape{384, 32}}) {
    NoiseSummary sum = run_noise_experiment(s.d, s.k, 4, 500, 71);
    double rel = sum.measured_ratio / sum.theoretical_ratio;
    bool here = rel > 0.8 && rel < 1.2;
    ok = ok && here;
    os << "(k=" << s.k << ",d=" << s.d << ") measured " << sum.measured_ratio
       << " vs sqrt(k/d)=" << sum.theoretical_ratio << " ratio " << rel << "; ";
  }
  return {ok, os.str()};
}

// ---------------------------------------------------------------------------
// 3. Energy law: isotropic noise keeps fraction k/d of its energy in span(U).

Outcome criterion3() {
  bool ok = true;
  std::ostringstream os;
  struct Shape {
    int d, k;
  };
  for (Shape s : {Shape{64, 8}, Shape{384, 32}}) {
    Rng rng(101);
    Matrix u = random_orthogonal(s.d, s.k, rng);
    const int trials = 1000;
    double sum = 0, sum2 = 0;
    for (int t = 0; t < trials; ++t) {
      Matrix delta = random_normal(1, s.d, rng);
      double e = energy_ratio(delta, u);
      sum += e;
      sum2 += e * e;
    }
    double mean = sum / trials;
    double sd = std::sqrt(std::max(0.0, sum2 / trials - mean * mean));
    double sem = sd / std::sqrt(static_cast<double>(trials));
    double target = static_cast<double>(s.k) / s.d;
    bool here = std::fabs(mean - target) < 3.0 * sem;
    ok = ok && here;
    os << "(k=" << s.k << ",d=" << s.d << ") mean " << mean << " target "
       << target << " |diff| " << std::fabs(mean - target) << " 3*sem "
       << 3.0 * sem << "; ";
  }
  return {ok, os.str()};
}

// ---------------------------------------------------------------------------
// 4. Oja and all alternative estimators recover a gapped subspace.

Outcome criterion4() {
  const int d = 32, k = 4;
  const double top = 50.0;  // spectral gap 50x >= the required 2x
  Rng qr(99);
  Matrix q = random_orthogonal(d, d, qr);
  std::vector<double> lam(d, 1.0);
  for (int i = 0; i < k; ++i) lam[i] = top;
  Matrix cov(d, d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) {
      double s = 0;
      for (int m = 0; m < d; ++m) s += q.at(i, m) * lam[m] * q.at(j, m);
      cov.at(i, j) = s;
    }
  auto [vals, oracle] = sym_eig(cov, k);

  // The EMA is a training-time smoother; the convergence probe feeds the raw
  // stationary stream, so momentum is off here.
  FisherConfig cfg;
  cfg.d = d;
  cfg.k = k;
  cfg.momentum = 0.0;
  cfg.eta0 = 5e-4;
  cfg.publish_freq = 5000;
  Rng rng(7);
  FisherSubspace sub = FisherSubspace::init(cfg, rng);
  Rng gr(8);
  std::vector<std::vector<double>> stream;
  stream.reserve(5000);
  for (int t = 0; t < 5000; ++t) {
    std::vector<double> g(d, 0.0);
    for (int m = 0; m < d; ++m) {
      double z = std::sqrt(lam[m]) * gr.normal();
      for (int i = 0; i < d; ++i) g[i] += q.at(i, m) * z;
    }
    sub.observe(g);
    stream.push_back(std::move(g));
  }
  double oja_angle = principal_angle(sub.u_live, oracle);
  bool ok = oja_angle < 0.05;
  std::ostringstream os;
  os << "oja " << oja_angle;
  Rng er(9);
  for (auto m : {FisherEstimator::DirectEig, FisherEstimator::PowerIter,
                 FisherEstimator::Randomized, FisherEstimator::BatchNoEma}) {
    Matrix u = estimate_alternative(m, stream, k, er);
    double a = principal_angle(u, oracle);
    ok = ok && a < 0.05;
    os << ", est" << static_cast<int>(m) << " " << a;
  }
  os << " (all < 0.05 rad required)";
  return {ok, os.str()};
}

// ---------------------------------------------------------------------------
// 5. Gradient fidelity: finite differences on every differentiable op, plus
//    the fully assembled model, at d=8.

double scalarize(Tape& t, int out, Rng& rng) {
  const Matrix& v = t.value(out);
  if (v.rows == 1 && v.cols == 1) return t.value(out).at(0, 0);
  Matrix r(1, v.rows), c(v.cols, 1);
  for (double& x : r.data) x = rng.normal();
  for (double& x : c.data) x = rng.normal();
  (void)t.matmul(t.matmul(t.leaf(r), out), t.leaf(c));
  return t.value(static_cast<int>(t.size()) - 1).at(0, 0);
}

struct OpCase {
  std::string name;
  std::vector<Matrix> inputs;
  // Builds the op under test from bound leaf ids; returns its output node.
  std::function<int(Tape&, const std::vector<int>&)> build;
};

bool check_case(const OpCase& oc, double& worst_rel, std::string& worst_name) {
  std::vector<Matrix> inputs = oc.inputs;
  auto eval = [&](std::vector<Matrix>* grads_out) {
    Tape t;
    std::vector<int> ids;
    for (const Matrix& m : inputs) ids.push_back(t.leaf(m, true));
    int out = oc.build(t, ids);
    Rng wr(5);  // identical weighting every evaluation
    double val = scalarize(t, out, wr);
    if (grads_out) {
      int loss = static_cast<int>(t.size()) - 1;
      std::vector<Matrix> all = t.backward(loss);
      grads_out->clear();
      for (int id : ids) grads_out->push_back(all[id]);
    }
    return val;
  };

  std::vector<Matrix> grads;
  eval(&grads);
  const double h = 1e-5;
  bool ok = true;
  for (size_t gi = 0; gi < inputs.size(); ++gi) {
    for (size_t e = 0; e < inputs[gi].data.size(); ++e) {
      double keep = inputs[gi].data[e];
      inputs[gi].data[e] = keep + h;
      double up = eval(nullptr);
      inputs[gi].data[e] = keep - h;
      double down = eval(nullptr);
      inputs[gi].data[e] = keep;
      double fd = (up - down) / (2 * h);
      double an = grads[gi].rows ? grads[gi].data[e] : 0.0;
      double denom = std::max({std::fabs(fd), std::fabs(an), 1e-4});
      double rel = std::fabs(fd - an) / denom;
      if (rel > worst_rel) {
        worst_rel = rel;
        worst_name = oc.name;
      }
      if (rel >= 1e-3) ok = false;
    }
  }
  return ok;
}

Outcome criterion5() {
  Rng rng(11);
  auto rm = [&](int r, int c) { return random_normal(r, c, rng); };
  Matrix pos_gain = random_uniform(1, 8, 0.5, 1.5, rng);

  std::vector<OpCase> cases;
  cases.push_back({"add", {rm(3, 8), rm(3, 8)}, [](Tape& t, const std::vector<int>& i) {
                     return t.add(i[0], i[1]);
                   }});
  cases.push_back({"add_broadcast_row", {rm(3, 8), rm(1, 8)},
                   [](Tape& t, const std::vector<int>& i) {
                     return t.add_broadcast_row(i[0], i[1]);
                   }});
  cases.push_back({"scale", {rm(3, 8)}, [](Tape& t, const std::vector<int>& i) {
                     return t.scale(i[0], -1.7);
                   }});
  cases.push_back({"matmul", {rm(3, 8), rm(8, 4)},
                   [](Tape& t, const std::vector<int>& i) {
                     return t.matmul(i[0], i[1]);
                   }});
  cases.push_back({"transpose", {rm(3, 8)}, [](Tape& t, const std::vector<int>& i) {
                     return t.transpose(i[0]);
                   }});
  cases.push_back({"relu", {rm(3, 8)}, [](Tape& t, const std::vector<int>& i) {
                     return t.relu(i[0]);
                   }});
  cases.push_back({"sigmoid", {rm(3, 8)}, [](Tape& t, const std::vector<int>& i) {
                     return t.sigmoid(i[0]);
                   }});
  cases.push_back({"softmax_rows", {rm(3, 8)}, [](Tape& t, const std::vector<int>& i) {
                     return t.softmax_rows(i[0]);
                   }});
  cases.push_back({"layer_norm_rows", {rm(3, 8), pos_gain, rm(1, 8)},
                   [](Tape& t, const std::vector<int>& i) {
                     return t.layer_norm_rows(i[0], i[1], i[2]);
                   }});
  cases.push_back({"mean_rows", {rm(5, 8)}, [](Tape& t, const std::vector<int>& i) {
                     return t.mean_rows(i[0]);
                   }});
  cases.push_back({"row", {rm(4, 8)}, [](Tape& t, const std::vector<int>& i) {
                     return t.row(i[0], 2);
                   }});
  cases.push_back({"concat_rows", {rm(2, 8), rm(3, 8)},
                   [](Tape& t, const std::vector<int>& i) {
                     return t.concat_rows({i[0], i[1]});
                   }});
  cases.push_back({"concat_cols", {rm(3, 8), rm(3, 4)},
                   [](Tape& t, const std::vector<int>& i) {
                     return t.concat_cols(i[0], i[1]);
                   }});
  cases.push_back({"slice_cols", {rm(3, 8)}, [](Tape& t, const std::vector<int>& i) {
                     return t.slice_cols(i[0], 2, 4);
                   }});
  cases.push_back({"gather_rows", {rm(6, 8)}, [](Tape& t, const std::vector<int>& i) {
                     return t.gather_rows(i[0], {1, 4, 1, 0});
                   }});
  cases.push_back({"l2_normalize_rows", {rm(3, 8)},
                   [](Tape& t, const std::vector<int>& i) {
                     return t.l2_normalize_rows(i[0]);
                   }});
  cases.push_back({"mul_scalar", {rm(1, 1), rm(3, 8)},
                   [](Tape& t, const std::vector<int>& i) {
                     return t.mul_scalar(i[0], i[1]);
                   }});
  cases.push_back({"ce_loss_logits", {rm(4, 2)}, [](Tape& t, const std::vector<int>& i) {
                     return t.ce_loss_logits(i[0], {0, 1, 1, 0});
                   }});
  cases.push_back({"nce_loss_logits", {rm(4, 6)},
                   [](Tape& t, const std::vector<int>& i) {
                     return t.nce_loss_logits(i[0]);
                   }});

  double worst_rel = 0;
  std::string worst_name = "none";
  bool ok = true;
  for (const OpCase& oc : cases) ok = check_case(oc, worst_rel, worst_name) && ok;

  // Assembled model at d=8: every parameter of the combined CE + alignment
  // objective against central differences.
  ModelConfig mc;
  mc.enc.d = 8;
  mc.enc.rgcn_layers = 1;
  mc.align.d = 8;
  mc.align.d_prime = 4;
  mc.fusion.d = 8;
  mc.fusion.heads = 2;
  mc.fisher.d = 8;
  mc.fisher.k = 2;
  ParamStore store = init_model_params(mc, 77);
  lang::CodeSample cs{
      "toy", "int f() {\n  ref p = alloc(4);\n  free(p);\n  int y = *p + 1;\n}\n", 1,
      "uaf", 5};
  AblationFlags flags;
  Rng pr(78);
  EncodedSample enc = preprocess(cs, flags, pr, mc.enc.max_len);
  Matrix u = random_orthogonal(8, 2, pr);
  Matrix pos = sinusoidal_positions(mc.enc.max_len + 1, 8);
  auto model_loss = [&]() {
    Tape t;
    Bound b = Bound::bind(t, store);
    SampleForward f = forward_sample(b, enc, mc, flags, u, pos, true);
    XbmQueue q(8);
    int align = info_nce(b, f.z_ncs, f.z_cpg, q, 0.2, false);
    int total = t.add(t.ce_loss_logits(f.logits, {enc.label}), t.scale(align, 0.05));
    return std::pair<double, int>(t.value(total).at(0, 0), total);
  };
  {
    Tape t;
    Bound b = Bound::bind(t, store);
    SampleForward f = forward_sample(b, enc, mc, flags, u, pos, true);
    XbmQueue q(8);
    int align = info_nce(b, f.z_ncs, f.z_cpg, q, 0.2, false);
    int total = t.add(t.ce_loss_logits(f.logits, {enc.label}), t.scale(align, 0.05));
    std::vector<Matrix> grads = t.backward(total);
    const double h = 1e-4;
    for (const std::string& name : store.names) {
      Matrix& p = store.at(name);
      const Matrix& g = grads[b.p(name)];
      for (size_t e = 0; e < p.data.size(); ++e) {
        double keep = p.data[e];
        p.data[e] = keep + h;
        double up = model_loss().first;
        p.data[e] = keep - h;
        double down = model_loss().first;
        p.data[e] = keep;
        double fd = (up - down) / (2 * h);
        double an = g.rows ? g.data[e] : 0.0;
        double denom = std::max({std::fabs(fd), std::fabs(an), 1e-4});
        double rel = std::fabs(fd - an) / denom;
        if (rel > worst_rel) {
          worst_rel = rel;
          worst_name = "model:" + name;
        }
        if (rel >= 1e-3) ok = false;
      }
    }
  }
  std::ostringstream os;
  os << "worst relative error " << worst_rel << " at " << worst_name
     << " (< 1e-3 required)";
  return {ok, os.str()};
}

// ---------------------------------------------------------------------------
// 6. Ablation flags reproduce their submodels bit-for-bit.

Outcome criterion6() {
  ModelConfig mc;
  mc.enc.d = 16;
  mc.enc.rgcn_layers = 1;
  mc.align.d = 16;
  mc.align.d_prime = 8;
  mc.fusion.d = 16;
  mc.fusion.heads = 2;
  mc.fisher.d = 16;
  mc.fisher.k = 4;
  ParamStore store = init_model_params(mc, 123);
  // A live output map; the trained init is zero, which would make several
  // reductions vacuously equal.
  Rng wr(124);
  store.at("dfa.wo") = random_normal(16, 16, wr);

  Rng rng(125);
  auto corpus = lang::generate_corpus(6, 0.5, rng);
  Matrix u = random_orthogonal(16, 4, rng);
  Matrix u2 = random_orthogonal(16, 4, rng);
  Matrix pos = sinusoidal_positions(mc.enc.max_len + 1, 16);

  auto logits_for = [&](const lang::CodeSample& s, AblationFlags flags,
                        ModelConfig cfg, const Matrix& bases) {
    Rng pr(126);
    EncodedSample enc = preprocess(s, flags, pr, cfg.enc.max_len);
    Tape t;
    Bound b = Bound::bind(t, store);
    SampleForward f = forward_sample(b, enc, cfg, flags, bases, pos, true);
    return t.value(f.logits);
  };

  bool ok = true;
  std::string why;
  for (const auto& s : corpus) {
    AblationFlags plain;

    // (a) gate closed == NCS-only classifier output.
    AblationFlags ncs;
    ncs.ncs_only = true;
    ModelConfig closed = mc;
    closed.fusion.gate_closed = true;
    if (logits_for(s, ncs, mc, u).data != logits_for(s, plain, closed, u).data) {
      ok = false;
      why = "gate_closed != ncs_only";
    }

    // (b) no_fisher == standard attention: identical under any bases, and
    // identical to a config with fisher guidance disabled.
    AblationFlags nf;
    nf.no_fisher = true;
    ModelConfig std_attn = mc;
    std_attn.fusion.fisher_guidance = false;
    if (logits_for(s, nf, mc, u).data != logits_for(s, nf, mc, u2).data ||
        logits_for(s, nf, mc, u).data != logits_for(s, plain, std_attn, u).data) {
      ok = false;
      why = "no_fisher != standard attention";
    }

    // (c) no_gate == alpha pinned at 1.
    AblationFlags ng;
    ng.no_gate = true;
    Rng pr(126);
    EncodedSample enc = preprocess(s, ng, pr, mc.enc.max_len);
    Tape t;
    Bound b = Bound::bind(t, store);
    SampleForward f = forward_sample(b, enc, mc, ng, u, pos, true);
    Matrix manual = add(t.value(f.h_cls),
                        matmul(t.value(f.h_comp_pool), store.at("dfa.wo")));
    if (t.value(f.h_final).data != manual.data) {
      ok = false;
      why = "no_gate != alpha-1 residual";
    }
  }
  return {ok, ok ? "all reductions bitwise identical" : why};
}

// ---------------------------------------------------------------------------
// 7. End-to-end gain: full model beats NCS-only, and edge shuffle hurts.

Outcome criterion7() {
  Rng cr(1001);
  auto train_set = lang::generate_corpus(2000, 0.10, cr);
  Rng er(1002);
  auto eval_set = lang::generate_corpus(400, 0.10, er);

  int full_wins = 0, shuffle_hurts = 0;
  std::ostringstream os;
  for (uint64_t seed : {11, 12, 13, 14, 15}) {
    TrainConfig cfg;
    cfg.seed = seed;
    TrainResult full = train(cfg, train_set, eval_set);
    double f1_full = full.log.back().f1;

    TrainConfig ncs = cfg;
    ncs.ablation.ncs_only = true;
    TrainResult base = train(ncs, train_set, eval_set);
    double f1_ncs = base.log.back().f1;

    TrainConfig shuf = cfg;
    shuf.ablation.graph_perturbation = "edge_shuffle";
    shuf.ablation.edge_shuffle_fraction = 0.9;
    TrainResult shuffled = train(shuf, train_set, eval_set);
    double f1_shuf = shuffled.log.back().f1;

    if (f1_full > f1_ncs) ++full_wins;
    if (f1_shuf < f1_full) ++shuffle_hurts;
    os << "seed " << seed << ": full " << f1_full << " ncs " << f1_ncs
       << " shuffled " << f1_shuf << "; ";
  }
  os << "full>ncs " << full_wins << "/5, shuffle hurts " << shuffle_hurts
     << "/5 (>=4 required)";
  return {full_wins >= 4 && shuffle_hurts >= 4, os.str()};
}

// ---------------------------------------------------------------------------
// 8. Metric oracles at 1e-12 over 1000 randomized cases.

Outcome criterion8() {
  Rng rng(2024);
  double worst = 0;
  bool ok = true;
  for (int t = 0; t < 1000; ++t) {
    int n = 1 + static_cast<int>(rng.uniform() * 50);
    std::vector<double> probs(n);
    std::vector<int> truth(n);
    for (int i = 0; i < n; ++i) {
      probs[i] = rng.uniform();
      truth[i] = rng.uniform() < 0.5 ? 0 : 1;
    }
    Confusion c = confusion(probs, truth);
    long tp = 0, fp = 0, tn = 0, fn = 0;
    for (int i = 0; i < n; ++i) {
      int pred = probs[i] >= 0.5 ? 1 : 0;
      tp += pred == 1 && truth[i] == 1;
      fp += pred == 1 && truth[i] == 0;
      tn += pred == 0 && truth[i] == 0;
      fn += pred == 0 && truth[i] == 1;
    }
    if (c.tp != tp || c.fp != fp || c.tn != tn || c.fn != fn) ok = false;
    Rates r = prf1(c);
    double p = tp + fp > 0 ? double(tp) / (tp + fp) : 0.0;
    double rec = tp + fn > 0 ? double(tp) / (tp + fn) : 0.0;
    double f1 = p + rec > 0 ? 2 * p * rec / (p + rec) : 0.0;
    worst = std::max({worst, std::fabs(r.precision - p), std::fabs(r.recall - rec),
                      std::fabs(r.f1 - f1),
                      std::fabs(r.accuracy - double(tp + tn) / n)});

    // ECE against a naive binning loop.
    int bins = 2 + static_cast<int>(rng.uniform() * 12);
    std::vector<double> conf(n);
    std::vector<bool> correct(n);
    for (int i = 0; i < n; ++i) {
      conf[i] = 0.5 + 0.5 * rng.uniform();
      correct[i] = rng.uniform() < conf[i];
    }
    if (t % 9 == 0) conf[0] = 1.0;
    double got = ece(conf, correct, bins);
    std::vector<double> csum(bins, 0), acc(bins, 0);
    std::vector<long> cnt(bins, 0);
    double width = 0.5 / bins;
    for (int i = 0; i < n; ++i) {
      int bi = conf[i] >= 1.0 ? bins - 1 : static_cast<int>((conf[i] - 0.5) / width);
      csum[bi] += conf[i];
      acc[bi] += correct[i] ? 1.0 : 0.0;
      ++cnt[bi];
    }
    double expect = 0;
    for (int bi = 0; bi < bins; ++bi)
      if (cnt[bi] > 0)
        expect += (double(cnt[bi]) / n) *
                  std::fabs(acc[bi] / cnt[bi] - csum[bi] / cnt[bi]);
    worst = std::max(worst, std::fabs(got - expect));
  }
  ok = ok && worst < 1e-12;

  // Calibrated synthetic set: confident and always correct.
  std::vector<double> conf(40, 1.0);
  std::vector<bool> correct(40, true);
  ok = ok && ece(conf, correct, 10) == 0.0;

  std::ostringstream os;
  os << "worst oracle deviation " << worst << " (< 1e-12 required), calibrated ece "
     << ece(conf, correct, 10);
  return {ok, os.str()};
}

// ---------------------------------------------------------------------------
// 9. CKA identities plus the directional Stage-I alignment gain.

Outcome criterion9() {
  Rng rng(3001);
  Matrix x = random_normal(80, 16, rng);
  Matrix r = random_orthogonal(16, 16, rng);
  double self = cka_linear(x, x);
  double inv = cka_linear(x, scale(matmul(x, r), 3.0));
  bool ok = std::fabs(self - 1.0) < 1e-10 && std::fabs(inv - 1.0) < 1e-10;

  Rng cr(3002);
  auto train_set = lang::generate_corpus(300, 0.3, cr);
  Rng er(3003);
  auto eval_set = lang::generate_corpus(120, 0.3, er);

  int increased = 0;
  std::ostringstream os;
  os << "cka(x,x) " << self << ", invariance " << inv << "; ";
  for (uint64_t seed : {21, 22, 23, 24, 25}) {
    TrainConfig cfg;
    cfg.seed = seed;
    cfg.epochs = 6;
    cfg.stage1_fraction = 0.99;  // effectively Stage I throughout
    // Make the alignment loss the dominant Stage-I signal: at the default
    // beta the classification loss drowns it out on a corpus this small and
    // the pooled-feature CKA drifts with the seed instead of tracking
    // alignment.
    cfg.beta_stage1 = 0.5;
    TrainConfig init_cfg = cfg;
    init_cfg.epochs = 0;
    TrainResult before = train(init_cfg, train_set);
    TrainResult after = train(cfg, train_set);
    double c0 = cka_redundancy(before.state, eval_set, false);
    double c1 = cka_redundancy(after.state, eval_set, false);
    if (c1 > c0) ++increased;
    os << "seed " << seed << ": " << c0 << " -> " << c1 << "; ";
  }
  os << "increased " << increased << "/5 (>=4 required)";
  return {ok && increased >= 4, os.str()};
}

// ---------------------------------------------------------------------------
// 10. Determinism: two identical runs give byte-identical metrics CSV.

Outcome criterion10() {
  Rng cr(4001);
  auto train_set = lang::generate_corpus(600, 0.10, cr);
  Rng er(4002);
  auto eval_set = lang::generate_corpus(150, 0.10, er);
  TrainConfig cfg;
  cfg.seed = 9;
  TrainResult a = train(cfg, train_set, eval_set);
  TrainResult b = train(cfg, train_set, eval_set);
  std::string ca = metrics_csv(a.log), cb = metrics_csv(b.log);
  bool ok = ca == cb && !ca.empty();
  std::ostringstream os;
  os << (ok ? "two full runs byte-identical, " : "runs differ, ")
     << ca.size() << " bytes of metrics";
  return {ok, os.str()};
}

}  // namespace

int main(int argc, char** argv) {
  std::vector<std::function<Outcome()>> criteria{
      criterion1, criterion2, criterion3, criterion4, criterion5,
      criterion6, criterion7, criterion8, criterion9, criterion10};
  int only = argc > 1 ? std::atoi(argv[1]) : 0;
  int failures = 0;
  for (size_t i = 0; i < criteria.size(); ++i) {
    int num = static_cast<int>(i) + 1;
    if (only != 0 && only != num) continue;
    auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[i]();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                                start)
                      .count();
    std::printf("criterion %2d [%s] (%.1fs) %s\n", num, o.pass ? "PASS" : "FAIL",
                secs, o.detail.c_str());
    std::fflush(stdout);
    if (!o.pass) ++failures;
  }
  return failures == 0 ? 0 : 1;
}
