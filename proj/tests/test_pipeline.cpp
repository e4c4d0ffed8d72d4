#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

#include "fisherfuse/corpus.hpp"
#include "fisherfuse/errors.hpp"
#include "fisherfuse/metrics.hpp"
#include "fisherfuse/robustlab.hpp"
#include "fisherfuse/training.hpp"

using namespace ff;

namespace {

TrainConfig tiny_config() {
  TrainConfig cfg;
  cfg.d = 16;
  cfg.d_prime = 8;
  cfg.k = 4;
  cfg.heads = 2;
  cfg.rgcn_layers = 1;
  cfg.max_len = 128;
  cfg.batch = 8;
  cfg.epochs = 2;
  cfg.fisher_publish_freq = 4;
  cfg.queue_capacity = 64;
  cfg.seed = 7;
  return cfg;
}

std::vector<lang::CodeSample> tiny_corpus(int n, uint64_t seed, double ratio = 0.5) {
  Rng rng(seed);
  return lang::generate_corpus(n, ratio, rng);
}

std::string slurp(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  REQUIRE(f.good());
  return std::string(std::istreambuf_iterator<char>(f), {});
}

void spit(const std::string& path, const std::string& content) {
  std::ofstream f(path, std::ios::binary);
  f << content;
}

}  // namespace

TEST_CASE("config: JSON round-trip preserves every field") {
  TrainConfig a = tiny_config();
  a.lr = 3e-4;
  a.beta_stage2 = 0.031;
  a.stage1_fraction = 0.37;
  a.ablation.ncs_only = true;
  a.ablation.fisher_estimator = "power_iter";
  a.ablation.edge_shuffle_fraction = 0.75;
  TrainConfig b = TrainConfig::from_json(a.to_json());
  CHECK(b.to_json() == a.to_json());
  CHECK(b.lr == a.lr);
  CHECK(b.stage1_fraction == a.stage1_fraction);
  CHECK(b.ablation.ncs_only);
  CHECK(b.ablation.fisher_estimator == "power_iter");
}

TEST_CASE("config: validation rejects inconsistent settings") {
  TrainConfig c = tiny_config();
  c.k = c.d + 1;
  CHECK_THROWS_AS(c.validate(), ParameterError);
  c = tiny_config();
  c.heads = 3;  // 16 % 3 != 0
  CHECK_THROWS_AS(c.validate(), ParameterError);
  c = tiny_config();
  c.stage1_fraction = 1.0;
  CHECK_THROWS_AS(c.validate(), ParameterError);
  c = tiny_config();
  c.lr = 0.0;
  CHECK_THROWS_AS(c.validate(), ParameterError);
  c = tiny_config();
  c.fisher_momentum = 1.0;
  CHECK_THROWS_AS(c.validate(), ParameterError);
  CHECK_THROWS_AS(TrainConfig::from_json("not json"), ParameterError);
}

TEST_CASE("adamw: hand-computed two-step trajectory on a scalar") {
  ParamStore store;
  Matrix theta(1, 1);
  theta.at(0, 0) = 1.0;
  store.add("w", theta);
  AdamW opt(0.1, 0.0);
  Matrix g(1, 1);
  g.at(0, 0) = 0.5;
  std::unordered_map<std::string, Matrix> grads{{"w", g}};

  opt.step(store, grads);
  // Bias-corrected first step: update = lr * g / (|g| + eps) ~ lr.
  double expect1 = 1.0 - 0.1 * 0.5 / (0.5 + 1e-8);
  CHECK(store.at("w").at(0, 0) == doctest::Approx(expect1).epsilon(1e-12));

  opt.step(store, grads);
  double m = 0.9 * (0.1 * 0.5) + 0.1 * 0.5;
  double v = 0.999 * (0.001 * 0.25) + 0.001 * 0.25;
  double mh = m / (1.0 - 0.9 * 0.9);
  double vh = v / (1.0 - 0.999 * 0.999);
  double expect2 = expect1 - 0.1 * mh / (std::sqrt(vh) + 1e-8);
  CHECK(store.at("w").at(0, 0) == doctest::Approx(expect2).epsilon(1e-10));
}

TEST_CASE("adamw: decoupled weight decay shrinks an unused parameter") {
  ParamStore store;
  Matrix theta(1, 1);
  theta.at(0, 0) = 2.0;
  store.add("w", theta);
  AdamW opt(0.1, 0.5);
  std::unordered_map<std::string, Matrix> grads{{"w", Matrix(1, 1)}};
  opt.step(store, grads);
  // Zero gradient: the only movement is -lr * wd * theta.
  CHECK(store.at("w").at(0, 0) == doctest::Approx(2.0 * (1.0 - 0.1 * 0.5)).epsilon(1e-12));
}

TEST_CASE("train: zero epochs yields an empty log and untouched step counter") {
  TrainConfig cfg = tiny_config();
  cfg.epochs = 0;
  TrainResult r = train(cfg, tiny_corpus(16, 3));
  CHECK(r.log.empty());
  CHECK(r.state.step == 0);
}

TEST_CASE("train: rejects an empty or single-class corpus") {
  TrainConfig cfg = tiny_config();
  CHECK_THROWS_AS(train(cfg, {}), DataError);
  auto all = tiny_corpus(30, 5);
  std::vector<lang::CodeSample> benign_only;
  for (const auto& s : all)
    if (s.label == 0) benign_only.push_back(s);
  REQUIRE(benign_only.size() >= 4);
  CHECK_THROWS_AS(train(cfg, benign_only), DataError);
}

TEST_CASE("train: identical configs give byte-identical metrics") {
  TrainConfig cfg = tiny_config();
  auto corpus = tiny_corpus(40, 9);
  TrainResult a = train(cfg, corpus);
  TrainResult b = train(cfg, corpus);
  REQUIRE(!a.log.empty());
  CHECK(metrics_csv(a.log) == metrics_csv(b.log));
  for (const std::string& name : a.state.params.names) {
    const Matrix& pa = a.state.params.at(name);
    const Matrix& pb = b.state.params.at(name);
    CHECK(pa.data == pb.data);
  }
}

TEST_CASE("train: cross-entropy decreases over epochs on a small corpus") {
  TrainConfig cfg = tiny_config();
  cfg.epochs = 6;
  auto corpus = tiny_corpus(48, 11);
  TrainResult r = train(cfg, corpus);
  REQUIRE(r.log.size() == 6);
  CHECK(r.log.back().l_ce < r.log.front().l_ce);
  for (const EpochRow& row : r.log) {
    CHECK(std::isfinite(row.l_ce));
    CHECK(row.accuracy >= 0.0);
    CHECK(row.accuracy <= 1.0);
  }
}

TEST_CASE("train: stage boundary moves with stage1_fraction") {
  TrainConfig cfg = tiny_config();
  auto corpus = tiny_corpus(32, 13);
  TrainResult r = train(cfg, corpus);
  long per_epoch = (32 + cfg.batch - 1) / cfg.batch;
  long total = per_epoch * cfg.epochs;
  CHECK(r.state.total_steps == total);
  CHECK(r.state.stage2_start ==
        static_cast<long>(std::ceil(cfg.stage1_fraction * total)));
  CHECK(r.state.in_stage2());
}

TEST_CASE("metrics csv: fixed header and one row per epoch") {
  TrainConfig cfg = tiny_config();
  cfg.epochs = 1;
  TrainResult r = train(cfg, tiny_corpus(16, 15));
  std::string csv = metrics_csv(r.log);
  CHECK(csv.rfind("epoch,step,L_ce,L_align,beta,alpha_mean,energy_ratio,"
                  "P,R,Acc,F1,ECE\n", 0) == 0);
  int lines = 0;
  for (char ch : csv)
    if (ch == '\n') ++lines;
  CHECK(lines == 2);  // header + one epoch
}

TEST_CASE("checkpoint: round trip preserves parameters, Fisher state, and outputs") {
  TrainConfig cfg = tiny_config();
  auto corpus = tiny_corpus(32, 17);
  TrainResult r = train(cfg, corpus);
  std::string path = "ckpt_roundtrip.bin";
  save_checkpoint(path, r.state);
  TrainState loaded = load_checkpoint(path);

  CHECK(loaded.step == r.state.step);
  CHECK(loaded.total_steps == r.state.total_steps);
  CHECK(loaded.stage2_start == r.state.stage2_start);
  CHECK(loaded.cfg.to_json() == r.state.cfg.to_json());
  CHECK(loaded.fisher.step == r.state.fisher.step);
  CHECK(loaded.fisher.u_live.data == r.state.fisher.u_live.data);
  CHECK(loaded.fisher.u_pub.data == r.state.fisher.u_pub.data);
  CHECK(loaded.fisher.g_smooth.data == r.state.fisher.g_smooth.data);
  CHECK(loaded.u_frozen.data == r.state.u_frozen.data);
  for (const std::string& name : r.state.params.names)
    CHECK(loaded.params.at(name).data == r.state.params.at(name).data);

  Evaluation a = evaluate_corpus(r.state, corpus, true);
  Evaluation b = evaluate_corpus(loaded, corpus, true);
  CHECK(a.probs == b.probs);
  std::remove(path.c_str());
}

TEST_CASE("checkpoint: corrupted magic and wrong version fail loudly") {
  TrainConfig cfg = tiny_config();
  cfg.epochs = 1;
  TrainResult r = train(cfg, tiny_corpus(16, 19));
  std::string path = "ckpt_corrupt.bin";
  save_checkpoint(path, r.state);

  std::string raw = slurp(path);
  std::string bad_magic = raw;
  bad_magic[0] = 'X';
  spit(path, bad_magic);
  CHECK_THROWS_AS(load_checkpoint(path), CheckpointError);

  std::string bad_version = raw;
  bad_version[8] = static_cast<char>(99);  // version field follows the magic
  spit(path, bad_version);
  CHECK_THROWS_AS(load_checkpoint(path), CheckpointError);

  CHECK_THROWS_AS(load_checkpoint("no_such_checkpoint.bin"), CheckpointError);
  std::remove(path.c_str());
}

TEST_CASE("confusion and prf1 match a naive loop on randomized cases") {
  Rng rng(21);
  for (int t = 0; t < 100; ++t) {
    int n = 1 + static_cast<int>(rng.uniform() * 40);
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
      if (pred == 1 && truth[i] == 1) ++tp;
      if (pred == 1 && truth[i] == 0) ++fp;
      if (pred == 0 && truth[i] == 0) ++tn;
      if (pred == 0 && truth[i] == 1) ++fn;
    }
    CHECK(c.tp == tp);
    CHECK(c.fp == fp);
    CHECK(c.tn == tn);
    CHECK(c.fn == fn);

    Rates r = prf1(c);
    if (tp + fp > 0)
      CHECK(std::fabs(r.precision - double(tp) / (tp + fp)) < 1e-12);
    else
      CHECK(r.precision_degenerate);
    if (tp + fn > 0)
      CHECK(std::fabs(r.recall - double(tp) / (tp + fn)) < 1e-12);
    else
      CHECK(r.recall_degenerate);
    CHECK(std::fabs(r.accuracy - double(tp + tn) / n) < 1e-12);
    double p = tp + fp > 0 ? double(tp) / (tp + fp) : 0.0;
    double rec = tp + fn > 0 ? double(tp) / (tp + fn) : 0.0;
    double f1 = p + rec > 0 ? 2 * p * rec / (p + rec) : 0.0;
    CHECK(std::fabs(r.f1 - f1) < 1e-12);
  }
}

TEST_CASE("ece matches a naive binning loop on randomized cases") {
  Rng rng(23);
  for (int t = 0; t < 100; ++t) {
    int n = 1 + static_cast<int>(rng.uniform() * 60);
    int bins = 2 + static_cast<int>(rng.uniform() * 10);
    std::vector<double> conf(n);
    std::vector<bool> correct(n);
    for (int i = 0; i < n; ++i) {
      conf[i] = 0.5 + 0.5 * rng.uniform();
      correct[i] = rng.uniform() < conf[i];
    }
    if (t % 7 == 0) conf[0] = 1.0;  // exercise the top-edge rule

    double got = ece(conf, correct, bins);

    std::vector<double> csum(bins, 0), acc(bins, 0);
    std::vector<long> cnt(bins, 0);
    double width = 0.5 / bins;
    for (int i = 0; i < n; ++i) {
      int bi = conf[i] >= 1.0 ? bins - 1
                              : static_cast<int>((conf[i] - 0.5) / width);
      csum[bi] += conf[i];
      acc[bi] += correct[i] ? 1.0 : 0.0;
      ++cnt[bi];
    }
    double expect = 0;
    for (int bi = 0; bi < bins; ++bi)
      if (cnt[bi] > 0)
        expect += (double(cnt[bi]) / n) *
                  std::fabs(acc[bi] / cnt[bi] - csum[bi] / cnt[bi]);
    CHECK(std::fabs(got - expect) < 1e-12);
  }
}

TEST_CASE("ece is zero for a perfectly calibrated degenerate set") {
  // Every prediction confident and correct: |acc - conf| = 0 in the top bin.
  std::vector<double> conf(20, 1.0);
  std::vector<bool> correct(20, true);
  CHECK(ece(conf, correct, 10) == 0.0);
}

TEST_CASE("fit_slope: exact line through the origin and degenerate input") {
  std::vector<NoiseRow> rows;
  for (double e : {0.1, 0.2, 0.4, 0.8}) {
    NoiseRow r;
    r.epsilon = e;
    r.mean_dev = 2.5 * e;
    rows.push_back(r);
  }
  SlopeFit f = fit_slope(rows);
  CHECK(f.slope == doctest::Approx(2.5).epsilon(1e-12));
  CHECK(f.r2 == doctest::Approx(1.0).epsilon(1e-12));
  CHECK_FALSE(f.degenerate);

  for (NoiseRow& r : rows) r.mean_dev = 0.0;
  SlopeFit z = fit_slope(rows);
  CHECK(z.degenerate);

  CHECK_THROWS_AS(fit_slope(std::vector<NoiseRow>(2)), InsufficientDataError);
}

TEST_CASE("epsilon grid: log-spaced, ascending, scaled by feature norm") {
  Rng rng(29);
  Matrix h = random_normal(6, 16, rng);
  std::vector<double> grid = default_epsilon_grid(h, 8);
  REQUIRE(grid.size() == 8);
  double norm = frob_norm(h);
  CHECK(grid.front() == doctest::Approx(0.01 * norm).epsilon(1e-12));
  CHECK(grid.back() == doctest::Approx(1.0 * norm).epsilon(1e-12));
  for (size_t i = 1; i < grid.size(); ++i) {
    CHECK(grid[i] > grid[i - 1]);
    // log-spacing: constant ratio between neighbors
    double ratio = grid[1] / grid[0];
    CHECK(grid[i] / grid[i - 1] == doctest::Approx(ratio).epsilon(1e-9));
  }
}

TEST_CASE("noise injection: perpendicular noise is annihilated, parallel is not") {
  FusionSnapshot snap = make_snapshot(16, 4, 2, 6, 10, 31, true);
  NoiseExperiment exp;
  exp.epsilons = default_epsilon_grid(snap.h_cpg, 4);
  exp.trials = 5;
  exp.seed = 33;

  exp.mode = NoiseMode::Perpendicular;
  for (const NoiseRow& r : inject_and_measure(snap, exp)) {
    CHECK(r.mean_dev < 1e-8);
    CHECK(r.mean_dev_comp < 1e-8);
  }

  exp.mode = NoiseMode::Parallel;
  std::vector<NoiseRow> par = inject_and_measure(snap, exp);
  CHECK(par.front().mean_dev > 1e-8);
  CHECK(par.back().mean_dev > par.front().mean_dev);
}

TEST_CASE("snapshot_forward: deterministic and sensitive to the graph features") {
  FusionSnapshot snap = make_snapshot(16, 4, 2, 5, 8, 35, true);
  Matrix a = snapshot_forward(snap, snap.h_cpg);
  Matrix b = snapshot_forward(snap, snap.h_cpg);
  CHECK(a.data == b.data);
  Rng rng(37);
  Matrix shifted = add(snap.h_cpg, scale(matmul(random_normal(8, 4, rng),
                                                transpose(snap.u)),
                                         0.1));
  Matrix c = snapshot_forward(snap, shifted);
  double diff = 0;
  for (size_t i = 0; i < a.data.size(); ++i)
    diff = std::max(diff, std::fabs(a.data[i] - c.data[i]));
  CHECK(diff > 1e-10);
}

TEST_CASE("noise experiment summary: ratio fields are coherent") {
  NoiseSummary s = run_noise_experiment(16, 4, 2, 5, 39);
  CHECK(s.d == 16);
  CHECK(s.k == 4);
  CHECK(s.theoretical_ratio == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(s.measured_ratio > 0.0);
  CHECK(s.measured_ratio < 1.0);  // DFA suppresses isotropic noise
  CHECK(s.dfa_perpendicular.slope < 1e-6);
  CHECK(s.dfa_isotropic.r2 > 0.99);
  CHECK(s.full_isotropic.r2 > 0.99);
}

TEST_CASE("attention report: masses normalize over source lines") {
  TrainConfig cfg = tiny_config();
  cfg.epochs = 1;
  auto corpus = tiny_corpus(24, 41);
  TrainResult r = train(cfg, corpus);
  LineAttention att = attention_report(corpus.front(), r.state);
  REQUIRE(!att.lines.empty());
  REQUIRE(att.standard_mass.size() == att.lines.size());
  REQUIRE(att.fisher_mass.size() == att.lines.size());
  double s1 = 0, s2 = 0;
  for (size_t i = 0; i < att.lines.size(); ++i) {
    CHECK(att.standard_mass[i] >= 0.0);
    CHECK(att.fisher_mass[i] >= 0.0);
    s1 += att.standard_mass[i];
    s2 += att.fisher_mass[i];
  }
  CHECK(s1 == doctest::Approx(1.0).epsilon(1e-10));
  CHECK(s2 == doctest::Approx(1.0).epsilon(1e-10));
  CHECK(!att.to_csv().empty());
}

TEST_CASE("cka_redundancy: defined on >= 50 samples, rejects fewer") {
  TrainConfig cfg = tiny_config();
  cfg.epochs = 1;
  auto corpus = tiny_corpus(60, 43);
  TrainResult r = train(cfg, corpus);
  CHECK_THROWS_AS(
      cka_redundancy(r.state, {corpus.begin(), corpus.begin() + 10}, true),
      InsufficientDataError);
  double c = cka_redundancy(r.state, corpus, true);
  CHECK(c >= 0.0);
  CHECK(c <= 1.0 + 1e-9);
}

TEST_CASE("ablation: ncs_only and no_fisher states evaluate without error") {
  auto corpus = tiny_corpus(32, 45);
  for (auto setter : {+[](TrainConfig& c) { c.ablation.ncs_only = true; },
                      +[](TrainConfig& c) { c.ablation.no_fisher = true; },
                      +[](TrainConfig& c) { c.ablation.no_gate = true; },
                      +[](TrainConfig& c) { c.ablation.random_bases = true; },
                      +[](TrainConfig& c) { c.ablation.no_align = true; }}) {
    TrainConfig cfg = tiny_config();
    cfg.epochs = 1;
    setter(cfg);
    TrainResult r = train(cfg, corpus);
    Evaluation e = evaluate_corpus(r.state, corpus, true);
    CHECK(e.report.counts.n() == 32);
  }
}

TEST_CASE("ablation: alternative Fisher estimators train end to end") {
  auto corpus = tiny_corpus(24, 47);
  for (const char* est : {"direct_eig", "power_iter", "randomized", "batch_no_ema"}) {
    TrainConfig cfg = tiny_config();
    cfg.epochs = 2;
    cfg.ablation.fisher_estimator = est;
    TrainResult r = train(cfg, corpus);
    CHECK(r.state.step == r.state.total_steps);
  }
  TrainConfig bad = tiny_config();
  bad.ablation.fisher_estimator = "banana";
  CHECK_THROWS_AS(bad.validate(), ParameterError);
}
