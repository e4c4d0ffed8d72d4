// Command-line front end: corpus generation, training, evaluation, ablation
// sweeps, and the noise-robustness experiments.
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"

#include "fisherfuse/corpus.hpp"
#include "fisherfuse/robustlab.hpp"
#include "fisherfuse/training.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kVersion = "fisherfuse 1.0.0";

std::string now_iso() {
  auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&t));
  return buf;
}

std::string read_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw ff::DataError("cannot read " + path);
  std::ostringstream os;
  os << f.rdbuf();
  return os.str();
}

void write_file(const std::string& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw ff::DataError("cannot write " + path);
  f << text;
  if (!f) throw ff::DataError("write failed: " + path);
}

/// Every output directory gets exactly one manifest, written before work
/// starts and finalized with the end timestamp afterwards.
struct Manifest {
  json j;
  std::string path;

  Manifest(const std::string& out_dir, const std::string& subcommand, uint64_t seed,
           const json& config, const std::vector<std::string>& inputs) {
    fs::create_directories(out_dir);
    path = (fs::path(out_dir) / "manifest.json").string();
    j["subcommand"] = subcommand;
    j["config"] = config;
    j["seed"] = seed;
    j["inputs"] = inputs;
    j["output_dir"] = out_dir;
    j["version"] = kVersion;
    j["started"] = now_iso();
    write_file(path, j.dump(2) + "\n");
  }
  void finish() {
    j["finished"] = now_iso();
    write_file(path, j.dump(2) + "\n");
  }
};

std::string default_out_root() {
  const char* env = std::getenv("FISHERFUSE_OUT");
  return env ? env : "runs";
}

std::vector<ff::lang::CodeSample> load_corpus(const std::string& path) {
  auto samples = ff::lang::corpus_from_jsonl(read_file(path));
  if (samples.empty()) throw ff::DataError("empty corpus: " + path);
  return samples;
}

void apply_ablation_name(ff::TrainConfig& cfg, const std::string& name) {
  if (name.empty() || name == "full") return;
  auto& a = cfg.ablation;
  if (name == "no_fisher") a.no_fisher = true;
  else if (name == "random_bases") a.random_bases = true;
  else if (name == "no_gate") a.no_gate = true;
  else if (name == "no_align") a.no_align = true;
  else if (name == "no_stage1") a.no_stage1 = true;
  else if (name == "ncs_only") a.ncs_only = true;
  else if (name == "edge_shuffle") a.graph_perturbation = "edge_shuffle";
  else if (name == "degree_rewire") a.graph_perturbation = "degree_rewire";
  else if (name == "remove_ddg") a.graph_perturbation = "remove_ddg";
  else if (name == "remove_cdg") a.graph_perturbation = "remove_cdg";
  else if (name == "direct_eig" || name == "power_iter" || name == "randomized" ||
           name == "batch_no_ema" || name == "oja")
    a.fisher_estimator = name;
  else
    throw ff::ParameterError("unknown ablation: " + name);
}

struct TrainFlags {
  std::string config_path, data_path, eval_path, out_dir, ablation;
  int epochs = -1, batch = -1, k = -1, d = -1, publish_freq = -1;
  double lr = -1, stage1_fraction = -1, temperature = -1;
  double beta1 = -1, beta2 = -1;
  long seed = -1;
};

ff::TrainConfig resolve_config(const TrainFlags& f) {
  ff::TrainConfig cfg;  // defaults <
  if (!f.config_path.empty())
    cfg = ff::TrainConfig::from_json(read_file(f.config_path));  // config file <
  if (f.epochs >= 0) cfg.epochs = f.epochs;                      // flags
  if (f.batch > 0) cfg.batch = f.batch;
  if (f.k > 0) cfg.k = f.k;
  if (f.d > 0) cfg.d = f.d;
  if (f.publish_freq > 0) cfg.fisher_publish_freq = f.publish_freq;
  if (f.lr > 0) cfg.lr = f.lr;
  if (f.stage1_fraction > 0) cfg.stage1_fraction = f.stage1_fraction;
  if (f.temperature > 0) cfg.temperature = f.temperature;
  if (f.beta1 >= 0) cfg.beta_stage1 = f.beta1;
  if (f.beta2 >= 0) cfg.beta_stage2 = f.beta2;
  if (f.seed >= 0) cfg.seed = static_cast<uint64_t>(f.seed);
  apply_ablation_name(cfg, f.ablation);
  cfg.validate();
  return cfg;
}

int cmd_gen(int n, double vuln_ratio, long seed, const std::string& out_dir) {
  if (n <= 0) throw ff::ParameterError("--n must be positive");
  if (vuln_ratio < 0 || vuln_ratio > 1)
    throw ff::ParameterError("--vuln-ratio must lie in [0,1]");
  json cfg{{"n", n}, {"vuln_ratio", vuln_ratio}};
  Manifest mf(out_dir, "gen", static_cast<uint64_t>(seed), cfg, {});
  ff::Rng rng(static_cast<uint64_t>(seed));
  auto samples = ff::lang::generate_corpus(n, vuln_ratio, rng);
  json header{{"header", true}, {"seed", seed}, {"n", n}, {"vuln_ratio", vuln_ratio}};
  write_file((fs::path(out_dir) / "corpus.jsonl").string(),
             header.dump() + "\n" + ff::lang::corpus_to_jsonl(samples));
  mf.finish();
  std::cout << "wrote " << samples.size() << " samples to " << out_dir << "/corpus.jsonl\n";
  return 0;
}

int cmd_train(const TrainFlags& f) {
  ff::TrainConfig cfg = resolve_config(f);
  std::string out = f.out_dir.empty() ? default_out_root() + "/train" : f.out_dir;
  std::vector<std::string> inputs{f.data_path};
  if (!f.eval_path.empty()) inputs.push_back(f.eval_path);
  Manifest mf(out, "train", cfg.seed, json::parse(cfg.to_json()), inputs);

  auto corpus = load_corpus(f.data_path);
  std::vector<ff::lang::CodeSample> eval_set;
  if (!f.eval_path.empty()) eval_set = load_corpus(f.eval_path);

  ff::TrainResult res = ff::train(cfg, corpus, eval_set);
  std::string tag = f.ablation.empty() || f.ablation == "full" ? "" : "-" + f.ablation;
  write_file((fs::path(out) / ("metrics" + tag + ".csv")).string(),
             ff::metrics_csv(res.log));
  ff::save_checkpoint((fs::path(out) / "model.ckpt").string(), res.state);
  mf.finish();
  if (!res.log.empty()) {
    const auto& last = res.log.back();
    std::cout << "final F1 " << last.f1 << " acc " << last.accuracy << " over "
              << last.step << " steps\n";
  } else {
    std::cout << "epochs=0: wrote initialized checkpoint\n";
  }
  return 0;
}

int cmd_eval(const std::string& ckpt, const std::string& data, const std::string& out_dir) {
  ff::TrainState st = ff::load_checkpoint(ckpt);
  auto samples = load_corpus(data);
  ff::Evaluation ev = ff::evaluate_corpus(st, samples, st.in_stage2());
  std::string text = ev.report.to_json() + "\n";
  std::cout << text;
  if (!out_dir.empty()) {
    Manifest mf(out_dir, "eval", st.cfg.seed, json::parse(st.cfg.to_json()), {ckpt, data});
    write_file((fs::path(out_dir) / "report.json").string(), text);
    mf.finish();
  }
  return 0;
}

int cmd_ablate(const std::string& suite, const std::string& data, const std::string& eval_path,
               int seeds, int epochs, const std::string& out_dir) {
  std::vector<std::string> variants;
  if (suite == "core")
    variants = {"full", "no_fisher", "random_bases", "no_gate", "no_align",
                "no_stage1", "ncs_only"};
  else if (suite == "estimators")
    variants = {"oja", "direct_eig", "power_iter", "randomized", "batch_no_ema"};
  else if (suite == "structure")
    variants = {"full", "edge_shuffle", "degree_rewire", "remove_ddg", "remove_cdg"};
  else
    throw ff::ParameterError("unknown suite: " + suite + " (core|estimators|structure)");
  if (seeds < 1) throw ff::ParameterError("--seeds must be >= 1");

  std::string out = out_dir.empty() ? default_out_root() + "/ablate-" + suite : out_dir;
  json cfgj{{"suite", suite}, {"seeds", seeds}, {"epochs", epochs}};
  Manifest mf(out, "ablate", 0, cfgj, {data});

  auto corpus = load_corpus(data);
  std::vector<ff::lang::CodeSample> eval_set;
  if (!eval_path.empty()) eval_set = load_corpus(eval_path);

  std::string csv = "variant,seeds,P,R,Acc,F1,ECE,delta_f1\n";
  double base_f1 = 0;
  bool have_base = false;
  for (const std::string& name : variants) {
    double p = 0, r = 0, acc = 0, f1 = 0, e = 0;
    for (int s = 0; s < seeds; ++s) {
      ff::TrainConfig cfg;
      cfg.epochs = epochs;
      cfg.seed = 1000 + s;
      apply_ablation_name(cfg, name);
      ff::TrainResult res = ff::train(cfg, corpus, eval_set);
      const ff::EpochRow& last = res.log.back();
      p += last.precision;
      r += last.recall;
      acc += last.accuracy;
      f1 += last.f1;
      e += last.ece;
    }
    p /= seeds; r /= seeds; acc /= seeds; f1 /= seeds; e /= seeds;
    if (!have_base) {
      base_f1 = f1;  // first row of each suite is the reference model
      have_base = true;
    }
    char buf[320];
    std::snprintf(buf, sizeof(buf), "%s,%d,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f\n", name.c_str(),
                  seeds, p, r, acc, f1, e, f1 - base_f1);
    csv += buf;
    std::cout << buf;
  }
  write_file((fs::path(out) / "ablation.csv").string(), csv);
  mf.finish();
  return 0;
}

int cmd_noise(const std::string& ckpt, bool random_init, int d, int k, int heads,
              int trials, long seed, const std::string& out_dir) {
  if (trials < 3) throw ff::ParameterError("--trials must be >= 3");
  std::string out = out_dir.empty() ? default_out_root() + "/noise" : out_dir;
  ff::NoiseSummary summary;
  std::vector<ff::NoiseRow> rows;
  if (!random_init && !ckpt.empty()) {
    ff::TrainState st = ff::load_checkpoint(ckpt);
    d = st.cfg.d;
    k = st.cfg.k;
    heads = st.cfg.heads;
    json cfgj{{"d", d}, {"k", k}, {"trials", trials}, {"ckpt", ckpt}};
    Manifest mf(out, "noise", static_cast<uint64_t>(seed), cfgj, {ckpt});
    // Trained fusion weights and published bases; synthetic feature matrices.
    ff::FusionSnapshot snap =
        ff::make_snapshot(d, k, heads, 24, 24, static_cast<uint64_t>(seed), true);
    for (const std::string& n : st.params.names)
      if (n.rfind("dfa.", 0) == 0 || n.rfind("gate.", 0) == 0 || n.rfind("cls.", 0) == 0)
        snap.params.at(n) = st.params.at(n);
    snap.u = st.fisher.u_pub;
    ff::FusionSnapshot full = snap;
    full.fusion.fisher_guidance = false;
    ff::NoiseExperiment exp;
    exp.epsilons = ff::default_epsilon_grid(snap.h_cpg);
    exp.trials = trials;
    exp.seed = static_cast<uint64_t>(seed) ^ 0xA5A5;
    summary.d = d;
    summary.k = k;
    summary.theoretical_ratio = std::sqrt(static_cast<double>(k) / d);
    exp.mode = ff::NoiseMode::Parallel;
    auto rp = ff::inject_and_measure(snap, exp);
    summary.dfa_parallel = ff::fit_slope(rp);
    exp.mode = ff::NoiseMode::Perpendicular;
    auto rq = ff::inject_and_measure(snap, exp);
    summary.dfa_perpendicular = ff::fit_slope(rq);
    exp.mode = ff::NoiseMode::Isotropic;
    auto ri = ff::inject_and_measure(snap, exp);
    summary.dfa_isotropic = ff::fit_slope(ri);
    auto rf = ff::inject_and_measure(full, exp);
    summary.full_isotropic = ff::fit_slope(rf);
    summary.measured_ratio = summary.dfa_isotropic.slope / summary.full_isotropic.slope;
    for (auto* v : {&rp, &rq, &ri, &rf}) rows.insert(rows.end(), v->begin(), v->end());
    write_file((fs::path(out) / "noise.csv").string(), ff::noise_csv(rows));
    write_file((fs::path(out) / "summary.json").string(), summary.to_json() + "\n");
    mf.finish();
  } else {
    json cfgj{{"d", d}, {"k", k}, {"trials", trials}, {"random_init", true}};
    Manifest mf(out, "noise", static_cast<uint64_t>(seed), cfgj, {});
    summary = ff::run_noise_experiment(d, k, heads, trials,
                                       static_cast<uint64_t>(seed), &rows);
    write_file((fs::path(out) / "noise.csv").string(), ff::noise_csv(rows));
    write_file((fs::path(out) / "summary.json").string(), summary.to_json() + "\n");
    mf.finish();
  }
  std::cout << summary.to_json() << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Fisher-guided multimodal fusion testbed for code vulnerability detection"};
  app.require_subcommand(1);

  auto* gen = app.add_subcommand("gen", "generate a synthetic labeled corpus");
  int gen_n = 2000;
  double gen_ratio = 0.10;
  long gen_seed = 1;
  std::string gen_out = default_out_root() + "/corpus";
  gen->add_option("--n", gen_n, "sample count");
  gen->add_option("--vuln-ratio", gen_ratio, "fraction of vulnerable samples");
  gen->add_option("--seed", gen_seed, "generator seed");
  gen->add_option("--out", gen_out, "output directory");

  auto* train = app.add_subcommand("train", "run the two-stage training loop");
  TrainFlags tf;
  train->add_option("--config", tf.config_path, "JSON config file");
  train->add_option("--data", tf.data_path, "training corpus JSONL")->required();
  train->add_option("--eval", tf.eval_path, "held-out corpus for the metrics log");
  train->add_option("--out", tf.out_dir, "output directory");
  train->add_option("--ablation", tf.ablation, "named ablation variant");
  train->add_option("--epochs", tf.epochs, "override epochs");
  train->add_option("--batch", tf.batch, "override batch size");
  train->add_option("--k", tf.k, "override subspace rank");
  train->add_option("--d", tf.d, "override feature width");
  train->add_option("--lr", tf.lr, "override learning rate");
  train->add_option("--seed", tf.seed, "override seed");
  train->add_option("--publish-freq", tf.publish_freq, "override Fisher publish period");
  train->add_option("--stage1-fraction", tf.stage1_fraction, "override stage split");
  train->add_option("--temperature", tf.temperature, "override InfoNCE temperature");
  train->add_option("--beta-stage1", tf.beta1, "override stage-I alignment weight");
  train->add_option("--beta-stage2", tf.beta2, "override stage-II alignment weight");

  auto* ev = app.add_subcommand("eval", "evaluate a checkpoint");
  std::string ev_ckpt, ev_data, ev_out;
  ev->add_option("--ckpt", ev_ckpt, "checkpoint path")->required();
  ev->add_option("--data", ev_data, "corpus JSONL")->required();
  ev->add_option("--out", ev_out, "optional output directory");

  auto* ab = app.add_subcommand("ablate", "run an ablation suite");
  std::string ab_suite, ab_data, ab_eval, ab_out;
  int ab_seeds = 3, ab_epochs = 6;
  ab->add_option("--suite", ab_suite, "core | estimators | structure")->required();
  ab->add_option("--data", ab_data, "training corpus JSONL")->required();
  ab->add_option("--eval", ab_eval, "held-out corpus");
  ab->add_option("--seeds", ab_seeds, "seeds per variant");
  ab->add_option("--epochs", ab_epochs, "epochs per run");
  ab->add_option("--out", ab_out, "output directory");

  auto* nz = app.add_subcommand("noise", "directional noise-injection experiment");
  std::string nz_ckpt, nz_out;
  bool nz_random = false;
  int nz_d = 64, nz_k = 8, nz_heads = 4, nz_trials = 100;
  long nz_seed = 7;
  nz->add_option("--ckpt", nz_ckpt, "checkpoint supplying fusion weights");
  nz->add_flag("--random-init", nz_random, "use a random-init snapshot");
  nz->add_option("--d", nz_d, "feature width (random-init mode)");
  nz->add_option("--k", nz_k, "subspace rank (random-init mode)");
  nz->add_option("--heads", nz_heads, "attention heads");
  nz->add_option("--trials", nz_trials, "trials per grid point");
  nz->add_option("--seed", nz_seed, "experiment seed");
  nz->add_option("--out", nz_out, "output directory");

  try {
    app.parse(argc, argv);
    if (gen->parsed()) return cmd_gen(gen_n, gen_ratio, gen_seed, gen_out);
    if (train->parsed()) return cmd_train(tf);
    if (ev->parsed()) return cmd_eval(ev_ckpt, ev_data, ev_out);
    if (ab->parsed()) return cmd_ablate(ab_suite, ab_data, ab_eval, ab_seeds, ab_epochs, ab_out);
    if (nz->parsed()) {
      if (nz_ckpt.empty() && !nz_random)
        throw ff::ParameterError("noise: pass --ckpt or --random-init");
      return cmd_noise(nz_ckpt, nz_random, nz_d, nz_k, nz_heads, nz_trials, nz_seed, nz_out);
    }
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 2;
  } catch (const ff::CheckpointError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const ff::DivergenceError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 4;
  } catch (const ff::ParameterError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const ff::DataError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const ff::UnsupportedAblationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
