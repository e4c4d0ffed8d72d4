#include "fisherfuse/training.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <numbers>
#include <numeric>

#include "json.hpp"

namespace ff {

void TrainConfig::validate() const {
  if (d <= 0 || d_prime <= 0 || k <= 0 || heads <= 0 || rgcn_layers <= 0)
    throw ParameterError("config: dimensions must be positive");
  if (k > d) throw ParameterError("config: k must not exceed d");
  if (d % heads != 0) throw ParameterError("config: d must be divisible by heads");
  if (batch <= 0 || epochs < 0) throw ParameterError("config: bad batch/epochs");
  if (lr <= 0 || temperature <= 0 || fisher_eta0 <= 0)
    throw ParameterError("config: rates must be positive");
  if (weight_decay < 0) throw ParameterError("config: negative weight decay");
  if (stage1_fraction <= 0 || stage1_fraction >= 1)
    throw ParameterError("config: stage1_fraction must lie in (0,1)");
  if (fisher_momentum < 0 || fisher_momentum >= 1)
    throw ParameterError("config: fisher momentum must lie in [0,1)");
  if (fisher_publish_freq <= 0 || queue_capacity < 0 || max_len <= 0)
    throw ParameterError("config: bad publish_freq/queue/max_len");
  if (ablation.edge_shuffle_fraction < 0 || ablation.edge_shuffle_fraction > 1)
    throw ParameterError("config: edge_shuffle_fraction must lie in [0,1]");
  if (ablation.fisher_estimator != "oja")
    estimator_from_name(ablation.fisher_estimator);  // rejects unknown names
}

namespace {

nlohmann::json config_json(const TrainConfig& c) {
  nlohmann::json j;
  j["d"] = c.d;
  j["d_prime"] = c.d_prime;
  j["k"] = c.k;
  j["heads"] = c.heads;
  j["rgcn_layers"] = c.rgcn_layers;
  j["max_len"] = c.max_len;
  j["batch"] = c.batch;
  j["epochs"] = c.epochs;
  j["lr"] = c.lr;
  j["weight_decay"] = c.weight_decay;
  j["temperature"] = c.temperature;
  j["beta_stage1"] = c.beta_stage1;
  j["beta_stage2"] = c.beta_stage2;
  j["stage1_fraction"] = c.stage1_fraction;
  j["fisher_momentum"] = c.fisher_momentum;
  j["fisher_eta0"] = c.fisher_eta0;
  j["fisher_publish_freq"] = c.fisher_publish_freq;
  j["queue_capacity"] = c.queue_capacity;
  j["seed"] = c.seed;
  nlohmann::json a;
  a["no_fisher"] = c.ablation.no_fisher;
  a["random_bases"] = c.ablation.random_bases;
  a["no_gate"] = c.ablation.no_gate;
  a["no_align"] = c.ablation.no_align;
  a["no_stage1"] = c.ablation.no_stage1;
  a["ncs_only"] = c.ablation.ncs_only;
  a["fisher_estimator"] = c.ablation.fisher_estimator;
  a["graph_perturbation"] = c.ablation.graph_perturbation;
  a["edge_shuffle_fraction"] = c.ablation.edge_shuffle_fraction;
  j["ablation"] = a;
  return j;
}

template <typename T>
void maybe(const nlohmann::json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

}  // namespace

std::string TrainConfig::to_json() const { return config_json(*this).dump(2); }

TrainConfig TrainConfig::from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ParameterError(std::string("config: invalid JSON: ") + e.what());
  }
  TrainConfig c;
  try {
    maybe(j, "d", c.d);
    maybe(j, "d_prime", c.d_prime);
    maybe(j, "k", c.k);
    maybe(j, "heads", c.heads);
    maybe(j, "rgcn_layers", c.rgcn_layers);
    maybe(j, "max_len", c.max_len);
    maybe(j, "batch", c.batch);
    maybe(j, "epochs", c.epochs);
    maybe(j, "lr", c.lr);
    maybe(j, "weight_decay", c.weight_decay);
    maybe(j, "temperature", c.temperature);
    maybe(j, "beta_stage1", c.beta_stage1);
    maybe(j, "beta_stage2", c.beta_stage2);
    maybe(j, "stage1_fraction", c.stage1_fraction);
    maybe(j, "fisher_momentum", c.fisher_momentum);
    maybe(j, "fisher_eta0", c.fisher_eta0);
    maybe(j, "fisher_publish_freq", c.fisher_publish_freq);
    maybe(j, "queue_capacity", c.queue_capacity);
    maybe(j, "seed", c.seed);
    if (j.contains("ablation")) {
      const auto& a = j.at("ablation");
      maybe(a, "no_fisher", c.ablation.no_fisher);
      maybe(a, "random_bases", c.ablation.random_bases);
      maybe(a, "no_gate", c.ablation.no_gate);
      maybe(a, "no_align", c.ablation.no_align);
      maybe(a, "no_stage1", c.ablation.no_stage1);
      maybe(a, "ncs_only", c.ablation.ncs_only);
      maybe(a, "fisher_estimator", c.ablation.fisher_estimator);
      maybe(a, "graph_perturbation", c.ablation.graph_perturbation);
      maybe(a, "edge_shuffle_fraction", c.ablation.edge_shuffle_fraction);
    }
  } catch (const nlohmann::json::exception& e) {
    throw ParameterError(std::string("config: bad field: ") + e.what());
  }
  c.validate();
  return c;
}

ModelConfig TrainConfig::model_config() const {
  ModelConfig m;
  m.enc.d = d;
  m.enc.max_len = max_len;
  m.enc.rgcn_layers = rgcn_layers;
  m.align.d = d;
  m.align.d_prime = d_prime;
  m.align.queue_capacity = queue_capacity;
  m.align.temperature = temperature;
  m.fusion.d = d;
  m.fusion.heads = heads;
  m.fisher.d = d;
  m.fisher.k = k;
  m.fisher.momentum = fisher_momentum;
  m.fisher.eta0 = fisher_eta0;
  m.fisher.publish_freq = fisher_publish_freq;
  return m;
}

void AdamW::step(ParamStore& params,
                 const std::unordered_map<std::string, Matrix>& grads) {
  ++t;
  double bc1 = 1.0 - std::pow(beta1, static_cast<double>(t));
  double bc2 = 1.0 - std::pow(beta2, static_cast<double>(t));
  for (const std::string& name : params.names) {
    Matrix& p = params.at(name);
    auto it = grads.find(name);
    Matrix& mm = m.try_emplace(name, Matrix(p.rows, p.cols)).first->second;
    Matrix& vv = v.try_emplace(name, Matrix(p.rows, p.cols)).first->second;
    for (size_t i = 0; i < p.data.size(); ++i) {
      double g = (it != grads.end() && !it->second.data.empty()) ? it->second.data[i] : 0.0;
      mm.data[i] = beta1 * mm.data[i] + (1.0 - beta1) * g;
      vv.data[i] = beta2 * vv.data[i] + (1.0 - beta2) * g * g;
      double mhat = mm.data[i] / bc1;
      double vhat = vv.data[i] / bc2;
      p.data[i] -= lr * (mhat / (std::sqrt(vhat) + eps) + weight_decay * p.data[i]);
    }
  }
}

const Matrix& TrainState::active_u() const {
  if (cfg.ablation.random_bases || !in_stage2()) return u_frozen;
  return fisher.u_pub;
}

std::string metrics_csv(const std::vector<EpochRow>& rows) {
  std::string out = "epoch,step,L_ce,L_align,beta,alpha_mean,energy_ratio,P,R,Acc,F1,ECE\n";
  char buf[640];
  for (const EpochRow& r : rows) {
    std::snprintf(buf, sizeof(buf),
                  "%d,%ld,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n",
                  r.epoch, r.step, r.l_ce, r.l_align, r.beta, r.alpha_mean, r.energy_ratio,
                  r.precision, r.recall, r.accuracy, r.f1, r.ece);
    out += buf;
  }
  return out;
}

namespace {

void accumulate_grads(const Tape& tape, const Bound& bound,
                      const std::vector<Matrix>& node_grads, double factor,
                      std::unordered_map<std::string, Matrix>& out) {
  for (const auto& [name, node] : bound.node_of) {
    const Matrix& g = node_grads[node];
    if (g.rows == 0) continue;
    auto it = out.find(name);
    if (it == out.end()) {
      Matrix scaled = g;
      for (double& x : scaled.data) x *= factor;
      out.emplace(name, std::move(scaled));
    } else {
      for (size_t i = 0; i < g.data.size(); ++i) it->second.data[i] += factor * g.data[i];
    }
  }
}

std::vector<EncodedSample> preprocess_all(const std::vector<lang::CodeSample>& corpus,
                                          const TrainConfig& cfg) {
  Rng base(cfg.seed);
  Rng perturb = base.split(0x9E77);
  std::vector<EncodedSample> out;
  out.reserve(corpus.size());
  for (size_t i = 0; i < corpus.size(); ++i) {
    Rng r = perturb.split(static_cast<uint64_t>(corpus[i].seed) ^ (i + 1));
    out.push_back(preprocess(corpus[i], cfg.ablation, r, cfg.max_len));
  }
  return out;
}

}  // namespace

Evaluation evaluate(const TrainState& state, const std::vector<EncodedSample>& samples,
                    bool stage2) {
  const ModelConfig mc = state.cfg.model_config();
  Matrix pos = sinusoidal_positions(mc.enc.max_len + 1, mc.enc.d);
  const Matrix& u = state.cfg.ablation.random_bases || !stage2 ? state.u_frozen
                                                               : state.fisher.u_pub;
  Evaluation ev;
  ev.ncs_pool = Matrix(static_cast<int>(samples.size()), mc.enc.d);
  ev.cpg_pool = Matrix(static_cast<int>(samples.size()), mc.enc.d);
  double alpha_sum = 0, energy_sum = 0;
  long energy_n = 0;
  for (size_t i = 0; i < samples.size(); ++i) {
    Tape tape;
    Bound b = Bound::bind(tape, state.params);
    SampleForward f =
        forward_sample(b, samples[i], mc, state.cfg.ablation, u, pos, stage2);
    ev.probs.push_back(prob_vulnerable(tape.value(f.logits)));
    ev.truth.push_back(samples[i].label);
    const Matrix& cls = tape.value(f.h_cls);
    for (int c = 0; c < mc.enc.d; ++c) ev.ncs_pool.at(static_cast<int>(i), c) = cls.at(0, c);
    if (f.h_cpg_pool >= 0) {
      const Matrix& gp = tape.value(f.h_cpg_pool);
      for (int c = 0; c < mc.enc.d; ++c) ev.cpg_pool.at(static_cast<int>(i), c) = gp.at(0, c);
      energy_sum += energy_ratio(tape.value(f.h_cpg), u);
      ++energy_n;
    }
    alpha_sum += tape.value(f.alpha).at(0, 0);
  }
  ev.report.counts = confusion(ev.probs, ev.truth);
  ev.report.rates = prf1(ev.report.counts);
  std::vector<double> conf;
  std::vector<bool> correct;
  for (size_t i = 0; i < ev.probs.size(); ++i) {
    int pred = ev.probs[i] >= 0.5 ? 1 : 0;
    conf.push_back(pred == 1 ? ev.probs[i] : 1.0 - ev.probs[i]);
    correct.push_back(pred == ev.truth[i]);
  }
  ev.report.ece = ece(conf, correct, 10, &ev.report.bins);
  ev.report.alpha_mean = samples.empty() ? 0.0 : alpha_sum / samples.size();
  ev.report.energy_ratio = energy_n == 0 ? 0.0 : energy_sum / energy_n;
  return ev;
}

Evaluation evaluate_corpus(const TrainState& state,
                           const std::vector<lang::CodeSample>& samples, bool stage2) {
  return evaluate(state, preprocess_all(samples, state.cfg), stage2);
}

TrainResult train(const TrainConfig& cfg, const std::vector<lang::CodeSample>& corpus,
                  const std::vector<lang::CodeSample>& eval_set) {
  cfg.validate();
  if (corpus.empty()) throw DataError("train: empty corpus");
  bool has0 = false, has1 = false;
  for (const auto& s : corpus) (s.label ? has1 : has0) = true;
  if (!has0 || !has1) throw DataError("train: corpus must contain both classes");
  bool use_oja = cfg.ablation.fisher_estimator == "oja";
  if (!use_oja) estimator_from_name(cfg.ablation.fisher_estimator);  // reject unknowns early

  const ModelConfig mc = cfg.model_config();
  TrainResult result;
  TrainState& st = result.state;
  st.cfg = cfg;
  st.params = init_model_params(mc, cfg.seed);
  Rng rng(cfg.seed);
  Rng r_fisher = rng.split(11);
  st.fisher = FisherSubspace::init(mc.fisher, r_fisher);
  Rng r_frozen = rng.split(12);
  st.u_frozen = random_orthogonal(cfg.d, cfg.k, r_frozen);

  long batches_per_epoch = (static_cast<long>(corpus.size()) + cfg.batch - 1) / cfg.batch;
  st.total_steps = batches_per_epoch * cfg.epochs;
  st.stage2_start = cfg.ablation.no_stage1
                        ? 0
                        : static_cast<long>(std::ceil(cfg.stage1_fraction * st.total_steps));
  if (cfg.epochs == 0) return result;

  std::vector<EncodedSample> train_enc = preprocess_all(corpus, cfg);
  std::vector<EncodedSample> eval_enc =
      eval_set.empty() ? train_enc : preprocess_all(eval_set, cfg);

  Matrix pos = sinusoidal_positions(mc.enc.max_len + 1, mc.enc.d);
  AdamW opt(cfg.lr, cfg.weight_decay);
  XbmQueue queue(cfg.queue_capacity);
  Rng r_shuffle = rng.split(13);
  std::vector<std::vector<double>> grad_window;  // for non-Oja estimators
  Rng r_est = rng.split(14);
  FisherEstimator est = use_oja ? FisherEstimator::BatchNoEma
                                : estimator_from_name(cfg.ablation.fisher_estimator);

  std::vector<int> order(corpus.size());
  std::iota(order.begin(), order.end(), 0);

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    Rng re = r_shuffle.split(epoch + 1);
    for (size_t i = order.size(); i > 1; --i)
      std::swap(order[i - 1], order[re.below(i)]);

    double ce_sum = 0, align_sum = 0;
    long batches = 0;
    double last_beta = 0;

    for (long bstart = 0; bstart < static_cast<long>(corpus.size()); bstart += cfg.batch) {
      long bend = std::min<long>(bstart + cfg.batch, corpus.size());
      bool stage2 = st.in_stage2();
      double beta = cfg.ablation.no_align ? 0.0
                    : (stage2 ? cfg.beta_stage2 : cfg.beta_stage1);
      last_beta = beta;

      Tape tape;
      Bound b = Bound::bind(tape, st.params);
      const Matrix& u = st.active_u();
      std::vector<int> logit_rows, labels, ncs_nodes;
      std::vector<int> z_ncs_rows, z_cpg_rows;
      for (long i = bstart; i < bend; ++i) {
        const EncodedSample& s = train_enc[order[i]];
        SampleForward f = forward_sample(b, s, mc, cfg.ablation, u, pos, stage2);
        logit_rows.push_back(f.logits);
        labels.push_back(s.label);
        ncs_nodes.push_back(f.h_ncs);
        if (f.z_ncs >= 0) {
          z_ncs_rows.push_back(f.z_ncs);
          z_cpg_rows.push_back(f.z_cpg);
        }
      }
      int logits = tape.concat_rows(logit_rows);
      int l_ce = tape.ce_loss_logits(logits, labels);
      double ce_val = tape.value(l_ce).at(0, 0);
      if (!std::isfinite(ce_val))
        throw DivergenceError("train: non-finite cross-entropy at step " +
                              std::to_string(st.step));
      ce_sum += ce_val;

      std::vector<Matrix> ce_grads = tape.backward(l_ce);
      std::unordered_map<std::string, Matrix> grads;
      accumulate_grads(tape, b, ce_grads, 1.0, grads);

      // Pooled CE feature gradient feeds the Fisher tracker (stage II only).
      if (stage2 && !cfg.ablation.no_fisher && !cfg.ablation.random_bases &&
          !cfg.ablation.ncs_only) {
        std::vector<double> pooled(mc.enc.d, 0.0);
        long rows = 0;
        for (int node : ncs_nodes) {
          const Matrix& g = ce_grads[node];
          if (g.rows == 0) continue;
          for (int r = 0; r < g.rows; ++r)
            for (int c = 0; c < g.cols; ++c) pooled[c] += g.at(r, c);
          rows += g.rows;
        }
        if (rows > 0)
          for (double& x : pooled) x /= static_cast<double>(rows);
        if (use_oja) {
          st.fisher.observe(pooled);
        } else {
          grad_window.push_back(pooled);
          st.fisher.step++;
          if (st.fisher.step % cfg.fisher_publish_freq == 0 && !grad_window.empty()) {
            st.fisher.u_pub = estimate_alternative(est, grad_window, cfg.k, r_est);
            st.fisher.u_live = st.fisher.u_pub;
          }
        }
      }

      double align_val = 0;
      if (beta > 0 && !z_ncs_rows.empty()) {
        int z_ncs = tape.concat_rows(z_ncs_rows);
        int z_cpg = tape.concat_rows(z_cpg_rows);
        int l_align = info_nce(b, z_ncs, z_cpg, queue, cfg.temperature);
        align_val = tape.value(l_align).at(0, 0);
        if (!std::isfinite(align_val))
          throw DivergenceError("train: non-finite alignment loss at step " +
                                std::to_string(st.step));
        std::vector<Matrix> al_grads = tape.backward(l_align);
        accumulate_grads(tape, b, al_grads, beta, grads);
      }
      align_sum += align_val;

      // Hold the base rate for 80% of training, then decay linearly to 1/8 of
      // it. A flat rate to the end leaves the model oscillating around the
      // decision boundary, so the final-epoch operating point is a coin flip
      // on imbalanced corpora; decaying earlier starves learning.
      double progress = static_cast<double>(st.step) / st.total_steps;
      opt.lr = progress < 0.8
                   ? cfg.lr
                   : cfg.lr * (1.0 - 0.875 * (progress - 0.8) / 0.2);
      opt.step(st.params, grads);
      ++st.step;
      ++batches;
    }

    Evaluation ev = evaluate(st, eval_enc, st.in_stage2());
    EpochRow row;
    row.epoch = epoch;
    row.step = st.step;
    row.l_ce = ce_sum / batches;
    row.l_align = align_sum / batches;
    row.beta = last_beta;
    row.alpha_mean = ev.report.alpha_mean;
    row.energy_ratio = ev.report.energy_ratio;
    row.precision = ev.report.rates.precision;
    row.recall = ev.report.rates.recall;
    row.accuracy = ev.report.rates.accuracy;
    row.f1 = ev.report.rates.f1;
    row.ece = ev.report.ece;
    result.log.push_back(row);
  }
  return result;
}

namespace {
constexpr char kMagic[8] = {'F', 'F', 'C', 'K', 'P', 'T', '0', '\n'};
constexpr uint32_t kVersion = 1;

void write_u32(std::ofstream& f, uint32_t v) { f.write(reinterpret_cast<char*>(&v), 4); }
void write_u64(std::ofstream& f, uint64_t v) { f.write(reinterpret_cast<char*>(&v), 8); }
void write_str(std::ofstream& f, const std::string& s) {
  write_u64(f, s.size());
  f.write(s.data(), static_cast<std::streamsize>(s.size()));
}
void write_mat(std::ofstream& f, const Matrix& m) {
  write_u32(f, static_cast<uint32_t>(m.rows));
  write_u32(f, static_cast<uint32_t>(m.cols));
  f.write(reinterpret_cast<const char*>(m.data.data()),
          static_cast<std::streamsize>(m.data.size() * sizeof(double)));
}
uint32_t read_u32(std::ifstream& f) {
  uint32_t v = 0;
  f.read(reinterpret_cast<char*>(&v), 4);
  return v;
}
uint64_t read_u64(std::ifstream& f) {
  uint64_t v = 0;
  f.read(reinterpret_cast<char*>(&v), 8);
  return v;
}
std::string read_str(std::ifstream& f) {
  uint64_t n = read_u64(f);
  std::string s(n, '\0');
  f.read(s.data(), static_cast<std::streamsize>(n));
  return s;
}
Matrix read_mat(std::ifstream& f) {
  int r = static_cast<int>(read_u32(f));
  int c = static_cast<int>(read_u32(f));
  Matrix m(r, c);
  f.read(reinterpret_cast<char*>(m.data.data()),
         static_cast<std::streamsize>(m.data.size() * sizeof(double)));
  return m;
}
}  // namespace

void save_checkpoint(const std::string& path, const TrainState& state) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw CheckpointError("cannot open for writing: " + path);
  f.write(kMagic, 8);
  write_u32(f, kVersion);
  write_str(f, state.cfg.to_json());
  write_u64(f, static_cast<uint64_t>(state.step));
  write_u64(f, static_cast<uint64_t>(state.total_steps));
  write_u64(f, static_cast<uint64_t>(state.stage2_start));
  write_u64(f, static_cast<uint64_t>(state.fisher.step));
  write_mat(f, state.fisher.u_live);
  write_mat(f, state.fisher.u_pub);
  write_mat(f, state.fisher.g_smooth);
  write_mat(f, state.u_frozen);
  write_u32(f, static_cast<uint32_t>(state.params.names.size()));
  for (const std::string& n : state.params.names) {
    write_str(f, n);
    write_mat(f, state.params.at(n));
  }
  if (!f) throw CheckpointError("write failed: " + path);
}

TrainState load_checkpoint(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw CheckpointError("cannot open: " + path);
  char magic[8];
  f.read(magic, 8);
  if (!f || std::memcmp(magic, kMagic, 8) != 0)
    throw CheckpointError("not a checkpoint file: " + path);
  uint32_t version = read_u32(f);
  if (version != kVersion)
    throw CheckpointError("checkpoint version " + std::to_string(version) +
                          " does not match supported version " + std::to_string(kVersion));
  TrainState st;
  st.cfg = TrainConfig::from_json(read_str(f));
  st.step = static_cast<long>(read_u64(f));
  st.total_steps = static_cast<long>(read_u64(f));
  st.stage2_start = static_cast<long>(read_u64(f));
  st.fisher.cfg = st.cfg.model_config().fisher;
  st.fisher.step = static_cast<long>(read_u64(f));
  st.fisher.u_live = read_mat(f);
  st.fisher.u_pub = read_mat(f);
  st.fisher.g_smooth = read_mat(f);
  st.u_frozen = read_mat(f);
  uint32_t count = read_u32(f);
  for (uint32_t i = 0; i < count; ++i) {
    std::string n = read_str(f);
    st.params.add(n, read_mat(f));
  }
  if (!f) throw CheckpointError("truncated checkpoint: " + path);
  return st;
}

}  // namespace ff
