#pragma once

#include <string>
#include <vector>

#include "fisherfuse/metrics.hpp"
#include "fisherfuse/model.hpp"

namespace ff {

struct TrainConfig {
  int d = 64;
  int d_prime = 32;
  int k = 8;
  int heads = 4;
  int rgcn_layers = 2;
  int max_len = 256;
  int batch = 16;
  int epochs = 15;
  double lr = 1e-3;
  double weight_decay = 0.01;
  double temperature = 0.2;
  double beta_stage1 = 0.05;
  double beta_stage2 = 0.045;
  double stage1_fraction = 0.48;
  double fisher_momentum = 0.99;
  double fisher_eta0 = 0.01;
  int fisher_publish_freq = 100;  // paper preset uses 1200
  int queue_capacity = 512;
  uint64_t seed = 1;
  AblationFlags ablation;

  void validate() const;
  std::string to_json() const;
  static TrainConfig from_json(const std::string& text);
  ModelConfig model_config() const;
};

struct AdamW {
  double lr, beta1 = 0.9, beta2 = 0.999, eps = 1e-8, weight_decay;
  long t = 0;
  std::unordered_map<std::string, Matrix> m, v;

  AdamW(double lr_, double wd) : lr(lr_), weight_decay(wd) {}
  /// One decoupled-decay update over every named gradient. Call once per step;
  /// the bias-correction counter advances on entry.
  void step(ParamStore& params, const std::unordered_map<std::string, Matrix>& grads);
};

struct TrainState {
  ParamStore params;
  FisherSubspace fisher;
  Matrix u_frozen;  // random orthonormal bases for the random_bases ablation / stage I
  long step = 0;
  long total_steps = 0;
  long stage2_start = 0;
  TrainConfig cfg;

  bool in_stage2() const { return step >= stage2_start; }
  /// Published bases for the forward pass under the current ablation flags.
  const Matrix& active_u() const;
};

struct EpochRow {
  int epoch = 0;
  long step = 0;
  double l_ce = 0, l_align = 0, beta = 0, alpha_mean = 0, energy_ratio = 0;
  double precision = 0, recall = 0, accuracy = 0, f1 = 0, ece = 0;
};

std::string metrics_csv(const std::vector<EpochRow>& rows);

struct TrainResult {
  TrainState state;
  std::vector<EpochRow> log;
};

/// Two-stage training loop. Metrics rows are computed on `eval` when nonempty,
/// otherwise on the training corpus.
TrainResult train(const TrainConfig& cfg, const std::vector<lang::CodeSample>& corpus,
                  const std::vector<lang::CodeSample>& eval = {});

struct Evaluation {
  EvalReport report;
  std::vector<double> probs;
  std::vector<int> truth;
  Matrix ncs_pool;  // n x d pooled sequence features (CKA inputs)
  Matrix cpg_pool;  // n x d pooled graph features
};

Evaluation evaluate(const TrainState& state, const std::vector<EncodedSample>& samples,
                    bool stage2);

Evaluation evaluate_corpus(const TrainState& state,
                           const std::vector<lang::CodeSample>& samples, bool stage2);

/// Versioned binary checkpoint: magic, version, config JSON echo, named
/// tensors, Fisher state. Loading any other version fails loudly.
void save_checkpoint(const std::string& path, const TrainState& state);
TrainState load_checkpoint(const std::string& path);

}  // namespace ff
