#pragma once

#include <string>
#include <vector>

#include "fisherfuse/training.hpp"

namespace ff {

enum class NoiseMode { Parallel, Perpendicular, Isotropic };
std::string noise_mode_name(NoiseMode m);

/// Frozen fusion-level snapshot the noise experiment perturbs: fixed encoder
/// outputs plus the fusion parameters and bases. Decoupled from training so
/// the scale law can be probed at arbitrary (k, d).
struct FusionSnapshot {
  ParamStore params;    // dfa.* / gate.* / cls.* tensors
  Matrix u;             // d x k orthonormal bases
  Matrix h_ncs;         // L x d fixed sequence features
  Matrix h_cpg;         // n x d fixed graph features
  FusionConfig fusion;  // fisher_guidance toggles DFA vs full-spectrum
};

/// Random-init snapshot at the requested shape (L sequence rows, n graph rows).
FusionSnapshot make_snapshot(int d, int k, int heads, int seq_len, int graph_nodes,
                             uint64_t seed, bool fisher_guidance);

struct NoiseExperiment {
  std::vector<double> epsilons;  // ascending, positive
  NoiseMode mode = NoiseMode::Isotropic;
  int trials = 20;
  uint64_t seed = 0;
};

/// Default grid: `points` log-spaced epsilons over [0.01, 1.0] x ||h_cpg||_F.
std::vector<double> default_epsilon_grid(const Matrix& h_cpg, int points = 8);

struct NoiseRow {
  double epsilon = 0;
  NoiseMode mode = NoiseMode::Isotropic;
  double mean_dev = 0;  // mean ||F(H+Delta) - F(H)||_F on h_final
  double std_dev = 0;
  double mean_dev_comp = 0;  // same measurement on the pooled attention output
  int trials = 0;
};

/// Gaussian noise, projected per mode against snapshot.u, rescaled so
/// ||Delta||_F = eps exactly, added to h_cpg; records the deviation of the
/// fused output.
std::vector<NoiseRow> inject_and_measure(const FusionSnapshot& snap,
                                         const NoiseExperiment& exp);

/// Deterministic forward of the snapshot's fusion stack on (possibly
/// perturbed) graph features; returns h_final.
Matrix snapshot_forward(const FusionSnapshot& snap, const Matrix& h_cpg,
                        Matrix* h_comp_pool = nullptr);

struct SlopeFit {
  double slope = 0;
  double r2 = 0;
  bool degenerate = false;  // all-zero deviations
};

/// Least-squares slope through the origin of mean deviation vs epsilon.
SlopeFit fit_slope(const std::vector<NoiseRow>& rows);

struct NoiseSummary {
  int d = 0, k = 0;
  double theoretical_ratio = 0;  // sqrt(k/d)
  double measured_ratio = 0;     // dfa isotropic slope / full-spectrum isotropic slope
  SlopeFit dfa_parallel, dfa_perpendicular, dfa_isotropic, full_isotropic;
  std::string to_json() const;
};

std::string noise_csv(const std::vector<NoiseRow>& rows);

/// Full pipeline: DFA snapshot in all three modes plus the full-spectrum
/// comparator in isotropic mode; reports the slope ratio against sqrt(k/d).
NoiseSummary run_noise_experiment(int d, int k, int heads, int trials, uint64_t seed,
                                  std::vector<NoiseRow>* out_rows = nullptr);

struct LineAttention {
  std::vector<int> lines;
  std::vector<double> standard_mass;  // normalized per mode
  std::vector<double> fisher_mass;
  std::string to_csv() const;
};

/// CLS-query attention mass over CPG nodes, aggregated to source lines via
/// node line numbers, under standard and Fisher-guided attention.
LineAttention attention_report(const lang::CodeSample& sample, const TrainState& state);

/// cka_linear between pooled NCS and pooled CPG features over an eval set.
double cka_redundancy(const TrainState& state,
                      const std::vector<lang::CodeSample>& eval_set, bool stage2);

}  // namespace ff
