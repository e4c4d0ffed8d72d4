#pragma once

#include <optional>

#include "fisherfuse/alignment.hpp"
#include "fisherfuse/corpus.hpp"
#include "fisherfuse/encoders.hpp"
#include "fisherfuse/fisher.hpp"
#include "fisherfuse/fusion.hpp"

namespace ff {

/// Ablation switches mapping to exact submodels.
struct AblationFlags {
  bool no_fisher = false;    // standard attention, no projection
  bool random_bases = false; // frozen random orthonormal U
  bool no_gate = false;      // alpha fixed at 1
  bool no_align = false;     // beta = 0
  bool no_stage1 = false;    // start directly in stage II
  bool ncs_only = false;     // classifier on h_cls, graph ignored
  std::string fisher_estimator = "oja";  // oja | direct_eig | power_iter | randomized | batch_no_ema
  std::string graph_perturbation;        // "", edge_shuffle, degree_rewire, remove_ddg, remove_cdg
  double edge_shuffle_fraction = 0.9;
};

struct ModelConfig {
  EncoderConfig enc;
  AlignConfig align;
  FusionConfig fusion;
  FisherConfig fisher;
};

/// One sample, preprocessed once: token sequence and CPG (possibly perturbed).
struct EncodedSample {
  lang::TokenSequence seq;
  lang::Cpg cpg;
  int label = 0;
};

EncodedSample preprocess(const lang::CodeSample& s, const AblationFlags& flags,
                         Rng& rng, int max_len);

ParamStore init_model_params(const ModelConfig& cfg, uint64_t seed);

struct SampleForward {
  int h_ncs = -1;
  int h_cls = -1;
  int h_cpg = -1;
  int h_cpg_pool = -1;
  int h_comp = -1;
  int h_comp_pool = -1;
  int alpha = -1;   // 1x1 (leaf 0 when gated path is off)
  int h_final = -1;
  int logits = -1;  // 1x2
  int z_ncs = -1;
  int z_cpg = -1;
};

/// Full forward for one sample. stage2 enables the DFA enhancement and gated
/// fusion; in stage I (or ncs_only) the decision function is the NCS-only
/// classifier.
SampleForward forward_sample(Bound& b, const EncodedSample& s, const ModelConfig& cfg,
                             const AblationFlags& flags, const Matrix& u_pub,
                             const Matrix& pos_table, bool stage2);

/// p(vulnerable) from a 1x2 logit row.
double prob_vulnerable(const Matrix& logits);

}  // namespace ff
