#pragma once

#include "fisherfuse/params.hpp"

namespace ff {

struct FusionConfig {
  int d = 64;
  int heads = 4;
  bool fisher_guidance = true;  // false: standard attention (no projection)
  bool adaptive_gate = true;    // false: alpha fixed at 1
  bool gate_closed = false;     // true: h_final = h_cls exactly
};

/// Attention maps W_q/W_k/W_v, output map W_o, enhancement layer-norm affine
/// (identity init), gate parameters, and the 2-way classifier head.
void init_fusion_params(ParamStore& store, const FusionConfig& cfg, Rng& rng);

/// Q_dfa = (H_ncs + LayerNorm(H_ncs U U^T)) W_q; U carries no gradient.
/// With k == 0 the enhancement is disabled and Q = H_ncs W_q.
int dfa_query(Bound& b, int h_ncs, const Matrix& u, const FusionConfig& cfg);

/// Multi-head cross-attention over subspace-filtered keys/values
/// H_par = H_cpg U U^T; per head softmax(Q_h (H_par W_k)_h^T / sqrt(d_k)) (H_par W_v)_h.
/// When cfg.fisher_guidance is false the projection is the identity.
int complementary_attention(Bound& b, int q_dfa, int h_cpg, const Matrix& u,
                            const FusionConfig& cfg);

struct GateOut {
  int alpha = -1;    // 1 x 1
  int h_final = -1;  // 1 x d
};

/// alpha = sigmoid(w_g^T [h_cls || h_comp_pool] + b_g);
/// h_final = h_cls + alpha * W_o h_comp_pool.
GateOut adaptive_gate(Bound& b, int h_cls, int h_comp_pool, const FusionConfig& cfg);

/// Two-way linear head; returns 1x2 logits, column 1 is the vulnerable class.
int classify(Bound& b, int h_final);

}  // namespace ff
