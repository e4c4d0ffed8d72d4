#pragma once

#include <string>
#include <vector>

#include "fisherfuse/cpg.hpp"
#include "fisherfuse/lexer.hpp"
#include "fisherfuse/params.hpp"

namespace ff {

struct EncoderConfig {
  int d = 64;
  int vocab = lang::kVocabSize;
  int max_len = lang::kDefaultMaxLen;
  int rgcn_layers = 2;
};

/// Fixed sinusoidal position table (not trainable).
Matrix sinusoidal_positions(int max_len, int d);

/// Registers token-encoder parameters: embedding table, one pre-norm
/// self-attention block (W_q, W_k, W_v, W_o) with a layer-norm affine.
void init_ncs_params(ParamStore& store, const EncoderConfig& cfg, Rng& rng);

/// Registers relation-specific graph weights W_r per CPG relation plus the
/// self weight W_0, one set per layer, and the node-kind embedding table.
void init_rgcn_params(ParamStore& store, const EncoderConfig& cfg, Rng& rng);

struct NcsOut {
  int h = -1;      // L x d feature node
  int cls = -1;    // 1 x d CLS row
};

struct CpgOut {
  int h = -1;      // |V| x d node features
  int pool = -1;   // 1 x d mean pooling
};

NcsOut encode_ncs(Bound& b, const lang::TokenSequence& seq, const EncoderConfig& cfg,
                  const Matrix& pos_table);

/// Node update per layer: h_i' = relu(sum_r 1/|N_r(i)| W_r h_j + W_0 h_i),
/// with in-neighbor normalization and zero contribution for empty relations.
CpgOut encode_cpg(Bound& b, const lang::Cpg& g, const lang::TokenSequence& seq,
                  const EncoderConfig& cfg);

/// Per-relation normalized in-neighbor adjacency (|V| x |V|), A[i][j] = 1/|N_r(i)|
/// for an edge j -> i.
Matrix relation_adjacency(const lang::Cpg& g, lang::Relation rel);

/// Token-averaging matrix S (|V| x vocab): row i averages the closed-vocabulary
/// ids inside node i's token span.
Matrix span_average_matrix(const lang::Cpg& g, const lang::TokenSequence& seq, int vocab);

}  // namespace ff
