#pragma once

#include <string>
#include <vector>

#include "fisherfuse/parser.hpp"
#include "fisherfuse/rng.hpp"

namespace ff::lang {

enum class NodeKind {
  Function = 0,
  Decl,
  Assign,
  If,
  While,
  Call,
  Deref,
  Index,
  Return,
  Const,
  VarRef,
};
constexpr int kNodeKinds = 11;

enum class Relation { AstChild = 0, CfgNext, Ddg, Cdg };
constexpr int kRelations = 4;

struct CpgNode {
  int id;
  NodeKind kind;
  int tok_begin;  // raw-token span; +1 maps into the CLS-prefixed sequence
  int tok_end;
  int line;
};

struct CpgEdge {
  int src;
  int dst;
  Relation rel;
  bool operator==(const CpgEdge&) const = default;
};

struct Cpg {
  std::vector<CpgNode> nodes;
  std::vector<CpgEdge> edges;

  int edge_count(Relation r) const;
  bool has_edge(int src, int dst, Relation r) const;
  /// True if dst is reachable from src over edges of the given relation.
  bool has_path(int src, int dst, Relation r) const;
};

Cpg build_cpg(const AstNode& ast);

/// Rewires the given fraction of non-AST edges to uniformly random endpoints.
/// Node set and per-relation edge counts are preserved.
Cpg edge_shuffle(const Cpg& g, double fraction, Rng& rng);

/// Degree-preserving double-edge swaps within each relation class.
Cpg degree_preserving_rewire(const Cpg& g, int swaps, Rng& rng);

/// Deletes every edge of one relation. Only DDG and CDG may be removed.
Cpg remove_relation(const Cpg& g, Relation rel);

std::string to_dot(const Cpg& g);
std::string to_json(const Cpg& g);

const char* node_kind_name(NodeKind k);
const char* relation_name(Relation r);

}  // namespace ff::lang
