#include "fisherfuse/cpg.hpp"

#include <algorithm>
#include <map>
#include <set>
#include <sstream>

#include <json.hpp>

#include "fisherfuse/errors.hpp"

namespace ff::lang {

namespace {

NodeKind kind_of(AstKind k) {
  switch (k) {
    case AstKind::Function: return NodeKind::Function;
    case AstKind::Decl: return NodeKind::Decl;
    case AstKind::Assign: return NodeKind::Assign;
    case AstKind::If: return NodeKind::If;
    case AstKind::While: return NodeKind::While;
    case AstKind::Call: return NodeKind::Call;
    case AstKind::Deref: return NodeKind::Deref;
    case AstKind::Index: return NodeKind::Index;
    case AstKind::Return: return NodeKind::Return;
    case AstKind::Const: return NodeKind::Const;
    case AstKind::VarRef: return NodeKind::VarRef;
    default: return NodeKind::Function;  // Block/BinOp never materialize
  }
}

bool retained(AstKind k) { return k != AstKind::Block && k != AstKind::BinOp; }

struct Builder {
  Cpg g;
  // per statement node id: defined variables / used variables
  std::map<int, std::set<std::string>> defs, uses;
  std::vector<int> stmt_order;  // statement-level nodes, in syntactic order

  int add_node(const AstNode& n) {
    int id = static_cast<int>(g.nodes.size());
    g.nodes.push_back(CpgNode{id, kind_of(n.kind), n.tok_begin, n.tok_end, n.line});
    return id;
  }

  void edge(int s, int d, Relation r) { g.edges.push_back(CpgEdge{s, d, r}); }

  // Materializes expression atoms below a statement, wiring AST_CHILD edges
  // through skipped BinOp nodes, and collects variable uses.
  void build_expr(const AstNode& e, int parent_id, int use_stmt) {
    if (e.kind == AstKind::BinOp) {
      for (const auto& c : e.children) build_expr(*c, parent_id, use_stmt);
      return;
    }
    int id = add_node(e);
    edge(parent_id, id, Relation::AstChild);
    switch (e.kind) {
      case AstKind::VarRef:
        uses[use_stmt].insert(e.name);
        break;
      case AstKind::Deref:
      case AstKind::Index:
      case AstKind::Call:
        for (const auto& c : e.children) build_expr(*c, id, use_stmt);
        break;
      default:
        break;
    }
  }

  // Builds a statement subtree; returns the statement node id.
  int build_stmt(const AstNode& s) {
    int id = add_node(s);
    stmt_order.push_back(id);
    switch (s.kind) {
      case AstKind::Decl:
        if (!s.children.empty()) {
          build_expr(*s.children[0], id, id);
          defs[id].insert(s.name);
        }
        break;
      case AstKind::Assign: {
        const AstNode& lhs = *s.children[0];
        if (lhs.kind == AstKind::VarRef) {
          int lid = add_node(lhs);
          edge(id, lid, Relation::AstChild);
          defs[id].insert(lhs.name);
        } else {
          // store through deref/index: base and subscript are uses
          build_expr(lhs, id, id);
        }
        build_expr(*s.children[1], id, id);
        break;
      }
      case AstKind::Call:  // free(p): both a use and a state definition of p
        build_expr(*s.children[0], id, id);
        defs[id].insert(s.children[0]->name);
        break;
      case AstKind::Return:
        if (!s.children.empty()) build_expr(*s.children[0], id, id);
        break;
      default:
        break;
    }
    return id;
  }

  void cdg_body(int cond_id, const AstNode& block) {
    for (const auto& stmt : block.children) {
      // statement ids were assigned in build order; find by token span
      for (const CpgNode& n : g.nodes) {
        if (n.tok_begin == stmt->tok_begin && n.tok_end == stmt->tok_end &&
            n.kind == kind_of(stmt->kind)) {
          edge(cond_id, n.id, Relation::Cdg);
          break;
        }
      }
      if (stmt->kind == AstKind::If) {
        cdg_body(cond_id, *stmt->children[1]);
        if (stmt->children.size() > 2) cdg_body(cond_id, *stmt->children[2]);
      } else if (stmt->kind == AstKind::While) {
        cdg_body(cond_id, *stmt->children[1]);
      }
    }
  }

  // Structured control flow: wires CFG_NEXT and returns the exit frontier.
  std::vector<int> build_block_cfg(const AstNode& block, std::vector<int> preds,
                                   int parent_id) {
    for (const auto& stmt : block.children) {
      int id = build_stmt(*stmt);
      edge(parent_id, id, Relation::AstChild);
      for (int p : preds) edge(p, id, Relation::CfgNext);
      if (stmt->kind == AstKind::If) {
        build_expr(*stmt->children[0], id, id);
        std::vector<int> exits = build_block_cfg(*stmt->children[1], {id}, id);
        if (stmt->children.size() > 2) {
          auto else_exits = build_block_cfg(*stmt->children[2], {id}, id);
          exits.insert(exits.end(), else_exits.begin(), else_exits.end());
        } else {
          exits.push_back(id);  // fall-through when the branch is not taken
        }
        cdg_body(id, *stmt->children[1]);
        if (stmt->children.size() > 2) cdg_body(id, *stmt->children[2]);
        preds = exits;
      } else if (stmt->kind == AstKind::While) {
        build_expr(*stmt->children[0], id, id);
        std::vector<int> exits = build_block_cfg(*stmt->children[1], {id}, id);
        for (int e : exits) edge(e, id, Relation::CfgNext);  // back edge
        cdg_body(id, *stmt->children[1]);
        preds = {id};
      } else if (stmt->kind == AstKind::Return) {
        preds = {};
      } else {
        preds = {id};
      }
    }
    return preds;
  }

  void build_ddg() {
    // may-reaching definitions at statement granularity over CFG_NEXT
    std::vector<int>& stmts = stmt_order;
    std::map<int, std::vector<int>> preds;
    for (const CpgEdge& e : g.edges)
      if (e.rel == Relation::CfgNext) preds[e.dst].push_back(e.src);

    using DefSet = std::set<std::pair<std::string, int>>;  // (var, def stmt)
    std::map<int, DefSet> in, out;
    bool changed = true;
    while (changed) {
      changed = false;
      for (int s : stmts) {
        DefSet i;
        for (int p : preds[s]) i.insert(out[p].begin(), out[p].end());
        DefSet o = i;
        for (const std::string& v : defs[s]) {
          std::erase_if(o, [&](const auto& d) { return d.first == v; });
          o.insert({v, s});
        }
        if (i != in[s] || o != out[s]) {
          in[s] = std::move(i);
          out[s] = std::move(o);
          changed = true;
        }
      }
    }
    for (int s : stmts)
      for (const std::string& v : uses[s])
        for (const auto& [var, d] : in[s])
          if (var == v) edge(d, s, Relation::Ddg);
  }
};

}  // namespace

int Cpg::edge_count(Relation r) const {
  int c = 0;
  for (const CpgEdge& e : edges) c += e.rel == r;
  return c;
}

bool Cpg::has_edge(int src, int dst, Relation r) const {
  return std::find(edges.begin(), edges.end(), CpgEdge{src, dst, r}) != edges.end();
}

bool Cpg::has_path(int src, int dst, Relation r) const {
  std::vector<int> stack{src};
  std::set<int> seen{src};
  while (!stack.empty()) {
    int cur = stack.back();
    stack.pop_back();
    if (cur == dst) return true;
    for (const CpgEdge& e : edges)
      if (e.rel == r && e.src == cur && !seen.count(e.dst)) {
        seen.insert(e.dst);
        stack.push_back(e.dst);
      }
  }
  return false;
}

Cpg build_cpg(const AstNode& ast) {
  Builder b;
  int fn = b.add_node(ast);
  const AstNode* body = nullptr;
  for (const auto& c : ast.children) {
    if (c->kind == AstKind::Block) {
      body = c.get();
    } else {
      int pid = b.build_stmt(*c);  // parameters act as defining declarations
      b.defs[pid].insert(c->name);
      b.edge(fn, pid, Relation::AstChild);
    }
  }
  std::vector<int> entry{fn};
  // parameters participate in flow before the body
  for (int s : b.stmt_order) {
    for (int p : entry) b.edge(p, s, Relation::CfgNext);
    entry = {s};
  }
  if (body) b.build_block_cfg(*body, entry, fn);
  b.build_ddg();
  return std::move(b.g);
}

Cpg edge_shuffle(const Cpg& g, double fraction, Rng& rng) {
  if (fraction < 0.0 || fraction > 1.0)
    throw ParameterError("edge_shuffle: fraction outside [0,1]");
  Cpg out = g;
  std::vector<int> candidates;
  for (int i = 0; i < static_cast<int>(out.edges.size()); ++i)
    if (out.edges[i].rel != Relation::AstChild) candidates.push_back(i);
  int n_rewire = static_cast<int>(std::llround(fraction * candidates.size()));
  // deterministic partial shuffle, then rewire the prefix
  for (int i = static_cast<int>(candidates.size()) - 1; i > 0; --i)
    std::swap(candidates[i], candidates[rng.below(i + 1)]);
  int n_nodes = static_cast<int>(out.nodes.size());
  for (int i = 0; i < n_rewire; ++i) {
    CpgEdge& e = out.edges[candidates[i]];
    int src, dst;
    do {
      src = static_cast<int>(rng.below(n_nodes));
      dst = static_cast<int>(rng.below(n_nodes));
    } while (src == dst);
    e.src = src;
    e.dst = dst;
  }
  return out;
}

Cpg degree_preserving_rewire(const Cpg& g, int swaps, Rng& rng) {
  Cpg out = g;
  for (int r = 0; r < kRelations; ++r) {
    auto rel = static_cast<Relation>(r);
    if (rel == Relation::AstChild) continue;
    std::vector<int> idx;
    for (int i = 0; i < static_cast<int>(out.edges.size()); ++i)
      if (out.edges[i].rel == rel) idx.push_back(i);
    if (idx.size() < 2) continue;
    for (int s = 0; s < swaps; ++s) {
      int a = idx[rng.below(idx.size())];
      int b = idx[rng.below(idx.size())];
      if (a == b) continue;
      CpgEdge ea = out.edges[a], eb = out.edges[b];
      CpgEdge na{ea.src, eb.dst, rel}, nb{eb.src, ea.dst, rel};
      if (na.src == na.dst || nb.src == nb.dst) continue;
      if (out.has_edge(na.src, na.dst, rel) || out.has_edge(nb.src, nb.dst, rel))
        continue;
      out.edges[a] = na;
      out.edges[b] = nb;
    }
  }
  return out;
}

Cpg remove_relation(const Cpg& g, Relation rel) {
  if (rel != Relation::Ddg && rel != Relation::Cdg)
    throw UnsupportedAblationError("remove_relation: only DDG and CDG can be removed");
  Cpg out = g;
  std::erase_if(out.edges, [&](const CpgEdge& e) { return e.rel == rel; });
  return out;
}

const char* node_kind_name(NodeKind k) {
  switch (k) {
    case NodeKind::Function: return "function";
    case NodeKind::Decl: return "decl";
    case NodeKind::Assign: return "assign";
    case NodeKind::If: return "if";
    case NodeKind::While: return "while";
    case NodeKind::Call: return "call";
    case NodeKind::Deref: return "deref";
    case NodeKind::Index: return "index";
    case NodeKind::Return: return "return";
    case NodeKind::Const: return "const";
    case NodeKind::VarRef: return "var_ref";
  }
  return "?";
}

const char* relation_name(Relation r) {
  switch (r) {
    case Relation::AstChild: return "AST_CHILD";
    case Relation::CfgNext: return "CFG_NEXT";
    case Relation::Ddg: return "DDG";
    case Relation::Cdg: return "CDG";
  }
  return "?";
}

std::string to_dot(const Cpg& g) {
  std::ostringstream os;
  os << "digraph cpg {\n";
  for (const CpgNode& n : g.nodes)
    os << "  n" << n.id << " [label=\"" << n.id << ":" << node_kind_name(n.kind)
       << "\"];\n";
  for (const CpgEdge& e : g.edges)
    os << "  n" << e.src << " -> n" << e.dst << " [relation=\""
       << relation_name(e.rel) << "\"];\n";
  os << "}\n";
  return os.str();
}

std::string to_json(const Cpg& g) {
  nlohmann::json j;
  j["nodes"] = nlohmann::json::array();
  for (const CpgNode& n : g.nodes)
    j["nodes"].push_back({{"id", n.id},
                          {"kind", node_kind_name(n.kind)},
                          {"tok_begin", n.tok_begin},
                          {"tok_end", n.tok_end},
                          {"line", n.line}});
  j["edges"] = nlohmann::json::array();
  for (const CpgEdge& e : g.edges)
    j["edges"].push_back(
        {{"src", e.src}, {"dst", e.dst}, {"relation", relation_name(e.rel)}});
  return j.dump();
}

}  // namespace ff::lang
