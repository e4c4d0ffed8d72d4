#include "fisherfuse/parser.hpp"

#include <algorithm>

#include "fisherfuse/errors.hpp"

namespace ff::lang {

namespace {

class Parser {
 public:
  explicit Parser(std::vector<RawToken> toks) : toks_(std::move(toks)) {}

  AstPtr parse_function() {
    int begin = pos_;
    if (!at(Tok::KwVoid) && !at(Tok::KwInt)) fail("expected 'void' or 'int'");
    advance();
    std::string name = expect_ident();
    expect(Tok::LParen, "(");
    auto fn = make(AstKind::Function, begin);
    fn->name = name;
    while (!at(Tok::RParen)) {
      int pbegin = pos_;
      if (!at(Tok::KwInt) && !at(Tok::KwRef)) fail("expected parameter type");
      bool is_ref = at(Tok::KwRef);
      advance();
      auto param = make(AstKind::Decl, pbegin);
      param->name = expect_ident();
      param->is_ref = is_ref;
      close(*param);
      fn->children.push_back(std::move(param));
      if (!at(Tok::Comma)) break;
      advance();
    }
    expect(Tok::RParen, ")");
    fn->children.push_back(parse_block());
    if (pos_ != static_cast<int>(toks_.size())) fail("expected end of input");
    close(*fn);
    return fn;
  }

 private:
  AstPtr parse_block() {
    int begin = pos_;
    expect(Tok::LBrace, "{");
    auto block = make(AstKind::Block, begin);
    while (!at(Tok::RBrace)) block->children.push_back(parse_statement());
    expect(Tok::RBrace, "}");
    close(*block);
    return block;
  }

  AstPtr parse_statement() {
    if (at(Tok::KwInt) || at(Tok::KwRef)) return parse_decl();
    if (at(Tok::KwIf)) return parse_if();
    if (at(Tok::KwWhile)) return parse_while();
    if (at(Tok::KwReturn)) return parse_return();
    if (at(Tok::KwFree)) return parse_free();
    return parse_assign();
  }

  AstPtr parse_decl() {
    int begin = pos_;
    bool is_ref = at(Tok::KwRef);
    advance();
    auto decl = make(AstKind::Decl, begin);
    decl->is_ref = is_ref;
    decl->name = expect_ident();
    if (at(Tok::LBracket)) {
      advance();
      if (!at(Tok::IntLit)) fail("expected array size literal");
      decl->is_array = true;
      decl->array_size = static_cast<int>(cur().value);
      advance();
      expect(Tok::RBracket, "]");
    } else if (at(Tok::Assign)) {
      advance();
      decl->children.push_back(parse_expr());
    }
    expect(Tok::Semi, ";");
    close(*decl);
    return decl;
  }

  AstPtr parse_if() {
    int begin = pos_;
    advance();
    expect(Tok::LParen, "(");
    auto node = make(AstKind::If, begin);
    node->children.push_back(parse_expr());
    expect(Tok::RParen, ")");
    node->children.push_back(parse_block());
    if (at(Tok::KwElse)) {
      advance();
      node->children.push_back(parse_block());
    }
    close(*node);
    return node;
  }

  AstPtr parse_while() {
    int begin = pos_;
    advance();
    expect(Tok::LParen, "(");
    auto node = make(AstKind::While, begin);
    node->children.push_back(parse_expr());
    expect(Tok::RParen, ")");
    node->children.push_back(parse_block());
    close(*node);
    return node;
  }

  AstPtr parse_return() {
    int begin = pos_;
    advance();
    auto node = make(AstKind::Return, begin);
    if (!at(Tok::Semi)) node->children.push_back(parse_expr());
    expect(Tok::Semi, ";");
    close(*node);
    return node;
  }

  AstPtr parse_free() {
    int begin = pos_;
    advance();
    expect(Tok::LParen, "(");
    auto node = make(AstKind::Call, begin);
    node->name = "free";
    auto arg = make(AstKind::VarRef, pos_);
    arg->name = expect_ident();
    close(*arg);
    node->children.push_back(std::move(arg));
    expect(Tok::RParen, ")");
    expect(Tok::Semi, ";");
    close(*node);
    return node;
  }

  AstPtr parse_assign() {
    int begin = pos_;
    AstPtr lhs;
    if (at(Tok::Star)) {
      advance();
      lhs = make(AstKind::Deref, begin);
      auto var = make(AstKind::VarRef, pos_);
      var->name = expect_ident();
      close(*var);
      lhs->children.push_back(std::move(var));
      close(*lhs);
    } else {
      int vbegin = pos_;
      std::string name = expect_ident();
      if (at(Tok::LBracket)) {
        advance();
        lhs = make(AstKind::Index, vbegin);
        auto var = make(AstKind::VarRef, vbegin);
        var->name = name;
        var->tok_end = vbegin + 1;
        lhs->children.push_back(std::move(var));
        lhs->children.push_back(parse_expr());
        expect(Tok::RBracket, "]");
        close(*lhs);
      } else {
        lhs = make(AstKind::VarRef, vbegin);
        lhs->name = name;
        close(*lhs);
      }
    }
    expect(Tok::Assign, "=");
    auto node = make(AstKind::Assign, begin);
    node->children.push_back(std::move(lhs));
    node->children.push_back(parse_expr());
    expect(Tok::Semi, ";");
    close(*node);
    return node;
  }

  AstPtr parse_expr() { return parse_relational(); }

  AstPtr parse_relational() {
    auto lhs = parse_additive();
    while (at(Tok::Lt) || at(Tok::Le) || at(Tok::Gt) || at(Tok::Ge) || at(Tok::Eq) ||
           at(Tok::Ne)) {
      auto op = make(AstKind::BinOp, lhs->tok_begin);
      op->name = cur().text;
      advance();
      op->children.push_back(std::move(lhs));
      op->children.push_back(parse_additive());
      close(*op);
      lhs = std::move(op);
    }
    return lhs;
  }

  AstPtr parse_additive() {
    auto lhs = parse_multiplicative();
    while (at(Tok::Plus) || at(Tok::Minus)) {
      auto op = make(AstKind::BinOp, lhs->tok_begin);
      op->name = cur().text;
      advance();
      op->children.push_back(std::move(lhs));
      op->children.push_back(parse_multiplicative());
      close(*op);
      lhs = std::move(op);
    }
    return lhs;
  }

  AstPtr parse_multiplicative() {
    auto lhs = parse_primary();
    while (at(Tok::Star) || at(Tok::Slash)) {
      auto op = make(AstKind::BinOp, lhs->tok_begin);
      op->name = cur().text;
      advance();
      op->children.push_back(std::move(lhs));
      op->children.push_back(parse_primary());
      close(*op);
      lhs = std::move(op);
    }
    return lhs;
  }

  AstPtr parse_primary() {
    int begin = pos_;
    if (at(Tok::IntLit)) {
      auto node = make(AstKind::Const, begin);
      node->value = cur().value;
      advance();
      close(*node);
      return node;
    }
    if (at(Tok::Star)) {
      advance();
      auto node = make(AstKind::Deref, begin);
      auto var = make(AstKind::VarRef, pos_);
      var->name = expect_ident();
      close(*var);
      node->children.push_back(std::move(var));
      close(*node);
      return node;
    }
    if (at(Tok::KwAlloc)) {
      advance();
      expect(Tok::LParen, "(");
      auto node = make(AstKind::Call, begin);
      node->name = "alloc";
      node->children.push_back(parse_expr());
      expect(Tok::RParen, ")");
      close(*node);
      return node;
    }
    if (at(Tok::LParen)) {
      advance();
      auto e = parse_expr();
      expect(Tok::RParen, ")");
      return e;
    }
    if (at(Tok::Ident0)) {
      std::string name = expect_ident();
      if (at(Tok::LBracket)) {
        advance();
        auto node = make(AstKind::Index, begin);
        auto var = make(AstKind::VarRef, begin);
        var->name = name;
        var->tok_end = begin + 1;
        node->children.push_back(std::move(var));
        node->children.push_back(parse_expr());
        expect(Tok::RBracket, "]");
        close(*node);
        return node;
      }
      auto node = make(AstKind::VarRef, begin);
      node->name = name;
      close(*node);
      return node;
    }
    fail("expected expression");
    return nullptr;
  }

  // -- token helpers --

  bool at(Tok k) const {
    return pos_ < static_cast<int>(toks_.size()) && toks_[pos_].kind == k;
  }
  const RawToken& cur() const { return toks_[pos_]; }
  void advance() { ++pos_; }

  void expect(Tok k, const char* what) {
    if (!at(k)) fail(std::string("expected '") + what + "'");
    advance();
  }

  std::string expect_ident() {
    if (!at(Tok::Ident0)) fail("expected identifier");
    std::string name = cur().text;
    advance();
    return name;
  }

  [[noreturn]] void fail(const std::string& msg) {
    int line = pos_ < static_cast<int>(toks_.size())
                   ? toks_[pos_].line
                   : (toks_.empty() ? 1 : toks_.back().line);
    throw SyntaxError(msg + " at line " + std::to_string(line), line);
  }

  AstPtr make(AstKind k, int begin) {
    auto n = std::make_unique<AstNode>();
    n->kind = k;
    n->tok_begin = begin;
    n->line = begin < static_cast<int>(toks_.size()) ? toks_[begin].line
                                                     : (toks_.empty() ? 1 : toks_.back().line);
    return n;
  }

  void close(AstNode& n) { n.tok_end = std::max(n.tok_begin + 1, pos_); }

  std::vector<RawToken> toks_;
  int pos_ = 0;
};

}  // namespace

AstPtr parse(const std::string& source) {
  Parser p(lex(source));
  return p.parse_function();
}

int ast_size(const AstNode& n) {
  int s = 1;
  for (const auto& c : n.children) s += ast_size(*c);
  return s;
}

int ast_depth(const AstNode& n) {
  int d = 0;
  for (const auto& c : n.children) d = std::max(d, ast_depth(*c));
  return d + 1;
}

}  // namespace ff::lang
