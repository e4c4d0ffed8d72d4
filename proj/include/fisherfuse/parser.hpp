#pragma once

#include <memory>
#include <string>
#include <vector>

#include "fisherfuse/lexer.hpp"

namespace ff::lang {

enum class AstKind {
  Function,
  Block,
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
  BinOp,
};

struct AstNode {
  AstKind kind;
  std::string name;  // identifier for Decl/VarRef/Call, operator text for BinOp
  long value = 0;    // Const
  int line = 1;
  int tok_begin = 0;  // raw token span [begin, end)
  int tok_end = 0;
  bool is_array = false;
  bool is_ref = false;
  int array_size = 0;
  std::vector<std::unique_ptr<AstNode>> children;
};

using AstPtr = std::unique_ptr<AstNode>;

/// Parses one function definition in the mini-language. Throws LexicalError
/// or SyntaxError with a line diagnostic.
AstPtr parse(const std::string& source);

/// Node count over the whole tree (all kinds, including Block/BinOp).
int ast_size(const AstNode& n);
int ast_depth(const AstNode& n);

}  // namespace ff::lang
