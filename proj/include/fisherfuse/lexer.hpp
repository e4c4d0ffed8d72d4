#pragma once

#include <string>
#include <vector>

namespace ff::lang {

enum class Tok {
  Cls = 0,
  KwVoid,
  KwInt,
  KwRef,
  KwIf,
  KwElse,
  KwWhile,
  KwReturn,
  KwAlloc,
  KwFree,
  LParen,
  RParen,
  LBrace,
  RBrace,
  LBracket,
  RBracket,
  Semi,
  Comma,
  Assign,
  Eq,
  Ne,
  Lt,
  Le,
  Gt,
  Ge,
  Plus,
  Minus,
  Star,
  Slash,
  IntLit,
  Ident0,  // identifier buckets follow contiguously
};

constexpr int kIdentBuckets = 24;
constexpr int kVocabSize = static_cast<int>(Tok::Ident0) + kIdentBuckets;
constexpr int kDefaultMaxLen = 256;

struct RawToken {
  Tok kind;        // Ident0 stands for any identifier here
  std::string text;  // identifier name or literal text
  long value = 0;    // for IntLit
  int line = 1;
  int col = 1;
};

/// Token sequence over the closed vocabulary. Identifiers are bucketed by
/// first-occurrence index, so raw names never reach the model.
struct TokenSequence {
  std::vector<int> tokens;   // vocabulary ids, tokens[0] == CLS
  std::vector<int> line_of;  // source line per token (CLS maps to line 1)
  int length() const { return static_cast<int>(tokens.size()); }
};

/// Raw lexer pass preserving identifier names (used by the parser).
std::vector<RawToken> lex(const std::string& source);

/// Closed-vocabulary view with CLS prepended and deterministic truncation.
TokenSequence tokenize(const std::string& source, int max_len = kDefaultMaxLen);

const char* token_name(Tok t);

}  // namespace ff::lang
