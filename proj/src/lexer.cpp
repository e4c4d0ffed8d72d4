#include "fisherfuse/lexer.hpp"

#include <cctype>
#include <map>
#include <unordered_map>

#include "fisherfuse/errors.hpp"

namespace ff::lang {

namespace {

const std::map<std::string, Tok> kKeywords = {
    {"void", Tok::KwVoid},     {"int", Tok::KwInt},   {"ref", Tok::KwRef},
    {"if", Tok::KwIf},         {"else", Tok::KwElse}, {"while", Tok::KwWhile},
    {"return", Tok::KwReturn}, {"alloc", Tok::KwAlloc}, {"free", Tok::KwFree},
};

}  // namespace

std::vector<RawToken> lex(const std::string& source) {
  std::vector<RawToken> out;
  int line = 1, col = 1;
  size_t i = 0;
  auto push = [&](Tok k, std::string text, long value = 0) {
    out.push_back(RawToken{k, std::move(text), value, line, col});
  };
  while (i < source.size()) {
    char c = source[i];
    if (c == '\n') {
      ++line;
      col = 1;
      ++i;
      continue;
    }
    if (std::isspace(static_cast<unsigned char>(c))) {
      ++col;
      ++i;
      continue;
    }
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      size_t start = i;
      int start_col = col;
      while (i < source.size() &&
             (std::isalnum(static_cast<unsigned char>(source[i])) || source[i] == '_')) {
        ++i;
        ++col;
      }
      std::string word = source.substr(start, i - start);
      auto it = kKeywords.find(word);
      RawToken t;
      t.kind = it != kKeywords.end() ? it->second : Tok::Ident0;
      t.text = word;
      t.line = line;
      t.col = start_col;
      out.push_back(t);
      continue;
    }
    if (std::isdigit(static_cast<unsigned char>(c))) {
      size_t start = i;
      int start_col = col;
      while (i < source.size() && std::isdigit(static_cast<unsigned char>(source[i]))) {
        ++i;
        ++col;
      }
      std::string num = source.substr(start, i - start);
      RawToken t;
      t.kind = Tok::IntLit;
      t.text = num;
      t.value = std::stol(num);
      t.line = line;
      t.col = start_col;
      out.push_back(t);
      continue;
    }
    auto two = [&](char second, Tok twoTok, Tok oneTok) {
      if (i + 1 < source.size() && source[i + 1] == second) {
        push(twoTok, std::string(1, c) + second);
        i += 2;
        col += 2;
      } else {
        push(oneTok, std::string(1, c));
        ++i;
        ++col;
      }
    };
    switch (c) {
      case '(': push(Tok::LParen, "("); ++i; ++col; break;
      case ')': push(Tok::RParen, ")"); ++i; ++col; break;
      case '{': push(Tok::LBrace, "{"); ++i; ++col; break;
      case '}': push(Tok::RBrace, "}"); ++i; ++col; break;
      case '[': push(Tok::LBracket, "["); ++i; ++col; break;
      case ']': push(Tok::RBracket, "]"); ++i; ++col; break;
      case ';': push(Tok::Semi, ";"); ++i; ++col; break;
      case ',': push(Tok::Comma, ","); ++i; ++col; break;
      case '+': push(Tok::Plus, "+"); ++i; ++col; break;
      case '-': push(Tok::Minus, "-"); ++i; ++col; break;
      case '*': push(Tok::Star, "*"); ++i; ++col; break;
      case '/': push(Tok::Slash, "/"); ++i; ++col; break;
      case '=': two('=', Tok::Eq, Tok::Assign); break;
      case '!':
        if (i + 1 < source.size() && source[i + 1] == '=') {
          push(Tok::Ne, "!=");
          i += 2;
          col += 2;
        } else {
          throw LexicalError("unexpected character '!'", line, col);
        }
        break;
      case '<': two('=', Tok::Le, Tok::Lt); break;
      case '>': two('=', Tok::Ge, Tok::Gt); break;
      default:
        throw LexicalError(std::string("unexpected character '") + c + "'", line, col);
    }
  }
  return out;
}

TokenSequence tokenize(const std::string& source, int max_len) {
  std::vector<RawToken> raw = lex(source);
  TokenSequence seq;
  seq.tokens.push_back(static_cast<int>(Tok::Cls));
  seq.line_of.push_back(1);
  std::unordered_map<std::string, int> bucket;
  for (const RawToken& t : raw) {
    if (seq.length() >= max_len) break;
    int id;
    if (t.kind == Tok::Ident0) {
      auto it = bucket.find(t.text);
      if (it == bucket.end()) {
        int idx = static_cast<int>(bucket.size());
        if (idx >= kIdentBuckets) idx = kIdentBuckets - 1;
        it = bucket.emplace(t.text, idx).first;
      }
      id = static_cast<int>(Tok::Ident0) + it->second;
    } else {
      id = static_cast<int>(t.kind);
    }
    seq.tokens.push_back(id);
    seq.line_of.push_back(t.line);
  }
  return seq;
}

const char* token_name(Tok t) {
  switch (t) {
    case Tok::Cls: return "CLS";
    case Tok::KwVoid: return "void";
    case Tok::KwInt: return "int";
    case Tok::KwRef: return "ref";
    case Tok::KwIf: return "if";
    case Tok::KwElse: return "else";
    case Tok::KwWhile: return "while";
    case Tok::KwReturn: return "return";
    case Tok::KwAlloc: return "alloc";
    case Tok::KwFree: return "free";
    case Tok::LParen: return "(";
    case Tok::RParen: return ")";
    case Tok::LBrace: return "{";
    case Tok::RBrace: return "}";
    case Tok::LBracket: return "[";
    case Tok::RBracket: return "]";
    case Tok::Semi: return ";";
    case Tok::Comma: return ",";
    case Tok::Assign: return "=";
    case Tok::Eq: return "==";
    case Tok::Ne: return "!=";
    case Tok::Lt: return "<";
    case Tok::Le: return "<=";
    case Tok::Gt: return ">";
    case Tok::Ge: return ">=";
    case Tok::Plus: return "+";
    case Tok::Minus: return "-";
    case Tok::Star: return "*";
    case Tok::Slash: return "/";
    case Tok::IntLit: return "INT_LIT";
    default: return "ident";
  }
}

}  // namespace ff::lang
