#pragma once

#include <string>
#include <vector>

#include "fisherfuse/rng.hpp"

namespace ff::lang {

struct CodeSample {
  std::string id;
  std::string source;
  int label = 0;        // 1 = vulnerable
  std::string pattern;  // uaf | double_free | oob_write | uninit_use | benign
  uint64_t seed = 0;
};

/// Generates n labeled samples from parameterized templates. Each vulnerable
/// pattern has a benign twin differing in graph structure rather than lexical
/// surface (e.g. free moved after the last use).
std::vector<CodeSample> generate_corpus(int n, double vuln_ratio, Rng& rng);

std::string corpus_to_jsonl(const std::vector<CodeSample>& samples);
std::vector<CodeSample> corpus_from_jsonl(const std::string& text);

}  // namespace ff::lang
