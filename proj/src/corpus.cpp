#include "fisherfuse/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include <json.hpp>

#include "fisherfuse/errors.hpp"

namespace ff::lang {

namespace {

const char* kNamePool[] = {"a", "b",  "c",  "d",  "e",  "g",  "h",  "j",
                           "k", "m",  "n",  "p",  "q",  "r",  "s",  "t",
                           "u", "v",  "w",  "x",  "y",  "z",  "ab", "cd"};

struct Gen {
  Rng rng;
  std::vector<std::string> names;
  size_t next_name = 0;

  explicit Gen(uint64_t seed) : rng(seed) {
    names.assign(std::begin(kNamePool), std::end(kNamePool));
    for (size_t i = names.size() - 1; i > 0; --i)
      std::swap(names[i], names[rng.below(i + 1)]);
  }

  std::string var() { return names[next_name++ % names.size()]; }
  long lit(long lo, long hi) { return lo + static_cast<long>(rng.below(hi - lo + 1)); }

  // A self-contained distractor unit: statements that only touch fresh vars.
  std::vector<std::string> distractor() {
    std::string d = var();
    std::vector<std::string> out;
    switch (rng.below(4)) {
      case 0:
        out.push_back("int " + d + " = " + std::to_string(lit(1, 9)) + ";");
        out.push_back(d + " = " + d + " * " + std::to_string(lit(2, 5)) + " + " +
                      std::to_string(lit(1, 7)) + ";");
        break;
      case 1: {
        out.push_back("int " + d + " = " + std::to_string(lit(1, 9)) + ";");
        out.push_back("if (" + d + " < " + std::to_string(lit(3, 9)) + ") { " + d +
                      " = " + d + " + " + std::to_string(lit(1, 4)) + "; }");
        break;
      }
      case 2: {
        std::string e = var();
        out.push_back("int " + d + " = " + std::to_string(lit(0, 3)) + ";");
        out.push_back("int " + e + " = " + std::to_string(lit(4, 9)) + ";");
        out.push_back("while (" + d + " < " + e + ") { " + d + " = " + d + " + 1; }");
        break;
      }
      default:
        out.push_back("int " + d + " = " + std::to_string(lit(1, 9)) + " - " +
                      std::to_string(lit(1, 9)) + ";");
        break;
    }
    return out;
  }

  std::string assemble(const std::vector<std::string>& core) {
    // core statements keep relative order; distractor units are spliced in at
    // random positions so linear distance carries no label signal
    std::vector<std::vector<std::string>> units;
    for (const std::string& s : core) units.push_back({s});
    int extra = 1 + static_cast<int>(rng.below(3));
    for (int i = 0; i < extra; ++i) {
      auto d = distractor();
      units.insert(units.begin() + rng.below(units.size() + 1), d);
    }
    std::ostringstream os;
    os << "int fn() {\n";
    for (const auto& u : units)
      for (const std::string& s : u) os << "  " << s << "\n";
    os << "  return 0;\n}\n";
    return os.str();
  }

  std::string uaf(bool vulnerable) {
    std::string p = var(), y = var();
    long n = lit(2, 8), c1 = lit(1, 9), c2 = lit(1, 9);
    std::vector<std::string> core;
    core.push_back("ref " + p + " = alloc(" + std::to_string(n) + ");");
    core.push_back("*" + p + " = " + std::to_string(c1) + ";");
    if (vulnerable) {
      core.push_back("free(" + p + ");");
      core.push_back("int " + y + " = *" + p + " + " + std::to_string(c2) + ";");
    } else {
      core.push_back("int " + y + " = *" + p + " + " + std::to_string(c2) + ";");
      core.push_back("free(" + p + ");");
    }
    return assemble(core);
  }

  std::string double_free(bool vulnerable) {
    std::string p = var(), q = var();
    long n = lit(2, 8), m = lit(2, 8);
    std::vector<std::string> core;
    core.push_back("ref " + p + " = alloc(" + std::to_string(n) + ");");
    core.push_back("ref " + q + " = alloc(" + std::to_string(m) + ");");
    core.push_back("*" + p + " = " + std::to_string(lit(1, 9)) + ";");
    core.push_back("*" + q + " = " + std::to_string(lit(1, 9)) + ";");
    core.push_back("free(" + p + ");");
    core.push_back("free(" + (vulnerable ? p : q) + ");");
    return assemble(core);
  }

  std::string oob_write(bool vulnerable) {
    std::string a = var(), i = var();
    long n = lit(4, 9);
    std::vector<std::string> core;
    core.push_back("int " + a + "[" + std::to_string(n) + "];");
    core.push_back("int " + i + " = " + std::to_string(lit(0, 9)) + " + " +
                   std::to_string(lit(0, 9)) + ";");
    if (vulnerable) {
      core.push_back(a + "[" + i + "] = " + std::to_string(lit(1, 9)) + ";");
    } else {
      core.push_back("if (" + i + " < " + std::to_string(n) + ") { " + a + "[" + i +
                     "] = " + std::to_string(lit(1, 9)) + "; }");
    }
    return assemble(core);
  }

  std::string uninit_use(bool vulnerable) {
    std::string x = var(), y = var();
    long c1 = lit(1, 9), c2 = lit(1, 9);
    std::vector<std::string> core;
    core.push_back("int " + x + ";");
    if (vulnerable) {
      core.push_back("int " + y + " = " + x + " + " + std::to_string(c1) + ";");
      core.push_back(x + " = " + std::to_string(c2) + ";");
    } else {
      core.push_back(x + " = " + std::to_string(c2) + ";");
      core.push_back("int " + y + " = " + x + " + " + std::to_string(c1) + ";");
    }
    return assemble(core);
  }

  // Benign sample that lexically resembles use-after-free: a free followed by
  // a dereference of a different, still-live pointer.
  std::string interleaved_benign() {
    std::string p = var(), q = var(), y = var();
    std::vector<std::string> core;
    core.push_back("ref " + p + " = alloc(" + std::to_string(lit(2, 8)) + ");");
    core.push_back("ref " + q + " = alloc(" + std::to_string(lit(2, 8)) + ");");
    core.push_back("*" + p + " = " + std::to_string(lit(1, 9)) + ";");
    core.push_back("*" + q + " = " + std::to_string(lit(1, 9)) + ";");
    core.push_back("free(" + p + ");");
    core.push_back("int " + y + " = *" + q + " + " + std::to_string(lit(1, 9)) + ";");
    core.push_back("free(" + q + ");");
    return assemble(core);
  }
};

const std::vector<std::string> kVulnPatterns = {"uaf", "double_free", "oob_write",
                                                "uninit_use"};

std::string emit(Gen& g, const std::string& pattern, bool vulnerable) {
  if (pattern == "uaf") return g.uaf(vulnerable);
  if (pattern == "double_free") return g.double_free(vulnerable);
  if (pattern == "oob_write") return g.oob_write(vulnerable);
  if (pattern == "uninit_use") return g.uninit_use(vulnerable);
  return g.interleaved_benign();
}

}  // namespace

std::vector<CodeSample> generate_corpus(int n, double vuln_ratio, Rng& rng) {
  if (vuln_ratio <= 0.0 || vuln_ratio >= 1.0)
    throw ParameterError("generate_corpus: vuln_ratio must be in (0,1)");
  int n_vuln = static_cast<int>(std::llround(n * vuln_ratio));
  std::vector<CodeSample> samples;
  for (int i = 0; i < n; ++i) {
    bool vulnerable = i < n_vuln;
    uint64_t seed = rng.split(static_cast<uint64_t>(i) + 1).next_u64();
    Gen g(seed);
    std::string pattern;
    if (vulnerable) {
      pattern = kVulnPatterns[i % kVulnPatterns.size()];
    } else {
      // benign pool: structural twins of every vulnerable pattern plus the
      // lexically-confusable interleaved template
      int pick = i % (static_cast<int>(kVulnPatterns.size()) + 1);
      pattern = "benign";
      CodeSample s;
      char buf[16];
      std::snprintf(buf, sizeof buf, "s%06d", i);
      s.id = buf;
      s.source = pick < static_cast<int>(kVulnPatterns.size())
                     ? emit(g, kVulnPatterns[pick], false)
                     : g.interleaved_benign();
      s.label = 0;
      s.pattern = pattern;
      s.seed = seed;
      samples.push_back(std::move(s));
      continue;
    }
    CodeSample s;
    char buf[16];
    std::snprintf(buf, sizeof buf, "s%06d", i);
    s.id = buf;
    s.source = emit(g, pattern, true);
    s.label = 1;
    s.pattern = pattern;
    s.seed = seed;
    samples.push_back(std::move(s));
  }
  // deterministic interleave of classes
  Rng order = rng.split(0xC0FFEE);
  for (size_t i = samples.size() - 1; i > 0; --i)
    std::swap(samples[i], samples[order.below(i + 1)]);
  return samples;
}

std::string corpus_to_jsonl(const std::vector<CodeSample>& samples) {
  std::ostringstream os;
  for (const CodeSample& s : samples) {
    nlohmann::json j{{"id", s.id},
                     {"source", s.source},
                     {"label", s.label},
                     {"pattern", s.pattern},
                     {"seed", s.seed}};
    os << j.dump() << "\n";
  }
  return os.str();
}

std::vector<CodeSample> corpus_from_jsonl(const std::string& text) {
  std::vector<CodeSample> out;
  std::istringstream is(text);
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    nlohmann::json j = nlohmann::json::parse(line);
    if (j.contains("header")) continue;  // optional first-line metadata record
    CodeSample s;
    s.id = j.at("id").get<std::string>();
    s.source = j.at("source").get<std::string>();
    s.label = j.at("label").get<int>();
    s.pattern = j.at("pattern").get<std::string>();
    s.seed = j.at("seed").get<uint64_t>();
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace ff::lang
