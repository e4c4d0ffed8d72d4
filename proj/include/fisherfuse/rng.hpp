#pragma once

#include <cstdint>

namespace ff {

/// Counter-based splittable generator. Identical seed and call sequence give
/// an identical stream; split() derives an independent stream so parallel
/// sample generation stays reproducible.
class Rng {
 public:
  explicit Rng(uint64_t seed) : seed_(seed) {}

  uint64_t next_u64();
  /// Uniform in [0, 1).
  double uniform();
  double uniform(double lo, double hi);
  /// Uniform integer in [0, n).
  uint64_t below(uint64_t n);
  /// Standard normal via Box-Muller.
  double normal();

  Rng split(uint64_t stream) const;

  uint64_t seed() const { return seed_; }
  uint64_t counter() const { return counter_; }

 private:
  uint64_t seed_;
  uint64_t counter_ = 0;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace ff
