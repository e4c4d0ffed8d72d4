#pragma once

#include <deque>

#include "fisherfuse/params.hpp"

namespace ff {

struct AlignConfig {
  int d = 64;
  int d_prime = 32;
  int queue_capacity = 512;
  double temperature = 0.2;
  bool symmetric = false;  // the one-directional form is the default
};

/// Two-layer projection heads for both modalities (linear-relu-linear, then
/// L2 normalization on the unit hypersphere).
void init_projection_params(ParamStore& store, const AlignConfig& cfg, Rng& rng);

struct Projected {
  int z_ncs = -1;  // 1 x d' unit row
  int z_cpg = -1;
};

Projected project(Bound& b, int h_cls, int h_pool);

/// FIFO memory of past CPG-side projections used as extra negatives. Entries
/// never carry gradients.
class XbmQueue {
 public:
  explicit XbmQueue(int capacity) : capacity_(capacity) {}
  void enqueue(const Matrix& z_rows);
  /// Queue contents as a (n x d') matrix; n == 0 when empty.
  Matrix snapshot(int d_prime) const;
  int size() const { return static_cast<int>(entries_.size()); }

 private:
  int capacity_;
  std::deque<std::vector<double>> entries_;
};

/// One-directional InfoNCE over the batch: anchors are NCS projections, the
/// denominator spans in-batch CPG vectors plus all queue entries. The current
/// CPG batch is enqueued after the loss is formed.
int info_nce(Bound& b, int z_ncs_batch, int z_cpg_batch, XbmQueue& queue,
             double temperature, bool enqueue = true, bool symmetric = false);

/// Linear centered kernel alignment between two feature sets with n rows.
double cka_linear(const Matrix& x, const Matrix& y);

}  // namespace ff
