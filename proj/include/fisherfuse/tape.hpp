#pragma once

#include <vector>

#include "fisherfuse/matrix.hpp"

namespace ff {

/// Reverse-mode tape over Matrix values. Build a graph with the op helpers,
/// then call backward() on a 1x1 loss node to get gradients for every node
/// that requires them.
class Tape {
 public:
  enum class Op {
    Leaf,
    Add,
    AddBroadcastRow,  // (LxD, 1xD)
    Scale,            // constant factor
    Matmul,
    Transpose,
    Relu,
    Sigmoid,
    SoftmaxRows,
    LayerNormRows,  // (x, gain 1xD, bias 1xD)
    MeanRows,       // LxD -> 1xD
    Row,            // select one row
    ConcatRows,
    ConcatCols,
    SliceCols,
    GatherRows,  // rows of input by constant indices
    L2NormRows,
    MulScalar,       // (s 1x1, a) -> s * a
    CeLossLogits,    // (logits Bx2) with labels -> 1x1 mean cross entropy
    NceLossLogits,   // (logits BxN), positive j == i -> 1x1
  };

  struct Node {
    Op op;
    int a = -1, b = -1, c = -1;
    Matrix value;
    bool requires_grad = false;
    double scalar = 0.0;
    std::vector<int> indices;  // gather indices / labels / slice bounds
  };

  int leaf(Matrix v, bool requires_grad = false);
  int add(int a, int b);
  int add_broadcast_row(int a, int row);
  int scale(int a, double c);
  int matmul(int a, int b);
  int transpose(int a);
  int relu(int a);
  int sigmoid(int a);
  int softmax_rows(int a);
  int layer_norm_rows(int x, int gain, int bias);
  int mean_rows(int a);
  int row(int a, int i);
  int concat_rows(const std::vector<int>& parts);
  int concat_cols(int a, int b);
  int slice_cols(int a, int begin, int len);
  int gather_rows(int table, std::vector<int> indices);
  int l2_normalize_rows(int a);
  int mul_scalar(int s, int a);
  int ce_loss_logits(int logits, std::vector<int> labels);
  int nce_loss_logits(int logits);

  const Matrix& value(int i) const { return nodes_[i].value; }
  size_t size() const { return nodes_.size(); }

  /// Gradients w.r.t. every node reachable from `loss` that requires grad.
  /// Entry i is empty (rows==0) when node i needs no gradient.
  std::vector<Matrix> backward(int loss) const;

 private:
  int push(Node n);
  std::vector<Node> nodes_;
};

}  // namespace ff
