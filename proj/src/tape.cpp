#include "fisherfuse/tape.hpp"

#include <cmath>

#include "fisherfuse/errors.hpp"

namespace ff {

int Tape::push(Node n) {
  nodes_.push_back(std::move(n));
  return static_cast<int>(nodes_.size()) - 1;
}

int Tape::leaf(Matrix v, bool requires_grad) {
  Node n;
  n.op = Op::Leaf;
  n.value = std::move(v);
  n.requires_grad = requires_grad;
  return push(std::move(n));
}

namespace {
bool rg(const std::vector<Tape::Node>& nodes, int i) {
  return i >= 0 && nodes[i].requires_grad;
}
}  // namespace

int Tape::add(int a, int b) {
  Node n;
  n.op = Op::Add;
  n.a = a;
  n.b = b;
  n.value = ff::add(nodes_[a].value, nodes_[b].value);
  n.requires_grad = rg(nodes_, a) || rg(nodes_, b);
  return push(std::move(n));
}

int Tape::add_broadcast_row(int a, int row) {
  const Matrix& x = nodes_[a].value;
  const Matrix& r = nodes_[row].value;
  if (r.rows != 1 || r.cols != x.cols) throw ShapeError("add_broadcast_row: bad row");
  Node n;
  n.op = Op::AddBroadcastRow;
  n.a = a;
  n.b = row;
  Matrix v = x;
  for (int i = 0; i < x.rows; ++i)
    for (int j = 0; j < x.cols; ++j) v.at(i, j) += r.at(0, j);
  n.value = std::move(v);
  n.requires_grad = rg(nodes_, a) || rg(nodes_, row);
  return push(std::move(n));
}

int Tape::scale(int a, double c) {
  Node n;
  n.op = Op::Scale;
  n.a = a;
  n.scalar = c;
  n.value = ff::scale(nodes_[a].value, c);
  n.requires_grad = rg(nodes_, a);
  return push(std::move(n));
}

int Tape::matmul(int a, int b) {
  Node n;
  n.op = Op::Matmul;
  n.a = a;
  n.b = b;
  n.value = ff::matmul(nodes_[a].value, nodes_[b].value);
  n.requires_grad = rg(nodes_, a) || rg(nodes_, b);
  return push(std::move(n));
}

int Tape::transpose(int a) {
  Node n;
  n.op = Op::Transpose;
  n.a = a;
  n.value = ff::transpose(nodes_[a].value);
  n.requires_grad = rg(nodes_, a);
  return push(std::move(n));
}

int Tape::relu(int a) {
  Node n;
  n.op = Op::Relu;
  n.a = a;
  Matrix v = nodes_[a].value;
  for (double& x : v.data) x = x > 0 ? x : 0.0;
  n.value = std::move(v);
  n.requires_grad = rg(nodes_, a);
  return push(std::move(n));
}

int Tape::sigmoid(int a) {
  Node n;
  n.op = Op::Sigmoid;
  n.a = a;
  Matrix v = nodes_[a].value;
  for (double& x : v.data) {
    double z = x < -30.0 ? -30.0 : (x > 30.0 ? 30.0 : x);
    x = 1.0 / (1.0 + std::exp(-z));
  }
  n.value = std::move(v);
  n.requires_grad = rg(nodes_, a);
  return push(std::move(n));
}

int Tape::softmax_rows(int a) {
  Node n;
  n.op = Op::SoftmaxRows;
  n.a = a;
  n.value = ff::softmax_rows(nodes_[a].value);
  n.requires_grad = rg(nodes_, a);
  return push(std::move(n));
}

int Tape::layer_norm_rows(int x, int gain, int bias) {
  const Matrix& m = nodes_[x].value;
  const Matrix& g = nodes_[gain].value;
  const Matrix& b = nodes_[bias].value;
  if (g.rows != 1 || b.rows != 1 || g.cols != m.cols || b.cols != m.cols)
    throw ShapeError("layer_norm_rows: affine shape mismatch");
  Node n;
  n.op = Op::LayerNormRows;
  n.a = x;
  n.b = gain;
  n.c = bias;
  std::vector<double> gv(g.data.begin(), g.data.end());
  std::vector<double> bv(b.data.begin(), b.data.end());
  n.value = ff::layer_norm(m, gv, bv);
  n.requires_grad = rg(nodes_, x) || rg(nodes_, gain) || rg(nodes_, bias);
  return push(std::move(n));
}

int Tape::mean_rows(int a) {
  const Matrix& x = nodes_[a].value;
  Node n;
  n.op = Op::MeanRows;
  n.a = a;
  Matrix v(1, x.cols);
  for (int i = 0; i < x.rows; ++i)
    for (int j = 0; j < x.cols; ++j) v.at(0, j) += x.at(i, j);
  for (double& d : v.data) d /= std::max(1, x.rows);
  n.value = std::move(v);
  n.requires_grad = rg(nodes_, a);
  return push(std::move(n));
}

int Tape::row(int a, int i) {
  const Matrix& x = nodes_[a].value;
  if (i < 0 || i >= x.rows) throw ShapeError("row: index out of range");
  Node n;
  n.op = Op::Row;
  n.a = a;
  n.indices = {i};
  Matrix v(1, x.cols);
  for (int j = 0; j < x.cols; ++j) v.at(0, j) = x.at(i, j);
  n.value = std::move(v);
  n.requires_grad = rg(nodes_, a);
  return push(std::move(n));
}

int Tape::concat_rows(const std::vector<int>& parts) {
  if (parts.empty()) throw ShapeError("concat_rows: empty");
  int cols = nodes_[parts[0]].value.cols;
  int rows = 0;
  for (int p : parts) {
    if (nodes_[p].value.cols != cols) throw ShapeError("concat_rows: cols mismatch");
    rows += nodes_[p].value.rows;
  }
  Node n;
  n.op = Op::ConcatRows;
  n.indices.assign(parts.begin(), parts.end());
  Matrix v(rows, cols);
  int r = 0;
  for (int p : parts) {
    const Matrix& m = nodes_[p].value;
    for (int i = 0; i < m.rows; ++i, ++r)
      for (int j = 0; j < cols; ++j) v.at(r, j) = m.at(i, j);
    if (nodes_[p].requires_grad) n.requires_grad = true;
  }
  n.value = std::move(v);
  return push(std::move(n));
}

int Tape::concat_cols(int a, int b) {
  const Matrix& x = nodes_[a].value;
  const Matrix& y = nodes_[b].value;
  if (x.rows != y.rows) throw ShapeError("concat_cols: rows mismatch");
  Node n;
  n.op = Op::ConcatCols;
  n.a = a;
  n.b = b;
  Matrix v(x.rows, x.cols + y.cols);
  for (int i = 0; i < x.rows; ++i) {
    for (int j = 0; j < x.cols; ++j) v.at(i, j) = x.at(i, j);
    for (int j = 0; j < y.cols; ++j) v.at(i, x.cols + j) = y.at(i, j);
  }
  n.value = std::move(v);
  n.requires_grad = rg(nodes_, a) || rg(nodes_, b);
  return push(std::move(n));
}

int Tape::slice_cols(int a, int begin, int len) {
  const Matrix& x = nodes_[a].value;
  if (begin < 0 || begin + len > x.cols) throw ShapeError("slice_cols: out of range");
  Node n;
  n.op = Op::SliceCols;
  n.a = a;
  n.indices = {begin, len};
  Matrix v(x.rows, len);
  for (int i = 0; i < x.rows; ++i)
    for (int j = 0; j < len; ++j) v.at(i, j) = x.at(i, begin + j);
  n.value = std::move(v);
  n.requires_grad = rg(nodes_, a);
  return push(std::move(n));
}

int Tape::gather_rows(int table, std::vector<int> indices) {
  const Matrix& t = nodes_[table].value;
  for (int i : indices)
    if (i < 0 || i >= t.rows) throw EncodingError("gather_rows: id out of vocabulary");
  Node n;
  n.op = Op::GatherRows;
  n.a = table;
  Matrix v(static_cast<int>(indices.size()), t.cols);
  for (size_t r = 0; r < indices.size(); ++r)
    for (int j = 0; j < t.cols; ++j) v.at(static_cast<int>(r), j) = t.at(indices[r], j);
  n.indices = std::move(indices);
  n.value = std::move(v);
  n.requires_grad = rg(nodes_, table);
  return push(std::move(n));
}

int Tape::l2_normalize_rows(int a) {
  const Matrix& x = nodes_[a].value;
  Node n;
  n.op = Op::L2NormRows;
  n.a = a;
  Matrix v = x;
  for (int i = 0; i < x.rows; ++i) {
    double s = 0.0;
    for (int j = 0; j < x.cols; ++j) s += x.at(i, j) * x.at(i, j);
    double norm = std::sqrt(s);
    if (norm < 1e-12)
      throw NormalizationError("l2_normalize_rows: zero vector (dead head)");
    for (int j = 0; j < x.cols; ++j) v.at(i, j) /= norm;
  }
  n.value = std::move(v);
  n.requires_grad = rg(nodes_, a);
  return push(std::move(n));
}

int Tape::mul_scalar(int s, int a) {
  const Matrix& sv = nodes_[s].value;
  if (sv.rows != 1 || sv.cols != 1) throw ShapeError("mul_scalar: s must be 1x1");
  Node n;
  n.op = Op::MulScalar;
  n.a = s;
  n.b = a;
  n.value = ff::scale(nodes_[a].value, sv.at(0, 0));
  n.requires_grad = rg(nodes_, s) || rg(nodes_, a);
  return push(std::move(n));
}

int Tape::ce_loss_logits(int logits, std::vector<int> labels) {
  const Matrix& z = nodes_[logits].value;
  if (z.rows != static_cast<int>(labels.size()))
    throw ShapeError("ce_loss_logits: label count mismatch");
  Node n;
  n.op = Op::CeLossLogits;
  n.a = logits;
  Matrix p = ff::softmax_rows(z);
  double loss = 0.0;
  for (int i = 0; i < z.rows; ++i) loss -= std::log(std::max(p.at(i, labels[i]), 1e-300));
  loss /= std::max(1, z.rows);
  Matrix v(1, 1);
  v.at(0, 0) = loss;
  n.value = std::move(v);
  n.indices = std::move(labels);
  n.requires_grad = rg(nodes_, logits);
  return push(std::move(n));
}

int Tape::nce_loss_logits(int logits) {
  const Matrix& z = nodes_[logits].value;
  if (z.cols < z.rows) throw ShapeError("nce_loss_logits: fewer columns than anchors");
  Node n;
  n.op = Op::NceLossLogits;
  n.a = logits;
  Matrix p = ff::softmax_rows(z);
  double loss = 0.0;
  for (int i = 0; i < z.rows; ++i) loss -= std::log(std::max(p.at(i, i), 1e-300));
  loss /= std::max(1, z.rows);
  Matrix v(1, 1);
  v.at(0, 0) = loss;
  n.value = std::move(v);
  n.requires_grad = rg(nodes_, logits);
  return push(std::move(n));
}

std::vector<Matrix> Tape::backward(int loss) const {
  const Node& ln = nodes_[loss];
  if (ln.value.rows != 1 || ln.value.cols != 1)
    throw ShapeError("backward: loss must be 1x1");
  std::vector<Matrix> grads(nodes_.size());
  auto ensure = [&](int i) -> Matrix& {
    if (grads[i].rows == 0)
      grads[i] = Matrix(nodes_[i].value.rows, nodes_[i].value.cols);
    return grads[i];
  };
  {
    Matrix g(1, 1);
    g.at(0, 0) = 1.0;
    grads[loss] = std::move(g);
  }

  for (int i = loss; i >= 0; --i) {
    const Node& n = nodes_[i];
    if (!n.requires_grad || grads[i].rows == 0) continue;
    const Matrix& g = grads[i];
    switch (n.op) {
      case Op::Leaf:
        break;
      case Op::Add: {
        if (rg(nodes_, n.a)) {
          Matrix& ga = ensure(n.a);
          for (size_t t = 0; t < g.data.size(); ++t) ga.data[t] += g.data[t];
        }
        if (rg(nodes_, n.b)) {
          Matrix& gb = ensure(n.b);
          for (size_t t = 0; t < g.data.size(); ++t) gb.data[t] += g.data[t];
        }
        break;
      }
      case Op::AddBroadcastRow: {
        if (rg(nodes_, n.a)) {
          Matrix& ga = ensure(n.a);
          for (size_t t = 0; t < g.data.size(); ++t) ga.data[t] += g.data[t];
        }
        if (rg(nodes_, n.b)) {
          Matrix& gb = ensure(n.b);
          for (int r = 0; r < g.rows; ++r)
            for (int c = 0; c < g.cols; ++c) gb.at(0, c) += g.at(r, c);
        }
        break;
      }
      case Op::Scale: {
        if (rg(nodes_, n.a)) {
          Matrix& ga = ensure(n.a);
          for (size_t t = 0; t < g.data.size(); ++t) ga.data[t] += n.scalar * g.data[t];
        }
        break;
      }
      case Op::Matmul: {
        const Matrix& A = nodes_[n.a].value;
        const Matrix& B = nodes_[n.b].value;
        if (rg(nodes_, n.a)) {
          Matrix d = ff::matmul(g, ff::transpose(B));
          Matrix& ga = ensure(n.a);
          for (size_t t = 0; t < d.data.size(); ++t) ga.data[t] += d.data[t];
        }
        if (rg(nodes_, n.b)) {
          Matrix d = ff::matmul(ff::transpose(A), g);
          Matrix& gb = ensure(n.b);
          for (size_t t = 0; t < d.data.size(); ++t) gb.data[t] += d.data[t];
        }
        break;
      }
      case Op::Transpose: {
        if (rg(nodes_, n.a)) {
          Matrix d = ff::transpose(g);
          Matrix& ga = ensure(n.a);
          for (size_t t = 0; t < d.data.size(); ++t) ga.data[t] += d.data[t];
        }
        break;
      }
      case Op::Relu: {
        if (rg(nodes_, n.a)) {
          const Matrix& x = nodes_[n.a].value;
          Matrix& ga = ensure(n.a);
          for (size_t t = 0; t < g.data.size(); ++t)
            if (x.data[t] > 0) ga.data[t] += g.data[t];
        }
        break;
      }
      case Op::Sigmoid: {
        if (rg(nodes_, n.a)) {
          Matrix& ga = ensure(n.a);
          for (size_t t = 0; t < g.data.size(); ++t) {
            double s = n.value.data[t];
            ga.data[t] += g.data[t] * s * (1.0 - s);
          }
        }
        break;
      }
      case Op::SoftmaxRows: {
        if (rg(nodes_, n.a)) {
          Matrix& ga = ensure(n.a);
          const Matrix& y = n.value;
          for (int r = 0; r < y.rows; ++r) {
            double dotv = 0.0;
            for (int c = 0; c < y.cols; ++c) dotv += g.at(r, c) * y.at(r, c);
            for (int c = 0; c < y.cols; ++c)
              ga.at(r, c) += y.at(r, c) * (g.at(r, c) - dotv);
          }
        }
        break;
      }
      case Op::LayerNormRows: {
        const Matrix& x = nodes_[n.a].value;
        const Matrix& gain = nodes_[n.b].value;
        const double eps = 1e-5;
        int D = x.cols;
        for (int r = 0; r < x.rows; ++r) {
          double mean = 0.0;
          for (int c = 0; c < D; ++c) mean += x.at(r, c);
          mean /= D;
          double var = 0.0;
          for (int c = 0; c < D; ++c) {
            double d = x.at(r, c) - mean;
            var += d * d;
          }
          var /= D;
          double inv = 1.0 / std::sqrt(var + eps);
          // xhat and dxhat
          double sum_dxhat = 0.0, sum_dxhat_xhat = 0.0;
          std::vector<double> xhat(D), dxhat(D);
          for (int c = 0; c < D; ++c) {
            xhat[c] = (x.at(r, c) - mean) * inv;
            dxhat[c] = g.at(r, c) * gain.at(0, c);
            sum_dxhat += dxhat[c];
            sum_dxhat_xhat += dxhat[c] * xhat[c];
          }
          if (rg(nodes_, n.a)) {
            Matrix& ga = ensure(n.a);
            for (int c = 0; c < D; ++c)
              ga.at(r, c) += inv / D *
                             (D * dxhat[c] - sum_dxhat - xhat[c] * sum_dxhat_xhat);
          }
          if (rg(nodes_, n.b)) {
            Matrix& gg = ensure(n.b);
            for (int c = 0; c < D; ++c) gg.at(0, c) += g.at(r, c) * xhat[c];
          }
          if (rg(nodes_, n.c)) {
            Matrix& gb = ensure(n.c);
            for (int c = 0; c < D; ++c) gb.at(0, c) += g.at(r, c);
          }
        }
        break;
      }
      case Op::MeanRows: {
        if (rg(nodes_, n.a)) {
          const Matrix& x = nodes_[n.a].value;
          Matrix& ga = ensure(n.a);
          double inv = 1.0 / std::max(1, x.rows);
          for (int r = 0; r < x.rows; ++r)
            for (int c = 0; c < x.cols; ++c) ga.at(r, c) += g.at(0, c) * inv;
        }
        break;
      }
      case Op::Row: {
        if (rg(nodes_, n.a)) {
          Matrix& ga = ensure(n.a);
          int r = n.indices[0];
          for (int c = 0; c < g.cols; ++c) ga.at(r, c) += g.at(0, c);
        }
        break;
      }
      case Op::ConcatRows: {
        int r = 0;
        for (int p : n.indices) {
          const Matrix& m = nodes_[p].value;
          if (rg(nodes_, p)) {
            Matrix& gp = ensure(p);
            for (int i = 0; i < m.rows; ++i)
              for (int c = 0; c < m.cols; ++c) gp.at(i, c) += g.at(r + i, c);
          }
          r += m.rows;
        }
        break;
      }
      case Op::ConcatCols: {
        const Matrix& x = nodes_[n.a].value;
        const Matrix& y = nodes_[n.b].value;
        if (rg(nodes_, n.a)) {
          Matrix& ga = ensure(n.a);
          for (int i = 0; i < x.rows; ++i)
            for (int c = 0; c < x.cols; ++c) ga.at(i, c) += g.at(i, c);
        }
        if (rg(nodes_, n.b)) {
          Matrix& gb = ensure(n.b);
          for (int i = 0; i < y.rows; ++i)
            for (int c = 0; c < y.cols; ++c) gb.at(i, c) += g.at(i, x.cols + c);
        }
        break;
      }
      case Op::SliceCols: {
        if (rg(nodes_, n.a)) {
          Matrix& ga = ensure(n.a);
          int begin = n.indices[0], len = n.indices[1];
          for (int i = 0; i < g.rows; ++i)
            for (int c = 0; c < len; ++c) ga.at(i, begin + c) += g.at(i, c);
        }
        break;
      }
      case Op::GatherRows: {
        if (rg(nodes_, n.a)) {
          Matrix& ga = ensure(n.a);
          for (size_t r = 0; r < n.indices.size(); ++r)
            for (int c = 0; c < g.cols; ++c)
              ga.at(n.indices[r], c) += g.at(static_cast<int>(r), c);
        }
        break;
      }
      case Op::L2NormRows: {
        if (rg(nodes_, n.a)) {
          const Matrix& x = nodes_[n.a].value;
          const Matrix& y = n.value;
          Matrix& ga = ensure(n.a);
          for (int r = 0; r < x.rows; ++r) {
            double norm = 0.0;
            for (int c = 0; c < x.cols; ++c) norm += x.at(r, c) * x.at(r, c);
            norm = std::sqrt(norm);
            double yg = 0.0;
            for (int c = 0; c < x.cols; ++c) yg += y.at(r, c) * g.at(r, c);
            for (int c = 0; c < x.cols; ++c)
              ga.at(r, c) += (g.at(r, c) - y.at(r, c) * yg) / norm;
          }
        }
        break;
      }
      case Op::MulScalar: {
        double s = nodes_[n.a].value.at(0, 0);
        const Matrix& A = nodes_[n.b].value;
        if (rg(nodes_, n.a)) {
          Matrix& gs = ensure(n.a);
          double acc = 0.0;
          for (size_t t = 0; t < g.data.size(); ++t) acc += g.data[t] * A.data[t];
          gs.at(0, 0) += acc;
        }
        if (rg(nodes_, n.b)) {
          Matrix& gb = ensure(n.b);
          for (size_t t = 0; t < g.data.size(); ++t) gb.data[t] += s * g.data[t];
        }
        break;
      }
      case Op::CeLossLogits: {
        if (rg(nodes_, n.a)) {
          const Matrix& z = nodes_[n.a].value;
          Matrix p = ff::softmax_rows(z);
          Matrix& ga = ensure(n.a);
          double go = g.at(0, 0) / std::max(1, z.rows);
          for (int r = 0; r < z.rows; ++r)
            for (int c = 0; c < z.cols; ++c)
              ga.at(r, c) += go * (p.at(r, c) - (c == n.indices[r] ? 1.0 : 0.0));
        }
        break;
      }
      case Op::NceLossLogits: {
        if (rg(nodes_, n.a)) {
          const Matrix& z = nodes_[n.a].value;
          Matrix p = ff::softmax_rows(z);
          Matrix& ga = ensure(n.a);
          double go = g.at(0, 0) / std::max(1, z.rows);
          for (int r = 0; r < z.rows; ++r)
            for (int c = 0; c < z.cols; ++c)
              ga.at(r, c) += go * (p.at(r, c) - (c == r ? 1.0 : 0.0));
        }
        break;
      }
    }
  }
  return grads;
}

}  // namespace ff
