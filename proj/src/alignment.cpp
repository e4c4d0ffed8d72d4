#include "fisherfuse/alignment.hpp"

#include <cmath>

#include "fisherfuse/errors.hpp"

namespace ff {

namespace {
Matrix fan_init(int r, int c, int fan, Rng& rng) {
  double s = 1.0 / std::sqrt(static_cast<double>(fan));
  return random_uniform(r, c, -s, s, rng);
}
}  // namespace

void init_projection_params(ParamStore& store, const AlignConfig& cfg, Rng& rng) {
  for (const char* side : {"ncs", "cpg"}) {
    std::string pre = std::string("proj.") + side + ".";
    store.add(pre + "w1", fan_init(cfg.d, cfg.d, cfg.d, rng));
    store.add(pre + "b1", Matrix(1, cfg.d));
    store.add(pre + "w2", fan_init(cfg.d, cfg.d_prime, cfg.d, rng));
    store.add(pre + "b2", Matrix(1, cfg.d_prime));
  }
}

namespace {
int head_forward(Bound& b, int h, const std::string& pre) {
  Tape& t = *b.tape;
  int z = t.add_broadcast_row(t.matmul(h, b.p(pre + "w1")), b.p(pre + "b1"));
  z = t.relu(z);
  z = t.add_broadcast_row(t.matmul(z, b.p(pre + "w2")), b.p(pre + "b2"));
  return t.l2_normalize_rows(z);
}
}  // namespace

Projected project(Bound& b, int h_cls, int h_pool) {
  Projected out;
  out.z_ncs = head_forward(b, h_cls, "proj.ncs.");
  out.z_cpg = head_forward(b, h_pool, "proj.cpg.");
  return out;
}

void XbmQueue::enqueue(const Matrix& z_rows) {
  for (int i = 0; i < z_rows.rows; ++i) {
    std::vector<double> row(z_rows.cols);
    for (int j = 0; j < z_rows.cols; ++j) row[j] = z_rows.at(i, j);
    entries_.push_back(std::move(row));
    while (static_cast<int>(entries_.size()) > capacity_) entries_.pop_front();
  }
}

Matrix XbmQueue::snapshot(int d_prime) const {
  Matrix m(static_cast<int>(entries_.size()), d_prime);
  for (size_t i = 0; i < entries_.size(); ++i)
    for (int j = 0; j < d_prime; ++j) m.at(static_cast<int>(i), j) = entries_[i][j];
  return m;
}

int info_nce(Bound& b, int z_ncs_batch, int z_cpg_batch, XbmQueue& queue,
             double temperature, bool enqueue, bool symmetric) {
  if (temperature <= 0.0) throw ParameterError("info_nce: temperature must be > 0");
  Tape& t = *b.tape;
  // Copy: later node pushes may reallocate the tape's storage.
  Matrix z_cpg = t.value(z_cpg_batch);
  int candidates = z_cpg_batch;
  if (queue.size() > 0) {
    int qleaf = t.leaf(queue.snapshot(z_cpg.cols));  // stop-gradient negatives
    candidates = t.concat_rows({z_cpg_batch, qleaf});
  }
  int logits = t.scale(t.matmul(z_ncs_batch, t.transpose(candidates)),
                       1.0 / temperature);
  int loss = t.nce_loss_logits(logits);
  if (symmetric) {
    // CPG-anchored direction over in-batch negatives only
    int rev = t.scale(t.matmul(z_cpg_batch, t.transpose(z_ncs_batch)),
                      1.0 / temperature);
    loss = t.scale(t.add(loss, t.nce_loss_logits(rev)), 0.5);
  }
  if (enqueue) queue.enqueue(z_cpg);
  return loss;
}

double cka_linear(const Matrix& x, const Matrix& y) {
  if (x.rows != y.rows || x.rows < 2)
    throw ShapeError("cka_linear: need matching n >= 2");
  auto center = [](const Matrix& m) {
    Matrix c = m;
    for (int j = 0; j < m.cols; ++j) {
      double mean = 0.0;
      for (int i = 0; i < m.rows; ++i) mean += m.at(i, j);
      mean /= m.rows;
      for (int i = 0; i < m.rows; ++i) c.at(i, j) -= mean;
    }
    return c;
  };
  Matrix xc = center(x), yc = center(y);
  double xx = frob_norm(matmul(transpose(xc), xc));
  double yy = frob_norm(matmul(transpose(yc), yc));
  if (xx < 1e-300 || yy < 1e-300)
    throw UndefinedSimilarityError("cka_linear: zero-variance input");
  double xy = frob_norm2(matmul(transpose(yc), xc));
  return xy / (xx * yy);
}

}  // namespace ff
