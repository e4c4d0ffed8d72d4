#include "fisherfuse/fisher.hpp"

#include <algorithm>
#include <cmath>

#include "fisherfuse/errors.hpp"

namespace ff {

FisherSubspace FisherSubspace::init(const FisherConfig& cfg, Rng& rng) {
  FisherSubspace s;
  s.cfg = cfg;
  s.u_live = random_orthogonal(cfg.d, cfg.k, rng);
  s.u_pub = s.u_live;
  s.g_smooth = Matrix(1, cfg.d);
  return s;
}

void FisherSubspace::observe(const std::vector<double>& g) {
  if (static_cast<int>(g.size()) != cfg.d)
    throw ShapeError("FisherSubspace::observe: gradient dimension mismatch");
  for (double v : g)
    if (!std::isfinite(v))
      throw EstimatorError("FisherSubspace::observe: non-finite gradient");
  std::vector<double> g_eff(cfg.d);
  if (cfg.momentum > 0.0) {
    for (int i = 0; i < cfg.d; ++i) {
      g_smooth.at(0, i) = cfg.momentum * g_smooth.at(0, i) + (1.0 - cfg.momentum) * g[i];
      g_eff[i] = g_smooth.at(0, i);
    }
  } else {
    g_eff = g;
  }
  u_live = oja_step(u_live, g_eff, eta_at(step));
  ++step;
  if (cfg.publish_freq > 0 && step % cfg.publish_freq == 0) publish();
}

std::vector<double> pool_gradient(const Matrix& g) {
  std::vector<double> out(g.cols, 0.0);
  for (int i = 0; i < g.rows; ++i)
    for (int j = 0; j < g.cols; ++j) out[j] += g.at(i, j);
  for (double& v : out) v /= std::max(1, g.rows);
  return out;
}

Matrix oja_step(const Matrix& u, const std::vector<double>& g, double eta) {
  if (eta <= 0.0) throw ParameterError("oja_step: eta must be > 0");
  int d = u.rows, k = u.cols;
  if (static_cast<int>(g.size()) != d) throw ShapeError("oja_step: dimension mismatch");
  for (double v : g)
    if (!std::isfinite(v)) throw EstimatorError("oja_step: non-finite gradient");
  double norm2 = 0.0;
  for (double v : g) norm2 += v * v;
  if (norm2 == 0.0) return u;  // zero gradient carries no information

  std::vector<double> y(k, 0.0);  // y = U^T g
  for (int j = 0; j < k; ++j)
    for (int i = 0; i < d; ++i) y[j] += u.at(i, j) * g[i];
  Matrix next = u;
  // U + eta (g y^T - U y y^T)
  std::vector<double> uyy(d, 0.0);
  for (int i = 0; i < d; ++i) {
    double s = 0.0;
    for (int j = 0; j < k; ++j) s += u.at(i, j) * y[j];
    uyy[i] = s;  // (U y)_i
  }
  (void)uyy;
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < k; ++j) {
      double uyyij = 0.0;
      for (int l = 0; l < k; ++l) uyyij += u.at(i, l) * y[l] * y[j];
      next.at(i, j) += eta * (g[i] * y[j] - uyyij);
    }
  return orthonormalize(next);
}

FisherEstimator estimator_from_name(const std::string& name) {
  if (name == "direct_eig") return FisherEstimator::DirectEig;
  if (name == "power_iter") return FisherEstimator::PowerIter;
  if (name == "randomized") return FisherEstimator::Randomized;
  if (name == "batch_no_ema") return FisherEstimator::BatchNoEma;
  throw ParameterError("unknown Fisher estimator: " + name);
}

namespace {

Matrix second_moment(const std::vector<std::vector<double>>& grads, size_t begin) {
  int d = static_cast<int>(grads[0].size());
  Matrix m(d, d);
  int n = static_cast<int>(grads.size() - begin);
  for (size_t s = begin; s < grads.size(); ++s)
    for (int i = 0; i < d; ++i)
      for (int j = 0; j < d; ++j) m.at(i, j) += grads[s][i] * grads[s][j] / n;
  return m;
}

Matrix power_iteration_topk(const Matrix& m, int k, Rng& rng) {
  int d = m.rows;
  Matrix basis(d, k);
  Matrix deflated = m;
  for (int j = 0; j < k; ++j) {
    Matrix v = random_normal(d, 1, rng);
    v = scale(v, 1.0 / frob_norm(v));
    double lambda = 0.0;
    for (int it = 0; it < 500; ++it) {
      Matrix w = matmul(deflated, v);
      double n = frob_norm(w);
      if (n < 1e-30) break;
      w = scale(w, 1.0 / n);
      double delta = frob_norm(sub(w, v));
      double delta_flip = frob_norm(add(w, v));
      v = w;
      lambda = n;
      if (std::min(delta, delta_flip) < 1e-12) break;
    }
    for (int i = 0; i < d; ++i) basis.at(i, j) = v.data[i];
    // deflate: M <- M - lambda v v^T
    for (int a = 0; a < d; ++a)
      for (int c = 0; c < d; ++c) deflated.at(a, c) -= lambda * v.data[a] * v.data[c];
  }
  return orthonormalize(basis);
}

Matrix randomized_topk(const Matrix& m, int k, Rng& rng) {
  int d = m.rows;
  int sketch = std::min(d, k + 8);
  Matrix omega = random_normal(d, sketch, rng);
  Matrix y = orthonormalize(matmul(m, omega));
  y = orthonormalize(matmul(m, y));  // one subspace iteration
  // Rayleigh-Ritz on the sketch range
  Matrix small = matmul(transpose(y), matmul(m, y));
  auto [vals, vecs] = sym_eig(small, k);
  (void)vals;
  return orthonormalize(matmul(y, vecs));
}

}  // namespace

Matrix estimate_alternative(FisherEstimator method,
                            const std::vector<std::vector<double>>& grads, int k,
                            Rng& rng) {
  if (static_cast<int>(grads.size()) < k)
    throw InsufficientDataError("estimate_alternative: fewer than k gradient samples");
  switch (method) {
    case FisherEstimator::DirectEig: {
      Matrix m = second_moment(grads, 0);
      auto [vals, vecs] = sym_eig(m, k);
      (void)vals;
      return vecs;
    }
    case FisherEstimator::PowerIter:
      return power_iteration_topk(second_moment(grads, 0), k, rng);
    case FisherEstimator::Randomized:
      return randomized_topk(second_moment(grads, 0), k, rng);
    case FisherEstimator::BatchNoEma: {
      // only the most recent window, no smoothing across older history; the
      // window must be wide enough that the sample moment is stable at rank k
      size_t window = std::min<size_t>(grads.size(), std::max<size_t>(k, 1024));
      Matrix m = second_moment(grads, grads.size() - window);
      auto [vals, vecs] = sym_eig(m, k);
      (void)vals;
      return vecs;
    }
  }
  throw ParameterError("estimate_alternative: bad method");
}

double energy_ratio(const Matrix& h, const Matrix& u) {
  double total = frob_norm2(h);
  if (total < 1e-300) throw UndefinedRatioError("energy_ratio: zero features");
  Matrix proj = matmul(matmul(h, u), transpose(u));
  return frob_norm2(proj) / total;
}

double principal_angle(const Matrix& u, const Matrix& v) {
  // largest angle = acos of the smallest singular value of U^T V
  Matrix m = matmul(transpose(u), v);
  auto [vals, vecs] = sym_eig(matmul(transpose(m), m), m.cols);
  (void)vecs;
  double smallest = std::sqrt(std::max(0.0, vals.back()));
  smallest = std::clamp(smallest, -1.0, 1.0);
  return std::acos(smallest);
}

}  // namespace ff
