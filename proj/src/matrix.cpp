#include "fisherfuse/matrix.hpp"

#include <cblas.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "fisherfuse/errors.hpp"

namespace ff {

Matrix Matrix::identity(int n) {
  Matrix m(n, n);
  for (int i = 0; i < n; ++i) m.at(i, i) = 1.0;
  return m;
}

Matrix Matrix::from_rows(std::initializer_list<std::initializer_list<double>> rows) {
  int r = static_cast<int>(rows.size());
  int c = r ? static_cast<int>(rows.begin()->size()) : 0;
  Matrix m(r, c);
  int i = 0;
  for (const auto& row : rows) {
    int j = 0;
    for (double v : row) m.at(i, j++) = v;
    ++i;
  }
  return m;
}

Matrix matmul(const Matrix& a, const Matrix& b) {
  if (a.cols != b.rows)
    throw ShapeError("matmul: inner dimensions disagree (" + std::to_string(a.cols) +
                     " vs " + std::to_string(b.rows) + ")");
  Matrix c(a.rows, b.cols);
  if (a.rows == 0 || b.cols == 0 || a.cols == 0) return c;
  cblas_dgemm(CblasRowMajor, CblasNoTrans, CblasNoTrans, a.rows, b.cols, a.cols,
              1.0, a.data.data(), a.cols, b.data.data(), b.cols, 0.0,
              c.data.data(), c.cols);
  return c;
}

Matrix transpose(const Matrix& a) {
  Matrix t(a.cols, a.rows);
  for (int i = 0; i < a.rows; ++i)
    for (int j = 0; j < a.cols; ++j) t.at(j, i) = a.at(i, j);
  return t;
}

Matrix add(const Matrix& a, const Matrix& b) {
  if (!a.same_shape(b)) throw ShapeError("add: shape mismatch");
  Matrix c = a;
  for (size_t i = 0; i < c.data.size(); ++i) c.data[i] += b.data[i];
  return c;
}

Matrix sub(const Matrix& a, const Matrix& b) {
  if (!a.same_shape(b)) throw ShapeError("sub: shape mismatch");
  Matrix c = a;
  for (size_t i = 0; i < c.data.size(); ++i) c.data[i] -= b.data[i];
  return c;
}

Matrix scale(const Matrix& a, double c) {
  Matrix r = a;
  for (double& v : r.data) v *= c;
  return r;
}

double frob_norm2(const Matrix& a) {
  double s = 0.0;
  for (double v : a.data) s += v * v;
  return s;
}

double frob_norm(const Matrix& a) { return std::sqrt(frob_norm2(a)); }

double dot(const std::vector<double>& a, const std::vector<double>& b) {
  return std::inner_product(a.begin(), a.end(), b.begin(), 0.0);
}

bool all_finite(const Matrix& a) {
  return std::all_of(a.data.begin(), a.data.end(),
                     [](double v) { return std::isfinite(v); });
}

void check_finite(const Matrix& a, const char* where) {
  if (!all_finite(a)) throw DivergenceError(std::string("non-finite values in ") + where);
}

Matrix orthonormalize(const Matrix& u) {
  if (u.cols > u.rows) throw ShapeError("orthonormalize: more columns than rows");
  Matrix q = u;
  auto col_norm = [&](int j) {
    double s = 0.0;
    for (int i = 0; i < q.rows; ++i) s += q.at(i, j) * q.at(i, j);
    return std::sqrt(s);
  };
  std::vector<double> input_norm(u.cols);
  for (int j = 0; j < u.cols; ++j) input_norm[j] = col_norm(j);

  for (int pass = 0; pass < 2; ++pass) {
    for (int j = 0; j < q.cols; ++j) {
      for (int i = 0; i < j; ++i) {
        double proj = 0.0;
        for (int r = 0; r < q.rows; ++r) proj += q.at(r, i) * q.at(r, j);
        for (int r = 0; r < q.rows; ++r) q.at(r, j) -= proj * q.at(r, i);
      }
      double n = col_norm(j);
      double ref = input_norm[j] > 0 ? input_norm[j] : 1.0;
      if (pass == 0 && n < 1e-10 * ref)
        throw DegenerateBasisError("orthonormalize: rank-deficient input at column " +
                                   std::to_string(j));
      if (n < 1e-300)
        throw DegenerateBasisError("orthonormalize: zero column " + std::to_string(j));
      for (int r = 0; r < q.rows; ++r) q.at(r, j) /= n;
    }
  }
  return q;
}

std::pair<std::vector<double>, Matrix> sym_eig(const Matrix& s, int k) {
  if (s.rows != s.cols) throw ShapeError("sym_eig: matrix not square");
  if (k < 0 || k > s.rows) throw ShapeError("sym_eig: invalid k");
  int n = s.rows;
  double scale_ref = 0.0;
  for (double v : s.data) scale_ref = std::max(scale_ref, std::fabs(v));
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j)
      if (std::fabs(s.at(i, j) - s.at(j, i)) > 1e-8 * std::max(1.0, scale_ref))
        throw SymmetryError("sym_eig: input not symmetric");

  Matrix a = s;
  // symmetrize the sub-tolerance asymmetry so sweeps stay consistent
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) {
      double m = 0.5 * (a.at(i, j) + a.at(j, i));
      a.at(i, j) = a.at(j, i) = m;
    }
  Matrix v = Matrix::identity(n);

  auto offdiag2 = [&]() {
    double s2 = 0.0;
    for (int i = 0; i < n; ++i)
      for (int j = i + 1; j < n; ++j) s2 += 2.0 * a.at(i, j) * a.at(i, j);
    return s2;
  };

  const double tol = 1e-12 * std::max(1.0, frob_norm(a));
  for (int sweep = 0; sweep < 100 && std::sqrt(offdiag2()) > tol; ++sweep) {
    for (int p = 0; p < n - 1; ++p) {
      for (int q = p + 1; q < n; ++q) {
        double apq = a.at(p, q);
        if (std::fabs(apq) < 1e-300) continue;
        double app = a.at(p, p), aqq = a.at(q, q);
        double theta = (aqq - app) / (2.0 * apq);
        double t = (theta >= 0 ? 1.0 : -1.0) /
                   (std::fabs(theta) + std::sqrt(theta * theta + 1.0));
        double c = 1.0 / std::sqrt(t * t + 1.0);
        double sn = t * c;
        for (int i = 0; i < n; ++i) {
          double aip = a.at(i, p), aiq = a.at(i, q);
          a.at(i, p) = c * aip - sn * aiq;
          a.at(i, q) = sn * aip + c * aiq;
        }
        for (int i = 0; i < n; ++i) {
          double api = a.at(p, i), aqi = a.at(q, i);
          a.at(p, i) = c * api - sn * aqi;
          a.at(q, i) = sn * api + c * aqi;
        }
        for (int i = 0; i < n; ++i) {
          double vip = v.at(i, p), viq = v.at(i, q);
          v.at(i, p) = c * vip - sn * viq;
          v.at(i, q) = sn * vip + c * viq;
        }
      }
    }
  }

  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](int i, int j) { return a.at(i, i) > a.at(j, j); });

  std::vector<double> values(k);
  Matrix vectors(n, k);
  for (int j = 0; j < k; ++j) {
    values[j] = a.at(order[j], order[j]);
    for (int i = 0; i < n; ++i) vectors.at(i, j) = v.at(i, order[j]);
  }
  return {values, vectors};
}

Matrix softmax_rows(const Matrix& m) {
  Matrix r(m.rows, m.cols);
  for (int i = 0; i < m.rows; ++i) {
    double mx = -1e308;
    for (int j = 0; j < m.cols; ++j) mx = std::max(mx, m.at(i, j));
    double sum = 0.0;
    for (int j = 0; j < m.cols; ++j) {
      double e = std::exp(m.at(i, j) - mx);
      r.at(i, j) = e;
      sum += e;
    }
    for (int j = 0; j < m.cols; ++j) r.at(i, j) /= sum;
  }
  return r;
}

Matrix layer_norm(const Matrix& m, const std::vector<double>& gain,
                  const std::vector<double>& bias) {
  if (static_cast<int>(gain.size()) != m.cols || static_cast<int>(bias.size()) != m.cols)
    throw ShapeError("layer_norm: affine length mismatch");
  const double eps = 1e-5;
  Matrix r(m.rows, m.cols);
  for (int i = 0; i < m.rows; ++i) {
    double mean = 0.0;
    for (int j = 0; j < m.cols; ++j) mean += m.at(i, j);
    mean /= m.cols;
    double var = 0.0;
    for (int j = 0; j < m.cols; ++j) {
      double d = m.at(i, j) - mean;
      var += d * d;
    }
    var /= m.cols;
    double inv = 1.0 / std::sqrt(var + eps);
    for (int j = 0; j < m.cols; ++j)
      r.at(i, j) = gain[j] * (m.at(i, j) - mean) * inv + bias[j];
  }
  return r;
}

Matrix random_orthogonal(int d, int k, Rng& rng) {
  if (k > d) throw ShapeError("random_orthogonal: k > d");
  // resample on the (measure-zero) degenerate draw
  for (int attempt = 0; attempt < 4; ++attempt) {
    Matrix g = random_normal(d, k, rng);
    try {
      return orthonormalize(g);
    } catch (const DegenerateBasisError&) {
    }
  }
  throw DegenerateBasisError("random_orthogonal: repeated degenerate draws");
}

Matrix random_uniform(int r, int c, double lo, double hi, Rng& rng) {
  Matrix m(r, c);
  for (double& v : m.data) v = rng.uniform(lo, hi);
  return m;
}

Matrix random_normal(int r, int c, Rng& rng) {
  Matrix m(r, c);
  for (double& v : m.data) v = rng.normal();
  return m;
}

}  // namespace ff
