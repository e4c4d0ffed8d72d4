#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "fisherfuse/errors.hpp"
#include "fisherfuse/matrix.hpp"
#include "fisherfuse/rng.hpp"

using namespace ff;

namespace {

Matrix naive_matmul(const Matrix& a, const Matrix& b) {
  Matrix c(a.rows, b.cols);
  for (int i = 0; i < a.rows; ++i)
    for (int j = 0; j < b.cols; ++j)
      for (int k = 0; k < a.cols; ++k) c.at(i, j) += a.at(i, k) * b.at(k, j);
  return c;
}

double max_abs_diff(const Matrix& a, const Matrix& b) {
  REQUIRE(a.same_shape(b));
  double m = 0;
  for (size_t i = 0; i < a.data.size(); ++i)
    m = std::max(m, std::fabs(a.data[i] - b.data[i]));
  return m;
}

}  // namespace

TEST_CASE("matmul identity and hand arithmetic") {
  Rng rng(7);
  Matrix a = random_normal(3, 3, rng);
  CHECK(max_abs_diff(matmul(Matrix::identity(3), a), a) == 0.0);

  Matrix m = Matrix::from_rows({{1, 2}, {3, 4}});
  Matrix v = Matrix::from_rows({{0}, {1}});
  Matrix r = matmul(m, v);
  CHECK(r.at(0, 0) == 2.0);
  CHECK(r.at(1, 0) == 4.0);
}

TEST_CASE("matmul matches naive triple loop on random 8x8") {
  Rng rng(42);
  Matrix a = random_normal(8, 8, rng);
  Matrix b = random_normal(8, 8, rng);
  CHECK(max_abs_diff(matmul(a, b), naive_matmul(a, b)) < 1e-12);
}

TEST_CASE("matmul shape mismatch throws") {
  CHECK_THROWS_AS(matmul(Matrix(2, 3), Matrix(2, 3)), ShapeError);
}

TEST_CASE("orthonormalize: already orthonormal is preserved up to sign") {
  Rng rng(5);
  Matrix u = random_orthogonal(6, 3, rng);
  Matrix q = orthonormalize(u);
  for (int c = 0; c < 3; ++c) {
    double d = 0;
    for (int r = 0; r < 6; ++r) d += u.at(r, c) * q.at(r, c);
    CHECK(std::fabs(std::fabs(d) - 1.0) < 1e-10);
  }
}

TEST_CASE("orthonormalize matches classical Gram-Schmidt on the spec example") {
  Matrix u = Matrix::from_rows({{1, 1}, {0, 1}, {0, 0}});
  Matrix q = orthonormalize(u);
  // Classical GS: q1 = e1; q2 = (v2 - (v2.q1)q1)/norm = e2.
  CHECK(std::fabs(q.at(0, 0) - 1.0) < 1e-12);
  CHECK(std::fabs(q.at(1, 0)) < 1e-12);
  CHECK(std::fabs(q.at(1, 1) - 1.0) < 1e-12);
  CHECK(std::fabs(q.at(0, 1)) < 1e-12);
  Matrix g = matmul(transpose(q), q);
  CHECK(max_abs_diff(g, Matrix::identity(2)) < 1e-10);
}

TEST_CASE("orthonormalize rejects rank-deficient input") {
  Matrix u(4, 2);
  Rng rng(9);
  for (int r = 0; r < 4; ++r) {
    u.at(r, 0) = rng.normal();
    u.at(r, 1) = 2.0 * u.at(r, 0);
  }
  CHECK_THROWS_AS(orthonormalize(u), DegenerateBasisError);
}

TEST_CASE("orthonormalize is idempotent up to column sign") {
  Rng rng(11);
  Matrix u = random_normal(8, 4, rng);
  Matrix q1 = orthonormalize(u);
  Matrix q2 = orthonormalize(q1);
  for (int c = 0; c < 4; ++c) {
    double d = 0;
    for (int r = 0; r < 8; ++r) d += q1.at(r, c) * q2.at(r, c);
    CHECK(std::fabs(std::fabs(d) - 1.0) < 1e-10);
  }
}

TEST_CASE("sym_eig on diagonal and closed-form 2x2") {
  Matrix d3 = Matrix::from_rows({{3, 0, 0}, {0, 2, 0}, {0, 0, 1}});
  auto [vals, vecs] = sym_eig(d3, 2);
  CHECK(std::fabs(vals[0] - 3.0) < 1e-10);
  CHECK(std::fabs(vals[1] - 2.0) < 1e-10);
  CHECK(std::fabs(std::fabs(vecs.at(0, 0)) - 1.0) < 1e-8);
  CHECK(std::fabs(std::fabs(vecs.at(1, 1)) - 1.0) < 1e-8);

  Matrix s = Matrix::from_rows({{2, 1}, {1, 2}});
  auto [v2, u2] = sym_eig(s, 2);
  CHECK(std::fabs(v2[0] - 3.0) < 1e-10);
  CHECK(std::fabs(v2[1] - 1.0) < 1e-10);
}

TEST_CASE("sym_eig residual, ordering, orthogonality on random SPD 10x10") {
  Rng rng(13);
  Matrix a = random_normal(10, 10, rng);
  Matrix s = matmul(transpose(a), a);
  auto [vals, vecs] = sym_eig(s, 10);
  for (int i = 1; i < 10; ++i) CHECK(vals[i] <= vals[i - 1] + 1e-12);
  for (int i = 0; i < 10; ++i) {
    Matrix v(10, 1);
    for (int r = 0; r < 10; ++r) v.at(r, 0) = vecs.at(r, i);
    Matrix sv = matmul(s, v);
    double resid = 0;
    for (int r = 0; r < 10; ++r) {
      double e = sv.at(r, 0) - vals[i] * v.at(r, 0);
      resid += e * e;
    }
    CHECK(std::sqrt(resid) < 1e-8);
  }
  Matrix g = matmul(transpose(vecs), vecs);
  CHECK(max_abs_diff(g, Matrix::identity(10)) < 1e-8);
}

TEST_CASE("sym_eig rejects asymmetric input") {
  Matrix s = Matrix::from_rows({{1, 2}, {0, 1}});
  CHECK_THROWS_AS(sym_eig(s, 1), SymmetryError);
}

TEST_CASE("softmax_rows closed forms and saturation") {
  Matrix eq(1, 4);
  Matrix r = softmax_rows(eq);
  for (int c = 0; c < 4; ++c) CHECK(std::fabs(r.at(0, c) - 0.25) < 1e-12);

  Matrix two = Matrix::from_rows({{0.0, std::log(3.0)}});
  Matrix p = softmax_rows(two);
  CHECK(std::fabs(p.at(0, 0) - 0.25) < 1e-12);
  CHECK(std::fabs(p.at(0, 1) - 0.75) < 1e-12);

  Matrix big = Matrix::from_rows({{0.0, 1000.0, 0.0}});
  Matrix s = softmax_rows(big);
  CHECK(std::fabs(s.at(0, 1) - 1.0) < 1e-12);
  CHECK(all_finite(s));
}

TEST_CASE("softmax_rows: rows sum to 1 and shift invariance") {
  Rng rng(17);
  Matrix m = random_normal(5, 7, rng);
  Matrix a = softmax_rows(m);
  for (int r = 0; r < 5; ++r) {
    double s = 0;
    for (int c = 0; c < 7; ++c) s += a.at(r, c);
    CHECK(std::fabs(s - 1.0) < 1e-12);
  }
  Matrix shifted = m;
  for (int c = 0; c < 7; ++c) shifted.at(2, c) += 3.25;
  CHECK(max_abs_diff(softmax_rows(shifted), a) < 1e-12);
}

TEST_CASE("layer_norm closed forms and recomputation") {
  std::vector<double> gain{1, 1}, bias{0, 0};
  Matrix c = Matrix::from_rows({{4, 4}});
  Matrix z = layer_norm(c, gain, bias);
  CHECK(std::fabs(z.at(0, 0)) < 1e-12);
  CHECK(std::fabs(z.at(0, 1)) < 1e-12);

  Matrix m = Matrix::from_rows({{1, 3}});
  Matrix n = layer_norm(m, gain, bias);
  CHECK(std::fabs(n.at(0, 0) + 1.0) < 1e-4);  // variance floor shifts by ~5e-6
  CHECK(std::fabs(n.at(0, 1) - 1.0) < 1e-4);

  Rng rng(19);
  std::vector<double> g8(8, 1.0), b8(8, 0.0);
  Matrix r = random_normal(1, 8, rng);
  Matrix y = layer_norm(r, g8, b8);
  double mean = 0, var = 0;
  for (int i = 0; i < 8; ++i) mean += y.at(0, i) / 8;
  for (int i = 0; i < 8; ++i) var += (y.at(0, i) - mean) * (y.at(0, i) - mean) / 8;
  CHECK(std::fabs(mean) < 1e-9);
  CHECK(std::fabs(var - 1.0) < 1e-4);
}

TEST_CASE("random_orthogonal contract and projection contraction") {
  Rng rng(23);
  Matrix u = random_orthogonal(16, 5, rng);
  Matrix g = matmul(transpose(u), u);
  CHECK(max_abs_diff(g, Matrix::identity(5)) < 1e-10);

  Matrix sq = random_orthogonal(6, 6, rng);
  CHECK(max_abs_diff(matmul(transpose(sq), sq), Matrix::identity(6)) < 1e-10);

  Matrix p = matmul(u, transpose(u));
  CHECK(max_abs_diff(matmul(p, p), p) < 1e-9);
  Matrix x = random_normal(4, 16, rng);
  CHECK(frob_norm(matmul(x, p)) <= frob_norm(x) + 1e-12);
}

TEST_CASE("random_orthogonal rejects k > d") {
  Rng rng(1);
  CHECK_THROWS_AS(random_orthogonal(3, 4, rng), ShapeError);
}

TEST_CASE("random vector captures k/d energy on average") {
  // Monte-Carlo check of the expected noise-energy fraction.
  const int d = 32, k = 6, trials = 1000;
  Rng rng(29);
  double sum = 0, sum2 = 0;
  for (int t = 0; t < trials; ++t) {
    Rng rt = rng.split(t + 1);
    Matrix u = random_orthogonal(d, k, rt);
    Matrix v = random_normal(1, d, rt);
    Matrix proj = matmul(v, matmul(u, transpose(u)));
    double e = frob_norm2(proj) / frob_norm2(v);
    sum += e;
    sum2 += e * e;
  }
  double mean = sum / trials;
  double sd = std::sqrt(sum2 / trials - mean * mean);
  double target = static_cast<double>(k) / d;
  CHECK(std::fabs(mean - target) < 3.0 * sd / std::sqrt(static_cast<double>(trials)));
}

TEST_CASE("rng determinism and split independence") {
  Rng a(123), b(123);
  for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());

  Rng base(55);
  Rng s1 = base.split(1), s2 = base.split(2);
  int same = 0;
  for (int i = 0; i < 64; ++i)
    if (s1.next_u64() == s2.next_u64()) ++same;
  CHECK(same == 0);
}
