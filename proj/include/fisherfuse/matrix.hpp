#pragma once

#include <utility>
#include <vector>

#include "fisherfuse/rng.hpp"

namespace ff {

/// Dense row-major matrix of doubles.
struct Matrix {
  int rows = 0;
  int cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(int r, int c) : rows(r), cols(c), data(static_cast<size_t>(r) * c, 0.0) {}

  double& at(int r, int c) { return data[static_cast<size_t>(r) * cols + c]; }
  double at(int r, int c) const { return data[static_cast<size_t>(r) * cols + c]; }

  bool same_shape(const Matrix& o) const { return rows == o.rows && cols == o.cols; }

  static Matrix identity(int n);
  static Matrix from_rows(std::initializer_list<std::initializer_list<double>> rows);
};

Matrix matmul(const Matrix& a, const Matrix& b);
Matrix transpose(const Matrix& a);
Matrix add(const Matrix& a, const Matrix& b);
Matrix sub(const Matrix& a, const Matrix& b);
Matrix scale(const Matrix& a, double c);

double frob_norm(const Matrix& a);
double frob_norm2(const Matrix& a);
double dot(const std::vector<double>& a, const std::vector<double>& b);
bool all_finite(const Matrix& a);
void check_finite(const Matrix& a, const char* where);

/// Modified Gram-Schmidt with one re-orthogonalization pass. Throws
/// DegenerateBasisError on rank-deficient input.
Matrix orthonormalize(const Matrix& u);

/// Top-k eigenpairs of a symmetric matrix via cyclic Jacobi sweeps, values in
/// descending order. Throws SymmetryError if the input is not symmetric
/// within 1e-8.
std::pair<std::vector<double>, Matrix> sym_eig(const Matrix& s, int k);

/// Row-wise softmax, max-subtracted for stability.
Matrix softmax_rows(const Matrix& m);

/// Per-row layer normalization with variance floor 1e-5 and affine gain/bias.
Matrix layer_norm(const Matrix& m, const std::vector<double>& gain,
                  const std::vector<double>& bias);

/// d x k matrix with orthonormal columns drawn from a Gaussian ensemble.
Matrix random_orthogonal(int d, int k, Rng& rng);

Matrix random_uniform(int r, int c, double lo, double hi, Rng& rng);
Matrix random_normal(int r, int c, Rng& rng);

}  // namespace ff
