#ifndef GSF_NUMERIC_HPP
#define GSF_NUMERIC_HPP

#include <vector>

namespace gsf {

/// Row-major dense matrix, just big enough for desk-scale linear algebra.
struct Mat {
  int rows = 0, cols = 0;
  std::vector<double> a;
  Mat() = default;
  Mat(int r, int c) : rows(r), cols(c), a(static_cast<size_t>(r) * c, 0.0) {}
  double& operator()(int i, int j) { return a[static_cast<size_t>(i) * cols + j]; }
  double operator()(int i, int j) const { return a[static_cast<size_t>(i) * cols + j]; }
  double max_abs() const;
};

/// Numeric rank via Gaussian elimination with partial pivoting; a pivot
/// counts when its magnitude exceeds rel_tol * max|entry of the input|.
int numeric_rank(Mat m, double rel_tol = 1e-8);

/// Orthonormal basis of the null space (columns), same pivot rule.
Mat null_space(const Mat& m, double rel_tol = 1e-8);

/// Least squares for A x = b via normal equations (A: rows x cols, rows >=
/// cols). Returns false when the normal matrix is singular at rel_tol.
bool solve_least_squares(const Mat& A, const std::vector<double>& b, std::vector<double>& x,
                         double rel_tol = 1e-8);

/// Modified Gram-Schmidt on the columns; near-dependent columns are dropped.
Mat orthonormal_columns(const Mat& m, double drop_tol = 1e-12);

/// max over orthonormalized rows r of span(rowsOf(R)) of the distance
/// between r and its projection onto span(columnsOf(K)); both inputs are
/// orthonormalized internally. This is sin of the largest principal angle.
double subspace_gap(const Mat& r_rows, const Mat& k_cols);

}  // namespace gsf

#endif
