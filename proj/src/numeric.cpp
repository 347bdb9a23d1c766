#include "gsf/numeric.hpp"

#include <algorithm>
#include <cmath>

namespace gsf {

double Mat::max_abs() const {
  double m = 0.0;
  for (double v : a) m = std::max(m, std::abs(v));
  return m;
}

int numeric_rank(Mat m, double rel_tol) {
  double thresh = rel_tol * m.max_abs();
  if (thresh == 0.0) return 0;
  int rank = 0;
  int row = 0;
  for (int col = 0; col < m.cols && row < m.rows; ++col) {
    int piv = row;
    for (int r = row + 1; r < m.rows; ++r)
      if (std::abs(m(r, col)) > std::abs(m(piv, col))) piv = r;
    if (std::abs(m(piv, col)) <= thresh) continue;
    if (piv != row)
      for (int c = 0; c < m.cols; ++c) std::swap(m(piv, c), m(row, c));
    for (int r = row + 1; r < m.rows; ++r) {
      double f = m(r, col) / m(row, col);
      for (int c = col; c < m.cols; ++c) m(r, c) -= f * m(row, c);
    }
    ++rank;
    ++row;
  }
  return rank;
}

Mat null_space(const Mat& m_in, double rel_tol) {
  Mat m = m_in;
  int n = m.cols;
  double thresh = rel_tol * m.max_abs();
  std::vector<int> pivot_col;
  int row = 0;
  for (int col = 0; col < n && row < m.rows; ++col) {
    int piv = row;
    for (int r = row + 1; r < m.rows; ++r)
      if (std::abs(m(r, col)) > std::abs(m(piv, col))) piv = r;
    if (thresh == 0.0 || std::abs(m(piv, col)) <= thresh) continue;
    if (piv != row)
      for (int c = 0; c < n; ++c) std::swap(m(piv, c), m(row, c));
    double d = m(row, col);
    for (int c = 0; c < n; ++c) m(row, c) /= d;
    for (int r = 0; r < m.rows; ++r) {
      if (r == row) continue;
      double f = m(r, col);
      if (f == 0.0) continue;
      for (int c = 0; c < n; ++c) m(r, c) -= f * m(row, c);
    }
    pivot_col.push_back(col);
    ++row;
  }
  std::vector<int> free_cols;
  {
    std::vector<char> is_piv(n, 0);
    for (int c : pivot_col) is_piv[c] = 1;
    for (int c = 0; c < n; ++c)
      if (!is_piv[c]) free_cols.push_back(c);
  }
  Mat basis(n, static_cast<int>(free_cols.size()));
  for (size_t k = 0; k < free_cols.size(); ++k) {
    int fc = free_cols[k];
    basis(fc, static_cast<int>(k)) = 1.0;
    for (size_t r = 0; r < pivot_col.size(); ++r)
      basis(pivot_col[r], static_cast<int>(k)) = -m(static_cast<int>(r), fc);
  }
  return orthonormal_columns(basis);
}

bool solve_least_squares(const Mat& A, const std::vector<double>& b, std::vector<double>& x,
                         double rel_tol) {
  int n = A.cols;
  Mat N(n, n);
  std::vector<double> rhs(n, 0.0);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      double s = 0.0;
      for (int r = 0; r < A.rows; ++r) s += A(r, i) * A(r, j);
      N(i, j) = s;
    }
    double s = 0.0;
    for (int r = 0; r < A.rows; ++r) s += A(r, i) * b[r];
    rhs[i] = s;
  }
  double thresh = rel_tol * N.max_abs();
  // Gaussian elimination with partial pivoting
  std::vector<int> perm(n);
  for (int i = 0; i < n; ++i) perm[i] = i;
  for (int col = 0; col < n; ++col) {
    int piv = col;
    for (int r = col + 1; r < n; ++r)
      if (std::abs(N(r, col)) > std::abs(N(piv, col))) piv = r;
    if (std::abs(N(piv, col)) <= thresh) return false;
    if (piv != col) {
      for (int c = 0; c < n; ++c) std::swap(N(piv, c), N(col, c));
      std::swap(rhs[piv], rhs[col]);
    }
    for (int r = col + 1; r < n; ++r) {
      double f = N(r, col) / N(col, col);
      for (int c = col; c < n; ++c) N(r, c) -= f * N(col, c);
      rhs[r] -= f * rhs[col];
    }
  }
  x.assign(n, 0.0);
  for (int i = n - 1; i >= 0; --i) {
    double s = rhs[i];
    for (int j = i + 1; j < n; ++j) s -= N(i, j) * x[j];
    x[i] = s / N(i, i);
  }
  return true;
}

Mat orthonormal_columns(const Mat& m, double drop_tol) {
  std::vector<std::vector<double>> cols;
  for (int c = 0; c < m.cols; ++c) {
    std::vector<double> v(m.rows);
    for (int r = 0; r < m.rows; ++r) v[r] = m(r, c);
    for (const auto& u : cols) {
      double d = 0.0;
      for (int r = 0; r < m.rows; ++r) d += u[r] * v[r];
      for (int r = 0; r < m.rows; ++r) v[r] -= d * u[r];
    }
    double norm = 0.0;
    for (double x : v) norm += x * x;
    norm = std::sqrt(norm);
    if (norm <= drop_tol) continue;
    for (double& x : v) x /= norm;
    cols.push_back(std::move(v));
  }
  Mat out(m.rows, static_cast<int>(cols.size()));
  for (size_t c = 0; c < cols.size(); ++c)
    for (int r = 0; r < m.rows; ++r) out(r, static_cast<int>(c)) = cols[c][r];
  return out;
}

double subspace_gap(const Mat& r_rows, const Mat& k_cols) {
  // orthonormalize the R rows (as columns of the transpose)
  Mat rt(r_rows.cols, r_rows.rows);
  for (int i = 0; i < r_rows.rows; ++i)
    for (int j = 0; j < r_rows.cols; ++j) rt(j, i) = r_rows(i, j);
  Mat Q = orthonormal_columns(rt);
  Mat K = orthonormal_columns(k_cols);
  double worst = 0.0;
  for (int c = 0; c < Q.cols; ++c) {
    std::vector<double> v(Q.rows);
    for (int r = 0; r < Q.rows; ++r) v[r] = Q(r, c);
    for (int kc = 0; kc < K.cols; ++kc) {
      double d = 0.0;
      for (int r = 0; r < K.rows; ++r) d += K(r, kc) * v[r];
      for (int r = 0; r < K.rows; ++r) v[r] -= d * K(r, kc);
    }
    double norm = 0.0;
    for (double x : v) norm += x * x;
    worst = std::max(worst, std::sqrt(norm));
  }
  return worst;
}

}  // namespace gsf
