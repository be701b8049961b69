#include "bpsdid/dense.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace bpsdid {

DenseMatrix DenseMatrix::identity(int n) {
  DenseMatrix I(n, n);
  for (int i = 0; i < n; ++i) I(i, i) = 1.0;
  return I;
}

DenseMatrix DenseMatrix::from_columns(const std::vector<std::vector<double>>& cols) {
  if (cols.empty()) return {};
  DenseMatrix M(static_cast<int>(cols[0].size()), static_cast<int>(cols.size()));
  for (int j = 0; j < M.cols(); ++j) {
    if (cols[static_cast<std::size_t>(j)].size() != static_cast<std::size_t>(M.rows()))
      throw InvalidArgument("from_columns: ragged columns");
    M.set_column(j, cols[static_cast<std::size_t>(j)]);
  }
  return M;
}

std::vector<double> DenseMatrix::column_copy(int j) const {
  auto c = column(j);
  return {c.begin(), c.end()};
}

void DenseMatrix::set_column(int j, std::span<const double> v) {
  if (static_cast<int>(v.size()) != rows_) throw InvalidArgument("set_column: length mismatch");
  std::copy(v.begin(), v.end(), column(j).begin());
}

DenseMatrix DenseMatrix::slice_columns(int j0, int count) const {
  DenseMatrix M(rows_, count);
  for (int j = 0; j < count; ++j) M.set_column(j, column(j0 + j));
  return M;
}

DenseMatrix DenseMatrix::hcat(const DenseMatrix& a, const DenseMatrix& b) {
  if (a.cols() == 0) return b;
  if (b.cols() == 0) return a;
  if (a.rows() != b.rows()) throw InvalidArgument("hcat: row mismatch");
  DenseMatrix M(a.rows(), a.cols() + b.cols());
  for (int j = 0; j < a.cols(); ++j) M.set_column(j, a.column(j));
  for (int j = 0; j < b.cols(); ++j) M.set_column(a.cols() + j, b.column(j));
  return M;
}

DenseMatrix DenseMatrix::transposed() const {
  DenseMatrix T(cols_, rows_);
  for (int j = 0; j < cols_; ++j)
    for (int i = 0; i < rows_; ++i) T(j, i) = (*this)(i, j);
  return T;
}

DenseMatrix DenseMatrix::multiply(const DenseMatrix& other) const {
  if (cols_ != other.rows()) throw InvalidArgument("multiply: inner dimension mismatch");
  DenseMatrix C(rows_, other.cols());
  for (int j = 0; j < other.cols(); ++j) {
    auto cj = C.column(j);
    for (int k = 0; k < cols_; ++k) {
      const double b = other(k, j);
      if (b == 0.0) continue;
      auto ak = column(k);
      for (int i = 0; i < rows_; ++i) cj[static_cast<std::size_t>(i)] += ak[static_cast<std::size_t>(i)] * b;
    }
  }
  return C;
}

DenseMatrix DenseMatrix::transpose_multiply(const DenseMatrix& other) const {
  if (rows_ != other.rows()) throw InvalidArgument("transpose_multiply: row mismatch");
  DenseMatrix C(cols_, other.cols());
  for (int j = 0; j < other.cols(); ++j)
    for (int i = 0; i < cols_; ++i) C(i, j) = dot(column(i), other.column(j));
  return C;
}

std::vector<double> DenseMatrix::multiply(std::span<const double> x) const {
  if (static_cast<int>(x.size()) != cols_) throw InvalidArgument("multiply: vector length mismatch");
  std::vector<double> y(static_cast<std::size_t>(rows_), 0.0);
  for (int k = 0; k < cols_; ++k) axpy(x[static_cast<std::size_t>(k)], column(k), y);
  return y;
}

double DenseMatrix::frobenius_norm() const {
  double s = 0.0;
  for (double v : data_) s += v * v;
  return std::sqrt(s);
}

double DenseMatrix::max_abs() const {
  double m = 0.0;
  for (double v : data_) m = std::max(m, std::abs(v));
  return m;
}

double DenseMatrix::off_diagonal_frobenius() const {
  double s = 0.0;
  for (int j = 0; j < cols_; ++j)
    for (int i = 0; i < rows_; ++i)
      if (i != j) s += (*this)(i, j) * (*this)(i, j);
  return std::sqrt(s);
}

double DenseMatrix::asymmetry() const {
  double m = 0.0;
  for (int j = 0; j < cols_; ++j)
    for (int i = 0; i < j; ++i) m = std::max(m, std::abs((*this)(i, j) - (*this)(j, i)));
  return m;
}

void DenseMatrix::symmetrize() {
  for (int j = 0; j < cols_; ++j)
    for (int i = 0; i < j; ++i) {
      const double v = 0.5 * ((*this)(i, j) + (*this)(j, i));
      (*this)(i, j) = v;
      (*this)(j, i) = v;
    }
}

SymEigResult jacobi_eigen(const DenseMatrix& A_in, int max_sweeps) {
  const int n = A_in.rows();
  if (n != A_in.cols()) throw InvalidArgument("jacobi_eigen: matrix not square");
  const double norm = A_in.frobenius_norm();
  if (norm > 0.0 && A_in.asymmetry() > 1e-12 * norm)
    throw InvalidArgument("jacobi_eigen: matrix not symmetric");

  DenseMatrix A = A_in;
  A.symmetrize();
  DenseMatrix V = DenseMatrix::identity(n);
  const double target = 1e-14 * norm;

  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    if (A.off_diagonal_frobenius() <= target) break;
    if (sweep == max_sweeps - 1)
      throw NumericalError("jacobi_eigen: sweep limit reached before convergence");
    for (int p = 0; p < n - 1; ++p) {
      for (int q = p + 1; q < n; ++q) {
        const double apq = A(p, q);
        if (apq == 0.0) continue;
        const double app = A(p, p), aqq = A(q, q);
        // rotation angle via the stable tangent formula
        const double theta = (aqq - app) / (2.0 * apq);
        const double t = (theta >= 0.0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (int k = 0; k < n; ++k) {
          const double akp = A(k, p), akq = A(k, q);
          A(k, p) = c * akp - s * akq;
          A(k, q) = s * akp + c * akq;
        }
        for (int k = 0; k < n; ++k) {
          const double apk = A(p, k), aqk = A(q, k);
          A(p, k) = c * apk - s * aqk;
          A(q, k) = s * apk + c * aqk;
        }
        A(p, q) = 0.0;
        A(q, p) = 0.0;
        for (int k = 0; k < n; ++k) {
          const double vkp = V(k, p), vkq = V(k, q);
          V(k, p) = c * vkp - s * vkq;
          V(k, q) = s * vkp + c * vkq;
        }
      }
    }
  }

  std::vector<int> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int a, int b) { return A(a, a) < A(b, b); });

  SymEigResult r;
  r.values.resize(static_cast<std::size_t>(n));
  r.vectors = DenseMatrix(n, n);
  for (int j = 0; j < n; ++j) {
    r.values[static_cast<std::size_t>(j)] = A(order[static_cast<std::size_t>(j)], order[static_cast<std::size_t>(j)]);
    r.vectors.set_column(j, V.column(order[static_cast<std::size_t>(j)]));
  }
  return r;
}

DenseMatrix cholesky_lower(const DenseMatrix& A) {
  const int n = A.rows();
  if (n != A.cols()) throw InvalidArgument("cholesky_lower: matrix not square");
  DenseMatrix L(n, n);
  for (int j = 0; j < n; ++j) {
    double d = A(j, j);
    for (int k = 0; k < j; ++k) d -= L(j, k) * L(j, k);
    if (d <= 0.0) throw NumericalError("cholesky_lower: matrix not positive definite");
    L(j, j) = std::sqrt(d);
    for (int i = j + 1; i < n; ++i) {
      double s = A(i, j);
      for (int k = 0; k < j; ++k) s -= L(i, k) * L(j, k);
      L(i, j) = s / L(j, j);
    }
  }
  return L;
}

void solve_lower(const DenseMatrix& L, std::span<double> b, bool transpose) {
  const int n = L.rows();
  if (!transpose) {
    for (int i = 0; i < n; ++i) {
      double s = b[static_cast<std::size_t>(i)];
      for (int k = 0; k < i; ++k) s -= L(i, k) * b[static_cast<std::size_t>(k)];
      b[static_cast<std::size_t>(i)] = s / L(i, i);
    }
  } else {
    for (int i = n - 1; i >= 0; --i) {
      double s = b[static_cast<std::size_t>(i)];
      for (int k = i + 1; k < n; ++k) s -= L(k, i) * b[static_cast<std::size_t>(k)];
      b[static_cast<std::size_t>(i)] = s / L(i, i);
    }
  }
}

void solve_lower(const DenseMatrix& L, DenseMatrix& B, bool transpose) {
  for (int j = 0; j < B.cols(); ++j) solve_lower(L, B.column(j), transpose);
}

double dot(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw InvalidArgument("dot: length mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double norm2(std::span<const double> a) { return std::sqrt(dot(a, a)); }

void axpy(double alpha, std::span<const double> x, std::span<double> y) {
  if (x.size() != y.size()) throw InvalidArgument("axpy: length mismatch");
  for (std::size_t i = 0; i < x.size(); ++i) y[i] += alpha * x[i];
}

void scale(double alpha, std::span<double> x) {
  for (double& v : x) v *= alpha;
}

}  // namespace bpsdid
