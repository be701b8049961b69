#pragma once

#include <span>
#include <vector>

#include "bpsdid/util.hpp"

namespace bpsdid {

// Column-major dense matrix; doubles as the DenseBlock of tall column bases.
class DenseMatrix {
 public:
  DenseMatrix() = default;
  DenseMatrix(int rows, int cols) : rows_(rows), cols_(cols), data_(static_cast<std::size_t>(rows) * cols, 0.0) {}

  static DenseMatrix identity(int n);
  static DenseMatrix from_columns(const std::vector<std::vector<double>>& cols);

  int rows() const { return rows_; }
  int cols() const { return cols_; }

  double& operator()(int i, int j) { return data_[static_cast<std::size_t>(j) * rows_ + i]; }
  double operator()(int i, int j) const { return data_[static_cast<std::size_t>(j) * rows_ + i]; }

  std::span<double> column(int j) { return {data_.data() + static_cast<std::size_t>(j) * rows_, static_cast<std::size_t>(rows_)}; }
  std::span<const double> column(int j) const { return {data_.data() + static_cast<std::size_t>(j) * rows_, static_cast<std::size_t>(rows_)}; }

  std::vector<double> column_copy(int j) const;
  void set_column(int j, std::span<const double> v);

  // columns [j0, j0+count)
  DenseMatrix slice_columns(int j0, int count) const;
  // horizontal concatenation
  static DenseMatrix hcat(const DenseMatrix& a, const DenseMatrix& b);

  DenseMatrix transposed() const;
  DenseMatrix multiply(const DenseMatrix& other) const;          // this * other
  DenseMatrix transpose_multiply(const DenseMatrix& other) const;  // this^T * other
  std::vector<double> multiply(std::span<const double> x) const;

  double frobenius_norm() const;
  double max_abs() const;
  double off_diagonal_frobenius() const;
  double asymmetry() const;  // max |a_ij - a_ji|
  void symmetrize();

  const std::vector<double>& data() const { return data_; }

 private:
  int rows_ = 0;
  int cols_ = 0;
  std::vector<double> data_;
};

struct SymEigResult {
  std::vector<double> values;  // ascending
  DenseMatrix vectors;         // orthonormal columns, paired with values
};

// Cyclic Jacobi diagonalization of a symmetric matrix. Off-diagonal Frobenius
// mass is reduced below 1e-14 * ||A||_F; at most `max_sweeps` sweeps.
SymEigResult jacobi_eigen(const DenseMatrix& A, int max_sweeps = 50);

// Lower Cholesky factor of an SPD matrix; throws NumericalError on breakdown.
DenseMatrix cholesky_lower(const DenseMatrix& A);

// In-place triangular solves against each column of B.
void solve_lower(const DenseMatrix& L, DenseMatrix& B, bool transpose);
void solve_lower(const DenseMatrix& L, std::span<double> b, bool transpose);

// basic vector kernels
double dot(std::span<const double> a, std::span<const double> b);
double norm2(std::span<const double> a);
void axpy(double alpha, std::span<const double> x, std::span<double> y);
void scale(double alpha, std::span<double> x);

}  // namespace bpsdid
