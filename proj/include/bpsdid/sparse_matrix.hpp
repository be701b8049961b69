#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "bpsdid/util.hpp"

namespace bpsdid {

// Compressed-row sparse matrix; column indices strictly increasing per row.
// Immutable after construction.
class SparseMatrix {
 public:
  SparseMatrix() = default;

  // Builds from triplets; duplicate entries are summed.
  static SparseMatrix from_triplets(int n, const std::vector<int>& rows,
                                    const std::vector<int>& cols,
                                    const std::vector<double>& vals,
                                    bool symmetric);

  static SparseMatrix identity(int n);
  static SparseMatrix diagonal(const std::vector<double>& d);

  int n() const { return n_; }
  bool symmetric() const { return symmetric_; }
  std::size_t nnz() const { return values_.size(); }

  std::span<const int> row_offsets() const { return row_offsets_; }
  std::span<const int> col_indices() const { return col_indices_; }
  std::span<const double> values() const { return values_; }

  // y = A x; deterministic row-major, ascending-column summation order.
  void multiply(std::span<const double> x, std::span<double> y) const;
  std::vector<double> multiply(std::span<const double> x) const;

  // true when (i,j)/(j,i) agree structurally and in value
  bool is_value_symmetric(double tol = 0.0) const;

  // identity check used for the S == I fast paths
  bool is_identity() const;

  // max |row - col| over stored nonzeros
  int band_width() const;

  std::uint64_t fingerprint() const;

 private:
  int n_ = 0;
  bool symmetric_ = false;
  std::vector<int> row_offsets_;
  std::vector<int> col_indices_;
  std::vector<double> values_;
};

}  // namespace bpsdid
