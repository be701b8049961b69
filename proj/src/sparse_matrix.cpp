#include "bpsdid/sparse_matrix.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace bpsdid {

SparseMatrix SparseMatrix::from_triplets(int n, const std::vector<int>& rows,
                                         const std::vector<int>& cols,
                                         const std::vector<double>& vals,
                                         bool symmetric) {
  if (n < 1) throw InvalidArgument("SparseMatrix: n must be >= 1");
  if (rows.size() != cols.size() || rows.size() != vals.size())
    throw InvalidArgument("SparseMatrix: triplet arrays differ in length");

  std::vector<std::size_t> order(rows.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (rows[a] != rows[b]) return rows[a] < rows[b];
    return cols[a] < cols[b];
  });

  SparseMatrix A;
  A.n_ = n;
  A.symmetric_ = symmetric;
  A.row_offsets_.assign(static_cast<std::size_t>(n) + 1, 0);
  A.col_indices_.reserve(rows.size());
  A.values_.reserve(rows.size());

  int prev_row = -1, prev_col = -1;
  for (std::size_t k : order) {
    const int r = rows[k], c = cols[k];
    if (r < 0 || r >= n || c < 0 || c >= n)
      throw InvalidArgument("SparseMatrix: triplet index out of range");
    if (r == prev_row && c == prev_col) {
      A.values_.back() += vals[k];
      continue;
    }
    while (prev_row < r) A.row_offsets_[static_cast<std::size_t>(++prev_row)] = static_cast<int>(A.values_.size());
    A.col_indices_.push_back(c);
    A.values_.push_back(vals[k]);
    prev_col = c;
  }
  while (prev_row < n) A.row_offsets_[static_cast<std::size_t>(++prev_row)] = static_cast<int>(A.values_.size());
  A.row_offsets_[static_cast<std::size_t>(n)] = static_cast<int>(A.values_.size());
  return A;
}

SparseMatrix SparseMatrix::identity(int n) {
  std::vector<int> idx(static_cast<std::size_t>(n));
  std::iota(idx.begin(), idx.end(), 0);
  return from_triplets(n, idx, idx, std::vector<double>(static_cast<std::size_t>(n), 1.0), true);
}

SparseMatrix SparseMatrix::diagonal(const std::vector<double>& d) {
  std::vector<int> idx(d.size());
  std::iota(idx.begin(), idx.end(), 0);
  return from_triplets(static_cast<int>(d.size()), idx, idx, d, true);
}

void SparseMatrix::multiply(std::span<const double> x, std::span<double> y) const {
  if (static_cast<int>(x.size()) != n_ || static_cast<int>(y.size()) != n_)
    throw InvalidArgument("spmv: dimension mismatch");
  for (int i = 0; i < n_; ++i) {
    double acc = 0.0;
    const int b = row_offsets_[static_cast<std::size_t>(i)];
    const int e = row_offsets_[static_cast<std::size_t>(i) + 1];
    for (int k = b; k < e; ++k)
      acc += values_[static_cast<std::size_t>(k)] * x[static_cast<std::size_t>(col_indices_[static_cast<std::size_t>(k)])];
    y[static_cast<std::size_t>(i)] = acc;
  }
}

std::vector<double> SparseMatrix::multiply(std::span<const double> x) const {
  std::vector<double> y(static_cast<std::size_t>(n_));
  multiply(x, y);
  return y;
}

bool SparseMatrix::is_value_symmetric(double tol) const {
  for (int i = 0; i < n_; ++i) {
    for (int k = row_offsets_[static_cast<std::size_t>(i)]; k < row_offsets_[static_cast<std::size_t>(i) + 1]; ++k) {
      const int j = col_indices_[static_cast<std::size_t>(k)];
      const double v = values_[static_cast<std::size_t>(k)];
      // binary search for (j, i)
      const int b = row_offsets_[static_cast<std::size_t>(j)];
      const int e = row_offsets_[static_cast<std::size_t>(j) + 1];
      const auto first = col_indices_.begin() + b;
      const auto last = col_indices_.begin() + e;
      const auto it = std::lower_bound(first, last, i);
      if (it == last || *it != i) return false;
      const double w = values_[static_cast<std::size_t>(b + (it - first))];
      if (std::abs(v - w) > tol) return false;
    }
  }
  return true;
}

bool SparseMatrix::is_identity() const {
  if (nnz() != static_cast<std::size_t>(n_)) return false;
  for (int i = 0; i < n_; ++i) {
    const int b = row_offsets_[static_cast<std::size_t>(i)];
    if (row_offsets_[static_cast<std::size_t>(i) + 1] != b + 1) return false;
    if (col_indices_[static_cast<std::size_t>(b)] != i) return false;
    if (values_[static_cast<std::size_t>(b)] != 1.0) return false;
  }
  return true;
}

int SparseMatrix::band_width() const {
  int bw = 0;
  for (int i = 0; i < n_; ++i)
    for (int k = row_offsets_[static_cast<std::size_t>(i)]; k < row_offsets_[static_cast<std::size_t>(i) + 1]; ++k)
      bw = std::max(bw, std::abs(i - col_indices_[static_cast<std::size_t>(k)]));
  return bw;
}

std::uint64_t SparseMatrix::fingerprint() const {
  std::uint64_t h = fnv1a(&n_, sizeof(n_));
  h = fnv1a(row_offsets_.data(), row_offsets_.size() * sizeof(int), h);
  h = fnv1a(col_indices_.data(), col_indices_.size() * sizeof(int), h);
  h = fnv1a(values_.data(), values_.size() * sizeof(double), h);
  return h;
}

}  // namespace bpsdid
