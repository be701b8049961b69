#pragma once

#include <optional>
#include <span>
#include <vector>

#include "bpsdid/dense.hpp"
#include "bpsdid/sparse_matrix.hpp"

namespace bpsdid {

// The symmetric-definite pair (H, S). S positive definiteness is checked
// lazily: any S-norm of a nonzero vector must come out positive.
struct Pencil {
  SparseMatrix H;
  SparseMatrix S;
  bool s_is_identity = false;

  Pencil() = default;
  Pencil(SparseMatrix h, SparseMatrix s);

  int n() const { return H.n(); }
  std::uint64_t fingerprint() const;
};

struct InnerSolveConfig {
  double tol = 1e-12;
  int max_iterations = 10000;
};

double s_inner(const SparseMatrix& S, std::span<const double> x, std::span<const double> y);
double s_norm(const SparseMatrix& S, std::span<const double> x);

// sqrt(r^T S^{-1} r); conjugate-gradient inner solve, 2-norm shortcut for S = I.
double s_inv_norm(const SparseMatrix& S, std::span<const double> r,
                  const InnerSolveConfig& cfg = {});

double rayleigh_quotient(const Pencil& p, std::span<const double> z);

// Block Gram-Schmidt with one unconditional reorthogonalization pass.
// Columns whose post-projection S-norm drops below droptol times the original
// S-norm are discarded. Throws NumericalError if every column is dropped and
// `allow_empty` is false.
DenseMatrix s_orthonormalize(const SparseMatrix& S, const DenseMatrix& B,
                             const DenseMatrix* against = nullptr,
                             double droptol = 1e-10, bool allow_empty = false);

struct RitzSet {
  std::vector<double> values;  // ascending
  DenseMatrix vectors;         // S-orthonormal, length-n columns
  int subspace_dimension = 0;
};

// Rayleigh-Ritz on span{basis} S-orthogonal to `against`: orthonormalize,
// project H, diagonalize, select Ritz pairs [select_first, select_first+select_count).
RitzSet rayleigh_ritz(const Pencil& p, const DenseMatrix& basis, int select_first,
                      int select_count, const DenseMatrix* against = nullptr,
                      double droptol = 1e-10);

}  // namespace bpsdid
