#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "bpsdid/pencil.hpp"

namespace bpsdid {

enum class PreconditionerVariant {
  Identity,
  Diagonal,
  ExactShiftInvert,
  InnerKrylov,
  ProjectedInnerKrylov,
};

std::string to_string(PreconditionerVariant v);

struct PreconditionerSpec {
  PreconditionerVariant variant = PreconditionerVariant::Identity;
  double sigma = 0.0;
  double inner_tolerance = 1e-8;       // Krylov variants
  int inner_max_iterations = 2000;
  bool use_diagonal_inner_preconditioner = false;
  int band_width_cap = 2000;

  void validate() const;
};

// Banded LU with partial pivoting of H - sigma*S. Storage width 3*bw+1
// (fill from row interchanges).
struct BandFactorization {
  int n = 0;
  int bw = 0;
  std::vector<double> ab;    // (3*bw+1) x n, LAPACK-style band layout
  std::vector<int> pivots;

  void factor(const SparseMatrix& H, const SparseMatrix& S, double sigma);
  void solve(std::span<double> b) const;
};

struct MinresResult {
  int iterations = 0;
  double relative_residual = 0.0;
  bool converged = false;
};

// MINRES for the symmetric (possibly indefinite) system op(x) = b, with an
// optional SPD diagonal preconditioner. Deterministic.
MinresResult minres(const std::function<void(std::span<const double>, std::span<double>)>& op,
                    std::span<const double> b, std::span<double> x, double tol,
                    int max_iterations, const std::vector<double>* diag_precond = nullptr);

// Realized operator K ~ (H - sigma S)^{-1}. Immutable after build; apply is
// reentrant.
class Preconditioner {
 public:
  static Preconditioner build(const PreconditionerSpec& spec, const Pencil& p);

  const PreconditionerSpec& spec() const { return spec_; }
  double sigma() const { return spec_.sigma; }
  PreconditionerVariant variant() const { return spec_.variant; }

  struct ApplyStats {
    std::vector<double> inner_residuals;  // per column, Krylov variants
    bool hit_max_iterations = false;
  };

  std::vector<double> apply(std::span<const double> r, ApplyStats* stats = nullptr) const;
  DenseMatrix apply(const DenseMatrix& R, ApplyStats* stats = nullptr) const;

 private:
  Preconditioner() = default;
  PreconditionerSpec spec_;
  const Pencil* pencil_ = nullptr;
  std::shared_ptr<const BandFactorization> band_;  // ExactShiftInvert
  std::vector<double> shifted_diag_inverse_;       // Diagonal variant
  std::vector<double> inner_diag_;                 // optional inner preconditioner
};

// Solves the restriction of (H - sigma S) to the S-orthogonal complement of
// span{U, z}: returns p with U^T S p = 0, z^T S p = 0 and projected residual
// <= tol * ||r||_2.
std::vector<double> projected_solve(const Pencil& p, const DenseMatrix& U,
                                    std::span<const double> z, double sigma,
                                    std::span<const double> r, double tol,
                                    int max_iterations = 20000);

}  // namespace bpsdid
