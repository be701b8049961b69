#pragma once

#include <optional>
#include <vector>

#include "bpsdid/solver.hpp"

namespace bpsdid {

struct SpectralOracle {
  std::vector<double> values;  // ascending
  DenseMatrix vectors;         // S-orthonormal columns
  std::uint64_t pencil_fingerprint = 0;

  int n() const { return static_cast<int>(values.size()); }
  // 1-based access matching the eigenvalue indexing of the theory
  double lambda(int j) const { return values.at(static_cast<std::size_t>(j - 1)); }
};

SpectralOracle dense_oracle(const Pencil& p, int dense_limit = 4000);

struct RestrictedOperators {
  int i = 1;       // deflation index, 1-based
  double nu = 0.0; // must satisfy nu < lambda_i
  std::vector<double> lambda_nu;  // lambda_j - nu for j = i..n
  DenseMatrix K_tilde;            // symmetrized effective form
  double asymmetry = 0.0;         // pre-symmetrization, for inexact K
};

struct EffectiveForm {
  RestrictedOperators ro;
  bool positive_definite = false;
  double min_eigenvalue = 0.0;
};

EffectiveForm effective_form(const Preconditioner& K, const SpectralOracle& oracle,
                             const SparseMatrix& S, int i, double nu);

struct QualityReport {
  double alpha = 0.0;  // extremal eigenvalues of K_tilde * Lambda_nu
  double beta = 0.0;
  double epsilon = 0.0;  // (beta - alpha) / (beta + alpha)
  double omega = 0.0;    // 2 / (beta + alpha)
  bool definite = false;
};

QualityReport quality_epsilon(const RestrictedOperators& ro);

double kappa(double lambda_j, double lambda_j1, double lambda_n, double nu);
double single_step_factor(double kappa, double epsilon);

struct LargerShiftBounds {
  double kappa = 0.0;              // negative in the larger-shift window
  double supercubic_factor = 0.0;  // (kappa / (2 - kappa))^2
  double supercubic_bound = 0.0;   // factor times the current ratio
  double cubic_bound = 0.0;        // current ratio cubed
  double inexact_bound = 0.0;      // squared inexact factor times the ratio
};

LargerShiftBounds larger_shift_bounds(double lambda_i, double lambda_i1, double lambda_n,
                                      double sigma, double rho, double epsilon);

struct MultiStepInputs {
  int i = 1;
  int t = 1;
  int k_tilde = 1;
  int ell = 0;          // steps since the anchor
  double nu = 0.0;      // doubles as sigma for Bound_cr
  double epsilon = 0.0;
  double tau = 0.0;             // Bound_cr only
  double theta_t_anchor = 0.0;  // theta_t at the anchor step (Bound_1)
  double theta_kt_anchor = 0.0; // theta_ktilde at the anchor step (Bound_2/3)
};

// Each bound applies to a different ratio of theta_t:
//   cr:      (theta - lambda_{i-1+t}) / (lambda_n - theta)
//   1:       (theta - lambda_{i-1+t}) / (lambda_{i+t} - theta)
//   2 and 3: (theta - lambda_{i-1+t}) / (lambda_{i+ktilde} - theta)
// Degenerate gaps or anchors outside the admissible bracket yield nullopt.
struct MultiStepBounds {
  std::optional<double> bound_cr;
  std::optional<double> bound1;
  std::optional<double> bound2;
  std::optional<double> bound3;
};

MultiStepBounds multi_step_bounds(const SpectralOracle& oracle, const MultiStepInputs& in);

// tan^2 of the largest principal angle between the transformed start block and
// the target coordinate subspace; infinity for a deficient start.
double compute_tau(const DenseMatrix& Z0, const SpectralOracle& oracle,
                   const SparseMatrix& S, int i, int k_tilde, double sigma);

struct StepCheck {
  int run = 0;
  int step = 0;  // the step being bounded (the later of the pair)
  int t = 0;
  int bracket_j = 0;  // 1-based
  double prev_ratio = 0.0;
  double observed_ratio = 0.0;
  double bound_factor = 0.0;
  double bound_ratio = 0.0;
  double slack = 0.0;  // positive means violation
  bool skipped = false;
  bool violation = false;
};

struct BoundReport {
  std::vector<StepCheck> checks;
  int violations = 0;
  bool monotone_ok = true;
  double worst_monotone_slack = 0.0;
};

struct VerifyConfig {
  double nu = 0.0;
  double epsilon = 0.0;
  double rel_tol = 1e-10;
  double edge_tol = 1e-12;
  std::uint64_t pencil_fingerprint = 0;  // 0 skips the provenance check
};

BoundReport verify_trace(const std::vector<TraceRecord>& trace, const SpectralOracle& oracle,
                         const VerifyConfig& cfg);

struct SharpnessResult {
  double delta = 0.0;
  double observed_factor = 0.0;
  double limit_factor = 0.0;
};

// One restricted PSD-id step in the invariant subspace of lambda_j,
// lambda_{j+1}, lambda_n, maximizing the observed contraction factor over
// starting vectors at ratio distance delta from lambda_j.
std::vector<SharpnessResult> sharpness_probe(const SpectralOracle& oracle, int j, double nu,
                                             double epsilon_target,
                                             const std::vector<double>& deltas);

}  // namespace bpsdid
