#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "bpsdid/precond.hpp"

namespace bpsdid {

// Accepted eigenpairs; iteration stays S-orthogonal to span{U}.
struct DeflationSet {
  DenseMatrix U;                    // n x (i-1)
  std::vector<double> eigenvalues;  // ascending, one per column
  std::vector<double> certificate_radii;

  int count() const { return static_cast<int>(eigenvalues.size()); }
  int next_index() const { return count() + 1; }  // the target index i, 1-based
};

struct BlockIterState {
  DenseMatrix Z;                  // n x k_tilde, S-orthonormal Ritz vectors
  std::vector<double> theta;      // ascending
  DenseMatrix R;                  // HZ - SZ*diag(theta)
  std::vector<double> res_norms;  // per column, S^{-1} norm
  int step = 0;
};

enum class StopCriterion { SInvResidual, RelativePsi };
enum class BlockSizePolicy { FixedWindow, ShrinkingTail };

struct ShiftStrategy {
  enum class Variant { Fixed, PrevEig, Dynamic };
  Variant variant = Variant::Fixed;
  double sigma0 = 0.0;   // Fixed value; also the first-run shift for PrevEig/Dynamic
  double offset = 0.0;   // PrevEig: sigma = last accepted eigenvalue + offset
  double eta_threshold = 0.1;
  double res_threshold = 0.1;
  double refine_tol_floor = 1e-12;
};

struct RunConfig {
  int k = 1;        // wanted pairs this run
  int k_tilde = 1;  // block size
  ShiftStrategy shift;
  PreconditionerSpec precond;
  StopCriterion stop = StopCriterion::SInvResidual;
  double tol = 1e-8;
  double accept_tol = 0.0;  // <= 0 means: use tol
  int max_outer_steps = 300;
  BlockSizePolicy policy = BlockSizePolicy::FixedWindow;
  std::uint64_t seed = 1;
  InnerSolveConfig s_inv;  // for the S^{-1} residual norms

  void validate() const;
  double effective_accept_tol() const { return accept_tol > 0.0 ? accept_tol : tol; }
};

struct TraceRecord {
  int run = 0;   // sequential run number, 1-based
  int i = 0;     // deflation target index at run start
  int step = 0;  // outer step, 0 = initial Rayleigh-Ritz
  std::vector<double> theta;
  std::vector<double> res_norms;
  double sigma = 0.0;
  PreconditionerVariant precond_variant = PreconditionerVariant::Identity;
  std::vector<double> inner_residuals;  // Krylov variants, per applied column
  bool switched = false;
  double wall_ms = 0.0;
};

struct RunResult {
  bool converged = false;
  int outer_steps = 0;
  std::vector<double> eigenvalues;  // first k Ritz values
  DenseMatrix vectors;              // first k Ritz vectors
  std::vector<double> residual_norms;
  BlockIterState final_state;
};

struct MultiRunResult {
  DeflationSet deflation;
  std::vector<TraceRecord> traces;
  std::vector<int> steps_per_run;
  bool converged = true;
};

// One BPSD-id outer step: P = K R, Rayleigh-Ritz on span{Z, P} S-orthogonal
// to the deflation set, keep the k_tilde smallest pairs.
BlockIterState bpsd_id_step(const BlockIterState& state, const DeflationSet& defl,
                            const Preconditioner& K, const Pencil& p,
                            const RunConfig& cfg,
                            Preconditioner::ApplyStats* stats = nullptr);

// k_tilde = 1 specialization.
std::vector<double> psd_id_step(std::span<const double> z, const DeflationSet& defl,
                                const Preconditioner& K, const Pencil& p,
                                const RunConfig& cfg);

bool stop_check(const BlockIterState& state, const RunConfig& cfg, const Pencil& p);

struct ShiftUpdate {
  double sigma = 0.0;
  bool switched = false;
  double inner_tolerance = 0.0;
};

// Applies the shift strategy between outer steps. `prev_theta` is the Ritz
// vector values from the previous step (empty before the first).
ShiftUpdate update_shift(const ShiftStrategy& strategy, double current_sigma,
                         double current_inner_tolerance, const BlockIterState& state,
                         const std::vector<double>& prev_theta,
                         const DeflationSet& defl, double current_res_norm);

// Seeds an S-orthonormal random block of `cols` columns S-orthogonal to defl.U.
DenseMatrix random_start(const Pencil& p, const DeflationSet& defl, int cols, Rng& rng);

RunResult run(const Pencil& p, const DeflationSet& defl, const DenseMatrix& Z0,
              const RunConfig& cfg, std::vector<TraceRecord>& trace, int run_index = 1);

MultiRunResult multi_run(const Pencil& p, int m, const RunConfig& tmpl);

}  // namespace bpsdid
