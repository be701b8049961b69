#include "bpsdid/solver.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

namespace bpsdid {

void RunConfig::validate() const {
  if (k < 1 || k > k_tilde) throw InvalidArgument("RunConfig: need 1 <= k <= k_tilde");
  if (!(tol > 0.0)) throw InvalidArgument("RunConfig: tolerance must be positive");
  if (max_outer_steps < 1) throw InvalidArgument("RunConfig: max outer steps must be >= 1");
  precond.validate();
}

namespace {

void refresh_residual(BlockIterState& st, const Pencil& p, const InnerSolveConfig& cfg) {
  const int n = st.Z.rows();
  const int kt = st.Z.cols();
  st.R = DenseMatrix(n, kt);
  st.res_norms.assign(static_cast<std::size_t>(kt), 0.0);
  std::vector<double> sz(static_cast<std::size_t>(n));
  for (int t = 0; t < kt; ++t) {
    auto r = st.R.column(t);
    p.H.multiply(st.Z.column(t), r);
    p.S.multiply(st.Z.column(t), sz);
    axpy(-st.theta[static_cast<std::size_t>(t)], sz, r);
    st.res_norms[static_cast<std::size_t>(t)] = s_inv_norm(p.S, r, cfg);
  }
}

BlockIterState state_from_ritz(RitzSet&& ritz, const Pencil& p, const InnerSolveConfig& cfg,
                               int step) {
  BlockIterState st;
  st.Z = std::move(ritz.vectors);
  st.theta = std::move(ritz.values);
  st.step = step;
  refresh_residual(st, p, cfg);
  return st;
}

double first_k_res_norm(const BlockIterState& st, int k) {
  double sq = 0.0;
  for (int t = 0; t < k; ++t)
    sq += st.res_norms[static_cast<std::size_t>(t)] * st.res_norms[static_cast<std::size_t>(t)];
  return std::sqrt(sq);
}

// Removes the accepted directions from each column of P. Shift-invert with
// sigma at an accepted eigenvalue amplifies that eigendirection by 1/accept_tol
// and would otherwise swamp the useful correction before the trial basis is
// orthonormalized.
void deflate_block(DenseMatrix& P, const DeflationSet& defl, const Pencil& p) {
  if (defl.U.cols() == 0) return;
  std::vector<double> su(static_cast<std::size_t>(p.n()));
  for (int j = 0; j < defl.U.cols(); ++j) {
    p.S.multiply(defl.U.column(j), su);
    for (int c = 0; c < P.cols(); ++c) axpy(-dot(su, P.column(c)), defl.U.column(j), P.column(c));
  }
}

// per-column preconditioned directions; the projected variant restricts the
// shifted solve to the S-orthogonal complement of span{defl.U, Z}
DenseMatrix preconditioned_block(const BlockIterState& state, const DeflationSet& defl,
                                 const Preconditioner& K, const Pencil& p,
                                 Preconditioner::ApplyStats* stats) {
  if (K.variant() != PreconditionerVariant::ProjectedInnerKrylov) {
    DenseMatrix P = K.apply(state.R, stats);
    deflate_block(P, defl, p);
    return P;
  }

  const int kt = state.Z.cols();
  DenseMatrix P(state.Z.rows(), kt);
  for (int t = 0; t < kt; ++t) {
    DenseMatrix others(state.Z.rows(), defl.U.cols() + kt - 1);
    int c = 0;
    for (int j = 0; j < defl.U.cols(); ++j) others.set_column(c++, defl.U.column(j));
    for (int j = 0; j < kt; ++j)
      if (j != t) others.set_column(c++, state.Z.column(j));
    const std::vector<double> pt =
        projected_solve(p, others, state.Z.column(t), K.sigma(), state.R.column(t),
                        K.spec().inner_tolerance, K.spec().inner_max_iterations);
    P.set_column(t, pt);
  }
  return P;
}

}  // namespace

BlockIterState bpsd_id_step(const BlockIterState& state, const DeflationSet& defl,
                            const Preconditioner& K, const Pencil& p, const RunConfig& cfg,
                            Preconditioner::ApplyStats* stats) {
  const int kt = state.Z.cols();
  const DenseMatrix P = preconditioned_block(state, defl, K, p, stats);
  const DenseMatrix basis = DenseMatrix::hcat(state.Z, P);
  const DenseMatrix* against = defl.U.cols() > 0 ? &defl.U : nullptr;
  RitzSet ritz = rayleigh_ritz(p, basis, 0, kt, against);
  return state_from_ritz(std::move(ritz), p, cfg.s_inv, state.step + 1);
}

std::vector<double> psd_id_step(std::span<const double> z, const DeflationSet& defl,
                                const Preconditioner& K, const Pencil& p,
                                const RunConfig& cfg) {
  BlockIterState st;
  st.Z = DenseMatrix(static_cast<int>(z.size()), 1);
  st.Z.set_column(0, z);
  st.theta = {rayleigh_quotient(p, z)};
  refresh_residual(st, p, cfg.s_inv);
  const BlockIterState next = bpsd_id_step(st, defl, K, p, cfg);
  return next.Z.column_copy(0);
}

bool stop_check(const BlockIterState& state, const RunConfig& cfg, const Pencil& p) {
  if (cfg.stop == StopCriterion::SInvResidual)
    return first_k_res_norm(state, cfg.k) <= cfg.tol;

  // RelativePsi: psi = ||r||_2 / (||Hz||_2 + |theta| ||Sz||_2), max over first k
  double worst = 0.0;
  for (int t = 0; t < cfg.k; ++t) {
    const std::vector<double> hz = p.H.multiply(state.Z.column(t));
    const std::vector<double> sz = p.S.multiply(state.Z.column(t));
    const double denom =
        norm2(hz) + std::abs(state.theta[static_cast<std::size_t>(t)]) * norm2(sz);
    if (denom == 0.0) continue;
    worst = std::max(worst, norm2(state.R.column(t)) / denom);
  }
  return worst <= cfg.tol;
}

ShiftUpdate update_shift(const ShiftStrategy& strategy, double current_sigma,
                         double current_inner_tolerance, const BlockIterState& state,
                         const std::vector<double>& prev_theta, const DeflationSet& defl,
                         double current_res_norm) {
  ShiftUpdate u{current_sigma, false, current_inner_tolerance};
  switch (strategy.variant) {
    case ShiftStrategy::Variant::Fixed:
      return u;
    case ShiftStrategy::Variant::PrevEig:
      u.sigma = defl.eigenvalues.empty() ? strategy.sigma0
                                         : defl.eigenvalues.back() + strategy.offset;
      return u;
    case ShiftStrategy::Variant::Dynamic: {
      if (prev_theta.empty() || state.theta.size() < 2) return u;
      const double gap = state.theta[1] - state.theta[0];
      if (gap <= 0.0) return u;
      const double eta = (prev_theta[0] - state.theta[0]) / gap;
      if (eta >= strategy.eta_threshold || current_res_norm >= strategy.res_threshold) return u;
      const double proposed = (current_sigma + state.theta[0]) / 2.0;
      // Ritz proxy for the admissible window
      if (!(proposed < (state.theta[0] + state.theta[1]) / 2.0)) return u;
      u.sigma = proposed;
      u.switched = true;
      u.inner_tolerance = std::max(eta, strategy.refine_tol_floor);
      return u;
    }
  }
  return u;
}

DenseMatrix random_start(const Pencil& p, const DeflationSet& defl, int cols, Rng& rng) {
  DenseMatrix B(p.n(), cols);
  for (int j = 0; j < cols; ++j)
    for (int i = 0; i < p.n(); ++i) B(i, j) = rng.next_symmetric();
  const DenseMatrix* against = defl.U.cols() > 0 ? &defl.U : nullptr;
  return s_orthonormalize(p.S, B, against);
}

// One inverse-iteration step on the deflation column closest to sigma. When
// sigma sits on an accepted eigenvalue the factorization amplifies the true
// eigendirection by 1/|lambda - sigma|; the stored column only matches it to
// its own convergence tolerance, so the residual left after deflating the
// preconditioned block stalls the outer iteration. Refreshing the column from
// the factorization itself removes that gap.
void polish_deflation(DeflationSet& defl, const Preconditioner& K, const Pencil& p) {
  if (K.variant() != PreconditionerVariant::ExactShiftInvert || defl.U.cols() == 0) return;
  const double scale = std::max(1.0, std::abs(K.sigma()));
  int best = 0;
  for (int j = 1; j < defl.U.cols(); ++j)
    if (std::abs(defl.eigenvalues[static_cast<std::size_t>(j)] - K.sigma()) <
        std::abs(defl.eigenvalues[static_cast<std::size_t>(best)] - K.sigma()))
      best = j;
  if (std::abs(defl.eigenvalues[static_cast<std::size_t>(best)] - K.sigma()) > 1e-8 * scale)
    return;

  DenseMatrix v(p.n(), 1);
  v.set_column(0, K.apply(defl.U.column(best)));
  if (defl.U.cols() > 1) {
    DenseMatrix others(p.n(), defl.U.cols() - 1);
    int c = 0;
    for (int j = 0; j < defl.U.cols(); ++j)
      if (j != best) others.set_column(c++, defl.U.column(j));
    v = s_orthonormalize(p.S, v, &others);
  } else {
    v = s_orthonormalize(p.S, v, nullptr);
  }
  if (v.cols() == 1) defl.U.set_column(best, v.column(0));
}

// Builds the preconditioner, backing the shift off by a relative nudge when
// the banded factorization is exactly singular (PrevEig can land sigma on an
// accepted eigenvalue to the last bit on small or structured pencils).
Preconditioner build_precond(PreconditionerSpec& pspec, const Pencil& p) {
  if (pspec.variant != PreconditionerVariant::ExactShiftInvert)
    return Preconditioner::build(pspec, p);
  try {
    return Preconditioner::build(pspec, p);
  } catch (const NumericalError&) {
    pspec.sigma -= 1e-10 * std::max(1.0, std::abs(pspec.sigma));
    return Preconditioner::build(pspec, p);
  }
}

RunResult run(const Pencil& p, const DeflationSet& defl_in, const DenseMatrix& Z0,
              const RunConfig& cfg, std::vector<TraceRecord>& trace, int run_index) {
  cfg.validate();
  const auto t0 = std::chrono::steady_clock::now();
  DeflationSet defl = defl_in;
  const DenseMatrix* against = defl.U.cols() > 0 ? &defl.U : nullptr;

  BlockIterState state =
      state_from_ritz(rayleigh_ritz(p, Z0, 0, cfg.k_tilde, against), p, cfg.s_inv, 0);

  PreconditionerSpec pspec = cfg.precond;
  ShiftUpdate shift = update_shift(cfg.shift, cfg.shift.sigma0, pspec.inner_tolerance, state,
                                   {}, defl, first_k_res_norm(state, cfg.k));
  pspec.sigma = shift.sigma;
  Preconditioner K = build_precond(pspec, p);
  polish_deflation(defl, K, p);

  auto record = [&](const BlockIterState& st, bool switched,
                    const Preconditioner::ApplyStats& stats) {
    TraceRecord rec;
    rec.run = run_index;
    rec.i = defl.next_index();
    rec.step = st.step;
    rec.theta = st.theta;
    rec.res_norms = st.res_norms;
    rec.sigma = pspec.sigma;
    rec.precond_variant = pspec.variant;
    rec.inner_residuals = stats.inner_residuals;
    rec.switched = switched;
    rec.wall_ms = std::chrono::duration<double, std::milli>(
                      std::chrono::steady_clock::now() - t0)
                      .count();
    trace.push_back(std::move(rec));
  };

  record(state, false, {});

  RunResult result;
  bool converged = stop_check(state, cfg, p);
  std::vector<double> prev_theta;
  while (!converged && state.step < cfg.max_outer_steps) {
    const ShiftUpdate upd =
        update_shift(cfg.shift, pspec.sigma, pspec.inner_tolerance, state, prev_theta, defl,
                     first_k_res_norm(state, cfg.k));
    if (upd.sigma != pspec.sigma || upd.switched) {
      pspec.sigma = upd.sigma;
      if (upd.switched) pspec.inner_tolerance = upd.inner_tolerance;
      K = build_precond(pspec, p);
      polish_deflation(defl, K, p);
    }
    prev_theta = state.theta;
    Preconditioner::ApplyStats stats;
    state = bpsd_id_step(state, defl, K, p, cfg, &stats);
    record(state, upd.switched, stats);
    converged = stop_check(state, cfg, p);
  }

  result.converged = converged;
  result.outer_steps = state.step;
  result.eigenvalues.assign(state.theta.begin(), state.theta.begin() + cfg.k);
  result.vectors = state.Z.slice_columns(0, cfg.k);
  result.residual_norms.assign(state.res_norms.begin(), state.res_norms.begin() + cfg.k);
  result.final_state = std::move(state);
  return result;
}

MultiRunResult multi_run(const Pencil& p, int m, const RunConfig& tmpl) {
  tmpl.validate();
  if (m < 1 || m >= p.n()) throw InvalidArgument("multi_run: need 1 <= m < n");

  MultiRunResult out;
  out.deflation.U = DenseMatrix(p.n(), 0);
  Rng rng(tmpl.seed);
  DenseMatrix carry(p.n(), 0);
  int run_index = 1;

  while (out.deflation.count() < m) {
    const int i = out.deflation.next_index();
    const int remaining = m - i + 1;
    RunConfig cfg = tmpl;
    cfg.k = std::min(tmpl.k, remaining);
    cfg.k_tilde = tmpl.policy == BlockSizePolicy::ShrinkingTail
                      ? remaining
                      : std::max(tmpl.k_tilde, cfg.k);

    DenseMatrix Z0;
    if (carry.cols() >= cfg.k_tilde) {
      Z0 = carry.slice_columns(carry.cols() - cfg.k_tilde, cfg.k_tilde);
    } else if (carry.cols() > 0) {
      const int pad = cfg.k_tilde - carry.cols();
      DenseMatrix fresh(p.n(), pad);
      for (int j = 0; j < pad; ++j)
        for (int r = 0; r < p.n(); ++r) fresh(r, j) = rng.next_symmetric();
      Z0 = DenseMatrix::hcat(carry, fresh);
    } else {
      Z0 = random_start(p, out.deflation, cfg.k_tilde, rng);
    }

    const RunResult res = run(p, out.deflation, Z0, cfg, out.traces, run_index);
    out.steps_per_run.push_back(res.outer_steps);

    const double accept = cfg.effective_accept_tol();
    for (int t = 0; t < cfg.k; ++t) {
      const double radius = res.residual_norms[static_cast<std::size_t>(t)];
      if (radius > accept) {
        out.converged = false;
        return out;
      }
      out.deflation.U = DenseMatrix::hcat(out.deflation.U, res.vectors.slice_columns(t, 1));
      out.deflation.eigenvalues.push_back(res.eigenvalues[static_cast<std::size_t>(t)]);
      out.deflation.certificate_radii.push_back(radius);
    }
    if (!res.converged) out.converged = false;

    carry = res.final_state.Z.cols() > cfg.k
                ? res.final_state.Z.slice_columns(cfg.k, res.final_state.Z.cols() - cfg.k)
                : DenseMatrix(p.n(), 0);
    ++run_index;
  }
  return out;
}

}  // namespace bpsdid
