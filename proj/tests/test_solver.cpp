#include <cmath>
#include <vector>

#include <doctest.h>

#include "bpsdid/io.hpp"
#include "bpsdid/problems.hpp"
#include "bpsdid/solver.hpp"

using namespace bpsdid;

namespace {

Pencil diag_pencil(const std::vector<double>& h) {
  return Pencil(SparseMatrix::diagonal(h), SparseMatrix::identity(static_cast<int>(h.size())));
}

Preconditioner identity_precond(const Pencil& p) {
  PreconditionerSpec spec;
  spec.variant = PreconditionerVariant::Identity;
  return Preconditioner::build(spec, p);
}

// initial state via a zero-work Rayleigh-Ritz on span{Z}
BlockIterState bpsd_id_step_seed(const Pencil& p, const DenseMatrix& Z) {
  const RitzSet ritz = rayleigh_ritz(p, Z, 0, Z.cols());
  BlockIterState st;
  st.Z = ritz.vectors;
  st.theta = ritz.values;
  st.R = DenseMatrix(p.n(), Z.cols());
  st.res_norms.resize(static_cast<std::size_t>(Z.cols()));
  for (int t = 0; t < Z.cols(); ++t) {
    std::vector<double> r = p.H.multiply(st.Z.column(t));
    const std::vector<double> sz = p.S.multiply(st.Z.column(t));
    axpy(-st.theta[static_cast<std::size_t>(t)], sz, r);
    st.R.set_column(t, r);
    st.res_norms[static_cast<std::size_t>(t)] = s_inv_norm(p.S, r);
  }
  return st;
}

BlockIterState state_from_z(const Pencil& p, const std::vector<double>& z) {
  DenseMatrix Z(p.n(), 1);
  Z.set_column(0, z);
  return bpsd_id_step_seed(p, Z);
}

}  // namespace

TEST_CASE("bpsd_id_step with K = I spans the full space on a 2-dim pencil") {
  const Pencil p = diag_pencil({1, 2});
  const double s = 1.0 / std::sqrt(2.0);
  const BlockIterState st = state_from_z(p, {s, s});
  RunConfig cfg;
  cfg.k = cfg.k_tilde = 1;
  const BlockIterState next = bpsd_id_step(st, {}, identity_precond(p), p, cfg);
  CHECK(next.theta[0] == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("bpsd_id_step minimizes the Rayleigh quotient over span{z, r}") {
  const Pencil p = diag_pencil({1, 2, 10});
  const double s = 1.0 / std::sqrt(3.0);
  const std::vector<double> z{s, s, s};
  const BlockIterState st = state_from_z(p, z);
  RunConfig cfg;
  cfg.k = cfg.k_tilde = 1;
  const BlockIterState next = bpsd_id_step(st, {}, identity_precond(p), p, cfg);

  // independent 2x2 generalized solve on the basis {z, r}
  const std::vector<double> r = st.R.column_copy(0);
  const DenseMatrix B = DenseMatrix::from_columns({z, r});
  DenseMatrix Hb(2, 2), Sb(2, 2);
  for (int a = 0; a < 2; ++a)
    for (int b = 0; b < 2; ++b) {
      Hb(a, b) = dot(B.column(a), p.H.multiply(B.column(b)));
      Sb(a, b) = dot(B.column(a), p.S.multiply(B.column(b)));
    }
  // smallest root of det(Hb - theta Sb) = 0
  const double a2 = Sb(0, 0) * Sb(1, 1) - Sb(0, 1) * Sb(1, 0);
  const double a1 = -(Hb(0, 0) * Sb(1, 1) + Hb(1, 1) * Sb(0, 0) - Hb(0, 1) * Sb(1, 0) -
                      Hb(1, 0) * Sb(0, 1));
  const double a0 = Hb(0, 0) * Hb(1, 1) - Hb(0, 1) * Hb(1, 0);
  const double disc = std::sqrt(a1 * a1 - 4.0 * a2 * a0);
  const double theta_min = (-a1 - disc) / (2.0 * a2);
  CHECK(next.theta[0] == doctest::Approx(theta_min).epsilon(1e-10));
}

TEST_CASE("an exact eigenvector is a fixed point") {
  const Pencil p = diag_pencil({1, 2, 3});
  const BlockIterState st = state_from_z(p, {1, 0, 0});
  RunConfig cfg;
  cfg.k = cfg.k_tilde = 1;
  const BlockIterState next = bpsd_id_step(st, {}, identity_precond(p), p, cfg);
  CHECK(next.theta[0] == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(next.res_norms[0] <= 1e-12);
}

TEST_CASE("psd_id_step matches the block step with one column") {
  const Pencil p = diag_pencil({1, 2, 10});
  const double s = 1.0 / std::sqrt(3.0);
  RunConfig cfg;
  cfg.k = cfg.k_tilde = 1;
  const std::vector<double> z1 = psd_id_step(std::vector<double>{s, s, s}, {},
                                             identity_precond(p), p, cfg);
  CHECK(rayleigh_quotient(p, z1) < 13.0 / 3.0 - 0.1);  // strictly below the start
  CHECK(norm2(z1) == doctest::Approx(1.0).epsilon(1e-10));  // S = I normalization
}

TEST_CASE("run converges on a small diagonal pencil") {
  const Pencil p = diag_pencil({1, 2, 3, 4});
  RunConfig cfg;
  cfg.k = cfg.k_tilde = 2;
  cfg.precond.variant = PreconditionerVariant::ExactShiftInvert;
  cfg.shift.variant = ShiftStrategy::Variant::Fixed;
  cfg.shift.sigma0 = 0.0;
  cfg.tol = 1e-10;
  Rng rng(1);
  const DenseMatrix Z0 = random_start(p, {}, 2, rng);
  std::vector<TraceRecord> trace;
  const RunResult res = run(p, {}, Z0, cfg, trace);
  CHECK(res.converged);
  CHECK(res.outer_steps <= 3);
  CHECK(res.eigenvalues[0] == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(res.eigenvalues[1] == doctest::Approx(2.0).epsilon(1e-9));
  for (double rn : res.residual_norms) CHECK(rn <= 1e-10);
}

TEST_CASE("an exact invariant-subspace start stops with zero steps") {
  const Pencil p = diag_pencil({1, 2, 3, 4});
  RunConfig cfg;
  cfg.k = cfg.k_tilde = 2;
  cfg.tol = 1e-10;
  const DenseMatrix Z0 = DenseMatrix::from_columns({{1, 0, 0, 0}, {0, 1, 0, 0}});
  std::vector<TraceRecord> trace;
  const RunResult res = run(p, {}, Z0, cfg, trace);
  CHECK(res.converged);
  CHECK(res.outer_steps == 0);
  CHECK(trace.size() == 1);
}

TEST_CASE("multi_run partitions the targets into runs") {
  SlitRectangleSpec spec;
  spec.width = 1.5;
  spec.height = 1.0;
  spec.h = 1.0 / 16;
  spec.slits = {{0.5, 0.45, 0.55}, {1.0, 0.45, 0.55}};
  const Pencil p = build_slit_laplacian(spec).first;

  RunConfig cfg;
  cfg.precond.variant = PreconditionerVariant::ExactShiftInvert;
  cfg.shift.variant = ShiftStrategy::Variant::PrevEig;
  cfg.shift.sigma0 = 20.0;
  cfg.tol = 1e-8;
  cfg.seed = 7;

  cfg.k = 1;
  cfg.k_tilde = 2;
  const MultiRunResult six = multi_run(p, 6, cfg);
  CHECK(six.converged);
  CHECK(six.steps_per_run.size() == 6);

  cfg.k = 3;
  cfg.k_tilde = 4;
  const MultiRunResult two = multi_run(p, 6, cfg);
  CHECK(two.converged);
  CHECK(two.steps_per_run.size() == 2);
  for (int j = 0; j < 6; ++j)
    CHECK(two.deflation.eigenvalues[static_cast<std::size_t>(j)] ==
          doctest::Approx(six.deflation.eigenvalues[static_cast<std::size_t>(j)]).epsilon(1e-7));

  cfg.k = cfg.k_tilde = 3;
  const MultiRunResult one = multi_run(p, 3, cfg);
  CHECK(one.converged);
  CHECK(one.steps_per_run.size() == 1);
}

TEST_CASE("deflation stays S-orthogonal across runs") {
  const Pencil p = diag_pencil({1, 2, 3, 4, 5, 6, 7, 8});
  RunConfig cfg;
  cfg.k = 1;
  cfg.k_tilde = 2;
  cfg.precond.variant = PreconditionerVariant::ExactShiftInvert;
  cfg.shift.variant = ShiftStrategy::Variant::PrevEig;
  cfg.shift.sigma0 = 0.0;
  cfg.tol = 1e-10;
  cfg.seed = 3;
  const MultiRunResult res = multi_run(p, 4, cfg);
  REQUIRE(res.converged);
  const DenseMatrix& U = res.deflation.U;
  DenseMatrix G = U.transpose_multiply(U);  // S = I
  for (int j = 0; j < G.cols(); ++j) G(j, j) -= 1.0;
  CHECK(G.max_abs() <= 1e-10);
  for (std::size_t j = 0; j < res.deflation.certificate_radii.size(); ++j)
    CHECK(res.deflation.certificate_radii[j] <= cfg.tol);
}

TEST_CASE("Ritz values decrease monotonically within each run") {
  const Pencil p = diag_pencil({1, 1.5, 2, 5, 9, 14, 20});
  RunConfig cfg;
  cfg.k = 2;
  cfg.k_tilde = 3;
  cfg.precond.variant = PreconditionerVariant::InnerKrylov;
  cfg.precond.inner_tolerance = 0.01;
  cfg.shift.variant = ShiftStrategy::Variant::Fixed;
  cfg.shift.sigma0 = 0.5;
  cfg.tol = 1e-9;
  cfg.seed = 13;
  const MultiRunResult res = multi_run(p, 2, cfg);
  REQUIRE(res.converged);
  for (std::size_t r = 1; r < res.traces.size(); ++r) {
    const TraceRecord& prev = res.traces[r - 1];
    const TraceRecord& cur = res.traces[r];
    if (cur.run != prev.run) continue;
    for (std::size_t t = 0; t < cur.theta.size(); ++t)
      CHECK(cur.theta[t] <= prev.theta[t] + 1e-10 * std::abs(prev.theta[t]));
  }
}

TEST_CASE("update_shift strategies") {
  const Pencil p = diag_pencil({1, 2, 3});
  BlockIterState st;
  st.theta = {2.0, 3.0};

  ShiftStrategy dyn;
  dyn.variant = ShiftStrategy::Variant::Dynamic;
  // eta = (2.05 - 2) / (3 - 2) = 0.05 < 0.1 and residual below threshold
  ShiftUpdate upd = update_shift(dyn, 1.0, 0.1, st, {2.05, 3.0}, {}, 0.01);
  CHECK(upd.switched);
  CHECK(upd.sigma == doctest::Approx(1.5));
  CHECK(upd.inner_tolerance == doctest::Approx(0.05));

  // eta = 1/3 exceeds the threshold: no switch
  st.theta = {1.5, 3.0};
  upd = update_shift(dyn, 1.0, 0.1, st, {2.0, 3.0}, {}, 0.01);
  CHECK_FALSE(upd.switched);
  CHECK(upd.sigma == 1.0);

  ShiftStrategy fixed;
  fixed.variant = ShiftStrategy::Variant::Fixed;
  fixed.sigma0 = 4.0;
  upd = update_shift(fixed, 4.0, 0.1, st, {}, {}, 1.0);
  CHECK(upd.sigma == 4.0);
  CHECK_FALSE(upd.switched);

  ShiftStrategy prev;
  prev.variant = ShiftStrategy::Variant::PrevEig;
  prev.sigma0 = 0.0;
  prev.offset = 0.25;
  DeflationSet defl;
  defl.U = DenseMatrix::from_columns({{1, 0, 0}});
  defl.eigenvalues = {1.0};
  defl.certificate_radii = {1e-12};
  upd = update_shift(prev, 0.0, 0.1, st, {}, defl, 1.0);
  CHECK(upd.sigma == doctest::Approx(1.25));
}

TEST_CASE("stop_check criteria") {
  const Pencil p = diag_pencil({1, 2});
  RunConfig cfg;
  cfg.k = cfg.k_tilde = 1;
  cfg.tol = 5.0;

  BlockIterState st;
  st.Z = DenseMatrix::from_columns({{1, 0}});
  st.theta = {1.0};
  st.R = DenseMatrix(2, 1);
  st.res_norms = {0.0};
  CHECK(stop_check(st, cfg, p));  // zero residual

  st.R.set_column(0, std::vector<double>{3, 4});
  st.res_norms = {5.0};
  CHECK(stop_check(st, cfg, p));  // boundary: exactly tol

  cfg.stop = StopCriterion::RelativePsi;
  cfg.tol = 1e-14;
  st.R = DenseMatrix(2, 1);
  st.res_norms = {0.0};
  CHECK(stop_check(st, cfg, p));  // exact eigenvector: psi = 0
}

TEST_CASE("identical config and seed give bit-identical traces") {
  const Pencil p = diag_pencil({3, 1, 4, 1.5, 9, 2.6});
  RunConfig cfg;
  cfg.k = 1;
  cfg.k_tilde = 2;
  cfg.precond.variant = PreconditionerVariant::InnerKrylov;
  cfg.precond.inner_tolerance = 0.1;
  cfg.shift.variant = ShiftStrategy::Variant::PrevEig;
  cfg.shift.sigma0 = 0.5;
  cfg.tol = 1e-9;
  cfg.seed = 99;
  const MultiRunResult a = multi_run(p, 3, cfg);
  const MultiRunResult b = multi_run(p, 3, cfg);
  CHECK(trace_to_csv(a.traces) == trace_to_csv(b.traces));
}
