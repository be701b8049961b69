#include "bpsdid/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace bpsdid {

namespace {

DenseMatrix densify(const SparseMatrix& A) {
  DenseMatrix D(A.n(), A.n());
  const auto off = A.row_offsets();
  const auto col = A.col_indices();
  const auto val = A.values();
  for (int i = 0; i < A.n(); ++i)
    for (int k = off[static_cast<std::size_t>(i)]; k < off[static_cast<std::size_t>(i) + 1]; ++k)
      D(i, col[static_cast<std::size_t>(k)]) = val[static_cast<std::size_t>(k)];
  return D;
}

}  // namespace

SpectralOracle dense_oracle(const Pencil& p, int dense_limit) {
  if (p.n() > dense_limit)
    throw InvalidArgument("dense_oracle: problem size " + std::to_string(p.n()) +
                          " exceeds the dense limit " + std::to_string(dense_limit));

  SpectralOracle oracle;
  oracle.pencil_fingerprint = p.fingerprint();

  if (p.s_is_identity) {
    DenseMatrix Hd = densify(p.H);
    Hd.symmetrize();
    SymEigResult eig = jacobi_eigen(Hd);
    oracle.values = std::move(eig.values);
    oracle.vectors = std::move(eig.vectors);
  } else {
    const DenseMatrix L = cholesky_lower(densify(p.S));
    DenseMatrix T = densify(p.H);
    solve_lower(L, T, false);        // L^{-1} H
    T = T.transposed();
    solve_lower(L, T, false);        // L^{-1} H^T L^{-T} = (L^{-1} H L^{-T})^T
    T.symmetrize();
    SymEigResult eig = jacobi_eigen(T);
    solve_lower(L, eig.vectors, true);  // back-transform: L^{-T} Q
    oracle.values = std::move(eig.values);
    oracle.vectors = std::move(eig.vectors);
  }

  for (int j = 0; j < oracle.vectors.cols(); ++j) {
    const double nrm = s_norm(p.S, oracle.vectors.column(j));
    if (nrm > 0.0) scale(1.0 / nrm, oracle.vectors.column(j));
  }
  return oracle;
}

EffectiveForm effective_form(const Preconditioner& K, const SpectralOracle& oracle,
                             const SparseMatrix& S, int i, double nu) {
  const int n = oracle.n();
  if (i < 1 || i > n) throw InvalidArgument("effective_form: index out of range");
  if (!(nu < oracle.lambda(i)))
    throw InvalidArgument("effective_form: need nu < lambda_i");

  const int m = n - i + 1;
  DenseMatrix SV(n, m);
  for (int j = 0; j < m; ++j) S.multiply(oracle.vectors.column(i - 1 + j), SV.column(j));
  DenseMatrix W(n, m);
  for (int j = 0; j < m; ++j) {
    const std::vector<double> w = K.apply(SV.column(j));
    W.set_column(j, w);
  }

  EffectiveForm ef;
  ef.ro.i = i;
  ef.ro.nu = nu;
  ef.ro.lambda_nu.resize(static_cast<std::size_t>(m));
  for (int j = 0; j < m; ++j)
    ef.ro.lambda_nu[static_cast<std::size_t>(j)] = oracle.lambda(i + j) - nu;
  ef.ro.K_tilde = SV.transpose_multiply(W);
  ef.ro.asymmetry = ef.ro.K_tilde.asymmetry();
  ef.ro.K_tilde.symmetrize();

  const SymEigResult eig = jacobi_eigen(ef.ro.K_tilde);
  ef.min_eigenvalue = eig.values.front();
  ef.positive_definite = ef.min_eigenvalue > 0.0;

  if (K.variant() == PreconditionerVariant::ExactShiftInvert &&
      K.sigma() < oracle.lambda(i)) {
    const double total = ef.ro.K_tilde.frobenius_norm();
    if (ef.ro.K_tilde.off_diagonal_frobenius() > 1e-8 * std::max(1.0, total))
      throw NumericalError("effective_form: exact shift-invert form is not near-diagonal");
    for (int j = 0; j < m; ++j) {
      const double expected = 1.0 / (oracle.lambda(i + j) - K.sigma());
      if (std::abs(ef.ro.K_tilde(j, j) - expected) > 1e-6 * std::abs(expected))
        throw NumericalError("effective_form: exact shift-invert diagonal mismatch");
    }
  }
  return ef;
}

QualityReport quality_epsilon(const RestrictedOperators& ro) {
  const int m = ro.K_tilde.rows();
  DenseMatrix A(m, m);  // symmetrized product Lambda_nu^{1/2} K Lambda_nu^{1/2}
  std::vector<double> sq(static_cast<std::size_t>(m));
  for (int j = 0; j < m; ++j) {
    const double d = ro.lambda_nu[static_cast<std::size_t>(j)];
    if (!(d > 0.0)) throw InvalidArgument("quality_epsilon: Lambda_nu not positive");
    sq[static_cast<std::size_t>(j)] = std::sqrt(d);
  }
  for (int c = 0; c < m; ++c)
    for (int r = 0; r < m; ++r)
      A(r, c) = sq[static_cast<std::size_t>(r)] * ro.K_tilde(r, c) * sq[static_cast<std::size_t>(c)];
  A.symmetrize();
  const SymEigResult eig = jacobi_eigen(A);

  QualityReport q;
  q.alpha = eig.values.front();
  q.beta = eig.values.back();
  q.definite = q.alpha > 0.0;
  if (!q.definite) throw NumericalError("quality_epsilon: K_tilde is not effectively positive definite");
  q.epsilon = (q.beta - q.alpha) / (q.beta + q.alpha);
  q.omega = 2.0 / (q.beta + q.alpha);
  return q;
}

double kappa(double lambda_j, double lambda_j1, double lambda_n, double nu) {
  if (!(nu < lambda_j && lambda_j < lambda_j1 && lambda_j1 <= lambda_n))
    throw InvalidArgument("kappa: need nu < lambda_j < lambda_j1 <= lambda_n");
  return ((lambda_j - nu) / (lambda_j1 - nu)) * ((lambda_n - lambda_j1) / (lambda_n - lambda_j));
}

double single_step_factor(double kappa, double epsilon) {
  if (!(kappa >= 0.0 && kappa < 1.0 && epsilon >= 0.0 && epsilon < 1.0))
    throw InvalidArgument("single_step_factor: need kappa, epsilon in [0,1)");
  const double q = (kappa + epsilon * (2.0 - kappa)) / ((2.0 - kappa) + epsilon * kappa);
  return q * q;
}

LargerShiftBounds larger_shift_bounds(double lambda_i, double lambda_i1, double lambda_n,
                                      double sigma, double rho, double epsilon) {
  if (!(lambda_i < sigma && sigma < (lambda_i + lambda_i1) / 2.0))
    throw InvalidArgument("larger_shift_bounds: shift outside (lambda_i, midpoint)");
  if (!(rho > lambda_i && rho < lambda_i1))
    throw InvalidArgument("larger_shift_bounds: rho outside (lambda_i, lambda_i1)");

  LargerShiftBounds b;
  b.kappa = ((lambda_i - sigma) / (lambda_i1 - sigma)) *
            ((lambda_n - lambda_i1) / (lambda_n - lambda_i));
  const double q = b.kappa / (2.0 - b.kappa);
  b.supercubic_factor = q * q;

  const double mu = rho - lambda_i;
  const double gap = lambda_i1 - rho;
  const double ratio = mu / gap;
  b.supercubic_bound = b.supercubic_factor * ratio;
  b.cubic_bound = ratio * ratio * ratio;
  const double f = (mu + epsilon * gap) / (gap + epsilon * mu);
  b.inexact_bound = f * f * ratio;
  return b;
}

MultiStepBounds multi_step_bounds(const SpectralOracle& oracle, const MultiStepInputs& in) {
  const int n = oracle.n();
  if (in.t < 1 || in.t > in.k_tilde || in.i < 1 || in.i + in.k_tilde > n)
    throw InvalidArgument("multi_step_bounds: index configuration out of range");

  const double l_t = oracle.lambda(in.i - 1 + in.t);
  const double l_ik = oracle.lambda(in.i + in.k_tilde);
  const double l_it = oracle.lambda(in.i + in.t);
  const double l_n = oracle.lambda(n);

  MultiStepBounds out;
  auto pow2l = [&](double base) { return std::pow(base * base, in.ell); };

  // Bound_cr: exact shift-invert, sigma (= in.nu) < lambda_i, ratio over lambda_n
  if (in.nu < oracle.lambda(in.i) && l_t < l_ik && l_t < l_n && std::isfinite(in.tau)) {
    const double kcr = ((l_t - in.nu) / (l_ik - in.nu)) * ((l_n - l_ik) / (l_n - l_t));
    out.bound_cr = pow2l(kcr / (2.0 - kcr)) * ((l_t - in.nu) / (l_n - in.nu)) * in.tau;
  }

  // Bound_2 and Bound_3: anchored at theta_ktilde, ratio over lambda_{i+ktilde}
  if (l_t < l_ik && in.theta_kt_anchor < l_ik) {
    const double r0 = (in.theta_kt_anchor - l_t) / (l_ik - in.theta_kt_anchor);
    const double f2 = in.epsilon + (1.0 - in.epsilon) * (l_t - in.nu) / (l_ik - in.nu);
    out.bound2 = pow2l(f2) * r0;
    const double k3 = ((l_t - in.nu) / (l_ik - in.nu)) * ((l_n - l_ik) / (l_n - l_t));
    const double f3 = (k3 + in.epsilon * (2.0 - k3)) / ((2.0 - k3) + in.epsilon * k3);
    out.bound3 = pow2l(f3) * r0;
  }

  // Bound_1: single-step recursion, adjacent gap, anchored at theta_t
  if (l_t < l_it && in.theta_t_anchor < l_it) {
    const double r0 = (in.theta_t_anchor - l_t) / (l_it - in.theta_t_anchor);
    const double k1 = ((l_t - in.nu) / (l_it - in.nu)) * ((l_n - l_it) / (l_n - l_t));
    const double f1 = (k1 + in.epsilon * (2.0 - k1)) / ((2.0 - k1) + in.epsilon * k1);
    out.bound1 = pow2l(f1) * r0;
  }
  return out;
}

double compute_tau(const DenseMatrix& Z0, const SpectralOracle& oracle,
                   const SparseMatrix& S, int i, int k_tilde, double sigma) {
  const int n = oracle.n();
  if (i < 1 || i - 1 + k_tilde > n) throw InvalidArgument("compute_tau: index out of range");
  if (!(sigma < oracle.lambda(i))) throw InvalidArgument("compute_tau: need sigma < lambda_i");
  if (Z0.cols() != k_tilde) throw InvalidArgument("compute_tau: Z0 must have k_tilde columns");

  const int m = n - i + 1;
  DenseMatrix E(m, k_tilde);  // Lambda_sigma^{1/2} V^T S Z0
  std::vector<double> sz(static_cast<std::size_t>(n));
  for (int c = 0; c < k_tilde; ++c) {
    S.multiply(Z0.column(c), sz);
    for (int r = 0; r < m; ++r)
      E(r, c) = std::sqrt(oracle.lambda(i + r) - sigma) * dot(oracle.vectors.column(i - 1 + r), sz);
  }

  const SparseMatrix Im = SparseMatrix::identity(m);
  DenseMatrix Q;
  try {
    Q = s_orthonormalize(Im, E);
  } catch (const NumericalError&) {
    return std::numeric_limits<double>::infinity();
  }
  if (Q.cols() < k_tilde) return std::numeric_limits<double>::infinity();

  // cosines of the principal angles = singular values of the leading block
  DenseMatrix B(k_tilde, k_tilde);
  for (int c = 0; c < k_tilde; ++c)
    for (int r = 0; r < k_tilde; ++r) B(r, c) = Q(r, c);
  DenseMatrix G = B.transpose_multiply(B);
  G.symmetrize();
  const SymEigResult eig = jacobi_eigen(G);
  const double cos2 = std::clamp(eig.values.front(), 0.0, 1.0);
  if (cos2 <= 0.0) return std::numeric_limits<double>::infinity();
  return (1.0 - cos2) / cos2;
}

BoundReport verify_trace(const std::vector<TraceRecord>& trace, const SpectralOracle& oracle,
                         const VerifyConfig& cfg) {
  if (cfg.pencil_fingerprint != 0 && oracle.pencil_fingerprint != 0 &&
      cfg.pencil_fingerprint != oracle.pencil_fingerprint)
    throw InvalidArgument("verify_trace: trace and oracle come from different pencils");

  BoundReport report;
  const int n = oracle.n();
  const double l_n = oracle.lambda(n);

  for (std::size_t a = 0; a + 1 < trace.size(); ++a) {
    const TraceRecord& prev = trace[a];
    const TraceRecord& next = trace[a + 1];
    if (prev.run != next.run || next.step != prev.step + 1) continue;
    const int kt = static_cast<int>(prev.theta.size());

    for (int t0 = 0; t0 < kt && t0 < static_cast<int>(next.theta.size()); ++t0) {
      const double th = prev.theta[static_cast<std::size_t>(t0)];
      const double th_next = next.theta[static_cast<std::size_t>(t0)];

      // monotone Ritz decrease
      const double mono_slack = (th_next - th) / std::max(1.0, std::abs(th));
      if (mono_slack > report.worst_monotone_slack) report.worst_monotone_slack = mono_slack;
      if (mono_slack > cfg.rel_tol) report.monotone_ok = false;

      StepCheck chk;
      chk.run = prev.run;
      chk.step = next.step;
      chk.t = t0 + 1;

      // bracketing interval (lambda_j, lambda_j1) with j >= i-1+t
      const int j_min = prev.i + t0;  // 1-based
      int j = 0;
      for (int q = n; q >= 1; --q)
        if (oracle.lambda(q) < th) {
          j = q;
          break;
        }
      const double scale_j = std::max(1.0, std::abs(th));
      bool skip = j < j_min || j >= n;
      if (!skip) {
        const double l_j = oracle.lambda(j);
        const double l_j1 = oracle.lambda(j + 1);
        skip = (th - l_j <= cfg.edge_tol * scale_j) ||  // interval-edge cases
               (l_j1 - th <= cfg.edge_tol * scale_j) || !(cfg.nu < l_j) ||
               l_j1 >= l_n;  // no room above the bracket
        if (!skip) {
          chk.bracket_j = j;
          chk.prev_ratio = (th - l_j) / (l_j1 - th);
          chk.bound_factor = single_step_factor(kappa(l_j, l_j1, l_n, cfg.nu), cfg.epsilon);
          chk.bound_ratio = chk.bound_factor * chk.prev_ratio;
          chk.observed_ratio = (th_next - l_j) / (l_j1 - th_next);
          chk.slack = chk.observed_ratio - chk.bound_ratio * (1.0 + cfg.rel_tol);
          const bool converged_out = th_next - l_j <= cfg.edge_tol * scale_j;
          chk.violation = !converged_out && chk.slack > 0.0;
          if (chk.violation) ++report.violations;
        }
      }
      chk.skipped = skip;
      report.checks.push_back(chk);
    }
  }
  return report;
}

namespace {

// one restricted PSD-id step on the eigentriple (l1, l2, l3); returns the
// observed next ratio given the start at mu0 = rho - l1 and third-component
// weight u; long double internals against the delta^3 cancellation
long double probe_step_ratio(long double d2, long double d3, long double mu0, long double u,
                             long double g1, long double g2, long double g3) {
  const long double s = d3 > 0.0L ? (mu0 - u * d3) / d2 : mu0 / d2;
  if (s < 0.0L || u < 0.0L || s + u > 1.0L) return std::numeric_limits<long double>::quiet_NaN();
  const long double c1 = std::sqrt(1.0L - s - u);
  const long double c2 = std::sqrt(s);
  const long double c3 = std::sqrt(u);

  // r = (Lambda - rho I) c, componentwise
  const long double r1 = -mu0 * c1;
  const long double r2 = (d2 - mu0) * c2;
  const long double r3 = (d3 - mu0) * c3;
  const long double b1 = g1 * r1, b2 = g2 * r2, b3 = g3 * r3;

  // 2x2 pencil (M, G) of Lambda - l1 I on span{c, K r}; det via minors keeps
  // the tiny root meaningful
  const long double m11 = d2 * c2 * c2 + d3 * c3 * c3;  // = mu0 exactly
  const long double m12 = d2 * c2 * b2 + d3 * c3 * b3;
  const long double m22 = d2 * b2 * b2 + d3 * b3 * b3;
  const long double g11 = c1 * c1 + c2 * c2 + c3 * c3;
  const long double g12 = c1 * b1 + c2 * b2 + c3 * b3;
  const long double g22 = b1 * b1 + b2 * b2 + b3 * b3;

  const long double min12 = c1 * b2 - c2 * b1;
  const long double min13 = c1 * b3 - c3 * b1;
  const long double min23 = c2 * b3 - c3 * b2;
  const long double detG = min12 * min12 + min13 * min13 + min23 * min23;
  const long double detM = d2 * d3 * min23 * min23;
  const long double btrm = m11 * g22 + m22 * g11 - 2.0L * m12 * g12;
  if (!(btrm > 0.0L)) return 0.0L;
  const long double disc = btrm * btrm - 4.0L * detG * detM;
  const long double mu = 2.0L * detM / (btrm + std::sqrt(std::max(disc, 0.0L)));
  if (!(mu >= 0.0L) || mu >= d2) return std::numeric_limits<long double>::quiet_NaN();
  return mu / (d2 - mu);
}

}  // namespace

std::vector<SharpnessResult> sharpness_probe(const SpectralOracle& oracle, int j, double nu,
                                             double epsilon_target,
                                             const std::vector<double>& deltas) {
  const int n = oracle.n();
  if (j < 1 || j + 1 > n) throw InvalidArgument("sharpness_probe: index out of range");
  const long double l1 = oracle.lambda(j);
  const long double l2 = oracle.lambda(j + 1);
  const long double l3 = oracle.lambda(n);
  if (!(l1 < l2)) throw InvalidArgument("sharpness_probe: degenerate triple");
  if (!(nu < l1)) throw InvalidArgument("sharpness_probe: need nu < lambda_j");
  if (!(epsilon_target >= 0.0 && epsilon_target < 1.0))
    throw InvalidArgument("sharpness_probe: epsilon_target outside [0,1)");

  const long double d2 = l2 - l1;
  const long double d3 = l3 - l1;
  const long double eps = epsilon_target;
  // diagonal effective form with quality epsilon exactly epsilon_target
  const long double g1 = (1.0L - eps) / (l1 - static_cast<long double>(nu));
  const long double g2 = 1.0L / (l2 - static_cast<long double>(nu));
  const long double g3 = (1.0L + eps) / (l3 - static_cast<long double>(nu));

  double limit = 0.0;
  if (l2 < l3) {
    limit = single_step_factor(kappa(static_cast<double>(l1), static_cast<double>(l2),
                                     static_cast<double>(l3), nu),
                               epsilon_target);
  } else {
    limit = single_step_factor(0.0, epsilon_target);
  }

  std::vector<SharpnessResult> results;
  for (double delta : deltas) {
    if (!(delta > 0.0)) throw InvalidArgument("sharpness_probe: deltas must be positive");
    const long double mu0 = delta * d2 / (1.0L + static_cast<long double>(delta));
    const long double u_max = d3 > 0.0L ? mu0 / d3 : 0.0L;

    auto factor_at = [&](long double u) -> long double {
      const long double r = probe_step_ratio(d2, d3, mu0, u, g1, g2, g3);
      if (std::isnan(static_cast<double>(r))) return -1.0L;
      return r / static_cast<long double>(delta);
    };

    long double best_u = 0.0L, best = 0.0L;
    const int grid = 512;
    for (int s = 1; s < grid; ++s) {
      const long double u = u_max * s / grid;
      const long double f = factor_at(u);
      if (f > best) {
        best = f;
        best_u = u;
      }
    }
    // golden-section refinement around the grid maximizer
    long double lo = std::max(0.0L, best_u - u_max / grid);
    long double hi = std::min(u_max, best_u + u_max / grid);
    const long double gr = 0.6180339887498948482L;
    long double x1 = hi - gr * (hi - lo), x2 = lo + gr * (hi - lo);
    long double f1 = factor_at(x1), f2 = factor_at(x2);
    for (int it = 0; it < 120; ++it) {
      if (f1 < f2) {
        lo = x1;
        x1 = x2;
        f1 = f2;
        x2 = lo + gr * (hi - lo);
        f2 = factor_at(x2);
      } else {
        hi = x2;
        x2 = x1;
        f2 = f1;
        x1 = hi - gr * (hi - lo);
        f1 = factor_at(x1);
      }
    }
    best = std::max(best, std::max(f1, f2));

    SharpnessResult res;
    res.delta = delta;
    res.observed_factor = static_cast<double>(best);
    res.limit_factor = limit;
    results.push_back(res);
  }
  return results;
}

}  // namespace bpsdid
