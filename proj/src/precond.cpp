#include "bpsdid/precond.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <functional>

namespace bpsdid {

std::string to_string(PreconditionerVariant v) {
  switch (v) {
    case PreconditionerVariant::Identity: return "identity";
    case PreconditionerVariant::Diagonal: return "diagonal";
    case PreconditionerVariant::ExactShiftInvert: return "exact_shift_invert";
    case PreconditionerVariant::InnerKrylov: return "inner_krylov";
    case PreconditionerVariant::ProjectedInnerKrylov: return "projected_inner_krylov";
  }
  return "unknown";
}

void PreconditionerSpec::validate() const {
  if (!(inner_tolerance > 0.0 && inner_tolerance < 1.0))
    throw InvalidArgument("PreconditionerSpec: inner tolerance must lie in (0,1)");
  if (inner_max_iterations < 1)
    throw InvalidArgument("PreconditionerSpec: inner max iterations must be >= 1");
  if (!std::isfinite(sigma)) throw InvalidArgument("PreconditionerSpec: shift must be finite");
}

namespace {

// Accumulates H - sigma*S into band storage. Returns the pattern bandwidth.
int shifted_band_width(const SparseMatrix& H, const SparseMatrix& S) {
  return std::max(H.band_width(), S.band_width());
}

std::vector<double> shifted_diagonal(const Pencil& p, double sigma) {
  std::vector<double> d(static_cast<std::size_t>(p.n()), 0.0);
  auto accumulate = [&](const SparseMatrix& A, double coeff) {
    const auto off = A.row_offsets();
    const auto col = A.col_indices();
    const auto val = A.values();
    for (int i = 0; i < A.n(); ++i)
      for (int k = off[static_cast<std::size_t>(i)]; k < off[static_cast<std::size_t>(i) + 1]; ++k)
        if (col[static_cast<std::size_t>(k)] == i)
          d[static_cast<std::size_t>(i)] += coeff * val[static_cast<std::size_t>(k)];
  };
  accumulate(p.H, 1.0);
  accumulate(p.S, -sigma);
  return d;
}

void scatter_shifted(const SparseMatrix& A, double coeff, std::vector<double>& ab,
                     int ldab, int kl, int ku) {
  const auto off = A.row_offsets();
  const auto col = A.col_indices();
  const auto val = A.values();
  for (int i = 0; i < A.n(); ++i)
    for (int k = off[static_cast<std::size_t>(i)]; k < off[static_cast<std::size_t>(i) + 1]; ++k) {
      const int j = col[static_cast<std::size_t>(k)];
      ab[static_cast<std::size_t>(j) * ldab + (kl + ku + i - j)] += coeff * val[static_cast<std::size_t>(k)];
    }
}

}  // namespace

void BandFactorization::factor(const SparseMatrix& H, const SparseMatrix& S, double sigma) {
  n = H.n();
  bw = shifted_band_width(H, S);
  const int kl = bw, ku = bw;
  const int ldab = 2 * kl + ku + 1;  // 3*bw + 1
  ab.assign(static_cast<std::size_t>(ldab) * n, 0.0);
  pivots.assign(static_cast<std::size_t>(n), 0);

  scatter_shifted(H, 1.0, ab, ldab, kl, ku);
  scatter_shifted(S, -sigma, ab, ldab, kl, ku);

  auto at = [&](int i, int j) -> double& {
    return ab[static_cast<std::size_t>(j) * ldab + (kl + ku + i - j)];
  };

  for (int j = 0; j < n; ++j) {
    const int km = std::min(kl, n - 1 - j);
    int jp = 0;
    double pmax = std::abs(at(j, j));
    for (int i = 1; i <= km; ++i) {
      const double v = std::abs(at(j + i, j));
      if (v > pmax) {
        pmax = v;
        jp = i;
      }
    }
    pivots[static_cast<std::size_t>(j)] = j + jp;
    if (pmax == 0.0)
      throw NumericalError("BandFactorization: zero pivot, shift coincides with an eigenvalue");
    const int jc_end = std::min(j + kl + ku, n - 1);
    if (jp != 0)
      for (int c = j; c <= jc_end; ++c) std::swap(at(j, c), at(j + jp, c));
    const double piv = at(j, j);
    for (int i = 1; i <= km; ++i) at(j + i, j) /= piv;
    for (int c = j + 1; c <= jc_end; ++c) {
      const double f = at(j, c);
      if (f == 0.0) continue;
      for (int i = 1; i <= km; ++i) at(j + i, c) -= at(j + i, j) * f;
    }
  }
}

void BandFactorization::solve(std::span<double> b) const {
  if (static_cast<int>(b.size()) != n) throw InvalidArgument("BandFactorization::solve: length mismatch");
  const int kl = bw, ku = bw;
  const int ldab = 2 * kl + ku + 1;
  auto at = [&](int i, int j) -> double {
    return ab[static_cast<std::size_t>(j) * ldab + (kl + ku + i - j)];
  };
  for (int j = 0; j < n; ++j) {
    const int p = pivots[static_cast<std::size_t>(j)];
    if (p != j) std::swap(b[static_cast<std::size_t>(j)], b[static_cast<std::size_t>(p)]);
    const int km = std::min(kl, n - 1 - j);
    const double bj = b[static_cast<std::size_t>(j)];
    for (int i = 1; i <= km; ++i) b[static_cast<std::size_t>(j + i)] -= at(j + i, j) * bj;
  }
  for (int j = n - 1; j >= 0; --j) {
    double s = b[static_cast<std::size_t>(j)] / at(j, j);
    b[static_cast<std::size_t>(j)] = s;
    const int i0 = std::max(0, j - kl - ku);
    for (int i = i0; i < j; ++i) b[static_cast<std::size_t>(i)] -= at(i, j) * s;
  }
}

MinresResult minres(const std::function<void(std::span<const double>, std::span<double>)>& op,
                    std::span<const double> b, std::span<double> x, double tol,
                    int max_iterations, const std::vector<double>* diag_precond) {
  const std::size_t n = b.size();
  std::fill(x.begin(), x.end(), 0.0);
  MinresResult result;

  auto precondition = [&](const std::vector<double>& v) {
    std::vector<double> y(v);
    if (diag_precond)
      for (std::size_t i = 0; i < n; ++i) y[i] /= (*diag_precond)[i];
    return y;
  };

  std::vector<double> r1(b.begin(), b.end());
  std::vector<double> y = precondition(r1);
  const double beta1_sq = dot(r1, y);
  if (beta1_sq <= 0.0) {
    result.converged = norm2(b) == 0.0;
    return result;
  }
  const double beta1 = std::sqrt(beta1_sq);

  double oldb = 0.0, beta = beta1, dbar = 0.0, epsln = 0.0, phibar = beta1;
  double cs = -1.0, sn = 0.0;
  std::vector<double> r2(r1), w(n, 0.0), w1(n, 0.0), w2(n, 0.0), v(n), av(n);

  for (int itn = 1; itn <= max_iterations; ++itn) {
    const double s = 1.0 / beta;
    for (std::size_t i = 0; i < n; ++i) v[i] = s * y[i];
    op(v, av);
    std::vector<double> ynew(av);
    if (itn >= 2) axpy(-beta / oldb, r1, ynew);
    const double alfa = dot(v, ynew);
    axpy(-alfa / beta, r2, ynew);
    r1 = r2;
    r2 = std::move(ynew);
    y = precondition(r2);
    oldb = beta;
    const double beta_sq = dot(r2, y);
    if (beta_sq < 0.0) throw NumericalError("minres: inner preconditioner not positive definite");
    beta = std::sqrt(beta_sq);

    const double oldeps = epsln;
    const double delta = cs * dbar + sn * alfa;
    const double gbar = sn * dbar - cs * alfa;
    epsln = sn * beta;
    dbar = -cs * beta;
    double gamma = std::sqrt(gbar * gbar + beta * beta);
    gamma = std::max(gamma, 1e-300);
    cs = gbar / gamma;
    sn = beta / gamma;
    const double phi = cs * phibar;
    phibar = sn * phibar;

    w1 = w2;
    w2 = w;
    for (std::size_t i = 0; i < n; ++i)
      w[i] = (v[i] - oldeps * w1[i] - delta * w2[i]) / gamma;
    axpy(phi, w, x);

    result.iterations = itn;
    result.relative_residual = phibar / beta1;
    if (result.relative_residual <= tol) {
      result.converged = true;
      break;
    }
  }

  // record the true relative residual, not the recurrence estimate
  const double bnorm = norm2(b);
  if (bnorm > 0.0) {
    op(x, av);
    for (std::size_t i = 0; i < n; ++i) av[i] -= b[i];
    result.relative_residual = norm2(av) / bnorm;
    result.converged = result.relative_residual <= tol;
  }
  return result;
}

Preconditioner Preconditioner::build(const PreconditionerSpec& spec, const Pencil& p) {
  spec.validate();
  Preconditioner K;
  K.spec_ = spec;
  K.pencil_ = &p;

  switch (spec.variant) {
    case PreconditionerVariant::Identity:
      break;
    case PreconditionerVariant::Diagonal: {
      std::vector<double> d = shifted_diagonal(p, spec.sigma);
      for (double& v : d) {
        if (v == 0.0) throw NumericalError("Preconditioner: zero diagonal entry in H - sigma S");
        v = 1.0 / v;
      }
      K.shifted_diag_inverse_ = std::move(d);
      break;
    }
    case PreconditionerVariant::ExactShiftInvert: {
      const int bw = std::max(p.H.band_width(), p.S.band_width());
      if (bw > spec.band_width_cap)
        throw NumericalError("Preconditioner: bandwidth " + std::to_string(bw) +
                             " exceeds cap; use the InnerKrylov variant");
      auto band = std::make_shared<BandFactorization>();
      band->factor(p.H, p.S, spec.sigma);
      K.band_ = std::move(band);
      break;
    }
    case PreconditionerVariant::InnerKrylov:
    case PreconditionerVariant::ProjectedInnerKrylov: {
      if (spec.use_diagonal_inner_preconditioner) {
        std::vector<double> d = shifted_diagonal(p, spec.sigma);
        for (double& v : d) v = std::abs(v) > 0.0 ? std::abs(v) : 1.0;
        K.inner_diag_ = std::move(d);
      }
      break;
    }
  }
  return K;
}

std::vector<double> Preconditioner::apply(std::span<const double> r, ApplyStats* stats) const {
  const Pencil& p = *pencil_;
  if (static_cast<int>(r.size()) != p.n()) throw InvalidArgument("Preconditioner::apply: dimension mismatch");

  switch (spec_.variant) {
    case PreconditionerVariant::Identity:
      return {r.begin(), r.end()};
    case PreconditionerVariant::Diagonal: {
      std::vector<double> y(r.begin(), r.end());
      for (std::size_t i = 0; i < y.size(); ++i) y[i] *= shifted_diag_inverse_[i];
      return y;
    }
    case PreconditionerVariant::ExactShiftInvert: {
      std::vector<double> y(r.begin(), r.end());
      band_->solve(y);
      return y;
    }
    case PreconditionerVariant::InnerKrylov: {
      std::vector<double> y(static_cast<std::size_t>(p.n()), 0.0);
      std::vector<double> sx(static_cast<std::size_t>(p.n()));
      auto op = [&](std::span<const double> x, std::span<double> out) {
        p.H.multiply(x, out);
        p.S.multiply(x, sx);
        for (std::size_t i = 0; i < sx.size(); ++i) out[i] -= spec_.sigma * sx[i];
      };
      const MinresResult res =
          minres(op, r, y, spec_.inner_tolerance, spec_.inner_max_iterations,
                 inner_diag_.empty() ? nullptr : &inner_diag_);
      if (stats) {
        stats->inner_residuals.push_back(res.relative_residual);
        if (!res.converged) stats->hit_max_iterations = true;
      }
      return y;
    }
    case PreconditionerVariant::ProjectedInnerKrylov:
      throw InvalidArgument(
          "Preconditioner::apply: projected variant needs deflation context (projected_solve)");
  }
  throw InvalidArgument("Preconditioner::apply: unknown variant");
}

DenseMatrix Preconditioner::apply(const DenseMatrix& R, ApplyStats* stats) const {
  DenseMatrix P(R.rows(), R.cols());
  for (int j = 0; j < R.cols(); ++j) {
    const std::vector<double> col = apply(R.column(j), stats);
    P.set_column(j, col);
  }
  return P;
}

std::vector<double> projected_solve(const Pencil& p, const DenseMatrix& U,
                                    std::span<const double> z, double sigma,
                                    std::span<const double> r, double tol,
                                    int max_iterations) {
  const int n = p.n();
  if (static_cast<int>(z.size()) != n || static_cast<int>(r.size()) != n)
    throw InvalidArgument("projected_solve: dimension mismatch");

  // B = [U, z], assumed S-orthonormal
  DenseMatrix B(n, U.cols() + 1);
  for (int j = 0; j < U.cols(); ++j) B.set_column(j, U.column(j));
  B.set_column(U.cols(), z);
  DenseMatrix SB(n, B.cols());
  for (int j = 0; j < B.cols(); ++j) p.S.multiply(B.column(j), SB.column(j));

  auto project_right = [&](std::span<double> v) {  // v <- (I - B B^T S) v
    for (int j = 0; j < B.cols(); ++j) axpy(-dot(SB.column(j), v), B.column(j), v);
  };
  auto project_left = [&](std::span<double> v) {  // v <- (I - S B B^T) v
    for (int j = 0; j < B.cols(); ++j) axpy(-dot(B.column(j), v), SB.column(j), v);
  };

  std::vector<double> rhs(r.begin(), r.end());
  project_left(rhs);
  std::vector<double> y(static_cast<std::size_t>(n), 0.0);
  if (norm2(rhs) == 0.0) return y;

  std::vector<double> tmp(static_cast<std::size_t>(n)), sx(static_cast<std::size_t>(n));
  auto op = [&](std::span<const double> x, std::span<double> out) {
    std::copy(x.begin(), x.end(), tmp.begin());
    project_right(tmp);
    p.H.multiply(tmp, out);
    p.S.multiply(tmp, sx);
    for (std::size_t i = 0; i < sx.size(); ++i) out[i] -= sigma * sx[i];
    project_left(out);
  };

  const MinresResult res = minres(op, rhs, y, tol, max_iterations);
  if (!res.converged)
    throw NumericalError("projected_solve: no convergence, achieved residual " +
                         std::to_string(res.relative_residual));
  project_right(y);
  project_right(y);  // keeps the complement contract tight after roundoff
  return y;
}

}  // namespace bpsdid
