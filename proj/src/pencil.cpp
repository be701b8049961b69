#include "bpsdid/pencil.hpp"

#include <cmath>
#include <string>

namespace bpsdid {

Pencil::Pencil(SparseMatrix h, SparseMatrix s) : H(std::move(h)), S(std::move(s)) {
  if (H.n() != S.n()) throw InvalidArgument("Pencil: H and S dimensions differ");
  s_is_identity = S.is_identity();
}

std::uint64_t Pencil::fingerprint() const {
  std::uint64_t h = H.fingerprint();
  return fnv1a(&h, sizeof(h), S.fingerprint());
}

double s_inner(const SparseMatrix& S, std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || static_cast<int>(x.size()) != S.n())
    throw InvalidArgument("s_inner: dimension mismatch");
  return dot(x, S.multiply(y));
}

double s_norm(const SparseMatrix& S, std::span<const double> x) {
  const double q = s_inner(S, x, x);
  if (q < 0.0) throw NumericalError("s_norm: negative S-inner product, S not positive definite");
  return std::sqrt(q);
}

double s_inv_norm(const SparseMatrix& S, std::span<const double> r, const InnerSolveConfig& cfg) {
  if (static_cast<int>(r.size()) != S.n()) throw InvalidArgument("s_inv_norm: dimension mismatch");
  if (S.is_identity()) return norm2(r);

  const double rhs_norm = norm2(r);
  if (rhs_norm == 0.0) return 0.0;

  // CG on S y = r
  const std::size_t n = r.size();
  std::vector<double> y(n, 0.0), res(r.begin(), r.end()), p(res), Sp(n);
  double res_sq = dot(res, res);
  for (int it = 0; it < cfg.max_iterations; ++it) {
    if (std::sqrt(res_sq) <= cfg.tol * rhs_norm) break;
    if (it == cfg.max_iterations - 1)
      throw NumericalError("s_inv_norm: inner solve stalled, residual " +
                           std::to_string(std::sqrt(res_sq) / rhs_norm));
    S.multiply(p, Sp);
    const double pSp = dot(p, Sp);
    if (pSp <= 0.0) throw NumericalError("s_inv_norm: S not positive definite");
    const double alpha = res_sq / pSp;
    axpy(alpha, p, y);
    axpy(-alpha, Sp, res);
    const double res_sq_new = dot(res, res);
    const double beta = res_sq_new / res_sq;
    res_sq = res_sq_new;
    for (std::size_t i = 0; i < n; ++i) p[i] = res[i] + beta * p[i];
  }
  const double q = dot(r, y);
  if (q < 0.0) throw NumericalError("s_inv_norm: negative quadratic form");
  return std::sqrt(q);
}

double rayleigh_quotient(const Pencil& p, std::span<const double> z) {
  const double denom = s_inner(p.S, z, z);
  if (denom <= 0.0) throw InvalidArgument("rayleigh_quotient: zero (or non-S-positive) vector");
  return dot(z, p.H.multiply(z)) / denom;
}

DenseMatrix s_orthonormalize(const SparseMatrix& S, const DenseMatrix& B,
                             const DenseMatrix* against, double droptol, bool allow_empty) {
  const bool s_id = S.is_identity();
  const int n = B.rows();
  if (static_cast<int>(n) != S.n()) throw InvalidArgument("s_orthonormalize: dimension mismatch");
  if (against && against->cols() > 0 && against->rows() != n)
    throw InvalidArgument("s_orthonormalize: `against` dimension mismatch");

  std::vector<std::vector<double>> kept;       // accepted columns
  std::vector<std::vector<double>> kept_s;     // S * accepted columns
  auto s_mult = [&](std::span<const double> v) {
    return s_id ? std::vector<double>(v.begin(), v.end()) : S.multiply(v);
  };

  std::vector<std::vector<double>> against_s;
  if (against)
    for (int j = 0; j < against->cols(); ++j) against_s.push_back(s_mult(against->column(j)));

  for (int j = 0; j < B.cols(); ++j) {
    std::vector<double> v = B.column_copy(j);
    const double orig = s_norm(S, v);
    if (orig == 0.0) continue;

    // two projection passes; the second is unconditional
    for (int pass = 0; pass < 2; ++pass) {
      if (against)
        for (std::size_t k = 0; k < against_s.size(); ++k)
          axpy(-dot(against_s[k], v), against->column(static_cast<int>(k)), v);
      for (std::size_t k = 0; k < kept.size(); ++k) axpy(-dot(kept_s[k], v), kept[k], v);
    }

    const double nrm = s_norm(S, v);
    if (nrm < droptol * orig) continue;  // rank reveal
    scale(1.0 / nrm, v);
    kept_s.push_back(s_mult(v));
    // renormalize the cached product scale exactly with the column
    kept.push_back(std::move(v));
  }

  if (kept.empty()) {
    if (allow_empty) return DenseMatrix(n, 0);
    throw NumericalError("s_orthonormalize: all columns dropped (empty basis)");
  }
  return DenseMatrix::from_columns(kept);
}

RitzSet rayleigh_ritz(const Pencil& p, const DenseMatrix& basis, int select_first,
                      int select_count, const DenseMatrix* against, double droptol) {
  DenseMatrix Q = s_orthonormalize(p.S, basis, against, droptol);
  const int m = Q.cols();
  if (select_first < 0 || select_count < 1 || select_first + select_count > m)
    throw NumericalError("rayleigh_ritz: selection range exceeds subspace dimension " +
                         std::to_string(m));

  DenseMatrix HQ(Q.rows(), m);
  for (int j = 0; j < m; ++j) p.H.multiply(Q.column(j), HQ.column(j));
  DenseMatrix A = Q.transpose_multiply(HQ);
  A.symmetrize();
  const SymEigResult eig = jacobi_eigen(A);

  RitzSet r;
  r.subspace_dimension = m;
  r.values.assign(eig.values.begin() + select_first,
                  eig.values.begin() + select_first + select_count);
  const DenseMatrix W = eig.vectors.slice_columns(select_first, select_count);
  r.vectors = Q.multiply(W);
  // mapped vectors inherit S-orthonormality from Q and W up to roundoff;
  // re-normalize columns so downstream S-norms are exactly 1 at acceptance
  for (int j = 0; j < r.vectors.cols(); ++j) {
    const double nrm = s_norm(p.S, r.vectors.column(j));
    if (nrm > 0.0) scale(1.0 / nrm, r.vectors.column(j));
  }
  return r;
}

}  // namespace bpsdid
