#include <cmath>
#include <numbers>
#include <vector>

#include <doctest.h>

#include "bpsdid/pencil.hpp"
#include "bpsdid/problems.hpp"
#include "oracles.hpp"

using namespace bpsdid;

namespace {

Pencil diag_pencil(const std::vector<double>& h, const std::vector<double>& s) {
  return Pencil(SparseMatrix::diagonal(h), SparseMatrix::diagonal(s));
}

}  // namespace

TEST_CASE("spmv identity and diagonal") {
  const SparseMatrix I = SparseMatrix::identity(3);
  CHECK(I.multiply(std::vector<double>{1, 2, 3}) == std::vector<double>{1, 2, 3});
  const SparseMatrix D = SparseMatrix::diagonal({2, 4});
  CHECK(D.multiply(std::vector<double>{1, 1}) == std::vector<double>{2, 4});
}

TEST_CASE("spmv reproduces the analytic stencil eigenvalue on the unit square") {
  const double h = 0.25;
  SlitRectangleSpec spec;
  spec.width = 1.0;
  spec.height = 1.0;
  spec.h = h;
  const auto [p, map] = build_slit_laplacian(spec);
  REQUIRE(p.n() == 9);

  // discrete sine mode p = q = 1 is an exact eigenvector of the 5-point stencil
  const double pi = std::numbers::pi;
  std::vector<double> mode(static_cast<std::size_t>(p.n()));
  for (int ix = 1; ix <= map.nx; ++ix)
    for (int iy = 1; iy <= map.ny; ++iy)
      mode[static_cast<std::size_t>(map.at(ix, iy))] =
          std::sin(pi * ix * h) * std::sin(pi * iy * h);
  const double lambda = (4.0 / (h * h)) * 2.0 * std::pow(std::sin(pi * h / 2.0), 2);
  const std::vector<double> y = p.H.multiply(mode);
  for (int i = 0; i < p.n(); ++i)
    CHECK(y[static_cast<std::size_t>(i)] ==
          doctest::Approx(lambda * mode[static_cast<std::size_t>(i)]).epsilon(1e-12));
}

TEST_CASE("spmv is deterministic") {
  SlitRectangleSpec spec;
  spec.width = 1.0;
  spec.height = 1.0;
  spec.h = 0.125;
  const auto [p, map] = build_slit_laplacian(spec);
  Rng rng(3);
  std::vector<double> x(static_cast<std::size_t>(p.n()));
  for (auto& v : x) v = rng.next_symmetric();
  const std::vector<double> y1 = p.H.multiply(x);
  const std::vector<double> y2 = p.H.multiply(x);
  CHECK(y1 == y2);
}

TEST_CASE("s_inner basics") {
  const SparseMatrix I = SparseMatrix::identity(2);
  const std::vector<double> v{3, 4};
  CHECK(s_inner(I, v, v) == 25.0);
  const SparseMatrix D = SparseMatrix::diagonal({4, 1});
  const std::vector<double> e1{1, 0};
  CHECK(s_inner(D, e1, e1) == 4.0);
  const SparseMatrix twoI = SparseMatrix::diagonal({2, 2});
  CHECK(s_inner(twoI, std::vector<double>{1, 1}, std::vector<double>{1, -1}) == 0.0);
}

TEST_CASE("s_inv_norm basics") {
  CHECK(s_inv_norm(SparseMatrix::identity(2), std::vector<double>{3, 4}) == 5.0);
  CHECK(s_inv_norm(SparseMatrix::diagonal({4, 1}), std::vector<double>{2, 0}) ==
        doctest::Approx(1.0).epsilon(1e-12));
  CHECK(s_inv_norm(SparseMatrix::diagonal({2, 2}), std::vector<double>{2, 0}) ==
        doctest::Approx(std::sqrt(2.0)).epsilon(1e-12));
}

TEST_CASE("s_orthonormalize basics") {
  const SparseMatrix I = SparseMatrix::identity(2);
  DenseMatrix B = DenseMatrix::from_columns({{1, 0}, {1, 1}});
  const DenseMatrix Q = s_orthonormalize(I, B);
  REQUIRE(Q.cols() == 2);
  CHECK(Q(0, 0) == doctest::Approx(1.0));
  CHECK(std::abs(Q(1, 1)) == doctest::Approx(1.0));
  CHECK(Q(1, 0) == doctest::Approx(0.0));

  const SparseMatrix D = SparseMatrix::diagonal({4, 1});
  const DenseMatrix Qd = s_orthonormalize(D, DenseMatrix::from_columns({{1, 0}}));
  CHECK(Qd(0, 0) == doctest::Approx(0.5));

  const DenseMatrix Qr = s_orthonormalize(I, DenseMatrix::from_columns({{1, 0}, {1, 0}}));
  CHECK(Qr.cols() == 1);
}

TEST_CASE("s_orthonormalize keeps the Gram matrix near identity on ill-conditioned input") {
  // columns nearly parallel: Gram condition number around 1e8
  const int n = 20;
  const SparseMatrix I = SparseMatrix::identity(n);
  Rng rng(11);
  DenseMatrix B(n, 3);
  for (int i = 0; i < n; ++i) B(i, 0) = rng.next_symmetric();
  for (int j = 1; j < 3; ++j)
    for (int i = 0; i < n; ++i) B(i, j) = B(i, 0) + 1e-4 * rng.next_symmetric();
  const DenseMatrix Q = s_orthonormalize(I, B);
  REQUIRE(Q.cols() == 3);
  DenseMatrix G = Q.transpose_multiply(Q);
  for (int j = 0; j < 3; ++j) G(j, j) -= 1.0;
  CHECK(G.frobenius_norm() <= 1e-10);
}

TEST_CASE("jacobi_eigen basics") {
  DenseMatrix Ad(3, 3);
  Ad(0, 0) = 3;
  Ad(1, 1) = 1;
  Ad(2, 2) = 2;
  const auto d = jacobi_eigen(Ad);
  CHECK(d.values == std::vector<double>{1, 2, 3});

  DenseMatrix flip(2, 2);
  flip(0, 1) = flip(1, 0) = 1.0;
  const auto f = jacobi_eigen(flip);
  CHECK(f.values[0] == doctest::Approx(-1.0));
  CHECK(f.values[1] == doctest::Approx(1.0));
}

TEST_CASE("jacobi_eigen matches the inertia-bisection oracle on a random symmetric 5x5") {
  Rng rng(42);
  DenseMatrix A(5, 5);
  for (int j = 0; j < 5; ++j)
    for (int i = 0; i <= j; ++i) A(i, j) = A(j, i) = rng.next_symmetric();
  const auto got = jacobi_eigen(A);
  const auto expected = testing::bisection_eigenvalues(A, DenseMatrix::identity(5));
  for (int k = 0; k < 5; ++k)
    CHECK(got.values[static_cast<std::size_t>(k)] ==
          doctest::Approx(expected[static_cast<std::size_t>(k)]).epsilon(1e-10));
}

TEST_CASE("rayleigh_quotient basics") {
  const Pencil p1 = diag_pencil({2, 3}, {1, 1});
  CHECK(rayleigh_quotient(p1, std::vector<double>{1, 0}) == 2.0);
  const Pencil p2 = diag_pencil({2, 6}, {1, 2});
  CHECK(rayleigh_quotient(p2, std::vector<double>{0, 1}) == 3.0);
  CHECK_THROWS_AS(rayleigh_quotient(p1, std::vector<double>{0, 0}), InvalidArgument);
}

TEST_CASE("rayleigh_ritz selects from the spanned subspace") {
  const Pencil p = diag_pencil({1, 2, 3}, {1, 1, 1});

  const auto one = rayleigh_ritz(p, DenseMatrix::from_columns({{1, 0, 0}, {0, 1, 0}}), 0, 1);
  CHECK(one.values == std::vector<double>{1.0});
  CHECK(std::abs(one.vectors(0, 0)) == doctest::Approx(1.0));

  const auto two = rayleigh_ritz(p, DenseMatrix::from_columns({{1, 0, 1}, {1, 0, -1}}), 0, 2);
  CHECK(two.values[0] == doctest::Approx(1.0));
  CHECK(two.values[1] == doctest::Approx(3.0));

  CHECK_THROWS_AS(rayleigh_ritz(p, DenseMatrix::from_columns({{1, 0, 0}}), 0, 2),
                  NumericalError);
}

TEST_CASE("rayleigh_ritz on a full basis reproduces the pencil eigenvalues") {
  const int n = 8;
  Rng rng(5);
  DenseMatrix Hd(n, n), Sd(n, n);
  for (int j = 0; j < n; ++j) {
    for (int i = 0; i <= j; ++i) Hd(i, j) = Hd(j, i) = rng.next_symmetric();
    Sd(j, j) = 1.5 + rng.next_double();
  }
  std::vector<int> rows, cols;
  std::vector<double> hv, sv;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      rows.push_back(i);
      cols.push_back(j);
      hv.push_back(Hd(i, j));
      sv.push_back(Sd(i, j));
    }
  const Pencil p(SparseMatrix::from_triplets(n, rows, cols, hv, true),
                 SparseMatrix::from_triplets(n, rows, cols, sv, true));

  const auto ritz = rayleigh_ritz(p, DenseMatrix::identity(n), 0, n);
  const auto expected = testing::bisection_eigenvalues(Hd, Sd);
  for (int k = 0; k < n; ++k)
    CHECK(ritz.values[static_cast<std::size_t>(k)] ==
          doctest::Approx(expected[static_cast<std::size_t>(k)]).epsilon(1e-10));

  // S-orthonormality and H-diagonality of the Ritz basis
  DenseMatrix SV(n, n);
  for (int j = 0; j < n; ++j) SV.set_column(j, p.S.multiply(ritz.vectors.column(j)));
  DenseMatrix G = ritz.vectors.transpose_multiply(SV);
  for (int j = 0; j < n; ++j) G(j, j) -= 1.0;
  CHECK(G.frobenius_norm() <= 1e-10);
  DenseMatrix HV(n, n);
  for (int j = 0; j < n; ++j) HV.set_column(j, p.H.multiply(ritz.vectors.column(j)));
  const DenseMatrix P = ritz.vectors.transpose_multiply(HV);
  double theta_max = 0.0;
  for (double v : ritz.values) theta_max = std::max(theta_max, std::abs(v));
  CHECK(P.off_diagonal_frobenius() <= 1e-8 * theta_max);
}

TEST_CASE("Ritz values of any subspace stay within the spectrum") {
  const int n = 10;
  std::vector<double> diag(n);
  for (int i = 0; i < n; ++i) diag[static_cast<std::size_t>(i)] = i + 1.0;
  const Pencil p = diag_pencil(diag, std::vector<double>(n, 1.0));
  Rng rng(9);
  DenseMatrix B(n, 4);
  for (int j = 0; j < 4; ++j)
    for (int i = 0; i < n; ++i) B(i, j) = rng.next_symmetric();
  const auto ritz = rayleigh_ritz(p, B, 0, 4);
  for (double v : ritz.values) {
    CHECK(v >= 1.0 - 1e-10);
    CHECK(v <= n + 1e-10);
  }
}
