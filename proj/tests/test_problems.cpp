#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>

#include <doctest.h>

#include "bpsdid/analysis.hpp"
#include "bpsdid/problems.hpp"
#include "oracles.hpp"

using namespace bpsdid;

namespace {

SlitRectangleSpec narrow_slits(double h) {
  SlitRectangleSpec spec;
  spec.width = 1.5;
  spec.height = 1.0;
  spec.h = h;
  spec.slits = {{0.5, 0.45, 0.55}, {1.0, 0.45, 0.55}};
  return spec;
}

SlitRectangleSpec wide_slits(double h) {
  SlitRectangleSpec spec = narrow_slits(h);
  spec.slits = {{0.5, 0.1, 0.9}, {1.0, 0.1, 0.9}};
  return spec;
}

std::filesystem::path temp_file(const char* name) {
  return std::filesystem::temp_directory_path() / name;
}

}  // namespace

TEST_CASE("reference node counts are reproduced exactly") {
  CHECK(build_slit_laplacian(narrow_slits(1.0 / 80)).first.n() == 9383);
  CHECK(build_slit_laplacian(wide_slits(1.0 / 80)).first.n() == 9271);
}

TEST_CASE("unit square without slits") {
  SlitRectangleSpec spec;
  spec.width = 1.0;
  spec.height = 1.0;
  spec.h = 0.25;
  const auto [p, map] = build_slit_laplacian(spec);
  CHECK(p.n() == 9);
  const double pi = std::numbers::pi;
  const double lambda_min = 64.0 * 2.0 * std::pow(std::sin(pi / 8.0), 2);
  const auto eigs = testing::bisection_eigenvalues(testing::densify(p.H),
                                                   DenseMatrix::identity(9), 1e-11);
  CHECK(eigs[0] == doctest::Approx(lambda_min).epsilon(1e-9));
  CHECK(lambda_min == doctest::Approx(18.7451).epsilon(1e-5));
}

TEST_CASE("generated matrices are exactly symmetric with Gershgorin bounds") {
  const auto [p, map] = build_slit_laplacian(narrow_slits(1.0 / 16));
  CHECK(p.H.is_value_symmetric());
  const double h2 = 16.0 * 16.0;
  const auto offs = p.H.row_offsets();
  const auto vals = p.H.values();
  for (int i = 0; i < p.n(); ++i) {
    double diag = 0.0, off = 0.0;
    for (int k = offs[i]; k < offs[i + 1]; ++k) {
      if (p.H.col_indices()[k] == i) diag = vals[k];
      else off += std::abs(vals[k]);
    }
    CHECK(diag == 4.0 * h2);
    CHECK(diag + off <= 8.0 * h2);  // all Gershgorin discs inside [0, 8/h^2]
    CHECK(diag - off >= 0.0);
  }
}

TEST_CASE("analytic rectangle eigenvalues") {
  const auto eigs = analytic_rectangle_eigs(1.0, 1.0, 0.25, 4);
  const double pi = std::numbers::pi;
  CHECK(eigs[0] == doctest::Approx(64.0 * 2.0 * std::pow(std::sin(pi / 8.0), 2)).epsilon(1e-12));
  CHECK(eigs[1] == doctest::Approx(eigs[2]).epsilon(1e-12));  // (1,2) and (2,1) degenerate

  // matches the dense route on a 5x5 interior grid
  SlitRectangleSpec spec;
  spec.width = 1.0;
  spec.height = 1.0;
  spec.h = 1.0 / 6;
  const auto [p, map] = build_slit_laplacian(spec);
  REQUIRE(p.n() == 25);
  const auto dense = dense_oracle(p);
  const auto analytic = analytic_rectangle_eigs(1.0, 1.0, 1.0 / 6, 25);
  for (int k = 0; k < 25; ++k)
    CHECK(analytic[static_cast<std::size_t>(k)] ==
          doctest::Approx(dense.values[static_cast<std::size_t>(k)]).epsilon(1e-9));
}

TEST_CASE("refining the mesh drives the smallest eigenvalue toward the continuum limit") {
  // the 5-point stencil underestimates: lambda_min grows monotonically toward 2 pi^2
  const double continuum = 2.0 * std::numbers::pi * std::numbers::pi;
  double prev = analytic_rectangle_eigs(1.0, 1.0, 1.0 / 10, 1)[0];
  for (double h : {1.0 / 20, 1.0 / 40}) {
    const double cur = analytic_rectangle_eigs(1.0, 1.0, h, 1)[0];
    CHECK(std::abs(cur - continuum) < std::abs(prev - continuum));
    prev = cur;
  }
  CHECK(prev < continuum);
  CHECK(prev == doctest::Approx(continuum).epsilon(1e-3));
}

TEST_CASE("spec validation rejects off-grid inputs") {
  SlitRectangleSpec bad = narrow_slits(1.0 / 16);
  bad.width = 1.4142;
  CHECK_THROWS_AS(bad.validate(), InvalidArgument);
  bad = narrow_slits(1.0 / 16);
  bad.slits[0].x = 0.51;
  CHECK_THROWS_AS(bad.validate(), InvalidArgument);
  bad = narrow_slits(1.0 / 16);
  bad.slits[0].y1 = 1.2;
  CHECK_THROWS_AS(bad.validate(), InvalidArgument);
}

TEST_CASE("matrix market identity round trip") {
  const auto path = temp_file("bpsdid_test_identity.mtx");
  mm_write(SparseMatrix::identity(3), path.string());
  const SparseMatrix back = mm_read(path.string());
  CHECK(back.is_identity());
  std::filesystem::remove(path);
}

TEST_CASE("matrix market symmetric files expand to the full pattern") {
  const auto path = temp_file("bpsdid_test_sym.mtx");
  {
    std::ofstream out(path);
    out << "%%MatrixMarket matrix coordinate real symmetric\n2 2 3\n1 1 2\n2 1 1\n2 2 2\n";
  }
  const SparseMatrix A = mm_read(path.string());
  CHECK(A.nnz() == 4);
  CHECK(A.symmetric());
  CHECK(A.multiply(std::vector<double>{1, 1}) == std::vector<double>{3, 3});
  std::filesystem::remove(path);
}

TEST_CASE("slit pencil round trip is bit-identical") {
  const auto [p, map] = build_slit_laplacian(narrow_slits(1.0 / 80));
  const auto path = temp_file("bpsdid_test_slit.mtx");
  mm_write(p.H, path.string());
  const SparseMatrix back = mm_read(path.string());
  REQUIRE(back.nnz() == p.H.nnz());
  CHECK(std::equal(back.values().begin(), back.values().end(), p.H.values().begin()));
  CHECK(std::equal(back.col_indices().begin(), back.col_indices().end(),
                   p.H.col_indices().begin()));
  std::filesystem::remove(path);
}

TEST_CASE("matrix market rejects malformed input") {
  const auto path = temp_file("bpsdid_test_bad.mtx");
  {
    std::ofstream out(path);
    out << "%%MatrixMarket matrix coordinate complex general\n2 2 1\n1 1 1 0\n";
  }
  CHECK_THROWS_AS(mm_read(path.string()), InvalidArgument);
  CHECK_THROWS_AS(mm_read("/nonexistent/nope.mtx"), InvalidArgument);
  std::filesystem::remove(path);
}
