#pragma once

#include <map>
#include <string>
#include <utility>
#include <vector>

#include "bpsdid/pencil.hpp"

namespace bpsdid {

struct Slit {
  double x = 0.0;   // vertical slit at this x, must lie on a grid line
  double y0 = 0.0;  // inclusive endpoints; nodes on [y0, y1] are removed
  double y1 = 0.0;
};

struct SlitRectangleSpec {
  double width = 1.0;
  double height = 1.0;
  double h = 0.25;
  std::vector<Slit> slits;

  void validate() const;
  int nx() const;  // interior nodes per x row
  int ny() const;
};

// Interior grid nodes (ix, iy), 1-based grid coordinates, y varying fastest.
struct GridIndexMap {
  int nx = 0;
  int ny = 0;
  std::vector<int> index;  // (ix-1)*ny + (iy-1) -> matrix index, -1 if removed
  int n = 0;               // retained node count

  int at(int ix, int iy) const {
    if (ix < 1 || ix > nx || iy < 1 || iy > ny) return -1;
    return index[static_cast<std::size_t>(ix - 1) * ny + (iy - 1)];
  }
  std::uint64_t fingerprint() const;
};

// 5-point Laplacian on the slit rectangle, Dirichlet on the outer boundary and
// on every slit node; S = I.
std::pair<Pencil, GridIndexMap> build_slit_laplacian(const SlitRectangleSpec& spec);

// Separable eigenvalues of the no-slit discrete Laplacian, ascending.
std::vector<double> analytic_rectangle_eigs(double width, double height, double h, int count);

SparseMatrix mm_read(const std::string& path);
void mm_write(const SparseMatrix& A, const std::string& path);

}  // namespace bpsdid
