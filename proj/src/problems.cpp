#include "bpsdid/problems.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <sstream>

namespace bpsdid {

namespace {

constexpr double kGridTol = 1e-9;

// nearest integer of a ratio that must be integral
int integral_ratio(double value, double h, const char* what) {
  const double q = value / h;
  const double r = std::round(q);
  if (std::abs(q - r) > kGridTol * std::max(1.0, std::abs(q)))
    throw InvalidArgument(std::string(what) + " is not an integer multiple of the mesh size");
  return static_cast<int>(r);
}

}  // namespace

void SlitRectangleSpec::validate() const {
  if (!(width > 0.0 && height > 0.0 && h > 0.0))
    throw InvalidArgument("SlitRectangleSpec: width, height, h must be positive");
  const int nx_cells = integral_ratio(width, h, "width");
  const int ny_cells = integral_ratio(height, h, "height");
  if (nx_cells < 2 || ny_cells < 2) throw InvalidArgument("SlitRectangleSpec: empty interior");
  for (const Slit& s : slits) {
    const int ix = integral_ratio(s.x, h, "slit x");
    if (ix < 1 || ix > nx_cells - 1)
      throw InvalidArgument("SlitRectangleSpec: slit x must be an interior grid line");
    if (!(s.y0 <= s.y1) || s.y0 <= 0.0 || s.y1 >= height)
      throw InvalidArgument("SlitRectangleSpec: slit y-range must lie within (0, height)");
  }
}

int SlitRectangleSpec::nx() const { return integral_ratio(width, h, "width") - 1; }
int SlitRectangleSpec::ny() const { return integral_ratio(height, h, "height") - 1; }

std::uint64_t GridIndexMap::fingerprint() const {
  return fnv1a(index.data(), index.size() * sizeof(int));
}

std::pair<Pencil, GridIndexMap> build_slit_laplacian(const SlitRectangleSpec& spec) {
  spec.validate();
  GridIndexMap map;
  map.nx = spec.nx();
  map.ny = spec.ny();
  map.index.assign(static_cast<std::size_t>(map.nx) * map.ny, 0);

  for (const Slit& s : spec.slits) {
    const int ix = integral_ratio(s.x, spec.h, "slit x");
    const int iy_lo = std::max(1, static_cast<int>(std::ceil(s.y0 / spec.h - kGridTol)));
    const int iy_hi = std::min(map.ny, static_cast<int>(std::floor(s.y1 / spec.h + kGridTol)));
    for (int iy = iy_lo; iy <= iy_hi; ++iy)
      map.index[static_cast<std::size_t>(ix - 1) * map.ny + (iy - 1)] = -1;
  }

  int next = 0;  // y varies fastest
  for (int ix = 1; ix <= map.nx; ++ix)
    for (int iy = 1; iy <= map.ny; ++iy) {
      auto& slot = map.index[static_cast<std::size_t>(ix - 1) * map.ny + (iy - 1)];
      if (slot == 0) slot = next++;
    }
  map.n = next;
  if (map.n == 0) throw InvalidArgument("build_slit_laplacian: all nodes removed");

  const double inv_h2 = 1.0 / (spec.h * spec.h);
  std::vector<int> rows, cols;
  std::vector<double> vals;
  for (int ix = 1; ix <= map.nx; ++ix)
    for (int iy = 1; iy <= map.ny; ++iy) {
      const int me = map.at(ix, iy);
      if (me < 0) continue;
      rows.push_back(me);
      cols.push_back(me);
      vals.push_back(4.0 * inv_h2);
      const int nb[4] = {map.at(ix - 1, iy), map.at(ix + 1, iy), map.at(ix, iy - 1),
                         map.at(ix, iy + 1)};
      for (int j : nb)
        if (j >= 0) {
          rows.push_back(me);
          cols.push_back(j);
          vals.push_back(-inv_h2);
        }
    }

  SparseMatrix H = SparseMatrix::from_triplets(map.n, rows, cols, vals, true);
  return {Pencil(std::move(H), SparseMatrix::identity(map.n)), std::move(map)};
}

std::vector<double> analytic_rectangle_eigs(double width, double height, double h, int count) {
  SlitRectangleSpec probe{width, height, h, {}};
  probe.validate();
  const int nx = probe.nx();
  const int ny = probe.ny();
  const double c = 4.0 / (h * h);
  std::vector<double> all;
  all.reserve(static_cast<std::size_t>(nx) * ny);
  for (int p = 1; p <= nx; ++p)
    for (int q = 1; q <= ny; ++q) {
      const double sx = std::sin(p * std::numbers::pi * h / (2.0 * width));
      const double sy = std::sin(q * std::numbers::pi * h / (2.0 * height));
      all.push_back(c * (sx * sx + sy * sy));
    }
  std::sort(all.begin(), all.end());
  if (count < 1 || count > static_cast<int>(all.size()))
    throw InvalidArgument("analytic_rectangle_eigs: count out of range");
  all.resize(static_cast<std::size_t>(count));
  return all;
}

SparseMatrix mm_read(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidArgument("mm_read: cannot open " + path);
  std::string line;
  if (!std::getline(in, line)) throw InvalidArgument("mm_read: empty file " + path);

  std::istringstream header(line);
  std::string banner, object, format, field, symmetry;
  header >> banner >> object >> format >> field >> symmetry;
  if (banner != "%%MatrixMarket" || object != "matrix" || format != "coordinate")
    throw InvalidArgument("mm_read: unsupported header in " + path);
  if (field != "real")
    throw InvalidArgument("mm_read: only real matrices are supported (" + path + ")");
  const bool symmetric = symmetry == "symmetric";
  if (!symmetric && symmetry != "general")
    throw InvalidArgument("mm_read: unsupported symmetry '" + symmetry + "' in " + path);

  do {
    if (!std::getline(in, line)) throw InvalidArgument("mm_read: missing size line in " + path);
  } while (!line.empty() && line[0] == '%');

  long rows = 0, cols = 0, nnz = 0;
  {
    std::istringstream sz(line);
    if (!(sz >> rows >> cols >> nnz)) throw InvalidArgument("mm_read: bad size line in " + path);
  }
  if (rows != cols) throw InvalidArgument("mm_read: matrix must be square (" + path + ")");

  std::vector<int> ri, ci;
  std::vector<double> vi;
  ri.reserve(static_cast<std::size_t>(nnz));
  ci.reserve(static_cast<std::size_t>(nnz));
  vi.reserve(static_cast<std::size_t>(nnz));
  for (long e = 0; e < nnz; ++e) {
    long i = 0, j = 0;
    double v = 0.0;
    if (!(in >> i >> j >> v)) throw InvalidArgument("mm_read: truncated entries in " + path);
    if (i < 1 || i > rows || j < 1 || j > cols)
      throw InvalidArgument("mm_read: index out of range in " + path);
    ri.push_back(static_cast<int>(i - 1));
    ci.push_back(static_cast<int>(j - 1));
    vi.push_back(v);
    if (symmetric && i != j) {
      ri.push_back(static_cast<int>(j - 1));
      ci.push_back(static_cast<int>(i - 1));
      vi.push_back(v);
    }
  }
  return SparseMatrix::from_triplets(static_cast<int>(rows), ri, ci, vi, symmetric);
}

void mm_write(const SparseMatrix& A, const std::string& path) {
  const bool symmetric = A.symmetric();
  std::ofstream out(path);
  if (!out) throw InvalidArgument("mm_write: cannot open " + path);
  out << "%%MatrixMarket matrix coordinate real "
      << (symmetric ? "symmetric" : "general") << "\n";

  const auto off = A.row_offsets();
  const auto col = A.col_indices();
  const auto val = A.values();
  std::size_t stored = 0;
  for (int i = 0; i < A.n(); ++i)
    for (int k = off[static_cast<std::size_t>(i)]; k < off[static_cast<std::size_t>(i) + 1]; ++k)
      if (!symmetric || col[static_cast<std::size_t>(k)] <= i) ++stored;

  out << A.n() << " " << A.n() << " " << stored << "\n";
  char buf[64];
  for (int i = 0; i < A.n(); ++i)
    for (int k = off[static_cast<std::size_t>(i)]; k < off[static_cast<std::size_t>(i) + 1]; ++k) {
      const int j = col[static_cast<std::size_t>(k)];
      if (symmetric && j > i) continue;
      std::snprintf(buf, sizeof(buf), "%.17g", val[static_cast<std::size_t>(k)]);
      out << (i + 1) << " " << (j + 1) << " " << buf << "\n";
    }
  if (!out) throw NumericalError("mm_write: write failure on " + path);
}

}  // namespace bpsdid
