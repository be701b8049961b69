#include "bpsdid/io.hpp"

#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

namespace bpsdid {

std::string fmt_g17(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

void atomic_write_text(const std::string& path, const std::string& content) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw InvalidArgument("atomic_write_text: cannot open " + tmp);
    out << content;
    if (!out) throw NumericalError("atomic_write_text: write failure on " + tmp);
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0)
    throw NumericalError("atomic_write_text: rename failed for " + path);
}

std::string trace_to_csv(const std::vector<TraceRecord>& trace) {
  std::ostringstream out;
  out << "run,i,step,t,theta,resnorm,sigma,precond_variant,inner_resid,switched,wall_ms\n";
  for (const TraceRecord& rec : trace) {
    for (std::size_t t = 0; t < rec.theta.size(); ++t) {
      out << rec.run << ',' << rec.i << ',' << rec.step << ',' << (t + 1) << ','
          << fmt_g17(rec.theta[t]) << ',' << fmt_g17(rec.res_norms[t]) << ','
          << fmt_g17(rec.sigma) << ',' << to_string(rec.precond_variant) << ',';
      if (t < rec.inner_residuals.size()) out << fmt_g17(rec.inner_residuals[t]);
      out << ',' << (rec.switched ? 1 : 0) << ",0\n";
    }
  }
  return out.str();
}

void write_trace_csv(const std::string& path, const std::vector<TraceRecord>& trace) {
  atomic_write_text(path, trace_to_csv(trace));
}

PreconditionerVariant precond_variant_from_string(const std::string& s) {
  if (s == "identity") return PreconditionerVariant::Identity;
  if (s == "diagonal") return PreconditionerVariant::Diagonal;
  if (s == "exact_shift_invert") return PreconditionerVariant::ExactShiftInvert;
  if (s == "inner_krylov") return PreconditionerVariant::InnerKrylov;
  if (s == "projected_inner_krylov") return PreconditionerVariant::ProjectedInnerKrylov;
  throw InvalidArgument("unknown preconditioner variant '" + s + "'");
}

std::vector<TraceRecord> read_trace_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidArgument("read_trace_csv: cannot open " + path);
  std::string line;
  if (!std::getline(in, line) || line.rfind("run,", 0) != 0)
    throw InvalidArgument("read_trace_csv: missing header in " + path);

  std::vector<TraceRecord> trace;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream row(line);
    std::string cell;
    std::vector<std::string> cells;
    while (std::getline(row, cell, ',')) cells.push_back(cell);
    if (cells.size() < 11) throw InvalidArgument("read_trace_csv: short row in " + path);

    const int run = std::stoi(cells[0]);
    const int i = std::stoi(cells[1]);
    const int step = std::stoi(cells[2]);
    const int t = std::stoi(cells[3]);

    if (trace.empty() || trace.back().run != run || trace.back().step != step || t == 1) {
      TraceRecord rec;
      rec.run = run;
      rec.i = i;
      rec.step = step;
      rec.sigma = std::stod(cells[6]);
      rec.precond_variant = precond_variant_from_string(cells[7]);
      rec.switched = cells[9] == "1";
      rec.wall_ms = std::stod(cells[10]);
      trace.push_back(std::move(rec));
    }
    TraceRecord& rec = trace.back();
    if (t != static_cast<int>(rec.theta.size()) + 1)
      throw InvalidArgument("read_trace_csv: non-contiguous t index in " + path);
    rec.theta.push_back(std::stod(cells[4]));
    rec.res_norms.push_back(std::stod(cells[5]));
    if (!cells[8].empty()) rec.inner_residuals.push_back(std::stod(cells[8]));
  }
  return trace;
}

}  // namespace bpsdid
