#pragma once

#include <string>
#include <vector>

#include "bpsdid/solver.hpp"

namespace bpsdid {

// %.17g — shortest round-trippable decimal for doubles in this codebase
std::string fmt_g17(double v);

// write to <path>.tmp, then rename over the destination
void atomic_write_text(const std::string& path, const std::string& content);

// One row per (outer step, column t). The wall_ms column is fixed to 0 so the
// file is a pure function of config + seed; measured timings go to the summary.
std::string trace_to_csv(const std::vector<TraceRecord>& trace);
void write_trace_csv(const std::string& path, const std::vector<TraceRecord>& trace);
std::vector<TraceRecord> read_trace_csv(const std::string& path);

PreconditionerVariant precond_variant_from_string(const std::string& s);

}  // namespace bpsdid
