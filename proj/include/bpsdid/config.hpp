#pragma once

#include <optional>
#include <string>

#include "bpsdid/problems.hpp"
#include "bpsdid/solver.hpp"

namespace bpsdid {

struct MatrixMarketSource {
  std::string h_path;
  std::string s_path;  // empty means S = I
};

struct ExperimentConfig {
  int schema_version = 1;
  std::optional<SlitRectangleSpec> generator;
  std::optional<MatrixMarketSource> matrix_market;
  int targets = 1;
  RunConfig run;
  // analysis knobs; nu defaults to the run shift when absent
  std::optional<double> analysis_nu;
  std::optional<int> analysis_i;

  void validate() const;
};

ExperimentConfig parse_config_file(const std::string& path);
Pencil load_pencil(const ExperimentConfig& cfg);

}  // namespace bpsdid
