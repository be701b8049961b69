#include "bpsdid/config.hpp"

#include <fstream>

#include <json.hpp>

#include "bpsdid/io.hpp"

namespace bpsdid {

using nlohmann::json;

namespace {

ShiftStrategy::Variant shift_variant_from_string(const std::string& s) {
  if (s == "fixed") return ShiftStrategy::Variant::Fixed;
  if (s == "prev_eig") return ShiftStrategy::Variant::PrevEig;
  if (s == "dynamic") return ShiftStrategy::Variant::Dynamic;
  throw InvalidArgument("unknown shift variant '" + s + "'");
}

StopCriterion stop_from_string(const std::string& s) {
  if (s == "s_inv_residual") return StopCriterion::SInvResidual;
  if (s == "relative_psi") return StopCriterion::RelativePsi;
  throw InvalidArgument("unknown stopping criterion '" + s + "'");
}

BlockSizePolicy policy_from_string(const std::string& s) {
  if (s == "fixed_window") return BlockSizePolicy::FixedWindow;
  if (s == "shrinking_tail") return BlockSizePolicy::ShrinkingTail;
  throw InvalidArgument("unknown block-size policy '" + s + "'");
}

}  // namespace

void ExperimentConfig::validate() const {
  if (schema_version != 1) throw InvalidArgument("config: unsupported schema_version");
  if (generator.has_value() == matrix_market.has_value())
    throw InvalidArgument("config: exactly one problem source required");
  if (targets < 1) throw InvalidArgument("config: targets must be >= 1");
  run.validate();
}

ExperimentConfig parse_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidArgument("config: cannot open " + path);
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw InvalidArgument(std::string("config: JSON parse error: ") + e.what());
  }

  try {
    ExperimentConfig cfg;
    cfg.schema_version = j.at("schema_version").get<int>();

    const json& prob = j.at("problem");
    if (prob.contains("generator")) {
      const json& g = prob.at("generator");
      SlitRectangleSpec spec;
      spec.width = g.at("width").get<double>();
      spec.height = g.at("height").get<double>();
      spec.h = g.at("h").get<double>();
      for (const json& s : g.value("slits", json::array())) {
        Slit slit;
        slit.x = s.at("x").get<double>();
        slit.y0 = s.at("y0").get<double>();
        slit.y1 = s.at("y1").get<double>();
        spec.slits.push_back(slit);
      }
      cfg.generator = spec;
    }
    if (prob.contains("matrix_market")) {
      MatrixMarketSource mm;
      mm.h_path = prob.at("matrix_market").at("h_path").get<std::string>();
      mm.s_path = prob.at("matrix_market").value("s_path", std::string());
      cfg.matrix_market = mm;
    }

    cfg.targets = j.value("targets", 1);

    const json& r = j.value("run", json::object());
    cfg.run.k = r.value("k", 1);
    cfg.run.k_tilde = r.value("k_tilde", cfg.run.k);
    cfg.run.policy = policy_from_string(r.value("policy", std::string("fixed_window")));
    cfg.run.max_outer_steps = r.value("max_outer_steps", 300);

    const json& sh = j.value("shift", json::object());
    cfg.run.shift.variant = shift_variant_from_string(sh.value("variant", std::string("fixed")));
    cfg.run.shift.sigma0 = sh.value("sigma0", 0.0);
    cfg.run.shift.offset = sh.value("offset", 0.0);
    cfg.run.shift.eta_threshold = sh.value("eta_threshold", 0.1);
    cfg.run.shift.res_threshold = sh.value("res_threshold", 0.1);
    cfg.run.shift.refine_tol_floor = sh.value("refine_tol_floor", 1e-12);

    const json& pc = j.value("preconditioner", json::object());
    cfg.run.precond.variant =
        precond_variant_from_string(pc.value("variant", std::string("identity")));
    cfg.run.precond.inner_tolerance = pc.value("inner_tolerance", 1e-8);
    cfg.run.precond.inner_max_iterations = pc.value("inner_max_iterations", 2000);
    cfg.run.precond.use_diagonal_inner_preconditioner =
        pc.value("use_diagonal_inner_preconditioner", false);
    cfg.run.precond.band_width_cap = pc.value("band_width_cap", 2000);

    const json& st = j.value("stopping", json::object());
    cfg.run.stop = stop_from_string(st.value("criterion", std::string("s_inv_residual")));
    cfg.run.tol = st.value("tol", 1e-8);
    cfg.run.accept_tol = st.value("accept_tol", 0.0);

    cfg.run.seed = j.value("seed", std::uint64_t{1});

    if (j.contains("analysis")) {
      const json& an = j.at("analysis");
      if (an.contains("nu")) cfg.analysis_nu = an.at("nu").get<double>();
      if (an.contains("i")) cfg.analysis_i = an.at("i").get<int>();
    }

    cfg.validate();
    return cfg;
  } catch (const json::exception& e) {
    throw InvalidArgument(std::string("config: missing or mistyped field: ") + e.what());
  }
}

Pencil load_pencil(const ExperimentConfig& cfg) {
  cfg.validate();
  if (cfg.generator) return build_slit_laplacian(*cfg.generator).first;
  SparseMatrix H = mm_read(cfg.matrix_market->h_path);
  SparseMatrix S = cfg.matrix_market->s_path.empty() ? SparseMatrix::identity(H.n())
                                                     : mm_read(cfg.matrix_market->s_path);
  return Pencil(std::move(H), std::move(S));
}

}  // namespace bpsdid
