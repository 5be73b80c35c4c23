#pragma once

// Experiment configuration: one JSON document describing the problem data,
// where C_N comes from, the solver settings and what to report. Unknown keys
// are rejected so that typos cannot silently fall back to defaults.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "quadgrad/constants.hpp"
#include "quadgrad/errors.hpp"
#include "quadgrad/sobolev.hpp"
#include "quadgrad/solver.hpp"

namespace quadgrad {

using json = nlohmann::json;

/// Scalar data given by a catalog expression or a CSV file.
///
///   constant            value
///   coordinate_product  value · Π x_k
///   sine_bump           value · Π sin(π x_k / L_k)
///   file                values read from `path` (relative to the config)
struct FieldSpec {
  std::string kind = "constant";
  double value = 0.0;
  std::filesystem::path path;
};

struct MatrixSpec {
  std::string kind = "identity";  ///< identity | constant | isotropic
  std::vector<std::vector<double>> entries;
  FieldSpec coefficient;  ///< isotropic: A = c(x) I
};

struct HSpec {
  std::string kind = "zero";  ///< zero | shape_times_quadratic | mu_gradsq
  std::string shape = "sign";
  double beta = 0.0;
  double scale = 1.0;
  FieldSpec mu;
};

struct GridSpec {
  int dim = 1;
  std::vector<double> extents;
  std::vector<int> n;
};

struct DeclaredNorms {
  std::optional<double> f_n2;
  std::optional<double> f_hm1;
  std::optional<double> a0_n2;
  std::optional<double> a0_q;
};

struct ConstantsSpec {
  std::optional<double> literature;  ///< "literature:<value>"; estimate otherwise
  double tol = 1e-12;
  SobolevOptions sobolev;

  [[nodiscard]] std::string source() const {
    return literature ? "literature:" + detail::fmt(*literature) : "estimate";
  }
};

struct SolverSpec {
  SolverConfig base;
  bool delta_from_delta0 = true;
  bool lower_zero_ball = false;
};

struct SweepSpec {
  std::string kind = "delta";  ///< delta | norm
  int points = 50;
  std::vector<double> f_scales;
  std::vector<double> a0_scales;
};

struct ExperimentConfig {
  std::uint64_t seed = 0;
  std::optional<GridSpec> grid;
  Exponents exponents;
  double alpha = 1.0;
  double gamma = 1.0;
  double c0 = 0.0;
  MatrixSpec a;
  FieldSpec f;
  FieldSpec a0;
  HSpec h;
  DeclaredNorms declared;
  ConstantsSpec constants;
  SolverSpec solver;
  std::vector<double> n_ladder;
  std::vector<double> y_deltas;
  SweepSpec sweep;
  std::filesystem::path base_dir;
};

namespace detail {

inline void check_keys(const json& j, const std::string& where,
                       std::initializer_list<const char*> allowed) {
  if (!j.is_object()) throw config_error(where + ": expected an object");
  const std::set<std::string> ok(allowed.begin(), allowed.end());
  for (const auto& [key, _] : j.items()) {
    if (!ok.count(key)) throw config_error(where + ": unknown key '" + key + "'");
  }
}

inline double get_number(const json& j, const std::string& key, const std::string& where) {
  if (!j.contains(key)) throw config_error(where + ": missing '" + key + "'");
  const json& v = j.at(key);
  if (!v.is_number()) throw config_error(where + "." + key + ": expected a number");
  const double x = v.get<double>();
  if (!std::isfinite(x)) throw config_error(where + "." + key + ": must be finite");
  return x;
}

inline double get_number(const json& j, const std::string& key, const std::string& where,
                         double fallback) {
  return j.contains(key) ? get_number(j, key, where) : fallback;
}

inline int get_int(const json& j, const std::string& key, const std::string& where, int fallback) {
  if (!j.contains(key)) return fallback;
  const json& v = j.at(key);
  if (!v.is_number_integer()) throw config_error(where + "." + key + ": expected an integer");
  return v.get<int>();
}

inline std::vector<double> get_numbers(const json& j, const std::string& key,
                                       const std::string& where) {
  std::vector<double> out;
  if (!j.contains(key)) return out;
  const json& v = j.at(key);
  if (!v.is_array()) throw config_error(where + "." + key + ": expected an array");
  for (const auto& x : v) {
    if (!x.is_number()) throw config_error(where + "." + key + ": expected numbers");
    out.push_back(x.get<double>());
  }
  return out;
}

inline std::string get_string(const json& j, const std::string& key, const std::string& where,
                              const std::string& fallback) {
  if (!j.contains(key)) return fallback;
  const json& v = j.at(key);
  if (!v.is_string()) throw config_error(where + "." + key + ": expected a string");
  return v.get<std::string>();
}

inline FieldSpec parse_field(const json& j, const std::string& where) {
  check_keys(j, where, {"kind", "value", "path"});
  FieldSpec f;
  f.kind = get_string(j, "kind", where, "constant");
  if (f.kind == "file") {
    f.path = get_string(j, "path", where, "");
    if (f.path.empty()) throw config_error(where + ": file field needs 'path'");
  } else if (f.kind == "constant" || f.kind == "coordinate_product" || f.kind == "sine_bump") {
    f.value = get_number(j, "value", where);
  } else {
    throw config_error(where + ": unknown field kind '" + f.kind + "'");
  }
  return f;
}

inline Exponents parse_exponents(const json& j, const std::string& where) {
  check_keys(j, where, {"N", "q", "sobolev", "f_norm"});
  const double q = get_number(j, "q", where);
  try {
    if (j.contains("N")) {
      if (j.contains("sobolev") || j.contains("f_norm")) {
        throw config_error(where + ": give either N or the pair (sobolev, f_norm)");
      }
      const int n = get_int(j, "N", where, 0);
      Exponents e = Exponents::for_dimension(n, q);
      (void)e.theta();
      return e;
    }
    Exponents e = Exponents::custom(get_number(j, "sobolev", where),
                                    get_number(j, "f_norm", where), q);
    (void)e.theta();
    return e;
  } catch (const exponent_out_of_range& e) {
    throw config_error(where + ": " + e.what());
  }
}

}  // namespace detail

inline ExperimentConfig parse_config(const json& root, const std::filesystem::path& base_dir = {}) {
  using namespace detail;
  ExperimentConfig c;
  c.base_dir = base_dir;
  check_keys(root, "config", {"seed", "problem", "constants", "solver", "report", "description"});
  if (root.contains("seed")) {
    if (!root["seed"].is_number_unsigned()) throw config_error("config.seed: expected a u64");
    c.seed = root["seed"].get<std::uint64_t>();
  }
  if (!root.contains("problem")) throw config_error("config: missing 'problem'");
  const json& p = root["problem"];
  check_keys(p, "problem",
             {"grid", "exponents", "alpha", "gamma", "c0", "A", "f", "a0", "H", "declared_norms"});

  if (p.contains("grid")) {
    const json& g = p["grid"];
    check_keys(g, "problem.grid", {"dim", "extents", "n"});
    GridSpec gs;
    gs.dim = get_int(g, "dim", "problem.grid", 1);
    if (gs.dim != 1 && gs.dim != 2) throw config_error("problem.grid.dim must be 1 or 2");
    gs.extents = get_numbers(g, "extents", "problem.grid");
    if (!g.contains("n") || !g["n"].is_array()) throw config_error("problem.grid.n: expected an array");
    for (const auto& v : g["n"]) {
      if (!v.is_number_integer()) throw config_error("problem.grid.n: expected integers");
      gs.n.push_back(v.get<int>());
    }
    if (gs.extents.size() != static_cast<std::size_t>(gs.dim) ||
        gs.n.size() != static_cast<std::size_t>(gs.dim)) {
      throw config_error("problem.grid: extents and n need one entry per dimension");
    }
    for (int k = 0; k < gs.dim; ++k) {
      if (gs.n[k] < 3) throw config_error("problem.grid.n: at least 3 interior points per axis");
      if (!(gs.extents[k] > 0.0)) throw config_error("problem.grid.extents must be positive");
    }
    c.grid = gs;
  }

  if (!p.contains("exponents")) throw config_error("problem: missing 'exponents'");
  c.exponents = parse_exponents(p["exponents"], "problem.exponents");
  c.alpha = get_number(p, "alpha", "problem");
  c.gamma = get_number(p, "gamma", "problem");
  c.c0 = get_number(p, "c0", "problem", 0.0);
  if (!(c.alpha > 0.0)) throw config_error("problem.alpha must be > 0");
  if (!(c.gamma > 0.0)) throw config_error("problem.gamma must be > 0");
  if (!(c.c0 >= 0.0)) throw config_error("problem.c0 must be >= 0");

  if (p.contains("A")) {
    const json& a = p["A"];
    check_keys(a, "problem.A", {"kind", "entries", "coefficient"});
    c.a.kind = get_string(a, "kind", "problem.A", "identity");
    if (c.a.kind == "constant") {
      if (!a.contains("entries") || !a["entries"].is_array()) {
        throw config_error("problem.A.entries: expected a matrix");
      }
      for (const auto& row : a["entries"]) {
        if (!row.is_array()) throw config_error("problem.A.entries: expected rows");
        std::vector<double> r;
        for (const auto& v : row) {
          if (!v.is_number()) throw config_error("problem.A.entries: expected numbers");
          r.push_back(v.get<double>());
        }
        c.a.entries.push_back(r);
      }
    } else if (c.a.kind == "isotropic") {
      if (!a.contains("coefficient")) throw config_error("problem.A: isotropic needs 'coefficient'");
      c.a.coefficient = parse_field(a["coefficient"], "problem.A.coefficient");
    } else if (c.a.kind != "identity") {
      throw config_error("problem.A: unknown kind '" + c.a.kind + "'");
    }
  }

  if (!p.contains("f")) throw config_error("problem: missing 'f'");
  c.f = parse_field(p["f"], "problem.f");
  if (!p.contains("a0")) throw config_error("problem: missing 'a0'");
  c.a0 = parse_field(p["a0"], "problem.a0");

  if (p.contains("H")) {
    const json& h = p["H"];
    check_keys(h, "problem.H", {"kind", "shape", "beta", "scale", "mu"});
    c.h.kind = get_string(h, "kind", "problem.H", "zero");
    if (c.h.kind == "shape_times_quadratic") {
      c.h.shape = get_string(h, "shape", "problem.H", "sign");
      if (c.h.shape != "sign" && c.h.shape != "tanh") {
        throw config_error("problem.H.shape must be 'sign' or 'tanh'");
      }
      c.h.beta = get_number(h, "beta", "problem.H");
      c.h.scale = get_number(h, "scale", "problem.H", 1.0);
      if (!(c.h.scale > 0.0)) throw config_error("problem.H.scale must be > 0");
    } else if (c.h.kind == "mu_gradsq") {
      if (!h.contains("mu")) throw config_error("problem.H: mu_gradsq needs 'mu'");
      c.h.mu = parse_field(h["mu"], "problem.H.mu");
    } else if (c.h.kind != "zero") {
      throw config_error("problem.H: unknown kind '" + c.h.kind + "'");
    }
  }

  if (p.contains("declared_norms")) {
    const json& d = p["declared_norms"];
    const std::string w = "problem.declared_norms";
    check_keys(d, w, {"f_N2", "f_Hm1", "a0_N2", "a0_q"});
    if (d.contains("f_N2")) c.declared.f_n2 = get_number(d, "f_N2", w);
    if (d.contains("f_Hm1")) c.declared.f_hm1 = get_number(d, "f_Hm1", w);
    if (d.contains("a0_N2")) c.declared.a0_n2 = get_number(d, "a0_N2", w);
    if (d.contains("a0_q")) c.declared.a0_q = get_number(d, "a0_q", w);
  }

  if (root.contains("constants")) {
    const json& k = root["constants"];
    check_keys(k, "constants", {"C_N", "tol", "sobolev_rel_tol", "sobolev_max_iter"});
    const std::string src = get_string(k, "C_N", "constants", "estimate");
    if (src.rfind("literature:", 0) == 0) {
      try {
        std::size_t used = 0;
        const std::string num = src.substr(11);
        const double v = std::stod(num, &used);
        if (used != num.size() || !(v > 0.0)) throw std::invalid_argument("bad");
        c.constants.literature = v;
      } catch (const std::exception&) {
        throw config_error("constants.C_N: expected 'literature:<positive number>'");
      }
    } else if (src != "estimate") {
      throw config_error("constants.C_N: expected 'estimate' or 'literature:<value>'");
    }
    c.constants.tol = get_number(k, "tol", "constants", 1e-12);
    c.constants.sobolev.rel_tol = get_number(k, "sobolev_rel_tol", "constants", 1e-8);
    c.constants.sobolev.max_iter = get_int(k, "sobolev_max_iter", "constants", 2000);
    if (!(c.constants.tol > 0.0)) throw config_error("constants.tol must be > 0");
  }

  if (root.contains("solver")) {
    const json& s = root["solver"];
    const std::string w = "solver";
    check_keys(s, w,
               {"delta", "k", "relaxation", "outer_tol", "inner_tol", "cg_tol", "max_outer",
                "max_inner", "k_schedule", "lower_zero_ball"});
    SolverConfig& b = c.solver.base;
    if (s.contains("delta")) {
      if (s["delta"].is_string()) {
        if (s["delta"].get<std::string>() != "delta0") {
          throw config_error("solver.delta: expected a number or 'delta0'");
        }
      } else {
        b.delta = get_number(s, "delta", w);
        c.solver.delta_from_delta0 = false;
      }
    }
    b.k = get_number(s, "k", w, b.k);
    b.relaxation = get_number(s, "relaxation", w, b.relaxation);
    b.outer_tol = get_number(s, "outer_tol", w, b.outer_tol);
    b.inner_tol = get_number(s, "inner_tol", w, b.inner_tol);
    b.cg_tol = get_number(s, "cg_tol", w, b.cg_tol);
    b.max_outer = get_int(s, "max_outer", w, b.max_outer);
    b.max_inner = get_int(s, "max_inner", w, b.max_inner);
    b.k_schedule = get_numbers(s, "k_schedule", w);
    if (s.contains("lower_zero_ball")) {
      if (!s["lower_zero_ball"].is_boolean()) throw config_error("solver.lower_zero_ball: expected a bool");
      c.solver.lower_zero_ball = s["lower_zero_ball"].get<bool>();
    }
    if (c.solver.lower_zero_ball && c.solver.delta_from_delta0) {
      throw config_error("solver.lower_zero_ball needs an explicit numeric delta");
    }
  }

  if (root.contains("report")) {
    const json& r = root["report"];
    check_keys(r, "report", {"n_ladder", "y_deltas", "sweep"});
    c.n_ladder = get_numbers(r, "n_ladder", "report");
    for (double n : c.n_ladder) {
      if (!(n > 0.0)) throw config_error("report.n_ladder entries must be > 0");
    }
    c.y_deltas = get_numbers(r, "y_deltas", "report");
    if (r.contains("sweep")) {
      const json& s = r["sweep"];
      check_keys(s, "report.sweep", {"kind", "points", "f_scales", "a0_scales"});
      c.sweep.kind = get_string(s, "kind", "report.sweep", "delta");
      if (c.sweep.kind != "delta" && c.sweep.kind != "norm") {
        throw config_error("report.sweep.kind must be 'delta' or 'norm'");
      }
      c.sweep.points = get_int(s, "points", "report.sweep", 50);
      if (c.sweep.points < 2) throw config_error("report.sweep.points must be >= 2");
      c.sweep.f_scales = get_numbers(s, "f_scales", "report.sweep");
      c.sweep.a0_scales = get_numbers(s, "a0_scales", "report.sweep");
    }
  }
  c.solver.base.n_ladder = c.n_ladder;
  return c;
}

inline ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw config_error("cannot open config " + path.string());
  json root;
  try {
    root = json::parse(is);
  } catch (const json::parse_error& e) {
    throw config_error(path.string() + ": " + e.what());
  }
  return parse_config(root, path.parent_path());
}

}  // namespace quadgrad
