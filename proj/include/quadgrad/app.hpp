#pragma once

// Orchestration behind the command-line tool: builds discrete problems from
// a config, resolves the constants, runs solves, sweeps and the invariant
// suites, and turns the results into JSON/CSV reports.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <numbers>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <type_traits>
#include <vector>

#include <json.hpp>

#include "quadgrad/config.hpp"
#include "quadgrad/constants.hpp"
#include "quadgrad/field_io.hpp"
#include "quadgrad/grid.hpp"
#include "quadgrad/nonlinear.hpp"
#include "quadgrad/operators.hpp"
#include "quadgrad/sobolev.hpp"
#include "quadgrad/solver.hpp"

namespace quadgrad {

using ordered_json = nlohmann::ordered_json;

namespace exit_code {
inline constexpr int ok = 0;
inline constexpr int config = 2;
inline constexpr int smallness = 3;
inline constexpr int nonconvergence = 4;
inline constexpr int invariant = 5;
}  // namespace exit_code

struct CommandResult {
  int exit_code = exit_code::ok;
  ordered_json report = ordered_json::object();
  std::vector<std::string> warnings;
};

// ---------------------------------------------------------------------------
// Building the discrete problem

template <int Dim>
Grid<Dim> make_grid(const GridSpec& s) {
  Vec<Dim> ext{};
  typename Grid<Dim>::Index n{};
  for (int k = 0; k < Dim; ++k) {
    ext[k] = s.extents[k];
    n[k] = s.n[k];
  }
  return Grid<Dim>(ext, n);
}

template <int Dim>
double field_expression(const FieldSpec& s, const Grid<Dim>& g,
                        const std::type_identity_t<Vec<Dim>>& x) {
  double v = s.value;
  if (s.kind == "coordinate_product") {
    for (int k = 0; k < Dim; ++k) v *= x[k];
  } else if (s.kind == "sine_bump") {
    for (int k = 0; k < Dim; ++k) v *= std::sin(std::numbers::pi * x[k] / g.extent()[k]);
  }
  return v;
}

template <int Dim>
ScalarField<Dim> make_field(const FieldSpec& s, const Grid<Dim>& g,
                            const std::filesystem::path& base) {
  if (s.kind == "file") {
    const auto path = s.path.is_absolute() ? s.path : base / s.path;
    return read_field_csv<Dim>(path, g);
  }
  return ScalarField<Dim>::sample(g, [&](const Vec<Dim>& x) { return field_expression(s, g, x); });
}

template <int Dim>
MatrixField<Dim> make_matrix(const MatrixSpec& s, const Grid<Dim>& g,
                             const std::filesystem::path& base) {
  if (s.kind == "identity") return MatrixField<Dim>::constant(g, identity_matrix<Dim>());
  if (s.kind == "constant") {
    if (s.entries.size() != static_cast<std::size_t>(Dim)) {
      throw config_error("problem.A.entries must be " + std::to_string(Dim) + "x" +
                         std::to_string(Dim));
    }
    Mat<Dim> m{};
    for (int i = 0; i < Dim; ++i) {
      if (s.entries[i].size() != static_cast<std::size_t>(Dim)) {
        throw config_error("problem.A.entries must be square");
      }
      for (int j = 0; j < Dim; ++j) m[i][j] = s.entries[i][j];
    }
    return MatrixField<Dim>::constant(g, m);
  }
  if (s.coefficient.kind == "file") {
    throw config_error("problem.A.coefficient: file input is nodal; use an expression");
  }
  (void)base;
  return MatrixField<Dim>::sample(g, [&](const Vec<Dim>& x) {
    return identity_matrix<Dim>(field_expression(s.coefficient, g, x));
  });
}

inline HModel make_h(const HSpec& s, double gamma, double c0) {
  if (s.kind == "shape_times_quadratic") {
    const Shape shape = s.shape == "tanh" ? Shape::tanh : Shape::signed_constant;
    return HModel::shape_times_quadratic(shape, s.beta, gamma, c0, s.scale);
  }
  if (s.kind == "mu_gradsq") return HModel::mu_gradsq(gamma, c0);
  return HModel::zero(gamma, c0);
}

template <int Dim>
struct Problem {
  Grid<Dim> grid;
  ProblemData<Dim> data;
};

/// Builds the fields without judging them; see require_valid.
template <int Dim>
Problem<Dim> build_problem(const ExperimentConfig& cfg) {
  if (!cfg.grid) throw config_error("this command needs problem.grid");
  Problem<Dim> p;
  try {
    p.grid = make_grid<Dim>(*cfg.grid);
  } catch (const domain_error& e) {
    throw config_error(std::string("problem.grid: ") + e.what());
  }
  p.data.a = make_matrix<Dim>(cfg.a, p.grid, cfg.base_dir);
  p.data.f = make_field<Dim>(cfg.f, p.grid, cfg.base_dir);
  p.data.a0 = make_field<Dim>(cfg.a0, p.grid, cfg.base_dir);
  p.data.mu = cfg.h.kind == "mu_gradsq" ? make_field<Dim>(cfg.h.mu, p.grid, cfg.base_dir)
                                        : ScalarField<Dim>(p.grid);
  p.data.h = make_h(cfg.h, cfg.gamma, cfg.c0);
  p.data.alpha = cfg.alpha;
  return p;
}

/// Worst analytic certificate excess over all (node, owned cell) pairs.
template <int Dim>
std::optional<std::string> certificate_violation(const Problem<Dim>& p) {
  const auto& d = p.data;
  for (std::size_t i = 0; i < p.grid.nodes(); ++i) {
    std::optional<std::string> bad;
    p.grid.for_each_owned_sample(i, [&](std::size_t cell, int) {
      if (bad) return;
      const PointData<Dim> x{d.a.cells[cell], d.mu[i]};
      const double excess = d.h.certificate_excess(x);
      if (excess > 1e-12) {
        bad = "growth certificate (c0 = " + detail::fmt(d.h.c0_cert) + ", gamma = " +
              detail::fmt(d.h.gamma_cert) + ") exceeded by " + detail::fmt(excess) +
              " at node " + std::to_string(i);
      }
    });
    if (bad) return bad;
  }
  return std::nullopt;
}

/// Rejects data that the solver must not see: invalid A or an H model
/// whose certificate does not hold.
template <int Dim>
void require_valid(const Problem<Dim>& p) {
  if (auto v = p.data.a.violation(p.data.alpha)) throw config_error("problem.A: " + *v);
  if (auto v = certificate_violation(p)) throw config_error("problem.H: " + *v);
}

// ---------------------------------------------------------------------------
// Constants

struct FieldNorms {
  double f_n2 = 0.0;
  double f_hm1 = 0.0;
  double a0_n2 = 0.0;
  double a0_q = 0.0;
};

template <int Dim>
FieldNorms field_norms(const Problem<Dim>& p, const Exponents& e) {
  return FieldNorms{lp_norm(p.data.f, e.f_norm), hminus1_norm(p.data.f),
                    lp_norm(p.data.a0, e.f_norm), lp_norm(p.data.a0, e.q)};
}

struct ResolvedConstants {
  ProblemConstants c;
  std::string source;
  std::optional<double> estimate;  ///< discrete Sobolev ratio, when computed
  int estimate_iterations = 0;
  bool estimate_stagnated = false;
  std::vector<std::string> warnings;
};

inline void compare_declared(const DeclaredNorms& d, const FieldNorms& n,
                             std::vector<std::string>& warnings) {
  auto cmp = [&](const std::optional<double>& declared, double computed, const char* name) {
    if (!declared) return;
    const double scale = std::max(std::abs(computed), 1e-300);
    if (std::abs(*declared - computed) > 0.01 * scale) {
      warnings.push_back(std::string("declared ") + name + " = " + detail::fmt(*declared) +
                         " differs from the field value " + detail::fmt(computed) +
                         " by more than 1%; using the field value");
    }
  };
  cmp(d.f_n2, n.f_n2, "f_N2");
  cmp(d.f_hm1, n.f_hm1, "f_Hm1");
  cmp(d.a0_n2, n.a0_n2, "a0_N2");
  cmp(d.a0_q, n.a0_q, "a0_q");
}

inline ProblemConstants base_constants(const ExperimentConfig& cfg) {
  ProblemConstants c;
  c.exponents = cfg.exponents;
  c.alpha = cfg.alpha;
  c.gamma = cfg.gamma;
  c.c0 = cfg.c0;
  return c;
}

/// Norms from the fields, C_N from the configured source (or the discrete
/// estimate when `force_estimate`).
template <int Dim>
ResolvedConstants resolve_constants(const ExperimentConfig& cfg, const Problem<Dim>& p,
                                    bool force_estimate = false) {
  ResolvedConstants r;
  r.c = base_constants(cfg);
  const FieldNorms n = field_norms(p, cfg.exponents);
  r.c.norm_f_n2 = n.f_n2;
  r.c.norm_f_hm1 = n.f_hm1;
  r.c.norm_a0_n2 = n.a0_n2;
  r.c.norm_a0_q = n.a0_q;
  compare_declared(cfg.declared, n, r.warnings);
  if (cfg.constants.literature && !force_estimate) {
    r.c.sobolev_constant = *cfg.constants.literature;
    r.source = cfg.constants.source();
  } else {
    const auto est = estimate_sobolev_constant(p.grid, cfg.exponents.sobolev, cfg.constants.sobolev);
    r.c.sobolev_constant = est.value;
    r.estimate = est.value;
    r.estimate_iterations = est.iterations;
    r.estimate_stagnated = est.stagnated;
    r.source = "estimate";
    if (est.stagnated) r.warnings.push_back("Sobolev estimator stagnated; using best ratio found");
  }
  return r;
}

/// Grid-less path: declared norms and a literature C_N.
inline ResolvedConstants resolve_declared(const ExperimentConfig& cfg) {
  const auto& d = cfg.declared;
  if (!d.f_n2 || !d.f_hm1 || !d.a0_n2 || !d.a0_q) {
    throw config_error("without problem.grid all four declared_norms are required");
  }
  if (!cfg.constants.literature) {
    throw config_error("without problem.grid constants.C_N must be 'literature:<value>'");
  }
  ResolvedConstants r;
  r.c = base_constants(cfg);
  r.c.norm_f_n2 = *d.f_n2;
  r.c.norm_f_hm1 = *d.f_hm1;
  r.c.norm_a0_n2 = *d.a0_n2;
  r.c.norm_a0_q = *d.a0_q;
  r.c.sobolev_constant = *cfg.constants.literature;
  r.source = cfg.constants.source();
  return r;
}

/// Calls fn(std::integral_constant<int, Dim>) for the configured dimension.
template <class F>
decltype(auto) with_dimension(const ExperimentConfig& cfg, F&& fn) {
  if (!cfg.grid) throw config_error("this command needs problem.grid");
  if (cfg.grid->dim == 1) return fn(std::integral_constant<int, 1>{});
  return fn(std::integral_constant<int, 2>{});
}

inline ResolvedConstants resolve_any(const ExperimentConfig& cfg) {
  if (!cfg.grid) return resolve_declared(cfg);
  return with_dimension(cfg, [&](auto dim) {
    constexpr int D = decltype(dim)::value;
    const auto p = build_problem<D>(cfg);
    return resolve_constants(cfg, p);
  });
}

// ---------------------------------------------------------------------------
// JSON views

inline ordered_json to_json(const ProblemConstants& c) {
  ordered_json j;
  j["sobolev_exponent"] = c.exponents.sobolev;
  j["f_norm_exponent"] = c.exponents.f_norm;
  j["q"] = c.exponents.q;
  if (c.exponents.dimension >= 3) j["N"] = c.exponents.dimension;
  j["alpha"] = c.alpha;
  j["gamma"] = c.gamma;
  j["c0"] = c.c0;
  j["norm_f_N2"] = c.norm_f_n2;
  j["norm_f_Hm1"] = c.norm_f_hm1;
  j["norm_a0_N2"] = c.norm_a0_n2;
  j["norm_a0_q"] = c.norm_a0_q;
  j["C_N"] = c.sobolev_constant;
  return j;
}

inline ordered_json to_json(const ResolvedConstants& r) {
  ordered_json j;
  j["value"] = r.c.sobolev_constant;
  j["source"] = r.source;
  if (r.estimate) {
    j["estimate_is_lower_bound"] = true;
    j["estimator_iterations"] = r.estimate_iterations;
    j["estimator_stagnated"] = r.estimate_stagnated;
  }
  return j;
}

inline ordered_json to_json(const CriticalReport& r) {
  ordered_json j;
  j["constants"] = to_json(r.constants);
  j["theta"] = r.theta;
  j["C_theta"] = r.c_theta;
  j["delta1"] = r.delta1 ? ordered_json(*r.delta1) : ordered_json(nullptr);
  j["G"] = r.G ? ordered_json(*r.G) : ordered_json(nullptr);
  j["smallness"] = {
      {"A1", {{"holds", r.smallness.a1.holds}, {"margin", r.smallness.a1.margin}}},
      {"A3", {{"holds", r.smallness.a3.holds}, {"margin", r.smallness.a3.margin}}}};
  if (r.delta0) {
    j["delta0"] = r.delta0->delta0;
    j["Z_delta0"] = r.delta0->z_delta0;
    j["Phi_delta0_at_Z"] = r.delta0->residual;
    j["bisection_iterations"] = r.delta0->iterations;
  } else {
    j["delta0"] = nullptr;
    j["Z_delta0"] = nullptr;
  }
  ordered_json zs = ordered_json::array();
  for (const auto& z : r.zeros) {
    ordered_json e;
    e["delta"] = z.delta;
    e["Y_minus"] = z.zeros ? ordered_json(z.zeros->lower) : ordered_json(nullptr);
    e["Y_plus"] = z.zeros ? ordered_json(z.zeros->upper) : ordered_json(nullptr);
    zs.push_back(e);
  }
  j["zeros"] = zs;
  j["tol"] = r.tol;
  return j;
}

// ---------------------------------------------------------------------------
// constants / check

inline CommandResult cmd_constants(const ExperimentConfig& cfg) {
  CommandResult out;
  const ResolvedConstants rc = resolve_any(cfg);
  out.warnings = rc.warnings;
  const CriticalReport r = analyze(rc.c, cfg.constants.tol, cfg.y_deltas);
  out.report["command"] = "constants";
  out.report["C_N"] = to_json(rc);
  out.report["critical"] = to_json(r);
  out.exit_code = r.smallness.both() ? exit_code::ok : exit_code::smallness;
  return out;
}

inline CommandResult cmd_check(const ExperimentConfig& cfg) {
  CommandResult out;
  const ResolvedConstants rc = resolve_any(cfg);
  out.warnings = rc.warnings;
  rc.c.validate();
  const Smallness s = check_smallness(rc.c);
  out.report["command"] = "check";
  out.report["C_N"] = to_json(rc);
  out.report["A1"] = {{"holds", s.a1.holds}, {"margin", s.a1.margin}};
  out.report["A3"] = {{"holds", s.a3.holds}, {"margin", s.a3.margin}};
  out.report["admissible"] = s.both();
  out.exit_code = s.both() ? exit_code::ok : exit_code::smallness;
  return out;
}

// ---------------------------------------------------------------------------
// solve

struct SolveSetup {
  BallSpec ball;
  ResolvedConstants discrete;
  std::optional<CriticalReport> critical;
  std::optional<double> continuum_radius;  ///< Z_{δ₀} from a literature C_N
  SolverConfig solver;
  std::string mode;  ///< delta0 | lower_zero | linear_growth | zero_data
};

/// Chooses δ and the ball radius from discrete constants. Throws
/// smallness_violated when the data are not admissible and config_error /
/// domain_error for inconsistent solver settings.
template <int Dim>
SolveSetup prepare_solve(const ExperimentConfig& cfg, const Problem<Dim>& p) {
  SolveSetup s;
  s.solver = cfg.solver.base;
  s.discrete = resolve_constants(cfg, p, true);
  ProblemConstants& c = s.discrete.c;
  const double theta = c.exponents.theta();
  const bool explicit_delta = !cfg.solver.delta_from_delta0;
  if (explicit_delta && !(s.solver.delta >= cfg.gamma)) {
    throw domain_error("solver.delta = " + detail::fmt(s.solver.delta) + " < gamma = " +
                       detail::fmt(cfg.gamma) + ": the transformed term needs delta >= gamma");
  }

  if (c.norm_f_n2 == 0.0) {
    // f ≡ 0: w ≡ 0 solves the problem and the ball collapses to {0}.
    s.mode = "zero_data";
    s.solver.delta = explicit_delta ? s.solver.delta : cfg.gamma;
    s.ball = BallSpec{c, theta, 0.0, s.solver.delta, 0.0};
    return s;
  }
  if (c.norm_a0_q == 0.0) {
    // No zeroth-order term: Φ_δ is affine and the invariant ball has radius
    // ‖f‖_{H⁻¹}/L_δ.
    if (!explicit_delta) throw config_error("solver.delta must be numeric when a0 vanishes");
    const double l = slope_l(s.solver.delta, c);
    if (!(l > 0.0)) {
      throw smallness_violated("L_delta = " + detail::fmt(l) + " <= 0 with a0 = 0");
    }
    s.mode = "linear_growth";
    s.ball = BallSpec{c, theta, compute_G(c, theta), s.solver.delta, c.norm_f_hm1 / l};
    return s;
  }

  const CriticalReport r = analyze(c, cfg.constants.tol, cfg.y_deltas);
  s.critical = r;
  if (!r.smallness.both()) {
    throw smallness_violated(std::string("smallness fails with discrete constants: ") +
                             (r.smallness.a1.holds ? "" : "A1 ") +
                             (r.smallness.a3.holds ? "" : "A3 ") + "(margins " +
                             detail::fmt(r.smallness.a1.margin) + ", " +
                             detail::fmt(r.smallness.a3.margin) + ")");
  }
  const double d0 = r.delta0->delta0;
  if (cfg.solver.lower_zero_ball) {
    if (!(s.solver.delta < d0)) {
      throw domain_error("lower_zero_ball needs gamma <= delta < delta0 = " + detail::fmt(d0));
    }
    const ZeroPair y = zeros_y(s.solver.delta, c, theta, *r.G, cfg.constants.tol);
    s.mode = "lower_zero";
    s.ball = BallSpec{c, theta, *r.G, s.solver.delta, y.lower};
  } else {
    if (explicit_delta && std::abs(s.solver.delta - d0) > 1e-9 * d0) {
      throw config_error("solver.delta = " + detail::fmt(s.solver.delta) + " differs from delta0 = " +
                         detail::fmt(d0) + "; use \"delta0\" or enable lower_zero_ball");
    }
    s.mode = "delta0";
    s.solver.delta = d0;
    s.ball = BallSpec{c, theta, *r.G, d0, r.delta0->z_delta0};
  }
  if (cfg.constants.literature) {
    ProblemConstants lit = c;
    lit.sobolev_constant = *cfg.constants.literature;
    try {
      const auto lr = analyze(lit, cfg.constants.tol);
      if (lr.delta0) s.continuum_radius = lr.delta0->z_delta0;
    } catch (const error&) {
    }
  }
  return s;
}

template <int Dim>
struct SolveOutcome {
  SolveSetup setup;
  ContinuationResult<Dim> continuation;
  ScalarField<Dim> w;
  ScalarField<Dim> u;
  double residual_truncated = 0.0;
  double residual_transformed = 0.0;
  OriginalResidual original;
  double max_k_value = 0.0;
  int exit_code = exit_code::ok;
};

template <int Dim>
SolveOutcome<Dim> run_solve(const ExperimentConfig& cfg, const Problem<Dim>& p) {
  SolveOutcome<Dim> o;
  o.setup = prepare_solve(cfg, p);
  const Discretization<Dim> disc(p.data);
  o.continuation = k_continuation(disc, o.setup.solver, o.setup.ball);
  const auto& c = o.continuation;
  o.w = c.final_solution();
  const double delta = o.setup.solver.delta;
  o.u = reconstruct_u(o.w, delta);
  o.residual_truncated = c.residual_truncated.back();
  o.residual_transformed = c.residual_transformed.back();
  o.original = residual_original(disc, o.w, delta);
  const auto kk = disc.nodal_k(o.w, delta);
  for (double v : kk) o.max_k_value = std::max(o.max_k_value, std::abs(v));

  bool violation = false;
  for (const auto& run : c.runs) violation = violation || run.violations > 0;
  if (violation) {
    o.exit_code = exit_code::invariant;
  } else if (!c.complete) {
    o.exit_code = exit_code::nonconvergence;
  }
  return o;
}

inline ordered_json trace_line(double k, const TraceEntry& e) {
  ordered_json j;
  j["k"] = k;
  j["iteration"] = e.iteration;
  j["norm_Dw"] = e.norm_dw;
  j["norm_DW"] = e.norm_dW;
  j["increment"] = e.increment;
  j["slack"] = e.slack;
  j["eps_solver"] = e.eps_solver;
  j["radius"] = e.radius;
  j["inner_iterations"] = e.inner_iterations;
  j["inner_residual"] = e.inner_residual;
  j["in_ball"] = e.in_ball;
  j["slack_ok"] = e.slack_ok;
  if (e.residual) j["residual"] = *e.residual;
  return j;
}

namespace detail {

inline std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream os(path);
  if (!os) throw config_error("cannot write " + path.string());
  os << std::setprecision(17);
  return os;
}

}  // namespace detail

template <int Dim>
void write_solve_outputs(const SolveOutcome<Dim>& o, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  write_field_csv(dir / "w.csv", o.w);
  write_field_csv(dir / "u.csv", o.u);
  const auto& c = o.continuation;
  {
    auto os = detail::open_out(dir / "trace.jsonl");
    for (std::size_t j = 0; j < c.runs.size(); ++j)
      for (const auto& e : c.runs[j].trace) os << trace_line(c.k_values[j], e).dump() << '\n';
  }
  {
    auto os = detail::open_out(dir / "tail_energy.csv");
    os << "n";
    for (double k : c.k_values) os << ",k=" << k;
    os << '\n';
    for (std::size_t a = 0; a < c.n_ladder.size(); ++a) {
      os << c.n_ladder[a];
      for (double e : c.tail_energy[a]) os << ',' << e;
      os << '\n';
    }
  }
  {
    auto os = detail::open_out(dir / "increments.csv");
    os << "k_from,k_to,cauchy_increment";
    for (double n : c.n_ladder) os << ",truncation_increment_n=" << n;
    os << '\n';
    for (std::size_t j = 0; j < c.increments.size(); ++j) {
      os << c.k_values[j] << ',' << c.k_values[j + 1] << ',' << c.increments[j];
      for (std::size_t a = 0; a < c.n_ladder.size(); ++a) os << ',' << c.truncation_increments[a][j];
      os << '\n';
    }
  }
}

template <int Dim>
ordered_json solve_summary(const SolveOutcome<Dim>& o) {
  const auto& s = o.setup;
  const auto& c = o.continuation;
  ordered_json j;
  j["mode"] = s.mode;
  j["delta"] = s.solver.delta;
  j["C_N"] = to_json(s.discrete);
  j["constants"] = to_json(s.ball.constants);
  j["theta"] = s.ball.theta;
  j["G"] = s.ball.G;
  j["radius"] = s.ball.radius;
  j["radius_continuum"] = s.continuum_radius ? ordered_json(*s.continuum_radius) : ordered_json(nullptr);
  if (s.critical && s.critical->delta0) j["delta0"] = s.critical->delta0->delta0;
  ordered_json runs = ordered_json::array();
  for (std::size_t i = 0; i < c.runs.size(); ++i) {
    const auto& r = c.runs[i];
    double min_slack = std::numeric_limits<double>::infinity();
    double max_norm = 0.0;
    for (const auto& e : r.trace) {
      min_slack = std::min(min_slack, e.slack);
      max_norm = std::max({max_norm, e.norm_dw, e.norm_dW});
    }
    ordered_json e;
    e["k"] = c.k_values[i];
    e["status"] = to_string(r.status);
    e["outer_iterations"] = r.trace.size();
    e["violations"] = r.violations;
    e["min_slack"] = r.trace.empty() ? ordered_json(nullptr) : ordered_json(min_slack);
    e["max_norm_Dw"] = max_norm;
    e["residual_truncated"] = c.residual_truncated[i];
    e["residual_transformed"] = c.residual_transformed[i];
    if (r.cycle_period > 0) e["cycle_period"] = r.cycle_period;
    if (!r.failure.empty()) e["failure"] = r.failure;
    runs.push_back(e);
  }
  j["runs"] = runs;
  j["converged"] = c.complete;
  j["norm_Dw"] = h1_seminorm(o.w);
  j["max_abs_w"] = lp_norm(o.w, std::numeric_limits<double>::infinity());
  j["residual_truncated"] = o.residual_truncated;
  j["residual_transformed"] = o.residual_transformed;
  j["residual_original"] = o.original.residual;
  j["chain_factor_error"] = o.original.chain_factor_error;
  j["norm_identity_gap"] = o.original.norm_identity_gap;
  j["max_K"] = o.max_k_value;
  j["k_final"] = c.k_values.back();
  j["K_untruncated"] = c.k_values.back() >= o.max_k_value;
  j["cauchy_increments"] = c.increments;
  return j;
}

inline CommandResult cmd_solve(const ExperimentConfig& cfg, const std::filesystem::path& dir) {
  return with_dimension(cfg, [&](auto dim) {
    constexpr int D = decltype(dim)::value;
    CommandResult out;
    const auto p = build_problem<D>(cfg);
    require_valid(p);
    const auto o = run_solve(cfg, p);
    out.warnings = o.setup.discrete.warnings;
    write_solve_outputs(o, dir);
    out.report["command"] = "solve";
    out.report["summary"] = solve_summary(o);
    {
      auto os = detail::open_out(dir / "residuals.json");
      os << out.report["summary"].dump(2) << '\n';
    }
    out.exit_code = o.exit_code;
    return out;
  });
}

// ---------------------------------------------------------------------------
// sweep

struct DeltaRow {
  double delta = 0.0;
  double z = 0.0;
  double phi_min = 0.0;
  std::optional<ZeroPair> zeros;
  std::string status = "ok";
};

/// Rows over `points` equally spaced δ in [γ, δ₁] (both ends included).
inline std::vector<DeltaRow> delta_sweep(const ProblemConstants& c, int points, double tol) {
  const double theta = c.exponents.theta();
  const double d1 = compute_delta1(c);
  const double G = compute_G(c, theta);
  if (!(c.gamma < d1)) throw smallness_violated("A1 fails: [gamma, delta1] is empty");
  std::vector<DeltaRow> rows;
  for (int i = 0; i < points; ++i) {
    DeltaRow r;
    r.delta = i + 1 == points ? d1 : c.gamma + (d1 - c.gamma) * i / (points - 1.0);
    try {
      r.z = z_delta(r.delta, c, theta, G);
      r.phi_min = phi_min(r.delta, c, theta, G);
      if (r.phi_min < 0.0) {
        try {
          r.zeros = zeros_y(r.delta, c, theta, G, tol);
        } catch (const no_two_zeros&) {
          r.status = "no_two_zeros";
        }
      }
    } catch (const error& e) {
      r.status = std::string("failed: ") + e.what();
    }
    rows.push_back(r);
  }
  return rows;
}

inline CommandResult cmd_sweep(const ExperimentConfig& cfg, const std::filesystem::path& dir) {
  CommandResult out;
  const ResolvedConstants rc = resolve_any(cfg);
  out.warnings = rc.warnings;
  rc.c.validate();
  std::filesystem::create_directories(dir);
  out.report["command"] = "sweep";
  out.report["kind"] = cfg.sweep.kind;
  out.report["C_N"] = to_json(rc);

  if (cfg.sweep.kind == "norm") {
    std::vector<double> fs = cfg.sweep.f_scales;
    std::vector<double> as = cfg.sweep.a0_scales;
    if (fs.empty()) fs = {0.25, 0.5, 1.0, 2.0, 4.0};
    if (as.empty()) as = {0.25, 0.5, 1.0, 2.0, 4.0};
    auto os = detail::open_out(dir / "sweep.csv");
    os << "f_scale,a0_scale,A1_margin,A3_margin,admissible,delta0\n";
    int admissible = 0;
    for (double sf : fs) {
      for (double sa : as) {
        ProblemConstants c = rc.c;
        c.norm_f_n2 *= sf;
        c.norm_f_hm1 *= sf;
        c.norm_a0_n2 *= sa;
        c.norm_a0_q *= sa;
        os << sf << ',' << sa << ',';
        try {
          const Smallness s = check_smallness(c);
          os << s.a1.margin << ',' << s.a3.margin << ',' << (s.both() ? 1 : 0) << ',';
          if (s.both()) {
            ++admissible;
            const double theta = c.exponents.theta();
            os << solve_delta0(c, theta, compute_G(c, theta), cfg.constants.tol).delta0;
          }
        } catch (const error&) {
          os << ",,0,";
        }
        os << '\n';
      }
    }
    out.report["points"] = fs.size() * as.size();
    out.report["admissible_points"] = admissible;
    out.report["csv"] = (dir / "sweep.csv").string();
    return out;
  }

  const auto rows = delta_sweep(rc.c, cfg.sweep.points, cfg.constants.tol);
  const Smallness sm = check_smallness(rc.c);
  std::optional<double> d0;
  std::optional<double> z0;
  if (sm.both()) {
    const double theta = rc.c.exponents.theta();
    const auto r = solve_delta0(rc.c, theta, compute_G(rc.c, theta), cfg.constants.tol);
    d0 = r.delta0;
    z0 = r.z_delta0;
  }
  auto os = detail::open_out(dir / "sweep.csv");
  os << "delta,Z_delta,Phi_delta_at_Z,Y_minus,Y_plus,status\n";
  int sign_changes = 0;
  bool z_decreasing = true;
  bool y_bracket = true;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& r = rows[i];
    os << r.delta << ',' << r.z << ',' << r.phi_min << ',';
    if (r.zeros) os << r.zeros->lower << ',' << r.zeros->upper;
    else os << ',';
    os << ',' << r.status << '\n';
    if (i > 0) {
      if ((rows[i - 1].phi_min < 0.0) != (r.phi_min < 0.0)) ++sign_changes;
      if (!(r.z < rows[i - 1].z)) z_decreasing = false;
    }
    if (d0 && z0 && r.delta < *d0 && r.zeros) {
      if (!(r.zeros->lower < *z0 && *z0 < r.zeros->upper)) y_bracket = false;
    }
  }
  out.report["points"] = rows.size();
  out.report["delta_range"] = {rows.front().delta, rows.back().delta};
  out.report["delta0"] = d0 ? ordered_json(*d0) : ordered_json(nullptr);
  out.report["Z_delta0"] = z0 ? ordered_json(*z0) : ordered_json(nullptr);
  out.report["sign_changes"] = sign_changes;
  out.report["Z_strictly_decreasing"] = z_decreasing;
  out.report["Y_brackets_Z_delta0"] = y_bracket;
  out.report["csv"] = (dir / "sweep.csv").string();
  return out;
}

// ---------------------------------------------------------------------------
// verify

struct CheckResult {
  CheckResult() = default;
  explicit CheckResult(std::string n) : name(std::move(n)) {}

  std::string name;
  std::string status = "pass";  ///< pass | fail | skipped
  long checked = 0;
  std::string detail;
  ordered_json counterexample = nullptr;
  ordered_json info = nullptr;

  void fail(const std::string& why, ordered_json example) {
    if (status == "fail") return;  // keep the first counterexample
    status = "fail";
    detail = why;
    counterexample = std::move(example);
  }
};

inline ordered_json to_json(const CheckResult& r) {
  ordered_json j;
  j["name"] = r.name;
  j["status"] = r.status;
  j["checked"] = r.checked;
  if (!r.detail.empty()) j["detail"] = r.detail;
  if (!r.counterexample.is_null()) j["counterexample"] = r.counterexample;
  if (!r.info.is_null()) j["info"] = r.info;
  return j;
}

namespace detail {

template <int Dim>
ordered_json vec_json(const Vec<Dim>& v) {
  return ordered_json(std::vector<double>(v.begin(), v.end()));
}

template <int Dim>
ordered_json mat_json(const Mat<Dim>& m) {
  ordered_json j = ordered_json::array();
  for (const auto& row : m) j.push_back(std::vector<double>(row.begin(), row.end()));
  return j;
}

template <int Dim>
ScalarField<Dim> random_field(const Grid<Dim>& g, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<double> v(g.nodes());
  for (double& x : v) x = u(rng);
  return ScalarField<Dim>(g, std::move(v));
}

inline bool close(double a, double b, double rel, double abs_floor = 0.0) {
  return std::abs(a - b) <= rel * std::max(std::abs(a), std::abs(b)) + abs_floor;
}

}  // namespace detail

/// Samples the growth certificate, H(x,s,0) = 0 and the K_δ bounds.
template <int Dim>
std::vector<CheckResult> verify_pointwise(const Problem<Dim>& p, double gamma, double delta_hint,
                                          std::mt19937_64& rng, int samples = 10000) {
  const auto& d = p.data;
  std::uniform_int_distribution<std::size_t> node(0, p.grid.nodes() - 1);
  std::uniform_int_distribution<int> corner(0, Grid<Dim>::kCorners - 1);
  std::uniform_real_distribution<double> s_dist(-20.0, 20.0);
  std::uniform_real_distribution<double> xi_dist(-5.0, 5.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  auto draw_point = [&](std::size_t& i, std::size_t& cell) {
    i = node(rng);
    const int pick = corner(rng);
    int seen = 0;
    p.grid.for_each_owned_sample(i, [&](std::size_t c, int) {
      if (seen++ == pick) cell = c;
    });
    return PointData<Dim>{d.a.cells[cell], d.mu[i]};
  };
  auto draw_xi = [&] {
    Vec<Dim> xi{};
    for (int k = 0; k < Dim; ++k) xi[k] = xi_dist(rng);
    return xi;
  };

  CheckResult growth{"H_growth_certificate"};
  CheckResult zero_grad{"H_vanishes_at_zero_gradient"};
  ordered_json zero_level = nullptr;
  for (int n = 0; n < samples; ++n) {
    std::size_t i = 0, cell = 0;
    const auto x = draw_point(i, cell);
    const double s = s_dist(rng);
    const auto xi = draw_xi();
    ++growth.checked;
    const double excess = growth_excess<Dim>(d.h, x, s, xi);
    if (excess > 0.0) {
      growth.fail("H(x,s,xi) sign(s) leaves [-c0 A xi.xi, gamma A xi.xi]",
                  {{"node", i}, {"cell", cell}, {"s", s}, {"xi", detail::vec_json<Dim>(xi)},
                   {"H", d.h(x, s, xi)}, {"A_xi_xi", quad<Dim>(x.a, xi)}, {"excess", excess}});
    }
    ++zero_grad.checked;
    const double h0 = d.h(x, s, Vec<Dim>{});
    if (h0 != 0.0) zero_grad.fail("H(x,s,0) != 0", {{"node", i}, {"s", s}, {"H", h0}});
    if (zero_level.is_null() && d.h(x, 0.0, xi) != 0.0) {
      zero_level = {{"flag", "H(x,0,xi) != 0"}, {"node", i}, {"xi", detail::vec_json<Dim>(xi)},
                    {"H", d.h(x, 0.0, xi)}};
    }
  }
  growth.info = zero_level;

  // Two-sided K_δ bound over δ ∈ (0, γ + 2], and K_δ ≥ 0 for δ ≥ γ.
  CheckResult kbound{"K_delta_two_sided_bound"};
  CheckResult kpos{"K_delta_nonnegative_for_delta_ge_gamma"};
  const double c0 = d.h.c0_cert;
  for (int n = 0; n < samples; ++n) {
    std::size_t i = 0, cell = 0;
    const auto x = draw_point(i, cell);
    const double t = s_dist(rng) * (unit(rng) < 0.1 ? 0.0 : 1.0);
    const auto z = draw_xi();
    const double delta = n % 2 == 0 ? gamma * (0.05 + 0.95 * unit(rng))
                                    : gamma + (unit(rng) < 0.05 ? 0.0 : 2.0 * unit(rng));
    const double q = quad<Dim>(x.a, z);
    const double kv = k_delta<Dim>(x, t, z, delta, d.h);
    const double eps = 1e-12 * (c0 + delta) * q;
    ++kbound.checked;
    if (kv > (c0 + delta) * q + eps || kv < -std::abs(delta - gamma) * q - eps) {
      kbound.fail("K_delta outside [-|delta-gamma| A z.z, (c0+delta) A z.z]",
                  {{"node", i}, {"t", t}, {"zeta", detail::vec_json<Dim>(z)}, {"delta", delta},
                   {"K", kv}, {"A_z_z", q}});
    }
    if (delta >= gamma) {
      ++kpos.checked;
      if (kv < -eps) {
        kpos.fail("K_delta < 0 with delta >= gamma",
                  {{"node", i}, {"t", t}, {"zeta", detail::vec_json<Dim>(z)}, {"delta", delta},
                   {"K", kv}});
      }
    }
  }
  (void)delta_hint;
  return {growth, zero_grad, kbound, kpos};
}

inline CheckResult verify_transform(std::span<const double> deltas, std::mt19937_64& rng,
                                    int samples = 10000) {
  CheckResult r{"transform_roundtrip"};
  std::uniform_real_distribution<double> u_dist(-20.0, 20.0);
  for (double delta : deltas) {
    double prev_u = -20.0;
    double prev_w = transform_forward(prev_u, delta);
    for (int n = 0; n < samples; ++n) {
      const double u = u_dist(rng);
      const double w = transform_forward(u, delta);
      const double back = transform_inverse(w, delta);
      ++r.checked;
      if (std::abs(back - u) > 1e-12) {
        r.fail("|u - inverse(forward(u))| > 1e-12", {{"u", u}, {"delta", delta}, {"error", back - u}});
      }
      const double factor = std::exp(delta * std::abs(u));
      if (!detail::close(factor, 1.0 + delta * std::abs(w), 1e-12)) {
        r.fail("e^{delta|u|} != 1 + delta|w|", {{"u", u}, {"delta", delta}});
      }
      if (transform_forward(-u, delta) != -w) r.fail("forward transform not odd", {{"u", u}});
      if ((u > prev_u) != (w > prev_w) && u != prev_u) {
        r.fail("forward transform not monotone", {{"u0", prev_u}, {"u1", u}, {"delta", delta}});
      }
      prev_u = u;
      prev_w = w;
    }
  }
  return r;
}

template <int Dim>
std::vector<CheckResult> verify_operators(const Problem<Dim>& p, const ExperimentConfig& cfg,
                                          double sobolev_constant, std::mt19937_64& rng) {
  const auto& g = p.grid;
  const CsrMatrix s = assemble_operator(p.data.a);
  const CsrMatrix lap = assemble_laplacian(g);
  const double m = g.node_weight();

  CheckResult sym{"operator_symmetric"};
  sym.checked = 1;
  const double asym = s.asymmetry();
  if (asym > 1e-13 * s.norm_inf()) sym.fail("stiffness matrix not symmetric", {{"max_asymmetry", asym}});

  CheckResult ibp{"integration_by_parts"};
  CheckResult spd{"operator_coercive"};
  double lambda1 = 0.0;  // smallest eigenvalue of the discrete −Δ w.r.t. the nodal mass
  for (int k = 0; k < Dim; ++k) {
    const double sn = std::sin(std::numbers::pi * g.h()[k] / (2.0 * g.extent()[k]));
    lambda1 += 4.0 / (g.h()[k] * g.h()[k]) * sn * sn;
  }
  CheckResult hold{"discrete_hoelder"};
  CheckResult dual{"hminus1_duality"};
  CheckResult sob{"discrete_sobolev_inequality"};
  const double pf = cfg.exponents.f_norm;
  const double ps = cfg.exponents.sobolev;
  for (int n = 0; n < 20; ++n) {
    const auto u = detail::random_field(g, rng);
    const auto v = detail::random_field(g, rng);
    const auto w = detail::random_field(g, rng);
    const auto su = s * u.values;
    const double lhs = dot(su, v.values);
    const double rhs = energy_inner(p.data.a, gradient(u), gradient(v));
    ++ibp.checked;
    if (!detail::close(lhs, rhs, 1e-12, 1e-14 * s.norm_inf() * norm2(u.values) * norm2(v.values))) {
      ibp.fail("<S u, v> != <A Du, Dv>", {{"lhs", lhs}, {"rhs", rhs}});
    }
    ++spd.checked;
    const double rq = dot(su, u.values);
    const double bound = cfg.alpha * lambda1 * m * dot(u.values, u.values);
    if (rq < bound * (1.0 - 1e-12)) {
      spd.fail("u^T S u < alpha lambda_1 |u|^2", {{"rayleigh", rq}, {"bound", bound}});
    }
    ++hold.checked;
    double triple = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i) triple += std::abs(u[i] * v[i] * w[i]);
    triple *= m;
    const double hb = lp_norm(u, pf) * lp_norm(v, ps) * lp_norm(w, ps);
    if (triple > hb * (1.0 + 1e-12)) {
      hold.fail("sum |f v w| exceeds the Hoelder bound", {{"lhs", triple}, {"rhs", hb}});
    }
    ++dual.checked;
    const double fv = inner(u, v);
    const double db = hminus1_norm(u, lap) * h1_seminorm(v);
    if (std::abs(fv) > db * (1.0 + 1e-10)) {
      dual.fail("<f, v> exceeds ||f||_{-1} ||Dv||", {{"lhs", fv}, {"rhs", db}});
    }
    ++sob.checked;
    const double sv = lp_norm(v, ps);
    const double sbound = sobolev_constant * h1_seminorm(v);
    if (sv > sbound * (1.0 + 1e-12)) {
      sob.fail("||v||_p exceeds C_N ||Dv||", {{"lhs", sv}, {"rhs", sbound}});
    }
  }
  // Equality in the duality at the Riesz representative.
  {
    const auto z = riesz_representative(p.data.f, lap);
    const double fz = inner(p.data.f, z);
    const double nz = h1_seminorm(z);
    ++dual.checked;
    if (nz > 0.0 && !detail::close(fz, nz * nz, 1e-9)) {
      dual.fail("<f, z> != ||Dz||^2 at the Riesz representative", {{"lhs", fz}, {"rhs", nz * nz}});
    }
  }
  return {sym, ibp, spd, hold, dual, sob};
}

/// g_δ: the substitution identity, the C(λ) growth bound and, when δ₁
/// exists, 0 ≤ g_δ(t) < G|t|^{1+θ} on (0, δ₁].
inline std::vector<CheckResult> verify_g(const ProblemConstants& c, std::mt19937_64& rng,
                                         int samples = 10000) {
  CheckResult ident{"g_delta_identity"};
  CheckResult growth{"g_delta_lambda_bound"};
  CheckResult gbound{"g_delta_below_G"};
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  auto draw_t = [&] {
    const double mag = std::pow(10.0, -6.0 + 9.0 * unit(rng));  // |t| up to 10³
    return unit(rng) < 0.5 ? -mag : mag;
  };
  for (int n = 0; n < samples; ++n) {
    const double t = draw_t();
    const double delta = std::pow(10.0, -3.0 + 5.0 * unit(rng));
    const double g = g_delta(t, delta);
    const double lhs = t + g * sign(t);
    const double rhs = (1.0 + delta * std::abs(t)) * std::log1p(delta * std::abs(t)) / delta * sign(t);
    ++ident.checked;
    const double slack = std::abs(t) <= 1.0 ? 1e-13 : 1e-13 * std::abs(rhs);
    if (std::abs(lhs - rhs) > slack) {
      ident.fail("t + g_delta(t) sign t != (1+delta|t|) log(1+delta|t|)/delta sign t",
                 {{"t", t}, {"delta", delta}, {"lhs", lhs}, {"rhs", rhs}});
    }

    const double lambda = 0.01 + 0.98 * unit(rng);
    const double dstar = delta * (1.0 + 10.0 * unit(rng));
    const double bound = std::pow(dstar, lambda) * c_lambda_bound(lambda) * std::pow(std::abs(t), 1.0 + lambda);
    ++growth.checked;
    if (g < 0.0 || g > bound * (1.0 + 1e-12)) {
      growth.fail("g_delta outside [0, delta*^lambda C(lambda) |t|^{1+lambda}]",
                  {{"t", t}, {"delta", delta}, {"delta_star", dstar}, {"lambda", lambda},
                   {"g", g}, {"bound", bound}});
    }
  }
  if (c.alpha - c.cn2() * c.norm_a0_n2 > 0.0 && c.norm_f_n2 > 0.0) {
    const double theta = c.exponents.theta();
    const double d1 = compute_delta1(c);
    const double G = compute_G(c, theta);
    for (int n = 0; n < samples; ++n) {
      const double t = draw_t();
      const double delta = d1 * std::max(unit(rng), 1e-6);
      const double g = g_delta(t, delta);
      const double bound = G * std::pow(std::abs(t), 1.0 + theta);
      ++gbound.checked;
      if (g < 0.0 || !(g < bound * (1.0 + 1e-12))) {
        gbound.fail("g_delta outside [0, G|t|^{1+theta})",
                    {{"t", t}, {"delta", delta}, {"g", g}, {"bound", bound}});
      }
    }
  } else {
    gbound.status = "skipped";
    gbound.detail = "delta1 undefined for these constants";
  }
  return {ident, growth, gbound};
}

inline CheckResult verify_constants(const ProblemConstants& c, double tol) {
  CheckResult r{"constants_engine"};
  const double theta = c.exponents.theta();
  const Smallness s = check_smallness(c);
  if (!(c.alpha - c.cn2() * c.norm_a0_n2 > 0.0)) {
    r.status = "skipped";
    r.detail = "alpha - C_N^2 ||a0|| <= 0: delta1 undefined";
    return r;
  }
  const double d1 = compute_delta1(c);
  const double G = compute_G(c, theta);
  ++r.checked;
  if (!(theta > 0.0 && theta < 1.0)) r.fail("theta outside (0,1)", {{"theta", theta}});
  ++r.checked;
  const double g2 = std::pow(d1, theta) * c_lambda_bound(theta);
  if (!detail::close(G, g2, 1e-14)) r.fail("G != delta1^theta C(theta)", {{"G", G}, {"expected", g2}});
  double prev = -std::numeric_limits<double>::infinity();
  for (int i = 0; i < 50; ++i) {
    const double d = c.gamma + (d1 - c.gamma) * i / 49.0;
    if (d > d1) break;
    const double z = z_delta(d, c, theta, G);
    const double closed = phi_min(d, c, theta, G);
    const double subst = phi(d, z, c, theta, G);
    ++r.checked;
    if (!detail::close(closed, subst, 1e-12, 1e-14 * std::max(1.0, c.norm_f_hm1))) {
      r.fail("closed-form Phi_delta(Z_delta) != substitution", {{"delta", d}, {"closed", closed}, {"subst", subst}});
    }
    ++r.checked;
    if (!(closed > prev) && d > c.gamma) {
      r.fail("delta -> Phi_delta(Z_delta) not increasing", {{"delta", d}, {"value", closed}, {"previous", prev}});
    }
    prev = closed;
  }
  if (s.both()) {
    const auto d0 = solve_delta0(c, theta, G, tol);
    ++r.checked;
    if (!(c.gamma <= d0.delta0 && d0.delta0 < d1) ||
        std::abs(d0.residual) > tol * std::max(1.0, c.norm_f_hm1)) {
      r.fail("delta0 outside [gamma, delta1) or not a root",
             {{"delta0", d0.delta0}, {"delta1", d1}, {"residual", d0.residual}});
    }
  }
  r.info = {{"A1", s.a1.holds}, {"A3", s.a3.holds}};
  return r;
}

/// Runs the solve and checks ball, estimate chain, residuals and the
/// equivalence with the original equation.
template <int Dim>
std::vector<CheckResult> verify_solve(const ExperimentConfig& cfg, const Problem<Dim>& p) {
  CheckResult conv{"fixed_point_outcome"};
  CheckResult ball{"ball_invariance"};
  CheckResult est{"estimate_chain"};
  CheckResult resid{"fixed_point_residual"};
  CheckResult equiv{"equivalence_original_equation"};
  CheckResult energy{"inner_energy_identity"};
  std::vector<CheckResult*> all{&conv, &ball, &est, &resid, &equiv, &energy};
  SolveOutcome<Dim> o;
  try {
    o = run_solve(cfg, p);
  } catch (const smallness_violated& e) {
    for (auto* c : all) {
      c->status = "skipped";
      c->detail = e.what();
    }
    return {conv, ball, est, resid, equiv, energy};
  }
  const auto& cont = o.continuation;
  const double tol = o.setup.solver.outer_tol;
  for (std::size_t j = 0; j < cont.runs.size(); ++j) {
    const auto& run = cont.runs[j];
    ++conv.checked;
    // Non-convergence is an outcome, not a broken invariant.
    if (run.status != SolveStatus::converged && conv.status == "pass") {
      conv.status = "skipped";
      conv.detail = "outer iteration stopped with status " + std::string(to_string(run.status)) +
                    "; residual checks apply to converged runs only";
      conv.info = {{"k", cont.k_values[j]}, {"iterations", run.trace.size()},
                   {"cycle_period", run.cycle_period}, {"failure", run.failure}};
    }
    for (const auto& e : run.trace) {
      ++ball.checked;
      if (!e.in_ball) ball.fail("iterate left the ball", trace_line(cont.k_values[j], e));
      ++est.checked;
      if (!e.slack_ok) est.fail("estimate slack below -eps_solver", trace_line(cont.k_values[j], e));
    }
    ++resid.checked;
    if (run.status == SolveStatus::converged && cont.residual_truncated[j] > 3.0 * tol) {
      resid.fail("weak residual exceeds 3 outer_tol",
                 {{"k", cont.k_values[j]}, {"residual", cont.residual_truncated[j]}});
    }
  }
  ++equiv.checked;
  if (o.original.chain_factor_error > 1e-10 || !std::isfinite(o.original.residual)) {
    equiv.fail("e^{delta|u|} != 1 + delta|w| at the nodes",
               {{"chain_factor_error", o.original.chain_factor_error}});
  }
  equiv.info = {{"residual_original", o.original.residual},
                {"residual_transformed", o.residual_transformed},
                {"norm_identity_gap", o.original.norm_identity_gap}};

  // ⟨A DW, DW⟩ + Σ b sign_k(W) W = ⟨F̂, W⟩ for one inner solve at the solution.
  const Discretization<Dim> disc(p.data);
  SolverConfig sc = o.setup.solver;
  sc.k = cont.k_values.back();
  const auto fresh = inner_solve(disc, o.w, sc);
  const auto& W = fresh.w;
  const double a_term = energy_inner(p.data.a, gradient(W), gradient(W));
  double b_term = 0.0;
  for (std::size_t i = 0; i < W.size(); ++i) b_term += fresh.b[i] * sign_k(W[i], sc.k) * W[i];
  b_term *= p.grid.node_weight();
  const double rhs = inner(disc.rhs(o.w, sc.delta), W);
  ++energy.checked;
  if (b_term < 0.0 || !detail::close(a_term + b_term, rhs, 1e-8, 1e-14)) {
    energy.fail("energy identity of the inner solve fails",
                {{"A_term", a_term}, {"b_term", b_term}, {"rhs", rhs}});
  }
  return {conv, ball, est, resid, equiv, energy};
}

inline CommandResult cmd_verify(const ExperimentConfig& cfg, const std::filesystem::path& dir) {
  CommandResult out;
  std::mt19937_64 rng(cfg.seed);
  std::vector<CheckResult> checks;

  if (!cfg.grid) {
    const ResolvedConstants rc = resolve_declared(cfg);
    checks.push_back(verify_constants(rc.c, cfg.constants.tol));
    for (auto& c : verify_g(rc.c, rng)) checks.push_back(c);
    const double g = cfg.gamma;
    const std::vector<double> deltas{0.5 * g, g};
    checks.push_back(verify_transform(deltas, rng));
  } else {
    with_dimension(cfg, [&](auto dim) {
      constexpr int D = decltype(dim)::value;
      const auto p = build_problem<D>(cfg);
      CheckResult mf{"matrix_field"};
      mf.checked = static_cast<long>(p.data.a.cells.size());
      if (auto v = p.data.a.violation(cfg.alpha)) {
        std::size_t bad = 0;
        for (std::size_t c = 0; c < p.data.a.cells.size(); ++c) {
          const auto& a = p.data.a.cells[c];
          if (!is_symmetric<D>(a) || min_eigenvalue<D>(a) < cfg.alpha) {
            bad = c;
            break;
          }
        }
        mf.fail(*v, {{"cell", bad}, {"A", detail::mat_json<D>(p.data.a.cells[bad])}});
      }
      CheckResult cert{"H_certificate"};
      cert.checked = static_cast<long>(p.grid.nodes());
      const bool a_ok = mf.status == "pass";
      if (!a_ok) {
        cert.status = "skipped";
        cert.detail = "matrix field invalid";
      } else if (auto v = certificate_violation(p)) {
        cert.fail(*v, nullptr);
      }
      checks.push_back(mf);
      checks.push_back(cert);

      std::optional<ResolvedConstants> rc;
      try {
        rc = resolve_constants(cfg, p, true);
        out.warnings = rc->warnings;
      } catch (const error& e) {
        CheckResult c{"constants_resolution"};
        c.fail(e.what(), nullptr);
        checks.push_back(c);
      }

      std::vector<double> deltas{0.5 * cfg.gamma, cfg.gamma};
      if (a_ok) {
        for (auto& c : verify_pointwise(p, cfg.gamma, cfg.gamma, rng)) checks.push_back(c);
      }
      if (rc) {
        try {
          rc->c.validate();
          checks.push_back(verify_constants(rc->c, cfg.constants.tol));
          for (auto& c : verify_g(rc->c, rng)) checks.push_back(c);
          const auto s = check_smallness(rc->c);
          if (s.both()) {
            const double th = rc->c.exponents.theta();
            deltas.push_back(solve_delta0(rc->c, th, compute_G(rc->c, th), cfg.constants.tol).delta0);
          }
        } catch (const error& e) {
          CheckResult c{"constants_engine"};
          c.status = "skipped";
          c.detail = e.what();
          checks.push_back(c);
        }
      }
      checks.push_back(verify_transform(deltas, rng));
      if (a_ok && rc) {
        for (auto& c : verify_operators(p, cfg, rc->c.sobolev_constant, rng)) checks.push_back(c);
      }
      if (a_ok && cert.status == "pass" && rc) {
        try {
          for (auto& c : verify_solve(cfg, p)) checks.push_back(c);
        } catch (const error& e) {
          CheckResult c{"solve"};
          c.fail(e.what(), nullptr);
          checks.push_back(c);
        }
      }
    });
  }

  int failed = 0;
  ordered_json list = ordered_json::array();
  for (const auto& c : checks) {
    if (c.status == "fail") ++failed;
    list.push_back(to_json(c));
  }
  out.report["command"] = "verify";
  out.report["seed"] = cfg.seed;
  out.report["checks"] = list;
  out.report["failed"] = failed;
  out.report["passed"] = failed == 0;
  std::filesystem::create_directories(dir);
  auto os = detail::open_out(dir / "verify.json");
  os << out.report.dump(2) << '\n';
  out.exit_code = failed == 0 ? exit_code::ok : exit_code::invariant;
  return out;
}

// ---------------------------------------------------------------------------
// Dispatch

/// Runs one command, mapping library errors onto the exit-code contract.
inline CommandResult run_command(const std::string& name, const ExperimentConfig& cfg,
                                 const std::filesystem::path& dir) {
  auto failed = [&](int code, const std::string& kind, const std::string& what) {
    CommandResult r;
    r.exit_code = code;
    r.report["command"] = name;
    r.report["error"] = kind;
    r.report["message"] = what;
    return r;
  };
  try {
    if (name == "constants") return cmd_constants(cfg);
    if (name == "check") return cmd_check(cfg);
    if (name == "solve") return cmd_solve(cfg, dir);
    if (name == "sweep") return cmd_sweep(cfg, dir);
    if (name == "verify") return cmd_verify(cfg, dir);
    return failed(exit_code::config, "config_error", "unknown command '" + name + "'");
  } catch (const smallness_violated& e) {
    return failed(exit_code::smallness, "smallness_violated", e.what());
  } catch (const nonpositive_delta1& e) {
    return failed(exit_code::smallness, "smallness_violated", e.what());
  } catch (const invariant_violation& e) {
    return failed(exit_code::invariant, "invariant_violation", e.what());
  } catch (const iterative_solve_failure& e) {
    return failed(exit_code::nonconvergence, "iterative_solve_failure", e.what());
  } catch (const newton_stall& e) {
    return failed(exit_code::nonconvergence, "newton_stall", e.what());
  } catch (const degenerate_data& e) {
    return failed(exit_code::config, "degenerate_data", e.what());
  } catch (const error& e) {
    return failed(exit_code::config, "config_error", e.what());
  }
}

}  // namespace quadgrad
