// Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any FAIL.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "quadgrad/app.hpp"
#include "oracles.hpp"

namespace qg = quadgrad;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

qg::ExperimentConfig shipped(const std::string& name) {
  return qg::load_config(std::string(QG_CONFIG_DIR) + "/" + name + ".json");
}

struct Verdict {
  bool pass = true;
  std::ostringstream why;

  void require(bool ok, const std::string& what) {
    if (ok) return;
    if (pass) why << what;
    else why << "; " << what;
    pass = false;
  }
};

std::string fmt(double x) {
  std::ostringstream os;
  os.precision(4);
  os << x;
  return os.str();
}

double order(double coarse, double fine) { return std::log2(coarse / fine); }

// 1. Constants engine on random admissible sets.
void constants_engine(Verdict& v) {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(20240611);
  double worst_g = 0.0, worst_phi = 0.0, worst_root = 0.0;
  for (int set = 0; set < 200; ++set) {
    const auto d = qg::oracle::draw_admissible(rng);
    const auto& c = d.c;
    v.require(d.theta > 0.0 && d.theta < 1.0, "theta outside (0,1) in set " + std::to_string(set));
    const double d1 = qg::compute_delta1(c);
    const double g_alt = std::pow(d1, d.theta) * qg::c_lambda_bound(d.theta);
    worst_g = std::max(worst_g, std::abs(d.G - g_alt) / g_alt);
    for (double frac : {0.0, 0.25, 0.5, 0.9}) {
      const double delta = c.gamma + (d1 - c.gamma) * frac;
      const double closed = qg::phi_min(delta, c, d.theta, d.G);
      auto f = [&](double x) { return qg::phi(delta, x, c, d.theta, d.G); };
      double hi = 1.0;
      while (f(hi) <= c.norm_f_hm1) hi *= 2.0;
      const double oracle = qg::oracle::golden_min(f, 0.0, hi);
      worst_phi = std::max(worst_phi, std::abs(closed - oracle) / std::max(std::abs(closed), c.norm_f_hm1));
    }
    const auto s = qg::check_smallness(c, d.theta, d.G);
    if (!s.both()) continue;
    const auto r = qg::solve_delta0(c, d.theta, d.G);
    v.require(c.gamma <= r.delta0 && r.delta0 < d1, "delta0 outside [gamma, delta1)");
    worst_root = std::max(worst_root, std::abs(r.residual));
    const double closed = qg::oracle::delta0_closed_form(c, d.theta, d.G);
    v.require(std::abs(r.delta0 - closed) <= 1e-9 * closed, "delta0 differs from the closed form");
  }
  const double t = seconds_since(t0);
  v.require(worst_g <= 1e-14, "G rel. error " + fmt(worst_g));
  v.require(worst_phi <= 1e-12, "Phi(Z) vs golden section " + fmt(worst_phi));
  v.require(worst_root <= 1e-12, "|Phi_delta0(Z_delta0)| = " + fmt(worst_root));
  v.require(t < 5.0, "runtime " + fmt(t) + " s");
  v.why << (v.pass ? "" : " | ") << "G " << fmt(worst_g) << ", Phi " << fmt(worst_phi) << ", root "
        << fmt(worst_root) << ", " << fmt(t) << " s";
}

// 2. Pointwise bounds per catalog H model.
void pointwise_bounds(Verdict& v) {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(7);
  long samples = 0;
  auto absorb = [&](const std::vector<qg::CheckResult>& checks, const std::string& model) {
    for (const auto& c : checks) {
      samples += c.checked;
      v.require(c.status == "pass", model + ": " + c.name + " " + c.status);
    }
  };
  for (const char* name : {"bench_1d_tanh", "bench_2d_sign", "bench_1d_mu", "bench_2d_mu"}) {
    const auto cfg = shipped(name);
    qg::with_dimension(cfg, [&](auto dim) {
      constexpr int D = decltype(dim)::value;
      const auto p = qg::build_problem<D>(cfg);
      absorb(qg::verify_pointwise(p, cfg.gamma, cfg.gamma, rng, 10000), name);
      const auto d = qg::oracle::draw_admissible(rng);
      absorb(qg::verify_g(d.c, rng, 10000), name);
    });
  }
  const double t = seconds_since(t0);
  v.require(t < 5.0, "runtime " + fmt(t) + " s");
  v.why << (v.pass ? "" : " | ") << samples << " samples, " << fmt(t) << " s";
}

// 3. Transform roundtrip and the norm identity under refinement.
void transform(Verdict& v) {
  const auto cfg = shipped("bench_1d_tanh");
  const auto p = qg::build_problem<1>(cfg);
  const auto setup = qg::prepare_solve(cfg, p);
  const double g = cfg.gamma;
  const std::vector<double> deltas{0.5 * g, g, setup.solver.delta};
  std::mt19937_64 rng(cfg.seed);
  const auto r = qg::verify_transform(deltas, rng, 10000);
  v.require(r.status == "pass", "roundtrip: " + r.detail);
  double worst = std::numeric_limits<double>::infinity();
  for (double delta : deltas) {
    std::vector<double> gaps;
    for (int n : {63, 127, 255}) {
      const qg::Grid<1> grid({1.0}, {n});
      const auto u = qg::ScalarField<1>::sample(
          grid, [](const qg::Vec<1>& x) { return 2.0 * std::sin(std::numbers::pi * x[0]); });
      gaps.push_back(qg::norm_identity_gap(u, delta));
    }
    for (std::size_t i = 1; i < gaps.size(); ++i) worst = std::min(worst, order(gaps[i - 1], gaps[i]));
  }
  v.require(worst >= 0.9, "norm identity order " + fmt(worst));
  v.why << (v.pass ? "" : " | ") << "delta0 " << fmt(setup.solver.delta) << ", min order " << fmt(worst);
}

// 4. Linear oracle through the full pipeline.
void linear_oracle(Verdict& v) {
  const auto cfg = shipped("linear_oracle_1d");
  const auto p = qg::build_problem<1>(cfg);
  const auto o = qg::run_solve(cfg, p);
  v.require(o.continuation.complete, "pipeline did not converge");
  const double h = p.grid.h()[0];
  double err = 0.0;
  for (std::size_t i = 0; i < o.u.size(); ++i) {
    const double x = p.grid.node_position(i)[0];
    err = std::max(err, std::abs(o.u[i] - 0.5 * x * (1.0 - x)));
  }
  v.require(err <= 2.0 * h * h, "L-inf error " + fmt(err) + " > 2h^2 = " + fmt(2.0 * h * h));
  // The discrete Poisson solve is the reference the pipeline must reproduce.
  const auto lap = qg::assemble_laplacian(p.grid);
  const auto z = qg::riesz_representative(p.data.f, lap);
  double gap = 0.0;
  for (std::size_t i = 0; i < z.size(); ++i) gap = std::max(gap, std::abs(o.u[i] - z[i]));
  v.require(gap <= 2.0 * h * h, "distance to discrete Poisson " + fmt(gap));
  const double hm1 = qg::hminus1_norm(p.data.f);
  const double ref = 1.0 / std::sqrt(12.0);
  v.require(std::abs(hm1 - ref) <= 1e-3, "H^-1 norm " + fmt(hm1));
  v.why << (v.pass ? "" : " | ") << "L-inf " << fmt(err) << " (2h^2 = " << fmt(2.0 * h * h)
        << "), |f|_-1 " << fmt(hm1);
}

struct BenchRun {
  std::string name;
  double seconds = 0.0;
  bool complete = false;
  bool in_ball = true;
  bool residual_ok = true;
  long iterates = 0;
  long slack_records = 0;
  long slack_bad = 0;
  double worst_residual = 0.0;
  std::vector<double> increments;
  bool tail_zero = true;
  bool tail_monotone = true;
};

std::vector<BenchRun> run_benchmarks() {
  std::vector<BenchRun> out;
  for (const char* name : {"bench_1d_tanh", "bench_1d_mu", "bench_2d_sign", "bench_2d_mu"}) {
    const auto cfg = shipped(name);
    BenchRun b;
    b.name = name;
    const auto t0 = Clock::now();
    qg::with_dimension(cfg, [&](auto dim) {
      constexpr int D = decltype(dim)::value;
      const auto p = qg::build_problem<D>(cfg);
      qg::require_valid(p);
      const auto o = qg::run_solve(cfg, p);
      b.seconds = seconds_since(t0);
      const auto& c = o.continuation;
      b.complete = c.complete;
      const double tol = o.setup.solver.outer_tol;
      for (std::size_t j = 0; j < c.runs.size(); ++j) {
        for (const auto& e : c.runs[j].trace) {
          ++b.iterates;
          ++b.slack_records;
          if (!(e.norm_dw <= o.setup.ball.radius + e.eps_solver)) b.in_ball = false;
          if (!(e.slack >= -e.eps_solver)) ++b.slack_bad;
        }
        b.worst_residual = std::max(b.worst_residual, c.residual_truncated[j]);
        if (!(c.residual_truncated[j] <= 3.0 * tol)) b.residual_ok = false;
      }
      b.increments = c.increments;
      const double top = qg::lp_norm(c.final_solution(), std::numeric_limits<double>::infinity());
      const std::size_t last = c.k_values.size() - 1;
      for (std::size_t a = 0; a < c.n_ladder.size(); ++a) {
        if (c.n_ladder[a] > top && c.tail_energy[a][last] != 0.0) b.tail_zero = false;
        if (a > 0 && c.tail_energy[a][last] > c.tail_energy[a - 1][last]) b.tail_monotone = false;
      }
    });
    out.push_back(b);
  }
  return out;
}

// 5. Ball invariance and converged residual on the benchmarks.
void ball_invariance(Verdict& v, const std::vector<BenchRun>& runs) {
  for (const auto& b : runs) {
    v.require(b.complete, b.name + " did not converge");
    v.require(b.in_ball, b.name + " left the ball");
    v.require(b.residual_ok, b.name + " residual " + fmt(b.worst_residual));
    v.require(b.seconds < 60.0, b.name + " took " + fmt(b.seconds) + " s");
  }
  std::string sep = v.pass ? "" : " | ";
  for (const auto& b : runs) {
    v.why << sep << b.name << ": " << b.iterates << " iterates, res " << fmt(b.worst_residual)
          << ", " << fmt(b.seconds) << " s";
    sep = ", ";
  }
}

// 6. Estimate chain slack.
void estimate_chain(Verdict& v, const std::vector<BenchRun>& runs) {
  long total = 0, bad = 0;
  for (const auto& b : runs) {
    total += b.slack_records;
    bad += b.slack_bad;
  }
  v.require(bad == 0, std::to_string(bad) + " inner solves below -eps_solver");
  v.require(total > 0, "no inner solves recorded");
  v.why << (v.pass ? "" : " | ") << total - bad << "/" << total << " inner solves with slack >= -eps";
}

// 7. k-continuation diagnostics.
void continuation(Verdict& v, const std::vector<BenchRun>& runs) {
  for (const auto& b : runs) {
    const auto& inc = b.increments;
    if (inc.size() < 3) {
      v.require(false, b.name + " has fewer than three increments");
      continue;
    }
    const std::size_t m = inc.size();
    v.require(inc[m - 3] >= inc[m - 2] && inc[m - 2] >= inc[m - 1],
              b.name + " increments " + fmt(inc[m - 3]) + ", " + fmt(inc[m - 2]) + ", " + fmt(inc[m - 1]));
    v.require(b.tail_zero, b.name + " tail energy nonzero above max|w|");
    v.require(b.tail_monotone, b.name + " tail energy increases in n");
  }
  if (v.pass) v.why << "last three increments nonincreasing and tail energy exact on " << runs.size() << " configs";
}

// 8. Residual of the original equation under refinement.
void equivalence(Verdict& v) {
  auto cfg = shipped("bench_1d_tanh");
  cfg.solver.base.k_schedule = {1e6};
  std::vector<double> res;
  for (int n : {63, 127, 255}) {
    cfg.grid->n = {n};
    const auto p = qg::build_problem<1>(cfg);
    const auto o = qg::run_solve(cfg, p);
    v.require(o.continuation.complete, "n = " + std::to_string(n) + " did not converge");
    res.push_back(o.original.residual);
  }
  for (std::size_t i = 1; i < res.size(); ++i) {
    const double ord = order(res[i - 1], res[i]);
    v.require(ord >= 0.9, "order " + fmt(ord) + " between " + fmt(res[i - 1]) + " and " + fmt(res[i]));
  }
  v.why << (v.pass ? "" : " | ") << "residuals " << fmt(res[0]) << ", " << fmt(res[1]) << ", " << fmt(res[2]);
}

// 9. δ-sweep structure.
void frontier(Verdict& v) {
  const auto dir = fs::temp_directory_path() / "qg_acceptance_sweep";
  const auto r = qg::run_command("sweep", shipped("bench_1d_tanh"), dir);
  v.require(r.exit_code == 0, "sweep exit " + std::to_string(r.exit_code));
  if (r.exit_code == 0) {
    const int changes = r.report["sign_changes"].get<int>();
    v.require(changes == 1, std::to_string(changes) + " sign changes");
    v.require(r.report["Y_brackets_Z_delta0"].get<bool>(), "Y zeros do not bracket Z_delta0");
    v.require(r.report["Z_strictly_decreasing"].get<bool>(), "Z_delta not strictly decreasing");
    v.why << (v.pass ? "" : " | ") << r.report["points"].get<int>() << " rows, delta0 "
          << fmt(r.report["delta0"].get<double>());
  }
  fs::remove_all(dir);
}

// 10. Exit codes for inadmissible data and a cycling Picard iteration.
void honest_failure(Verdict& v) {
  const auto a3_dir = fs::temp_directory_path() / "qg_acceptance_a3";
  fs::remove_all(a3_dir);
  const auto a3 = qg::run_command("solve", shipped("a3_violating"), a3_dir);
  v.require(a3.exit_code == 3, "a3_violating exit " + std::to_string(a3.exit_code));
  v.require(!fs::exists(a3_dir / "trace.jsonl"), "a3_violating produced a trace");
  fs::remove_all(a3_dir);

  const auto nc_dir = fs::temp_directory_path() / "qg_acceptance_nonconvergent";
  fs::remove_all(nc_dir);
  const auto cfg = shipped("nonconvergent_rho1");
  const auto nc = qg::run_command("solve", cfg, nc_dir);
  v.require(nc.exit_code == 4, "nonconvergent exit " + std::to_string(nc.exit_code));
  if (nc.report.contains("summary")) {
    std::size_t expected = 0;
    for (const auto& e : nc.report["summary"]["runs"]) expected += e["outer_iterations"].get<std::size_t>();
    std::ifstream is(nc_dir / "trace.jsonl");
    std::size_t lines = 0;
    for (std::string line; std::getline(is, line);) lines += !line.empty();
    v.require(lines == expected && expected > 0, "trace has " + std::to_string(lines) + " of " +
                                                     std::to_string(expected) + " iterates");
    const auto& last = nc.report["summary"]["runs"].back();
    v.require(last["status"] == "max_iterations", "last run status " + last["status"].dump());
    v.why << (v.pass ? "" : " | ") << "exit 3 without solve, exit 4 with " << lines << " trace lines";
  }
  fs::remove_all(nc_dir);
}

}  // namespace

int main() {
  int failed = 0;
  auto report = [&](int id, const char* title, const std::function<void(Verdict&)>& fn) {
    Verdict v;
    try {
      fn(v);
    } catch (const std::exception& e) {
      v.require(false, std::string("exception: ") + e.what());
    }
    failed += !v.pass;
    std::printf("%s criterion %d (%s): %s\n", v.pass ? "PASS" : "FAIL", id, title, v.why.str().c_str());
    std::fflush(stdout);
  };
  report(1, "constants engine", constants_engine);
  report(2, "pointwise bounds", pointwise_bounds);
  report(3, "transform", transform);
  report(4, "linear oracle", linear_oracle);
  std::vector<BenchRun> runs;
  std::string bench_error;
  try {
    runs = run_benchmarks();
  } catch (const std::exception& e) {
    bench_error = e.what();
  }
  auto with_runs = [&](void (*fn)(Verdict&, const std::vector<BenchRun>&)) {
    return [&, fn](Verdict& v) {
      if (!bench_error.empty()) throw std::runtime_error(bench_error);
      fn(v, runs);
    };
  };
  report(5, "ball invariance", with_runs(ball_invariance));
  report(6, "estimate chain", with_runs(estimate_chain));
  report(7, "k-continuation", with_runs(continuation));
  report(8, "equivalence", equivalence);
  report(9, "frontier", frontier);
  report(10, "honest failure", honest_failure);
  return failed == 0 ? 0 : 1;
}
