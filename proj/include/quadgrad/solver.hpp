#pragma once

// Truncated approximate problem
//
//   −div(A Dw) + T_k(K_δ(x,w,Dw)) sign_k(w) = (1+δ|w|) f + a₀ w + a₀ g_δ(w) sign(w)
//
// solved by relaxed Picard iteration on the map w ↦ W, where W solves the
// monotone semilinear problem with the coefficient b = T_k(K_δ(x,w,Dw))
// frozen. Every outer step checks the a priori estimate for W and the ball
// ‖Dw‖₂ ≤ R, with R = Z_{δ₀} (or Y_δ^− when δ < δ₀).

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "quadgrad/constants.hpp"
#include "quadgrad/errors.hpp"
#include "quadgrad/grid.hpp"
#include "quadgrad/nonlinear.hpp"
#include "quadgrad/operators.hpp"
#include "quadgrad/sparse.hpp"

namespace quadgrad {

template <int Dim>
struct ProblemData {
  MatrixField<Dim> a;
  ScalarField<Dim> f;
  ScalarField<Dim> a0;
  ScalarField<Dim> mu;  ///< coefficient of the μ|ξ|² model; zero otherwise
  HModel h;
  double alpha = 1.0;

  [[nodiscard]] const Grid<Dim>& grid() const { return a.grid; }
};

struct SolverConfig {
  double delta = 0.0;
  double k = 1e6;
  double relaxation = 0.5;
  double outer_tol = 1e-10;
  double inner_tol = 1e-11;
  double cg_tol = 1e-12;
  int max_outer = 500;
  int max_inner = 60;
  std::vector<double> k_schedule;
  std::vector<double> n_ladder;

  void validate(double gamma) const {
    if (!(delta >= gamma)) {
      throw domain_error("delta = " + detail::fmt(delta) + " < gamma = " + detail::fmt(gamma) +
                         ": K_delta >= 0 needs delta >= gamma");
    }
    if (!(relaxation > 0.0 && relaxation <= 1.0)) throw domain_error("relaxation must lie in (0, 1]");
    if (!(k > 0.0)) throw domain_error("truncation height k must be > 0");
    if (!(outer_tol > 0.0 && inner_tol > 0.0 && cg_tol > 0.0)) {
      throw domain_error("tolerances must be positive");
    }
    if (max_outer < 1 || max_inner < 1) throw domain_error("iteration limits must be >= 1");
    for (std::size_t i = 1; i < k_schedule.size(); ++i) {
      if (!(k_schedule[i] > k_schedule[i - 1])) throw domain_error("k_schedule must increase");
    }
  }

  /// Slack allowed in the invariant checks.
  [[nodiscard]] double eps_solver(double fhat_norm) const {
    return 10.0 * (inner_tol + cg_tol) * (1.0 + fhat_norm);
  }
};

/// Discrete constants entering the estimate and the ball radius.
struct BallSpec {
  ProblemConstants constants;
  double theta = 0.0;
  double G = 0.0;
  double delta = 0.0;
  double radius = 0.0;
};

/// Assembled operators and coefficient lookup for one problem.
template <int Dim>
class Discretization {
 public:
  explicit Discretization(const ProblemData<Dim>& data)
      : data_(&data), stiffness_(assemble_operator(data.a)) {}

  [[nodiscard]] const ProblemData<Dim>& data() const { return *data_; }
  [[nodiscard]] const Grid<Dim>& grid() const { return data_->grid(); }
  [[nodiscard]] const CsrMatrix& stiffness() const { return stiffness_; }

  [[nodiscard]] PointData<Dim> point(std::size_t cell, std::size_t node) const {
    return PointData<Dim>{data_->a.cells[cell], data_->mu[node]};
  }

  /// Nodal average over the owned gradient samples of fn(x, ζ).
  template <class F>
  [[nodiscard]] std::vector<double> nodal_average(const VectorField<Dim>& grad, F&& fn) const {
    const Grid<Dim>& g = grid();
    std::vector<double> out(g.nodes(), 0.0);
    for (std::size_t i = 0; i < out.size(); ++i) {
      double s = 0.0;
      g.for_each_owned_sample(i, [&](std::size_t cell, int corner) {
        s += fn(point(cell, i), grad.at(cell, corner), i);
      });
      out[i] = s / Grid<Dim>::kCorners;
    }
    return out;
  }

  /// K_δ(x, w, Dw) at the nodes.
  [[nodiscard]] std::vector<double> nodal_k(const ScalarField<Dim>& w, double delta) const {
    const auto grad = gradient(w);
    return nodal_average(grad, [&](const PointData<Dim>& x, const Vec<Dim>& z, std::size_t i) {
      return k_delta<Dim>(x, w[i], z, delta, data_->h);
    });
  }

  /// K_δ(x, w, Dw) sign(w) at the nodes, expanded form.
  [[nodiscard]] std::vector<double> nodal_k_signed(const ScalarField<Dim>& w, double delta) const {
    const auto grad = gradient(w);
    return nodal_average(grad, [&](const PointData<Dim>& x, const Vec<Dim>& z, std::size_t i) {
      return k_delta_signed<Dim>(x, w[i], z, delta, data_->h);
    });
  }

  /// Upper bound (c₀+δ) A ζζ averaged at the nodes; scale for b ≥ 0 checks.
  [[nodiscard]] std::vector<double> nodal_k_scale(const ScalarField<Dim>& w, double delta) const {
    const auto grad = gradient(w);
    return nodal_average(grad, [&](const PointData<Dim>& x, const Vec<Dim>& z, std::size_t) {
      return (data_->h.c0_cert + delta) * quad<Dim>(x.a, z);
    });
  }

  /// H(x, u, Du) at the nodes.
  [[nodiscard]] std::vector<double> nodal_h(const ScalarField<Dim>& u) const {
    const auto grad = gradient(u);
    return nodal_average(grad, [&](const PointData<Dim>& x, const Vec<Dim>& z, std::size_t i) {
      return data_->h(x, u[i], z);
    });
  }

  /// (1+δ|w|) f + a₀ w + a₀ g_δ(w) sign(w)
  [[nodiscard]] ScalarField<Dim> rhs(const ScalarField<Dim>& w, double delta) const {
    ScalarField<Dim> out(grid());
    const auto& f = data_->f;
    const auto& a0 = data_->a0;
    for (std::size_t i = 0; i < out.size(); ++i) {
      out[i] = (1.0 + delta * std::abs(w[i])) * f[i] + a0[i] * w[i] +
               a0[i] * g_delta(w[i], delta) * sign(w[i]);
    }
    return out;
  }

 private:
  const ProblemData<Dim>* data_;
  CsrMatrix stiffness_;
};

template <int Dim>
struct InnerResult {
  ScalarField<Dim> w;
  int iterations = 0;
  double relative_residual = 0.0;
  double fhat_norm = 0.0;  ///< discrete L² norm of the right-hand side
  std::vector<double> b;   ///< T_k(K_δ) at the nodes
};

/// b = T_k(K_δ(x, w, Dw)) at the nodes; rejects b < 0 (δ < γ misuse).
template <int Dim>
std::vector<double> frozen_coefficient(const Discretization<Dim>& disc, const ScalarField<Dim>& w,
                                       double delta, double k) {
  std::vector<double> b = disc.nodal_k(w, delta);
  const std::vector<double> scale = disc.nodal_k_scale(w, delta);
  for (std::size_t i = 0; i < b.size(); ++i) {
    if (b[i] < -1e-12 * scale[i]) {
      throw invariant_violation("T_k(K_delta) < 0 at node " + std::to_string(i) + " (" +
                                detail::fmt(b[i]) + "); requires delta >= gamma");
    }
    b[i] = truncate_T(std::max(b[i], 0.0), k);
  }
  return b;
}

/// Solves −div(A DW) + b sign_k(W) = F̂(w) for W by damped semismooth Newton.
///
/// Newton runs at k directly; if it stalls (steep sign_k with plateaus where
/// W ≡ 0), it restarts with path-following over κ = 1, 10, ..., k, each stage
/// warm-started from the previous one.
template <int Dim>
InnerResult<Dim> inner_solve(const Discretization<Dim>& disc, const ScalarField<Dim>& w,
                             const SolverConfig& cfg, const ScalarField<Dim>* guess = nullptr) {
  const Grid<Dim>& g = disc.grid();
  const std::size_t n = g.nodes();
  const double m = g.node_weight();
  const double k = cfg.k;

  InnerResult<Dim> out;
  out.b = frozen_coefficient(disc, w, cfg.delta, k);
  const ScalarField<Dim> fhat = disc.rhs(w, cfg.delta);
  out.fhat_norm = lp_norm(fhat, 2.0);

  std::vector<double> load(n);
  for (std::size_t i = 0; i < n; ++i) load[i] = m * fhat[i];
  const double load_norm = norm2(load);
  if (load_norm == 0.0) {
    out.w = ScalarField<Dim>(g);
    return out;
  }
  const CsrMatrix& s = disc.stiffness();
  const auto& b = out.b;
  const double s_norm = s.norm_inf();
  const double b_norm = m * norm2(b);

  std::vector<double> sx(n);
  auto residual = [&](const std::vector<double>& v, double kappa, std::vector<double>& res) {
    s.apply(v, sx);
    for (std::size_t i = 0; i < n; ++i) res[i] = sx[i] + m * b[i] * sign_k(v[i], kappa) - load[i];
    return norm2(res);
  };
  auto converged = [&](double res, const std::vector<double>& v) {
    return res <= cfg.inner_tol * load_norm ||
           res <= attainable_residual(s_norm, norm2(v), load_norm + b_norm);
  };

  int total = 0;
  double rnorm = 0.0;
  // Newton at sign_{kappa}; false on stall, x holds the last iterate.
  auto newton = [&](std::vector<double>& x, double kappa) {
    std::vector<double> r(n), diag(n), trial(n), rtrial(n), minus_r(n), sd(n);
    rnorm = residual(x, kappa, r);
    for (int it = 0; !converged(rnorm, x); ++it) {
      if (it == cfg.max_inner) return false;
      ++total;
      for (std::size_t i = 0; i < n; ++i) diag[i] = m * b[i] * sign_k_slope(x[i], kappa);
      const CsrMatrix jac = s.plus_diagonal(diag);
      for (std::size_t i = 0; i < n; ++i) minus_r[i] = -r[i];
      const auto step = cg_solve(jac, minus_r, cfg.cg_tol);
      const std::vector<double>& d = step.x;

      // Exact line search: E(x + t d) is convex and piecewise quadratic in t,
      // so its derivative is monotone and bisection finds the minimiser.
      s.apply(d, sd);
      const double dsd = dot(d, sd);
      const double r0d = dot(r, d);
      auto dphi = [&](double t) {
        double v = r0d + t * dsd;
        for (std::size_t i = 0; i < n; ++i) {
          if (d[i] != 0.0 && b[i] != 0.0) {
            v += m * b[i] * d[i] * (sign_k(x[i] + t * d[i], kappa) - sign_k(x[i], kappa));
          }
        }
        return v;
      };
      if (!(r0d < 0.0)) return false;
      double lo = 0.0;
      double hi = 1.0;
      while (dphi(hi) < 0.0 && hi < 1e6) {
        lo = hi;
        hi *= 2.0;
      }
      double t = hi;
      if (dphi(hi) > 0.0) {
        for (int ls = 0; ls < 100 && hi - lo > 1e-15 * hi; ++ls) {
          const double mid = 0.5 * (lo + hi);
          (dphi(mid) < 0.0 ? lo : hi) = mid;
        }
        t = 0.5 * (lo + hi);
        if (std::abs(t - 1.0) < 1e-12) t = 1.0;  // keep the exact Newton step
      }
      for (std::size_t i = 0; i < n; ++i) trial[i] = x[i] + t * d[i];
      rnorm = residual(trial, kappa, rtrial);
      x.swap(trial);
      r.swap(rtrial);
    }
    return true;
  };

  std::vector<double> x = guess ? guess->values : std::vector<double>(n, 0.0);
  if (!newton(x, k)) {
    std::fill(x.begin(), x.end(), 0.0);
    double kappa = std::min(k, 1.0);
    while (true) {
      if (!newton(x, kappa)) {
        throw newton_stall("inner Newton stalled at sign_k slope " + detail::fmt(kappa) +
                               " after " + std::to_string(total) + " iterations",
                           rnorm / load_norm);
      }
      if (kappa >= k) break;
      kappa = std::min(k, 10.0 * kappa);
    }
  }
  out.iterations = total;
  out.relative_residual = rnorm / load_norm;
  out.w = ScalarField<Dim>(g, std::move(x));
  return out;
}

/// Right-hand side of the a priori estimate minus α‖DW‖₂, for X = ‖Dw‖₂.
inline double estimate_slack(double norm_dw, double norm_dW, const BallSpec& ball) {
  const ProblemConstants& c = ball.constants;
  const double rhs = c.norm_f_hm1 + ball.delta * c.cn2() * c.norm_f_n2 * norm_dw +
                     c.cn2() * c.norm_a0_n2 * norm_dw +
                     power_coefficient(c, ball.theta, ball.G) * std::pow(norm_dw, 1.0 + ball.theta);
  return rhs - c.alpha * norm_dW;
}

template <int Dim>
double estimate_check(const ScalarField<Dim>& w, const ScalarField<Dim>& W, const BallSpec& ball) {
  return estimate_slack(h1_seminorm(w), h1_seminorm(W), ball);
}

/// Weak residual of the truncated problem (T_k and sign_k) at w.
template <int Dim>
double residual_truncated(const Discretization<Dim>& disc, const ScalarField<Dim>& w,
                          double delta, double k) {
  const double m = disc.grid().node_weight();
  const std::vector<double> kk = disc.nodal_k(w, delta);
  const ScalarField<Dim> fhat = disc.rhs(w, delta);
  std::vector<double> r = disc.stiffness() * w.values;
  std::vector<double> load(r.size());
  for (std::size_t i = 0; i < r.size(); ++i) {
    load[i] = m * fhat[i];
    r[i] += m * truncate_T(kk[i], k) * sign_k(w[i], k) - load[i];
  }
  const double ln = norm2(load);
  return ln == 0.0 ? norm2(r) : norm2(r) / ln;
}

/// Rounding level of residual_truncated at w: the relative residual that
/// floating-point evaluation cannot resolve below.
template <int Dim>
double residual_truncated_floor(const Discretization<Dim>& disc, const ScalarField<Dim>& w,
                                double delta, double k) {
  const double m = disc.grid().node_weight();
  const std::vector<double> kk = disc.nodal_k(w, delta);
  const ScalarField<Dim> fhat = disc.rhs(w, delta);
  double load = 0.0, lower = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i) {
    load += m * m * fhat[i] * fhat[i];
    const double t = m * truncate_T(kk[i], k);
    lower += t * t;
  }
  load = std::sqrt(load);
  if (load == 0.0) return 0.0;
  return attainable_residual(disc.stiffness().norm_inf(), norm2(w.values), load + std::sqrt(lower)) /
         load;
}

struct TraceEntry {
  int iteration = 0;
  double norm_dw = 0.0;    ///< ‖Dw^m‖₂
  double norm_dW = 0.0;    ///< ‖D S(w^m)‖₂
  double increment = 0.0;  ///< ‖D(w^{m+1} − w^m)‖₂
  double slack = 0.0;      ///< estimate right-hand side − α‖DS(w^m)‖₂
  double eps_solver = 0.0;
  double radius = 0.0;
  int inner_iterations = 0;
  double inner_residual = 0.0;
  bool in_ball = true;
  bool slack_ok = true;
  std::optional<double> residual;  ///< truncated-problem residual at S(w^m), once checked
};

enum class SolveStatus { converged, max_iterations, inner_failure, invariant_violation };

inline const char* to_string(SolveStatus s) {
  switch (s) {
    case SolveStatus::converged:
      return "converged";
    case SolveStatus::max_iterations:
      return "max_iterations";
    case SolveStatus::inner_failure:
      return "inner_failure";
    case SolveStatus::invariant_violation:
      return "invariant_violation";
  }
  return "unknown";
}

template <int Dim>
struct FixedPointResult {
  ScalarField<Dim> w;
  std::vector<TraceEntry> trace;
  SolveStatus status = SolveStatus::max_iterations;
  bool converged = false;
  int violations = 0;
  int cycle_period = 0;  ///< 2 when the iterates alternate instead of settling
  std::string failure;   ///< message of an inner solver failure
};

/// Relaxed Picard iteration w^{m+1} = (1−ρ)w^m + ρS(w^m) from w⁰ = 0, stopped
/// once ‖D(w^{m+1} − w^m)‖₂ and the weak residual at S(w^m) are both within
/// outer_tol. The returned field is S(w^m) for the last iterate.
template <int Dim>
FixedPointResult<Dim> outer_fixed_point(const Discretization<Dim>& disc, const SolverConfig& cfg,
                                        const BallSpec& ball) {
  cfg.validate(ball.constants.gamma);
  const Grid<Dim>& g = disc.grid();
  FixedPointResult<Dim> out;
  ScalarField<Dim> w(g);
  ScalarField<Dim> previous(g);
  ScalarField<Dim> W(g);
  const double rho = cfg.relaxation;
  double last_two_step = 0.0;

  for (int m = 1; m <= cfg.max_outer; ++m) {
    InnerResult<Dim> inner;
    try {
      inner = inner_solve(disc, w, cfg, &W);
    } catch (const newton_stall& e) {
      out.failure = e.what();
      break;
    } catch (const iterative_solve_failure& e) {
      out.failure = e.what();
      break;
    }
    W = std::move(inner.w);

    TraceEntry e;
    e.iteration = m;
    e.norm_dw = h1_seminorm(w);
    e.norm_dW = h1_seminorm(W);
    e.slack = estimate_slack(e.norm_dw, e.norm_dW, ball);
    e.eps_solver = cfg.eps_solver(inner.fhat_norm);
    e.radius = ball.radius;
    e.inner_iterations = inner.iterations;
    e.inner_residual = inner.relative_residual;
    e.in_ball = e.norm_dw <= ball.radius + e.eps_solver && e.norm_dW <= ball.radius + e.eps_solver;
    e.slack_ok = e.slack >= -e.eps_solver;

    ScalarField<Dim> next(g);
    ScalarField<Dim> diff(g);
    ScalarField<Dim> two_step(g);
    for (std::size_t i = 0; i < next.size(); ++i) {
      next[i] = (1.0 - rho) * w[i] + rho * W[i];
      diff[i] = next[i] - w[i];
      two_step[i] = next[i] - previous[i];
    }
    e.increment = h1_seminorm(diff);
    last_two_step = h1_seminorm(two_step);
    if (!e.in_ball || !e.slack_ok) ++out.violations;
    out.trace.push_back(e);

    // A small increment alone does not bound the equation residual at S(w^m)
    // by outer_tol; both are required. On fine grids the residual bottoms out
    // at rounding level, which is accepted as well.
    if (e.increment <= cfg.outer_tol) {
      e.residual = residual_truncated(disc, W, cfg.delta, cfg.k);
      out.trace.back().residual = e.residual;
      if (*e.residual <= std::max(cfg.outer_tol, residual_truncated_floor(disc, W, cfg.delta, cfg.k))) {
        out.converged = true;
        out.w = W;
        break;
      }
    }
    previous = std::move(w);
    w = std::move(next);
  }

  if (!out.converged) {
    out.w = w;
    const double last = out.trace.empty() ? 0.0 : out.trace.back().increment;
    if (out.trace.size() > 2 && last_two_step < 1e-3 * last) out.cycle_period = 2;
  }
  if (out.violations > 0) {
    out.status = SolveStatus::invariant_violation;
  } else if (out.converged) {
    out.status = SolveStatus::converged;
  } else {
    out.status = out.failure.empty() ? SolveStatus::max_iterations : SolveStatus::inner_failure;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Residuals

/// Weak residual of the untruncated transformed problem (exact sign).
template <int Dim>
double residual_transformed(const Discretization<Dim>& disc, const ScalarField<Dim>& w,
                            double delta) {
  const double m = disc.grid().node_weight();
  const std::vector<double> ks = disc.nodal_k_signed(w, delta);
  const ScalarField<Dim> fhat = disc.rhs(w, delta);
  std::vector<double> r = disc.stiffness() * w.values;
  std::vector<double> load(r.size());
  for (std::size_t i = 0; i < r.size(); ++i) {
    load[i] = m * fhat[i];
    r[i] += m * ks[i] - load[i];
  }
  const double ln = norm2(load);
  return ln == 0.0 ? norm2(r) : norm2(r) / ln;
}

template <int Dim>
ScalarField<Dim> reconstruct_u(const ScalarField<Dim>& w, double delta) {
  ScalarField<Dim> u(w.grid);
  for (std::size_t i = 0; i < u.size(); ++i) u[i] = transform_inverse(w[i], delta);
  return u;
}

template <int Dim>
ScalarField<Dim> forward_field(const ScalarField<Dim>& u, double delta) {
  ScalarField<Dim> w(u.grid);
  for (std::size_t i = 0; i < w.size(); ++i) {
    try {
      w[i] = transform_forward(u[i], delta);
    } catch (const transform_overflow& e) {
      throw transform_overflow(std::string(e.what()) + " at node " + std::to_string(i),
                               static_cast<long>(i));
    }
  }
  return w;
}

/// Relative gap between ‖e^{δ|u|}Du‖₂ and ‖Dw‖₂ for w = forward(u); the
/// weight is sampled at the node owning each gradient sample.
template <int Dim>
double norm_identity_gap(const ScalarField<Dim>& u, double delta) {
  const ScalarField<Dim> w = forward_field(u, delta);
  const Grid<Dim>& g = u.grid;
  const auto du = gradient(u);
  double s = 0.0;
  for (std::size_t c = 0; c < g.cells(); ++c) {
    const auto cell = g.cell_coords(c);
    for (int corner = 0; corner < Grid<Dim>::kCorners; ++corner) {
      const double weight = std::exp(delta * std::abs(u.at_full(g.corner_full(cell, corner))));
      const auto& z = du.at(c, corner);
      s += weight * weight * dot<Dim>(z, z);
    }
  }
  const double lhs = std::sqrt(g.quad_weight() * s);
  const double rhs = h1_seminorm(w);
  return rhs == 0.0 ? lhs : std::abs(lhs - rhs) / rhs;
}

struct OriginalResidual {
  double residual = 0.0;            ///< weak residual of the original equation at u
  double chain_factor_error = 0.0;  ///< max |e^{δ|u|} − (1+δ|w|)| / (1+δ|w|)
  double norm_identity_gap = 0.0;   ///< |‖e^{δ|u|}Du‖ − ‖Dw‖| / ‖Dw‖
};

/// Reconstructs u from w and evaluates the original equation
/// −div(A Du) = H(x,u,Du) + a₀u + f in weak form.
template <int Dim>
OriginalResidual residual_original(const Discretization<Dim>& disc, const ScalarField<Dim>& w,
                                   double delta) {
  const auto& data = disc.data();
  const double m = disc.grid().node_weight();
  const ScalarField<Dim> u = reconstruct_u(w, delta);
  const std::vector<double> hh = disc.nodal_h(u);
  std::vector<double> r = disc.stiffness() * u.values;
  std::vector<double> load(r.size());
  OriginalResidual out;
  for (std::size_t i = 0; i < r.size(); ++i) {
    load[i] = m * (hh[i] + data.a0[i] * u[i] + data.f[i]);
    r[i] -= load[i];
    const double factor = 1.0 + delta * std::abs(w[i]);
    out.chain_factor_error =
        std::max(out.chain_factor_error, std::abs(std::exp(delta * std::abs(u[i])) - factor) / factor);
  }
  const double ln = norm2(load);
  out.residual = ln == 0.0 ? norm2(r) : norm2(r) / ln;
  out.norm_identity_gap = norm_identity_gap(u, delta);
  return out;
}

// ---------------------------------------------------------------------------
// Continuation in k

template <int Dim>
struct ContinuationResult {
  std::vector<double> k_values;
  std::vector<ScalarField<Dim>> solutions;
  std::vector<FixedPointResult<Dim>> runs;  ///< solutions stripped of their fields
  std::vector<double> n_ladder;
  std::vector<std::vector<double>> tail_energy;  ///< [n][k] ‖DG_n(w_k)‖₂²
  std::vector<double> increments;                ///< ‖D(w_{k_i} − w_{k_{i+1}})‖₂
  std::vector<std::vector<double>> truncation_increments;  ///< [n][i]
  std::vector<double> residual_truncated;
  std::vector<double> residual_transformed;
  bool complete = false;

  [[nodiscard]] const ScalarField<Dim>& final_solution() const { return solutions.back(); }
};

/// Solves the truncated problem for each k of the schedule and records the
/// tail energies and Cauchy increments of the sequence w_k.
template <int Dim>
ContinuationResult<Dim> k_continuation(const Discretization<Dim>& disc, const SolverConfig& cfg,
                                       const BallSpec& ball) {
  ContinuationResult<Dim> out;
  out.n_ladder = cfg.n_ladder;
  std::vector<double> schedule = cfg.k_schedule.empty() ? std::vector<double>{cfg.k} : cfg.k_schedule;
  for (double k : schedule) {
    SolverConfig c = cfg;
    c.k = k;
    auto run = outer_fixed_point(disc, c, ball);
    out.k_values.push_back(k);
    out.residual_truncated.push_back(residual_truncated(disc, run.w, cfg.delta, k));
    out.residual_transformed.push_back(residual_transformed(disc, run.w, cfg.delta));
    out.solutions.push_back(run.w);
    const bool ok = run.status == SolveStatus::converged;
    run.w = ScalarField<Dim>();
    out.runs.push_back(std::move(run));
    if (!ok) break;
  }
  out.complete = out.runs.size() == schedule.size() &&
                 out.runs.back().status == SolveStatus::converged;

  const std::size_t nk = out.solutions.size();
  out.tail_energy.assign(out.n_ladder.size(), std::vector<double>(nk, 0.0));
  out.truncation_increments.assign(out.n_ladder.size(),
                                   std::vector<double>(nk > 0 ? nk - 1 : 0, 0.0));
  for (std::size_t a = 0; a < out.n_ladder.size(); ++a) {
    const double level = out.n_ladder[a];
    for (std::size_t j = 0; j < nk; ++j) {
      const auto gn = map_values(out.solutions[j], [level](double s) { return remainder_G(s, level); });
      const double e = h1_seminorm(gn);
      out.tail_energy[a][j] = e * e;
    }
    for (std::size_t j = 0; j + 1 < nk; ++j) {
      const auto t0 = map_values(out.solutions[j], [level](double s) { return truncate_T(s, level); });
      const auto t1 =
          map_values(out.solutions[j + 1], [level](double s) { return truncate_T(s, level); });
      ScalarField<Dim> d(t0.grid);
      for (std::size_t i = 0; i < d.size(); ++i) d[i] = t0[i] - t1[i];
      out.truncation_increments[a][j] = h1_seminorm(d);
    }
  }
  for (std::size_t j = 0; j + 1 < nk; ++j) {
    ScalarField<Dim> d(out.solutions[j].grid);
    for (std::size_t i = 0; i < d.size(); ++i) d[i] = out.solutions[j][i] - out.solutions[j + 1][i];
    out.increments.push_back(h1_seminorm(d));
  }
  return out;
}

}  // namespace quadgrad
