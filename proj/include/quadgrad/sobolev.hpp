#pragma once

#include <cmath>
#include <numbers>

#include "quadgrad/grid.hpp"
#include "quadgrad/operators.hpp"

namespace quadgrad {

struct SobolevOptions {
  double rel_tol = 1e-8;
  int max_iter = 2000;
  double cg_tol = 1e-12;
};

template <int Dim>
struct SobolevEstimate {
  double value = 0.0;  ///< ‖v‖_p / ‖Dv‖₂ of the returned maximiser
  ScalarField<Dim> maximizer;
  int iterations = 0;
  bool stagnated = false;
};

/// Lower bound for the discrete constant in ‖v‖_p ≤ C ‖Dv‖₂.
///
/// Ascent on the ratio in the H₀¹ geometry: each step maps v to the
/// normalised Riesz representative of |v|^{p−2}v, i.e. the maximiser over the
/// unit H₀¹ ball of the linearisation of the convex functional ‖·‖_p^p at v,
/// so the ratio never decreases.
template <int Dim>
SobolevEstimate<Dim> estimate_sobolev_constant(const Grid<Dim>& g, double p,
                                               const SobolevOptions& opt = {}) {
  if (!(p > 2.0) || !std::isfinite(p)) throw domain_error("Sobolev estimator needs finite p > 2");
  const CsrMatrix lap = assemble_laplacian(g);

  ScalarField<Dim> v = ScalarField<Dim>::sample(g, [&](const Vec<Dim>& x) {
    double s = 1.0;
    for (int k = 0; k < Dim; ++k) s *= std::sin(std::numbers::pi * x[k] / g.extent()[k]);
    return s;
  });
  auto normalise = [](ScalarField<Dim>& f) {
    const double n = h1_seminorm(f);
    for (double& x : f.values) x /= n;
  };
  normalise(v);

  SobolevEstimate<Dim> out;
  double ratio = lp_norm(v, p);
  const double w = g.node_weight();
  std::vector<double> rhs(g.nodes());
  std::vector<double> guess = v.values;
  for (int it = 1; it <= opt.max_iter; ++it) {
    for (std::size_t i = 0; i < rhs.size(); ++i) {
      rhs[i] = w * std::pow(std::abs(v[i]), p - 2.0) * v[i];
    }
    auto sol = cg_solve(lap, rhs, opt.cg_tol, 0, guess);
    guess = sol.x;
    ScalarField<Dim> next(g, std::move(sol.x));
    normalise(next);
    const double next_ratio = lp_norm(next, p);
    out.iterations = it;
    if (next_ratio < ratio * (1.0 - 1e-13)) {
      out.stagnated = true;
      break;
    }
    const double change = (next_ratio - ratio) / ratio;
    v = std::move(next);
    ratio = next_ratio;
    if (change < opt.rel_tol) break;
    if (it == opt.max_iter) out.stagnated = true;
  }
  out.value = lp_norm(v, p) / h1_seminorm(v);
  out.maximizer = std::move(v);
  return out;
}

}  // namespace quadgrad
