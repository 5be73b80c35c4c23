#pragma once

// Structural constants of the a priori estimate: the exponent θ, the bound
// C(λ), the constant G, the critical parameter δ₀ with its radius Z_{δ₀},
// and the zeros Y_δ^± of the family
//
//   Φ_δ(X) = G C_N^{2+θ} ‖a₀‖_q X^{1+θ} − L_δ X + ‖f‖_{H⁻¹},
//   L_δ    = α − C_N²‖a₀‖_{N/2} − δ C_N²‖f‖_{N/2}.
//
// Everything here is a pure function of its arguments.

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "quadgrad/errors.hpp"

namespace quadgrad {

/// Integrability exponents feeding the Hölder/Sobolev chain.
///
/// `sobolev` plays the role of 2* and `f_norm` the role of N/2, so that
/// 1/f_norm + 2/sobolev = 1. For N ≥ 3 both follow from N; for the one- and
/// two-dimensional grids the pair is supplied by the user.
struct Exponents {
  double sobolev = 6.0;
  double f_norm = 1.5;
  double q = 1.8;
  int dimension = 3;  ///< N when derived from a dimension, 0 for a custom pair.

  [[nodiscard]] static Exponents for_dimension(int n, double q);
  [[nodiscard]] static Exponents custom(double sobolev, double f_norm, double q);

  [[nodiscard]] double theta() const;
};

namespace detail {

inline std::string fmt(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

inline double theta_unchecked(double sobolev, double q) {
  // θ = 2*/q′ − 2 with 1/q′ = 1 − 1/q.
  return sobolev * (1.0 - 1.0 / q) - 2.0;
}

}  // namespace detail

/// θ = 2*/q′ − 2 for the default exponent path (N ≥ 3).
inline double compute_theta(int n, double q) {
  if (n < 3) {
    throw exponent_out_of_range("N >= 3 required for the default exponent path (got N = " +
                                std::to_string(n) + "); supply a custom exponent pair instead");
  }
  if (!(q > 0.5 * n)) {
    throw exponent_out_of_range("q > N/2 violated: 2*/q' - 2 > 0 fails (q = " + detail::fmt(q) +
                                ", N/2 = " + detail::fmt(0.5 * n) + ")");
  }
  if (n <= 6) {
    const double upper = 2.0 * n / (6.0 - n);
    if (!(q < upper)) {
      throw exponent_out_of_range("q < 2N/(6-N) violated: 2*/q' - 2 < 1 fails (q = " +
                                  detail::fmt(q) + ", 2N/(6-N) = " + detail::fmt(upper) + ")");
    }
  }
  const double sobolev = 2.0 * n / (n - 2.0);
  const double theta = detail::theta_unchecked(sobolev, q);
  if (!(theta > 0.0 && theta < 1.0)) {
    throw exponent_out_of_range("0 < theta < 1 violated (theta = " + detail::fmt(theta) + ")");
  }
  return theta;
}

/// θ for a user-supplied Sobolev exponent.
inline double theta_from_exponents(double sobolev, double q) {
  if (!(sobolev > 2.0) || !std::isfinite(sobolev)) {
    throw exponent_out_of_range("Sobolev exponent must be finite and > 2 (got " +
                                detail::fmt(sobolev) + ")");
  }
  if (!(q > 1.0)) {
    throw exponent_out_of_range("q > 1 required (got " + detail::fmt(q) + ")");
  }
  const double theta = detail::theta_unchecked(sobolev, q);
  if (!(theta > 0.0)) {
    throw exponent_out_of_range("2*/q' - 2 > 0 violated (theta = " + detail::fmt(theta) + ")");
  }
  if (!(theta < 1.0)) {
    throw exponent_out_of_range("2*/q' - 2 < 1 violated (theta = " + detail::fmt(theta) + ")");
  }
  return theta;
}

inline Exponents Exponents::for_dimension(int n, double q) {
  (void)compute_theta(n, q);
  const double sobolev = 2.0 * n / (n - 2.0);
  return Exponents{sobolev, 0.5 * n, q, n};
}

inline Exponents Exponents::custom(double sobolev, double f_norm, double q) {
  (void)theta_from_exponents(sobolev, q);
  const double conj = 1.0 / f_norm + 2.0 / sobolev;
  if (!(f_norm > 1.0) || std::abs(conj - 1.0) > 1e-12) {
    throw exponent_out_of_range("exponent pair must satisfy 1/f_norm + 2/sobolev = 1 (got " +
                                detail::fmt(conj) + ")");
  }
  if (!(q > f_norm)) {
    throw exponent_out_of_range("q > f_norm violated (q = " + detail::fmt(q) +
                                ", f_norm = " + detail::fmt(f_norm) + ")");
  }
  return Exponents{sobolev, f_norm, q, 0};
}

inline double Exponents::theta() const {
  if (dimension >= 3) return compute_theta(dimension, q);
  return theta_from_exponents(sobolev, q);
}

/// Scalar data of the problem: structural constants plus the norms of f
/// and a₀ and the Sobolev constant C_N.
struct ProblemConstants {
  Exponents exponents;
  double alpha = 1.0;
  double gamma = 1.0;
  double c0 = 0.0;
  double norm_f_n2 = 0.0;   ///< ‖f‖ in the N/2 slot
  double norm_f_hm1 = 0.0;  ///< ‖f‖_{H⁻¹}
  double norm_a0_n2 = 0.0;  ///< ‖a₀‖ in the N/2 slot
  double norm_a0_q = 0.0;   ///< ‖a₀‖_q
  double sobolev_constant = 1.0;

  void validate() const {
    auto finite_nonneg = [](double v, const char* name) {
      if (!std::isfinite(v) || v < 0.0) {
        throw domain_error(std::string(name) + " must be finite and >= 0 (got " +
                           detail::fmt(v) + ")");
      }
    };
    if (!(alpha > 0.0) || !std::isfinite(alpha)) throw domain_error("alpha > 0 required");
    if (!(gamma > 0.0) || !std::isfinite(gamma)) throw domain_error("gamma > 0 required");
    if (!(c0 >= 0.0) || !std::isfinite(c0)) throw domain_error("c0 >= 0 required");
    if (!(sobolev_constant > 0.0) || !std::isfinite(sobolev_constant)) {
      throw domain_error("Sobolev constant C_N > 0 required");
    }
    finite_nonneg(norm_f_n2, "norm_f_N2");
    finite_nonneg(norm_f_hm1, "norm_f_Hm1");
    finite_nonneg(norm_a0_n2, "norm_a0_N2");
    finite_nonneg(norm_a0_q, "norm_a0_q");
    if (norm_f_n2 == 0.0) throw degenerate_data("f must not vanish (norm_f_N2 = 0)");
    if (norm_a0_q == 0.0) throw degenerate_data("a0 must not vanish (norm_a0_q = 0)");
    (void)exponents.theta();
  }

  [[nodiscard]] double cn2() const { return sobolev_constant * sobolev_constant; }
};

/// Upper bound sup{1, 2^{1+λ}/(λe)} of C(λ); used as the value of C(λ).
inline double c_lambda_bound(double lambda) {
  if (!(lambda > 0.0 && lambda < 1.0)) {
    throw exponent_out_of_range("lambda must lie in (0, 1) (got " + detail::fmt(lambda) + ")");
  }
  return std::max(1.0, std::pow(2.0, 1.0 + lambda) / (lambda * std::numbers::e));
}

/// δ₁ = (α − C_N²‖a₀‖_{N/2}) / (C_N²‖f‖_{N/2}), the root of L_δ.
inline double compute_delta1(const ProblemConstants& c) {
  const double num = c.alpha - c.cn2() * c.norm_a0_n2;
  if (!(num > 0.0)) {
    throw nonpositive_delta1("alpha - C_N^2 ||a0||_{N/2} = " + detail::fmt(num) + " <= 0");
  }
  if (!(c.norm_f_n2 > 0.0)) throw degenerate_data("f must not vanish (norm_f_N2 = 0)");
  return num / (c.cn2() * c.norm_f_n2);
}

/// G evaluated from its defining quotient. Agrees with δ₁^θ C(θ).
inline double compute_G(const ProblemConstants& c, double theta) {
  const double num = c.alpha - c.cn2() * c.norm_a0_n2;
  if (!(num > 0.0)) {
    throw nonpositive_delta1("alpha - C_N^2 ||a0||_{N/2} = " + detail::fmt(num) + " <= 0");
  }
  if (!(c.norm_f_n2 > 0.0)) throw degenerate_data("f must not vanish (norm_f_N2 = 0)");
  return std::pow(num / (c.cn2() * c.norm_f_n2), theta) * c_lambda_bound(theta);
}

/// L_δ, the (negated) slope of the linear part of Φ_δ.
inline double slope_l(double delta, const ProblemConstants& c) {
  return c.alpha - c.cn2() * c.norm_a0_n2 - delta * c.cn2() * c.norm_f_n2;
}

/// G C_N^{2+θ} ‖a₀‖_q, the coefficient of X^{1+θ} in Φ_δ.
inline double power_coefficient(const ProblemConstants& c, double theta, double G) {
  return G * std::pow(c.sobolev_constant, 2.0 + theta) * c.norm_a0_q;
}

struct Margin {
  bool holds = false;
  double margin = 0.0;
};

struct Smallness {
  Margin a1;  ///< α − C_N²‖a₀‖ − γC_N²‖f‖ > 0
  Margin a3;  ///< ‖f‖_{H⁻¹} ≤ θ/(1+θ) L_γ^{(1+θ)/θ} / ((1+θ)G C_N^{2+θ}‖a₀‖_q)^{1/θ}
  [[nodiscard]] bool both() const { return a1.holds && a3.holds; }
};

namespace detail {

// θ/(1+θ) · L^{(1+θ)/θ} / ((1+θ)·P)^{1/θ}, zero when L ≤ 0.
inline double depth_term(double l, double theta, double power_coeff) {
  if (!(l > 0.0)) return 0.0;
  return theta / (1.0 + theta) * std::pow(l, (1.0 + theta) / theta) /
         std::pow((1.0 + theta) * power_coeff, 1.0 / theta);
}

}  // namespace detail

/// Verdicts and margins of both smallness conditions. A1 is strict, A3 is not.
inline Smallness check_smallness(const ProblemConstants& c, double theta, double G) {
  Smallness s;
  const double l_gamma = slope_l(c.gamma, c);
  s.a1.margin = l_gamma;
  s.a1.holds = l_gamma > 0.0;
  const double rhs = detail::depth_term(l_gamma, theta, power_coefficient(c, theta, G));
  s.a3.margin = rhs - c.norm_f_hm1;
  s.a3.holds = s.a3.margin >= 0.0;
  return s;
}

/// Same, computing θ and G itself; G is irrelevant (and may be undefined)
/// once A1 fails because the A3 right-hand side is then zero.
inline Smallness check_smallness(const ProblemConstants& c) {
  const double theta = c.exponents.theta();
  if (!(c.alpha - c.cn2() * c.norm_a0_n2 > 0.0)) {
    Smallness s;
    s.a1.margin = slope_l(c.gamma, c);
    s.a3.margin = -c.norm_f_hm1;
    s.a3.holds = s.a3.margin >= 0.0;
    return s;
  }
  return check_smallness(c, theta, compute_G(c, theta));
}

inline double phi(double delta, double x, const ProblemConstants& c, double theta, double G) {
  if (!(x >= 0.0)) throw domain_error("Phi_delta is defined for X >= 0 (got " + detail::fmt(x) + ")");
  if (!(delta >= 0.0)) throw domain_error("Phi_delta is defined for delta >= 0");
  return power_coefficient(c, theta, G) * std::pow(x, 1.0 + theta) - slope_l(delta, c) * x +
         c.norm_f_hm1;
}

namespace detail {

inline double clamped_slope(double delta, const ProblemConstants& c) {
  if (!(delta >= 0.0)) {
    throw delta_out_of_range("delta >= 0 required (got " + fmt(delta) + ")");
  }
  const double l = slope_l(delta, c);
  // δ = δ₁ may leave L_δ a few ulps below zero.
  const double scale = c.alpha + c.cn2() * c.norm_a0_n2 + delta * c.cn2() * c.norm_f_n2;
  const double floor = 64.0 * std::numeric_limits<double>::epsilon() * scale;
  if (l < -floor) {
    throw delta_out_of_range("delta exceeds delta1 (L_delta = " + fmt(l) + " < 0)");
  }
  return l <= floor ? 0.0 : l;
}

}  // namespace detail

/// Z_δ, the unique minimiser of Φ_δ on [0, ∞), for 0 ≤ δ ≤ δ₁.
inline double z_delta(double delta, const ProblemConstants& c, double theta, double G) {
  const double l = detail::clamped_slope(delta, c);
  return std::pow(l / ((1.0 + theta) * power_coefficient(c, theta, G)), 1.0 / theta);
}

/// Φ_δ(Z_δ) in closed form.
inline double phi_min(double delta, const ProblemConstants& c, double theta, double G) {
  const double l = detail::clamped_slope(delta, c);
  return c.norm_f_hm1 - detail::depth_term(l, theta, power_coefficient(c, theta, G));
}

struct Delta0Result {
  double delta0 = 0.0;
  double z_delta0 = 0.0;
  double residual = 0.0;  ///< Φ_{δ₀}(Z_{δ₀})
  int iterations = 0;
};

/// δ₀ ∈ [γ, δ₁) with Φ_{δ₀}(Z_{δ₀}) = 0, found by bisection on δ ↦ Φ_δ(Z_δ).
inline Delta0Result solve_delta0(const ProblemConstants& c, double theta, double G,
                                 double tol = 1e-12) {
  // Φ_δ(Z_δ) is a difference of terms of size ‖f‖_{H⁻¹}; judge it on that scale.
  const double threshold = tol * c.norm_f_hm1;
  const double d1 = compute_delta1(c);
  if (!(c.gamma < d1)) {
    throw smallness_violated("A1 fails: gamma = " + detail::fmt(c.gamma) +
                             " >= delta1 = " + detail::fmt(d1));
  }
  auto m = [&](double d) { return phi_min(d, c, theta, G); };

  Delta0Result out;
  const double m_lo = m(c.gamma);
  if (m_lo > threshold) {
    throw smallness_violated("A3 fails: Phi_gamma(Z_gamma) = " + detail::fmt(m_lo) + " > 0");
  }
  if (std::abs(m_lo) <= threshold) {
    out.delta0 = c.gamma;
    out.residual = m_lo;
    out.z_delta0 = z_delta(c.gamma, c, theta, G);
    return out;
  }
  const double m_hi = m(d1);
  if (!(m_hi > 0.0)) {
    throw bracket_error("Phi_delta1(Z_delta1) = " + detail::fmt(m_hi) + " <= 0");
  }

  double lo = c.gamma;
  double hi = d1;
  double best = lo;
  double best_val = m_lo;
  for (int it = 0; it < 400; ++it) {
    const double mid = 0.5 * (lo + hi);
    const double val = m(mid);
    out.iterations = it + 1;
    if (std::abs(val) < std::abs(best_val)) {
      best = mid;
      best_val = val;
    }
    if (val == 0.0) break;
    if (val < 0.0) {
      lo = mid;
    } else {
      hi = mid;
    }
    if (!(mid > lo || mid < hi) || hi - lo <= 2.0 * std::numeric_limits<double>::epsilon() * hi) {
      break;
    }
  }
  out.delta0 = best;
  out.residual = best_val;
  out.z_delta0 = z_delta(best, c, theta, G);
  return out;
}

struct ZeroPair {
  double lower = 0.0;  ///< Y_δ^−
  double upper = 0.0;  ///< Y_δ^+
};

/// The two zeros of Φ_δ when Φ_δ(Z_δ) < 0. Depths within tol·‖f‖_{H⁻¹} of zero
/// count as a double zero.
inline ZeroPair zeros_y(double delta, const ProblemConstants& c, double theta, double G,
                        double tol = 1e-12) {
  const double depth = phi_min(delta, c, theta, G);
  if (depth >= -tol * c.norm_f_hm1) {
    throw no_two_zeros("Phi_delta(Z_delta) = " + detail::fmt(depth) +
                       " is not negative; no two distinct zeros");
  }
  const double z = z_delta(delta, c, theta, G);
  auto f = [&](double x) { return phi(delta, x, c, theta, G); };

  // f(lo) and f(hi) have opposite signs on entry.
  auto bisect = [&](double lo, double hi) {
    const bool lo_positive = f(lo) > 0.0;
    for (int it = 0; it < 2000; ++it) {
      const double mid = 0.5 * (lo + hi);
      if (mid <= lo || mid >= hi) break;
      if ((f(mid) > 0.0) == lo_positive) {
        lo = mid;
      } else {
        hi = mid;
      }
    }
    return 0.5 * (lo + hi);
  };

  ZeroPair out;
  out.lower = bisect(0.0, z);
  double x_hi = 2.0 * std::max(z, 1.0);
  while (!(f(x_hi) > 0.0)) {
    x_hi *= 2.0;
    if (!std::isfinite(x_hi)) throw bracket_error("no upper bracket for Y_delta^+");
  }
  out.upper = bisect(z, x_hi);
  return out;
}

struct ZeroReport {
  double delta = 0.0;
  std::optional<ZeroPair> zeros;
};

struct CriticalReport {
  ProblemConstants constants;
  double theta = 0.0;
  double c_theta = 0.0;
  std::optional<double> delta1;
  std::optional<double> G;
  Smallness smallness;
  std::optional<Delta0Result> delta0;
  double tol = 1e-12;
  std::vector<ZeroReport> zeros;
};

/// Runs the whole chain: θ, C(θ), δ₁, G, smallness, δ₀ and Z_{δ₀}, plus the
/// zeros Y_δ^± for each requested δ where they exist.
inline CriticalReport analyze(const ProblemConstants& c, double tol = 1e-12,
                              std::span<const double> y_deltas = {}) {
  c.validate();
  CriticalReport r;
  r.constants = c;
  r.tol = tol;
  r.theta = c.exponents.theta();
  r.c_theta = c_lambda_bound(r.theta);
  r.smallness = check_smallness(c);
  if (c.alpha - c.cn2() * c.norm_a0_n2 > 0.0) {
    r.delta1 = compute_delta1(c);
    r.G = compute_G(c, r.theta);
  }
  if (r.smallness.both()) {
    r.delta0 = solve_delta0(c, r.theta, *r.G, tol);
    for (double d : y_deltas) {
      ZeroReport z{d, std::nullopt};
      try {
        z.zeros = zeros_y(d, c, r.theta, *r.G, tol);
      } catch (const error&) {
      }
      r.zeros.push_back(z);
    }
  }
  return r;
}

}  // namespace quadgrad
