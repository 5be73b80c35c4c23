#pragma once

// Pointwise nonlinearities: sign and its Lipschitz regularisation, the
// truncations T_k and G_n, the correction g_δ, the exponential substitution
// u ↔ w and its inverse, the catalog of quadratic-growth terms H(x,s,ξ) and
// the transformed term K_δ(x,t,ζ).

#include <algorithm>
#include <cmath>
#include <string>
#include <type_traits>

#include "quadgrad/constants.hpp"
#include "quadgrad/errors.hpp"
#include "quadgrad/small_matrix.hpp"

namespace quadgrad {

inline double sign(double s) {
  if (s > 0.0) return 1.0;
  if (s < 0.0) return -1.0;
  return 0.0;
}

/// ks on |s| ≤ 1/k, sign(s) outside.
inline double sign_k(double s, double k) {
  if (!(k > 0.0)) throw domain_error("sign_k requires k > 0 (got " + detail::fmt(k) + ")");
  if (std::abs(s) * k <= 1.0) return k * s;
  return sign(s);
}

/// Generalised derivative used by the semismooth Newton solver.
inline double sign_k_slope(double s, double k) { return std::abs(s) * k < 1.0 ? k : 0.0; }

/// Antiderivative of sign_k vanishing at zero; convex.
inline double sign_k_potential(double s, double k) {
  const double a = std::abs(s);
  if (a * k <= 1.0) return 0.5 * k * s * s;
  return a - 0.5 / k;
}

/// Truncation at height k.
inline double truncate_T(double s, double k) {
  if (!(k > 0.0)) throw domain_error("T_k requires k > 0 (got " + detail::fmt(k) + ")");
  return std::clamp(s, -k, k);
}

/// G_n(s) = s − T_n(s), the part of s above height n.
inline double remainder_G(double s, double n) {
  if (!(n > 0.0)) throw domain_error("G_n requires n > 0 (got " + detail::fmt(n) + ")");
  if (s <= -n) return s + n;
  if (s >= n) return s - n;
  return 0.0;
}

namespace detail {

// (1+τ)log(1+τ) − τ, τ ≥ 0. The series branch avoids cancellation near 0.
inline double g_unit(double tau) {
  if (tau < 0.05) {
    // Σ_{n≥2} (−1)^n τ^n / (n(n−1))
    double sum = 0.0;
    double power = tau * tau;
    for (int n = 2; n < 40; ++n) {
      const double term = power / (n * (n - 1.0));
      sum += (n % 2 == 0) ? term : -term;
      if (term < 1e-18 * sum) break;
      power *= tau;
    }
    return sum;
  }
  return (1.0 + tau) * std::log1p(tau) - tau;
}

}  // namespace detail

/// g_δ(t) = −|t| + (1/δ)(1+δ|t|)log(1+δ|t|).
inline double g_delta(double t, double delta) {
  if (!(delta > 0.0)) throw domain_error("g_delta requires delta > 0");
  return detail::g_unit(delta * std::abs(t)) / delta;
}

/// Largest δ|u| accepted by the forward substitution.
inline constexpr double kMaxExponent = 700.0;

/// w = (e^{δ|u|} − 1)/δ · sign(u)
inline double transform_forward(double u, double delta) {
  if (!(delta > 0.0)) throw domain_error("transform requires delta > 0");
  const double a = delta * std::abs(u);
  if (a > kMaxExponent) {
    throw transform_overflow("forward transform overflow: delta*|u| = " + detail::fmt(a) +
                             " > 700");
  }
  return std::expm1(a) / delta * sign(u);
}

/// u = log(1 + δ|w|)/δ · sign(w)
inline double transform_inverse(double w, double delta) {
  if (!(delta > 0.0)) throw domain_error("transform requires delta > 0");
  return std::log1p(delta * std::abs(w)) / delta * sign(w);
}

/// f̂ = f + a₀u
inline double f_hat(double f_val, double a0_val, double u_val) { return f_val + a0_val * u_val; }

// ---------------------------------------------------------------------------
// Quadratic-growth term H(x, s, ξ)

/// Coefficient data of H and K_δ at one point x.
template <int Dim>
struct PointData {
  Mat<Dim> a = identity_matrix<Dim>();
  double mu = 0.0;
};

enum class HKind { zero, shape_times_quadratic, mu_gradsq };
enum class Shape { signed_constant, tanh };

/// Catalog entry for H with its growth certificate (c₀, γ):
///
///   −c₀ A(x)ξξ ≤ H(x,s,ξ) sign(s) ≤ γ A(x)ξξ.
///
/// - zero:                  H ≡ 0
/// - shape_times_quadratic: H = h(s) A(x)ξξ with h(s) = β sign(s) or β tanh(s/ℓ)
/// - mu_gradsq:             H = μ(x)|ξ|², μ taken from the point data
struct HModel {
  HKind kind = HKind::zero;
  Shape shape = Shape::signed_constant;
  double beta = 0.0;
  double scale = 1.0;
  double c0_cert = 0.0;
  double gamma_cert = 1.0;

  [[nodiscard]] static HModel zero(double gamma, double c0 = 0.0) {
    return HModel{HKind::zero, Shape::signed_constant, 0.0, 1.0, c0, gamma};
  }
  [[nodiscard]] static HModel shape_times_quadratic(Shape shape, double beta, double gamma,
                                                    double c0 = 0.0, double scale = 1.0) {
    if (!(scale > 0.0)) throw domain_error("shape scale must be > 0");
    return HModel{HKind::shape_times_quadratic, shape, beta, scale, c0, gamma};
  }
  [[nodiscard]] static HModel mu_gradsq(double gamma, double c0) {
    return HModel{HKind::mu_gradsq, Shape::signed_constant, 0.0, 1.0, c0, gamma};
  }

  [[nodiscard]] double shape_value(double s) const {
    switch (shape) {
      case Shape::signed_constant:
        return beta * sign(s);
      case Shape::tanh:
        return beta * std::tanh(s / scale);
    }
    return 0.0;
  }

  template <int Dim>
  [[nodiscard]] double operator()(const PointData<Dim>& x, double s,
                                  const std::type_identity_t<Vec<Dim>>& xi) const {
    switch (kind) {
      case HKind::zero:
        return 0.0;
      case HKind::shape_times_quadratic:
        return shape_value(s) * quad<Dim>(x.a, xi);
      case HKind::mu_gradsq:
        return x.mu * dot<Dim>(xi, xi);
    }
    return 0.0;
  }

  /// True when the model can be nonzero at s = 0 (only μ|ξ|² can).
  [[nodiscard]] bool nonzero_at_zero_level() const { return kind == HKind::mu_gradsq; }

  /// Analytic check of the certificate at one point; returns the largest
  /// violation in units of A(x)ξξ (≤ 0 when the certificate holds).
  template <int Dim>
  [[nodiscard]] double certificate_excess(const PointData<Dim>& x) const {
    switch (kind) {
      case HKind::zero:
        return 0.0;
      case HKind::shape_times_quadratic:
        // h(s)sign(s) ranges over [min(β,0), max(β,0)] up to the endpoint.
        return std::max(beta - gamma_cert, -beta - c0_cert);
      case HKind::mu_gradsq: {
        if constexpr (Dim <= 2) {
          const double lam = min_eigenvalue<Dim>(x.a);
          const double bound = std::min(gamma_cert, c0_cert) * lam;
          return (std::abs(x.mu) - bound) / std::max(lam, 1e-300);
        } else {
          return 0.0;
        }
      }
    }
    return 0.0;
  }
};

/// Excess of H(x,s,ξ)sign(s) over the certified band, relative to A(x)ξξ;
/// positive means the sample violates the growth condition.
template <int Dim>
double growth_excess(const HModel& h, const PointData<Dim>& x, double s, const Vec<Dim>& xi) {
  const double q = quad<Dim>(x.a, xi);
  const double hs = h(x, s, xi) * sign(s);
  const double upper = hs - h.gamma_cert * q;
  const double lower = -h.c0_cert * q - hs;
  const double slack = 1e-12 * std::max(q, 1e-300) * (1.0 + h.gamma_cert + h.c0_cert);
  return std::max(upper, lower) - slack;
}

// ---------------------------------------------------------------------------
// Transformed term K_δ

/// K_δ(x,t,ζ) = δ/(1+δ|t|) A ζζ − (1+δ|t|) H(x, log(1+δ|t|)/δ · sign t, ζ/(1+δ|t|)) sign t
template <int Dim>
double k_delta(const PointData<Dim>& x, double t, const Vec<Dim>& zeta, double delta,
               const HModel& h) {
  if (!(delta > 0.0)) throw domain_error("K_delta requires delta > 0");
  const double stretch = 1.0 + delta * std::abs(t);
  const double sg = sign(t);
  const double first = delta / stretch * quad<Dim>(x.a, zeta);
  if (sg == 0.0) return first;
  const double s = std::log1p(delta * std::abs(t)) / delta * sg;
  return first - stretch * h(x, s, scaled<Dim>(zeta, 1.0 / stretch)) * sg;
}

/// K_δ(x,t,ζ)·sign(t) in its expanded form; at t = 0 this is −H(x,0,ζ).
template <int Dim>
double k_delta_signed(const PointData<Dim>& x, double t, const Vec<Dim>& zeta, double delta,
                      const HModel& h) {
  if (!(delta > 0.0)) throw domain_error("K_delta requires delta > 0");
  const double stretch = 1.0 + delta * std::abs(t);
  const double sg = sign(t);
  const double s = std::log1p(delta * std::abs(t)) / delta * sg;
  return sg * delta / stretch * quad<Dim>(x.a, zeta) -
         stretch * h(x, s, scaled<Dim>(zeta, 1.0 / stretch));
}

}  // namespace quadgrad
