#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <random>
#include <vector>

#include "quadgrad/nonlinear.hpp"

namespace qg = quadgrad;

namespace {

// Random SPD 2×2 matrix with smallest eigenvalue at least 0.1.
qg::Mat<2> random_spd(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  const double a = u(rng), b = u(rng), c = u(rng), d = u(rng);
  qg::Mat<2> m{};
  m[0][0] = a * a + b * b + 0.1;
  m[1][1] = c * c + d * d + 0.1;
  m[0][1] = m[1][0] = a * c + b * d;
  return m;
}

std::vector<qg::HModel> catalog(double gamma, double c0) {
  return {qg::HModel::zero(gamma, c0),
          qg::HModel::shape_times_quadratic(qg::Shape::signed_constant, gamma, gamma, c0),
          qg::HModel::shape_times_quadratic(qg::Shape::signed_constant, -c0, gamma, c0),
          qg::HModel::shape_times_quadratic(qg::Shape::tanh, 0.7 * gamma, gamma, c0, 0.5),
          qg::HModel::shape_times_quadratic(qg::Shape::tanh, -0.9 * c0, gamma, c0, 2.0),
          qg::HModel::mu_gradsq(gamma, c0)};
}

}  // namespace

TEST(Sign, Values) {
  EXPECT_EQ(qg::sign(3.2), 1.0);
  EXPECT_EQ(qg::sign(0.0), 0.0);
  EXPECT_EQ(qg::sign(-1e-300), -1.0);
}

TEST(SignK, BranchesAndKnee) {
  EXPECT_EQ(qg::sign_k(0.25, 2.0), 0.5);
  EXPECT_EQ(qg::sign_k(1.0, 2.0), 1.0);
  for (double k : {0.5, 3.0, 1e6}) EXPECT_EQ(qg::sign_k(-1.0 / k, k), -1.0);
  EXPECT_THROW(qg::sign_k(1.0, 0.0), qg::domain_error);
}

TEST(SignK, BoundedMonotoneLipschitz) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-3.0, 3.0);
  for (int i = 0; i < 10000; ++i) {
    const double k = std::pow(10.0, u(rng));
    const double a = u(rng), b = u(rng);
    const double sa = qg::sign_k(a, k), sb = qg::sign_k(b, k);
    EXPECT_LE(std::abs(sa), 1.0);
    if (a <= b) { EXPECT_LE(sa, sb); }
    // Each value is rounded once on a scale of 1.
    EXPECT_LE(std::abs(sa - sb), k * std::abs(a - b) * (1.0 + 1e-14) + 4e-16);
    if (k >= 1.0 / std::abs(a)) { EXPECT_EQ(sa, qg::sign(a)); }
  }
}

TEST(Truncations, ValuesAndSplitting) {
  EXPECT_EQ(qg::truncate_T(-3.0, 1.0), -1.0);
  EXPECT_EQ(qg::truncate_T(0.5, 1.0), 0.5);
  EXPECT_EQ(qg::remainder_G(1.5, 1.0), 0.5);
  EXPECT_EQ(qg::remainder_G(0.3, 1.0), 0.0);
  EXPECT_EQ(qg::remainder_G(-2.0, 1.0), -1.0);
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(-10.0, 10.0);
  for (int i = 0; i < 10000; ++i) {
    const double s = u(rng), k = std::abs(u(rng)) + 1e-3;
    EXPECT_DOUBLE_EQ(qg::truncate_T(s, k) + qg::remainder_G(s, k), s);
  }
}

TEST(GDelta, ClosedFormValues) {
  EXPECT_EQ(qg::g_delta(0.0, 1.0), 0.0);
  EXPECT_NEAR(qg::g_delta(1.0, 1.0), 2.0 * std::log(2.0) - 1.0, 1e-15);
  EXPECT_NEAR(qg::g_delta(1.0, 1.0), 0.386294, 1e-6);
  EXPECT_EQ(qg::g_delta(-2.0, 0.3), qg::g_delta(2.0, 0.3));
}

TEST(GDelta, SeriesBranchMatchesLongDouble) {
  // Around the series/closed-form switch and deep in the series range.
  // Reference: the Taylor series Σ_{n≥2} (−1)^n τ^n/(n(n−1)) in long double. The
  // closed form loses κ = ((1+τ)log(1+τ) + τ)/g(τ) digits to cancellation.
  for (double tau : {1e-8, 1e-4, 0.01, 0.049, 0.0499999, 0.05, 0.0500001, 0.2}) {
    const long double t = tau;
    long double ref = 0.0L, power = t * t;
    for (int n = 2; n < 200; ++n, power *= t) ref += (n % 2 == 0 ? 1 : -1) * power / (n * (n - 1.0L));
    const double kappa = ((1.0 + tau) * std::log1p(tau) + tau) / static_cast<double>(ref);
    const double eps = std::numeric_limits<double>::epsilon();
    EXPECT_NEAR(qg::g_delta(tau, 1.0), static_cast<double>(ref),
                4.0 * eps * kappa * static_cast<double>(ref))
        << tau;
  }
}

TEST(GDelta, SubstitutionIdentity) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 0; i < 10000; ++i) {
    const double mag = std::pow(10.0, -6.0 + 9.0 * u(rng));
    const double t = u(rng) < 0.5 ? -mag : mag;
    const double delta = std::pow(10.0, -3.0 + 5.0 * u(rng));
    const double lhs = t + qg::g_delta(t, delta) * qg::sign(t);
    const double rhs = (1.0 + delta * std::abs(t)) * std::log1p(delta * std::abs(t)) / delta * qg::sign(t);
    // Absolute 1e-13 is below double rounding once |rhs| exceeds ~50.
    const double slack = std::abs(t) <= 1.0 ? 1e-13 : 1e-13 * std::abs(rhs);
    EXPECT_LE(std::abs(lhs - rhs), slack) << "t " << t << " delta " << delta;
  }
}

TEST(GDelta, LambdaGrowthBound) {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 0; i < 10000; ++i) {
    const double lambda = 0.01 + 0.98 * u(rng);
    const double dstar = std::pow(10.0, -2.0 + 3.0 * u(rng));
    const double delta = dstar * std::max(u(rng), 1e-6);
    const double t = std::pow(10.0, -6.0 + 9.0 * u(rng));
    const double g = qg::g_delta(t, delta);
    const double bound = std::pow(dstar, lambda) * qg::c_lambda_bound(lambda) * std::pow(t, 1.0 + lambda);
    EXPECT_GE(g, 0.0);
    EXPECT_LE(g, bound * (1.0 + 1e-12)) << "lambda " << lambda << " t " << t;
  }
}

TEST(GDelta, BelowGForDeltaUpToDelta1) {
  qg::ProblemConstants c;
  c.exponents = qg::Exponents::for_dimension(3, 1.8);
  c.sobolev_constant = 0.6;
  c.norm_a0_n2 = 0.4;
  c.norm_a0_q = 0.5;
  c.norm_f_n2 = 0.7;
  c.norm_f_hm1 = 0.01;
  const double theta = c.exponents.theta();
  const double d1 = qg::compute_delta1(c);
  const double G = qg::compute_G(c, theta);
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 0; i < 10000; ++i) {
    const double t = std::pow(10.0, -6.0 + 9.0 * u(rng));
    const double delta = d1 * std::max(u(rng), 1e-6);
    const double g = qg::g_delta(t, delta);
    EXPECT_GE(g, 0.0);
    EXPECT_LT(g, G * std::pow(t, 1.0 + theta) * (1.0 + 1e-12));
  }
}

TEST(Transform, RoundtripOddMonotone) {
  const double gamma = 1.0;
  const double delta0 = 2.17;
  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> u(-20.0, 20.0);
  for (double delta : {0.5 * gamma, gamma, delta0}) {
    double prev_u = -20.0;
    double prev_w = qg::transform_forward(prev_u, delta);
    for (int i = 0; i < 10000; ++i) {
      const double x = u(rng);
      const double w = qg::transform_forward(x, delta);
      EXPECT_LE(std::abs(qg::transform_inverse(w, delta) - x), 1e-12) << x << " " << delta;
      EXPECT_EQ(qg::transform_forward(-x, delta), -w);
      EXPECT_EQ(qg::transform_inverse(-w, delta), -qg::transform_inverse(w, delta));
      if (x > prev_u) { EXPECT_GT(w, prev_w); }
      if (x < prev_u) { EXPECT_LT(w, prev_w); }
      const double factor = std::exp(delta * std::abs(x));
      EXPECT_NEAR(factor, 1.0 + delta * std::abs(w), 1e-12 * factor);
      prev_u = x;
      prev_w = w;
    }
  }
  EXPECT_EQ(qg::transform_forward(0.0, 1.0), 0.0);
  EXPECT_EQ(qg::transform_inverse(0.0, 1.0), 0.0);
}

TEST(Transform, OverflowGuard) {
  EXPECT_THROW(qg::transform_forward(701.0, 1.0), qg::transform_overflow);
  EXPECT_NO_THROW(qg::transform_forward(699.0, 1.0));
  EXPECT_THROW(qg::transform_forward(1.0, 0.0), qg::domain_error);
}

TEST(FHat, ValuesAndRhsIdentity) {
  EXPECT_EQ(qg::f_hat(1.0, 0.0, 5.0), 1.0);
  EXPECT_EQ(qg::f_hat(0.0, 2.0, 3.0), 6.0);
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(-3.0, 3.0);
  for (int i = 0; i < 10000; ++i) {
    const double f = u(rng), a0 = u(rng), w = u(rng), delta = 0.1 + std::abs(u(rng));
    const double x = qg::transform_inverse(w, delta);
    const double lhs = (1.0 + delta * std::abs(w)) * qg::f_hat(f, a0, x);
    const double rhs = (1.0 + delta * std::abs(w)) * f + a0 * w + a0 * qg::g_delta(w, delta) * qg::sign(w);
    EXPECT_NEAR(lhs, rhs, 1e-12 * (std::abs(lhs) + std::abs(rhs) + 1.0));
  }
}

TEST(HModel, CertificateAndZeroGradient) {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(-5.0, 5.0);
  const double gamma = 1.3, c0 = 0.6;
  for (const auto& h : catalog(gamma, c0)) {
    for (int i = 0; i < 10000; ++i) {
      qg::PointData<2> x{random_spd(rng), 0.0};
      x.mu = std::min(gamma, c0) * qg::min_eigenvalue<2>(x.a) * u(rng) / 5.0;
      const double s = 4.0 * u(rng);
      const qg::Vec<2> xi{u(rng), u(rng)};
      EXPECT_LE(qg::growth_excess<2>(h, x, s, xi), 0.0);
      EXPECT_EQ(h(x, s, qg::Vec<2>{}), 0.0);
      EXPECT_LE(h.certificate_excess<2>(x), 1e-12);
    }
  }
}

TEST(HModel, ViolatedCertificateDetected) {
  const auto h = qg::HModel::shape_times_quadratic(qg::Shape::signed_constant, 1.5, 1.0, 0.0);
  const qg::PointData<1> x{qg::identity_matrix<1>(), 0.0};
  EXPECT_GT(h.certificate_excess<1>(x), 0.0);
  EXPECT_GT(qg::growth_excess<1>(h, x, 1.0, qg::Vec<1>{2.0}), 0.0);
  const auto mu = qg::HModel::mu_gradsq(1.0, 0.5);
  EXPECT_GT(mu.certificate_excess<1>(qg::PointData<1>{qg::identity_matrix<1>(), 0.6}), 0.0);
}

TEST(KDelta, Values) {
  const qg::PointData<2> x{qg::identity_matrix<2>(), 0.0};
  const auto zero = qg::HModel::zero(1.0);
  EXPECT_DOUBLE_EQ(qg::k_delta<2>(x, 1.0, {1.0, 0.0}, 1.0, zero), 0.5);
  const double gamma = 0.8;
  const auto extremal = qg::HModel::shape_times_quadratic(qg::Shape::signed_constant, gamma, gamma);
  for (double t : {0.1, 1.0, 7.0}) {
    EXPECT_NEAR(qg::k_delta<2>(x, t, {0.3, -1.2}, gamma, extremal), 0.0, 1e-15);
  }
  for (const auto& h : catalog(1.0, 0.5)) {
    EXPECT_EQ(qg::k_delta<2>(x, 0.0, {}, 1.0, h), 0.0);
    EXPECT_EQ(qg::k_delta<2>(x, 2.5, {}, 1.0, h), 0.0);
  }
}

TEST(KDelta, SignedFormAgrees) {
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(-5.0, 5.0);
  for (const auto& h : catalog(1.0, 0.5)) {
    for (int i = 0; i < 2000; ++i) {
      const qg::PointData<2> x{random_spd(rng), 0.05 * u(rng)};
      const double t = u(rng);
      const qg::Vec<2> z{u(rng), u(rng)};
      const double delta = 0.1 + std::abs(u(rng));
      const double k = qg::k_delta<2>(x, t, z, delta, h);
      const double ks = qg::k_delta_signed<2>(x, t, z, delta, h);
      EXPECT_NEAR(ks, k * qg::sign(t), 1e-12 * (1.0 + std::abs(k)));
    }
    const qg::PointData<2> x{qg::identity_matrix<2>(), 0.2};
    const qg::Vec<2> z{1.0, 2.0};
    EXPECT_EQ(qg::k_delta_signed<2>(x, 0.0, z, 1.0, h), -h(x, 0.0, z));
  }
}

TEST(KDelta, TwoSidedBoundPerModel) {
  std::mt19937_64 rng(10);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_real_distribution<double> u(-5.0, 5.0);
  const double gamma = 1.0, c0 = 0.7;
  for (const auto& h : catalog(gamma, c0)) {
    for (int i = 0; i < 10000; ++i) {
      qg::PointData<2> x{random_spd(rng), 0.0};
      x.mu = std::min(gamma, c0) * qg::min_eigenvalue<2>(x.a) * (2.0 * unit(rng) - 1.0);
      const double t = 4.0 * u(rng);
      const qg::Vec<2> z{u(rng), u(rng)};
      const double delta = i % 2 == 0 ? gamma * (0.05 + 0.95 * unit(rng)) : gamma + 2.0 * unit(rng);
      const double q = qg::quad<2>(x.a, z);
      const double k = qg::k_delta<2>(x, t, z, delta, h);
      const double eps = 1e-12 * (c0 + delta) * q;
      EXPECT_LE(k, (c0 + delta) * q + eps);
      EXPECT_GE(k, -std::abs(delta - gamma) * q - eps);
      if (delta >= gamma) { EXPECT_GE(k, -eps); }
    }
  }
}

TEST(KDelta, ContinuityAwayFromZeroAndAtOrigin) {
  const qg::PointData<1> x{qg::identity_matrix<1>(), 0.3};
  for (const auto& h : catalog(1.0, 0.5)) {
    const double t = 0.8;
    const qg::Vec<1> z{1.7};
    const double ref = qg::k_delta<1>(x, t, z, 1.2, h);
    double prev_err = 1e300;
    for (int n = 1; n <= 6; ++n) {
      const double e = std::pow(10.0, -n);
      const double err = std::abs(qg::k_delta<1>(x, t + e, {z[0] - e}, 1.2, h) - ref);
      EXPECT_LE(err, prev_err + 1e-15);
      prev_err = err;
    }
    EXPECT_LT(prev_err, 1e-4);
    for (int n = 1; n <= 6; ++n) {
      const double e = std::pow(10.0, -n);
      EXPECT_LE(std::abs(qg::k_delta<1>(x, e, {e}, 1.2, h)), 10.0 * e * e);
    }
  }
}
