#pragma once

#include <array>
#include <cmath>
#include <cstddef>

namespace quadgrad {

template <int Dim>
using Vec = std::array<double, Dim>;

/// Dense Dim×Dim matrix; stored in full so that asymmetric input can be
/// detected rather than silently symmetrised.
template <int Dim>
using Mat = std::array<std::array<double, Dim>, Dim>;

template <int Dim>
constexpr Mat<Dim> identity_matrix(double scale = 1.0) {
  Mat<Dim> m{};
  for (int i = 0; i < Dim; ++i) m[i][i] = scale;
  return m;
}

template <int Dim>
constexpr double dot(const Vec<Dim>& a, const Vec<Dim>& b) {
  double s = 0.0;
  for (int i = 0; i < Dim; ++i) s += a[i] * b[i];
  return s;
}

/// A ζ · ζ
template <int Dim>
constexpr double quad(const Mat<Dim>& a, const Vec<Dim>& z) {
  double s = 0.0;
  for (int i = 0; i < Dim; ++i)
    for (int j = 0; j < Dim; ++j) s += a[i][j] * z[i] * z[j];
  return s;
}

template <int Dim>
constexpr Vec<Dim> scaled(const Vec<Dim>& z, double c) {
  Vec<Dim> out{};
  for (int i = 0; i < Dim; ++i) out[i] = c * z[i];
  return out;
}

template <int Dim>
constexpr bool is_symmetric(const Mat<Dim>& a) {
  for (int i = 0; i < Dim; ++i)
    for (int j = i + 1; j < Dim; ++j)
      if (a[i][j] != a[j][i]) return false;
  return true;
}

/// Smallest eigenvalue of the symmetric part.
template <int Dim>
double min_eigenvalue(const Mat<Dim>& a) {
  static_assert(Dim == 1 || Dim == 2, "closed form only for Dim <= 2");
  if constexpr (Dim == 1) {
    return a[0][0];
  } else {
    const double off = 0.5 * (a[0][1] + a[1][0]);
    const double mean = 0.5 * (a[0][0] + a[1][1]);
    const double half_gap = 0.5 * (a[0][0] - a[1][1]);
    return mean - std::hypot(half_gap, off);
  }
}

}  // namespace quadgrad
