#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstddef>
#include <limits>
#include <span>
#include <string>
#include <tuple>
#include <vector>

#include "quadgrad/errors.hpp"

namespace quadgrad {

/// Compressed sparse row matrix.
class CsrMatrix {
 public:
  CsrMatrix() = default;

  /// Builds from (row, col, value) triplets; duplicates are summed.
  CsrMatrix(std::size_t n, std::vector<std::tuple<std::size_t, std::size_t, double>> triplets)
      : n_(n), row_ptr_(n + 1, 0) {
    std::sort(triplets.begin(), triplets.end(), [](const auto& a, const auto& b) {
      return std::tie(std::get<0>(a), std::get<1>(a)) < std::tie(std::get<0>(b), std::get<1>(b));
    });
    std::size_t prev_row = n;
    for (const auto& [r, c, v] : triplets) {
      if (!cols_.empty() && prev_row == r && cols_.back() == c) {
        vals_.back() += v;
        continue;
      }
      cols_.push_back(c);
      vals_.push_back(v);
      ++row_ptr_[r + 1];
      prev_row = r;
    }
    for (std::size_t i = 0; i < n; ++i) row_ptr_[i + 1] += row_ptr_[i];
  }

  [[nodiscard]] std::size_t size() const { return n_; }
  [[nodiscard]] std::size_t nonzeros() const { return vals_.size(); }

  void apply(std::span<const double> x, std::span<double> y) const {
    for (std::size_t i = 0; i < n_; ++i) {
      double s = 0.0;
      for (std::size_t p = row_ptr_[i]; p < row_ptr_[i + 1]; ++p) s += vals_[p] * x[cols_[p]];
      y[i] = s;
    }
  }

  [[nodiscard]] std::vector<double> operator*(std::span<const double> x) const {
    std::vector<double> y(n_);
    apply(x, y);
    return y;
  }

  [[nodiscard]] std::vector<double> diagonal() const {
    std::vector<double> d(n_, 0.0);
    for (std::size_t i = 0; i < n_; ++i)
      for (std::size_t p = row_ptr_[i]; p < row_ptr_[i + 1]; ++p)
        if (cols_[p] == i) d[i] += vals_[p];
    return d;
  }

  /// Largest |a_ij − a_ji|.
  [[nodiscard]] double asymmetry() const {
    double worst = 0.0;
    for (std::size_t i = 0; i < n_; ++i)
      for (std::size_t p = row_ptr_[i]; p < row_ptr_[i + 1]; ++p)
        worst = std::max(worst, std::abs(vals_[p] - at(cols_[p], i)));
    return worst;
  }

  [[nodiscard]] double at(std::size_t r, std::size_t c) const {
    const auto first = cols_.begin() + static_cast<std::ptrdiff_t>(row_ptr_[r]);
    const auto last = cols_.begin() + static_cast<std::ptrdiff_t>(row_ptr_[r + 1]);
    const auto it = std::lower_bound(first, last, c);
    if (it == last || *it != c) return 0.0;
    return vals_[static_cast<std::size_t>(it - cols_.begin())];
  }

  /// Largest absolute row sum; bounds the spectral norm of a symmetric matrix.
  [[nodiscard]] double norm_inf() const {
    double worst = 0.0;
    for (std::size_t i = 0; i < n_; ++i) {
      double s = 0.0;
      for (std::size_t p = row_ptr_[i]; p < row_ptr_[i + 1]; ++p) s += std::abs(vals_[p]);
      worst = std::max(worst, s);
    }
    return worst;
  }

  /// Copy with `extra` added to the diagonal.
  [[nodiscard]] CsrMatrix plus_diagonal(std::span<const double> extra) const {
    CsrMatrix out = *this;
    for (std::size_t i = 0; i < n_; ++i)
      for (std::size_t p = row_ptr_[i]; p < row_ptr_[i + 1]; ++p)
        if (cols_[p] == i) out.vals_[p] += extra[i];
    return out;
  }

 private:
  std::size_t n_ = 0;
  std::vector<std::size_t> row_ptr_;
  std::vector<std::size_t> cols_;
  std::vector<double> vals_;
};

inline std::string short_sci(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3e", v);
  return buf;
}

inline double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline double norm2(std::span<const double> a) { return std::sqrt(dot(a, a)); }

/// Residual level below which rounding dominates: 32ε(‖A‖‖x‖ + ‖b‖).
inline double attainable_residual(double a_norm, double x_norm, double rhs_norm) {
  return 32.0 * std::numeric_limits<double>::epsilon() * (a_norm * x_norm + rhs_norm);
}

struct CgResult {
  std::vector<double> x;
  int iterations = 0;
  double relative_residual = 0.0;
};

/// Jacobi-preconditioned conjugate gradients for SPD `a`. Returns x with
/// ‖a x − rhs‖₂ ≤ tol·‖rhs‖₂, or with the residual at rounding level when
/// that target is below it, or throws iterative_solve_failure.
inline CgResult cg_solve(const CsrMatrix& a, std::span<const double> rhs, double tol = 1e-12,
                         int max_iter = 0, std::span<const double> x0 = {}) {
  const std::size_t n = a.size();
  if (max_iter <= 0) max_iter = static_cast<int>(std::max<std::size_t>(10 * n, 1000));
  CgResult out;
  out.x.assign(n, 0.0);
  if (!x0.empty()) std::copy(x0.begin(), x0.end(), out.x.begin());

  const double rhs_norm = norm2(rhs);
  if (rhs_norm == 0.0) {
    std::fill(out.x.begin(), out.x.end(), 0.0);
    return out;
  }
  const std::vector<double> diag = a.diagonal();
  for (double d : diag) {
    if (!(d > 0.0)) throw iterative_solve_failure("operator has a nonpositive diagonal", 0.0, 0);
  }

  std::vector<double> r(n), z(n), p(n), ap(n);
  a.apply(out.x, ap);
  for (std::size_t i = 0; i < n; ++i) r[i] = rhs[i] - ap[i];
  double rnorm = norm2(r);
  const double a_norm = a.norm_inf();
  const double target = tol * rhs_norm;
  auto good_enough = [&](double res) {
    return res <= target || res <= attainable_residual(a_norm, norm2(out.x), rhs_norm);
  };
  if (rnorm <= target) {
    out.relative_residual = rnorm / rhs_norm;
    return out;
  }
  for (std::size_t i = 0; i < n; ++i) z[i] = r[i] / diag[i];
  p = z;
  double rz = dot(r, z);

  for (int it = 1; it <= max_iter; ++it) {
    a.apply(p, ap);
    const double pap = dot(p, ap);
    if (!(pap > 0.0)) {
      throw iterative_solve_failure("operator is not positive definite (p^T A p = " +
                                        std::to_string(pap) + ")",
                                    rnorm / rhs_norm, it);
    }
    const double alpha = rz / pap;
    for (std::size_t i = 0; i < n; ++i) {
      out.x[i] += alpha * p[i];
      r[i] -= alpha * ap[i];
    }
    rnorm = norm2(r);
    out.iterations = it;
    if (good_enough(rnorm)) {
      // Confirm against the true residual; recurrences drift.
      a.apply(out.x, ap);
      for (std::size_t i = 0; i < n; ++i) r[i] = rhs[i] - ap[i];
      rnorm = norm2(r);
      if (good_enough(rnorm)) {
        out.relative_residual = rnorm / rhs_norm;
        return out;
      }
    }
    for (std::size_t i = 0; i < n; ++i) z[i] = r[i] / diag[i];
    const double rz_new = dot(r, z);
    const double beta = rz_new / rz;
    rz = rz_new;
    for (std::size_t i = 0; i < n; ++i) p[i] = z[i] + beta * p[i];
  }
  throw iterative_solve_failure("CG did not converge in " + std::to_string(max_iter) +
                                    " iterations (relative residual " +
                                    short_sci(rnorm / rhs_norm) + ")",
                                rnorm / rhs_norm, max_iter);
}

}  // namespace quadgrad
