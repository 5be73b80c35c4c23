#pragma once

// Uniform box grids with homogeneous Dirichlet boundary.
//
// Unknowns live at interior nodes. Gradients live at "corner" quadrature
// points: every cell carries one gradient sample per corner, built from the
// cell edges meeting at that corner, with weight |cell|/2^Dim. A node owns
// the 2^Dim corner samples of the cells around it, so nodal quantities that
// depend on the gradient are averages over those samples. With this
// arrangement the Dirichlet form Σ w A ζ·ζ is the five-point (three-point in
// 1D) stencil for diagonal A, and every quadrature uses the same nodal measure.

#include <array>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "quadgrad/errors.hpp"
#include "quadgrad/small_matrix.hpp"

namespace quadgrad {

template <int Dim>
class Grid {
  static_assert(Dim == 1 || Dim == 2, "grids are one- or two-dimensional");

 public:
  static constexpr int kCorners = 1 << Dim;
  using Index = std::array<int, Dim>;

  Grid() = default;

  Grid(const Vec<Dim>& extent, const Index& n) : extent_(extent), n_(n) {
    for (int k = 0; k < Dim; ++k) {
      if (n[k] < 3) throw domain_error("grid needs at least 3 interior points per axis");
      if (!(extent[k] > 0.0) || !std::isfinite(extent[k])) {
        throw domain_error("grid extents must be positive");
      }
      h_[k] = extent[k] / (n[k] + 1);
    }
  }

  [[nodiscard]] const Vec<Dim>& extent() const { return extent_; }
  [[nodiscard]] const Index& n() const { return n_; }
  [[nodiscard]] const Vec<Dim>& h() const { return h_; }

  [[nodiscard]] std::size_t nodes() const {
    std::size_t s = 1;
    for (int k = 0; k < Dim; ++k) s *= static_cast<std::size_t>(n_[k]);
    return s;
  }
  [[nodiscard]] std::size_t cells() const {
    std::size_t s = 1;
    for (int k = 0; k < Dim; ++k) s *= static_cast<std::size_t>(n_[k] + 1);
    return s;
  }
  [[nodiscard]] std::size_t quad_points() const { return cells() * kCorners; }

  /// Measure attached to one node (the lumped mass).
  [[nodiscard]] double node_weight() const {
    double w = 1.0;
    for (int k = 0; k < Dim; ++k) w *= h_[k];
    return w;
  }
  [[nodiscard]] double quad_weight() const { return node_weight() / kCorners; }

  /// Interior index → interior coordinates (0-based, x fastest).
  [[nodiscard]] Index node_coords(std::size_t idx) const {
    Index c{};
    for (int k = 0; k < Dim; ++k) {
      c[k] = static_cast<int>(idx % n_[k]);
      idx /= n_[k];
    }
    return c;
  }

  /// Full coordinates (0..n+1, boundary at 0 and n+1) → interior index, or
  /// −1 on the boundary.
  [[nodiscard]] long node_index_full(const Index& full) const {
    long idx = 0;
    long stride = 1;
    for (int k = 0; k < Dim; ++k) {
      if (full[k] <= 0 || full[k] > n_[k]) return -1;
      idx += (full[k] - 1) * stride;
      stride *= n_[k];
    }
    return idx;
  }

  [[nodiscard]] Index cell_coords(std::size_t c) const {
    Index out{};
    for (int k = 0; k < Dim; ++k) {
      out[k] = static_cast<int>(c % (n_[k] + 1));
      c /= (n_[k] + 1);
    }
    return out;
  }

  [[nodiscard]] std::size_t cell_index(const Index& cc) const {
    std::size_t idx = 0;
    std::size_t stride = 1;
    for (int k = 0; k < Dim; ++k) {
      idx += static_cast<std::size_t>(cc[k]) * stride;
      stride *= static_cast<std::size_t>(n_[k] + 1);
    }
    return idx;
  }

  /// Full coordinates of corner `corner` (bit k set ⇒ upper side in axis k).
  [[nodiscard]] Index corner_full(const Index& cell, int corner) const {
    Index f = cell;
    for (int k = 0; k < Dim; ++k) f[k] += (corner >> k) & 1;
    return f;
  }

  [[nodiscard]] Vec<Dim> node_position(std::size_t idx) const {
    const Index c = node_coords(idx);
    Vec<Dim> x{};
    for (int k = 0; k < Dim; ++k) x[k] = (c[k] + 1) * h_[k];
    return x;
  }

  [[nodiscard]] Vec<Dim> full_position(const Index& full) const {
    Vec<Dim> x{};
    for (int k = 0; k < Dim; ++k) x[k] = full[k] * h_[k];
    return x;
  }

  [[nodiscard]] Vec<Dim> cell_center(std::size_t c) const {
    const Index cc = cell_coords(c);
    Vec<Dim> x{};
    for (int k = 0; k < Dim; ++k) x[k] = (cc[k] + 0.5) * h_[k];
    return x;
  }

  /// For interior node `idx`, the (cell, corner) quadrature samples it owns.
  template <class F>
  void for_each_owned_sample(std::size_t idx, F&& fn) const {
    const Index c = node_coords(idx);
    for (int corner = 0; corner < kCorners; ++corner) {
      Index cell{};
      for (int k = 0; k < Dim; ++k) cell[k] = (c[k] + 1) - ((corner >> k) & 1);
      fn(cell_index(cell), corner);
    }
  }

  friend bool operator==(const Grid& a, const Grid& b) {
    return a.n_ == b.n_ && a.extent_ == b.extent_;
  }

 private:
  Vec<Dim> extent_{};
  Index n_{};
  Vec<Dim> h_{};
};

/// Values at interior nodes; boundary values are identically zero.
template <int Dim>
struct ScalarField {
  Grid<Dim> grid;
  std::vector<double> values;

  ScalarField() = default;
  explicit ScalarField(const Grid<Dim>& g, double fill = 0.0)
      : grid(g), values(g.nodes(), fill) {}
  ScalarField(const Grid<Dim>& g, std::vector<double> v) : grid(g), values(std::move(v)) {
    if (values.size() != grid.nodes()) throw domain_error("field size does not match grid");
    for (std::size_t i = 0; i < values.size(); ++i) {
      if (!std::isfinite(values[i])) {
        throw domain_error("non-finite field value at node " + std::to_string(i));
      }
    }
  }

  template <class F>
  [[nodiscard]] static ScalarField sample(const Grid<Dim>& g, F&& fn) {
    std::vector<double> v(g.nodes());
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = fn(g.node_position(i));
    return ScalarField(g, std::move(v));
  }

  [[nodiscard]] std::size_t size() const { return values.size(); }
  double& operator[](std::size_t i) { return values[i]; }
  double operator[](std::size_t i) const { return values[i]; }

  /// Value at full coordinates, zero on the boundary.
  [[nodiscard]] double at_full(const typename Grid<Dim>::Index& full) const {
    const long idx = grid.node_index_full(full);
    return idx < 0 ? 0.0 : values[static_cast<std::size_t>(idx)];
  }
};

/// Per-cell coefficient matrix A(x).
template <int Dim>
struct MatrixField {
  Grid<Dim> grid;
  std::vector<Mat<Dim>> cells;

  [[nodiscard]] static MatrixField constant(const Grid<Dim>& g, const Mat<Dim>& a) {
    return MatrixField{g, std::vector<Mat<Dim>>(g.cells(), a)};
  }

  template <class F>
  [[nodiscard]] static MatrixField sample(const Grid<Dim>& g, F&& fn) {
    MatrixField m{g, std::vector<Mat<Dim>>(g.cells())};
    for (std::size_t c = 0; c < m.cells.size(); ++c) m.cells[c] = fn(g.cell_center(c));
    return m;
  }

  /// Smallest eigenvalue over all cells.
  [[nodiscard]] double min_eigenvalue() const {
    double m = std::numeric_limits<double>::infinity();
    for (const auto& a : cells) m = std::min(m, quadgrad::min_eigenvalue<Dim>(a));
    return m;
  }

  /// Description of the first violated invariant (symmetry, finiteness,
  /// λ_min ≥ α > 0), or nullopt.
  [[nodiscard]] std::optional<std::string> violation(double alpha) const {
    if (cells.size() != grid.cells()) return "matrix field size does not match grid";
    if (!(alpha > 0.0)) return "declared alpha must be > 0";
    for (std::size_t c = 0; c < cells.size(); ++c) {
      for (const auto& row : cells[c])
        for (double v : row)
          if (!std::isfinite(v)) return "non-finite coefficient in cell " + std::to_string(c);
      if (!is_symmetric<Dim>(cells[c])) return "A is not symmetric in cell " + std::to_string(c);
      const double lam = quadgrad::min_eigenvalue<Dim>(cells[c]);
      if (lam < alpha) {
        return "smallest eigenvalue " + std::to_string(lam) + " < alpha = " +
               std::to_string(alpha) + " in cell " + std::to_string(c);
      }
    }
    return std::nullopt;
  }
};

/// Gradient samples, one per (cell, corner).
template <int Dim>
struct VectorField {
  Grid<Dim> grid;
  std::vector<Vec<Dim>> samples;

  [[nodiscard]] const Vec<Dim>& at(std::size_t cell, int corner) const {
    return samples[cell * Grid<Dim>::kCorners + static_cast<std::size_t>(corner)];
  }
};

/// Corner gradients with zero Dirichlet extension.
template <int Dim>
VectorField<Dim> gradient(const ScalarField<Dim>& v) {
  const Grid<Dim>& g = v.grid;
  VectorField<Dim> out{g, std::vector<Vec<Dim>>(g.quad_points())};
  for (std::size_t c = 0; c < g.cells(); ++c) {
    const auto cell = g.cell_coords(c);
    std::array<double, Grid<Dim>::kCorners> local{};
    for (int m = 0; m < Grid<Dim>::kCorners; ++m) local[m] = v.at_full(g.corner_full(cell, m));
    for (int corner = 0; corner < Grid<Dim>::kCorners; ++corner) {
      Vec<Dim> z{};
      for (int k = 0; k < Dim; ++k) {
        const int hi = corner | (1 << k);
        const int lo = corner & ~(1 << k);
        z[k] = (local[hi] - local[lo]) / g.h()[k];
      }
      out.samples[c * Grid<Dim>::kCorners + corner] = z;
    }
  }
  return out;
}

/// (Σ w |v|^p)^{1/p} with the nodal measure; p = ∞ gives the max norm.
template <int Dim>
double lp_norm(const ScalarField<Dim>& v, double p) {
  if (!(p >= 1.0)) throw domain_error("lp_norm requires p >= 1");
  if (std::isinf(p)) {
    double m = 0.0;
    for (double x : v.values) m = std::max(m, std::abs(x));
    return m;
  }
  double s = 0.0;
  for (double x : v.values) s += std::pow(std::abs(x), p);
  return std::pow(v.grid.node_weight() * s, 1.0 / p);
}

template <int Dim>
double l2_norm(const VectorField<Dim>& z) {
  double s = 0.0;
  for (const auto& q : z.samples) s += dot<Dim>(q, q);
  return std::sqrt(z.grid.quad_weight() * s);
}

/// ‖Dv‖₂, the H₀¹ norm.
template <int Dim>
double h1_seminorm(const ScalarField<Dim>& v) {
  return l2_norm(gradient(v));
}

/// ⟨u, v⟩ with the nodal measure.
template <int Dim>
double inner(const ScalarField<Dim>& u, const ScalarField<Dim>& v) {
  double s = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) s += u[i] * v[i];
  return u.grid.node_weight() * s;
}

/// ⟨A ζ, η⟩ summed over quadrature samples.
template <int Dim>
double energy_inner(const MatrixField<Dim>& a, const VectorField<Dim>& z,
                    const VectorField<Dim>& eta) {
  double s = 0.0;
  for (std::size_t c = 0; c < a.cells.size(); ++c) {
    for (int corner = 0; corner < Grid<Dim>::kCorners; ++corner) {
      const auto& zz = z.at(c, corner);
      const auto& ee = eta.at(c, corner);
      for (int i = 0; i < Dim; ++i)
        for (int j = 0; j < Dim; ++j) s += a.cells[c][i][j] * zz[j] * ee[i];
    }
  }
  return z.grid.quad_weight() * s;
}

template <int Dim>
ScalarField<Dim> map_values(const ScalarField<Dim>& v, const std::function<double(double)>& fn) {
  ScalarField<Dim> out(v.grid);
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = fn(v[i]);
  return out;
}

}  // namespace quadgrad
