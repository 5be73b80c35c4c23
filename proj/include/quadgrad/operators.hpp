#pragma once

#include <array>
#include <cmath>
#include <tuple>
#include <vector>

#include "quadgrad/errors.hpp"
#include "quadgrad/grid.hpp"
#include "quadgrad/sparse.hpp"

namespace quadgrad {

/// Stiffness matrix of −div(A D·): row i is ⟨A Dφ_j, Dφ_i⟩ over the corner
/// quadrature. Symmetric positive definite whenever every A(x) is.
template <int Dim>
CsrMatrix assemble_operator(const MatrixField<Dim>& a) {
  const Grid<Dim>& g = a.grid;
  constexpr int kC = Grid<Dim>::kCorners;
  if (a.cells.size() != g.cells()) throw domain_error("matrix field size does not match grid");
  for (std::size_t c = 0; c < a.cells.size(); ++c) {
    if (!is_symmetric<Dim>(a.cells[c]) || !(min_eigenvalue<Dim>(a.cells[c]) > 0.0)) {
      throw domain_error("non-SPD coefficient in cell " + std::to_string(c) +
                         "; assembly rejected");
    }
  }

  // grad[corner][k][m]: coefficient of local node m in component k at `corner`.
  std::array<std::array<std::array<double, kC>, Dim>, kC> grad{};
  for (int corner = 0; corner < kC; ++corner) {
    for (int k = 0; k < Dim; ++k) {
      grad[corner][k][corner | (1 << k)] += 1.0 / g.h()[k];
      grad[corner][k][corner & ~(1 << k)] -= 1.0 / g.h()[k];
    }
  }

  std::vector<std::tuple<std::size_t, std::size_t, double>> trip;
  trip.reserve(g.cells() * kC * kC);
  const double w = g.quad_weight();
  for (std::size_t c = 0; c < g.cells(); ++c) {
    const auto cell = g.cell_coords(c);
    std::array<long, kC> idx{};
    for (int m = 0; m < kC; ++m) idx[m] = g.node_index_full(g.corner_full(cell, m));
    const Mat<Dim>& am = a.cells[c];
    for (int m = 0; m < kC; ++m) {
      if (idx[m] < 0) continue;
      for (int mm = 0; mm < kC; ++mm) {
        if (idx[mm] < 0) continue;
        double v = 0.0;
        for (int corner = 0; corner < kC; ++corner)
          for (int i = 0; i < Dim; ++i)
            for (int j = 0; j < Dim; ++j) v += am[i][j] * grad[corner][j][mm] * grad[corner][i][m];
        if (v != 0.0) {
          trip.emplace_back(static_cast<std::size_t>(idx[m]), static_cast<std::size_t>(idx[mm]),
                            w * v);
        }
      }
    }
  }
  return CsrMatrix(g.nodes(), std::move(trip));
}

/// Stiffness matrix of −Δ.
template <int Dim>
CsrMatrix assemble_laplacian(const Grid<Dim>& g) {
  return assemble_operator(MatrixField<Dim>::constant(g, identity_matrix<Dim>()));
}

/// z with −Δ_h z = f, the Riesz representative of f in H₀¹ (norm ‖Dz‖₂).
template <int Dim>
ScalarField<Dim> riesz_representative(const ScalarField<Dim>& f, const CsrMatrix& laplacian,
                                      double tol = 1e-12) {
  std::vector<double> rhs(f.values);
  const double w = f.grid.node_weight();
  for (double& v : rhs) v *= w;
  auto res = cg_solve(laplacian, rhs, tol);
  return ScalarField<Dim>(f.grid, std::move(res.x));
}

template <int Dim>
double hminus1_norm(const ScalarField<Dim>& f, const CsrMatrix& laplacian, double tol = 1e-12) {
  return h1_seminorm(riesz_representative(f, laplacian, tol));
}

template <int Dim>
double hminus1_norm(const ScalarField<Dim>& f, double tol = 1e-12) {
  return hminus1_norm(f, assemble_laplacian(f.grid), tol);
}

}  // namespace quadgrad
