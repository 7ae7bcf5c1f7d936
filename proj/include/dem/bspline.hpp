#pragma once

#include <span>

#include "dem/matrix.hpp"

namespace dem {

// Univariate B-spline basis on a clamped knot vector, evaluated with the
// Cox-de Boor recursion. Inputs outside the knot range are clamped to the
// boundary before evaluation.
class BSplineBasis {
public:
  BSplineBasis() = default;
  // `interior` knots must be strictly increasing and lie inside (lo, hi).
  BSplineBasis(double lo, double hi, int n_interior_knots, int degree);
  // Explicit breakpoints (boundaries included), strictly increasing.
  BSplineBasis(Vec breakpoints, int degree);

  int degree() const { return degree_; }
  int n_basis() const { return n_basis_; }
  const Vec& knots() const { return knots_; }

  // Values of all basis functions at x; they sum to 1 on the knot range.
  Vec eval(double x) const;

private:
  void build(const Vec& breakpoints);

  int degree_ = 0;
  int n_basis_ = 0;
  Vec knots_;  // clamped: each boundary repeated degree+1 times
  double lo_ = 0.0, hi_ = 0.0;
};

// Per-covariate basis expansion (no cross-covariate terms): the output is the
// concatenation of basis values of each coordinate of x.
Vec bspline_features(std::span<const double> x, const BSplineBasis& basis);

}  // namespace dem
