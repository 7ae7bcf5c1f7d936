#include "dem/bspline.hpp"

#include "dem/errors.hpp"

namespace dem {

BSplineBasis::BSplineBasis(double lo, double hi, int n_interior_knots, int degree) {
  if (n_interior_knots < 0) throw ConfigError("negative interior knot count");
  Vec breakpoints;
  breakpoints.push_back(lo);
  for (int i = 1; i <= n_interior_knots; ++i) {
    breakpoints.push_back(lo + (hi - lo) * i / (n_interior_knots + 1));
  }
  breakpoints.push_back(hi);
  degree_ = degree;
  build(breakpoints);
}

BSplineBasis::BSplineBasis(Vec breakpoints, int degree) : degree_(degree) {
  build(breakpoints);
}

void BSplineBasis::build(const Vec& breakpoints) {
  if (degree_ < 0) throw ConfigError("negative spline degree");
  if (breakpoints.size() < 2) throw ConfigError("need at least two knots");
  for (std::size_t i = 1; i < breakpoints.size(); ++i) {
    if (!(breakpoints[i] > breakpoints[i - 1])) {
      throw ConfigError("knots must be strictly increasing");
    }
  }
  lo_ = breakpoints.front();
  hi_ = breakpoints.back();
  const int intervals = static_cast<int>(breakpoints.size()) - 1;
  n_basis_ = intervals + degree_;

  knots_.clear();
  for (int i = 0; i <= degree_; ++i) knots_.push_back(lo_);
  for (std::size_t i = 1; i + 1 < breakpoints.size(); ++i) {
    knots_.push_back(breakpoints[i]);
  }
  for (int i = 0; i <= degree_; ++i) knots_.push_back(hi_);
}

Vec BSplineBasis::eval(double x) const {
  if (x < lo_) x = lo_;
  if (x > hi_) x = hi_;

  // Knot span index: largest i with knots[i] <= x, capped so the last basis
  // function owns the right boundary.
  int span = degree_;
  while (span < n_basis_ - 1 && x >= knots_[span + 1]) ++span;

  // Triangular Cox-de Boor recurrence for the degree+1 non-zero values.
  Vec nz(degree_ + 1, 0.0);
  Vec left(degree_ + 1, 0.0), right(degree_ + 1, 0.0);
  nz[0] = 1.0;
  for (int j = 1; j <= degree_; ++j) {
    left[j] = x - knots_[span + 1 - j];
    right[j] = knots_[span + j] - x;
    double saved = 0.0;
    for (int r = 0; r < j; ++r) {
      const double tmp = nz[r] / (right[r + 1] + left[j - r]);
      nz[r] = saved + right[r + 1] * tmp;
      saved = left[j - r] * tmp;
    }
    nz[j] = saved;
  }

  Vec out(n_basis_, 0.0);
  for (int r = 0; r <= degree_; ++r) out[span - degree_ + r] = nz[r];
  return out;
}

Vec bspline_features(std::span<const double> x, const BSplineBasis& basis) {
  Vec out;
  out.reserve(x.size() * basis.n_basis());
  for (double xi : x) {
    Vec b = basis.eval(xi);
    out.insert(out.end(), b.begin(), b.end());
  }
  return out;
}

}  // namespace dem
