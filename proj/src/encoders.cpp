#include "dem/encoders.hpp"

#include <algorithm>
#include <string>

#include "dem/errors.hpp"

namespace dem {

Vec polynomial_features(std::span<const double> x, int degree) {
  if (degree < 1) throw ConfigError("polynomial degree must be >= 1");
  Vec out;
  out.reserve(x.size() * degree);
  for (double xi : x) {
    double p = 1.0;
    for (int d = 0; d < degree; ++d) {
      p *= xi;
      out.push_back(p);
    }
  }
  return out;
}

Vec expand_features(const CovariateEncoder& enc, std::span<const double> x) {
  switch (enc.kind) {
    case CovariateEncoder::Kind::Polynomial:
      return polynomial_features(x, enc.degree);
    case CovariateEncoder::Kind::BSpline:
      return bspline_features(x, enc.basis);
    case CovariateEncoder::Kind::Network:
    default:
      return Vec(x.begin(), x.end());
  }
}

Mat expand_features_batch(const CovariateEncoder& enc, const Mat& x) {
  if (enc.kind == CovariateEncoder::Kind::Network) return x;
  Vec first = expand_features(enc, x.row_span(0));
  Mat out(x.rows, static_cast<int>(first.size()));
  std::copy(first.begin(), first.end(), out.row(0));
#pragma omp parallel for schedule(static) if (x.rows >= 64)
  for (int i = 1; i < x.rows; ++i) {
    Vec f = expand_features(enc, x.row_span(i));
    std::copy(f.begin(), f.end(), out.row(i));
  }
  return out;
}

Vec encode_covariates(const CovariateEncoder& enc, std::span<const double> x) {
  if (static_cast<int>(x.size()) != enc.input_dim) {
    throw ShapeError("covariate encoder expects input of length " +
                     std::to_string(enc.input_dim));
  }
  const Vec f = expand_features(enc, x);
  return enc.net.forward(f);
}

Mat encode_covariates_batch(const CovariateEncoder& enc, const Mat& x) {
  if (x.cols != enc.input_dim) {
    throw ShapeError("covariate encoder expects input of length " +
                     std::to_string(enc.input_dim));
  }
  return enc.net.forward(expand_features_batch(enc, x));
}

Vec encode_treatment_raw(const TreatmentEncoder& enc, const TreatmentSpace& space,
                         int combo_index) {
  if (combo_index < 0 || combo_index >= space.size()) {
    throw DomainError("combination index out of range");
  }
  const std::uint32_t bits = space.mask(combo_index);
  const int r = enc.latent_dim();
  Vec beta(r, 0.0);

  // Additive part W a: sum of the columns of W for active treatments.
  for (int k = 0; k < space.k(); ++k) {
    if (bits & (1u << k)) {
      for (int i = 0; i < r; ++i) beta[i] += enc.additive(i, k);
    }
  }

  if (!enc.masked(bits)) {
    if (enc.kind == TreatmentEncoder::Kind::Dictionary) {
      for (int i = 0; i < r; ++i) beta[i] += enc.dictionary(i, combo_index);
    } else {
      const Vec inter = enc.net.forward(space.bits_vector(combo_index));
      for (int i = 0; i < r; ++i) beta[i] += inter[i];
    }
  }
  return beta;
}

Vec encode_treatment(const TreatmentEncoder& enc, const TreatmentSpace& space,
                     int combo_index) {
  Vec beta = encode_treatment_raw(enc, space, combo_index);
  if (!enc.centering.empty()) {
    for (std::size_t i = 0; i < beta.size(); ++i) beta[i] -= enc.centering[i];
  }
  return beta;
}

Mat normalize_batch(const Mat& betas, std::span<const int> combo_ids) {
  if (betas.rows == 0) throw DataError("normalize_batch: empty batch");
  if (static_cast<int>(combo_ids.size()) != betas.rows) {
    throw ShapeError("normalize_batch: one combo id per row required");
  }

  // Mean over distinct combos; duplicates contribute once.
  std::vector<int> seen;
  Vec mean(betas.cols, 0.0);
  for (int i = 0; i < betas.rows; ++i) {
    if (std::find(seen.begin(), seen.end(), combo_ids[i]) != seen.end()) continue;
    seen.push_back(combo_ids[i]);
    const double* row = betas.row(i);
    for (int j = 0; j < betas.cols; ++j) mean[j] += row[j];
  }
  for (double& v : mean) v /= static_cast<double>(seen.size());

  Mat out = betas;
  for (int i = 0; i < out.rows; ++i) {
    double* row = out.row(i);
    for (int j = 0; j < out.cols; ++j) row[j] -= mean[j];
  }
  return out;
}

double q_value(const DemModel& model, double m_hat, std::span<const double> x,
               int combo_index) {
  const Vec a = encode_covariates(model.alpha, x);
  const Vec b = encode_treatment(model.beta, model.space, combo_index);
  return m_hat + dot(a, b);
}

Mat delta_matrix(const DemModel& model, const Mat& x) {
  const Mat alpha = encode_covariates_batch(model.alpha, x);
  Mat betas(model.space.size(), model.latent_dim);
  for (int j = 0; j < model.space.size(); ++j) {
    const Vec b = encode_treatment(model.beta, model.space, j);
    std::copy(b.begin(), b.end(), betas.row(j));
  }
  Mat delta;
  kernels::matmul_bt(alpha, betas, delta);
  return delta;
}

}  // namespace dem
