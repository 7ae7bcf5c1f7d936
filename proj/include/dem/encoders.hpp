#pragma once

#include <span>
#include <vector>

#include "dem/bspline.hpp"
#include "dem/matrix.hpp"
#include "dem/nn.hpp"
#include "dem/treatment.hpp"

namespace dem {

// Covariate encoder alpha: R^p -> R^r. Either a feed-forward network on the
// raw covariates, or a linear map on a fixed per-covariate basis expansion
// (polynomial powers or B-splines, no cross-covariate terms).
struct CovariateEncoder {
  enum class Kind { Network, Polynomial, BSpline };

  Kind kind = Kind::Network;
  int input_dim = 0;
  int degree = 3;       // Polynomial only
  BSplineBasis basis;   // BSpline only
  // Network: p -> ... -> r with ReLU hidden layers.
  // Polynomial/BSpline: a single linear layer on the expanded features.
  DenseNet net;

  int output_dim() const { return net.output_dim(); }
};

// Expanded feature vector (x_i, x_i^2, ..., x_i^d) per covariate, in
// covariate-major order.
Vec polynomial_features(std::span<const double> x, int degree);

// Feature expansion for the encoder's basis variants; identity for Network.
Vec expand_features(const CovariateEncoder& enc, std::span<const double> x);
Mat expand_features_batch(const CovariateEncoder& enc, const Mat& x);

Vec encode_covariates(const CovariateEncoder& enc, std::span<const double> x);
Mat encode_covariates_batch(const CovariateEncoder& enc, const Mat& x);

// Treatment encoder beta(a) = W a + beta1(a), where the interactive part
// beta1 is masked to zero on combinations the mask rule excludes and is
// either a free dictionary column per combination or a shared network on the
// binary treatment vector.
struct TreatmentEncoder {
  enum class Kind { Dictionary, Network };
  enum class MaskRule {
    PairsAndAbove,  // beta1(a) = 0 unless at least two treatments are active
    None,           // unmasked (used by the one-hot embedding construction)
  };

  Kind kind = Kind::Network;
  MaskRule mask = MaskRule::PairsAndAbove;
  Mat additive;    // r x K
  Mat dictionary;  // r x |A| (Dictionary variant)
  DenseNet net;    // K -> ... -> r (Network variant)
  Vec centering;   // subtracted from every beta(a) once fitted (empty = 0)

  int latent_dim() const { return additive.rows; }
  bool masked(std::uint32_t bits) const {
    return mask == MaskRule::PairsAndAbove && !interaction_allowed(bits);
  }
};

// beta(a) without the fitted centering shift (training-time view).
Vec encode_treatment_raw(const TreatmentEncoder& enc, const TreatmentSpace& space,
                         int combo_index);
// beta(a) including the fitted centering shift.
Vec encode_treatment(const TreatmentEncoder& enc, const TreatmentSpace& space,
                     int combo_index);

// Centers per-row encoder outputs by the mean over the batch's *distinct*
// combinations (equivalently, the occurrence-reciprocal weighted row mean):
// afterwards the distinct-combo outputs sum to the zero vector.
Mat normalize_batch(const Mat& betas, std::span<const int> combo_ids);

// The fitted outcome model: Q(x, a) = m(x) + <alpha(x), beta(a)>.
struct DemModel {
  CovariateEncoder alpha;
  TreatmentEncoder beta;
  int latent_dim = 0;
  TreatmentSpace space;
  bool fitted = false;
};

double q_value(const DemModel& model, double m_hat, std::span<const double> x,
               int combo_index);

// n x |A| matrix of treatment effects alpha(x_i)^T beta(a_j).
Mat delta_matrix(const DemModel& model, const Mat& x);

}  // namespace dem
