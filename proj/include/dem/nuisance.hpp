#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "dem/matrix.hpp"
#include "dem/nn.hpp"
#include "dem/treatment.hpp"

namespace dem {

// Multinomial logistic working model of the assignment mechanism with an
// unpenalized intercept per combination. Predicted probabilities are floored
// at p_min and renormalized; inverse-probability weights are stabilized by
// the marginal treatment frequencies and clipped to [1/w_max, w_max].
struct PropensityModel {
  Mat gamma;        // p x |A| coefficient matrix (column per combination)
  Vec intercept;    // |A|
  Vec frequencies;  // empirical marginal treatment frequencies, sum to 1
  double p_min = 1e-3;
  double w_max = 20.0;
  TreatmentSpace space;

  int p() const { return gamma.rows; }
};

Vec predict_propensity(const PropensityModel& model, std::span<const double> x);
double stabilized_weight(const PropensityModel& model, std::span<const double> x,
                         int combo_index);

struct PropensityFitOptions {
  double lambda = 1e-3;  // group-lasso penalty on covariate rows
  int max_iter = 5000;
  double tol = 1e-8;  // stop when the objective change falls below this
  double p_min = 1e-3;
  double w_max = 20.0;
};

struct PropensityFit {
  PropensityModel model;
  Vec objective_path;  // penalized objective after each accepted step
  int iterations = 0;
  bool converged = false;
  std::vector<std::string> warnings;
};

// Group-lasso penalized multinomial logistic regression by proximal gradient
// (monotone ISTA with backtracking); each covariate's coefficient row across
// all combinations forms one penalty group. The intercept is unpenalized.
PropensityFit fit_propensity(const Mat& x, std::span<const int> combo_idx,
                             const TreatmentSpace& space,
                             const PropensityFitOptions& opts = {});

// Smooth part of the objective (average negative log-likelihood) and its
// gradient; exposed for the finite-difference audit.
double propensity_nll(const Mat& x, std::span<const int> combo_idx,
                      const Mat& gamma, const Vec& intercept);
void propensity_nll_grad(const Mat& x, std::span<const int> combo_idx,
                         const Mat& gamma, const Vec& intercept, Mat& dgamma,
                         Vec& dintercept);
// Full penalized objective: nll + lambda * sum_j ||gamma row j||_2.
double propensity_objective(const Mat& x, std::span<const int> combo_idx,
                            const Mat& gamma, const Vec& intercept, double lambda);

// Two-layer network for the treatment-free effect m(x).
struct TreatmentFreeModel {
  DenseNet net;  // p -> hidden -> 1, biases on both layers
};

struct TreatmentFreeFitOptions {
  int hidden = 16;
  int epochs = 200;
  int batch_size = 64;
  double learning_rate = 1e-2;
  double lr_decay = 0.99;
  std::uint64_t seed = 1;
};

// Minimizes mean squared error of y against m(x) with Adam. Throws OptimError
// on divergence.
TreatmentFreeModel fit_treatment_free(const Mat& x, std::span<const double> y,
                                      const TreatmentFreeFitOptions& opts = {});

double predict_treatment_free(const TreatmentFreeModel& model,
                              std::span<const double> x);
Vec predict_treatment_free_batch(const TreatmentFreeModel& model, const Mat& x);

}  // namespace dem
