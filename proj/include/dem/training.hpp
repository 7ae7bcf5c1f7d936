#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dem/encoders.hpp"
#include "dem/matrix.hpp"
#include "dem/nuisance.hpp"

namespace dem {

struct HyperParams {
  int latent_dim = 4;

  // Covariate encoder.
  CovariateEncoder::Kind cov_kind = CovariateEncoder::Kind::Network;
  int depth_alpha = 2;   // hidden layers (Network)
  int width_alpha = 32;  // hidden width (Network)
  int poly_degree = 3;
  int spline_interior_knots = 5;
  int spline_degree = 3;

  // Interactive treatment encoder.
  TreatmentEncoder::Kind trt_kind = TreatmentEncoder::Kind::Network;
  int depth_beta = 1;
  int width_beta = 16;
  // Freeze the interactive encoder at zero (the large-penalty limit of the
  // L1 term); the fitted model is purely additive.
  bool additive_only = false;

  // Optimization.
  double lambda_additive = 1e-4;    // L2 on the additive encoder parameters
  double lambda_interactive = 5e-2; // L1 on the interactive encoder parameters
  int batch_size = 64;
  double learning_rate = 1e-2;
  double lr_decay = 0.95;
  int epochs = 200;
  int inner_steps = 1;  // Adam steps per encoder per mini-batch
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;

  std::uint64_t seed = 1;

  void validate(int n) const;  // throws ConfigError
};

struct FitResult {
  DemModel model;
  Vec loss_trajectory;  // full-data objective after each epoch (length E)
  double initial_loss = 0.0;
  std::optional<double> validation_value;
  HyperParams hp;
};

// Mean over the batch of w_i * (y_i - m_hat_i - alpha(x_i)^T beta(a_i))^2,
// with beta as the model currently encodes it. Penalties are not included.
double weighted_loss(const DemModel& model, const Mat& x,
                     std::span<const int> combo_idx, std::span<const double> y,
                     std::span<const double> w, std::span<const double> m_hat);

// Training view of the loss: the treatment-encoder outputs are centered over
// the batch's distinct combinations before the residual is formed (any fitted
// centering stored on the model is ignored).
double dem_batch_loss(const DemModel& model, const Mat& x,
                      std::span<const int> combo_idx, std::span<const double> y,
                      std::span<const double> w, std::span<const double> m_hat);

// Parameter groups updated in turn by the fitting loop.
enum class ParamGroup { CovariateEncoder, Additive, Interactive };

std::size_t group_param_count(const DemModel& model, ParamGroup g);
void get_group_params(const DemModel& model, ParamGroup g, std::span<double> out);
void set_group_params(DemModel& model, ParamGroup g, std::span<const double> in);

// Analytic gradient of dem_batch_loss w.r.t. one parameter group (data term
// only; penalty subgradients are added separately by the optimizer).
Vec dem_batch_loss_grad(const DemModel& model, ParamGroup g, const Mat& x,
                        std::span<const int> combo_idx, std::span<const double> y,
                        std::span<const double> w, std::span<const double> m_hat);

// Full-data objective: centered weighted loss plus both penalty terms.
double dem_objective(const DemModel& model, const Mat& x,
                     std::span<const int> combo_idx, std::span<const double> y,
                     std::span<const double> w, std::span<const double> m_hat,
                     double lambda_additive, double lambda_interactive);

// Alternating mini-batch minimization of the weighted residual loss: per
// mini-batch the covariate encoder, the additive encoder (with its L2
// penalty), then the interactive encoder (with its L1 penalty) each take
// `inner_steps` Adam updates while the other two are held fixed. Weights and
// m_hat are row-aligned with the data. `update_log`, when provided, records
// one character per sub-step ('a', '0', '1') for order auditing.
FitResult fit_dem(const Mat& x, std::span<const int> combo_idx,
                  std::span<const double> y, const TreatmentSpace& space,
                  const HyperParams& hp, std::span<const double> weights,
                  std::span<const double> m_hat,
                  std::vector<char>* update_log = nullptr);

// Convenience wrapper computing stabilized weights from the propensity model
// (weights = 1 when null) and m_hat from the treatment-free model (0 when
// null).
FitResult fit_dem(const Mat& x, std::span<const int> combo_idx,
                  std::span<const double> y, const TreatmentSpace& space,
                  const HyperParams& hp, const PropensityModel* propensity,
                  const TreatmentFreeModel* treatment_free,
                  std::vector<char>* update_log = nullptr);

struct SearchSpace {
  std::vector<int> latent_dims;
  std::vector<int> depths_alpha, widths_alpha;
  std::vector<int> depths_beta, widths_beta;
  std::vector<double> lambdas_additive, lambdas_interactive;
  std::vector<int> batch_sizes;
  std::vector<double> learning_rates;
  std::vector<int> epoch_choices;
  std::vector<CovariateEncoder::Kind> cov_kinds;
  std::vector<TreatmentEncoder::Kind> trt_kinds;
  std::vector<bool> additive_only_choices;  // include the frozen-interaction model

  static SearchSpace defaults(int n_combos);
};

HyperParams sample_hyperparams(const SearchSpace& space, Rng& rng);

struct SearchTrial {
  HyperParams hp;
  double validation_value = 0.0;
  bool valid = false;
  std::string error;
};

struct SearchResult {
  HyperParams best;
  FitResult fit;
  std::vector<SearchTrial> trials;
};

// Draws n_draws configurations uniformly from the space, fits each on the
// training split, and keeps the one with the largest empirical value on the
// validation split (ties: smaller latent dim, then smaller interactive
// penalty). Throws OptimError listing per-configuration failures when every
// draw fails.
SearchResult random_search(const Mat& x_train, std::span<const int> combo_train,
                           std::span<const double> y_train, const Mat& x_val,
                           std::span<const int> combo_val,
                           std::span<const double> y_val,
                           const TreatmentSpace& space, const SearchSpace& grid,
                           int n_draws, const PropensityModel* propensity,
                           const TreatmentFreeModel* treatment_free,
                           std::uint64_t seed);

}  // namespace dem
