#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "dem/matrix.hpp"
#include "dem/rng.hpp"
#include "dem/treatment.hpp"

namespace dem {

enum class AssignScheme { Uniform, Propensity };

// log(u) and 1/u appear in the benchmark effect functions with arguments on
// (-1, 1), where they are undefined or singular. Both are evaluated through a
// declared monotone remap of the argument onto (0, 1):
//     g(u) = (u + 1) / 2 + 1e-6,   log(u) := log(g(u)),   1/u := 1/g(u).
// The same remap is used by the generator and by every true-effect oracle, so
// all internal comparisons stay exact; the remap is recorded in the dataset
// manifest.
double remap01(double u);
double remap_log(double u);
double remap_inv(double u);
std::string remap_description();

// One synthetic benchmark regime: covariate law, per-treatment effect
// functions, optional interaction effects, assignment scheme parameters,
// outcome noise and treatment-free effect. Settings 1-2 combine K=3
// treatments over 6 admissible combinations; settings 3-4 combine K=5 over
// 20. Settings 1 and 3 are purely additive; 2 and 4 add interactions.
struct SimSetting {
  int id = 1;
  int p = 10;
  TreatmentSpace space;
  bool interactions = false;
  double noise_sd = 1.0;
  Vec beta_ps;  // propensity index direction, length p

  // Treatment-free effect used for outcome generation and true values.
  double m(std::span<const double> x) const;
  // Effect of a single treatment k (0-based) at x.
  double additive_effect(int k, std::span<const double> x) const;
  // Interaction effect of combination `combo_index` at x (0 when the setting
  // is additive or no entry exists for the combination).
  double interaction_effect(int combo_index, std::span<const double> x) const;

  // Per-setting formula listing for the dataset manifest.
  std::vector<std::string> formula_manifest() const;
};

SimSetting make_setting(int id);

// delta*(x, a): sum of active single-treatment effects plus the combination's
// interaction term. Throws DomainError for an inadmissible combination mask.
double true_delta(const SimSetting& s, std::span<const double> x, std::uint32_t bits);
double true_delta_by_index(const SimSetting& s, std::span<const double> x,
                           int combo_index);
// n x |A| matrix of true effects for each row of X.
Mat true_delta_matrix(const SimSetting& s, const Mat& x);

// n x p matrix of covariates, i.i.d. Uniform(-1, 1).
Mat gen_covariates(int n, int p, Rng& rng);

// Closed-form assignment probabilities at x: uniform over the admissible set,
// or softmax over 0.2 * (index+1) * <x, beta_ps>.
Vec assignment_probabilities(const SimSetting& s, std::span<const double> x,
                             AssignScheme scheme);
int assign_treatment(const SimSetting& s, std::span<const double> x,
                     AssignScheme scheme, Rng& rng);

// y = m(x) + delta*(x, a) + Normal(0, noise_sd^2).
double gen_outcome(const SimSetting& s, std::span<const double> x,
                   int combo_index, Rng& rng);

// A complete generated sample plus its evaluation side-information.
struct SimSample {
  Mat x;
  std::vector<int> combo_idx;
  Vec y;
  Mat true_delta;       // n x |A|
  Mat true_propensity;  // n x |A|
};

SimSample generate_sample(const SimSetting& s, int n, AssignScheme scheme,
                          std::uint64_t seed);

}  // namespace dem
