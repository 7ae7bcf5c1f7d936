#pragma once

#include <optional>
#include <string>

#include "dem/serialize.hpp"
#include "dem/simdata.hpp"
#include "dem/training.hpp"

namespace dem {

struct NuisanceConfig {
  bool use_true_propensity = false;  // simulated data only
  double propensity_lambda = 1e-3;
  TreatmentFreeFitOptions treatment_free;
};

struct BudgetConfig {
  Vec treatment_costs;  // length K
  Vec budgets;          // average budget per subject, one entry per scenario
  double grid_step = 0.0;
};

struct SearchConfig {
  bool enabled = false;
  int draws = 50;
  double validation_fraction = 0.25;
  SearchSpace space;  // empty lists fall back to the built-in defaults
};

// One experiment description, parsed from strict JSON (unknown keys are
// rejected; see schema/experiment_config.schema.json for the published
// shape).
struct ExperimentConfig {
  // Data source: a simulation setting or an external dataset.
  int setting = 0;  // 1..4; 0 when a dataset path is used
  std::string dataset_path;
  std::optional<TreatmentSpace> treatments;  // required for bare CSV input

  int n = 1000;
  int replicates = 1;
  std::uint64_t seed = 1;
  AssignScheme scheme = AssignScheme::Uniform;
  double noise_sd = 1.0;

  NuisanceConfig nuisance;
  HyperParams fit;
  SearchConfig search;
  BudgetConfig budget;
  int eval_mc_draws = 20000;

  std::string out_dir = "runs/out";
};

ExperimentConfig config_from_json(const Json& j);
Json config_to_json(const ExperimentConfig& c);
ExperimentConfig load_config(const std::string& path);

// The JSON-schema document the parser enforces.
Json config_schema();

}  // namespace dem
