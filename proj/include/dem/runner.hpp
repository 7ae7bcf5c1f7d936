#pragma once

#include <string>
#include <vector>

#include "dem/config.hpp"
#include "dem/dataset.hpp"
#include "dem/serialize.hpp"

namespace dem::runner {

// Writes one dataset CSV + truth sidecar per replicate plus a run manifest;
// returns the dataset paths. Identical configs produce byte-identical trees.
std::vector<std::string> run_simulate(const ExperimentConfig& config,
                                      const std::string& out_dir);

// Fits nuisance models and the outcome model on one dataset and writes a
// bundle directory (model.json, nuisance.json, trajectory.csv, config.json,
// manifest.json). Returns the manifest.
Json run_fit(const ExperimentConfig& config, const std::string& dataset_csv,
             const std::string& bundle_dir);

// Scores a fitted bundle on a dataset: empirical value always; accuracy
// against the oracle and Monte Carlo true values when the dataset has a
// simulation truth sidecar. Writes metrics.json under the bundle.
Json run_evaluate(const ExperimentConfig& config, const std::string& bundle_dir,
                  const std::string& dataset_csv);

// Budget-constrained allocation. The effect matrix comes from the fitted
// bundle applied to the dataset rows, or from an explicit delta CSV. Writes
// one assignment CSV per budget and a value-vs-budget table.
Json run_allocate(const ExperimentConfig& config, const std::string& bundle_dir,
                  const std::string& dataset_csv, const std::string& delta_csv,
                  const std::string& out_dir);

// End-to-end replicate loop (simulate, fit, evaluate per replicate) with
// aggregated mean/sd metrics.
Json run_sweep(const ExperimentConfig& config, const std::string& out_dir);

// Aggregates previously written metrics.json files into one mean/sd report.
Json run_report(const std::vector<std::string>& metrics_files,
                const std::string& out_file);

// Shared helpers (exposed for tests).
Dataset load_dataset(const ExperimentConfig& config, const std::string& csv_path);
std::string sidecar_path(const std::string& dataset_csv);

}  // namespace dem::runner
