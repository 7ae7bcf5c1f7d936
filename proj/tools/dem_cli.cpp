// Command-line entry point: simulate / fit / evaluate / allocate / sweep /
// report. Configuration comes from a strict JSON file; a few options can be
// overridden per invocation. DEM_THREADS caps the OpenMP worker count.

#include <cstdio>
#include <cstdlib>
#include <iostream>
#include <string>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "CLI11.hpp"

#include "dem/config.hpp"
#include "dem/errors.hpp"
#include "dem/runner.hpp"

namespace {

struct CommonOpts {
  std::string config_path;
  std::string out_dir;
  std::uint64_t seed = 0;
  bool seed_set = false;
};

dem::ExperimentConfig load(const CommonOpts& o) {
  dem::ExperimentConfig config =
      o.config_path.empty() ? dem::ExperimentConfig{} : dem::load_config(o.config_path);
  if (o.seed_set) config.seed = o.seed;
  if (!o.out_dir.empty()) config.out_dir = o.out_dir;
  return config;
}

void add_common(CLI::App* cmd, CommonOpts& o, bool config_required) {
  auto* c = cmd->add_option("--config", o.config_path, "experiment config JSON");
  if (config_required) c->required();
  cmd->add_option("--out", o.out_dir, "output directory");
  cmd->add_option("--seed", o.seed, "master seed override")
      ->each([&o](const std::string&) { o.seed_set = true; });
}

}  // namespace

int main(int argc, char** argv) {
#ifdef _OPENMP
  if (const char* env = std::getenv("DEM_THREADS")) {
    const int t = std::atoi(env);
    if (t > 0) omp_set_num_threads(t);
  }
#endif

  CLI::App app{"Individualized combination-treatment rules: outcome model "
               "fitting and budget-constrained allocation"};
  app.require_subcommand(1);

  CommonOpts sim_opts;
  auto* sim = app.add_subcommand("simulate", "generate benchmark datasets");
  add_common(sim, sim_opts, true);

  CommonOpts fit_opts;
  std::string fit_data;
  bool true_propensity = false;
  auto* fit = app.add_subcommand("fit", "fit nuisance models and the outcome model");
  add_common(fit, fit_opts, true);
  fit->add_option("--data", fit_data, "dataset CSV")->required();
  fit->add_flag("--true-propensity", true_propensity,
                "weight by the simulation's true propensities");

  CommonOpts eval_opts;
  std::string eval_data, eval_bundle;
  auto* eval = app.add_subcommand("evaluate", "score a fitted bundle on a dataset");
  add_common(eval, eval_opts, false);
  eval->add_option("--bundle", eval_bundle, "bundle directory")->required();
  eval->add_option("--data", eval_data, "dataset CSV")->required();

  CommonOpts alloc_opts;
  std::string alloc_bundle, alloc_data, alloc_delta;
  std::vector<double> alloc_budgets;
  auto* alloc = app.add_subcommand("allocate",
                                   "budget-constrained treatment allocation");
  add_common(alloc, alloc_opts, true);
  alloc->add_option("--bundle", alloc_bundle, "bundle directory");
  alloc->add_option("--data", alloc_data, "dataset CSV (rows to allocate for)");
  alloc->add_option("--delta", alloc_delta, "effect matrix CSV (subjects x combos)");
  alloc->add_option("--budget", alloc_budgets,
                    "average budget(s) per subject; overrides the config");

  CommonOpts sweep_opts;
  auto* sweep = app.add_subcommand(
      "sweep", "replicated simulate/fit/evaluate loop with aggregation");
  add_common(sweep, sweep_opts, true);

  std::vector<std::string> report_files;
  std::string report_out = "report.json";
  auto* report = app.add_subcommand("report", "aggregate metrics files");
  report->add_option("--metrics", report_files, "metrics.json files")->required();
  report->add_option("--out", report_out, "report output path");

  CLI11_PARSE(app, argc, argv);

  try {
    if (sim->parsed()) {
      const dem::ExperimentConfig config = load(sim_opts);
      const auto files = dem::runner::run_simulate(config, config.out_dir);
      for (const auto& f : files) std::cout << f << "\n";
    } else if (fit->parsed()) {
      dem::ExperimentConfig config = load(fit_opts);
      if (true_propensity) config.nuisance.use_true_propensity = true;
      const std::string bundle =
          fit_opts.out_dir.empty() ? config.out_dir : fit_opts.out_dir;
      const dem::Json manifest = dem::runner::run_fit(config, fit_data, bundle);
      std::cout << "bundle: " << bundle << "\n"
                << "initial_loss: " << manifest.at("initial_loss") << "\n"
                << "final_loss: " << manifest.at("final_loss") << "\n";
    } else if (eval->parsed()) {
      const dem::ExperimentConfig config = load(eval_opts);
      const dem::Json metrics =
          dem::runner::run_evaluate(config, eval_bundle, eval_data);
      std::cout << metrics.dump(2) << "\n";
    } else if (alloc->parsed()) {
      dem::ExperimentConfig config = load(alloc_opts);
      if (!alloc_budgets.empty()) config.budget.budgets = alloc_budgets;
      const dem::Json result = dem::runner::run_allocate(
          config, alloc_bundle, alloc_data, alloc_delta, config.out_dir);
      std::cout << result.dump(2) << "\n";
    } else if (sweep->parsed()) {
      const dem::ExperimentConfig config = load(sweep_opts);
      const dem::Json agg = dem::runner::run_sweep(config, config.out_dir);
      std::cout << agg.dump(2) << "\n";
    } else if (report->parsed()) {
      const dem::Json agg = dem::runner::run_report(report_files, report_out);
      std::cout << agg.dump(2) << "\n";
    }
  } catch (const dem::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return e.exit_code();
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
