#include "dem/runner.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numeric>

#include "dem/budget.hpp"
#include "dem/errors.hpp"
#include "dem/policy.hpp"

namespace dem::runner {

namespace fs = std::filesystem;

namespace {

void ensure_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create directory " + dir + ": " + ec.message());
}

std::string rep_dir_name(int rep) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "replicate_%03d", rep);
  return buf;
}

Json mat_json(const Mat& m) {
  return Json{{"rows", m.rows}, {"cols", m.cols}, {"data", m.data}};
}

Mat mat_from(const Json& j) {
  Mat m(j.at("rows").get<int>(), j.at("cols").get<int>());
  m.data = j.at("data").get<Vec>();
  if (m.data.size() != static_cast<std::size_t>(m.rows) * m.cols) {
    throw DataError("matrix payload size mismatch in sidecar");
  }
  return m;
}

Json run_manifest(const char* command, const ExperimentConfig& config,
                  std::vector<std::string> files) {
  std::sort(files.begin(), files.end());
  const Json cfg = config_to_json(config);
  return Json{{"format", "dem-run"},
              {"artifact_version", kArtifactVersion},
              {"command", command},
              {"config_hash", json_hash(cfg)},
              {"config", cfg},
              {"files", files}};
}

SimSetting setting_from_config(const ExperimentConfig& config) {
  SimSetting s = make_setting(config.setting);
  s.noise_sd = config.noise_sd;
  return s;
}

struct Nuisance {
  bool fitted_propensity = false;
  PropensityModel propensity;
  TreatmentFreeModel treatment_free;
  Vec weights;  // per row
  Vec m_hat;    // per row
};

// Stabilized inverse-probability weights from the truth sidecar.
Vec weights_from_true_propensity(const Dataset& data, const Mat& true_prop,
                                 double w_max) {
  const int n = data.n();
  Vec counts(data.space.size(), 0.0);
  for (int idx : data.combo_idx) counts[idx] += 1.0;
  Vec weights(n);
  for (int i = 0; i < n; ++i) {
    const int a = data.combo_idx[i];
    const double freq = counts[a] / n;
    weights[i] = std::clamp(freq / true_prop(i, a), 1.0 / w_max, w_max);
  }
  return weights;
}

Nuisance fit_nuisance(const ExperimentConfig& config, const Dataset& data,
                      const Mat* true_propensity) {
  Nuisance nu;
  const int n = data.n();

  if (config.nuisance.use_true_propensity) {
    if (true_propensity == nullptr || true_propensity->rows != n) {
      throw ConfigError(
          "use_true_propensity requires a simulation truth sidecar");
    }
    nu.weights = weights_from_true_propensity(data, *true_propensity, 20.0);
  } else {
    PropensityFitOptions opts;
    opts.lambda = config.nuisance.propensity_lambda;
    PropensityFit fit =
        fit_propensity(data.x, data.combo_idx, data.space, opts);
    nu.propensity = std::move(fit.model);
    nu.fitted_propensity = true;
    nu.weights.resize(n);
    for (int i = 0; i < n; ++i) {
      nu.weights[i] =
          stabilized_weight(nu.propensity, data.x.row_span(i), data.combo_idx[i]);
    }
  }

  TreatmentFreeFitOptions tf = config.nuisance.treatment_free;
  tf.seed = mix_seed(config.seed, 0x7f5eed);
  tf.batch_size = std::min(tf.batch_size, n);
  nu.treatment_free = fit_treatment_free(data.x, data.y, tf);
  nu.m_hat = predict_treatment_free_batch(nu.treatment_free, data.x);
  return nu;
}

Json mc_value_json(const McValue& v) {
  return Json{{"value", v.value}, {"std_error", v.std_error}, {"draws", v.draws}};
}

double json_number(const Json& j, const std::string& key) {
  return j.at(key).get<double>();
}

struct MeanSd {
  double mean = 0.0;
  double sd = 0.0;
  int count = 0;
};

MeanSd mean_sd(const Vec& values) {
  MeanSd out;
  out.count = static_cast<int>(values.size());
  if (values.empty()) return out;
  for (double v : values) out.mean += v;
  out.mean /= out.count;
  if (out.count > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - out.mean) * (v - out.mean);
    out.sd = std::sqrt(ss / (out.count - 1));
  }
  return out;
}

}  // namespace

std::string sidecar_path(const std::string& dataset_csv) {
  return (fs::path(dataset_csv).parent_path() / "truth.json").string();
}

Dataset load_dataset(const ExperimentConfig& config, const std::string& csv_path) {
  if (config.treatments) {
    return read_dataset_csv(csv_path, &*config.treatments);
  }
  const std::string sidecar = sidecar_path(csv_path);
  if (fs::exists(sidecar)) {
    const Json truth = load_json(sidecar);
    const TreatmentSpace space = space_from_json(truth.at("treatment_space"));
    return read_dataset_csv(csv_path, &space);
  }
  if (config.setting != 0) {
    const TreatmentSpace space = make_setting(config.setting).space;
    return read_dataset_csv(csv_path, &space);
  }
  return read_dataset_csv(csv_path, nullptr);
}

std::vector<std::string> run_simulate(const ExperimentConfig& config,
                                      const std::string& out_dir) {
  if (config.setting == 0) {
    throw ConfigError("simulate requires config.setting in 1..4");
  }
  const SimSetting setting = setting_from_config(config);
  ensure_dir(out_dir);

  std::vector<std::string> csv_paths;
  std::vector<std::string> rel_files;
  for (int rep = 0; rep < config.replicates; ++rep) {
    const std::uint64_t rep_seed = mix_seed(config.seed, rep);
    const SimSample sample = generate_sample(setting, config.n, config.scheme,
                                             rep_seed);
    const Dataset data = dataset_from_sample(setting, sample);

    const std::string rep_dir = out_dir + "/" + rep_dir_name(rep);
    ensure_dir(rep_dir);
    const std::string csv = rep_dir + "/data.csv";
    write_dataset_csv(csv, data);

    Json truth{{"format", "dem-truth"},
               {"setting", setting.id},
               {"n", config.n},
               {"scheme",
                config.scheme == AssignScheme::Uniform ? "uniform" : "propensity"},
               {"noise_sd", setting.noise_sd},
               {"seed", rep_seed},
               {"treatment_space", space_to_json(setting.space)},
               {"formulas", setting.formula_manifest()},
               {"true_delta", mat_json(sample.true_delta)},
               {"true_propensity", mat_json(sample.true_propensity)}};
    save_json(rep_dir + "/truth.json", truth);

    csv_paths.push_back(csv);
    rel_files.push_back(rep_dir_name(rep) + "/data.csv");
    rel_files.push_back(rep_dir_name(rep) + "/truth.json");
  }
  save_json(out_dir + "/manifest.json",
            run_manifest("simulate", config, rel_files));
  return csv_paths;
}

Json run_fit(const ExperimentConfig& config, const std::string& dataset_csv,
             const std::string& bundle_dir) {
  Dataset data = load_dataset(config, dataset_csv);
  ensure_dir(bundle_dir);

  Mat true_prop;
  const std::string sidecar = sidecar_path(dataset_csv);
  if (fs::exists(sidecar)) {
    const Json truth = load_json(sidecar);
    if (truth.contains("true_propensity")) {
      true_prop = mat_from(truth.at("true_propensity"));
    }
  }
  const Nuisance nu = fit_nuisance(config, data,
                                   true_prop.rows > 0 ? &true_prop : nullptr);

  FitResult fit;
  Json search_info;
  if (config.search.enabled) {
    // Deterministic shuffled split into train/validation.
    const int n = data.n();
    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    Rng split_rng(mix_seed(config.seed, 0x5b717));
    for (int i = n - 1; i > 0; --i) {
      std::swap(order[i], order[split_rng.uniform_int(i + 1)]);
    }
    const int n_val = std::max(1, static_cast<int>(n * config.search.validation_fraction));
    const int n_train = n - n_val;
    if (n_train < 1) throw ConfigError("validation split leaves no training rows");

    auto subset = [&](int from, int count) {
      Dataset d;
      d.space = data.space;
      d.x = Mat(count, data.p());
      d.combo_idx.resize(count);
      d.y.resize(count);
      for (int i = 0; i < count; ++i) {
        const int src = order[from + i];
        std::copy(data.x.row(src), data.x.row(src) + data.p(), d.x.row(i));
        d.combo_idx[i] = data.combo_idx[src];
        d.y[i] = data.y[src];
      }
      return d;
    };
    const Dataset train = subset(0, n_train);
    const Dataset val = subset(n_train, n_val);

    // Unspecified dimensions of the search space fall back to the built-in
    // defaults; user-specified lists are kept as-is.
    SearchSpace space = config.search.space;
    const SearchSpace defaults = SearchSpace::defaults(data.space.size());
    if (space.latent_dims.empty()) space.latent_dims = defaults.latent_dims;
    if (space.depths_alpha.empty()) space.depths_alpha = defaults.depths_alpha;
    if (space.widths_alpha.empty()) space.widths_alpha = defaults.widths_alpha;
    if (space.depths_beta.empty()) space.depths_beta = defaults.depths_beta;
    if (space.widths_beta.empty()) space.widths_beta = defaults.widths_beta;
    if (space.lambdas_additive.empty()) {
      space.lambdas_additive = defaults.lambdas_additive;
    }
    if (space.lambdas_interactive.empty()) {
      space.lambdas_interactive = defaults.lambdas_interactive;
    }
    if (space.batch_sizes.empty()) space.batch_sizes = defaults.batch_sizes;
    if (space.learning_rates.empty()) {
      space.learning_rates = defaults.learning_rates;
    }
    if (space.epoch_choices.empty()) space.epoch_choices = defaults.epoch_choices;
    if (space.cov_kinds.empty()) space.cov_kinds = defaults.cov_kinds;
    if (space.trt_kinds.empty()) space.trt_kinds = defaults.trt_kinds;

    const PropensityModel* prop = nu.fitted_propensity ? &nu.propensity : nullptr;
    SearchResult res = random_search(
        train.x, train.combo_idx, train.y, val.x, val.combo_idx, val.y,
        data.space, space, config.search.draws, prop, &nu.treatment_free,
        mix_seed(config.seed, 0x5ea6c4));
    fit = std::move(res.fit);
    Json trials = Json::array();
    for (const auto& t : res.trials) {
      trials.push_back(Json{{"validation_value", t.validation_value},
                            {"valid", t.valid},
                            {"error", t.error},
                            {"hyperparams", hyperparams_to_json(t.hp)}});
    }
    search_info = Json{{"draws", config.search.draws},
                       {"best", hyperparams_to_json(res.best)},
                       {"trials", trials}};
  } else {
    HyperParams hp = config.fit;
    hp.batch_size = std::min(hp.batch_size, data.n());
    fit = fit_dem(data.x, data.combo_idx, data.y, data.space, hp, nu.weights,
                  nu.m_hat);
  }

  save_json(bundle_dir + "/model.json", model_to_json(fit.model));

  Json nuisance_doc{{"format", "dem-nuisance"},
                    {"version", 1},
                    {"mode", config.nuisance.use_true_propensity
                                 ? "true_propensity"
                                 : "fitted"},
                    {"treatment_free", treatment_free_to_json(nu.treatment_free)}};
  if (nu.fitted_propensity) {
    nuisance_doc["propensity"] = propensity_to_json(nu.propensity);
  }
  save_json(bundle_dir + "/nuisance.json", nuisance_doc);

  {
    std::ofstream traj(bundle_dir + "/trajectory.csv");
    if (!traj) throw IoError("cannot write " + bundle_dir + "/trajectory.csv");
    traj << "epoch,objective\n";
    for (std::size_t e = 0; e < fit.loss_trajectory.size(); ++e) {
      char buf[32];
      std::snprintf(buf, sizeof(buf), "%.17g", fit.loss_trajectory[e]);
      traj << e << "," << buf << "\n";
    }
  }
  save_json(bundle_dir + "/config.json", config_to_json(config));

  Json manifest = run_manifest("fit", config,
                               {"model.json", "nuisance.json", "trajectory.csv",
                                "config.json"});
  manifest["dataset"] = fs::path(dataset_csv).filename().string();
  manifest["initial_loss"] = fit.initial_loss;
  manifest["final_loss"] =
      fit.loss_trajectory.empty() ? fit.initial_loss : fit.loss_trajectory.back();
  manifest["hyperparams"] = hyperparams_to_json(fit.hp);
  if (!search_info.is_null()) manifest["search"] = search_info;
  save_json(bundle_dir + "/manifest.json", manifest);
  return manifest;
}

Json run_evaluate(const ExperimentConfig& config, const std::string& bundle_dir,
                  const std::string& dataset_csv) {
  const DemModel model = model_from_json(load_json(bundle_dir + "/model.json"));
  // Dataset combos must live in the model's admissible set.
  const Dataset data = read_dataset_csv(dataset_csv, &model.space);
  const Policy policy = make_policy(model);

  // Per-subject decision export.
  {
    std::ofstream out(bundle_dir + "/decisions.csv");
    if (!out) throw IoError("cannot write " + bundle_dir + "/decisions.csv");
    out << "subject,bitmask,combo_index\n";
    for (int i = 0; i < data.n(); ++i) {
      const int j = policy.decide_index(data.x.row_span(i));
      out << i << "," << model.space.mask(j) << "," << j << "\n";
    }
  }

  Json metrics{{"format", "dem-metrics"}, {"dataset", fs::path(dataset_csv).filename().string()}};
  const EmpiricalValue ev = empirical_value(policy, data.x, data.combo_idx, data.y);
  metrics["empirical_value"] =
      ev.defined ? Json{{"defined", true}, {"value", ev.value}, {"matched", ev.matched}}
                 : Json{{"defined", false}, {"value", "undefined"},
                        {"matched", ev.matched}};

  const std::string sidecar = sidecar_path(dataset_csv);
  if (fs::exists(sidecar)) {
    const Json truth = load_json(sidecar);
    SimSetting setting = make_setting(truth.at("setting").get<int>());
    setting.noise_sd = truth.at("noise_sd").get<double>();
    const Policy oracle = make_oracle_policy(setting);
    metrics["accuracy"] = accuracy(policy, oracle, data.x);
    const std::uint64_t mc_seed = mix_seed(config.seed, 0xe7a1);
    Rng rng(mc_seed);
    const Mat draws = gen_covariates(config.eval_mc_draws, setting.p, rng);
    metrics["true_value"] = mc_value_json(true_value_on(policy, setting, draws));
    metrics["oracle_true_value"] =
        mc_value_json(true_value_on(oracle, setting, draws));
    metrics["mc_seed"] = mc_seed;
  }

  save_json(bundle_dir + "/metrics.json", metrics);
  return metrics;
}

Json run_allocate(const ExperimentConfig& config, const std::string& bundle_dir,
                  const std::string& dataset_csv, const std::string& delta_csv,
                  const std::string& out_dir) {
  if (config.budget.budgets.empty()) {
    throw ConfigError("allocate requires config.budget.budgets");
  }
  ensure_dir(out_dir);

  Mat delta;
  TreatmentSpace space;
  bool have_space = false;
  if (!delta_csv.empty()) {
    delta = read_matrix_csv(delta_csv);
    if (config.treatments) {
      space = *config.treatments;
      have_space = true;
    } else if (config.setting != 0) {
      space = make_setting(config.setting).space;
      have_space = true;
    }
    if (have_space && space.size() != delta.cols) {
      throw DataError("delta CSV columns do not match the treatment space");
    }
  } else {
    if (bundle_dir.empty() || dataset_csv.empty()) {
      throw ConfigError("allocate needs a bundle and dataset, or a delta CSV");
    }
    const DemModel model = model_from_json(load_json(bundle_dir + "/model.json"));
    const Dataset data = read_dataset_csv(dataset_csv, &model.space);
    delta = delta_matrix(model, data.x);
    space = model.space;
    have_space = true;
  }

  // Combination costs from per-treatment costs when the space is known;
  // otherwise the cost vector must already be per combination.
  Vec costs;
  if (have_space) {
    if (static_cast<int>(config.budget.treatment_costs.size()) != space.k()) {
      throw ConfigError("budget.treatment_costs must have length K=" +
                        std::to_string(space.k()));
    }
    costs = combo_costs(CostVector{config.budget.treatment_costs}, space);
    if (!space.has_null_combo()) {
      std::fprintf(stderr,
                   "warning: admissible set has no all-zero combination; "
                   "low budgets may be infeasible\n");
    }
  } else {
    if (static_cast<int>(config.budget.treatment_costs.size()) != delta.cols) {
      throw ConfigError(
          "without a treatment space, budget.treatment_costs must give one "
          "cost per delta column");
    }
    costs = config.budget.treatment_costs;
  }

  Json sweep = Json::array();
  std::vector<std::string> files;
  Mat table(static_cast<int>(config.budget.budgets.size()), 3);
  for (std::size_t bi = 0; bi < config.budget.budgets.size(); ++bi) {
    const double budget = config.budget.budgets[bi];
    KnapsackInstance inst{delta, costs, budget, config.budget.grid_step};
    const AssignmentMatrix assignment = solve_mckp(inst);

    char name[64];
    std::snprintf(name, sizeof(name), "assignment_budget_%03zu.csv", bi);
    {
      std::ofstream out(out_dir + "/" + name);
      if (!out) throw IoError("cannot write assignment file");
      out << "subject,combo_index" << (have_space ? ",bitmask" : "") << "\n";
      for (std::size_t i = 0; i < assignment.choice.size(); ++i) {
        out << i << "," << assignment.choice[i];
        if (have_space) out << "," << space.mask(assignment.choice[i]);
        out << "\n";
      }
    }
    files.push_back(name);
    sweep.push_back(Json{{"budget", budget},
                         {"objective", assignment.objective},
                         {"average_cost", assignment.average_cost}});
    table(static_cast<int>(bi), 0) = budget;
    table(static_cast<int>(bi), 1) = assignment.objective;
    table(static_cast<int>(bi), 2) = assignment.average_cost;
  }
  write_matrix_csv(out_dir + "/value_vs_budget.csv", table,
                   {"budget", "objective", "average_cost"});
  files.push_back("value_vs_budget.csv");

  Json result{{"format", "dem-allocation"}, {"sweep", sweep}};
  save_json(out_dir + "/allocation.json", result);
  files.push_back("allocation.json");
  save_json(out_dir + "/manifest.json",
            run_manifest("allocate", config, files));
  return result;
}

Json run_sweep(const ExperimentConfig& config, const std::string& out_dir) {
  if (config.setting == 0) {
    throw ConfigError("sweep requires config.setting in 1..4");
  }
  ensure_dir(out_dir);
  const std::vector<std::string> datasets = run_simulate(config, out_dir);

  std::vector<std::string> metrics_files;
  for (int rep = 0; rep < config.replicates; ++rep) {
    ExperimentConfig rep_config = config;
    rep_config.fit.seed = mix_seed(config.seed, 1000 + rep);
    const std::string bundle = out_dir + "/" + rep_dir_name(rep) + "/bundle";
    run_fit(rep_config, datasets[rep], bundle);
    run_evaluate(rep_config, bundle, datasets[rep]);
    metrics_files.push_back(bundle + "/metrics.json");
  }
  return run_report(metrics_files, out_dir + "/aggregate.json");
}

Json run_report(const std::vector<std::string>& metrics_files,
                const std::string& out_file) {
  if (metrics_files.empty()) throw ConfigError("report: no metrics files given");
  Vec emp, acc, tval, oval;
  int undefined_emp = 0;
  for (const std::string& path : metrics_files) {
    const Json m = load_json(path);
    const Json& e = m.at("empirical_value");
    if (e.at("defined").get<bool>()) {
      emp.push_back(json_number(e, "value"));
    } else {
      ++undefined_emp;
    }
    if (m.contains("accuracy")) acc.push_back(m.at("accuracy").get<double>());
    if (m.contains("true_value")) {
      tval.push_back(json_number(m.at("true_value"), "value"));
    }
    if (m.contains("oracle_true_value")) {
      oval.push_back(json_number(m.at("oracle_true_value"), "value"));
    }
  }

  auto block = [](const MeanSd& s) {
    return Json{{"mean", s.mean}, {"sd", s.sd}, {"replicates", s.count}};
  };
  Json report{{"format", "dem-report"},
              {"replicates", metrics_files.size()},
              {"empirical_value", block(mean_sd(emp))},
              {"undefined_empirical_values", undefined_emp}};
  if (!acc.empty()) report["accuracy"] = block(mean_sd(acc));
  if (!tval.empty()) report["true_value"] = block(mean_sd(tval));
  if (!oval.empty()) report["oracle_true_value"] = block(mean_sd(oval));
  save_json(out_file, report);

  // Aligned text companion.
  const std::string txt_path =
      fs::path(out_file).replace_extension(".txt").string();
  std::ofstream txt(txt_path);
  if (!txt) throw IoError("cannot write " + txt_path);
  char line[128];
  std::snprintf(line, sizeof(line), "%-22s %12s %12s %6s\n", "metric", "mean",
                "sd", "n");
  txt << line;
  auto emit = [&](const char* name, const MeanSd& s) {
    if (s.count == 0) return;
    std::snprintf(line, sizeof(line), "%-22s %12.4f %12.4f %6d\n", name, s.mean,
                  s.sd, s.count);
    txt << line;
  };
  emit("empirical_value", mean_sd(emp));
  emit("accuracy", mean_sd(acc));
  emit("true_value", mean_sd(tval));
  emit("oracle_true_value", mean_sd(oval));
  return report;
}

}  // namespace dem::runner
