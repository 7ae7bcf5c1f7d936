#include "dem/config.hpp"

#include <set>

#include "dem/errors.hpp"

namespace dem {

namespace {

// Accessor that records which keys were read and rejects leftovers.
class StrictObject {
public:
  StrictObject(const Json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(path_ + " must be an object");
  }

  const Json* get(const std::string& key) {
    seen_.insert(key);
    auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }

  template <typename T>
  void read(const std::string& key, T& target) {
    if (const Json* v = get(key)) {
      try {
        target = v->get<T>();
      } catch (const nlohmann::json::exception&) {
        throw ConfigError(path_ + "." + key + " has the wrong type");
      }
    }
  }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it) {
      if (seen_.count(it.key()) == 0) {
        throw ConfigError("unknown key '" + it.key() + "' in " + path_);
      }
    }
  }

  const std::string& path() const { return path_; }

private:
  const Json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

CovariateEncoder::Kind parse_cov_kind(const std::string& s, const std::string& at) {
  if (s == "network") return CovariateEncoder::Kind::Network;
  if (s == "polynomial") return CovariateEncoder::Kind::Polynomial;
  if (s == "bspline") return CovariateEncoder::Kind::BSpline;
  throw ConfigError(at + ": unknown covariate encoder '" + s + "'");
}

TreatmentEncoder::Kind parse_trt_kind(const std::string& s, const std::string& at) {
  if (s == "network") return TreatmentEncoder::Kind::Network;
  if (s == "dictionary") return TreatmentEncoder::Kind::Dictionary;
  throw ConfigError(at + ": unknown treatment encoder '" + s + "'");
}

HyperParams parse_fit(const Json& j, const std::string& path) {
  StrictObject o(j, path);
  HyperParams hp;
  o.read("latent_dim", hp.latent_dim);
  if (const Json* v = o.get("covariate_encoder")) {
    hp.cov_kind = parse_cov_kind(v->get<std::string>(), path);
  }
  o.read("depth_alpha", hp.depth_alpha);
  o.read("width_alpha", hp.width_alpha);
  o.read("poly_degree", hp.poly_degree);
  o.read("spline_interior_knots", hp.spline_interior_knots);
  o.read("spline_degree", hp.spline_degree);
  if (const Json* v = o.get("treatment_encoder")) {
    hp.trt_kind = parse_trt_kind(v->get<std::string>(), path);
  }
  o.read("depth_beta", hp.depth_beta);
  o.read("width_beta", hp.width_beta);
  o.read("additive_only", hp.additive_only);
  o.read("lambda_additive", hp.lambda_additive);
  o.read("lambda_interactive", hp.lambda_interactive);
  o.read("batch_size", hp.batch_size);
  o.read("learning_rate", hp.learning_rate);
  o.read("lr_decay", hp.lr_decay);
  o.read("epochs", hp.epochs);
  o.read("inner_steps", hp.inner_steps);
  o.read("adam_beta1", hp.adam_beta1);
  o.read("adam_beta2", hp.adam_beta2);
  o.read("adam_eps", hp.adam_eps);
  o.read("seed", hp.seed);
  o.finish();
  return hp;
}

SearchSpace parse_search_space(const Json& j, const std::string& path) {
  StrictObject o(j, path);
  SearchSpace s;
  o.read("latent_dims", s.latent_dims);
  o.read("depths_alpha", s.depths_alpha);
  o.read("widths_alpha", s.widths_alpha);
  o.read("depths_beta", s.depths_beta);
  o.read("widths_beta", s.widths_beta);
  o.read("lambdas_additive", s.lambdas_additive);
  o.read("lambdas_interactive", s.lambdas_interactive);
  o.read("batch_sizes", s.batch_sizes);
  o.read("learning_rates", s.learning_rates);
  o.read("epochs", s.epoch_choices);
  if (const Json* v = o.get("covariate_encoders")) {
    for (const auto& e : *v) {
      s.cov_kinds.push_back(parse_cov_kind(e.get<std::string>(), path));
    }
  }
  if (const Json* v = o.get("treatment_encoders")) {
    for (const auto& e : *v) {
      s.trt_kinds.push_back(parse_trt_kind(e.get<std::string>(), path));
    }
  }
  o.read("additive_only", s.additive_only_choices);
  o.finish();
  return s;
}

}  // namespace

ExperimentConfig config_from_json(const Json& j) {
  StrictObject o(j, "config");
  ExperimentConfig c;

  o.read("setting", c.setting);
  o.read("dataset", c.dataset_path);
  if (c.setting == 0 && c.dataset_path.empty()) {
    throw ConfigError("config needs either 'setting' (1..4) or 'dataset'");
  }
  if (c.setting != 0 && (c.setting < 1 || c.setting > 4)) {
    throw ConfigError("config.setting must be 1..4");
  }
  if (const Json* v = o.get("treatments")) {
    StrictObject t(*v, "config.treatments");
    int k = 0;
    std::vector<std::uint32_t> combos;
    t.read("k", k);
    t.read("combos", combos);
    t.finish();
    c.treatments = TreatmentSpace(k, combos);
  }

  o.read("n", c.n);
  o.read("replicates", c.replicates);
  o.read("seed", c.seed);
  if (const Json* v = o.get("scheme")) {
    const std::string s = v->get<std::string>();
    if (s == "uniform") c.scheme = AssignScheme::Uniform;
    else if (s == "propensity") c.scheme = AssignScheme::Propensity;
    else throw ConfigError("config.scheme must be 'uniform' or 'propensity'");
  }
  o.read("noise_sd", c.noise_sd);
  if (c.n < 1) throw ConfigError("config.n must be >= 1");
  if (c.replicates < 1) throw ConfigError("config.replicates must be >= 1");
  if (c.noise_sd < 0.0) throw ConfigError("config.noise_sd must be >= 0");

  if (const Json* v = o.get("nuisance")) {
    StrictObject nu(*v, "config.nuisance");
    nu.read("use_true_propensity", c.nuisance.use_true_propensity);
    nu.read("propensity_lambda", c.nuisance.propensity_lambda);
    nu.read("treatment_free_hidden", c.nuisance.treatment_free.hidden);
    nu.read("treatment_free_epochs", c.nuisance.treatment_free.epochs);
    nu.read("treatment_free_batch_size", c.nuisance.treatment_free.batch_size);
    nu.read("treatment_free_learning_rate",
            c.nuisance.treatment_free.learning_rate);
    nu.finish();
  }

  if (const Json* v = o.get("fit")) c.fit = parse_fit(*v, "config.fit");

  if (const Json* v = o.get("search")) {
    StrictObject s(*v, "config.search");
    c.search.enabled = true;
    s.read("draws", c.search.draws);
    s.read("validation_fraction", c.search.validation_fraction);
    if (const Json* sp = s.get("space")) {
      c.search.space = parse_search_space(*sp, "config.search.space");
    }
    s.finish();
    if (c.search.draws < 1) throw ConfigError("config.search.draws must be >= 1");
    if (!(c.search.validation_fraction > 0.0 &&
          c.search.validation_fraction < 1.0)) {
      throw ConfigError("config.search.validation_fraction must be in (0, 1)");
    }
  }

  if (const Json* v = o.get("budget")) {
    StrictObject b(*v, "config.budget");
    b.read("treatment_costs", c.budget.treatment_costs);
    b.read("budgets", c.budget.budgets);
    b.read("grid_step", c.budget.grid_step);
    b.finish();
    for (double cost : c.budget.treatment_costs) {
      if (cost < 0.0) throw ConfigError("config.budget costs must be >= 0");
    }
  }

  o.read("eval_mc_draws", c.eval_mc_draws);
  if (c.eval_mc_draws < 2) throw ConfigError("config.eval_mc_draws must be >= 2");
  o.read("out", c.out_dir);

  o.finish();
  return c;
}

Json config_to_json(const ExperimentConfig& c) {
  Json j;
  if (c.setting != 0) j["setting"] = c.setting;
  if (!c.dataset_path.empty()) j["dataset"] = c.dataset_path;
  if (c.treatments) {
    j["treatments"] = Json{{"k", c.treatments->k()}, {"combos", c.treatments->masks()}};
  }
  j["n"] = c.n;
  j["replicates"] = c.replicates;
  j["seed"] = c.seed;
  j["scheme"] = c.scheme == AssignScheme::Uniform ? "uniform" : "propensity";
  j["noise_sd"] = c.noise_sd;
  j["nuisance"] = Json{
      {"use_true_propensity", c.nuisance.use_true_propensity},
      {"propensity_lambda", c.nuisance.propensity_lambda},
      {"treatment_free_hidden", c.nuisance.treatment_free.hidden},
      {"treatment_free_epochs", c.nuisance.treatment_free.epochs},
      {"treatment_free_batch_size", c.nuisance.treatment_free.batch_size},
      {"treatment_free_learning_rate", c.nuisance.treatment_free.learning_rate}};
  j["fit"] = hyperparams_to_json(c.fit);
  if (c.search.enabled) {
    j["search"] = Json{{"draws", c.search.draws},
                       {"validation_fraction", c.search.validation_fraction}};
  }
  if (!c.budget.treatment_costs.empty() || !c.budget.budgets.empty()) {
    j["budget"] = Json{{"treatment_costs", c.budget.treatment_costs},
                       {"budgets", c.budget.budgets},
                       {"grid_step", c.budget.grid_step}};
  }
  j["eval_mc_draws"] = c.eval_mc_draws;
  j["out"] = c.out_dir;
  return j;
}

ExperimentConfig load_config(const std::string& path) {
  return config_from_json(load_json(path));
}

Json config_schema() {
  // Published schema mirroring config_from_json's checks.
  const Json num{{"type", "number"}};
  const Json integer{{"type", "integer"}};
  const Json num_array{{"type", "array"}, {"items", num}};
  const Json int_array{{"type", "array"}, {"items", integer}};

  Json fit_props{
      {"latent_dim", integer},
      {"covariate_encoder",
       {{"enum", {"network", "polynomial", "bspline"}}}},
      {"depth_alpha", integer},
      {"width_alpha", integer},
      {"poly_degree", integer},
      {"spline_interior_knots", integer},
      {"spline_degree", integer},
      {"treatment_encoder", {{"enum", {"network", "dictionary"}}}},
      {"depth_beta", integer},
      {"width_beta", integer},
      {"additive_only", {{"type", "boolean"}}},
      {"lambda_additive", num},
      {"lambda_interactive", num},
      {"batch_size", integer},
      {"learning_rate", num},
      {"lr_decay", num},
      {"epochs", integer},
      {"inner_steps", integer},
      {"adam_beta1", num},
      {"adam_beta2", num},
      {"adam_eps", num},
      {"seed", integer}};

  Json search_space_props{{"latent_dims", int_array},
                          {"depths_alpha", int_array},
                          {"widths_alpha", int_array},
                          {"depths_beta", int_array},
                          {"widths_beta", int_array},
                          {"lambdas_additive", num_array},
                          {"lambdas_interactive", num_array},
                          {"batch_sizes", int_array},
                          {"learning_rates", num_array},
                          {"epochs", int_array},
                          {"covariate_encoders",
                           {{"type", "array"},
                            {"items", {{"enum", {"network", "polynomial", "bspline"}}}}}},
                          {"treatment_encoders",
                           {{"type", "array"},
                            {"items", {{"enum", {"network", "dictionary"}}}}}},
                          {"additive_only",
                           {{"type", "array"}, {"items", {{"type", "boolean"}}}}}};

  return Json{
      {"$schema", "http://json-schema.org/draft-07/schema#"},
      {"title", "ExperimentConfig"},
      {"type", "object"},
      {"additionalProperties", false},
      {"properties",
       {{"setting", {{"type", "integer"}, {"minimum", 1}, {"maximum", 4}}},
        {"dataset", {{"type", "string"}}},
        {"treatments",
         {{"type", "object"},
          {"additionalProperties", false},
          {"properties", {{"k", integer}, {"combos", int_array}}}}},
        {"n", {{"type", "integer"}, {"minimum", 1}}},
        {"replicates", {{"type", "integer"}, {"minimum", 1}}},
        {"seed", integer},
        {"scheme", {{"enum", {"uniform", "propensity"}}}},
        {"noise_sd", {{"type", "number"}, {"minimum", 0}}},
        {"nuisance",
         {{"type", "object"},
          {"additionalProperties", false},
          {"properties",
           {{"use_true_propensity", {{"type", "boolean"}}},
            {"propensity_lambda", num},
            {"treatment_free_hidden", integer},
            {"treatment_free_epochs", integer},
            {"treatment_free_batch_size", integer},
            {"treatment_free_learning_rate", num}}}}},
        {"fit",
         {{"type", "object"},
          {"additionalProperties", false},
          {"properties", fit_props}}},
        {"search",
         {{"type", "object"},
          {"additionalProperties", false},
          {"properties",
           {{"draws", {{"type", "integer"}, {"minimum", 1}}},
            {"validation_fraction",
             {{"type", "number"}, {"exclusiveMinimum", 0}, {"exclusiveMaximum", 1}}},
            {"space",
             {{"type", "object"},
              {"additionalProperties", false},
              {"properties", search_space_props}}}}}}},
        {"budget",
         {{"type", "object"},
          {"additionalProperties", false},
          {"properties",
           {{"treatment_costs", num_array},
            {"budgets", num_array},
            {"grid_step", num}}}}},
        {"eval_mc_draws", {{"type", "integer"}, {"minimum", 2}}},
        {"out", {{"type", "string"}}}}}};
}

}  // namespace dem
