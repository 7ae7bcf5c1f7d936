#include "dem/serialize.hpp"

#include <fstream>

#include "dem/errors.hpp"

namespace dem {

namespace {

Json mat_to_json(const Mat& m) {
  return Json{{"rows", m.rows}, {"cols", m.cols}, {"data", m.data}};
}

Mat mat_from_json(const Json& j) {
  Mat m(j.at("rows").get<int>(), j.at("cols").get<int>());
  const auto data = j.at("data").get<std::vector<double>>();
  if (data.size() != m.data.size()) throw DataError("matrix payload size mismatch");
  m.data = data;
  return m;
}

std::string cov_kind_name(CovariateEncoder::Kind k) {
  switch (k) {
    case CovariateEncoder::Kind::Network: return "network";
    case CovariateEncoder::Kind::Polynomial: return "polynomial";
    case CovariateEncoder::Kind::BSpline: return "bspline";
  }
  return "network";
}

CovariateEncoder::Kind cov_kind_parse(const std::string& s) {
  if (s == "network") return CovariateEncoder::Kind::Network;
  if (s == "polynomial") return CovariateEncoder::Kind::Polynomial;
  if (s == "bspline") return CovariateEncoder::Kind::BSpline;
  throw DataError("unknown covariate encoder kind '" + s + "'");
}

std::string trt_kind_name(TreatmentEncoder::Kind k) {
  return k == TreatmentEncoder::Kind::Network ? "network" : "dictionary";
}

TreatmentEncoder::Kind trt_kind_parse(const std::string& s) {
  if (s == "network") return TreatmentEncoder::Kind::Network;
  if (s == "dictionary") return TreatmentEncoder::Kind::Dictionary;
  throw DataError("unknown treatment encoder kind '" + s + "'");
}

}  // namespace

Json net_to_json(const DenseNet& net) {
  Json layers = Json::array();
  for (int l = 0; l < net.depth(); ++l) {
    layers.push_back(Json{{"weight", mat_to_json(net.weight(l))},
                          {"bias", net.bias(l)}});
  }
  return Json{{"widths", net.widths()}, {"layers", layers}};
}

DenseNet net_from_json(const Json& j) {
  DenseNet net(j.at("widths").get<std::vector<int>>());
  const Json& layers = j.at("layers");
  if (static_cast<int>(layers.size()) != net.depth()) {
    throw DataError("network layer count mismatch");
  }
  for (int l = 0; l < net.depth(); ++l) {
    Mat w = mat_from_json(layers[l].at("weight"));
    if (w.rows != net.weight(l).rows || w.cols != net.weight(l).cols) {
      throw DataError("network layer " + std::to_string(l + 1) + " shape mismatch");
    }
    net.weight(l) = std::move(w);
    const auto b = layers[l].at("bias").get<Vec>();
    if (b.size() != net.bias(l).size()) {
      throw DataError("network layer " + std::to_string(l + 1) + " bias mismatch");
    }
    net.bias(l) = b;
  }
  return net;
}

Json space_to_json(const TreatmentSpace& space) {
  return Json{{"k", space.k()}, {"combos", space.masks()}};
}

TreatmentSpace space_from_json(const Json& j) {
  return TreatmentSpace(j.at("k").get<int>(),
                        j.at("combos").get<std::vector<std::uint32_t>>());
}

Json model_to_json(const DemModel& model) {
  Json alpha{{"kind", cov_kind_name(model.alpha.kind)},
             {"input_dim", model.alpha.input_dim}};
  if (model.alpha.kind == CovariateEncoder::Kind::Polynomial) {
    alpha["degree"] = model.alpha.degree;
  } else if (model.alpha.kind == CovariateEncoder::Kind::BSpline) {
    alpha["spline_degree"] = model.alpha.basis.degree();
    alpha["knots"] = model.alpha.basis.knots();
  }
  alpha["net"] = net_to_json(model.alpha.net);

  Json beta{{"kind", trt_kind_name(model.beta.kind)},
            {"mask",
             model.beta.mask == TreatmentEncoder::MaskRule::PairsAndAbove
                 ? "pairs_and_above"
                 : "none"},
            {"additive", mat_to_json(model.beta.additive)},
            {"centering", model.beta.centering}};
  if (model.beta.kind == TreatmentEncoder::Kind::Dictionary) {
    beta["dictionary"] = mat_to_json(model.beta.dictionary);
  } else {
    beta["net"] = net_to_json(model.beta.net);
  }

  return Json{{"format", "dem-model"},
              {"version", 1},
              {"artifact_version", kArtifactVersion},
              {"latent_dim", model.latent_dim},
              {"fitted", model.fitted},
              {"treatment_space", space_to_json(model.space)},
              {"covariate_encoder", alpha},
              {"treatment_encoder", beta}};
}

DemModel model_from_json(const Json& j) {
  if (j.value("format", "") != "dem-model") {
    throw DataError("not a model document");
  }
  if (j.at("version").get<int>() != 1) {
    throw DataError("unsupported model document version");
  }
  DemModel model;
  model.latent_dim = j.at("latent_dim").get<int>();
  model.fitted = j.at("fitted").get<bool>();
  model.space = space_from_json(j.at("treatment_space"));

  const Json& alpha = j.at("covariate_encoder");
  model.alpha.kind = cov_kind_parse(alpha.at("kind").get<std::string>());
  model.alpha.input_dim = alpha.at("input_dim").get<int>();
  if (model.alpha.kind == CovariateEncoder::Kind::Polynomial) {
    model.alpha.degree = alpha.at("degree").get<int>();
  } else if (model.alpha.kind == CovariateEncoder::Kind::BSpline) {
    const auto knots = alpha.at("knots").get<Vec>();
    const int deg = alpha.at("spline_degree").get<int>();
    // Recover the breakpoints from the clamped knot vector.
    Vec breakpoints(knots.begin() + deg, knots.end() - deg);
    model.alpha.basis = BSplineBasis(std::move(breakpoints), deg);
  }
  model.alpha.net = net_from_json(alpha.at("net"));

  const Json& beta = j.at("treatment_encoder");
  model.beta.kind = trt_kind_parse(beta.at("kind").get<std::string>());
  model.beta.mask = beta.at("mask").get<std::string>() == "none"
                        ? TreatmentEncoder::MaskRule::None
                        : TreatmentEncoder::MaskRule::PairsAndAbove;
  model.beta.additive = mat_from_json(beta.at("additive"));
  model.beta.centering = beta.at("centering").get<Vec>();
  if (model.beta.kind == TreatmentEncoder::Kind::Dictionary) {
    model.beta.dictionary = mat_from_json(beta.at("dictionary"));
  } else {
    model.beta.net = net_from_json(beta.at("net"));
    model.beta.dictionary = Mat(model.latent_dim, model.space.size());
  }
  return model;
}

Json propensity_to_json(const PropensityModel& model) {
  return Json{{"gamma", mat_to_json(model.gamma)},
              {"intercept", model.intercept},
              {"frequencies", model.frequencies},
              {"p_min", model.p_min},
              {"w_max", model.w_max},
              {"treatment_space", space_to_json(model.space)}};
}

PropensityModel propensity_from_json(const Json& j) {
  PropensityModel model;
  model.gamma = mat_from_json(j.at("gamma"));
  model.intercept = j.at("intercept").get<Vec>();
  model.frequencies = j.at("frequencies").get<Vec>();
  model.p_min = j.at("p_min").get<double>();
  model.w_max = j.at("w_max").get<double>();
  model.space = space_from_json(j.at("treatment_space"));
  return model;
}

Json treatment_free_to_json(const TreatmentFreeModel& model) {
  return Json{{"net", net_to_json(model.net)}};
}

TreatmentFreeModel treatment_free_from_json(const Json& j) {
  return TreatmentFreeModel{net_from_json(j.at("net"))};
}

Json hyperparams_to_json(const HyperParams& hp) {
  return Json{{"latent_dim", hp.latent_dim},
              {"covariate_encoder", cov_kind_name(hp.cov_kind)},
              {"depth_alpha", hp.depth_alpha},
              {"width_alpha", hp.width_alpha},
              {"poly_degree", hp.poly_degree},
              {"spline_interior_knots", hp.spline_interior_knots},
              {"spline_degree", hp.spline_degree},
              {"treatment_encoder", trt_kind_name(hp.trt_kind)},
              {"depth_beta", hp.depth_beta},
              {"width_beta", hp.width_beta},
              {"additive_only", hp.additive_only},
              {"lambda_additive", hp.lambda_additive},
              {"lambda_interactive", hp.lambda_interactive},
              {"batch_size", hp.batch_size},
              {"learning_rate", hp.learning_rate},
              {"lr_decay", hp.lr_decay},
              {"epochs", hp.epochs},
              {"inner_steps", hp.inner_steps},
              {"adam_beta1", hp.adam_beta1},
              {"adam_beta2", hp.adam_beta2},
              {"adam_eps", hp.adam_eps},
              {"seed", hp.seed}};
}

HyperParams hyperparams_from_json(const Json& j) {
  HyperParams hp;
  hp.latent_dim = j.at("latent_dim").get<int>();
  hp.cov_kind = cov_kind_parse(j.at("covariate_encoder").get<std::string>());
  hp.depth_alpha = j.at("depth_alpha").get<int>();
  hp.width_alpha = j.at("width_alpha").get<int>();
  hp.poly_degree = j.at("poly_degree").get<int>();
  hp.spline_interior_knots = j.at("spline_interior_knots").get<int>();
  hp.spline_degree = j.at("spline_degree").get<int>();
  hp.trt_kind = trt_kind_parse(j.at("treatment_encoder").get<std::string>());
  hp.depth_beta = j.at("depth_beta").get<int>();
  hp.width_beta = j.at("width_beta").get<int>();
  hp.additive_only = j.at("additive_only").get<bool>();
  hp.lambda_additive = j.at("lambda_additive").get<double>();
  hp.lambda_interactive = j.at("lambda_interactive").get<double>();
  hp.batch_size = j.at("batch_size").get<int>();
  hp.learning_rate = j.at("learning_rate").get<double>();
  hp.lr_decay = j.at("lr_decay").get<double>();
  hp.epochs = j.at("epochs").get<int>();
  hp.inner_steps = j.at("inner_steps").get<int>();
  hp.adam_beta1 = j.at("adam_beta1").get<double>();
  hp.adam_beta2 = j.at("adam_beta2").get<double>();
  hp.adam_eps = j.at("adam_eps").get<double>();
  hp.seed = j.at("seed").get<std::uint64_t>();
  return hp;
}

void save_json(const std::string& path, const Json& j) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path);
  out << j.dump(2) << "\n";
  if (!out) throw IoError("failed while writing " + path);
}

Json load_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read " + path);
  try {
    return Json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw DataError(path + ": invalid JSON: " + e.what());
  }
}

std::string json_hash(const Json& j) {
  const std::string dump = j.dump();
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : dump) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  char buf[19];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace dem
