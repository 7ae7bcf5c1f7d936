#pragma once

#include <string>

#include "json.hpp"

#include "dem/encoders.hpp"
#include "dem/nuisance.hpp"
#include "dem/training.hpp"

namespace dem {

using Json = nlohmann::ordered_json;

inline constexpr const char* kArtifactVersion = "0.1.0";

Json net_to_json(const DenseNet& net);
DenseNet net_from_json(const Json& j);

Json space_to_json(const TreatmentSpace& space);
TreatmentSpace space_from_json(const Json& j);

// Versioned model document: encoder configs, weights and the treatment space.
Json model_to_json(const DemModel& model);
DemModel model_from_json(const Json& j);

Json propensity_to_json(const PropensityModel& model);
PropensityModel propensity_from_json(const Json& j);

Json treatment_free_to_json(const TreatmentFreeModel& model);
TreatmentFreeModel treatment_free_from_json(const Json& j);

Json hyperparams_to_json(const HyperParams& hp);
HyperParams hyperparams_from_json(const Json& j);

void save_json(const std::string& path, const Json& j);
Json load_json(const std::string& path);

// FNV-1a hash of the canonical dump; identifies a config in run manifests.
std::string json_hash(const Json& j);

}  // namespace dem
