#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "longmix/data.hpp"
#include "longmix/prior.hpp"

namespace longmix {

// Model configuration file: the marker specifications plus optional prior
// hyperparameter overrides.
//
// {
//   "markers": [
//     {"name": "lbili", "family": "gaussian",
//      "fixed": [], "random": ["intercept", "time"]},
//     ...
//   ],
//   "prior": {"delta": 1.0, "zeta": 6.0, ...}            (optional)
// }
struct ModelConfig {
  std::vector<MarkerSpec> markers;
  PriorOverrides prior;
};

ModelConfig parse_model_config(const nlohmann::json& j);
ModelConfig load_model_config(const std::string& path);
nlohmann::json model_config_to_json(const ModelConfig& config);

}  // namespace longmix
