#include "longmix/model_config.hpp"

#include <fstream>

namespace longmix {

namespace {

Eigen::VectorXd vector_from_json(const nlohmann::json& j,
                                 const std::string& what) {
  if (!j.is_array()) throw ValidationError(what + " must be an array");
  Eigen::VectorXd out(j.size());
  for (std::size_t t = 0; t < j.size(); ++t) {
    if (!j[t].is_number()) throw ValidationError(what + " must be numeric");
    out[t] = j[t].get<double>();
  }
  return out;
}

}  // namespace

ModelConfig parse_model_config(const nlohmann::json& j) {
  if (!j.is_object() || !j.contains("markers")) {
    throw ValidationError("model config: missing 'markers'");
  }
  const nlohmann::json& markers = j.at("markers");
  if (!markers.is_array() || markers.empty()) {
    throw ValidationError("model config: 'markers' must be a non-empty array");
  }
  ModelConfig out;
  for (const nlohmann::json& m : markers) {
    MarkerSpec spec;
    if (!m.contains("name") || !m.at("name").is_string()) {
      throw ValidationError("model config: marker without a string 'name'");
    }
    spec.name = m.at("name").get<std::string>();
    if (!m.contains("family")) {
      throw ValidationError("model config: marker '" + spec.name +
                            "' without 'family'");
    }
    spec.family = family_from_string(m.at("family").get<std::string>());
    if (m.contains("fixed")) {
      for (const nlohmann::json& c : m.at("fixed")) {
        spec.fixed.push_back(Covariate::parse(c.get<std::string>()));
      }
    }
    if (!m.contains("random") || !m.at("random").is_array() ||
        m.at("random").empty()) {
      throw ValidationError("model config: marker '" + spec.name +
                            "' needs a non-empty 'random' list");
    }
    for (const nlohmann::json& c : m.at("random")) {
      spec.random.push_back(Covariate::parse(c.get<std::string>()));
    }
    out.markers.push_back(std::move(spec));
  }

  if (j.contains("prior")) {
    const nlohmann::json& p = j.at("prior");
    if (!p.is_object()) {
      throw ValidationError("model config: 'prior' must be an object");
    }
    for (auto it = p.begin(); it != p.end(); ++it) {
      const std::string& key = it.key();
      if (key == "delta") out.prior.delta = it->get<double>();
      else if (key == "xi") out.prior.xi = vector_from_json(*it, "prior.xi");
      else if (key == "c_diag") out.prior.c_diag = vector_from_json(*it, "prior.c_diag");
      else if (key == "zeta") out.prior.zeta = it->get<double>();
      else if (key == "g_shape") out.prior.g_shape = it->get<double>();
      else if (key == "h_rate") out.prior.h_rate = vector_from_json(*it, "prior.h_rate");
      else if (key == "alpha_var") out.prior.alpha_var = it->get<double>();
      else if (key == "phi_shape") out.prior.phi_shape = it->get<double>();
      else if (key == "phi_rate") out.prior.phi_rate = it->get<double>();
      else throw ValidationError("model config: unknown prior field '" + key + "'");
    }
  }
  return out;
}

ModelConfig load_model_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open model config '" + path + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError("model config '" + path + "': " + e.what());
  }
  return parse_model_config(j);
}

nlohmann::json model_config_to_json(const ModelConfig& config) {
  nlohmann::json markers = nlohmann::json::array();
  for (const MarkerSpec& m : config.markers) {
    nlohmann::json fixed = nlohmann::json::array();
    for (const Covariate& c : m.fixed) fixed.push_back(c.name());
    nlohmann::json random = nlohmann::json::array();
    for (const Covariate& c : m.random) random.push_back(c.name());
    markers.push_back({{"name", m.name},
                       {"family", family_to_string(m.family)},
                       {"fixed", fixed},
                       {"random", random}});
  }
  nlohmann::json out{{"markers", markers}};
  nlohmann::json prior = nlohmann::json::object();
  const PriorOverrides& p = config.prior;
  auto vec = [](const Eigen::VectorXd& v) {
    nlohmann::json a = nlohmann::json::array();
    for (int t = 0; t < v.size(); ++t) a.push_back(v[t]);
    return a;
  };
  if (p.delta) prior["delta"] = *p.delta;
  if (p.xi) prior["xi"] = vec(*p.xi);
  if (p.c_diag) prior["c_diag"] = vec(*p.c_diag);
  if (p.zeta) prior["zeta"] = *p.zeta;
  if (p.g_shape) prior["g_shape"] = *p.g_shape;
  if (p.h_rate) prior["h_rate"] = vec(*p.h_rate);
  if (p.alpha_var) prior["alpha_var"] = *p.alpha_var;
  if (p.phi_shape) prior["phi_shape"] = *p.phi_shape;
  if (p.phi_rate) prior["phi_rate"] = *p.phi_rate;
  if (!prior.empty()) out["prior"] = prior;
  return out;
}

}  // namespace longmix
