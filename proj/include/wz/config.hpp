#pragma once

// JSON experiment configuration with sections "model", "coefficients" and
// "experiment", the named coefficient registry, and the resolved-config echo.

#include <cmath>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "wz/coefficients.hpp"
#include "wz/experiments.hpp"
#include "wz/levy.hpp"

namespace wz {

using json = nlohmann::ordered_json;

/// Everything a CLI run needs: the experiment plus command-specific knobs.
struct RunConfig {
  ExperimentConfig experiment;
  std::string coefficient_name;
  std::map<std::string, double> coefficient_params;
  std::uint64_t path_index = 0;          // simulate
  std::string observable = "square";     // weak
  double fit_floor = 1e-8;               // 100 x inner-ODE tolerance scale
  double lemma_p = 2.0;                  // levy-check
  std::size_t lemma_paths = 100000;
  std::vector<double> lemma_steps;
};

namespace config_detail {

inline const json& require(const json& obj, const std::string& key, const std::string& path) {
  if (!obj.is_object() || !obj.contains(key)) throw ConfigError(path + "." + key, "missing");
  return obj.at(key);
}

inline double number(const json& v, const std::string& path) {
  if (v.is_string()) {
    const auto s = v.get<std::string>();
    if (s == "inf" || s == "infinity") return std::numeric_limits<double>::infinity();
  }
  if (!v.is_number()) throw ConfigError(path, "expected a number");
  return v.get<double>();
}

inline double number_or(const json& obj, const std::string& key, double fallback, const std::string& path) {
  return obj.contains(key) ? number(obj.at(key), path + "." + key) : fallback;
}

inline Vector vector_from(const json& v, const std::string& path) {
  if (!v.is_array() || v.empty() || v.size() > static_cast<std::size_t>(kMaxDim))
    throw ConfigError(path, "expected a non-empty numeric array of length <= " + std::to_string(kMaxDim));
  Vector out(static_cast<Eigen::Index>(v.size()));
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = number(v[i], path + "[" + std::to_string(i) + "]");
  return out;
}

inline json vector_to(const Vector& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

inline void reject_unknown(const json& obj, const std::set<std::string>& known, const std::string& path) {
  for (auto it = obj.begin(); it != obj.end(); ++it)
    if (!known.count(it.key())) throw ConfigError(path + "." + it.key(), "unknown field");
}

}  // namespace config_detail

/// Builds a registry coefficient set; unspecified parameters take defaults.
inline CoefficientSet make_coefficients(const std::string& name, const std::map<std::string, double>& params) {
  auto get = [&](const std::string& key, double fallback) {
    auto it = params.find(key);
    return it == params.end() ? fallback : it->second;
  };
  std::set<std::string> allowed;
  CoefficientSet cs;
  if (name == "zero") {
    allowed = {"d", "m"};
    cs = coeffs::zero(static_cast<int>(get("d", 1)), static_cast<int>(get("m", 1)));
  } else if (name == "scalar_linear") {
    allowed = {"alpha", "beta", "gamma"};
    cs = coeffs::scalar_linear(get("alpha", 0.5), get("beta", 0.3), get("gamma", 0.4));
  } else if (name == "rotation") {
    allowed = {"omega"};
    cs = coeffs::rotation(get("omega", 1.0));
  } else if (name == "sine_family") {
    allowed = {"alpha", "beta", "gamma"};
    cs = coeffs::sine_family(get("alpha", 0.0), get("beta", 0.0), get("gamma", 1.0));
  } else if (name == "bounded_smooth") {
    allowed = {"a_amp", "b_amp", "c0", "c_amp"};
    cs = coeffs::bounded_smooth(get("a_amp", 1.0), get("b_amp", 0.0), get("c0", 0.5), get("c_amp", 1.0));
  } else if (name == "planar_bounded") {
    allowed = {"a_amp", "sigma", "c0", "c_amp"};
    cs = coeffs::planar_bounded(get("a_amp", 0.5), get("sigma", 1.0), get("c0", 0.5), get("c_amp", 0.5));
  } else if (name == "linear_planar") {
    allowed = {"a_rot", "a_damp", "beta", "gamma"};
    cs = coeffs::linear_planar(get("a_rot", 1.0), get("a_damp", 0.5), get("beta", 0.0), get("gamma", 0.5));
  } else {
    throw ConfigError("coefficients.name", "unknown coefficient family '" + name + "'");
  }
  for (const auto& [k, v] : params)
    if (!allowed.count(k)) throw ConfigError("coefficients.params." + k, "unknown parameter for '" + name + "'");
  if (name == "zero") cs.params = {{"d", cs.d}, {"m", cs.m}};
  return cs;
}

inline JumpDistribution jump_law_from(const json& j, int dim, const std::string& path) {
  using namespace config_detail;
  const std::string kind = require(j, "kind", path).get<std::string>();
  try {
    if (kind == "atoms") {
      reject_unknown(j, {"kind", "atoms", "probs"}, path);
      const json& atoms = require(j, "atoms", path);
      const json& probs = require(j, "probs", path);
      if (!atoms.is_array() || !probs.is_array()) throw ConfigError(path, "atoms and probs must be arrays");
      AtomsLaw law;
      for (std::size_t i = 0; i < atoms.size(); ++i) {
        const json& a = atoms[i];
        law.atoms.push_back(a.is_number() ? make_vector({a.get<double>()})
                                          : vector_from(a, path + ".atoms[" + std::to_string(i) + "]"));
      }
      for (std::size_t i = 0; i < probs.size(); ++i)
        law.probs.push_back(number(probs[i], path + ".probs[" + std::to_string(i) + "]"));
      JumpDistribution dist(std::move(law));
      if (dist.dimension() != dim) throw ConfigError("model.dimension", "does not match the atom dimension");
      return dist;
    }
    if (kind == "uniform_box") {
      reject_unknown(j, {"kind", "half_width"}, path);
      return JumpDistribution(UniformBoxLaw{dim, number_or(j, "half_width", 1.0, path)});
    }
    if (kind == "uniform_annulus") {
      reject_unknown(j, {"kind", "r_inner", "r_outer"}, path);
      return JumpDistribution(
          UniformAnnulusLaw{dim, number_or(j, "r_inner", 0.0, path), number_or(j, "r_outer", 1.0, path)});
    }
    if (kind == "truncated_exponential") {
      reject_unknown(j, {"kind", "rate", "radius"}, path);
      return JumpDistribution(TruncatedExponentialLaw{
          dim, number_or(j, "rate", 1.0, path),
          number_or(j, "radius", std::numeric_limits<double>::infinity(), path)});
    }
  } catch (const DomainError& e) {
    throw ConfigError(path, e.what());
  }
  throw ConfigError(path + ".kind", "unknown jump law '" + kind + "'");
}

inline json jump_law_to(const JumpDistribution& dist) {
  json j;
  j["kind"] = dist.kind();
  std::visit(
      [&j](const auto& l) {
        using L = std::decay_t<decltype(l)>;
        if constexpr (std::is_same_v<L, AtomsLaw>) {
          json atoms = json::array();
          for (const auto& a : l.atoms) atoms.push_back(config_detail::vector_to(a));
          j["atoms"] = atoms;
          j["probs"] = l.probs;
        } else if constexpr (std::is_same_v<L, UniformBoxLaw>) {
          j["half_width"] = l.half_width;
        } else if constexpr (std::is_same_v<L, UniformAnnulusLaw>) {
          j["r_inner"] = l.r_inner;
          j["r_outer"] = l.r_outer;
        } else {
          j["rate"] = l.rate;
          if (std::isfinite(l.radius)) j["radius"] = l.radius;
          else j["radius"] = "inf";
        }
      },
      dist.law());
  return j;
}

inline RunConfig parse_config(const json& root) {
  using namespace config_detail;
  if (!root.is_object()) throw ConfigError("<root>", "expected a JSON object");
  reject_unknown(root, {"model", "coefficients", "experiment"}, "<root>");
  RunConfig rc;
  ExperimentConfig& e = rc.experiment;

  const json& coeff = require(root, "coefficients", "<root>");
  reject_unknown(coeff, {"name", "params"}, "coefficients");
  rc.coefficient_name = require(coeff, "name", "coefficients").get<std::string>();
  if (coeff.contains("params")) {
    const json& params = coeff.at("params");
    if (!params.is_object()) throw ConfigError("coefficients.params", "expected an object");
    for (auto it = params.begin(); it != params.end(); ++it)
      rc.coefficient_params[it.key()] = number(it.value(), "coefficients.params." + it.key());
  }
  e.coeffs = make_coefficients(rc.coefficient_name, rc.coefficient_params);

  const json& model = require(root, "model", "<root>");
  reject_unknown(model, {"lambda", "dimension", "jump_law", "moment_margin"}, "model");
  e.model.intensity = number(require(model, "lambda", "model"), "model.lambda");
  if (!(e.model.intensity >= 0.0) || !std::isfinite(e.model.intensity))
    throw ConfigError("model.lambda", "must be finite and >= 0");
  const int dim = model.contains("dimension") ? model.at("dimension").get<int>() : e.coeffs.m;
  if (dim < 1 || dim > kMaxDim) throw ConfigError("model.dimension", "out of range");
  e.model.jumps = jump_law_from(require(model, "jump_law", "model"), dim, "model.jump_law");
  e.moment_margin = number_or(model, "moment_margin", 0.1, "model");
  if (!(e.moment_margin > 0.0)) throw ConfigError("model.moment_margin", "must be > 0");

  const json& ex = require(root, "experiment", "<root>");
  reject_unknown(ex,
                 {"T", "level", "h", "h_levels", "paths", "x0", "ball_radius", "lattice_spacing", "reference",
                  "rate_epsilon", "p", "seed", "ode", "path_index", "observable", "fit_floor", "lemma_p",
                  "lemma_paths", "lemma_h"},
                 "experiment");
  e.horizon = number_or(ex, "T", 1.0, "experiment");
  e.level = ex.contains("level") ? ex.at("level").get<int>() : 10;
  if (ex.contains("h")) {
    for (const auto& v : ex.at("h")) e.steps.push_back(number(v, "experiment.h"));
  } else if (ex.contains("h_levels")) {
    for (const auto& v : ex.at("h_levels")) e.steps.push_back(std::ldexp(e.horizon, -v.get<int>()));
  } else {
    e.steps.push_back(e.h_min());
  }
  e.paths = ex.contains("paths") ? ex.at("paths").get<std::size_t>() : 1000;
  e.x0 = ex.contains("x0") ? vector_from(ex.at("x0"), "experiment.x0") : zeros(e.coeffs.d);
  e.ball_radius = number_or(ex, "ball_radius", 1.0, "experiment");
  e.lattice_spacing = number_or(ex, "lattice_spacing", 0.1, "experiment");
  try {
    e.reference = reference_kind_from(ex.contains("reference") ? ex.at("reference").get<std::string>() : "none");
  } catch (const DomainError& err) {
    throw ConfigError("experiment.reference", err.what());
  }
  e.rate_epsilon = number_or(ex, "rate_epsilon", 0.1, "experiment");
  e.p = number_or(ex, "p", 1.0, "experiment");
  e.seed = ex.contains("seed") ? ex.at("seed").get<std::uint64_t>() : 1;
  if (ex.contains("ode")) {
    const json& ode = ex.at("ode");
    reject_unknown(ode, {"n_min", "rho", "richardson"}, "experiment.ode");
    e.ode.n_min = ode.contains("n_min") ? ode.at("n_min").get<long>() : e.ode.n_min;
    e.ode.rho = number_or(ode, "rho", e.ode.rho, "experiment.ode");
    e.ode.richardson = ode.contains("richardson") && ode.at("richardson").get<bool>();
    if (e.ode.n_min < 1) throw ConfigError("experiment.ode.n_min", "must be >= 1");
    if (!(e.ode.rho >= 0.0)) throw ConfigError("experiment.ode.rho", "must be >= 0");
  }
  rc.path_index = ex.contains("path_index") ? ex.at("path_index").get<std::uint64_t>() : 0;
  rc.observable = ex.contains("observable") ? ex.at("observable").get<std::string>() : "square";
  rc.fit_floor = number_or(ex, "fit_floor", 1e-8, "experiment");
  rc.lemma_p = number_or(ex, "lemma_p", 2.0, "experiment");
  rc.lemma_paths = ex.contains("lemma_paths") ? ex.at("lemma_paths").get<std::size_t>() : 100000;
  if (ex.contains("lemma_h")) {
    for (const auto& v : ex.at("lemma_h")) rc.lemma_steps.push_back(number(v, "experiment.lemma_h"));
  } else {
    for (int j = 6; j <= 12; ++j) rc.lemma_steps.push_back(std::ldexp(1.0, -j));
  }
  e.validate();
  return rc;
}

inline RunConfig parse_config_text(const std::string& text) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& err) {
    throw ConfigError("<root>", std::string("invalid JSON: ") + err.what());
  }
  try {
    return parse_config(root);
  } catch (const json::exception& err) {
    throw ConfigError("<root>", std::string("type error: ") + err.what());
  }
}

inline RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("--config", "cannot open '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str());
}

/// The fully resolved configuration; parse_config(to_json(rc)) reproduces rc.
/// The thread count is a run parameter and is not part of it.
inline json to_json(const RunConfig& rc) {
  using config_detail::vector_to;
  const ExperimentConfig& e = rc.experiment;
  json root;
  json model;
  model["lambda"] = e.model.intensity;
  model["dimension"] = e.model.dimension();
  model["jump_law"] = jump_law_to(e.model.jumps);
  model["moment_margin"] = e.moment_margin;
  root["model"] = model;
  json coeff;
  coeff["name"] = rc.coefficient_name;
  coeff["params"] = json::object();
  for (const auto& [k, v] : rc.coefficient_params) coeff["params"][k] = v;
  root["coefficients"] = coeff;
  json ex;
  ex["T"] = e.horizon;
  ex["level"] = e.level;
  ex["h"] = e.ladder();
  ex["paths"] = e.paths;
  ex["x0"] = vector_to(e.x0);
  ex["ball_radius"] = e.ball_radius;
  ex["lattice_spacing"] = e.lattice_spacing;
  ex["reference"] = to_string(e.reference);
  ex["rate_epsilon"] = e.rate_epsilon;
  ex["p"] = e.p;
  ex["seed"] = e.seed;
  ex["ode"] = {{"n_min", e.ode.n_min}, {"rho", e.ode.rho}, {"richardson", e.ode.richardson}};
  ex["path_index"] = rc.path_index;
  ex["observable"] = rc.observable;
  ex["fit_floor"] = rc.fit_floor;
  ex["lemma_p"] = rc.lemma_p;
  ex["lemma_paths"] = rc.lemma_paths;
  ex["lemma_h"] = rc.lemma_steps;
  root["experiment"] = ex;
  return root;
}

}  // namespace wz
