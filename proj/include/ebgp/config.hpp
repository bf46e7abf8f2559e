#pragma once

// JSON configuration for estimators and benchmark scenarios. Unknown keys are
// rejected so typos do not silently fall back to defaults.

#include <cstdint>
#include <fstream>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "json.hpp"

#include "ebgp/error.hpp"
#include "ebgp/estimators.hpp"

namespace ebgp {

using Json = nlohmann::json;

struct CircleScenario {
  double radius = 0.25;
  std::size_t D = 2;
};

struct ScenarioConfig {
  std::string generator = "swiss-roll";  // swiss-roll | mixed-union | circle
  double sigma = 0.1;
  std::vector<std::size_t> n_list{100, 200, 400};
  std::size_t repeats = 10;
  std::size_t n_test = 1000;
  std::vector<Method> methods{Method::eb_gp};
  std::uint64_t seed = 0;
  std::size_t threads = 1;
  bool timing = true;  // false: wall_time written as 0 so reports are byte-stable
  CircleScenario circle;
  // Estimator template; noise_variance defaults to sigma^2 of the scenario
  // unless set explicitly (or "infer").
  EstimatorConfig estimator;
  bool noise_variance_set = false;

  void validate() const {
    detail::require(generator == "swiss-roll" || generator == "mixed-union" || generator == "circle",
                    "generator must be swiss-roll, mixed-union or circle");
    detail::require(!methods.empty(), "benchmark needs at least one method");
    detail::require(!n_list.empty(), "benchmark needs at least one n");
    detail::require(repeats >= 1, "repeats must be positive");
    detail::require(sigma >= 0.0, "sigma must be nonnegative");
    detail::require(threads >= 1, "threads must be positive");
  }

  // Per-method estimator settings with the scenario defaults applied.
  EstimatorConfig estimator_for(Method m) const {
    EstimatorConfig c = estimator;
    c.method = m;
    if (!noise_variance_set) c.noise_variance = sigma > 0.0 ? sigma * sigma : 1e-4;
    if (!c.noise_variance && m != Method::eb_gp) c.noise_variance = sigma > 0.0 ? sigma * sigma : 1e-4;
    return c;
  }
};

namespace detail {

inline void check_keys(const Json& j, const std::set<std::string>& allowed, const std::string& where) {
  require<InvalidInput>(j.is_object(), (where + " must be a JSON object").c_str());
  for (const auto& [k, v] : j.items())
    if (!allowed.count(k)) throw InvalidInput("unknown key '" + k + "' in " + where);
}

template <class T>
void read_if(const Json& j, const char* key, T& out) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw InvalidInput(std::string("bad value for '") + key + "': " + e.what());
  }
}

}  // namespace detail

inline void apply_mh_json(const Json& j, MHConfig& mh) {
  detail::check_keys(j,
                     {"n_iter", "burn_in", "proposal_step", "initial_t", "noise_proposal_step", "initial_noise_variance",
                      "noise_lower", "noise_upper"},
                     "mh");
  detail::read_if(j, "n_iter", mh.n_iter);
  detail::read_if(j, "burn_in", mh.burn_in);
  detail::read_if(j, "proposal_step", mh.proposal_step);
  if (j.contains("initial_t")) {
    double t = 0.0;
    detail::read_if(j, "initial_t", t);
    mh.initial_t = t;
  }
  detail::read_if(j, "noise_proposal_step", mh.noise_proposal_step);
  detail::read_if(j, "initial_noise_variance", mh.initial_noise_variance);
  detail::read_if(j, "noise_lower", mh.noise_lower);
  detail::read_if(j, "noise_upper", mh.noise_upper);
}

// Returns true when the noise variance was given explicitly.
inline bool apply_estimator_json(const Json& j, EstimatorConfig& c) {
  detail::check_keys(j,
                     {"method", "noise_variance", "a0", "b0", "gamma1", "gamma2", "k", "subset_size", "affinity_variant",
                      "gamma_a0", "gamma_b0", "rho", "mh", "grid", "cv_fraction", "truncation", "seed"},
                     "estimator");
  if (j.contains("method")) c.method = parse_method(j.at("method").get<std::string>());
  bool noise_set = false;
  if (j.contains("noise_variance")) {
    const Json& v = j.at("noise_variance");
    if (v.is_string()) {
      detail::require<InvalidInput>(v.get<std::string>() == "infer", "noise_variance must be a number or \"infer\"");
      c.noise_variance.reset();
    } else {
      detail::require<InvalidInput>(v.is_number(), "noise_variance must be a number or \"infer\"");
      c.noise_variance = v.get<double>();
    }
    noise_set = true;
  }
  detail::read_if(j, "a0", c.eb.a0);
  detail::read_if(j, "b0", c.eb.b0);
  detail::read_if(j, "gamma1", c.eb.gamma1);
  detail::read_if(j, "gamma2", c.eb.gamma2);
  detail::read_if(j, "k", c.eb.k);
  detail::read_if(j, "subset_size", c.eb.subset_size);
  if (j.contains("affinity_variant")) {
    const std::string v = j.at("affinity_variant").get<std::string>();
    detail::require<InvalidInput>(v == "arithmetic" || v == "harmonic", "affinity_variant must be arithmetic or harmonic");
    c.eb.variant = v == "harmonic" ? AffinityVariant::harmonic : AffinityVariant::arithmetic;
  }
  detail::read_if(j, "gamma_a0", c.gamma_a0);
  detail::read_if(j, "gamma_b0", c.gamma_b0);
  if (j.contains("rho")) {
    if (j.at("rho").is_null()) c.rho.reset(); else c.rho = j.at("rho").get<double>();
  }
  if (j.contains("mh")) apply_mh_json(j.at("mh"), c.mh);
  if (j.contains("grid")) {
    const Json& g = j.at("grid");
    if (g.is_array()) {
      c.grid = g.get<std::vector<double>>();
    } else {
      detail::check_keys(g, {"lo", "hi", "count"}, "grid");
      double lo = 1e-4, hi = 1.0;
      std::size_t count = 60;
      detail::read_if(g, "lo", lo);
      detail::read_if(g, "hi", hi);
      detail::read_if(g, "count", count);
      detail::require(count >= 1, "grid count must be positive");
      c.grid = detail::log_grid(lo, hi, count);
    }
  }
  detail::read_if(j, "cv_fraction", c.cv_fraction);
  if (j.contains("truncation")) {
    if (j.at("truncation").is_null()) c.truncation.reset(); else c.truncation = j.at("truncation").get<double>();
  }
  detail::read_if(j, "seed", c.seed);
  return noise_set;
}

inline void apply_scenario_json(const Json& j, ScenarioConfig& s) {
  detail::check_keys(j,
                     {"generator", "sigma", "n", "repeats", "n_test", "methods", "seed", "threads", "timing", "circle",
                      "estimator"},
                     "config");
  detail::read_if(j, "generator", s.generator);
  detail::read_if(j, "sigma", s.sigma);
  detail::read_if(j, "n", s.n_list);
  detail::read_if(j, "repeats", s.repeats);
  detail::read_if(j, "n_test", s.n_test);
  if (j.contains("methods")) {
    s.methods.clear();
    for (const auto& m : j.at("methods")) s.methods.push_back(parse_method(m.get<std::string>()));
  }
  detail::read_if(j, "seed", s.seed);
  detail::read_if(j, "threads", s.threads);
  detail::read_if(j, "timing", s.timing);
  if (j.contains("circle")) {
    detail::check_keys(j.at("circle"), {"radius", "D"}, "circle");
    detail::read_if(j.at("circle"), "radius", s.circle.radius);
    detail::read_if(j.at("circle"), "D", s.circle.D);
  }
  if (j.contains("estimator")) s.noise_variance_set = apply_estimator_json(j.at("estimator"), s.estimator);
}

inline Json load_json_file(const std::string& path) {
  std::ifstream in(path);
  detail::require<InvalidInput>(in.good(), ("cannot open config " + path).c_str());
  try {
    return Json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw InvalidInput("config " + path + " is not valid JSON: " + e.what());
  }
}

}  // namespace ebgp
