#pragma once

#include <cmath>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "json.hpp"
#include "qproc/errors.hpp"
#include "qproc/estimator.hpp"
#include "qproc/functional.hpp"
#include "qproc/levy.hpp"

namespace qproc {

// ---------------------------------------------------------------------------
// Experiment configuration: one structured file drives every CLI verb.
// Unknown keys are errors; the config round-trips losslessly through JSON.
// ---------------------------------------------------------------------------

struct SchemeConfig {
  // Either the HFLT family h = n^{-beta} over n_list, or explicit (n, h) cells.
  double beta = 0.5;
  std::vector<std::size_t> n_list;
  std::vector<SamplingScheme> explicit_cells;

  bool uses_beta() const { return explicit_cells.empty(); }

  std::vector<SamplingScheme> cells() const {
    if (!explicit_cells.empty()) return explicit_cells;
    std::vector<SamplingScheme> out;
    for (std::size_t n : n_list) out.push_back(SamplingScheme::hflt(n, beta));
    return out;
  }
};

struct AlphaSchedule {
  // alpha_n = floor(r_n^2 / log r_n) with r_n = n^{beta/p} unless overridden.
  std::vector<std::size_t> values;  // parallel to the scheme's n_list when set
  double p = 1.5;                   // d + 1/2 for d = 1

  std::size_t alpha_for(std::size_t n, double beta) const {
    const double rn = std::pow(static_cast<double>(n), beta / p);
    const double a = std::floor(rn * rn / std::log(rn));
    return a >= 1.0 ? static_cast<std::size_t>(a) : 1;
  }
};

struct FunctionalConfig {
  std::string type = "dividend";  // "dividend" | "perpetual_put"
  bool negate = true;             // minimize the negated value (maximization target)
  // dividend parameters
  double alpha = 1.0;
  double epsilon = 0.1;
  double maturity_scale = 1.0;
  double r = 0.5;
  double xi = -20.0;
  // perpetual put parameters
  double strike = 1.0;

  std::shared_ptr<const PathFunctional> build(const ThetaBox& theta) const {
    std::shared_ptr<const PathFunctional> f;
    if (type == "dividend") {
      if (theta.dim() != 1) throw config_error("functional: dividend needs a 1-d theta box");
      f = std::make_shared<DividendFunctional>(alpha, epsilon, maturity_scale, r, xi,
                                               theta.lo[0], theta.hi[0]);
    } else if (type == "perpetual_put") {
      f = std::make_shared<PerpetualPutFunctional>(r, strike);
    } else {
      throw config_error("functional: unknown type '" + type + "'");
    }
    return negate ? std::make_shared<NegatedFunctional>(f) : f;
  }
};

struct OracleConfig {
  std::size_t paths = 100000;
  std::size_t n = 202;            // oracle grid steps
  double h = 0.05;                // oracle grid spacing
  std::size_t grid_points = 10000;  // theta scan resolution
  std::uint64_t seed = 424242;

  SamplingScheme scheme() const { return SamplingScheme{n, h}; }
};

struct IdentifiabilityConfig {
  double radius = 0.5;         // exclusion radius around the scanned argmin
  double min_margin = 1e-4;    // required excess contrast outside the radius
  bool continue_on_failure = false;
};

struct ExperimentConfig {
  JumpDiffusionModel model{0.0, 20.0, 10.0, 5.0, 3.0, -1};
  SchemeConfig scheme;
  AlphaSchedule alpha;
  FunctionalConfig functional;
  ThetaBox theta{{0.0}, {10.0}};
  OptimizerOptions optimizer;
  OracleConfig oracle;
  IdentifiabilityConfig identifiability;
  std::vector<std::uint64_t> seeds{1};
  std::string output_dir = "out";

  void validate_or_throw() const {
    try {
      model.validate_or_throw();
      theta.validate_or_throw();
      for (const auto& c : scheme.cells()) c.validate_or_throw();
    } catch (const parameter_error& e) {
      throw config_error(std::string("config: ") + e.what());
    }
    if (scheme.uses_beta() && scheme.n_list.empty())
      throw config_error("config: scheme needs n_list or explicit cells");
    if (!scheme.explicit_cells.empty() && !scheme.n_list.empty())
      throw config_error("config: scheme cells and n_list are mutually exclusive");
    if (!alpha.values.empty() && scheme.uses_beta() &&
        alpha.values.size() != scheme.n_list.size())
      throw config_error("config: alpha values must parallel n_list");
    if (seeds.empty()) throw config_error("config: need at least one seed");
    if (oracle.paths == 0) throw config_error("config: oracle paths must be >= 1");
    if (!(alpha.p > 0.0)) throw config_error("config: alpha p must be > 0");
    functional.build(theta);  // surfaces functional/theta inconsistencies
  }

  std::size_t alpha_for(std::size_t n) const {
    if (!alpha.values.empty()) {
      if (scheme.uses_beta())
        for (std::size_t i = 0; i < scheme.n_list.size(); ++i)
          if (scheme.n_list[i] == n) return alpha.values[i];
      return alpha.values.front();
    }
    return alpha.alpha_for(n, scheme.beta);
  }
};

// ---------------------------------------------------------------------------
// JSON (de)serialization with strict key checking
// ---------------------------------------------------------------------------

namespace detail {

using json = nlohmann::ordered_json;

inline void check_keys(const json& j, const char* where,
                       std::initializer_list<const char*> allowed) {
  if (!j.is_object()) throw config_error(std::string("config: ") + where + " must be an object");
  for (const auto& [key, _] : j.items()) {
    bool ok = false;
    for (const char* a : allowed) ok = ok || key == a;
    if (!ok) throw config_error(std::string("config: unknown key '") + key + "' in " + where);
  }
}

template <class T>
void read_field(const json& j, const char* key, T& out) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw config_error(std::string("config: bad value for '") + key + "': " + e.what());
  }
}

}  // namespace detail

inline detail::json to_json(const ExperimentConfig& c) {
  using detail::json;
  json j;
  j["model"] = {{"u0", c.model.u0},     {"mu", c.model.mu},
                {"sigma", c.model.sigma}, {"lambda", c.model.lambda},
                {"jump_mean", c.model.jump_mean}, {"jump_sign", c.model.jump_sign}};
  json scheme;
  if (c.scheme.uses_beta()) {
    scheme["beta"] = c.scheme.beta;
    scheme["n_list"] = c.scheme.n_list;
  } else {
    json cells = json::array();
    for (const auto& s : c.scheme.explicit_cells) cells.push_back({{"n", s.n}, {"h", s.h}});
    scheme["cells"] = cells;
  }
  j["scheme"] = scheme;
  json alpha;
  alpha["p"] = c.alpha.p;
  if (!c.alpha.values.empty()) alpha["values"] = c.alpha.values;
  j["alpha"] = alpha;
  json f;
  f["type"] = c.functional.type;
  f["negate"] = c.functional.negate;
  if (c.functional.type == "dividend") {
    f["alpha"] = c.functional.alpha;
    f["epsilon"] = c.functional.epsilon;
    f["maturity_scale"] = c.functional.maturity_scale;
    f["r"] = c.functional.r;
    f["xi"] = c.functional.xi;
  } else {
    f["r"] = c.functional.r;
    f["strike"] = c.functional.strike;
  }
  j["functional"] = f;
  j["theta"] = {{"lo", c.theta.lo}, {"hi", c.theta.hi}};
  j["optimizer"] = {{"grid_points", c.optimizer.grid_points},
                    {"tolerance", c.optimizer.tolerance},
                    {"max_iterations", c.optimizer.max_iterations}};
  j["oracle"] = {{"paths", c.oracle.paths},
                 {"n", c.oracle.n},
                 {"h", c.oracle.h},
                 {"grid_points", c.oracle.grid_points},
                 {"seed", c.oracle.seed}};
  j["identifiability"] = {{"radius", c.identifiability.radius},
                          {"min_margin", c.identifiability.min_margin},
                          {"continue_on_failure", c.identifiability.continue_on_failure}};
  j["seeds"] = c.seeds;
  j["output_dir"] = c.output_dir;
  return j;
}

inline ExperimentConfig config_from_json(const detail::json& j) {
  using detail::check_keys;
  using detail::read_field;
  ExperimentConfig c;
  check_keys(j, "config",
             {"model", "scheme", "alpha", "functional", "theta", "optimizer", "oracle",
              "identifiability", "seeds", "output_dir"});
  if (j.contains("model")) {
    const auto& m = j.at("model");
    check_keys(m, "model", {"u0", "mu", "sigma", "lambda", "jump_mean", "jump_sign"});
    read_field(m, "u0", c.model.u0);
    read_field(m, "mu", c.model.mu);
    read_field(m, "sigma", c.model.sigma);
    read_field(m, "lambda", c.model.lambda);
    read_field(m, "jump_mean", c.model.jump_mean);
    read_field(m, "jump_sign", c.model.jump_sign);
  }
  if (j.contains("scheme")) {
    const auto& s = j.at("scheme");
    check_keys(s, "scheme", {"beta", "n_list", "cells"});
    read_field(s, "beta", c.scheme.beta);
    read_field(s, "n_list", c.scheme.n_list);
    if (s.contains("cells")) {
      for (const auto& cell : s.at("cells")) {
        check_keys(cell, "scheme.cells[]", {"n", "h"});
        SamplingScheme sc;
        read_field(cell, "n", sc.n);
        read_field(cell, "h", sc.h);
        c.scheme.explicit_cells.push_back(sc);
      }
    }
  }
  if (j.contains("alpha")) {
    const auto& a = j.at("alpha");
    check_keys(a, "alpha", {"p", "values"});
    read_field(a, "p", c.alpha.p);
    read_field(a, "values", c.alpha.values);
  }
  if (j.contains("functional")) {
    const auto& f = j.at("functional");
    check_keys(f, "functional",
               {"type", "negate", "alpha", "epsilon", "maturity_scale", "r", "xi", "strike"});
    read_field(f, "type", c.functional.type);
    read_field(f, "negate", c.functional.negate);
    read_field(f, "alpha", c.functional.alpha);
    read_field(f, "epsilon", c.functional.epsilon);
    read_field(f, "maturity_scale", c.functional.maturity_scale);
    read_field(f, "r", c.functional.r);
    read_field(f, "xi", c.functional.xi);
    read_field(f, "strike", c.functional.strike);
  }
  if (j.contains("theta")) {
    const auto& t = j.at("theta");
    check_keys(t, "theta", {"lo", "hi"});
    read_field(t, "lo", c.theta.lo);
    read_field(t, "hi", c.theta.hi);
  }
  if (j.contains("optimizer")) {
    const auto& o = j.at("optimizer");
    check_keys(o, "optimizer", {"grid_points", "tolerance", "max_iterations"});
    read_field(o, "grid_points", c.optimizer.grid_points);
    read_field(o, "tolerance", c.optimizer.tolerance);
    read_field(o, "max_iterations", c.optimizer.max_iterations);
  }
  if (j.contains("oracle")) {
    const auto& o = j.at("oracle");
    check_keys(o, "oracle", {"paths", "n", "h", "grid_points", "seed"});
    read_field(o, "paths", c.oracle.paths);
    read_field(o, "n", c.oracle.n);
    read_field(o, "h", c.oracle.h);
    read_field(o, "grid_points", c.oracle.grid_points);
    read_field(o, "seed", c.oracle.seed);
  }
  if (j.contains("identifiability")) {
    const auto& i = j.at("identifiability");
    check_keys(i, "identifiability", {"radius", "min_margin", "continue_on_failure"});
    read_field(i, "radius", c.identifiability.radius);
    read_field(i, "min_margin", c.identifiability.min_margin);
    read_field(i, "continue_on_failure", c.identifiability.continue_on_failure);
  }
  read_field(j, "seeds", c.seeds);
  read_field(j, "output_dir", c.output_dir);
  c.validate_or_throw();
  return c;
}

inline detail::json to_json(const EstimatorResult& r) {
  detail::json j;
  j["theta_hat"] = r.theta_hat;
  j["contrast_at_min"] = r.contrast_at_min;
  j["tolerance_reached"] = r.tolerance_reached;
  if (r.sigma_hat) j["sigma_hat"] = *r.sigma_hat;
  detail::json trace = detail::json::array();
  for (const auto& e : r.trace) trace.push_back({{"theta", e.theta}, {"contrast", e.contrast}});
  j["trace"] = trace;
  return j;
}

inline std::string serialize_config(const ExperimentConfig& c) { return to_json(c).dump(2) + "\n"; }

inline ExperimentConfig parse_config(const std::string& text) {
  detail::json j;
  try {
    j = detail::json::parse(text);
  } catch (const detail::json::exception& e) {
    throw config_error(std::string("config: parse failure: ") + e.what());
  }
  return config_from_json(j);
}

}  // namespace qproc
