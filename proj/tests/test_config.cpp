#include <string>

#include "catch2/catch_amalgamated.hpp"
#include "qproc/config.hpp"

using namespace qproc;

namespace {

ExperimentConfig sample_config() {
  ExperimentConfig c;
  c.model = {1.0, 20.0, 10.0, 5.0, 3.0, -1};
  c.scheme.beta = 0.5;
  c.scheme.n_list = {1000, 10000};
  c.alpha.values = {100, 151};
  c.functional.type = "dividend";
  c.theta = ThetaBox{{0.0}, {10.0}};
  c.optimizer.grid_points = 32;
  c.oracle.paths = 500;
  c.seeds = {1, 2, 3};
  c.output_dir = "artifacts";
  return c;
}

}  // namespace

TEST_CASE("config round-trips losslessly through JSON") {
  const ExperimentConfig c = sample_config();
  const std::string text = serialize_config(c);
  const ExperimentConfig back = parse_config(text);
  CHECK(serialize_config(back) == text);
  CHECK(back.model.u0 == c.model.u0);
  CHECK(back.scheme.n_list == c.scheme.n_list);
  CHECK(back.alpha.values == c.alpha.values);
  CHECK(back.theta.lo == c.theta.lo);
  CHECK(back.optimizer.grid_points == c.optimizer.grid_points);
  CHECK(back.seeds == c.seeds);
  CHECK(back.output_dir == c.output_dir);
}

TEST_CASE("defaults parse from an empty object") {
  const ExperimentConfig c = parse_config(R"({"scheme": {"n_list": [100]}})");
  CHECK(c.model.mu == 20.0);
  CHECK(c.functional.type == "dividend");
  CHECK(c.theta.hi == std::vector<double>{10.0});
  CHECK(c.seeds == std::vector<std::uint64_t>{1});
}

TEST_CASE("unknown keys are rejected with the key named") {
  try {
    parse_config(R"({"scheme": {"n_list": [100]}, "modle": {}})");
    FAIL("expected config_error");
  } catch (const config_error& e) {
    CHECK(std::string(e.what()).find("modle") != std::string::npos);
  }
  CHECK_THROWS_AS(parse_config(R"({"scheme": {"n_list": [10], "gamma": 2}})"), config_error);
  CHECK_THROWS_AS(parse_config(R"({"functional": {"typ": "dividend"}})"), config_error);
}

TEST_CASE("malformed values and inconsistent configs are config errors") {
  CHECK_THROWS_AS(parse_config("not json"), config_error);
  CHECK_THROWS_AS(parse_config(R"({"scheme": {"n_list": "many"}})"), config_error);
  CHECK_THROWS_AS(parse_config(R"({"scheme": {}})"), config_error);  // no n_list, no cells
  CHECK_THROWS_AS(parse_config(R"({"scheme": {"n_list": [10], "beta": 1.5}})"), config_error);
  CHECK_THROWS_AS(
      parse_config(R"({"scheme": {"n_list": [10, 20]}, "alpha": {"values": [5]}})"),
      config_error);
  CHECK_THROWS_AS(parse_config(R"({"scheme": {"n_list": [10]}, "seeds": []})"), config_error);
  CHECK_THROWS_AS(
      parse_config(R"({"scheme": {"n_list": [10]}, "functional": {"type": "exotic"}})"),
      config_error);
  CHECK_THROWS_AS(
      parse_config(R"({"scheme": {"n_list": [10]}, "model": {"sigma": -1.0}})"), config_error);
  CHECK_THROWS_AS(
      parse_config(
          R"({"scheme": {"n_list": [10], "cells": [{"n": 5, "h": 0.5}]}})"),
      config_error);
}

TEST_CASE("explicit cells parse and are used verbatim") {
  const ExperimentConfig c =
      parse_config(R"({"scheme": {"cells": [{"n": 10, "h": 1.0}, {"n": 200, "h": 0.05}]}})");
  const auto cells = c.scheme.cells();
  REQUIRE(cells.size() == 2);
  CHECK(cells[0].n == 10);
  CHECK(cells[1].h == 0.05);
  CHECK(!c.scheme.uses_beta());
}

TEST_CASE("alpha schedule: explicit values and the default rule") {
  const ExperimentConfig c = sample_config();
  CHECK(c.alpha_for(1000) == 100);
  CHECK(c.alpha_for(10000) == 151);

  ExperimentConfig d;
  d.scheme.n_list = {10000};
  // r_n = n^{beta/p} = 10000^{1/3}; alpha = floor(r_n^2 / log r_n)
  const double rn = std::pow(10000.0, 0.5 / 1.5);
  CHECK(d.alpha_for(10000) == static_cast<std::size_t>(std::floor(rn * rn / std::log(rn))));
}

TEST_CASE("functional factory builds the configured object") {
  ExperimentConfig c = sample_config();
  auto f = c.functional.build(c.theta);
  CHECK(f->theta_dim() == 1);
  CHECK(f->dividend_structure() != nullptr);
  CHECK(f->dividend_structure()->sign == -1.0);  // negated by default

  c.functional.negate = false;
  CHECK(c.functional.build(c.theta)->dividend_structure()->sign == 1.0);

  c.functional.type = "perpetual_put";
  c.functional.strike = 2.0;
  auto put = c.functional.build(c.theta);
  CHECK(put->dividend_structure() == nullptr);
}

TEST_CASE("estimator results serialize to JSON") {
  EstimatorResult r;
  r.theta_hat = {1.5};
  r.contrast_at_min = -0.25;
  r.tolerance_reached = true;
  r.trace.push_back({{1.0}, 0.5});
  const auto j = to_json(r);
  CHECK(j["theta_hat"][0] == 1.5);
  CHECK(j["contrast_at_min"] == -0.25);
  CHECK(j["trace"].size() == 1);
  CHECK(!j.contains("sigma_hat"));
}
