/*
 Copyright 2026 The hullguard Authors

 Licensed under the Apache License, Version 2.0 (the "License");
 you may not use this file except in compliance with the License.
 You may obtain a copy of the License at

      https://www.apache.org/licenses/LICENSE-2.0

 Unless required by applicable law or agreed to in writing, software
 distributed under the License is distributed on an "AS IS" BASIS,
 WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 See the License for the specific language governing permissions and
 limitations under the License.
*/
#include <doctest.h>

#include "hullguard/harness.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

using namespace hullguard;

namespace {

std::string slurp(const std::filesystem::path& p)
{
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

std::filesystem::path scratch_dir(const std::string& name)
{
  const auto dir = std::filesystem::temp_directory_path() / ("hullguard_test_" + name);
  std::filesystem::remove_all(dir);
  return dir;
}

ScenarioConfig small_numeric(double sigma, std::vector<ControllerKind> controllers, int runs, int horizon)
{
  ScenarioConfig s = builtin_scenario("numeric2d");
  s.system.sigma = sigma * Eigen::MatrixXd::Identity(2, 2);
  s.controllers = std::move(controllers);
  s.runs = runs;
  s.horizon = horizon;
  return s;
}

Trajectory scalar_trajectory(std::vector<double> xs, std::vector<double> us)
{
  Trajectory tr;
  for (double x : xs) tr.states.push_back(Eigen::VectorXd::Constant(1, x));
  for (double u : us) tr.inputs.push_back(Eigen::VectorXd::Constant(1, u));
  return tr;
}

}  // namespace

TEST_CASE("estimate_cost: oracle sums, exclusion of diverged runs and the standard error")
{
  const Eigen::MatrixXd one = Eigen::MatrixXd::Identity(1, 1);
  CHECK(estimate_cost({}, one, one, 10).mean == 0.0);
  CHECK(estimate_cost({}, one, one, 10).included == 0);

  // x = (1, 0.5), u = (-0.5): 1 + 0.25 + 0.25
  const CostEstimate single = estimate_cost({scalar_trajectory({1.0, 0.5}, {-0.5})}, one, one, 1);
  CHECK(single.mean == doctest::Approx(1.5).epsilon(1e-15));
  CHECK(single.stderr_ == 0.0);

  // Truncation keeps horizon + 1 states and horizon inputs.
  CHECK(estimate_cost({scalar_trajectory({1.0, 1.0, 1.0}, {1.0, 1.0})}, one, one, 1).mean == doctest::Approx(3.0));

  Trajectory diverged = scalar_trajectory({1.0}, {});
  diverged.diverged = true;
  const CostEstimate mixed =
      estimate_cost({scalar_trajectory({1.0}, {}), scalar_trajectory({3.0}, {}), diverged}, one, one, 0);
  CHECK(mixed.included == 2);
  CHECK(mixed.excluded == 1);
  CHECK(mixed.mean == doctest::Approx(5.0));
  // costs 1 and 9: sample sd 4 sqrt(2), stderr 4
  CHECK(mixed.stderr_ == doctest::Approx(4.0));

  const CostEstimate tail = estimate_cost({scalar_trajectory({1.0, 2.0}, {0.0})}, one, one, 1, 3.0 * one);
  CHECK(tail.tail_mean == doctest::Approx(12.0));
  CHECK(tail.mean == doctest::Approx(5.0));
}

TEST_CASE("scenario JSON: round trip, inheritance and validation")
{
  for (const std::string& name : builtin_scenario_names()) {
    CAPTURE(name);
    const ScenarioConfig s = builtin_scenario(name);
    CHECK_NOTHROW(s.validate());
    const ScenarioConfig back = scenario_from_json(scenario_to_json(s));
    CHECK(scenario_to_json(back) == scenario_to_json(s));
    CHECK(back.system.A.isApprox(s.system.A));
    CHECK(back.state_scale.size() == s.state_scale.size());
  }

  json j = {{"extends", "numeric2d"}, {"runs", 5}, {"controllers", {"optimal"}}, {"system", {{"sigma", 0.03}}}};
  const ScenarioConfig s = scenario_from_json(j);
  CHECK(s.runs == 5);
  CHECK(s.controllers.size() == 1);
  CHECK(s.system.sigma(1, 1) == doctest::Approx(0.03));
  CHECK(s.synthesis.lambda == doctest::Approx(0.8));

  CHECK_THROWS_AS(scenario_from_json({{"extends", "numeric2d"}, {"runs", 0}}), ScenarioError);
  CHECK_THROWS_AS(scenario_from_json({{"extends", "numeric2d"}, {"controllers", {"fastest"}}}), ScenarioError);
  CHECK_THROWS_AS(scenario_from_json({{"extends", "numeric2d"}, {"x0", {1.0, 2.0, 3.0}}}), ScenarioError);
  CHECK_THROWS_AS(scenario_from_json({{"extends", "numeric2d"}, {"lqr", {{"R", {{1.0, 0.0}}}}}}), ScenarioError);
  CHECK_THROWS_AS(scenario_from_json({{"extends", "no_such_scenario"}}), ScenarioError);
  CHECK_THROWS_AS(scenario_from_json({{"extends", "numeric2d"}, {"synthesis", {{"mode", "magic"}}}}), ScenarioError);
  CHECK_THROWS_AS(scenario_from_json({{"admissible", {{"F", {{1.0, 0.0}}}, {"g", {1.0}}}}}), ScenarioError);
  CHECK_THROWS_AS(load_scenario("/nonexistent/scenario.json"), ScenarioError);
  CHECK(load_scenario("numeric2d").name == "numeric2d");
}

TEST_CASE("dataset JSON round trip")
{
  const PreparedScenario p = prepare_scenario(builtin_scenario("numeric2d"));
  const TrajectoryDataset d = scenario_dataset(p, 0);
  const TrajectoryDataset back = dataset_from_json(dataset_to_json(d));
  CHECK(back.X0 == d.X0);
  CHECK(back.U0 == d.U0);
  CHECK(back.X1 == d.X1);
  REQUIRE(back.W0.has_value());
  CHECK(*back.W0 == *d.W0);
  CHECK(back.assumption4_ok);
  json bad = dataset_to_json(d);
  bad["X1"] = matrix_to_json(Eigen::MatrixXd::Zero(2, 3));
  CHECK_THROWS_AS(dataset_from_json(bad), ScenarioError);
}

TEST_CASE("noise-free runs from inside the hull are compliant for the safe and supervised controllers")
{
  ScenarioConfig s = small_numeric(0.0, {ControllerKind::safe, ControllerKind::safe_optimal}, 4, 60);
  s.system.sigma = 1e-12 * Eigen::MatrixXd::Identity(2, 2);  // minvar needs a nonsingular noise model
  const MonteCarloReport r = run_monte_carlo(s);
  for (const ControllerReport& c : r.controllers) {
    CAPTURE(to_string(c.controller));
    CHECK(c.compliant_runs == c.total_runs);
    CHECK(c.diverged_runs == 0);
  }
}

TEST_CASE("Monte Carlo reports are deterministic across thread counts")
{
  ScenarioConfig s = small_numeric(0.01, {ControllerKind::optimal, ControllerKind::safe_optimal}, 12, 80);
  MonteCarloOptions one;
  one.threads = 1;
  MonteCarloOptions four;
  four.threads = 4;
  MonteCarloReport a = run_monte_carlo(s, one);
  MonteCarloReport b = run_monte_carlo(s, four);
  b.generated_at = a.generated_at;
  CHECK(report_to_json(a).dump() == report_to_json(b).dump());

  const auto d1 = scratch_dir("det1");
  const auto d2 = scratch_dir("det2");
  compliance_report({a}, d1.string());
  compliance_report({b}, d2.string());
  CHECK(slurp(d1 / "runs.csv") == slurp(d2 / "runs.csv"));
  CHECK(slurp(d1 / "summary.json") == slurp(d2 / "summary.json"));
  CHECK(slurp(d1 / "numeric2d.svg") == slurp(d2 / "numeric2d.svg"));

  const MonteCarloReport back = report_from_json(report_to_json(a));
  CHECK(report_to_json(back).dump() == report_to_json(a).dump());
}

TEST_CASE("cost standard error shrinks by about 1/sqrt(2) when realizations double")
{
  const ScenarioConfig base = small_numeric(0.01, {ControllerKind::optimal}, 400, 100);
  ScenarioConfig twice = base;
  twice.runs = 800;
  const double se1 = run_monte_carlo(base).controllers.front().cost.stderr_;
  const double se2 = run_monte_carlo(twice).controllers.front().cost.stderr_;
  REQUIRE(se1 > 0.0);
  const double ratio = se2 / se1;
  CHECK(ratio > 0.8 / std::sqrt(2.0));
  CHECK(ratio < 1.2 / std::sqrt(2.0));
}

TEST_CASE("safe controller compliance does not increase with the noise level")
{
  int previous = 101;
  for (const char* name : {"numeric2d_low", "numeric2d", "numeric2d_high"}) {
    ScenarioConfig s = builtin_scenario(name);
    s.controllers = {ControllerKind::safe};
    const int compliant = run_monte_carlo(s).controllers.front().compliant_runs;
    CAPTURE(name);
    CHECK(compliant <= previous);
    previous = compliant;
  }
}

TEST_CASE("state scaling is an exact change of coordinates")
{
  ScenarioConfig plain = small_numeric(0.01, {ControllerKind::optimal}, 8, 60);
  ScenarioConfig scaled = plain;
  scaled.state_scale = Eigen::Vector2d(4.0, 0.25);
  const MonteCarloReport a = run_monte_carlo(plain);
  const MonteCarloReport b = run_monte_carlo(scaled);
  const ControllerReport& ca = a.controllers.front();
  const ControllerReport& cb = b.controllers.front();
  CHECK(ca.compliant_runs == cb.compliant_runs);
  CHECK(cb.cost.mean == doctest::Approx(ca.cost.mean).epsilon(1e-9));
  for (std::size_t k = 0; k < ca.traces.size(); ++k) {
    for (std::size_t t = 0; t < ca.traces[k].size(); ++t) {
      CHECK((cb.traces[k][t] - ca.traces[k][t]).norm() <= 1e-9 * (1.0 + ca.traces[k][t].norm()));
    }
  }
}

TEST_CASE("infeasible synthesis aborts the Monte Carlo run with its report")
{
  // The first state is unstable and unactuated, so no contractive ellipsoid exists.
  ScenarioConfig s = small_numeric(0.01, {ControllerKind::safe}, 2, 10);
  s.system.A = Eigen::Matrix2d{{2.0, 0.0}, {0.0, 0.5}};
  s.system.B = Eigen::Vector2d(0.0, 1.0);
  s.mode = SynthesisMode::model_csie;
  s.Q = Eigen::Matrix2d::Identity();
  s.controllers = {ControllerKind::safe};
  try {
    run_monte_carlo(s);
    FAIL("expected ScenarioSynthesisError");
  } catch (const ScenarioSynthesisError& e) {
    CHECK(e.report().at("status") != "feasible");
  }
}

TEST_CASE("compliance_report: empty input, 2D figure and 4D envelopes")
{
  const auto empty = scratch_dir("empty");
  const ReportFiles none = compliance_report({}, empty.string());
  CHECK(none.written.size() == 2);
  const json summary = read_json_file((empty / "summary.json").string());
  CHECK(summary.at("reports").empty());

  const auto two = scratch_dir("two");
  const MonteCarloReport r2 = run_monte_carlo(small_numeric(0.01, {ControllerKind::safe_optimal}, 3, 40));
  compliance_report({r2}, two.string());
  const std::string svg = slurp(two / "numeric2d.svg");
  std::size_t ellipses = 0;
  for (std::size_t pos = svg.find("class=\"ellipsoid\""); pos != std::string::npos;
       pos = svg.find("class=\"ellipsoid\"", pos + 1)) {
    ++ellipses;
  }
  CHECK(ellipses == 3);
  const std::size_t start = svg.find("class=\"admissible\"");
  REQUIRE(start != std::string::npos);
  const std::string outline = svg.substr(start, svg.find("/>", start) - start);
  CHECK(std::count(outline.begin(), outline.end(), 'L') + 1 == 6);
  CHECK(svg.find("class=\"hull\"") != std::string::npos);
  CHECK(svg.find("class=\"trajectory\"") != std::string::npos);

  ScenarioConfig lk = builtin_scenario("lanekeep4d");
  lk.controllers = {ControllerKind::optimal};
  lk.x0.point = Eigen::Vector4d(0.1, 0.0, 0.0, 0.0);
  lk.runs = 3;
  lk.horizon = 20;
  const auto four = scratch_dir("four");
  compliance_report({run_monte_carlo(lk)}, four.string());
  CHECK_FALSE(std::filesystem::exists(four / "lanekeep4d.svg"));
  const std::string env = slurp(four / "lanekeep4d_envelope.csv");
  CHECK(env.rfind("controller,t,x1_min,x1_max,x2_min,x2_max\n", 0) == 0);
  CHECK(std::count(env.begin(), env.end(), '\n') == 1 + 21);
  CHECK(env.find("optimal,0,0.1,0.1,0,0\n") != std::string::npos);
}
