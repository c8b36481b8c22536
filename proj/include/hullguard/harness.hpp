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
#pragma once

#include "hullguard/json_io.hpp"
#include "hullguard/policies.hpp"
#include "hullguard/supervisor.hpp"
#include "hullguard/synthesis.hpp"
#include "hullguard/systems.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

namespace hullguard {

/// Malformed or inconsistent scenario description.
class ScenarioError : public std::invalid_argument
{
public:
  using std::invalid_argument::invalid_argument;
};

/// Synthesis failed while preparing a Monte Carlo run; carries the solver report.
class ScenarioSynthesisError : public std::runtime_error
{
public:
  ScenarioSynthesisError(const std::string& what, json report)
      : std::runtime_error(what), report_(std::move(report))
  {
  }
  const json& report() const { return report_; }

private:
  json report_;
};

enum class ControllerKind
{
  optimal,       ///< unsupervised LQR
  safe,          ///< piecewise safe policy of the scenario certificate
  safe_optimal,  ///< LQR supervised against the scenario certificate
  ce_safe,       ///< LQR supervised against a certainty-equivalence certificate
  ce,            ///< piecewise safe policy of a certainty-equivalence certificate
};

std::string to_string(ControllerKind kind);
ControllerKind controller_from_string(const std::string& name);

struct DataSpec
{
  int N = 12;
  double amplitude = 1.0;
  std::optional<Eigen::VectorXd> x0;
  std::uint64_t seed = 1;
  bool per_run = false;  ///< fresh dataset and certificates for every realization
  std::string path;      ///< dataset JSON in physical coordinates; overrides collection
};

/// x0 either given, or a fraction of the smallest hull radius along a direction.
struct InitialState
{
  std::optional<Eigen::VectorXd> point;
  Eigen::VectorXd direction;
  double hull_fraction = 0.9;
};

/**
 * @brief Everything needed to run one experiment, in physical coordinates.
 *
 * With state_scale set, synthesis, policies and simulation work in z = diag(1 / state_scale) x,
 * an exact change of coordinates; reports are mapped back.
 */
struct ScenarioConfig
{
  std::string name;
  LtiSystem system;
  Eigen::MatrixXd F;
  Eigen::VectorXd g;
  Eigen::VectorXd state_scale;
  DataSpec data;
  SynthesisMode mode = SynthesisMode::data_minvar;  ///< certificate behind safe / safe_optimal
  SynthesisConfig synthesis;
  double epsilon = 0.1;
  Eigen::MatrixXd b_nominal;  ///< empty: true B
  Eigen::MatrixXd delta_b;    ///< empty: zero
  Eigen::MatrixXd Q;
  Eigen::MatrixXd R;
  InitialState x0;
  int horizon = 400;
  int runs = 100;
  std::uint64_t seed = 7;
  std::vector<ControllerKind> controllers;
  int support_samples = 0;

  Eigen::Index n() const { return system.n(); }
  /// Throws ScenarioError.
  void validate() const;
};

ScenarioConfig scenario_from_json(const json& j);
json scenario_to_json(const ScenarioConfig& s);
ScenarioConfig load_scenario(const std::string& path_or_builtin);

std::vector<std::string> builtin_scenario_names();
/// numeric2d, numeric2d_low, numeric2d_high, numeric2d_cmp3, numeric2d_ce, lanekeep4d
ScenarioConfig builtin_scenario(const std::string& name);

/// Dataset files: {"format": "hullguard-dataset/1", X0, U0, X1, optional W0, seed}.
json dataset_to_json(const TrajectoryDataset& data);
TrajectoryDataset dataset_from_json(const json& j);

/// Scenario quantities in solve coordinates.
struct PreparedScenario
{
  ScenarioConfig config;
  LtiSystem plant;
  PolyhedralSetd admissible;
  Eigen::MatrixXd T;      ///< z = T x
  Eigen::MatrixXd T_inv;
  Eigen::MatrixXd Q;
  Eigen::MatrixXd R;
  std::optional<LqrPolicy> lqr;  ///< empty when the Riccati iteration fails
  std::string lqr_error;
  BPrior b_prior;
};

PreparedScenario prepare_scenario(const ScenarioConfig& config);

/// Dataset in solve coordinates for the given stream (ignored for a fixed dataset file).
TrajectoryDataset scenario_dataset(const PreparedScenario& scenario, std::uint64_t stream);

SynthesisResult synthesize(const PreparedScenario& scenario, SynthesisMode mode, const TrajectoryDataset* data);

struct SafetyBundle
{
  HullCertificate certificate;
  PartitionedPolicy policy;
};

SafetyBundle make_bundle(const PreparedScenario& scenario, const HullCertificate& cert);

struct CostEstimate
{
  double mean = 0.0;
  double stderr_ = 0.0;
  double tail_mean = 0.0;  ///< mean of x_H' P x_H, reported, not added
  int included = 0;
  int excluded = 0;        ///< diverged or non-finite runs
};

/**
 * Sample mean over trajectories of sum_t x(t)' Q x(t) + sum_t u(t)' R u(t) on the first
 * horizon + 1 states and horizon inputs. tail_P, when given, prices the final state.
 */
CostEstimate estimate_cost(const std::vector<Trajectory>& traces, const Eigen::MatrixXd& Q, const Eigen::MatrixXd& R,
                           int horizon, const Eigen::MatrixXd& tail_P = {});

struct RunRecord
{
  int run = 0;
  bool compliant = true;
  bool diverged = false;
  int first_violation = -1;
  double cost = 0.0;
  int rl_pass = 0;
  int interpolated = 0;
  int fallback = 0;
  double max_gauge = 0.0;  ///< max_t gauge of x(t) in the admissible set
};

struct ControllerReport
{
  ControllerKind controller = ControllerKind::optimal;
  int total_runs = 0;
  int compliant_runs = 0;
  int diverged_runs = 0;
  CostEstimate cost;
  std::vector<int> violation_timeline;  ///< runs outside the admissible set at step t
  std::vector<RunRecord> runs;
  std::vector<std::vector<Eigen::VectorXd>> traces;  ///< physical coordinates, first few runs
  Eigen::MatrixXd envelope_min;  ///< n x (horizon + 1)
  Eigen::MatrixXd envelope_max;
};

/// Drawing data of the certificate behind safe / safe_optimal, physical coordinates.
struct HullDrawing
{
  std::vector<Eigen::MatrixXd> ellipsoids;
  std::vector<Eigen::VectorXd> hull_vertices;
};

struct MonteCarloReport
{
  std::string scenario;
  std::string generated_at;
  int horizon = 0;
  int runs = 0;
  std::uint64_t seed = 0;
  Eigen::VectorXd x0;  ///< physical coordinates; first realization when x0 depends on per-run certificates
  Eigen::MatrixXd F;
  Eigen::VectorXd g;
  std::optional<HullDrawing> hull;
  std::vector<ControllerReport> controllers;
  json certificates;  ///< verification summary per synthesized certificate
  std::vector<HullCertificate> synthesized;  ///< kept only with MonteCarloOptions::keep_certificates
};

struct MonteCarloOptions
{
  int threads = 0;       ///< 0: hardware concurrency
  int keep_traces = 10;
  std::optional<SafetyBundle> safe_bundle;  ///< replaces on-the-fly synthesis of the scenario certificate
  bool keep_certificates = false;  ///< copy every synthesized certificate into the report
};

MonteCarloReport run_monte_carlo(const ScenarioConfig& scenario, const MonteCarloOptions& options = {});

json report_to_json(const MonteCarloReport& report);
MonteCarloReport report_from_json(const json& j);

/// SVG of the admissible set, ellipsoids, hull polytope and sample trajectories (n = 2 only).
std::string render_svg(const MonteCarloReport& report);

struct ReportFiles
{
  std::vector<std::string> written;
};

/**
 * Writes summary.json, runs.csv and, per report, an SVG (n = 2, when requested) or an
 * envelope CSV of the first two states (n > 2) into directory. Throws std::runtime_error on IO failure.
 */
ReportFiles compliance_report(const std::vector<MonteCarloReport>& reports, const std::string& directory,
                              bool svg = true);

}  // namespace hullguard
