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
#include "hullguard/harness.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <iomanip>
#include <iostream>

namespace {

using namespace hullguard;

constexpr int kExitOk = 0;
constexpr int kExitInfeasible = 2;
constexpr int kExitValidation = 3;

void print_table(const MonteCarloReport& r)
{
  std::cout << "scenario " << r.scenario << ", " << r.runs << " runs, horizon " << r.horizon << ", x0 = ["
            << r.x0.transpose() << "]\n";
  std::cout << std::left << std::setw(14) << "controller" << std::right << std::setw(11) << "compliant"
            << std::setw(10) << "diverged" << std::setw(16) << "cost mean" << std::setw(14) << "cost stderr"
            << "\n";
  for (const ControllerReport& c : r.controllers) {
    std::cout << std::left << std::setw(14) << to_string(c.controller) << std::right << std::setw(7)
              << c.compliant_runs << "/" << std::setw(3) << c.total_runs << std::setw(10) << c.diverged_runs
              << std::setw(16) << std::setprecision(8) << c.cost.mean << std::setw(14) << std::setprecision(4)
              << c.cost.stderr_ << "\n";
  }
}

int cmd_synth(const std::string& scenario_path, const std::string& mode_name, const std::string& out)
{
  const ScenarioConfig sc = load_scenario(scenario_path);
  const PreparedScenario p = prepare_scenario(sc);
  const SynthesisMode mode = mode_name.empty() ? sc.mode : synthesis_mode_from_string(mode_name);
  std::optional<TrajectoryDataset> data;
  if (mode == SynthesisMode::data_ce || mode == SynthesisMode::data_minvar) data = scenario_dataset(p, 0);
  const SynthesisResult r = synthesize(p, mode, data ? &*data : nullptr);
  std::cout << "mode " << to_string(mode) << ": " << to_string(r.status) << " (" << r.message << "), "
            << std::setprecision(3) << r.seconds << " s\n";
  if (r.status == SynthesisStatus::infeasible && r.infeasibility.present) {
    std::cout << "dual certificate margin " << r.infeasibility.margin << ", multiplier residual "
              << r.infeasibility.multiplier_residual << "\n";
  }
  if (!r.feasible()) return kExitInfeasible;
  const HullCertificate& cert = *r.certificate;
  const CertificateCheck check = verify_certificate(cert);
  std::cout << "mu:";
  for (double m : cert.mu) std::cout << " " << m;
  std::cout << "\nre-verification " << (check.ok ? "passed" : "FAILED") << " (psd " << check.max_psd_violation
            << ", equality " << check.max_equality_violation << ")\n";
  if (!out.empty()) {
    json j = certificate_to_json(cert);
    if (sc.state_scale.size() > 0) j["solve_coordinates"] = {{"state_scale", vector_to_json(sc.state_scale)}};
    write_json_file(out, j);
  }
  return check.ok ? kExitOk : kExitValidation;
}

int cmd_partition(const std::string& cert_path, const std::string& out, int support_samples)
{
  const HullCertificate cert = certificate_from_json(read_json_file(cert_path));
  PolicyBuildOptions opts;
  opts.support_samples = support_samples;
  const PartitionedPolicy policy = build_partitioned_policy(cert, opts);
  std::cout << policy.hull.vertices.size() << " hull vertices, " << policy.regions.size()
            << " regions, vertex reproduction error " << vertex_reproduction_error(policy) << "\n";
  json j = policy_to_json(policy);
  j["certificate"] = certificate_to_json(cert);
  write_json_file(out, j);
  return kExitOk;
}

SafetyBundle load_bundle(const std::string& path)
{
  const json j = read_json_file(path);
  if (!j.contains("certificate")) throw PolicyError("policy file carries no certificate; run 'hullguard partition'");
  SafetyBundle b{certificate_from_json(j.at("certificate")), policy_from_json(j)};
  if (b.policy.certificate_id != certificate_id(b.certificate)) {
    throw PolicyError("policy was built from a different certificate");
  }
  return b;
}

int cmd_simulate(const std::string& scenario_path, const std::string& policy_path,
                 const std::vector<std::string>& controllers, int runs, long long seed, int horizon, int threads,
                 const std::string& out, bool svg)
{
  ScenarioConfig sc = load_scenario(scenario_path);
  if (!controllers.empty()) {
    sc.controllers.clear();
    for (const auto& c : controllers) sc.controllers.push_back(controller_from_string(c));
  }
  if (runs > 0) sc.runs = runs;
  if (seed >= 0) sc.seed = static_cast<std::uint64_t>(seed);
  if (horizon > 0) sc.horizon = horizon;
  MonteCarloOptions opts;
  opts.threads = threads;
  if (!policy_path.empty()) opts.safe_bundle = load_bundle(policy_path);
  const MonteCarloReport r = run_monte_carlo(sc, opts);
  print_table(r);
  if (!out.empty()) {
    for (const auto& f : compliance_report({r}, out, svg).written) std::cout << "wrote " << f << "\n";
  }
  return kExitOk;
}

int cmd_report(const std::string& in, bool svg)
{
  const json summary = read_json_file((std::filesystem::path(in) / "summary.json").string());
  std::vector<MonteCarloReport> reports;
  for (json rj : summary.at("reports")) {
    rj["generated_at"] = summary.value("generated_at", std::string());
    reports.push_back(report_from_json(rj));
  }
  for (const auto& r : reports) print_table(r);
  for (const auto& f : compliance_report(reports, in, svg).written) std::cout << "wrote " << f << "\n";
  return kExitOk;
}

int cmd_dataset(const std::string& scenario_path, long long seed, const std::string& out)
{
  ScenarioConfig sc = load_scenario(scenario_path);
  if (seed >= 0) sc.data.seed = static_cast<std::uint64_t>(seed);
  sc.data.path.clear();
  sc.data.per_run = false;
  const PreparedScenario p = prepare_scenario(sc);
  TrajectoryDataset d = scenario_dataset(p, 0);
  d.X0 = p.T_inv * d.X0;
  d.X1 = p.T_inv * d.X1;
  if (d.W0) d.W0 = Eigen::MatrixXd(p.T_inv * *d.W0);
  const DataReport rep = validate_data_assumptions(d);
  std::cout << d.samples() << " samples, rank X0 = " << rep.rank_X0 << ", rank [U0; X0] = " << rep.rank_UX << "\n";
  write_json_file(out, dataset_to_json(d));
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv)
{
  CLI::App app{"hullguard: data-driven safe control with convex hulls of ellipsoids"};
  app.require_subcommand(1);

  std::string scenario, mode, out, cert, policy, in;
  std::vector<std::string> controllers;
  int runs = 0, horizon = 0, threads = 0, support_samples = 0;
  long long seed = -1;
  bool svg = false;

  auto* synth = app.add_subcommand("synth", "synthesize a hull certificate");
  synth->add_option("--scenario", scenario, "scenario JSON file or built-in name")->required();
  synth->add_option("--mode", mode, "openloop | model | ce | minvar | baseline (default: scenario mode)");
  synth->add_option("--out", out, "certificate JSON output");

  auto* partition = app.add_subcommand("partition", "build the partitioned safe policy of a certificate");
  partition->add_option("--cert", cert, "certificate JSON")->required();
  partition->add_option("--out", out, "policy JSON output")->required();
  partition->add_option("--support-samples", support_samples, "extra exposed hull points");

  auto* simulate = app.add_subcommand("simulate", "Monte Carlo runs of the selected controllers");
  simulate->add_option("--scenario", scenario, "scenario JSON file or built-in name")->required();
  simulate->add_option("--policy", policy, "policy JSON from 'partition' (replaces on-the-fly synthesis)");
  simulate->add_option("--controller", controllers, "optimal | safe | safe_optimal | ce_safe | ce (repeatable)");
  simulate->add_option("--runs", runs, "realizations (default: scenario)");
  simulate->add_option("--seed", seed, "noise seed (default: scenario)");
  simulate->add_option("--horizon", horizon, "steps per run (default: scenario)");
  simulate->add_option("--threads", threads, "worker threads, 0 = all cores");
  simulate->add_option("--out", out, "report directory");
  simulate->add_flag("--svg", svg, "also write the SVG figure (two-dimensional scenarios)");

  auto* report = app.add_subcommand("report", "rewrite report files from a summary");
  report->add_option("--in", in, "report directory holding summary.json")->required();
  report->add_flag("--svg", svg, "write the SVG figure");

  auto* dataset = app.add_subcommand("dataset", "collect one excitation dataset of a scenario");
  dataset->add_option("--scenario", scenario, "scenario JSON file or built-in name")->required();
  dataset->add_option("--seed", seed, "data seed (default: scenario)");
  dataset->add_option("--out", out, "dataset JSON output")->required();

  auto* scenarios = app.add_subcommand("scenario", "print a built-in scenario as JSON");
  std::string name;
  scenarios->add_option("name", name, "built-in scenario name")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (synth->parsed()) return cmd_synth(scenario, mode, out);
    if (partition->parsed()) return cmd_partition(cert, out, support_samples);
    if (simulate->parsed()) {
      return cmd_simulate(scenario, policy, controllers, runs, seed, horizon, threads, out, svg);
    }
    if (report->parsed()) return cmd_report(in, svg);
    if (dataset->parsed()) return cmd_dataset(scenario, seed, out);
    if (scenarios->parsed()) {
      std::cout << scenario_to_json(builtin_scenario(name)).dump(2) << "\n";
      return kExitOk;
    }
  } catch (const ScenarioSynthesisError& e) {
    std::cerr << "error: " << e.what() << "\n" << e.report().dump(2) << "\n";
    return kExitInfeasible;
  } catch (const std::invalid_argument& e) {
    std::cerr << "validation error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const json::exception& e) {
    std::cerr << "validation error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return kExitOk;
}
