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

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <ctime>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <mutex>
#include <numbers>
#include <sstream>
#include <thread>

namespace hullguard {

namespace {

// ---------------------------------------------------------------------------------------------
// Small utilities

template <typename Fn>
void parallel_for(int count, int threads, Fn&& fn)
{
  if (threads <= 0) threads = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  threads = std::min(threads, std::max(1, count));
  std::atomic<int> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto worker = [&] {
    for (;;) {
      const int i = next++;
      if (i >= count) return;
      try {
        fn(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!error) error = std::current_exception();
        next = count;
        return;
      }
    }
  };
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  if (error) std::rethrow_exception(error);
}

std::string utc_timestamp()
{
  const std::time_t now = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&now, &tm);
  std::ostringstream os;
  os << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return os.str();
}

Eigen::MatrixXd diag_matrix(std::initializer_list<double> values)
{
  Eigen::VectorXd d(static_cast<Eigen::Index>(values.size()));
  Eigen::Index i = 0;
  for (double v : values) d(i++) = v;
  return d.asDiagonal();
}

json synthesis_summary(const SynthesisResult& r)
{
  json j;
  j["status"] = to_string(r.status);
  j["message"] = r.message;
  if (r.feasible()) {
    const HullCertificate& c = *r.certificate;
    const CertificateCheck check = verify_certificate(c);
    j["mode"] = to_string(c.mode);
    j["mu"] = c.mu;
    j["tau"] = c.tau;
    j["verified"] = check.ok;
    j["max_psd_violation"] = check.max_psd_violation;
    j["max_equality_violation"] = check.max_equality_violation;
    j["id"] = certificate_id(c);
  }
  if (r.infeasibility.present) j["infeasibility_margin"] = r.infeasibility.margin;
  return j;
}

bool needs_data(SynthesisMode mode) { return mode == SynthesisMode::data_ce || mode == SynthesisMode::data_minvar; }

// ---------------------------------------------------------------------------------------------
// Scenario JSON

void apply_synthesis_json(const json& j, ScenarioConfig& s)
{
  SynthesisConfig& c = s.synthesis;
  if (j.contains("mode")) s.mode = synthesis_mode_from_string(j.at("mode").get<std::string>());
  c.lambda = j.value("lambda", c.lambda);
  c.delta = j.value("delta", c.delta);
  c.n_v = j.value("n_v", c.n_v);
  if (j.contains("directions")) c.directions = vectors_from_json(j.at("directions"));
  if (j.contains("tau_grid")) c.tau_grid = j.at("tau_grid").get<std::vector<double>>();
  c.refine_tau = j.value("refine_tau", c.refine_tau);
  c.margin_scale = j.value("margin_scale", c.margin_scale);
  c.ce_noise_measured = j.value("ce_noise_measured", c.ce_noise_measured);
  if (j.contains("direction_rule")) {
    const std::string rule = j.at("direction_rule").get<std::string>();
    if (rule == "spaced") {
      c.direction_rule = DirectionRule::spaced;
    } else if (rule == "vertices") {
      c.direction_rule = DirectionRule::vertices;
    } else {
      throw ScenarioError("unknown direction_rule '" + rule + "'");
    }
  }
}

}  // namespace

// -------------------------------------------------------------------------------------------------
// Controllers

std::string to_string(ControllerKind kind)
{
  switch (kind) {
    case ControllerKind::optimal: return "optimal";
    case ControllerKind::safe: return "safe";
    case ControllerKind::safe_optimal: return "safe_optimal";
    case ControllerKind::ce_safe: return "ce_safe";
    case ControllerKind::ce: return "ce";
  }
  return "unknown";
}

ControllerKind controller_from_string(const std::string& name)
{
  if (name == "optimal") return ControllerKind::optimal;
  if (name == "safe") return ControllerKind::safe;
  if (name == "safe_optimal") return ControllerKind::safe_optimal;
  if (name == "ce_safe") return ControllerKind::ce_safe;
  if (name == "ce") return ControllerKind::ce;
  throw ScenarioError("unknown controller '" + name + "'");
}

// -------------------------------------------------------------------------------------------------
// Scenario configuration

void ScenarioConfig::validate() const
{
  const Eigen::Index n = F.cols();
  if (n == 0 || F.rows() != g.size()) throw ScenarioError("admissible set needs F (q x n) and g (q)");
  if ((g.array() <= 0.0).any()) throw ScenarioError("admissible set needs g > 0");
  if (system.A.size() > 0) {
    try {
      system.validate();
    } catch (const std::invalid_argument& e) {
      throw ScenarioError(std::string("system: ") + e.what());
    }
    if (system.n() != n) throw ScenarioError("system and admissible set disagree on the state dimension");
  } else if (data.path.empty()) {
    throw ScenarioError("scenario needs a system (A, B, sigma) or a dataset path");
  }
  if (system.sigma.rows() != n || system.sigma.cols() != n) throw ScenarioError("sigma must be n x n");
  if (state_scale.size() != 0 && (state_scale.size() != n || (state_scale.array() <= 0.0).any())) {
    throw ScenarioError("state_scale must hold n positive entries");
  }
  if (runs < 1) throw ScenarioError("runs must be at least 1");
  if (horizon < 1) throw ScenarioError("horizon must be at least 1");
  if (data.N < 1) throw ScenarioError("data.N must be positive");
  if (data.x0 && data.x0->size() != n) throw ScenarioError("data.x0 has the wrong dimension");
  if (!(epsilon > 0.0 && epsilon < 1.0)) throw ScenarioError("risk epsilon must lie in (0, 1)");
  if (Q.size() > 0 && (Q.rows() != n || Q.cols() != n)) throw ScenarioError("lqr.Q must be n x n");
  const Eigen::Index m = system.B.cols();
  if (R.size() > 0 && (R.rows() != m || R.cols() != m)) throw ScenarioError("lqr.R must be m x m");
  if (x0.point) {
    if (x0.point->size() != n) throw ScenarioError("x0 has the wrong dimension");
  } else if (x0.direction.size() != n || x0.direction.norm() == 0.0 || !(x0.hull_fraction > 0.0)) {
    throw ScenarioError("x0 needs a point or a nonzero direction with a positive hull_fraction");
  }
  if (b_nominal.size() > 0 && (b_nominal.rows() != n || b_nominal.cols() != m)) {
    throw ScenarioError("b_prior.B_n must be n x m");
  }
  if (delta_b.size() > 0 && (delta_b.rows() != n || delta_b.cols() != m)) {
    throw ScenarioError("b_prior.Delta_B must be n x m");
  }
  if (data.per_run && !data.path.empty()) throw ScenarioError("per_run datasets cannot come from a file");
}

std::vector<std::string> builtin_scenario_names()
{
  return {"numeric2d", "numeric2d_low", "numeric2d_high", "numeric2d_cmp3", "numeric2d_ce", "lanekeep4d"};
}

ScenarioConfig builtin_scenario(const std::string& name)
{
  ScenarioConfig s;
  s.name = name;
  if (name.rfind("numeric2d", 0) == 0) {
    double sigma = 0.01;
    if (name == "numeric2d_low" || name == "numeric2d_ce") sigma = 0.0005;
    if (name == "numeric2d_high" || name == "numeric2d_cmp3") sigma = 0.03;
    s.system = numeric2d_system(sigma);
    std::tie(s.F, s.g) = numeric2d_admissible();
    s.mode = SynthesisMode::data_minvar;
    s.synthesis.lambda = 0.8;
    s.synthesis.delta = 0.1;
    s.synthesis.n_v = 3;
    s.data.N = 12;
    s.data.amplitude = 5.0;
    s.data.x0 = Eigen::Vector2d(3.0, 0.0);
    s.data.seed = 1;
    s.Q = diag_matrix({100.0, 0.01});
    s.R = Eigen::MatrixXd::Constant(1, 1, 50.0);
    s.x0.point = Eigen::Vector2d(3.0, -3.0);
    s.controllers = {ControllerKind::optimal, ControllerKind::safe, ControllerKind::safe_optimal};
    if (name == "numeric2d_cmp3") {
      s.x0.point = Eigen::Vector2d(3.30, -1.25);
      s.controllers = {ControllerKind::ce_safe, ControllerKind::safe_optimal};
    } else if (name == "numeric2d_ce") {
      s.data.N = 4;
      s.data.amplitude = 3.0;
      s.data.per_run = true;
      s.synthesis.ce_noise_measured = false;
      s.x0.point.reset();
      s.x0.direction = Eigen::Vector2d(1.0, -1.0);
      s.x0.hull_fraction = 0.95;
      s.controllers = {ControllerKind::ce, ControllerKind::safe};
    } else if (name != "numeric2d" && name != "numeric2d_low" && name != "numeric2d_high") {
      throw ScenarioError("unknown built-in scenario '" + name + "'");
    }
    return s;
  }
  if (name == "lanekeep4d") {
    const double y_max = 1.5, v_max = 8.0, phi_max = 1.0, psi_max = 10.0;
    s.system = lanekeep_system(0.01, 0.0005);
    std::tie(s.F, s.g) = lanekeep_admissible(y_max, v_max, phi_max, psi_max);
    s.state_scale = Eigen::Vector4d(y_max, v_max, phi_max, psi_max);
    s.mode = SynthesisMode::data_minvar;
    s.synthesis.lambda = 0.84;
    s.synthesis.delta = 0.1;
    s.synthesis.n_v = 4;
    s.synthesis.margin_scale = 1e-6;
    const double h = std::sqrt(0.5);
    s.synthesis.directions = {Eigen::Vector4d(1, 0, 0, 0), Eigen::Vector4d(0, 1, 0, 0), Eigen::Vector4d(h, h, 0, 0),
                              Eigen::Vector4d(h, -h, 0, 0)};
    s.data.N = 12;
    s.data.amplitude = 1.0;
    s.data.seed = 1;
    s.Q = diag_matrix({1.0, 0.01, 0.01, 0.01});
    s.R = Eigen::MatrixXd::Constant(1, 1, 1000.0);
    s.x0.direction = Eigen::Vector4d(1, 0, 0, 0);
    s.x0.hull_fraction = 0.9;
    s.controllers = {ControllerKind::optimal, ControllerKind::safe, ControllerKind::safe_optimal};
    return s;
  }
  throw ScenarioError("unknown built-in scenario '" + name + "'");
}

ScenarioConfig scenario_from_json(const json& j)
{
  try {
    ScenarioConfig s;
    if (j.contains("extends")) s = builtin_scenario(j.at("extends").get<std::string>());
    s.name = j.value("name", s.name);
    if (j.contains("system")) {
      const json& sys = j.at("system");
      if (sys.contains("A")) s.system.A = matrix_from_json(sys.at("A"));
      if (sys.contains("B")) s.system.B = matrix_from_json(sys.at("B"));
      if (sys.contains("sigma")) {
        const json& sg = sys.at("sigma");
        if (sg.is_number()) {
          const Eigen::Index n = s.system.A.size() > 0 ? s.system.A.rows() : s.F.cols();
          s.system.sigma = sg.get<double>() * Eigen::MatrixXd::Identity(n, n);
        } else {
          s.system.sigma = matrix_from_json(sg);
        }
      }
    }
    if (j.contains("admissible")) {
      s.F = matrix_from_json(j.at("admissible").at("F"));
      s.g = vector_from_json(j.at("admissible").at("g"));
    }
    if (j.contains("state_scale")) s.state_scale = vector_from_json(j.at("state_scale"));
    if (j.contains("data")) {
      const json& d = j.at("data");
      s.data.N = d.value("N", s.data.N);
      s.data.amplitude = d.value("amplitude", s.data.amplitude);
      if (d.contains("x0")) {
        if (d.at("x0").is_null()) {
          s.data.x0.reset();
        } else {
          s.data.x0 = vector_from_json(d.at("x0"));
        }
      }
      s.data.seed = d.value("seed", s.data.seed);
      s.data.per_run = d.value("per_run", s.data.per_run);
      s.data.path = d.value("path", s.data.path);
    }
    if (j.contains("synthesis")) apply_synthesis_json(j.at("synthesis"), s);
    if (j.contains("risk")) s.epsilon = j.at("risk").value("epsilon", s.epsilon);
    if (j.contains("b_prior")) {
      const json& b = j.at("b_prior");
      if (b.contains("B_n")) s.b_nominal = matrix_from_json(b.at("B_n"));
      if (b.contains("Delta_B")) s.delta_b = matrix_from_json(b.at("Delta_B"));
    }
    if (j.contains("lqr")) {
      const json& l = j.at("lqr");
      if (l.contains("Q")) s.Q = matrix_from_json(l.at("Q"));
      if (l.contains("R")) s.R = matrix_from_json(l.at("R"));
    }
    if (j.contains("x0")) {
      const json& x = j.at("x0");
      if (x.is_array()) {
        s.x0.point = vector_from_json(x);
      } else {
        s.x0.point.reset();
        s.x0.direction = vector_from_json(x.at("direction"));
        s.x0.hull_fraction = x.value("hull_fraction", s.x0.hull_fraction);
      }
    }
    s.horizon = j.value("horizon", s.horizon);
    s.runs = j.value("runs", s.runs);
    s.seed = j.value("seed", s.seed);
    if (j.contains("controllers")) {
      s.controllers.clear();
      for (const auto& c : j.at("controllers")) s.controllers.push_back(controller_from_string(c.get<std::string>()));
    }
    if (j.contains("policy")) s.support_samples = j.at("policy").value("support_samples", s.support_samples);
    if (s.system.sigma.size() == 0 && s.F.cols() > 0) s.system.sigma = Eigen::MatrixXd::Zero(s.F.cols(), s.F.cols());
    s.validate();
    return s;
  } catch (const json::exception& e) {
    throw ScenarioError(std::string("scenario JSON: ") + e.what());
  } catch (const SynthesisError& e) {
    throw ScenarioError(std::string("scenario JSON: ") + e.what());
  }
}

json scenario_to_json(const ScenarioConfig& s)
{
  json j;
  j["name"] = s.name;
  json sys;
  if (s.system.A.size() > 0) {
    sys["A"] = matrix_to_json(s.system.A);
    sys["B"] = matrix_to_json(s.system.B);
  }
  sys["sigma"] = matrix_to_json(s.system.sigma);
  j["system"] = sys;
  j["admissible"] = {{"F", matrix_to_json(s.F)}, {"g", vector_to_json(s.g)}};
  if (s.state_scale.size() > 0) j["state_scale"] = vector_to_json(s.state_scale);
  json d = {{"N", s.data.N}, {"amplitude", s.data.amplitude}, {"seed", s.data.seed}, {"per_run", s.data.per_run}};
  d["x0"] = s.data.x0 ? vector_to_json(*s.data.x0) : json(nullptr);
  if (!s.data.path.empty()) d["path"] = s.data.path;
  j["data"] = d;
  json syn = {{"mode", to_string(s.mode)},
              {"lambda", s.synthesis.lambda},
              {"delta", s.synthesis.delta},
              {"n_v", s.synthesis.n_v},
              {"margin_scale", s.synthesis.margin_scale},
              {"ce_noise_measured", s.synthesis.ce_noise_measured},
              {"refine_tau", s.synthesis.refine_tau},
              {"direction_rule", s.synthesis.direction_rule == DirectionRule::spaced ? "spaced" : "vertices"}};
  if (!s.synthesis.directions.empty()) syn["directions"] = vectors_to_json(s.synthesis.directions);
  if (!s.synthesis.tau_grid.empty()) syn["tau_grid"] = s.synthesis.tau_grid;
  j["synthesis"] = syn;
  j["risk"] = {{"epsilon", s.epsilon}};
  json b = json::object();
  if (s.b_nominal.size() > 0) b["B_n"] = matrix_to_json(s.b_nominal);
  if (s.delta_b.size() > 0) b["Delta_B"] = matrix_to_json(s.delta_b);
  j["b_prior"] = b;
  json l = json::object();
  if (s.Q.size() > 0) l["Q"] = matrix_to_json(s.Q);
  if (s.R.size() > 0) l["R"] = matrix_to_json(s.R);
  j["lqr"] = l;
  if (s.x0.point) {
    j["x0"] = vector_to_json(*s.x0.point);
  } else {
    j["x0"] = {{"direction", vector_to_json(s.x0.direction)}, {"hull_fraction", s.x0.hull_fraction}};
  }
  j["horizon"] = s.horizon;
  j["runs"] = s.runs;
  j["seed"] = s.seed;
  json cs = json::array();
  for (ControllerKind c : s.controllers) cs.push_back(to_string(c));
  j["controllers"] = cs;
  j["policy"] = {{"support_samples", s.support_samples}};
  return j;
}

ScenarioConfig load_scenario(const std::string& path_or_builtin)
{
  const auto names = builtin_scenario_names();
  if (std::find(names.begin(), names.end(), path_or_builtin) != names.end() &&
      !std::filesystem::exists(path_or_builtin)) {
    ScenarioConfig s = builtin_scenario(path_or_builtin);
    s.validate();
    return s;
  }
  if (!std::filesystem::exists(path_or_builtin)) {
    throw ScenarioError("scenario '" + path_or_builtin + "' is neither a file nor a built-in name");
  }
  json j;
  try {
    j = read_json_file(path_or_builtin);
  } catch (const std::runtime_error& e) {
    throw ScenarioError(e.what());
  }
  return scenario_from_json(j);
}

// -------------------------------------------------------------------------------------------------
// Preparation and synthesis

PreparedScenario prepare_scenario(const ScenarioConfig& config)
{
  config.validate();
  PreparedScenario p;
  p.config = config;
  const Eigen::Index n = config.F.cols();
  if (config.state_scale.size() == n) {
    p.T = config.state_scale.cwiseInverse().asDiagonal();
    p.T_inv = config.state_scale.asDiagonal();
  } else {
    p.T = Eigen::MatrixXd::Identity(n, n);
    p.T_inv = Eigen::MatrixXd::Identity(n, n);
  }
  p.admissible = PolyhedralSetd(config.F * p.T_inv, config.g);
  p.plant.sigma = p.T * config.system.sigma * p.T.transpose();
  if (config.system.A.size() > 0) {
    p.plant.A = p.T * config.system.A * p.T_inv;
    p.plant.B = p.T * config.system.B;
    p.Q = config.Q.size() > 0 ? Eigen::MatrixXd(p.T_inv.transpose() * config.Q * p.T_inv)
                              : Eigen::MatrixXd::Identity(n, n);
    p.R = config.R.size() > 0 ? config.R : Eigen::MatrixXd::Identity(p.plant.B.cols(), p.plant.B.cols());
    try {
      p.lqr = lqr_riccati(p.plant.A, p.plant.B, p.Q, p.R);
    } catch (const std::runtime_error& e) {
      p.lqr_error = e.what();
    }
    p.b_prior.B_n = config.b_nominal.size() > 0 ? Eigen::MatrixXd(p.T * config.b_nominal) : p.plant.B;
    p.b_prior.Delta_B = config.delta_b.size() > 0 ? Eigen::MatrixXd(p.T * config.delta_b)
                                                    : Eigen::MatrixXd::Zero(n, p.plant.B.cols());
  }
  return p;
}

json dataset_to_json(const TrajectoryDataset& d)
{
  json j = {{"format", "hullguard-dataset/1"},
            {"X0", matrix_to_json(d.X0)},
            {"U0", matrix_to_json(d.U0)},
            {"X1", matrix_to_json(d.X1)},
            {"seed", d.seed}};
  if (d.W0) j["W0"] = matrix_to_json(*d.W0);
  return j;
}

TrajectoryDataset dataset_from_json(const json& j)
{
  if (j.value("format", std::string()) != "hullguard-dataset/1") throw ScenarioError("not a hullguard dataset");
  TrajectoryDataset d;
  d.X0 = matrix_from_json(j.at("X0"));
  d.U0 = matrix_from_json(j.at("U0"));
  d.X1 = matrix_from_json(j.at("X1"));
  if (j.contains("W0")) d.W0 = matrix_from_json(j.at("W0"));
  d.seed = j.value("seed", std::uint64_t{0});
  if (d.U0.cols() != d.X0.cols() || d.X1.cols() != d.X0.cols() || d.X1.rows() != d.X0.rows()) {
    throw ScenarioError("dataset matrices have inconsistent shapes");
  }
  d.assumption4_ok = validate_data_assumptions(d).assumption4_ok;
  return d;
}

TrajectoryDataset scenario_dataset(const PreparedScenario& scenario, std::uint64_t stream)
{
  const ScenarioConfig& c = scenario.config;
  TrajectoryDataset d;
  if (!c.data.path.empty()) {
    d = dataset_from_json(read_json_file(c.data.path));
    if (d.n() != c.F.cols()) throw ScenarioError("dataset state dimension differs from the scenario");
    d.X0 = scenario.T * d.X0;
    d.X1 = scenario.T * d.X1;
    if (d.W0) d.W0 = Eigen::MatrixXd(scenario.T * *d.W0);
    return d;
  }
  if (c.system.A.size() == 0) throw ScenarioError("no plant to collect data from");
  Excitation ex;
  ex.amplitude = c.data.amplitude;
  if (c.data.x0) ex.x0 = Eigen::VectorXd(scenario.T * *c.data.x0);
  const std::uint64_t seed = c.data.per_run ? derive_seed(c.data.seed, stream) : c.data.seed;
  return collect_dataset(scenario.plant, ex, c.data.N, seed, true);
}

SynthesisResult synthesize(const PreparedScenario& scenario, SynthesisMode mode, const TrajectoryDataset* data)
{
  const SynthesisConfig& cfg = scenario.config.synthesis;
  const bool has_model = scenario.plant.A.size() > 0;
  if (!needs_data(mode) && !has_model) throw ScenarioError("mode " + to_string(mode) + " needs A and B");
  if (needs_data(mode) && data == nullptr) throw ScenarioError("mode " + to_string(mode) + " needs a dataset");
  switch (mode) {
    case SynthesisMode::open_loop: return synth_open_loop(scenario.plant.A, scenario.admissible, cfg);
    case SynthesisMode::model_csie:
      return synth_model_based(scenario.plant.A, scenario.plant.B, scenario.admissible, cfg);
    case SynthesisMode::single_baseline:
      return synth_single_baseline(scenario.plant.A, scenario.plant.B, scenario.admissible, cfg);
    case SynthesisMode::data_ce: return synth_data_ce(*data, scenario.admissible, cfg);
    case SynthesisMode::data_minvar: return synth_data_minvar(*data, scenario.plant.sigma, scenario.admissible, cfg);
  }
  throw ScenarioError("unknown synthesis mode");
}

SafetyBundle make_bundle(const PreparedScenario& scenario, const HullCertificate& cert)
{
  PolicyBuildOptions opts;
  opts.support_samples = scenario.config.support_samples;
  return SafetyBundle{cert, build_partitioned_policy(cert, opts)};
}

// -------------------------------------------------------------------------------------------------
// Cost

CostEstimate estimate_cost(const std::vector<Trajectory>& traces, const Eigen::MatrixXd& Q, const Eigen::MatrixXd& R,
                           int horizon, const Eigen::MatrixXd& tail_P)
{
  CostEstimate est;
  std::vector<double> costs;
  std::vector<double> tails;
  for (const Trajectory& tr : traces) {
    if (tr.diverged) {
      ++est.excluded;
      continue;
    }
    double cost = 0.0;
    const std::size_t states = std::min<std::size_t>(tr.states.size(), static_cast<std::size_t>(horizon) + 1);
    const std::size_t inputs = std::min<std::size_t>(tr.inputs.size(), static_cast<std::size_t>(horizon));
    for (std::size_t t = 0; t < states; ++t) cost += tr.states[t].dot(Q * tr.states[t]);
    for (std::size_t t = 0; t < inputs; ++t) cost += tr.inputs[t].dot(R * tr.inputs[t]);
    if (!std::isfinite(cost)) {
      ++est.excluded;
      continue;
    }
    costs.push_back(cost);
    if (tail_P.size() > 0 && states > 0) tails.push_back(tr.states[states - 1].dot(tail_P * tr.states[states - 1]));
  }
  est.included = static_cast<int>(costs.size());
  if (costs.empty()) return est;
  double sum = 0.0;
  for (double c : costs) sum += c;
  est.mean = sum / costs.size();
  if (costs.size() > 1) {
    double ss = 0.0;
    for (double c : costs) ss += (c - est.mean) * (c - est.mean);
    est.stderr_ = std::sqrt(ss / (costs.size() - 1) / costs.size());
  }
  if (!tails.empty()) {
    double t = 0.0;
    for (double v : tails) t += v;
    est.tail_mean = t / tails.size();
  }
  return est;
}

// -------------------------------------------------------------------------------------------------
// Monte Carlo

namespace {

struct RunBundles
{
  std::optional<SafetyBundle> safe;
  std::optional<SafetyBundle> ce;
  std::optional<Supervisor> safe_supervisor;
  std::optional<Supervisor> ce_supervisor;
};

constexpr int kPerRunAttempts = 5;

bool uses_safe(ControllerKind k) { return k == ControllerKind::safe || k == ControllerKind::safe_optimal; }
bool uses_ce(ControllerKind k) { return k == ControllerKind::ce || k == ControllerKind::ce_safe; }

SafetyBundle synthesize_bundle(const PreparedScenario& p, SynthesisMode mode, const TrajectoryDataset* data,
                               json& summary)
{
  SynthesisResult r = synthesize(p, mode, data);
  summary = synthesis_summary(r);
  if (!r.feasible()) {
    throw ScenarioSynthesisError("synthesis (" + to_string(mode) + ") returned " + to_string(r.status) + ": " +
                                     r.message,
                                 summary);
  }
  return make_bundle(p, *r.certificate);
}

double hull_radius(const PartitionedPolicy& policy, const Eigen::VectorXd& direction_z)
{
  const double gauge = policy.hull.as_set().gauge(direction_z);
  if (!(gauge > 0.0)) throw ScenarioError("hull is unbounded along the x0 direction");
  return 1.0 / gauge;
}

}  // namespace

MonteCarloReport run_monte_carlo(const ScenarioConfig& scenario, const MonteCarloOptions& options)
{
  if (scenario.controllers.empty()) throw ScenarioError("no controllers selected");
  const PreparedScenario p = prepare_scenario(scenario);
  if (p.plant.A.size() == 0) throw ScenarioError("Monte Carlo runs need a plant model (A, B)");
  const ScenarioConfig& c = p.config;
  const int runs = c.runs;
  const bool need_safe = std::any_of(c.controllers.begin(), c.controllers.end(), uses_safe);
  const bool need_ce = std::any_of(c.controllers.begin(), c.controllers.end(), uses_ce);
  const bool need_lqr = std::any_of(c.controllers.begin(), c.controllers.end(), [](ControllerKind k) {
    return k == ControllerKind::optimal || k == ControllerKind::safe_optimal || k == ControllerKind::ce_safe;
  });

  MonteCarloReport report;
  report.scenario = c.name;
  report.generated_at = utc_timestamp();
  report.horizon = c.horizon;
  report.runs = runs;
  report.seed = c.seed;
  report.F = c.F;
  report.g = c.g;
  report.certificates = json::object();

  if (need_lqr && !p.lqr) throw ScenarioError("LQR design failed: " + p.lqr_error);

  // Certificates: one shared set, or one set per realization.
  const int sets = c.data.per_run ? runs : 1;
  std::vector<RunBundles> bundles(sets);
  std::vector<json> safe_summary(sets), ce_summary(sets);
  const bool need_data = (need_safe && !options.safe_bundle && needs_data(c.mode)) || need_ce;
  std::vector<int> resampled(sets, 0);
  parallel_for(sets, c.data.per_run ? options.threads : 1, [&](int k) {
    // A per-run experiment collects fresh data when synthesis fails on its dataset, as an
    // operator would; the number of extra collections is reported.
    const int attempts = c.data.per_run ? kPerRunAttempts : 1;
    for (int a = 0;; ++a) {
      try {
        std::optional<TrajectoryDataset> data;
        const auto stream = static_cast<std::uint64_t>(k) + static_cast<std::uint64_t>(a) * sets;
        if (need_data) data = scenario_dataset(p, stream);
        if (need_safe) {
          if (options.safe_bundle) {
            bundles[k].safe = options.safe_bundle;
            safe_summary[k] = {{"status", "provided"}, {"id", options.safe_bundle->policy.certificate_id}};
          } else {
            bundles[k].safe = synthesize_bundle(p, c.mode, data ? &*data : nullptr, safe_summary[k]);
          }
        }
        if (need_ce) bundles[k].ce = synthesize_bundle(p, SynthesisMode::data_ce, &*data, ce_summary[k]);
        resampled[k] = a;
        return;
      } catch (const ScenarioSynthesisError&) {
        if (a + 1 >= attempts) throw;
      }
    }
  });
  auto summarize = [&](const std::vector<json>& s) {
    if (sets == 1) return s.front();
    json out = {{"sets", sets}};
    int verified = 0;
    int extra = 0;
    for (const json& x : s) verified += x.value("verified", false) ? 1 : 0;
    for (int r : resampled) extra += r;
    out["verified"] = verified;
    out["resampled_datasets"] = extra;
    out["first"] = s.front();
    return out;
  };
  if (need_safe) report.certificates["safe"] = summarize(safe_summary);
  if (need_ce) report.certificates["ce"] = summarize(ce_summary);
  if (options.keep_certificates) {
    for (const RunBundles& b : bundles) {
      if (b.safe && !options.safe_bundle) report.synthesized.push_back(b.safe->certificate);
      if (b.ce) report.synthesized.push_back(b.ce->certificate);
    }
  }

  for (RunBundles& b : bundles) {
    // An empty kappa_s selects the uniform split over the hull rows of each certificate.
    auto make_supervisor = [&](const SafetyBundle& sb) {
      RiskAllocation r;
      r.epsilon = c.epsilon;
      return Supervisor(sb.certificate, sb.policy, p.plant.sigma, p.b_prior, r);
    };
    if (b.safe) b.safe_supervisor.emplace(make_supervisor(*b.safe));
    if (b.ce) b.ce_supervisor.emplace(make_supervisor(*b.ce));
  }

  // Initial state in solve coordinates, one per certificate set: a hull fraction refers to the
  // smallest hull radius among the certificates the controllers of that set use.
  std::vector<Eigen::VectorXd> x0_z(sets);
  for (int k = 0; k < sets; ++k) {
    if (c.x0.point) {
      x0_z[k] = p.T * *c.x0.point;
      continue;
    }
    const Eigen::VectorXd d = p.T * c.x0.direction.normalized();
    double radius = std::numeric_limits<double>::infinity();
    if (bundles[k].safe) radius = std::min(radius, hull_radius(bundles[k].safe->policy, d));
    if (bundles[k].ce) radius = std::min(radius, hull_radius(bundles[k].ce->policy, d));
    if (!std::isfinite(radius)) throw ScenarioError("x0 from a hull fraction needs a safe or ce controller");
    x0_z[k] = c.x0.hull_fraction * radius * d;
  }
  report.x0 = p.T_inv * x0_z.front();

  if (bundles.front().safe) {
    HullDrawing drawing;
    for (const auto& P : bundles.front().safe->certificate.P) drawing.ellipsoids.push_back(p.T_inv * P * p.T_inv.transpose());
    for (const auto& v : bundles.front().safe->policy.hull.vertices) drawing.hull_vertices.push_back(p.T_inv * v);
    report.hull = drawing;
  }

  const Eigen::Index n = c.F.cols();
  const PolyhedralSetd& S = p.admissible;
  for (ControllerKind kind : c.controllers) {
    ControllerReport cr;
    cr.controller = kind;
    cr.total_runs = runs;
    cr.runs.resize(runs);
    std::vector<Trajectory> traces(runs);
    parallel_for(runs, options.threads, [&](int run) {
      const RunBundles& b = bundles[c.data.per_run ? run : 0];
      RunRecord rec;
      rec.run = run;
      StatePolicy policy;
      auto supervised = [&](const Supervisor& sup) {
        return [&sup, &p, &rec](const Eigen::VectorXd& x, int) {
          const SupervisionOutcome o = sup.supervise(x, p.lqr->control(x));
          switch (o.mode) {
            case SupervisionMode::rl_pass: ++rec.rl_pass; break;
            case SupervisionMode::interpolated: ++rec.interpolated; break;
            case SupervisionMode::safe_fallback: ++rec.fallback; break;
          }
          return o.u_applied;
        };
      };
      switch (kind) {
        case ControllerKind::optimal:
          policy = [&p](const Eigen::VectorXd& x, int) { return p.lqr->control(x); };
          break;
        case ControllerKind::safe:
          policy = [&b](const Eigen::VectorXd& x, int) { return fallback_control(b.safe->policy, x); };
          break;
        case ControllerKind::ce:
          policy = [&b](const Eigen::VectorXd& x, int) { return fallback_control(b.ce->policy, x); };
          break;
        case ControllerKind::safe_optimal: policy = supervised(*b.safe_supervisor); break;
        case ControllerKind::ce_safe: policy = supervised(*b.ce_supervisor); break;
      }
      Trajectory tr = simulate_trajectory(p.plant, x0_z[c.data.per_run ? run : 0], policy, c.horizon, derive_seed(c.seed, run));
      rec.diverged = tr.diverged;
      for (std::size_t t = 0; t < tr.states.size(); ++t) {
        const double gauge = S.gauge(tr.states[t]);
        rec.max_gauge = std::max(rec.max_gauge, gauge);
        if (!S.contains(tr.states[t]) && rec.first_violation < 0) rec.first_violation = static_cast<int>(t);
      }
      rec.compliant = !rec.diverged && rec.first_violation < 0;
      traces[run] = std::move(tr);
      cr.runs[run] = rec;
    });

    cr.violation_timeline.assign(c.horizon + 1, 0);
    cr.envelope_min = Eigen::MatrixXd::Constant(n, c.horizon + 1, std::numeric_limits<double>::infinity());
    cr.envelope_max = Eigen::MatrixXd::Constant(n, c.horizon + 1, -std::numeric_limits<double>::infinity());
    for (int run = 0; run < runs; ++run) {
      RunRecord& rec = cr.runs[run];
      const Trajectory& tr = traces[run];
      const double cost = estimate_cost({tr}, p.Q, p.R, c.horizon).mean;
      rec.cost = tr.diverged ? std::numeric_limits<double>::quiet_NaN() : cost;
      cr.compliant_runs += rec.compliant ? 1 : 0;
      cr.diverged_runs += rec.diverged ? 1 : 0;
      for (std::size_t t = 0; t < tr.states.size() && t <= static_cast<std::size_t>(c.horizon); ++t) {
        const Eigen::VectorXd x = p.T_inv * tr.states[t];
        if (!S.contains(tr.states[t])) ++cr.violation_timeline[t];
        cr.envelope_min.col(t) = cr.envelope_min.col(t).cwiseMin(x);
        cr.envelope_max.col(t) = cr.envelope_max.col(t).cwiseMax(x);
      }
      if (run < options.keep_traces) {
        std::vector<Eigen::VectorXd> phys;
        for (const auto& z : tr.states) phys.push_back(p.T_inv * z);
        cr.traces.push_back(std::move(phys));
      }
    }
    cr.cost = estimate_cost(traces, p.Q, p.R, c.horizon, p.lqr ? p.lqr->P : Eigen::MatrixXd());
    report.controllers.push_back(std::move(cr));
  }
  return report;
}

// -------------------------------------------------------------------------------------------------
// Report serialization

namespace {

json finite_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

double number_or_nan(const json& j) { return j.is_null() ? std::numeric_limits<double>::quiet_NaN() : j.get<double>(); }

json envelope_to_json(const Eigen::MatrixXd& m)
{
  json rows = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(finite_or_null(m(r, c)));
    rows.push_back(row);
  }
  return rows;
}

Eigen::MatrixXd envelope_from_json(const json& j)
{
  if (j.empty()) return {};
  Eigen::MatrixXd m(static_cast<Eigen::Index>(j.size()), static_cast<Eigen::Index>(j.at(0).size()));
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = number_or_nan(j.at(r).at(c));
  return m;
}

}  // namespace

json report_to_json(const MonteCarloReport& r)
{
  json j;
  j["format"] = "hullguard-report/1";
  j["generated_at"] = r.generated_at;
  j["scenario"] = r.scenario;
  j["horizon"] = r.horizon;
  j["runs"] = r.runs;
  j["seed"] = r.seed;
  j["cost_definition"] = "sum_{t=0..H} x'Qx + sum_{t=0..H-1} u'Ru per run, H = horizon; tail_mean = mean x_H' P_lqr x_H";
  j["x0"] = vector_to_json(r.x0);
  j["admissible"] = {{"F", matrix_to_json(r.F)}, {"g", vector_to_json(r.g)}};
  if (r.hull) {
    j["hull"] = {{"ellipsoids", matrices_to_json(r.hull->ellipsoids)},
                 {"vertices", vectors_to_json(r.hull->hull_vertices)}};
  }
  j["certificates"] = r.certificates;
  json cs = json::array();
  for (const ControllerReport& c : r.controllers) {
    json cj;
    cj["controller"] = to_string(c.controller);
    cj["total_runs"] = c.total_runs;
    cj["compliant_runs"] = c.compliant_runs;
    cj["diverged_runs"] = c.diverged_runs;
    cj["cost"] = {{"mean", c.cost.mean},
                  {"stderr", c.cost.stderr_},
                  {"tail_mean", c.cost.tail_mean},
                  {"included", c.cost.included},
                  {"excluded", c.cost.excluded}};
    cj["violation_timeline"] = c.violation_timeline;
    json runs = json::array();
    for (const RunRecord& rec : c.runs) {
      runs.push_back({{"run", rec.run},
                      {"compliant", rec.compliant},
                      {"diverged", rec.diverged},
                      {"first_violation", rec.first_violation},
                      {"cost", finite_or_null(rec.cost)},
                      {"rl_pass", rec.rl_pass},
                      {"interpolated", rec.interpolated},
                      {"fallback", rec.fallback},
                      {"max_gauge", finite_or_null(rec.max_gauge)}});
    }
    cj["runs"] = runs;
    json traces = json::array();
    for (const auto& tr : c.traces) traces.push_back(vectors_to_json(tr));
    cj["traces"] = traces;
    cj["envelope_min"] = envelope_to_json(c.envelope_min);
    cj["envelope_max"] = envelope_to_json(c.envelope_max);
    cs.push_back(cj);
  }
  j["controllers"] = cs;
  return j;
}

MonteCarloReport report_from_json(const json& j)
{
  if (j.value("format", std::string()) != "hullguard-report/1") throw ScenarioError("not a hullguard report");
  MonteCarloReport r;
  r.generated_at = j.value("generated_at", std::string());
  r.scenario = j.at("scenario").get<std::string>();
  r.horizon = j.at("horizon").get<int>();
  r.runs = j.at("runs").get<int>();
  r.seed = j.at("seed").get<std::uint64_t>();
  r.x0 = vector_from_json(j.at("x0"));
  r.F = matrix_from_json(j.at("admissible").at("F"));
  r.g = vector_from_json(j.at("admissible").at("g"));
  if (j.contains("hull")) {
    HullDrawing h;
    h.ellipsoids = matrices_from_json(j.at("hull").at("ellipsoids"));
    h.hull_vertices = vectors_from_json(j.at("hull").at("vertices"));
    r.hull = h;
  }
  r.certificates = j.value("certificates", json::object());
  for (const json& cj : j.at("controllers")) {
    ControllerReport c;
    c.controller = controller_from_string(cj.at("controller").get<std::string>());
    c.total_runs = cj.at("total_runs").get<int>();
    c.compliant_runs = cj.at("compliant_runs").get<int>();
    c.diverged_runs = cj.at("diverged_runs").get<int>();
    const json& cost = cj.at("cost");
    c.cost.mean = cost.at("mean").get<double>();
    c.cost.stderr_ = cost.at("stderr").get<double>();
    c.cost.tail_mean = cost.at("tail_mean").get<double>();
    c.cost.included = cost.at("included").get<int>();
    c.cost.excluded = cost.at("excluded").get<int>();
    c.violation_timeline = cj.at("violation_timeline").get<std::vector<int>>();
    for (const json& rj : cj.at("runs")) {
      RunRecord rec;
      rec.run = rj.at("run").get<int>();
      rec.compliant = rj.at("compliant").get<bool>();
      rec.diverged = rj.at("diverged").get<bool>();
      rec.first_violation = rj.at("first_violation").get<int>();
      rec.cost = number_or_nan(rj.at("cost"));
      rec.rl_pass = rj.at("rl_pass").get<int>();
      rec.interpolated = rj.at("interpolated").get<int>();
      rec.fallback = rj.at("fallback").get<int>();
      rec.max_gauge = number_or_nan(rj.at("max_gauge"));
      c.runs.push_back(rec);
    }
    for (const json& tj : cj.at("traces")) c.traces.push_back(vectors_from_json(tj));
    c.envelope_min = envelope_from_json(cj.at("envelope_min"));
    c.envelope_max = envelope_from_json(cj.at("envelope_max"));
    r.controllers.push_back(std::move(c));
  }
  return r;
}

// -------------------------------------------------------------------------------------------------
// SVG and files

namespace {

std::vector<Eigen::VectorXd> sort_by_angle(std::vector<Eigen::VectorXd> pts)
{
  Eigen::Vector2d center = Eigen::Vector2d::Zero();
  for (const auto& p : pts) center += p;
  center /= static_cast<double>(std::max<std::size_t>(1, pts.size()));
  std::sort(pts.begin(), pts.end(), [&](const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
    return std::atan2(a(1) - center(1), a(0) - center(0)) < std::atan2(b(1) - center(1), b(0) - center(0));
  });
  return pts;
}

std::string polygon_path(const std::vector<Eigen::VectorXd>& pts)
{
  std::ostringstream os;
  os << std::setprecision(6);
  for (std::size_t i = 0; i < pts.size(); ++i) os << (i == 0 ? "M" : " L") << pts[i](0) << "," << pts[i](1);
  os << " Z";
  return os.str();
}

const char* controller_color(ControllerKind k)
{
  switch (k) {
    case ControllerKind::optimal: return "#d62728";
    case ControllerKind::safe: return "#2ca02c";
    case ControllerKind::safe_optimal: return "#1f77b4";
    case ControllerKind::ce_safe: return "#9467bd";
    case ControllerKind::ce: return "#ff7f0e";
  }
  return "#000000";
}

}  // namespace

std::string render_svg(const MonteCarloReport& report)
{
  if (report.F.cols() != 2) throw ScenarioError("SVG output is only defined for two-dimensional scenarios");
  const std::vector<Eigen::VectorXd> outline = sort_by_angle(polytope_vertices(PolyhedralSetd(report.F, report.g)));
  Eigen::Vector2d lo = Eigen::Vector2d::Constant(std::numeric_limits<double>::infinity());
  Eigen::Vector2d hi = -lo;
  for (const auto& v : outline) {
    lo = lo.cwiseMin(v.head<2>());
    hi = hi.cwiseMax(v.head<2>());
  }
  const Eigen::Vector2d pad = 0.15 * (hi - lo);
  lo -= pad;
  hi += pad;
  const double width = hi(0) - lo(0);
  const double height = hi(1) - lo(1);
  const double stroke = 0.004 * std::max(width, height);

  std::ostringstream os;
  os << std::setprecision(6);
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"640\" height=\"" << static_cast<int>(640 * height / width)
     << "\" viewBox=\"" << lo(0) << " " << -hi(1) << " " << width << " " << height << "\">\n";
  os << "<title>" << report.scenario << "</title>\n";
  os << "<g transform=\"scale(1,-1)\" fill=\"none\" stroke-width=\"" << stroke << "\">\n";
  os << "<path class=\"admissible\" stroke=\"#000000\" d=\"" << polygon_path(outline) << "\"/>\n";
  if (report.hull) {
    for (const auto& P : report.hull->ellipsoids) {
      const Eigen::LLT<Eigen::MatrixXd> llt(P);
      const Eigen::MatrixXd L = llt.matrixL();
      std::vector<Eigen::VectorXd> pts;
      for (int k = 0; k < 96; ++k) {
        const double a = 2.0 * std::numbers::pi * k / 96.0;
        pts.push_back(L * Eigen::Vector2d(std::cos(a), std::sin(a)));
      }
      os << "<path class=\"ellipsoid\" stroke=\"#7f7f7f\" d=\"" << polygon_path(pts) << "\"/>\n";
    }
    if (!report.hull->hull_vertices.empty()) {
      os << "<path class=\"hull\" stroke=\"#17becf\" stroke-dasharray=\"" << 3 * stroke << "\" d=\""
         << polygon_path(sort_by_angle(report.hull->hull_vertices)) << "\"/>\n";
    }
  }
  for (const ControllerReport& c : report.controllers) {
    for (const auto& tr : c.traces) {
      os << "<polyline class=\"trajectory\" data-controller=\"" << to_string(c.controller) << "\" stroke=\""
         << controller_color(c.controller) << "\" stroke-opacity=\"0.6\" points=\"";
      for (std::size_t t = 0; t < tr.size(); ++t) {
        if (!tr[t].allFinite()) break;
        os << (t == 0 ? "" : " ") << tr[t](0) << "," << tr[t](1);
      }
      os << "\"/>\n";
    }
  }
  os << "</g>\n</svg>\n";
  return os.str();
}

namespace {

void write_text(const std::filesystem::path& path, const std::string& text, ReportFiles& files)
{
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open '" + path.string() + "' for writing");
  out << text;
  out.close();
  if (!out) throw std::runtime_error("failed writing '" + path.string() + "'");
  files.written.push_back(path.string());
}

}  // namespace

ReportFiles compliance_report(const std::vector<MonteCarloReport>& reports, const std::string& directory, bool svg)
{
  namespace fs = std::filesystem;
  ReportFiles files;
  std::error_code ec;
  fs::create_directories(directory, ec);
  if (ec) throw std::runtime_error("cannot create '" + directory + "': " + ec.message());

  json summary;
  summary["format"] = "hullguard-summary/1";
  summary["generated_at"] = reports.empty() ? utc_timestamp() : reports.front().generated_at;
  json list = json::array();
  for (const MonteCarloReport& r : reports) {
    json rj = report_to_json(r);
    rj.erase("generated_at");
    list.push_back(rj);
  }
  summary["reports"] = list;
  write_text(fs::path(directory) / "summary.json", summary.dump(1) + "\n", files);

  std::ostringstream csv;
  csv << std::setprecision(17);
  csv << "scenario,controller,run,compliant,diverged,first_violation,cost,rl_pass,interpolated,fallback,max_gauge\n";
  for (const MonteCarloReport& r : reports) {
    for (const ControllerReport& c : r.controllers) {
      for (const RunRecord& rec : c.runs) {
        csv << r.scenario << "," << to_string(c.controller) << "," << rec.run << "," << rec.compliant << ","
            << rec.diverged << "," << rec.first_violation << ",";
        if (std::isfinite(rec.cost)) csv << rec.cost;
        csv << "," << rec.rl_pass << "," << rec.interpolated << "," << rec.fallback << "," << rec.max_gauge << "\n";
      }
    }
  }
  write_text(fs::path(directory) / "runs.csv", csv.str(), files);

  for (const MonteCarloReport& r : reports) {
    if (r.F.cols() == 2) {
      if (svg) write_text(fs::path(directory) / (r.scenario + ".svg"), render_svg(r), files);
      continue;
    }
    std::ostringstream env;
    env << std::setprecision(10);
    env << "controller,t,x1_min,x1_max,x2_min,x2_max\n";
    for (const ControllerReport& c : r.controllers) {
      for (Eigen::Index t = 0; t < c.envelope_min.cols(); ++t) {
        env << to_string(c.controller) << "," << t;
        for (Eigen::Index i = 0; i < std::min<Eigen::Index>(2, c.envelope_min.rows()); ++i) {
          env << "," << c.envelope_min(i, t) << "," << c.envelope_max(i, t);
        }
        env << "\n";
      }
    }
    write_text(fs::path(directory) / (r.scenario + "_envelope.csv"), env.str(), files);
  }
  return files;
}

}  // namespace hullguard
