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
// Acceptance suite: one PASS/FAIL line per criterion.
//
// Exit status is 0 when every criterion passes or fails only among the known failures listed in
// kKnownFailures (each analysed in the README). --strict makes any FAIL fatal.

#include "hullguard/harness.hpp"
#include "hullguard/lmi.hpp"
#include "hullguard/policies.hpp"
#include "hullguard/supervisor.hpp"
#include "hullguard/synthesis.hpp"
#include "hullguard/systems.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <cstring>
#include <functional>
#include <iostream>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

using namespace hullguard;

namespace {

const std::set<int> kKnownFailures = {1, 9};

struct Verdict
{
  bool pass = false;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(const char* f, ...) __attribute__((format(printf, 1, 2)));
std::string fmt(const char* f, ...)
{
  char buf[512];
  va_list ap;
  va_start(ap, f);
  std::vsnprintf(buf, sizeof buf, f, ap);
  va_end(ap);
  return buf;
}

// Certificates collected by criteria 1-4 for the contraction suite.
std::vector<std::pair<std::string, HullCertificate>> g_certificates;

void keep(const std::string& tag, const SynthesisResult& r)
{
  if (r.feasible()) g_certificates.emplace_back(tag, *r.certificate);
}

const ControllerReport& controller(const MonteCarloReport& r, ControllerKind k)
{
  for (const auto& c : r.controllers) {
    if (c.controller == k) return c;
  }
  throw std::runtime_error("controller missing from report");
}

// 1. Single-ellipsoid baseline infeasible, model and min-variance programs feasible.
Verdict criterion_1()
{
  const auto t0 = Clock::now();
  const PreparedScenario p = prepare_scenario(builtin_scenario("numeric2d"));
  const TrajectoryDataset data = scenario_dataset(p, 0);
  const SynthesisResult base = synthesize(p, SynthesisMode::single_baseline, nullptr);
  const SynthesisResult model = synthesize(p, SynthesisMode::model_csie, nullptr);
  const SynthesisResult mv = synthesize(p, SynthesisMode::data_minvar, &data);
  const double secs = seconds_since(t0);
  keep("numeric2d/baseline", base);
  keep("numeric2d/model", model);
  keep("numeric2d/minvar", mv);

  const bool base_ok = base.status == SynthesisStatus::infeasible && base.infeasibility.present;
  const bool shape_ok = [&] {
    for (const SynthesisResult* r : {&model, &mv}) {
      if (!r->feasible() || r->certificate->n_v() != 3 || std::abs(r->certificate->lambda - 0.8) > 1e-12) return false;
    }
    return true;
  }();
  Verdict v;
  v.pass = base_ok && shape_ok && secs < 60.0;
  v.detail = fmt("baseline=%s%s model=%s minvar=%s time=%.1fs", to_string(base.status).c_str(),
                 base.infeasibility.present ? " (dual certificate)" : "", to_string(model.status).c_str(),
                 to_string(mv.status).c_str(), secs);
  return v;
}

// 2. Closed-loop hull area against the open-loop hull and the admissible set.
Verdict criterion_2()
{
  const PreparedScenario p = prepare_scenario(builtin_scenario("numeric2d"));
  const SynthesisResult open = synthesize(p, SynthesisMode::open_loop, nullptr);
  const SynthesisResult closed = synthesize(p, SynthesisMode::model_csie, nullptr);
  keep("numeric2d/open_loop", open);
  keep("numeric2d/model", closed);
  if (!open.feasible() || !closed.feasible()) {
    return {false, "open_loop=" + to_string(open.status) + " model=" + to_string(closed.status)};
  }
  auto hull_of = [](const HullCertificate& c) {
    return build_hull_polytope(extract_extreme_points(c.P)).as_set();
  };
  const PolyhedralSetd open_hull = hull_of(*open.certificate);
  const PolyhedralSetd closed_hull = hull_of(*closed.certificate);

  Eigen::VectorXd lo = Eigen::VectorXd::Constant(2, 1e300);
  Eigen::VectorXd hi = Eigen::VectorXd::Constant(2, -1e300);
  for (const auto& v : polytope_vertices(p.admissible)) {
    lo = lo.cwiseMin(v);
    hi = hi.cwiseMax(v);
  }
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const int samples = 100000;
  int in_s = 0, in_open = 0, in_closed = 0;
  for (int k = 0; k < samples; ++k) {
    Eigen::Vector2d x(lo(0) + (hi(0) - lo(0)) * u(rng), lo(1) + (hi(1) - lo(1)) * u(rng));
    const bool s = p.admissible.contains(x);
    in_s += s;
    in_open += s && open_hull.contains(x);
    in_closed += s && closed_hull.contains(x);
  }
  const double box = (hi - lo).prod();
  const double a_s = box * in_s / samples;
  const double a_open = box * in_open / samples;
  const double a_closed = box * in_closed / samples;
  const double growth = a_open > 0.0 ? a_closed / a_open : INFINITY;
  const double cover = a_closed / a_s;
  return {growth >= 1.25 && cover >= 0.70,
          fmt("area S=%.3f open=%.3f closed=%.3f growth=%.2fx coverage=%.1f%%", a_s, a_open, a_closed, growth,
              100.0 * cover)};
}

// 3. Compliance and cost ordering at Sigma = 0.01 I.
Verdict criterion_3()
{
  MonteCarloOptions opts;
  opts.keep_certificates = true;
  opts.keep_traces = 0;
  const MonteCarloReport r = run_monte_carlo(builtin_scenario("numeric2d"), opts);
  for (const auto& c : r.synthesized) g_certificates.emplace_back("numeric2d/monte_carlo", c);
  const auto& opt = controller(r, ControllerKind::optimal);
  const auto& safe = controller(r, ControllerKind::safe);
  const auto& so = controller(r, ControllerKind::safe_optimal);
  const bool compliance = opt.compliant_runs <= 10 && safe.compliant_runs >= 95 && so.compliant_runs >= 95;
  const bool order = opt.cost.mean <= so.cost.mean && so.cost.mean <= safe.cost.mean;
  const bool separated = opt.cost.mean + opt.cost.stderr_ < safe.cost.mean - safe.cost.stderr_;
  return {compliance && order && separated,
          fmt("compliant optimal=%d safe=%d safe_optimal=%d /%d; J optimal=%.0f+-%.0f safe_optimal=%.0f+-%.0f "
              "safe=%.0f+-%.0f",
              opt.compliant_runs, safe.compliant_runs, so.compliant_runs, r.runs, opt.cost.mean, opt.cost.stderr_,
              so.cost.mean, so.cost.stderr_, safe.cost.mean, safe.cost.stderr_)};
}

// 4. Certainty-equivalence against minimum-variance piecewise policies at Sigma = 0.0005 I.
Verdict criterion_4()
{
  MonteCarloOptions opts;
  opts.keep_certificates = true;
  opts.keep_traces = 0;
  const MonteCarloReport r = run_monte_carlo(builtin_scenario("numeric2d_ce"), opts);
  for (const auto& c : r.synthesized) g_certificates.emplace_back("numeric2d_ce/monte_carlo", c);
  const auto& ce = controller(r, ControllerKind::ce);
  const auto& mv = controller(r, ControllerKind::safe);
  const int ce_viol = ce.total_runs - ce.compliant_runs;
  const int mv_viol = mv.total_runs - mv.compliant_runs;
  return {ce_viol > mv_viol && mv_viol <= 5,
          fmt("violating runs ce=%d minvar=%d /%d", ce_viol, mv_viol, r.runs)};
}

// 5. One-step coverage of the confidence ellipsoid E(V_j, 1), V_j = delta_n (Tr(G P G') + 1) Sigma.
// Both the data noise W0 and the current noise w are redrawn; the data map X1 G of the fixed
// certificate is formed from the redrawn X1 = A X0 + B U0 + W0.
Verdict criterion_5()
{
  const PreparedScenario p = prepare_scenario(builtin_scenario("numeric2d"));
  const TrajectoryDataset data = scenario_dataset(p, 0);
  const SynthesisResult res = synthesize(p, SynthesisMode::data_minvar, &data);
  if (!res.feasible()) return {false, "minvar synthesis " + to_string(res.status)};
  const HullCertificate& c = *res.certificate;
  const LtiSystem& sys = p.plant;
  const int j = 0;
  const Eigen::MatrixXd G = c.Y[j] * c.P[j].inverse();
  const Eigen::MatrixXd K = c.U0 * G;

  // State on the boundary of E(P_j) along its longest axis.
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(c.P[j]);
  const Eigen::VectorXd x = std::sqrt(es.eigenvalues().maxCoeff()) * es.eigenvectors().col(c.n() - 1);

  const Eigen::MatrixXd VR = compute_VR(c.variance_trace[j], sys.sigma, Eigen::MatrixXd::Zero(c.n(), 1),
                                        Eigen::VectorXd::Zero(1));
  const Eigen::MatrixXd V = confidence_scale(c.n(), c.delta) * VR;
  const Eigen::LLT<Eigen::MatrixXd> V_llt(V);
  const Eigen::MatrixXd L = sys.sigma.llt().matrixL();

  std::mt19937_64 rng(5);
  std::normal_distribution<double> nd;
  auto noise = [&] { return Eigen::VectorXd(L * Eigen::VectorXd::NullaryExpr(c.n(), [&] { return nd(rng); })); };
  const int draws = 10000;
  int covered = 0;
  const Eigen::Index N = c.X0.cols();
  for (int k = 0; k < draws; ++k) {
    Eigen::MatrixXd W0(c.n(), N);
    for (Eigen::Index col = 0; col < N; ++col) W0.col(col) = noise();
    const Eigen::MatrixXd X1 = sys.A * c.X0 + sys.B * c.U0 + W0;
    const Eigen::VectorXd mean = X1 * G * x;
    const Eigen::VectorXd next = sys.A * x + sys.B * (K * x) + noise();
    const Eigen::VectorXd e = next - mean;
    covered += e.dot(V_llt.solve(e)) <= 1.0;
  }
  const double coverage = static_cast<double>(covered) / draws;
  const double bound = 1.0 - c.delta - 0.01;
  return {coverage >= bound, fmt("coverage=%.4f bound=%.2f (delta_n=%.2f)", coverage, bound,
                                 confidence_scale(c.n(), c.delta))};
}

// 6. Joint chance constraint after row tightening with the uniform split.
Verdict criterion_6()
{
  std::mt19937_64 rng(6);
  std::normal_distribution<double> nd;
  std::uniform_real_distribution<double> ud(0.0, 1.0);
  const std::vector<double> eps_choices = {0.05, 0.1, 0.2};
  const int instances = 20;
  const int draws = 10000;
  double worst_margin = INFINITY;
  int passed = 0;
  for (int inst = 0; inst < instances; ++inst) {
    const int n = 1 + inst % 3;
    const int rows = 2 * n + static_cast<int>(ud(rng) * 3);
    const double eps = eps_choices[inst % eps_choices.size()];
    const Eigen::MatrixXd F = Eigen::MatrixXd::NullaryExpr(rows, n, [&] { return nd(rng); });
    const Eigen::MatrixXd H = Eigen::MatrixXd::NullaryExpr(n, n, [&] { return nd(rng); });
    const Eigen::MatrixXd M = H * H.transpose() + 0.1 * Eigen::MatrixXd::Identity(n, n);  // covariance
    const Eigen::VectorXd m = Eigen::VectorXd::NullaryExpr(n, [&] { return nd(rng); });
    const RiskAllocation risk = RiskAllocation::uniform(eps, rows);
    // Offsets placed at the tightened boundary plus a small random slack, so the check passes.
    Eigen::VectorXd g = F * m;
    const Tightening t0 = tighten_rows(risk, M, F, Eigen::VectorXd::Constant(rows, 1e9));
    for (int s = 0; s < rows; ++s) g(s) += t0.gamma(s) * (1.0 + 0.05 * ud(rng));
    const Tightening t = tighten_rows(risk, M, F, g);
    if (((F * m).array() > (g - t.gamma).array()).any()) {
      return {false, fmt("instance %d: tightened rows do not pass by construction", inst)};
    }
    const Eigen::MatrixXd L = M.llt().matrixL();
    int inside = 0;
    for (int k = 0; k < draws; ++k) {
      const Eigen::VectorXd x = m + L * Eigen::VectorXd::NullaryExpr(n, [&] { return nd(rng); });
      inside += ((F * x).array() <= g.array()).all();
    }
    const double freq = static_cast<double>(inside) / draws;
    const double bound = 1.0 - eps - 2.0 * std::sqrt(eps / draws);
    worst_margin = std::min(worst_margin, freq - bound);
    passed += freq >= bound;
  }
  return {passed == instances, fmt("%d/%d instances hold; worst frequency margin %.4f", passed, instances,
                                   worst_margin)};
}

// 7. Contraction and cyclic succession on boundary samples of every collected certificate.
Verdict criterion_7()
{
  int ok = 0;
  double worst_excess = -INFINITY;
  std::string worst_tag;
  for (std::size_t k = 0; k < g_certificates.size(); ++k) {
    const auto& [tag, c] = g_certificates[k];
    const ContractionReport r = check_contraction(c, 200, 700 + k);
    const double excess = std::max(r.worst_hull_level, r.worst_cyclic_level) - c.lambda;
    if (excess > worst_excess) {
      worst_excess = excess;
      worst_tag = tag;
    }
    ok += excess <= 1e-6;
  }
  const int total = static_cast<int>(g_certificates.size());
  return {total > 0 && ok == total,
          fmt("%d/%d certificates within lambda + 1e-6; worst excess %.2e (%s)", ok, total, worst_excess,
              worst_tag.c_str())};
}

// 8. Piecewise policy identities on the numeric2d min-variance policy.
Verdict criterion_8()
{
  const PreparedScenario p = prepare_scenario(builtin_scenario("numeric2d"));
  const TrajectoryDataset data = scenario_dataset(p, 0);
  const SynthesisResult res = synthesize(p, SynthesisMode::data_minvar, &data);
  if (!res.feasible()) return {false, "minvar synthesis " + to_string(res.status)};
  const PartitionedPolicy policy = make_bundle(p, *res.certificate).policy;
  const json j = policy_to_json(policy);
  const PartitionedPolicy loaded = policy_from_json(json::parse(j.dump()));

  const double reproduction = vertex_reproduction_error(policy);
  const int n = static_cast<int>(policy.hull.dim());
  const int R = static_cast<int>(policy.regions.size());
  auto vertex_matrix = [&](int r) {
    Eigen::MatrixXd V(n, n);
    for (int i = 0; i < n; ++i) V.col(i) = policy.hull.vertices[policy.regions[r].vertex_ids[i]];
    return V;
  };

  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> ud(0.0, 1.0);
  const int samples = 10000;

  // Barycentric round trip for points drawn inside random regions.
  double round_trip = 0.0;
  double serialization = 0.0;
  for (int k = 0; k < samples; ++k) {
    const int r = static_cast<int>(ud(rng) * R) % R;
    Eigen::VectorXd w = Eigen::VectorXd::NullaryExpr(n, [&] { return ud(rng); });
    w *= ud(rng) / w.sum();
    const Eigen::VectorXd x = vertex_matrix(r) * w;
    const Location loc = locate_partition(policy, x);
    round_trip = std::max(round_trip, (vertex_matrix(loc.region) * loc.gamma - x).norm());
    serialization = std::max(serialization, (safe_control(loaded, x) - safe_control(policy, x)).norm());
  }

  // Continuity across faces shared by two regions.
  std::vector<std::tuple<int, int, std::vector<int>>> faces;
  for (int a = 0; a < R; ++a) {
    for (int b = a + 1; b < R; ++b) {
      std::vector<int> shared;
      for (int v : policy.regions[a].vertex_ids) {
        const auto& ob = policy.regions[b].vertex_ids;
        if (std::find(ob.begin(), ob.end(), v) != ob.end()) shared.push_back(v);
      }
      if (static_cast<int>(shared.size()) == n - 1) faces.emplace_back(a, b, shared);
    }
  }
  double continuity = 0.0;
  for (int k = 0; k < samples && !faces.empty(); ++k) {
    const auto& [a, b, shared] = faces[static_cast<std::size_t>(ud(rng) * faces.size()) % faces.size()];
    Eigen::VectorXd w = Eigen::VectorXd::NullaryExpr(static_cast<Eigen::Index>(shared.size()), [&] { return ud(rng); });
    w *= ud(rng) / w.sum();
    Eigen::VectorXd x = Eigen::VectorXd::Zero(n);
    for (std::size_t i = 0; i < shared.size(); ++i) x += w(static_cast<Eigen::Index>(i)) * policy.hull.vertices[shared[i]];
    continuity = std::max(continuity, (policy.gains[a] * x - policy.gains[b] * x).norm());
  }
  const bool pass = reproduction <= 1e-8 && round_trip <= 1e-8 && continuity <= 1e-8 && serialization <= 1e-8 &&
                    !faces.empty();
  return {pass, fmt("regions=%d reproduction=%.1e continuity=%.1e (%zu faces) round_trip=%.1e json=%.1e", R,
                    reproduction, continuity, faces.size(), round_trip, serialization)};
}

// 9. Lane keeping.
Verdict criterion_9()
{
  const auto t0 = Clock::now();
  MonteCarloOptions opts;
  opts.keep_traces = 0;
  const MonteCarloReport r = run_monte_carlo(builtin_scenario("lanekeep4d"), opts);
  const double secs = seconds_since(t0);
  const auto& opt = controller(r, ControllerKind::optimal);
  const auto& so = controller(r, ControllerKind::safe_optimal);
  const int lqr_viol = opt.total_runs - opt.compliant_runs;
  return {so.compliant_runs >= 95 && lqr_viol >= 50 && secs < 600.0,
          fmt("safe_optimal compliant=%d/%d (diverged %d); LQR violating=%d; time=%.0fs", so.compliant_runs, r.runs,
              so.diverged_runs, lqr_viol, secs)};
}

// 10. Schur agreement and re-verification of every built-in scenario certificate.
Verdict criterion_10()
{
  std::mt19937_64 rng(10);
  std::normal_distribution<double> nd;
  int agree = 0;
  const int trials = 1000;
  for (int k = 0; k < trials; ++k) {
    const Eigen::MatrixXd A = Eigen::MatrixXd::NullaryExpr(4, 4, [&] { return nd(rng); });
    Eigen::MatrixXd M = 0.5 * (A + A.transpose());
    // Shift to straddle the PSD boundary and keep the lower block well conditioned.
    M += (std::abs(nd(rng)) + 0.5) * Eigen::MatrixXd::Identity(4, 4);
    Eigen::MatrixXd M22 = M.block(2, 2, 2, 2);
    const double m22_min = lmi::min_eigenvalue(M22);
    if (m22_min < 0.5) M22 += (0.5 - m22_min) * Eigen::MatrixXd::Identity(2, 2);
    const lmi::SchurCheck s = lmi::schur_psd_check(M.block(0, 0, 2, 2), M.block(0, 2, 2, 2), M22);
    agree += !s.degenerate && s.direct == s.complement;
  }

  int verified = 0, total = 0;
  double worst = 0.0;
  std::string failures;
  for (const std::string& name : builtin_scenario_names()) {
    const PreparedScenario p = prepare_scenario(builtin_scenario(name));
    const TrajectoryDataset data = scenario_dataset(p, 0);
    std::vector<SynthesisMode> modes = {p.config.mode};
    for (ControllerKind k : p.config.controllers) {
      if (k == ControllerKind::ce || k == ControllerKind::ce_safe) modes.push_back(SynthesisMode::data_ce);
    }
    for (SynthesisMode mode : modes) {
      ++total;
      const SynthesisResult r = synthesize(p, mode, &data);
      if (!r.feasible()) {
        failures += " " + name + "/" + to_string(mode);
        continue;
      }
      const HullCertificate shipped = certificate_from_json(json::parse(certificate_to_json(*r.certificate).dump()));
      const CertificateCheck chk = verify_certificate(shipped, 1e-6);
      worst = std::max({worst, chk.max_psd_violation, chk.max_equality_violation, chk.gain_residual});
      if (chk.ok) {
        ++verified;
      } else {
        failures += " " + name + "/" + to_string(mode);
      }
    }
  }
  return {agree == trials && verified == total,
          fmt("schur agreement %d/%d; certificates verified %d/%d, worst residual %.1e%s", agree, trials, verified,
              total, worst, failures.empty() ? "" : (";" + failures).c_str())};
}

}  // namespace

int main(int argc, char** argv)
{
  bool strict = false;
  std::set<int> only;
  for (int i = 1; i < argc; ++i) {
    if (std::strcmp(argv[i], "--strict") == 0) {
      strict = true;
    } else {
      only.insert(std::atoi(argv[i]));
    }
  }
  const std::vector<std::pair<std::string, std::function<Verdict()>>> criteria = {
      {"baseline infeasibility", criterion_1},   {"hull growth", criterion_2},
      {"compliance and cost ordering", criterion_3}, {"risk-mode contrast", criterion_4},
      {"confidence-ellipsoid coverage", criterion_5}, {"chance-constraint tightening", criterion_6},
      {"contraction and cyclicity", criterion_7},    {"piecewise policy identities", criterion_8},
      {"lane keeping", criterion_9},                 {"solver layer", criterion_10},
  };
  int unexpected = 0;
  for (std::size_t k = 0; k < criteria.size(); ++k) {
    const int id = static_cast<int>(k) + 1;
    // Criterion 7 checks the certificates gathered by 1-4, so those always run with it.
    if (!only.empty() && !only.count(id) && !(only.count(7) && id <= 4)) continue;
    Verdict v;
    const auto t0 = Clock::now();
    try {
      v = criteria[k].second();
    } catch (const std::exception& e) {
      v = {false, std::string("exception: ") + e.what()};
    }
    const bool known = kKnownFailures.count(id) > 0;
    if (!v.pass && (strict || !known)) ++unexpected;
    std::cout << "criterion " << id << " [" << criteria[k].first << "]: " << (v.pass ? "PASS" : "FAIL")
              << (!v.pass && known ? " (known failure)" : "") << "  " << v.detail
              << fmt("  [%.1fs]", seconds_since(t0)) << std::endl;
  }
  return unexpected == 0 ? 0 : 1;
}
