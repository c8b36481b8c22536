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

#include "hullguard/supervisor.hpp"

#include <cmath>
#include <random>
#include <sstream>

using namespace hullguard;

namespace {

struct Fixture
{
  LtiSystem sys = numeric2d_system(0.01);
  HullCertificate cert;
  PartitionedPolicy policy;
  LqrPolicy lqr;

  Fixture()
  {
    auto [F, g] = numeric2d_admissible();
    SynthesisResult res = synth_model_based(sys.A, sys.B, PolyhedralSetd(F, g), SynthesisConfig{});
    REQUIRE(res.feasible());
    cert = *res.certificate;
    policy = build_partitioned_policy(cert);
    lqr = lqr_riccati(sys.A, sys.B, Eigen::Vector2d(100.0, 0.01).asDiagonal(), Eigen::MatrixXd::Constant(1, 1, 50.0));
  }

  Supervisor make(double sigma, double delta_b = 0.0, double eps = 0.1) const
  {
    BPrior prior{sys.B, Eigen::MatrixXd::Constant(2, 1, delta_b)};
    return Supervisor(cert, policy, sigma * Eigen::MatrixXd::Identity(2, 2), prior,
                      RiskAllocation::uniform(eps, policy.hull.F_CH.rows()));
  }
};

const Fixture& fixture()
{
  static const Fixture f;
  return f;
}

Eigen::VectorXd random_hull_point(const PartitionedPolicy& p, std::mt19937_64& rng, double lo = 0.0)
{
  std::uniform_real_distribution<double> ud(0.0, 1.0);
  std::uniform_int_distribution<std::size_t> pick(0, p.regions.size() - 1);
  const PartitionRegion& r = p.regions[pick(rng)];
  Eigen::VectorXd w(r.V_star.cols());
  for (Eigen::Index k = 0; k < w.size(); ++k) w(k) = -std::log(ud(rng) + 1e-300);
  return (lo + (1.0 - lo) * ud(rng)) * r.V_star * (w / w.sum());
}

}  // namespace

TEST_CASE("risk allocation")
{
  const RiskAllocation r = RiskAllocation::uniform(0.1, 6);
  REQUIRE(r.kappa_s.size() == 6);
  // eps_s = 1/60 gives kappa^2 = (59/60)/(1/60) = 59.
  for (double k : r.kappa_s) CHECK(k == doctest::Approx(std::sqrt(59.0)).epsilon(1e-12));
  CHECK(std::sqrt(59.0) == doctest::Approx(7.681).epsilon(1e-4));
  RiskAllocation bad = r;
  bad.epsilon_s[0] = 0.05;
  bad.kappa_s[0] = kappa(0.05);
  CHECK_THROWS_AS(tighten_rows(bad, Eigen::MatrixXd::Zero(2, 2), Eigen::MatrixXd::Ones(6, 2), Eigen::VectorXd::Ones(6)),
                  RiskAllocationError);
  bad = r;
  bad.kappa_s[1] = 1.0;
  CHECK_THROWS_AS(bad.validate(), RiskAllocationError);
  CHECK_THROWS_AS(RiskAllocation::uniform(0.0, 3), RiskAllocationError);
}

TEST_CASE("successor covariance bound")
{
  const Eigen::MatrixXd S = Eigen::Vector2d(0.3, 0.1).asDiagonal();
  const Eigen::MatrixXd dB = Eigen::Vector2d(0.2, -0.5);
  CHECK(compute_VR(3.0, Eigen::MatrixXd::Zero(2, 2), dB, Eigen::VectorXd::Zero(1)).norm() == 0.0);
  CHECK((compute_VR(3.0, S, dB, Eigen::VectorXd::Zero(1)) - 4.0 * S).norm() < 1e-15);
  // n = 1, G = P = 1: Tr(G P G') = 1, so V = sigma^2 + sigma^2 + dB^2 du^2.
  const Eigen::MatrixXd V = compute_VR(1.0, Eigen::MatrixXd::Constant(1, 1, 0.04), Eigen::MatrixXd::Constant(1, 1, 0.5),
                                       Eigen::VectorXd::Constant(1, 2.0));
  CHECK(V(0, 0) == doctest::Approx(0.08 + 1.0));
  const Eigen::MatrixXd W = compute_VR(0.7, S, dB, Eigen::VectorXd::Constant(1, 1.5));
  CHECK(lmi::min_eigenvalue(W) >= 0.0);
  CHECK((W - W.transpose()).norm() == 0.0);
}

TEST_CASE("row tightening")
{
  auto [F, g] = numeric2d_admissible();
  const RiskAllocation r = RiskAllocation::uniform(0.1, F.rows());
  const Tightening zero = tighten_rows(r, Eigen::MatrixXd::Zero(2, 2), F, g);
  CHECK(zero.gamma.norm() == 0.0);
  CHECK(zero.unsatisfiable.empty());
  const Eigen::MatrixXd V = compute_VR(0.4, 0.01 * Eigen::MatrixXd::Identity(2, 2), Eigen::MatrixXd::Zero(2, 1),
                                       Eigen::VectorXd::Zero(1));
  const Tightening t1 = tighten_rows(r, V, F, g);
  const Tightening t2 = tighten_rows(r, 2.0 * V, F, g);
  for (Eigen::Index s = 0; s < F.rows(); ++s) {
    CHECK(t2.gamma(s) == doctest::Approx(std::sqrt(2.0) * t1.gamma(s)).epsilon(1e-12));
    CHECK(t1.gamma(s) == doctest::Approx(std::sqrt(59.0) * std::sqrt(F.row(s).dot(V * F.row(s).transpose()))));
  }
  const Tightening big = tighten_rows(r, 100.0 * Eigen::MatrixXd::Identity(2, 2), F, g);
  CHECK(big.unsatisfiable.size() == 6);
}

TEST_CASE("criterion and pass-through")
{
  const Fixture& f = fixture();
  const Supervisor sup = f.make(0.01);
  const Eigen::VectorXd z = Eigen::Vector2d::Zero();
  const CriterionResult c0 = sup.safety_criterion(z, Eigen::VectorXd::Zero(1), Eigen::VectorXd::Zero(1));
  CHECK(c0.pass);

  const Eigen::VectorXd x = 0.1 * f.policy.hull.vertices[0];
  const Eigen::VectorXd u_rl = Eigen::VectorXd::Constant(1, 0.0123456789);
  const SupervisionOutcome o = sup.supervise(x, u_rl);
  CHECK(o.mode == SupervisionMode::rl_pass);
  CHECK(o.phi == 0.0);
  CHECK(o.u_applied(0) == u_rl(0));

  // Huge noise: the tightened rows cannot hold even with the safe action.
  const Supervisor noisy = f.make(50.0);
  const Eigen::VectorXd u_safe = safe_control(f.policy, x);
  const SupervisionOutcome fb = noisy.supervise(x, u_safe);
  CHECK(fb.mode == SupervisionMode::safe_fallback);
  CHECK(fb.phi == 1.0);
  CHECK(fb.risk_warning);
  CHECK(fb.u_applied(0) == doctest::Approx(u_safe(0)));

  const SupervisionOutcome out = sup.supervise(1.5 * f.policy.hull.vertices[0], u_rl);
  CHECK(out.out_of_hull);
  CHECK(out.mode == SupervisionMode::safe_fallback);
  CHECK((out.u_applied - fallback_control(f.policy, 1.5 * f.policy.hull.vertices[0])).norm() < 1e-12);
}

TEST_CASE("region maps reproduce the safe closed loop")
{
  const Fixture& f = fixture();
  const Supervisor sup = f.make(0.01);
  for (std::size_t r = 0; r < f.policy.regions.size(); ++r) {
    const Eigen::MatrixXd expected = f.sys.A + f.sys.B * f.policy.gains[r];
    CHECK((sup.region_map(static_cast<int>(r)) - expected).norm() < 1e-6);
  }
}

TEST_CASE("interpolation agrees with the linear program when Delta_B is zero")
{
  const Fixture& f = fixture();
  const Supervisor sup = f.make(0.002);
  std::mt19937_64 rng(3);
  std::normal_distribution<double> nd;
  int events = 0;
  for (int trial = 0; trial < 2000 && events < 100; ++trial) {
    const Eigen::VectorXd x = random_hull_point(f.policy, rng, 0.5);
    const Eigen::VectorXd u_safe = safe_control(f.policy, x);
    const Eigen::VectorXd u_rl = u_safe + Eigen::VectorXd::Constant(1, 3.0 * nd(rng));
    const CriterionResult c = sup.safety_criterion(x, u_rl, u_safe);
    if (c.pass) continue;
    const Eigen::VectorXd s1 = sup.safety_criterion(x, u_safe, u_safe).margins;
    if (s1.minCoeff() < 0.0) continue;
    ++events;
    // Slack is affine in phi: s(phi) = s0 + phi (s1 - s0); the LP optimum is the largest root.
    double oracle = 0.0;
    for (Eigen::Index s = 0; s < c.margins.size(); ++s) {
      if (c.margins(s) < 0.0) oracle = std::max(oracle, -c.margins(s) / (s1(s) - c.margins(s)));
    }
    const Interpolation ip = sup.interpolate_phi(x, u_rl, u_safe);
    REQUIRE(ip.feasible);
    CHECK(ip.phi == doctest::Approx(oracle).epsilon(1e-6));
    CHECK(std::abs(ip.phi - oracle) <= 1.1e-6);
    // Minimality and monotone slack of the active rows on [phi*, 1].
    const Eigen::VectorXd before = sup.safety_criterion(x, (ip.phi - 1e-6) * u_safe + (1.0 - ip.phi + 1e-6) * u_rl, u_safe).margins;
    CHECK(before.minCoeff() < 0.0);
    Eigen::VectorXd prev = ip.margins;
    for (double phi = ip.phi; phi <= 1.0; phi += 0.05) {
      const Eigen::VectorXd m = sup.safety_criterion(x, phi * u_safe + (1.0 - phi) * u_rl, u_safe).margins;
      for (Eigen::Index s = 0; s < m.size(); ++s) {
        if (c.margins(s) < 0.0) CHECK(m(s) >= prev(s) - 1e-12);
      }
      prev = m;
    }
    const SupervisionOutcome o = sup.supervise(x, u_rl);
    CHECK(o.mode == SupervisionMode::interpolated);
    CHECK(o.phi == doctest::Approx(ip.phi));
  }
  CHECK(events == 100);
}

TEST_CASE("interpolation with input uncertainty")
{
  const Fixture& f = fixture();
  const Supervisor sup = f.make(0.002, 0.05);
  std::mt19937_64 rng(8);
  std::normal_distribution<double> nd;
  int events = 0;
  for (int trial = 0; trial < 2000 && events < 100; ++trial) {
    const Eigen::VectorXd x = random_hull_point(f.policy, rng, 0.5);
    const Eigen::VectorXd u_safe = safe_control(f.policy, x);
    const Eigen::VectorXd u_rl = u_safe + Eigen::VectorXd::Constant(1, 3.0 * nd(rng));
    const Interpolation ip = sup.interpolate_phi(x, u_rl, u_safe);
    if (ip.phi == 0.0 || !ip.feasible) continue;
    ++events;
    CHECK(ip.margins.minCoeff() >= 0.0);
    const double lo = ip.phi - 1e-6;
    CHECK(sup.safety_criterion(x, lo * u_safe + (1.0 - lo) * u_rl, u_safe).margins.minCoeff() < 0.0);
  }
  CHECK(events >= 50);
}

TEST_CASE("adversarial action at the hull boundary is pulled back")
{
  const Fixture& f = fixture();
  const double sigma = 0.01;
  const Supervisor sup = f.make(sigma);
  const Eigen::VectorXd x = 0.98 * f.policy.hull.vertices[0];
  const Eigen::VectorXd u_safe = safe_control(f.policy, x);
  // Push along the input direction that most increases the worst hull row.
  const Eigen::VectorXd rows = f.policy.hull.F_CH * f.sys.B;
  Eigen::Index worst = 0;
  (f.policy.hull.F_CH * (f.sys.A * x + f.sys.B * u_safe)).maxCoeff(&worst);
  const Eigen::VectorXd u_rl = u_safe + Eigen::VectorXd::Constant(1, rows(worst) >= 0 ? 5.0 : -5.0);
  const SupervisionOutcome o = sup.supervise(x, u_rl);
  CHECK(o.mode == SupervisionMode::interpolated);
  CHECK(o.phi > 0.8);

  std::mt19937_64 rng(11);
  std::normal_distribution<double> nd;
  int violations = 0;
  const int draws = 10000;
  for (int k = 0; k < draws; ++k) {
    const Eigen::VectorXd w = std::sqrt(sigma) * Eigen::Vector2d(nd(rng), nd(rng));
    const Eigen::VectorXd y = f.sys.A * x + f.sys.B * o.u_applied + w;
    if ((f.policy.hull.F_CH * y - f.policy.hull.g_CH).maxCoeff() > 0.0) ++violations;
  }
  CHECK(violations <= draws / 10);
}

TEST_CASE("one-step chance constraint holds from supervised states")
{
  const Fixture& f = fixture();
  const double sigma = 0.01;
  const double eps = 0.1;
  const Supervisor sup = f.make(sigma, 0.0, eps);
  std::mt19937_64 rng(29);
  std::normal_distribution<double> nd;
  int violations = 0;
  const int draws = 10000;
  for (int k = 0; k < draws; ++k) {
    const Eigen::VectorXd x = random_hull_point(f.policy, rng, 0.6);
    const SupervisionOutcome o = sup.supervise(x, f.lqr.control(x));
    if (o.risk_warning) continue;
    const Eigen::VectorXd w = std::sqrt(sigma) * Eigen::Vector2d(nd(rng), nd(rng));
    const Eigen::VectorXd y = f.sys.A * x + f.sys.B * o.u_applied + w;
    if ((f.policy.hull.F_CH * y - f.policy.hull.g_CH).maxCoeff() > 0.0) ++violations;
  }
  CHECK(static_cast<double>(violations) / draws <= eps + 2.0 * std::sqrt(eps / draws));
}

TEST_CASE("supervision log")
{
  const Fixture& f = fixture();
  const Supervisor sup = f.make(0.01);
  std::vector<SupervisionLogEntry> log;
  Eigen::VectorXd x = 0.5 * f.policy.hull.vertices[1];
  for (int t = 0; t < 3; ++t) {
    const Eigen::VectorXd u = f.lqr.control(x);
    log.push_back({t, x, u, sup.supervise(x, u)});
    x = f.sys.A * x + f.sys.B * log.back().outcome.u_applied;
  }
  std::ostringstream os;
  write_supervision_csv(os, log);
  const std::string s = os.str();
  CHECK(s.rfind("t,x1,x2,u_rl1,u1,phi,mode,min_margin\n", 0) == 0);
  CHECK(std::count(s.begin(), s.end(), '\n') == 4);
}
