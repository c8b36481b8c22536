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
#include "hullguard/supervisor.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <numeric>
#include <ostream>
#include <sstream>

namespace hullguard {

double kappa(double epsilon_s)
{
  if (!(epsilon_s > 0.0 && epsilon_s < 1.0)) throw RiskAllocationError("row risk must lie in (0, 1)");
  return std::sqrt((1.0 - epsilon_s) / epsilon_s);
}

RiskAllocation RiskAllocation::uniform(double epsilon, Eigen::Index rows)
{
  if (rows <= 0) throw RiskAllocationError("risk allocation needs at least one row");
  if (!(epsilon > 0.0 && epsilon < 1.0)) throw RiskAllocationError("total risk must lie in (0, 1)");
  RiskAllocation r;
  r.epsilon = epsilon;
  r.epsilon_s.assign(static_cast<std::size_t>(rows), epsilon / static_cast<double>(rows));
  for (double e : r.epsilon_s) r.kappa_s.push_back(kappa(e));
  return r;
}

void RiskAllocation::validate() const
{
  if (epsilon_s.empty() || epsilon_s.size() != kappa_s.size()) {
    throw RiskAllocationError("risk allocation rows and kappa values differ in number");
  }
  double total = 0.0;
  for (std::size_t s = 0; s < epsilon_s.size(); ++s) {
    const double k = kappa(epsilon_s[s]);
    if (std::abs(k - kappa_s[s]) > 1e-12 * (1.0 + k)) throw RiskAllocationError("kappa does not match its row risk");
    total += epsilon_s[s];
  }
  if (total > epsilon * (1.0 + 1e-12)) {
    std::ostringstream os;
    os << "row risks sum to " << total << ", above the budget " << epsilon;
    throw RiskAllocationError(os.str());
  }
}

Eigen::MatrixXd compute_VR(double variance_trace, const Eigen::MatrixXd& sigma, const Eigen::MatrixXd& Delta_B,
                           const Eigen::VectorXd& delta_u)
{
  Eigen::MatrixXd V = (variance_trace + 1.0) * sigma;
  if (Delta_B.size() > 0 && delta_u.size() > 0) {
    const Eigen::VectorXd b = Delta_B * delta_u;
    V.noalias() += b * b.transpose();
  }
  return 0.5 * (V + V.transpose());
}

Tightening tighten_rows(const RiskAllocation& risk, const Eigen::MatrixXd& V, const Eigen::MatrixXd& F,
                        const Eigen::VectorXd& g)
{
  risk.validate();
  if (static_cast<Eigen::Index>(risk.kappa_s.size()) != F.rows() || g.size() != F.rows()) {
    throw RiskAllocationError("risk allocation does not match the polytope rows");
  }
  Tightening t;
  t.gamma.resize(F.rows());
  for (Eigen::Index s = 0; s < F.rows(); ++s) {
    const double q = F.row(s).dot(V * F.row(s).transpose());
    t.gamma(s) = risk.kappa_s[static_cast<std::size_t>(s)] * std::sqrt(std::max(0.0, q));
    if (t.gamma(s) >= g(s)) t.unsatisfiable.push_back(static_cast<int>(s));
  }
  return t;
}

std::string to_string(SupervisionMode mode)
{
  switch (mode) {
    case SupervisionMode::rl_pass: return "rl_pass";
    case SupervisionMode::interpolated: return "interpolated";
    case SupervisionMode::safe_fallback: return "safe_fallback";
  }
  return "unknown";
}

Supervisor::Supervisor(HullCertificate certificate, PartitionedPolicy policy, Eigen::MatrixXd sigma, BPrior prior,
                       RiskAllocation risk, double bisection_tol)
    : cert_(std::move(certificate)),
      policy_(std::move(policy)),
      sigma_(std::move(sigma)),
      prior_(std::move(prior)),
      risk_(std::move(risk)),
      bisection_tol_(bisection_tol)
{
  const Eigen::Index n = policy_.n();
  const Eigen::Index m = policy_.m();
  if (cert_.n() != n || static_cast<int>(cert_.closed_loop_map.size()) != cert_.n_v()) {
    throw std::invalid_argument("certificate does not match the policy");
  }
  if (sigma_.rows() != n || sigma_.cols() != n) throw std::invalid_argument("noise covariance must be n x n");
  if (prior_.B_n.rows() != n || prior_.B_n.cols() != m) throw std::invalid_argument("B prior mean must be n x m");
  if (prior_.Delta_B.size() == 0) prior_.Delta_B = Eigen::MatrixXd::Zero(n, m);
  if (prior_.Delta_B.rows() != n || prior_.Delta_B.cols() != m) throw std::invalid_argument("Delta_B must be n x m");
  if (risk_.kappa_s.empty()) risk_ = RiskAllocation::uniform(risk_.epsilon, policy_.hull.F_CH.rows());
  risk_.validate();
  if (static_cast<Eigen::Index>(risk_.kappa_s.size()) != policy_.hull.F_CH.rows()) {
    throw RiskAllocationError("risk allocation does not match the hull rows");
  }
  if (!(bisection_tol_ > 0.0)) throw std::invalid_argument("bisection tolerance must be positive");

  for (const PartitionRegion& r : policy_.regions) {
    Eigen::MatrixXd images(n, r.V_star.cols());
    double var = 0.0;
    for (Eigen::Index k = 0; k < r.V_star.cols(); ++k) {
      const int owner = r.ellipsoid_ids.at(static_cast<std::size_t>(k));
      images.col(k) = cert_.closed_loop_map.at(owner) * r.V_star.col(k);
      if (!cert_.variance_trace.empty()) var = std::max(var, cert_.variance_trace.at(owner));
    }
    region_map_.push_back(images * r.gamma_map);
    region_variance_.push_back(var);
  }
}

Eigen::MatrixXd Supervisor::compute_VR(int region, const Eigen::VectorXd& delta_u) const
{
  return hullguard::compute_VR(region_variance_.at(region), sigma_, prior_.Delta_B, delta_u);
}

Eigen::VectorXd Supervisor::slack(int region, const Eigen::VectorXd& x, const Eigen::VectorXd& delta_u,
                                  Eigen::VectorXd* mean) const
{
  const Eigen::VectorXd m = region_map_[region] * x + prior_.B_n * delta_u;
  const Tightening t = tighten_rows(risk_, compute_VR(region, delta_u), policy_.hull.F_CH, policy_.hull.g_CH);
  if (mean) *mean = m;
  return policy_.hull.g_CH - t.gamma - policy_.hull.F_CH * m;
}

CriterionResult Supervisor::safety_criterion(const Eigen::VectorXd& x, const Eigen::VectorXd& u_rl,
                                             const Eigen::VectorXd& u_safe) const
{
  CriterionResult out;
  const Location loc = locate_cone(policy_, x);
  out.region = loc.region;
  out.out_of_hull = !loc.inside;
  out.margins = slack(loc.region, x, u_rl - u_safe, &out.mean);
  out.pass = !out.out_of_hull && out.margins.minCoeff() >= 0.0;
  return out;
}

Interpolation Supervisor::interpolate_phi(const Eigen::VectorXd& x, const Eigen::VectorXd& u_rl,
                                          const Eigen::VectorXd& u_safe) const
{
  const int region = locate_cone(policy_, x).region;
  const Eigen::VectorXd gap = u_rl - u_safe;
  auto margins_at = [&](double phi) { return slack(region, x, (1.0 - phi) * gap); };

  Interpolation out;
  out.margins = margins_at(0.0);
  if (out.margins.minCoeff() >= 0.0) {
    out.phi = 0.0;
    out.u = u_rl;
    out.feasible = true;
    return out;
  }
  Eigen::VectorXd hi_margins = margins_at(1.0);
  if (hi_margins.minCoeff() < 0.0) {
    out.phi = 1.0;
    out.u = u_safe;
    out.margins = hi_margins;
    return out;
  }
  // Each row slack is concave in phi and nonnegative at phi = 1, so the feasible phi form an
  // interval ending at 1 and bisection brackets its left end.
  double lo = 0.0;
  double hi = 1.0;
  while (hi - lo > bisection_tol_) {
    const double mid = 0.5 * (lo + hi);
    Eigen::VectorXd m = margins_at(mid);
    if (m.minCoeff() >= 0.0) {
      hi = mid;
      hi_margins = std::move(m);
    } else {
      lo = mid;
    }
  }
  out.phi = hi;
  out.u = hi * u_safe + (1.0 - hi) * u_rl;
  out.feasible = true;
  out.margins = hi_margins;
  return out;
}

SupervisionOutcome Supervisor::supervise(const Eigen::VectorXd& x, const Eigen::VectorXd& u_rl) const
{
  SupervisionOutcome out;
  const Location loc = locate_cone(policy_, x);
  out.region = loc.region;
  out.u_safe = policy_.gains[loc.region] * x;
  if (!loc.inside) {
    out.out_of_hull = true;
    out.mode = SupervisionMode::safe_fallback;
    out.phi = 1.0;
    out.u_applied = out.u_safe;
    out.margins = slack(loc.region, x, Eigen::VectorXd::Zero(out.u_safe.size()));
    return out;
  }
  const CriterionResult c = safety_criterion(x, u_rl, out.u_safe);
  if (c.pass) {
    out.mode = SupervisionMode::rl_pass;
    out.phi = 0.0;
    out.u_applied = u_rl;
    out.margins = c.margins;
    return out;
  }
  const Interpolation ip = interpolate_phi(x, u_rl, out.u_safe);
  out.phi = ip.phi;
  out.u_applied = ip.u;
  out.margins = ip.margins;
  if (ip.feasible) {
    out.mode = SupervisionMode::interpolated;
  } else {
    out.mode = SupervisionMode::safe_fallback;
    out.risk_warning = true;
  }
  return out;
}

void write_supervision_csv(std::ostream& os, const std::vector<SupervisionLogEntry>& log)
{
  const Eigen::Index n = log.empty() ? 0 : log.front().x.size();
  const Eigen::Index m = log.empty() ? 0 : log.front().u_rl.size();
  os << "t";
  for (Eigen::Index i = 0; i < n; ++i) os << ",x" << i + 1;
  for (Eigen::Index i = 0; i < m; ++i) os << ",u_rl" << i + 1;
  for (Eigen::Index i = 0; i < m; ++i) os << ",u" << i + 1;
  os << ",phi,mode,min_margin\n";
  os << std::setprecision(17);
  for (const auto& e : log) {
    os << e.t;
    for (Eigen::Index i = 0; i < n; ++i) os << ',' << e.x(i);
    for (Eigen::Index i = 0; i < m; ++i) os << ',' << e.u_rl(i);
    for (Eigen::Index i = 0; i < m; ++i) os << ',' << e.outcome.u_applied(i);
    os << ',' << e.outcome.phi << ',' << to_string(e.outcome.mode) << ',' << e.outcome.min_margin() << '\n';
  }
}

}  // namespace hullguard
