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

#include "hullguard/policies.hpp"
#include "hullguard/synthesis.hpp"

#include <Eigen/Dense>

#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

namespace hullguard {

class RiskAllocationError : public std::invalid_argument
{
public:
  using std::invalid_argument::invalid_argument;
};

/// sqrt((1 - eps_s) / eps_s)
double kappa(double epsilon_s);

/**
 * @brief Split of a joint risk budget over the rows of a polytope.
 */
struct RiskAllocation
{
  double epsilon = 0.1;
  std::vector<double> epsilon_s;
  std::vector<double> kappa_s;

  /// epsilon / rows on every row.
  static RiskAllocation uniform(double epsilon, Eigen::Index rows);
  /// Throws RiskAllocationError unless eps_s > 0, sum eps_s <= epsilon and kappa_s matches.
  void validate() const;
};

/// Input matrix prior B ~ N(B_n, Delta_B); Delta_B is n x m.
struct BPrior
{
  Eigen::MatrixXd B_n;
  Eigen::MatrixXd Delta_B;
};

/// Tr(G P G') Sigma + Sigma + Delta_B du du' Delta_B'
Eigen::MatrixXd compute_VR(double variance_trace, const Eigen::MatrixXd& sigma, const Eigen::MatrixXd& Delta_B,
                           const Eigen::VectorXd& delta_u);

struct Tightening
{
  Eigen::VectorXd gamma;           ///< kappa_s sqrt(F_s V F_s')
  std::vector<int> unsatisfiable;  ///< rows with gamma_s >= g_s
};

Tightening tighten_rows(const RiskAllocation& risk, const Eigen::MatrixXd& V, const Eigen::MatrixXd& F,
                        const Eigen::VectorXd& g);

enum class SupervisionMode
{
  rl_pass,
  interpolated,
  safe_fallback,
};

std::string to_string(SupervisionMode mode);

struct CriterionResult
{
  bool pass = false;
  bool out_of_hull = false;
  int region = -1;
  Eigen::VectorXd margins;  ///< g - gamma - F m, per hull row
  Eigen::VectorXd mean;     ///< predicted successor mean m
};

struct Interpolation
{
  double phi = 1.0;
  Eigen::VectorXd u;
  bool feasible = false;  ///< false when even phi = 1 violates a tightened row
  Eigen::VectorXd margins;
};

struct SupervisionOutcome
{
  Eigen::VectorXd u_applied;
  Eigen::VectorXd u_safe;
  double phi = 0.0;
  SupervisionMode mode = SupervisionMode::rl_pass;
  Eigen::VectorXd margins;
  int region = -1;
  bool out_of_hull = false;
  bool risk_warning = false;  ///< tightened rows unsatisfiable even with the safe action

  double min_margin() const { return margins.size() ? margins.minCoeff() : 0.0; }
};

/**
 * @brief Runtime filter that blends an unconstrained action with the partitioned safe policy.
 *
 * The predicted mean successor in region p is M_p x + B_n (u_rl - u_safe), where
 * M_p = [M_{o_1} v_1, ..., M_{o_r} v_r] Gamma_p is the closed loop of the safe policy on that
 * region assembled from the certificate maps M_i = X_1 G_{K,i}. The variance term uses the
 * largest Tr(G_{K,i} P_i G_{K,i}') among the region's owners. Immutable after construction.
 */
class Supervisor
{
public:
  Supervisor(HullCertificate certificate, PartitionedPolicy policy, Eigen::MatrixXd sigma, BPrior prior,
             RiskAllocation risk, double bisection_tol = 1e-6);

  const HullCertificate& certificate() const { return cert_; }
  const PartitionedPolicy& policy() const { return policy_; }
  const RiskAllocation& risk() const { return risk_; }
  const BPrior& prior() const { return prior_; }
  const Eigen::MatrixXd& sigma() const { return sigma_; }
  const Eigen::MatrixXd& region_map(int region) const { return region_map_.at(region); }
  double region_variance(int region) const { return region_variance_.at(region); }

  Eigen::MatrixXd compute_VR(int region, const Eigen::VectorXd& delta_u) const;

  /// Checks F_CH,s m <= 1 - gamma_s on every hull row for the action gap u_rl - u_safe.
  CriterionResult safety_criterion(const Eigen::VectorXd& x, const Eigen::VectorXd& u_rl,
                                   const Eigen::VectorXd& u_safe) const;

  /// Smallest phi in [0, 1] (to bisection_tol) whose blended action passes the criterion.
  Interpolation interpolate_phi(const Eigen::VectorXd& x, const Eigen::VectorXd& u_rl,
                                const Eigen::VectorXd& u_safe) const;

  SupervisionOutcome supervise(const Eigen::VectorXd& x, const Eigen::VectorXd& u_rl) const;

private:
  Eigen::VectorXd slack(int region, const Eigen::VectorXd& x, const Eigen::VectorXd& delta_u,
                        Eigen::VectorXd* mean = nullptr) const;

  HullCertificate cert_;
  PartitionedPolicy policy_;
  Eigen::MatrixXd sigma_;
  BPrior prior_;
  RiskAllocation risk_;
  double bisection_tol_;
  std::vector<Eigen::MatrixXd> region_map_;
  std::vector<double> region_variance_;
};

struct SupervisionLogEntry
{
  int t = 0;
  Eigen::VectorXd x;
  Eigen::VectorXd u_rl;
  SupervisionOutcome outcome;
};

/// CSV with columns t, x_1..x_n, u_rl_1..u_rl_m, u_1..u_m, phi, mode, min_margin.
void write_supervision_csv(std::ostream& os, const std::vector<SupervisionLogEntry>& log);

}  // namespace hullguard
