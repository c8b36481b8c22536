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

#include "hullguard/geometry.hpp"
#include "hullguard/json_io.hpp"
#include "hullguard/synthesis.hpp"

#include <Eigen/Dense>

#include <stdexcept>
#include <string>
#include <vector>

namespace hullguard {

/// Raised when a state lies outside the hull polytope of a partitioned policy.
class OutOfHullError : public std::runtime_error
{
public:
  using std::runtime_error::runtime_error;
};

/// Raised for rank-deficient regions and for policies that fail validation on import.
class PolicyError : public std::invalid_argument
{
public:
  using std::invalid_argument::invalid_argument;
};

/**
 * @brief Piecewise-linear safe policy u = K^p x on the facet cones of the hull polytope.
 *
 * Immutable after construction; evaluation is pure.
 */
struct PartitionedPolicy
{
  HullPolytope hull;
  std::vector<PartitionRegion> regions;
  std::vector<Eigen::MatrixXd> gains;            ///< K^p per region, m x n
  std::vector<Eigen::MatrixXd> ellipsoid_gains;  ///< K_i per ellipsoid
  std::string certificate_id;

  Eigen::Index n() const { return hull.dim(); }
  Eigen::Index m() const { return ellipsoid_gains.empty() ? 0 : ellipsoid_gains.front().rows(); }
};

/// K^p = [K_{o_1} v_1, ..., K_{o_r} v_r] V_v S_v^{-1} U_v' per region, where o_k owns vertex v_k.
PartitionedPolicy precompute_partition_gains(const HullPolytope& hull, const std::vector<PartitionRegion>& regions,
                                             const std::vector<Eigen::MatrixXd>& ellipsoid_gains);

struct PolicyBuildOptions
{
  ExtremePointOptions extreme_points;
  int support_samples = 0;  ///< extra exposed hull points along sampled directions
};

/// Extreme points, hull polytope, partitions and gains for a certificate carrying gains.
PartitionedPolicy build_partitioned_policy(const HullCertificate& cert, const PolicyBuildOptions& options = {});

/// Stable identifier of a certificate (hash of its serialized form).
std::string certificate_id(const HullCertificate& cert);

struct Location
{
  int region = -1;
  Eigen::VectorXd gamma;    ///< barycentric weights, V* gamma = x
  double hull_gauge = 0.0;  ///< max_s F_CH,s x
  bool inside = true;
};

/// Region whose facet cone contains x; throws OutOfHullError when the hull gauge exceeds 1 + tol.
Location locate_partition(const PartitionedPolicy& policy, const Eigen::VectorXd& x, double tol = 1e-9);

/// Same lookup without the hull check; inside reports whether x lies in the hull.
Location locate_cone(const PartitionedPolicy& policy, const Eigen::VectorXd& x, double tol = 1e-9);

/// K^p x for the region containing x; propagates OutOfHullError.
Eigen::VectorXd safe_control(const PartitionedPolicy& policy, const Eigen::VectorXd& x);

/// Gain of the cone containing x applied regardless of the hull bound (out-of-hull fallback).
Eigen::VectorXd fallback_control(const PartitionedPolicy& policy, const Eigen::VectorXd& x);

/// Largest relative residual of K^p v* - K_i v* over every region vertex.
double vertex_reproduction_error(const PartitionedPolicy& policy);

json policy_to_json(const PartitionedPolicy& policy);
/// Rebuilds the policy and rejects it unless gamma maps and vertex reproduction check out (1e-8).
PartitionedPolicy policy_from_json(const json& j);

/// Unconstrained optimal baseline u = K x for the quadratic cost x'Qx + u'Ru.
struct LqrPolicy
{
  Eigen::MatrixXd K;
  Eigen::MatrixXd Q;
  Eigen::MatrixXd R;
  Eigen::MatrixXd P;  ///< Riccati fixed point
  int iterations = 0;

  Eigen::VectorXd control(const Eigen::VectorXd& x) const { return K * x; }
};

/**
 * Value iteration P <- Q + A'PA - A'PB (R + B'PB)^{-1} B'PA from P = Q until the largest entry
 * change is below tol * max(1, |P|_max); K = -(R + B'PB)^{-1} B'PA.
 * Throws std::runtime_error on non-convergence or an unstable closed loop.
 */
LqrPolicy lqr_riccati(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B, const Eigen::MatrixXd& Q,
                      const Eigen::MatrixXd& R, int max_iterations = 100000, double tol = 1e-9);

double spectral_radius(const Eigen::MatrixXd& M);

}  // namespace hullguard
