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
#include "hullguard/policies.hpp"

#include "hullguard/lmi.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <functional>
#include <sstream>

namespace hullguard {

namespace {

constexpr double kReproductionTol = 1e-8;

double reproduction_scale(const Eigen::MatrixXd& K, const Eigen::VectorXd& v)
{
  return std::max(1e-300, K.norm() * v.norm());
}

}  // namespace

PartitionedPolicy precompute_partition_gains(const HullPolytope& hull, const std::vector<PartitionRegion>& regions,
                                             const std::vector<Eigen::MatrixXd>& ellipsoid_gains)
{
  if (ellipsoid_gains.empty()) throw PolicyError("no ellipsoid gains supplied");
  const Eigen::Index n = hull.dim();
  const Eigen::Index m = ellipsoid_gains.front().rows();
  for (const auto& K : ellipsoid_gains) {
    if (K.rows() != m || K.cols() != n) throw PolicyError("ellipsoid gains must all be m x n");
  }
  PartitionedPolicy policy;
  policy.hull = hull;
  policy.ellipsoid_gains = ellipsoid_gains;
  for (std::size_t r = 0; r < regions.size(); ++r) {
    PartitionRegion region = regions[r];
    if (region.V_star.rows() != n || region.V_star.cols() != static_cast<Eigen::Index>(region.vertex_ids.size())) {
      throw PolicyError("region " + std::to_string(r) + ": vertex matrix does not match its vertex list");
    }
    try {
      region.gamma_map = svd_gamma_map(region.V_star);
    } catch (const std::invalid_argument& e) {
      throw PolicyError("region " + std::to_string(r) + " rejected: " + e.what());
    }
    Eigen::MatrixXd U(m, region.V_star.cols());
    for (Eigen::Index k = 0; k < region.V_star.cols(); ++k) {
      const int owner = region.ellipsoid_ids.at(static_cast<std::size_t>(k));
      if (owner < 0 || owner >= static_cast<int>(ellipsoid_gains.size())) {
        throw PolicyError("region " + std::to_string(r) + ": vertex " + std::to_string(region.vertex_ids[k]) +
                          " has no owning ellipsoid");
      }
      U.col(k) = ellipsoid_gains[owner] * region.V_star.col(k);
    }
    policy.gains.push_back(U * region.gamma_map);
    policy.regions.push_back(std::move(region));
  }
  return policy;
}

std::string certificate_id(const HullCertificate& cert)
{
  const std::size_t h = std::hash<std::string>{}(certificate_to_json(cert).dump());
  std::ostringstream os;
  os << std::hex << h;
  return os.str();
}

PartitionedPolicy build_partitioned_policy(const HullCertificate& cert, const PolicyBuildOptions& options)
{
  if (!cert.has_gains()) throw PolicyError("certificate of mode " + to_string(cert.mode) + " carries no gains");
  const int fallback_samples = std::max<int>(16, 8 * static_cast<int>(cert.n()));
  CandidateSet candidates;
  if (cert.n_v() >= cert.n()) {
    candidates = extract_extreme_points(cert.P, options.extreme_points);
  } else {
    // Fewer ellipsoids than dimensions (single-ellipsoid certificates): no tangent systems to solve.
    add_support_points(candidates, cert.P, fallback_samples);
  }
  if (options.support_samples > 0) add_support_points(candidates, cert.P, options.support_samples);
  HullPolytope hull;
  try {
    hull = build_hull_polytope(candidates);
  } catch (const DegenerateHullError&) {
    // Coincident ellipsoids leave too few distinct tangent points; exposed support points
    // of the hull still give a full-dimensional inner polytope.
    add_support_points(candidates, cert.P, fallback_samples);
    hull = build_hull_polytope(candidates);
  }
  PartitionedPolicy policy = precompute_partition_gains(hull, build_partitions(hull), cert.K);
  policy.certificate_id = certificate_id(cert);
  return policy;
}

Location locate_cone(const PartitionedPolicy& policy, const Eigen::VectorXd& x, double tol)
{
  if (x.size() != policy.n()) throw std::invalid_argument("state dimension does not match the policy");
  Location loc;
  loc.hull_gauge = gauge_polytope(policy.hull.F_CH, policy.hull.g_CH, x);
  loc.inside = loc.hull_gauge <= 1.0 + tol;
  loc.region = locate_region(policy.regions, x, tol);
  if (loc.region < 0) throw PolicyError("policy has no regions");
  loc.gamma = policy.regions[loc.region].gamma_map * x;
  return loc;
}

Location locate_partition(const PartitionedPolicy& policy, const Eigen::VectorXd& x, double tol)
{
  Location loc = locate_cone(policy, x, tol);
  if (!loc.inside) {
    std::ostringstream os;
    os << "state outside the hull polytope (gauge " << loc.hull_gauge << ")";
    throw OutOfHullError(os.str());
  }
  return loc;
}

Eigen::VectorXd safe_control(const PartitionedPolicy& policy, const Eigen::VectorXd& x)
{
  const Location loc = locate_partition(policy, x);
  return policy.gains[loc.region] * x;
}

Eigen::VectorXd fallback_control(const PartitionedPolicy& policy, const Eigen::VectorXd& x)
{
  const Location loc = locate_cone(policy, x);
  return policy.gains[loc.region] * x;
}

double vertex_reproduction_error(const PartitionedPolicy& policy)
{
  double worst = 0.0;
  for (std::size_t r = 0; r < policy.regions.size(); ++r) {
    const PartitionRegion& region = policy.regions[r];
    for (Eigen::Index k = 0; k < region.V_star.cols(); ++k) {
      const Eigen::MatrixXd& K = policy.ellipsoid_gains.at(region.ellipsoid_ids.at(k));
      const Eigen::VectorXd v = region.V_star.col(k);
      const double err = (policy.gains[r] * v - K * v).norm() / reproduction_scale(K, v);
      worst = std::max(worst, err);
    }
  }
  return worst;
}

json policy_to_json(const PartitionedPolicy& policy)
{
  json j;
  j["format"] = "hullguard-policy/1";
  j["certificate_id"] = policy.certificate_id;
  j["hull"] = {{"vertices", vectors_to_json(policy.hull.vertices)},
               {"vertex_owner", policy.hull.vertex_owner},
               {"F", matrix_to_json(policy.hull.F_CH)},
               {"g", vector_to_json(policy.hull.g_CH)},
               {"facets", policy.hull.facets},
               {"facet_row", policy.hull.facet_row}};
  j["ellipsoid_gains"] = matrices_to_json(policy.ellipsoid_gains);
  json regions = json::array();
  for (std::size_t r = 0; r < policy.regions.size(); ++r) {
    const PartitionRegion& region = policy.regions[r];
    regions.push_back({{"vertex_ids", region.vertex_ids},
                       {"ellipsoid_ids", region.ellipsoid_ids},
                       {"facet_row", region.facet_row},
                       {"gain", matrix_to_json(policy.gains[r])}});
  }
  j["regions"] = regions;
  return j;
}

PartitionedPolicy policy_from_json(const json& j)
{
  try {
    if (j.value("format", std::string()) != "hullguard-policy/1") throw PolicyError("not a hullguard policy document");
    const json& h = j.at("hull");
    HullPolytope hull;
    hull.vertices = vectors_from_json(h.at("vertices"));
    hull.vertex_owner = h.at("vertex_owner").get<std::vector<int>>();
    hull.F_CH = matrix_from_json(h.at("F"));
    hull.g_CH = vector_from_json(h.at("g"));
    hull.facets = h.at("facets").get<std::vector<std::vector<int>>>();
    hull.facet_row = h.at("facet_row").get<std::vector<int>>();
    if (hull.vertex_owner.size() != hull.vertices.size() || hull.facets.size() != hull.facet_row.size() ||
        hull.F_CH.rows() != hull.g_CH.size()) {
      throw PolicyError("inconsistent hull description");
    }
    const std::vector<Eigen::MatrixXd> K = matrices_from_json(j.at("ellipsoid_gains"));

    std::vector<PartitionRegion> regions;
    std::vector<Eigen::MatrixXd> stored;
    for (const json& rj : j.at("regions")) {
      PartitionRegion region;
      region.vertex_ids = rj.at("vertex_ids").get<std::vector<int>>();
      region.ellipsoid_ids = rj.at("ellipsoid_ids").get<std::vector<int>>();
      region.facet_row = rj.at("facet_row").get<int>();
      if (region.ellipsoid_ids.size() != region.vertex_ids.size()) throw PolicyError("region owner list mismatch");
      region.V_star.resize(hull.dim(), static_cast<Eigen::Index>(region.vertex_ids.size()));
      for (std::size_t k = 0; k < region.vertex_ids.size(); ++k) {
        const int id = region.vertex_ids[k];
        if (id < 0 || id >= static_cast<int>(hull.vertices.size())) throw PolicyError("region vertex id out of range");
        if (hull.vertex_owner[id] != region.ellipsoid_ids[k]) throw PolicyError("region owner disagrees with hull");
        region.V_star.col(static_cast<Eigen::Index>(k)) = hull.vertices[id];
      }
      regions.push_back(std::move(region));
      stored.push_back(matrix_from_json(rj.at("gain")));
    }
    PartitionedPolicy policy = precompute_partition_gains(hull, regions, K);
    policy.certificate_id = j.value("certificate_id", std::string());
    for (std::size_t r = 0; r < stored.size(); ++r) {
      const Eigen::MatrixXd& G = policy.gains[r];
      if (stored[r].rows() != G.rows() || stored[r].cols() != G.cols() ||
          (stored[r] - G).norm() > kReproductionTol * std::max(1.0, G.norm())) {
        throw PolicyError("stored gain of region " + std::to_string(r) + " disagrees with its vertices");
      }
      policy.gains[r] = stored[r];
    }
    const double err = vertex_reproduction_error(policy);
    if (!(err <= kReproductionTol)) {
      std::ostringstream os;
      os << "vertex reproduction error " << err << " exceeds " << kReproductionTol;
      throw PolicyError(os.str());
    }
    return policy;
  } catch (const json::exception& e) {
    throw PolicyError(std::string("malformed policy document: ") + e.what());
  }
}

double spectral_radius(const Eigen::MatrixXd& M)
{
  if (M.size() == 0) return 0.0;
  return Eigen::EigenSolver<Eigen::MatrixXd>(M, false).eigenvalues().cwiseAbs().maxCoeff();
}

LqrPolicy lqr_riccati(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B, const Eigen::MatrixXd& Q,
                      const Eigen::MatrixXd& R, int max_iterations, double tol)
{
  const Eigen::Index n = A.rows();
  const Eigen::Index m = B.cols();
  if (A.cols() != n || B.rows() != n || Q.rows() != n || Q.cols() != n || R.rows() != m || R.cols() != m) {
    throw std::invalid_argument("lqr_riccati: inconsistent dimensions");
  }
  if (lmi::min_eigenvalue(Q) < -1e-12 * std::max(1.0, Q.norm())) throw std::invalid_argument("Q must be PSD");
  if (lmi::min_eigenvalue(R) <= 0.0) throw std::invalid_argument("R must be positive definite");

  LqrPolicy out;
  out.Q = Q;
  out.R = R;
  Eigen::MatrixXd P = Q;
  for (int it = 1; it <= max_iterations; ++it) {
    const Eigen::MatrixXd BtPA = B.transpose() * P * A;
    const Eigen::MatrixXd S = R + B.transpose() * P * B;
    Eigen::MatrixXd next = Q + A.transpose() * P * A - BtPA.transpose() * S.ldlt().solve(BtPA);
    next = 0.5 * (next + next.transpose());
    const double change = (next - P).cwiseAbs().maxCoeff();
    P = std::move(next);
    if (!P.allFinite()) break;
    if (change <= tol * std::max(1.0, P.cwiseAbs().maxCoeff())) {
      out.iterations = it;
      out.P = P;
      out.K = -(R + B.transpose() * P * B).ldlt().solve(B.transpose() * P * A);
      const double rho = spectral_radius(A + B * out.K);
      if (!(rho < 1.0)) {
        std::ostringstream os;
        os << "LQR closed loop is not stable (spectral radius " << rho << ")";
        throw std::runtime_error(os.str());
      }
      return out;
    }
  }
  throw std::runtime_error("Riccati value iteration did not converge in " + std::to_string(max_iterations) +
                           " iterations");
}

}  // namespace hullguard
