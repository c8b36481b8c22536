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
#include "hullguard/lmi.hpp"
#include "hullguard/systems.hpp"

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace hullguard {

/// Invalid synthesis inputs (bad configuration, missing data, failed data assumptions).
class SynthesisError : public std::invalid_argument
{
public:
  using std::invalid_argument::invalid_argument;
};

enum class SynthesisMode
{
  open_loop,
  model_csie,
  data_ce,
  data_minvar,
  single_baseline,
};

std::string to_string(SynthesisMode mode);
SynthesisMode synthesis_mode_from_string(const std::string& name);

enum class DirectionRule
{
  spaced,    ///< n = 2: equally spaced angles from the farthest vertex; n > 2: far vertices
  vertices,  ///< polytope vertices by decreasing norm, one per +/- pair
};

struct SynthesisConfig
{
  double lambda = 0.8;
  double delta = 0.1;
  int n_v = 3;
  std::vector<Eigen::VectorXd> directions;  ///< empty: default_directions()
  DirectionRule direction_rule = DirectionRule::spaced;
  std::vector<double> tau_grid;  ///< empty: default_tau_grid(lambda)
  bool refine_tau = false;       ///< one coordinate-descent pass over per-ellipsoid tau
  double weight_mu = 1.0;
  double weight_eta = 1.0;
  double weight_zeta = 1.0;
  double margin_scale = 1e-4;  ///< P_i >= margin_scale * (min_l g_l / |F_l|)^2 I
  bool ce_noise_measured = true;  ///< false: CE mode treats W0 as zero
  lmi::SolverOptions solver = lmi::SolverOptions::from_environment();

  /// Throws SynthesisError. n_v >= n is not required when allow_single is set.
  void validate(Eigen::Index n, bool allow_single = false) const;
};

/// Solved hull of ellipsoids E(P_i) with per-ellipsoid gains and the data needed to re-verify it.
struct HullCertificate
{
  SynthesisMode mode = SynthesisMode::model_csie;
  double lambda = 1.0;
  double delta = 0.1;
  double delta_n = 0.0;
  Eigen::MatrixXd F;
  Eigen::VectorXd g;
  std::vector<Eigen::VectorXd> directions;

  std::vector<Eigen::MatrixXd> P;
  std::vector<double> mu;
  std::vector<Eigen::MatrixXd> K;  ///< empty for open loop
  std::vector<Eigen::MatrixXd> S;  ///< model modes
  std::vector<Eigen::MatrixXd> Y;  ///< data modes
  std::vector<Eigen::MatrixXd> H;  ///< minvar
  std::vector<double> eta;
  std::vector<double> zeta;
  std::vector<double> tau;

  /// Mean one-step map certified by the contraction block of ellipsoid i (A + B K_i, or the data form).
  std::vector<Eigen::MatrixXd> closed_loop_map;
  /// Tr(G_i P_i G_i') with G_i = Y_i P_i^{-1}; zero for model modes.
  std::vector<double> variance_trace;

  Eigen::MatrixXd X0;          ///< data modes
  Eigen::MatrixXd U0;          ///< data modes
  Eigen::MatrixXd X1;          ///< successor data of the contraction block (X1 - W0 for CE)
  Eigen::MatrixXd sigma_sqrt;  ///< minvar

  double objective = 0.0;
  double max_psd_violation = 0.0;
  double max_equality_violation = 0.0;
  double p_min = 0.0;

  Eigen::Index n() const { return P.empty() ? 0 : P.front().rows(); }
  int n_v() const { return static_cast<int>(P.size()); }
  bool has_gains() const { return !K.empty(); }
  /// Zero-based index of the ellipsoid feeding ellipsoid i in the contraction block.
  int predecessor(int i) const;
};

enum class SynthesisStatus
{
  feasible,
  infeasible,
  numerical_failure,
};

std::string to_string(SynthesisStatus status);

struct SynthesisResult
{
  SynthesisStatus status = SynthesisStatus::numerical_failure;
  std::optional<HullCertificate> certificate;
  lmi::InfeasibilityCertificate infeasibility;
  std::vector<double> tau_tried;
  std::string message;
  double seconds = 0.0;

  bool feasible() const { return status == SynthesisStatus::feasible; }
};

/// n + 2 sqrt(n ln(1/delta)) + 2 ln(1/delta)
double confidence_scale(Eigen::Index n, double delta);

/// points values evenly spread over [0.05 lambda, 0.95 lambda].
std::vector<double> default_tau_grid(double lambda, int points = 15);

std::vector<Eigen::VectorXd> default_directions(const PolyhedralSetd& polytope, int n_v,
                                                DirectionRule rule = DirectionRule::spaced);

/// Lower bound imposed on every shape matrix.
double strictness_margin(const PolyhedralSetd& polytope, double scale);

SynthesisResult synth_open_loop(const Eigen::MatrixXd& A, const PolyhedralSetd& polytope,
                                const SynthesisConfig& config);
SynthesisResult synth_model_based(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B, const PolyhedralSetd& polytope,
                                  const SynthesisConfig& config);
SynthesisResult synth_data_ce(const TrajectoryDataset& data, const PolyhedralSetd& polytope,
                              const SynthesisConfig& config);
SynthesisResult synth_data_minvar(const TrajectoryDataset& data, const Eigen::MatrixXd& sigma,
                                  const PolyhedralSetd& polytope, const SynthesisConfig& config);
/// One ellipsoid contracting into itself under A + B K.
SynthesisResult synth_single_baseline(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B,
                                      const PolyhedralSetd& polytope, const SynthesisConfig& config);

struct CertificateCheck
{
  bool ok = false;
  double max_psd_violation = 0.0;
  double max_equality_violation = 0.0;
  double gain_residual = 0.0;
  bool schur_consistent = true;
  std::string detail;
};

/// Rebuilds every block of the generating program at the stored values and checks it.
CertificateCheck verify_certificate(const HullCertificate& cert, double tol = 1e-6,
                                    std::optional<double> lambda_override = std::nullopt);

struct ContractionReport
{
  double worst_hull_level = 0.0;    ///< max over samples of min_k y' P_k^{-1} y, y the successor
  double worst_cyclic_level = 0.0;  ///< max over samples of y' P_i^{-1} y, i the cyclic successor
  int samples = 0;
};

/// Maps boundary samples of each E(P_j) through closed_loop_map_j.
ContractionReport check_contraction(const HullCertificate& cert, int samples_per_ellipsoid, std::uint64_t seed);

/// min_k x' P_k^{-1} x
double hull_level(const HullCertificate& cert, const Eigen::VectorXd& x);

json certificate_to_json(const HullCertificate& cert);
HullCertificate certificate_from_json(const json& j);

}  // namespace hullguard
