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

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace hullguard {

/// Stochastic plant x+ = A x + B u + w with w ~ N(0, sigma), sigma diagonal.
struct LtiSystem
{
  Eigen::MatrixXd A;
  Eigen::MatrixXd B;
  Eigen::MatrixXd sigma;

  Eigen::Index n() const { return A.rows(); }
  Eigen::Index m() const { return B.cols(); }

  /// Throws std::invalid_argument on inconsistent dimensions or a non-diagonal / negative sigma.
  void validate() const;
};

/// Seeds for independent streams derived from one user seed.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream);

/// Draws w ~ N(0, sigma) for a diagonal sigma.
class NoiseSampler
{
public:
  NoiseSampler(const Eigen::MatrixXd& sigma, std::uint64_t seed);
  Eigen::VectorXd draw();
  std::mt19937_64& engine() { return rng_; }

private:
  Eigen::VectorXd stddev_;
  std::mt19937_64 rng_;
  std::normal_distribution<double> normal_{0.0, 1.0};
};

using StatePolicy = std::function<Eigen::VectorXd(const Eigen::VectorXd& x, int t)>;

struct Trajectory
{
  std::vector<Eigen::VectorXd> states;  ///< horizon + 1 entries unless diverged
  std::vector<Eigen::VectorXd> inputs;
  std::vector<Eigen::VectorXd> noises;
  bool diverged = false;
};

inline constexpr double kDivergenceThreshold = 1e9;

Trajectory simulate_trajectory(const LtiSystem& system, const Eigen::VectorXd& x0, const StatePolicy& policy,
                               int horizon, std::uint64_t seed);

struct Excitation
{
  enum class Kind
  {
    uniform,
    gaussian
  };
  Kind kind = Kind::uniform;
  double amplitude = 1.0;  ///< half-width for uniform, standard deviation for gaussian
  std::optional<Eigen::VectorXd> x0;  ///< initial state of the data run, zero by default
};

struct TrajectoryDataset
{
  Eigen::MatrixXd X0;
  Eigen::MatrixXd U0;
  Eigen::MatrixXd X1;
  std::optional<Eigen::MatrixXd> W0;
  std::uint64_t seed = 0;
  bool assumption4_ok = false;

  Eigen::Index n() const { return X0.rows(); }
  Eigen::Index m() const { return U0.rows(); }
  Eigen::Index samples() const { return X0.cols(); }
};

/// One data run of N steps under the excitation; W0 kept only when record_noise.
TrajectoryDataset collect_dataset(const LtiSystem& system, const Excitation& excitation, int N, std::uint64_t seed,
                                  bool record_noise);

struct DataReport
{
  bool assumption4_ok = false;
  bool rank_UX_ok = false;
  Eigen::Index rank_X0 = 0;
  Eigen::Index rank_UX = 0;
};

DataReport validate_data_assumptions(const TrajectoryDataset& data);

/// Numerical rank with relative tolerance on the singular values.
Eigen::Index numerical_rank(const Eigen::MatrixXd& M, double rel_tol = 1e-10);

struct RightInverse
{
  Eigen::MatrixXd G_base;     ///< N x n with X0 G_base = I
  Eigen::MatrixXd nullspace;  ///< N x (N - n), orthonormal, X0 nullspace = 0
};

/// Throws std::invalid_argument when X0 does not have full row rank.
RightInverse right_inverse_states(const Eigen::MatrixXd& X0);

/// Numeric 2D plant of the simulation section, noise sigma*I.
LtiSystem numeric2d_system(double sigma);
/// Admissible hexagon of the numeric 2D plant as (F, g) with g = 1.
std::pair<Eigen::MatrixXd, Eigen::VectorXd> numeric2d_admissible();

/// Lateral lane-keeping model discretized with step Ts, noise sigma*I.
LtiSystem lanekeep_system(double Ts, double sigma);
/// Box |y| <= y_max, |v| <= v_max, |phi| <= phi_max, |psi| <= psi_max as (F, g).
std::pair<Eigen::MatrixXd, Eigen::VectorXd> lanekeep_admissible(double y_max, double v_max, double phi_max,
                                                                 double psi_max);

}  // namespace hullguard
