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
#include "hullguard/systems.hpp"

#include <Eigen/SVD>

#include <cmath>

namespace hullguard {

void LtiSystem::validate() const
{
  if (A.rows() == 0 || A.rows() != A.cols()) throw std::invalid_argument("A must be square and non-empty");
  if (B.rows() != A.rows()) throw std::invalid_argument("B must have as many rows as A");
  if (sigma.rows() != A.rows() || sigma.cols() != A.rows()) throw std::invalid_argument("sigma must be n x n");
  for (Eigen::Index i = 0; i < sigma.rows(); ++i) {
    for (Eigen::Index j = 0; j < sigma.cols(); ++j) {
      if (i != j && sigma(i, j) != 0.0) throw std::invalid_argument("sigma must be diagonal");
    }
    if (!(sigma(i, i) >= 0.0)) throw std::invalid_argument("sigma must have nonnegative diagonal");
  }
  if (!A.allFinite() || !B.allFinite()) throw std::invalid_argument("non-finite system matrix");
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream)
{
  // splitmix64 over a combination of the two words
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

NoiseSampler::NoiseSampler(const Eigen::MatrixXd& sigma, std::uint64_t seed)
    : stddev_(sigma.diagonal().cwiseMax(0.0).cwiseSqrt()), rng_(seed)
{
}

Eigen::VectorXd NoiseSampler::draw()
{
  Eigen::VectorXd w(stddev_.size());
  for (Eigen::Index i = 0; i < w.size(); ++i) w(i) = stddev_(i) * normal_(rng_);
  return w;
}

Trajectory simulate_trajectory(const LtiSystem& system, const Eigen::VectorXd& x0, const StatePolicy& policy,
                               int horizon, std::uint64_t seed)
{
  if (horizon < 1) throw std::invalid_argument("horizon must be at least 1");
  system.validate();
  if (x0.size() != system.n()) throw std::invalid_argument("x0 has wrong dimension");
  NoiseSampler noise(system.sigma, seed);
  Trajectory tr;
  tr.states.reserve(horizon + 1);
  tr.states.push_back(x0);
  Eigen::VectorXd x = x0;
  for (int t = 0; t < horizon; ++t) {
    const Eigen::VectorXd u = policy ? policy(x, t) : Eigen::VectorXd::Zero(system.m());
    const Eigen::VectorXd w = noise.draw();
    x = system.A * x + system.B * u + w;
    tr.inputs.push_back(u);
    tr.noises.push_back(w);
    tr.states.push_back(x);
    if (!x.allFinite() || x.cwiseAbs().maxCoeff() > kDivergenceThreshold) {
      tr.diverged = true;
      break;
    }
  }
  return tr;
}

TrajectoryDataset collect_dataset(const LtiSystem& system, const Excitation& excitation, int N, std::uint64_t seed,
                                  bool record_noise)
{
  system.validate();
  if (N < 1) throw std::invalid_argument("N must be positive");
  const Eigen::Index n = system.n();
  const Eigen::Index m = system.m();
  TrajectoryDataset d;
  d.seed = seed;
  d.X0.resize(n, N);
  d.U0.resize(m, N);
  d.X1.resize(n, N);
  Eigen::MatrixXd W(n, N);

  std::mt19937_64 input_rng(derive_seed(seed, 1));
  std::uniform_real_distribution<double> uni(-excitation.amplitude, excitation.amplitude);
  std::normal_distribution<double> gau(0.0, excitation.amplitude);
  NoiseSampler noise(system.sigma, derive_seed(seed, 2));

  Eigen::VectorXd x = excitation.x0 ? *excitation.x0 : Eigen::VectorXd::Zero(n);
  if (x.size() != n) throw std::invalid_argument("excitation x0 has wrong dimension");
  for (int t = 0; t < N; ++t) {
    Eigen::VectorXd u(m);
    for (Eigen::Index i = 0; i < m; ++i) {
      u(i) = excitation.kind == Excitation::Kind::uniform ? uni(input_rng) : gau(input_rng);
    }
    const Eigen::VectorXd w = noise.draw();
    d.X0.col(t) = x;
    d.U0.col(t) = u;
    W.col(t) = w;
    x = system.A * x + system.B * u + w;
    d.X1.col(t) = x;
  }
  if (record_noise) d.W0 = W;
  d.assumption4_ok = validate_data_assumptions(d).assumption4_ok;
  return d;
}

Eigen::Index numerical_rank(const Eigen::MatrixXd& M, double rel_tol)
{
  if (M.size() == 0) return 0;
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(M);
  const Eigen::VectorXd& s = svd.singularValues();
  if (s.size() == 0 || s(0) <= 0.0) return 0;
  Eigen::Index r = 0;
  for (Eigen::Index i = 0; i < s.size(); ++i) {
    if (s(i) > rel_tol * s(0)) ++r;
  }
  return r;
}

DataReport validate_data_assumptions(const TrajectoryDataset& data)
{
  DataReport rep;
  const Eigen::Index n = data.X0.rows();
  const Eigen::Index N = data.X0.cols();
  rep.rank_X0 = numerical_rank(data.X0);
  rep.assumption4_ok = N >= n + 1 && rep.rank_X0 == n;
  Eigen::MatrixXd UX(data.U0.rows() + n, N);
  UX << data.U0, data.X0;
  rep.rank_UX = numerical_rank(UX);
  rep.rank_UX_ok = rep.rank_UX == UX.rows();
  return rep;
}

RightInverse right_inverse_states(const Eigen::MatrixXd& X0)
{
  const Eigen::Index n = X0.rows();
  const Eigen::Index N = X0.cols();
  if (numerical_rank(X0) != n) {
    throw std::invalid_argument("X0 must have full row rank (data rank condition with at least n+1 samples)");
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(X0, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Eigen::VectorXd inv_s = svd.singularValues().cwiseInverse();
  RightInverse out;
  out.G_base = svd.matrixV().leftCols(n) * inv_s.asDiagonal() * svd.matrixU().transpose();
  out.nullspace = svd.matrixV().rightCols(N - n);
  return out;
}

LtiSystem numeric2d_system(double sigma)
{
  LtiSystem s;
  s.A.resize(2, 2);
  s.A << 0.2895, -0.0001, -1.6012, 0.0295;
  s.B.resize(2, 1);
  s.B << 0.0, 1.0;
  s.sigma = sigma * Eigen::MatrixXd::Identity(2, 2);
  return s;
}

std::pair<Eigen::MatrixXd, Eigen::VectorXd> numeric2d_admissible()
{
  Eigen::MatrixXd F(6, 2);
  F << 1.0 / 3.0, 1.0 / 4.0, 0.0, 1.0 / 4.0, -4.0 / 12.0, -1.0 / 12.0, -1.0 / 3.0, -1.0 / 4.0, 0.0, -1.0 / 4.0,
      4.0 / 12.0, 1.0 / 12.0;
  return {F, Eigen::VectorXd::Ones(6)};
}

std::pair<Eigen::MatrixXd, Eigen::VectorXd> lanekeep_admissible(double y_max, double v_max, double phi_max,
                                                                 double psi_max)
{
  const Eigen::Vector4d bounds(y_max, v_max, phi_max, psi_max);
  if ((bounds.array() <= 0.0).any()) throw std::invalid_argument("lane-keeping bounds must be positive");
  Eigen::MatrixXd F = Eigen::MatrixXd::Zero(8, 4);
  Eigen::VectorXd g(8);
  for (int k = 0; k < 4; ++k) {
    F(2 * k, k) = 1.0;
    F(2 * k + 1, k) = -1.0;
    g(2 * k) = bounds(k);
    g(2 * k + 1) = bounds(k);
  }
  return {F, g};
}

LtiSystem lanekeep_system(double Ts, double sigma)
{
  const double V0 = 27.7;
  const double Cf = 133000.0;
  const double Cr = 98800.0;
  const double M = 1650.0;
  const double Iz = 2315.3;
  const double a = 1.11;
  const double b = 1.59;
  LtiSystem s;
  s.A = Eigen::MatrixXd::Identity(4, 4);
  s.A(0, 1) = Ts;
  s.A(0, 2) = V0 * Ts;
  s.A(1, 1) = 1.0 + ((-Cf + Cr) / (M * V0)) * Ts;
  s.A(1, 3) = ((b * Cr - a * Cf) / (M * V0) - V0) * Ts;
  s.A(2, 3) = Ts;
  s.A(3, 1) = ((b * Cr - a * Cf) / (Iz * V0)) * Ts;
  s.B = Eigen::MatrixXd::Zero(4, 1);
  s.B(1, 0) = (Cf / M) * Ts;
  s.B(3, 0) = (a * Cf / Iz) * Ts;
  s.sigma = sigma * Eigen::MatrixXd::Identity(4, 4);
  return s;
}

}  // namespace hullguard
