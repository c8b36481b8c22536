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
#include "hullguard/synthesis.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <future>
#include <limits>
#include <random>
#include <sstream>

namespace hullguard {

namespace {

using lmi::AffineMatrix;
using Clock = std::chrono::steady_clock;

constexpr double kCertificateTol = 1e-6;

double seconds_since(Clock::time_point t0)
{
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

Eigen::MatrixXd symmetrize(const Eigen::MatrixXd& m) { return 0.5 * (m + m.transpose()); }

Eigen::MatrixXd psd_sqrt(const Eigen::MatrixXd& m)
{
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(symmetrize(m));
  const Eigen::VectorXd ev = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
}

/// s * M for a 1x1 expression s, assembled row by row.
AffineMatrix scalar_times(const AffineMatrix& s, const Eigen::MatrixXd& M)
{
  AffineMatrix out = AffineMatrix::zeros(M.rows(), M.cols());
  for (Eigen::Index r = 0; r < M.rows(); ++r) {
    const Eigen::MatrixXd e = Eigen::MatrixXd::Identity(M.rows(), M.rows()).col(r);
    out += e * s * Eigen::MatrixXd(M.row(r));
  }
  return out;
}

int predecessor_index(int i, int n_v) { return rotational_index(i + 1, n_v) - 1; }

/// Which contraction block to assemble.
enum class Contraction
{
  open_loop,
  model,
  data_ce,
  data_minvar,
};

struct ProgramInputs
{
  SynthesisMode mode = SynthesisMode::model_csie;
  Contraction contraction = Contraction::model;
  Eigen::MatrixXd A;
  Eigen::MatrixXd B;
  Eigen::MatrixXd X0;
  Eigen::MatrixXd U0;
  Eigen::MatrixXd X1;  ///< successor data used in the contraction block
  Eigen::MatrixXd sigma_sqrt;
  RightInverse rinv;
  bool input_basis = false;  ///< [X0; U0] has full row rank: parametrize Y by (P, S = U0 Y)
  Eigen::MatrixXd R;         ///< right inverse of [X0; U0]
  Eigen::MatrixXd R_null;    ///< kernel basis of [X0; U0]
  double delta_n = 0.0;
  const PolyhedralSetd* polytope = nullptr;
  std::vector<Eigen::VectorXd> directions;
  double p_min = 0.0;
  bool self_loop = false;  ///< single ellipsoid, i = j
};

struct Program
{
  lmi::SdpProblem prob;
  std::vector<AffineMatrix> P, S, Y, H, mu, eta, zeta;
};

void build_program(Program& pr, const ProgramInputs& in, const SynthesisConfig& cfg, const std::vector<double>& tau)
{
  const PolyhedralSetd& poly = *in.polytope;
  const Eigen::Index n = poly.dim();
  const int n_v = static_cast<int>(in.directions.size());
  const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(n, n);
  lmi::SdpProblem& prob = pr.prob;
  const bool data = in.contraction == Contraction::data_ce || in.contraction == Contraction::data_minvar;
  const Eigen::Index N = in.X0.cols();

  for (int i = 0; i < n_v; ++i) {
    const std::string k = std::to_string(i + 1);
    pr.P.push_back(prob.add_symmetric("P" + k, n));
    pr.mu.push_back(prob.add_scalar("mu" + k));
    if (in.contraction == Contraction::model) pr.S.push_back(prob.add_matrix("S" + k, in.B.cols(), n));
    if (data && in.input_basis) {
      // Y_i = R [P_i; S_i] + N_1 Z_i satisfies X0 Y_i = P_i and U0 Y_i = S_i identically.
      const Eigen::Index m = in.U0.rows();
      pr.S.push_back(prob.add_matrix("S" + k, m, n));
      AffineMatrix Yi = in.R.leftCols(n) * pr.P[i] + in.R.rightCols(m) * pr.S[i];
      if (in.R_null.cols() > 0) Yi += in.R_null * prob.add_matrix("Z" + k, in.R_null.cols(), n);
      pr.Y.push_back(Yi);
    } else if (data) {
      // Y_i = G P_i + N_0 Z_i satisfies X0 Y_i = P_i identically.
      AffineMatrix Yi = in.rinv.G_base * pr.P[i];
      if (N > n) Yi += in.rinv.nullspace * prob.add_matrix("Z" + k, N - n, n);
      pr.Y.push_back(Yi);
    }
    if (in.contraction == Contraction::data_minvar) {
      pr.H.push_back(prob.add_symmetric("H" + k, N));
      pr.eta.push_back(prob.add_scalar("eta" + k));
      pr.zeta.push_back(prob.add_scalar("zeta" + k));
    }
  }

  for (int i = 0; i < n_v; ++i) {
    const AffineMatrix& Pi = pr.P[i];
    prob.add_psd(Pi - in.p_min * AffineMatrix::identity(n), "margin");
    for (Eigen::Index l = 0; l < poly.rows(); ++l) {
      const Eigen::MatrixXd Fl = poly.F().row(l);
      prob.add_psd(AffineMatrix::scalar(poly.g()(l) * poly.g()(l)) - Fl * Pi * Eigen::MatrixXd(Fl.transpose()),
                   "containment");
    }
    const Eigen::MatrixXd dT = in.directions[i].transpose();
    prob.add_psd({{AffineMatrix::scalar(1.0), pr.mu[i] * dT}, {Pi}}, "direction");

    const int j = in.self_loop ? i : predecessor_index(i, n_v);
    const AffineMatrix& Pj = pr.P[j];
    switch (in.contraction) {
      case Contraction::open_loop:
        prob.add_psd({{Pi, in.A * Pj}, {cfg.lambda * Pj}}, "contraction");
        break;
      case Contraction::model:
        prob.add_psd({{Pi, in.A * Pj + in.B * pr.S[j]}, {cfg.lambda * Pj}}, "contraction");
        break;
      case Contraction::data_ce:
        prob.add_psd({{Pi, in.X1 * pr.Y[j]}, {cfg.lambda * Pj}}, "contraction");
        break;
      case Contraction::data_minvar: {
        prob.add_psd({{Pi, in.X1 * pr.Y[j], scalar_times(pr.eta[j], in.sigma_sqrt)},
                      {(cfg.lambda - tau[j]) * Pj, AffineMatrix::zeros(n, n)},
                      {AffineMatrix(tau[j] / in.delta_n * I)}},
                     "contraction");
        prob.add_psd({{pr.H[i], pr.Y[i]}, {Pi}}, "variance");
        prob.add_psd({{pr.zeta[i] + AffineMatrix::scalar(1.0), pr.eta[i]}, {AffineMatrix::scalar(1.0)}}, "eta_zeta");
        prob.add_psd(pr.zeta[i] - trace(pr.H[i]), "trace");
        prob.add_psd(pr.eta[i], "eta_positive");
        break;
      }
    }
  }

  AffineMatrix obj = AffineMatrix::scalar(0.0);
  for (int i = 0; i < n_v; ++i) {
    obj += cfg.weight_mu * pr.mu[i];
    if (in.contraction == Contraction::data_minvar) obj -= cfg.weight_eta * pr.eta[i] + cfg.weight_zeta * pr.zeta[i];
  }
  prob.maximize(obj);
}

HullCertificate extract(const Program& pr, const lmi::SdpSolution& sol, const ProgramInputs& in,
                        const SynthesisConfig& cfg, const std::vector<double>& tau)
{
  HullCertificate c;
  c.mode = in.mode;
  c.lambda = cfg.lambda;
  c.delta = cfg.delta;
  c.delta_n = in.delta_n;
  c.F = in.polytope->F();
  c.g = in.polytope->g();
  c.directions = in.directions;
  c.p_min = in.p_min;
  c.objective = sol.objective;
  c.max_psd_violation = sol.max_psd_violation;
  c.max_equality_violation = sol.max_equality_violation;
  const int n_v = static_cast<int>(pr.P.size());
  for (int i = 0; i < n_v; ++i) {
    c.P.push_back(symmetrize(sol.value(pr.P[i])));
    c.mu.push_back(sol.scalar(pr.mu[i]));
  }
  const bool data = in.contraction == Contraction::data_ce || in.contraction == Contraction::data_minvar;
  for (int i = 0; i < n_v; ++i) {
    const Eigen::MatrixXd Pinv = c.P[i].inverse();
    switch (in.contraction) {
      case Contraction::open_loop:
        c.closed_loop_map.push_back(in.A);
        c.variance_trace.push_back(0.0);
        break;
      case Contraction::model: {
        c.S.push_back(sol.value(pr.S[i]));
        c.K.push_back(c.S.back() * Pinv);
        c.closed_loop_map.push_back(in.A + in.B * c.K.back());
        c.variance_trace.push_back(0.0);
        break;
      }
      case Contraction::data_ce:
      case Contraction::data_minvar: {
        c.Y.push_back(sol.value(pr.Y[i]));
        c.K.push_back(in.U0 * c.Y.back() * Pinv);
        c.closed_loop_map.push_back(in.X1 * c.Y.back() * Pinv);
        c.variance_trace.push_back((c.Y.back() * Pinv * c.Y.back().transpose()).trace());
        break;
      }
    }
    if (in.contraction == Contraction::data_minvar) {
      c.H.push_back(symmetrize(sol.value(pr.H[i])));
      c.eta.push_back(sol.scalar(pr.eta[i]));
      c.zeta.push_back(sol.scalar(pr.zeta[i]));
      c.tau.push_back(tau[i]);
    }
  }
  if (data) {
    c.X0 = in.X0;
    c.U0 = in.U0;
    c.X1 = in.X1;
  }
  if (in.contraction == Contraction::data_minvar) c.sigma_sqrt = in.sigma_sqrt;
  return c;
}

SynthesisResult solve_program(const ProgramInputs& in, const SynthesisConfig& cfg, const std::vector<double>& tau)
{
  const auto t0 = Clock::now();
  Program pr;
  build_program(pr, in, cfg, tau);
  const lmi::SdpSolution sol = lmi::solve_sdp(pr.prob, cfg.solver);
  SynthesisResult out;
  out.message = sol.message;
  switch (sol.status) {
    case lmi::SolveStatus::optimal: {
      HullCertificate cert = extract(pr, sol, in, cfg, tau);
      const CertificateCheck chk = verify_certificate(cert, kCertificateTol);
      if (!chk.ok) {
        out.status = SynthesisStatus::numerical_failure;
        out.message = "certificate re-verification failed: " + chk.detail;
      } else {
        out.status = SynthesisStatus::feasible;
        out.certificate = std::move(cert);
      }
      break;
    }
    case lmi::SolveStatus::infeasible:
      out.status = SynthesisStatus::infeasible;
      out.infeasibility = sol.certificate;
      break;
    case lmi::SolveStatus::numerical_failure:
      out.status = SynthesisStatus::numerical_failure;
      break;
  }
  out.seconds = seconds_since(t0);
  return out;
}

ProgramInputs common_inputs(SynthesisMode mode, const PolyhedralSetd& polytope, const SynthesisConfig& cfg)
{
  ProgramInputs in;
  in.mode = mode;
  in.polytope = &polytope;
  in.directions = cfg.directions.empty() ? default_directions(polytope, cfg.n_v, cfg.direction_rule) : cfg.directions;
  in.p_min = strictness_margin(polytope, cfg.margin_scale);
  return in;
}

void set_data_basis(ProgramInputs& in, const TrajectoryDataset& data)
{
  in.rinv = right_inverse_states(data.X0);
  Eigen::MatrixXd UX(data.X0.rows() + data.U0.rows(), data.X0.cols());
  UX << data.X0, data.U0;
  if (numerical_rank(UX) == UX.rows()) {
    const RightInverse r = right_inverse_states(UX);
    in.input_basis = true;
    in.R = r.G_base;
    in.R_null = r.nullspace;
  }
}

void check_square(const Eigen::MatrixXd& A, const PolyhedralSetd& polytope)
{
  if (A.rows() != A.cols()) throw SynthesisError("A must be square");
  if (A.rows() != polytope.dim()) throw SynthesisError("A and the admissible set have different dimensions");
}

void check_data(const TrajectoryDataset& data, const PolyhedralSetd& polytope)
{
  if (data.X0.rows() != polytope.dim()) throw SynthesisError("state data and the admissible set have different dimensions");
  if (data.X1.rows() != data.X0.rows() || data.X1.cols() != data.X0.cols() || data.U0.cols() != data.X0.cols()) {
    throw SynthesisError("data matrices X0, U0, X1 have inconsistent sizes");
  }
  if (!validate_data_assumptions(data).assumption4_ok) {
    throw SynthesisError("state data X0 must have full row rank (collect more samples or richer excitation)");
  }
}

}  // namespace

std::string to_string(SynthesisMode mode)
{
  switch (mode) {
    case SynthesisMode::open_loop: return "open_loop";
    case SynthesisMode::model_csie: return "model_csie";
    case SynthesisMode::data_ce: return "data_ce";
    case SynthesisMode::data_minvar: return "data_minvar";
    case SynthesisMode::single_baseline: return "single_baseline";
  }
  return "unknown";
}

SynthesisMode synthesis_mode_from_string(const std::string& name)
{
  if (name == "open_loop" || name == "openloop") return SynthesisMode::open_loop;
  if (name == "model_csie" || name == "model") return SynthesisMode::model_csie;
  if (name == "data_ce" || name == "ce") return SynthesisMode::data_ce;
  if (name == "data_minvar" || name == "minvar") return SynthesisMode::data_minvar;
  if (name == "single_baseline" || name == "baseline") return SynthesisMode::single_baseline;
  throw SynthesisError("unknown synthesis mode '" + name + "'");
}

std::string to_string(SynthesisStatus status)
{
  switch (status) {
    case SynthesisStatus::feasible: return "feasible";
    case SynthesisStatus::infeasible: return "infeasible";
    case SynthesisStatus::numerical_failure: return "numerical_failure";
  }
  return "unknown";
}

void SynthesisConfig::validate(Eigen::Index n, bool allow_single) const
{
  if (!(lambda > 0.0 && lambda <= 1.0)) throw SynthesisError("lambda must lie in (0, 1]");
  if (!(delta > 0.0 && delta < 1.0)) throw SynthesisError("delta must lie in (0, 1)");
  if (allow_single) {
    if (n_v < 1) throw SynthesisError("n_v must be positive");
  } else if (n_v < n) {
    throw SynthesisError("n_v must be at least the state dimension");
  }
  if (!directions.empty()) {
    if (static_cast<int>(directions.size()) != n_v) throw SynthesisError("need exactly n_v reference directions");
    for (const auto& d : directions) {
      if (d.size() != n) throw SynthesisError("reference direction has the wrong dimension");
      if (std::abs(d.norm() - 1.0) > 1e-9) throw SynthesisError("reference directions must have unit norm");
    }
  }
  if (margin_scale < 0.0) throw SynthesisError("margin_scale must be non-negative");
}

int HullCertificate::predecessor(int i) const
{
  if (mode == SynthesisMode::single_baseline) return i;
  return predecessor_index(i, n_v());
}

double confidence_scale(Eigen::Index n, double delta)
{
  if (!(delta > 0.0 && delta < 1.0)) throw SynthesisError("delta must lie in (0, 1)");
  const double L = std::log(1.0 / delta);
  return static_cast<double>(n) + 2.0 * std::sqrt(static_cast<double>(n) * L) + 2.0 * L;
}

std::vector<double> default_tau_grid(double lambda, int points)
{
  if (points < 1) throw SynthesisError("tau grid needs at least one point");
  if (points == 1) return {0.5 * lambda};
  std::vector<double> grid;
  for (int k = 0; k < points; ++k) grid.push_back(lambda * (0.05 + 0.9 * k / (points - 1)));
  return grid;
}

std::vector<Eigen::VectorXd> default_directions(const PolyhedralSetd& polytope, int n_v, DirectionRule rule)
{
  const Eigen::Index n = polytope.dim();
  std::vector<Eigen::VectorXd> verts = polytope_vertices(polytope);
  if (verts.empty()) throw SynthesisError("admissible set has no vertices");
  std::stable_sort(verts.begin(), verts.end(), [](const auto& a, const auto& b) { return a.norm() > b.norm(); });

  std::vector<Eigen::VectorXd> dirs;
  if (rule == DirectionRule::spaced && n == 2) {
    const double theta0 = std::atan2(verts.front()(1), verts.front()(0));
    for (int k = 0; k < n_v; ++k) {
      const double th = theta0 + M_PI * k / n_v;
      dirs.push_back(Eigen::Vector2d(std::cos(th), std::sin(th)));
    }
    return dirs;
  }

  auto is_new = [&](const Eigen::VectorXd& d) {
    for (const auto& e : dirs) {
      if ((d - e).norm() < 1e-9 || (d + e).norm() < 1e-9) return false;
    }
    return true;
  };
  for (const auto& v : verts) {
    if (static_cast<int>(dirs.size()) == n_v) break;
    const Eigen::VectorXd d = v.normalized();
    if (is_new(d)) dirs.push_back(d);
  }
  for (Eigen::Index k = 0; k < n && static_cast<int>(dirs.size()) < n_v; ++k) {
    const Eigen::VectorXd e = Eigen::VectorXd::Unit(n, k);
    if (is_new(e)) dirs.push_back(e);
  }
  std::mt19937_64 rng(1);
  std::normal_distribution<double> nd;
  while (static_cast<int>(dirs.size()) < n_v) {
    Eigen::VectorXd d(n);
    for (Eigen::Index k = 0; k < n; ++k) d(k) = nd(rng);
    d.normalize();
    if (is_new(d)) dirs.push_back(d);
  }
  return dirs;
}

double strictness_margin(const PolyhedralSetd& polytope, double scale)
{
  double r = std::numeric_limits<double>::infinity();
  for (Eigen::Index l = 0; l < polytope.rows(); ++l) r = std::min(r, polytope.g()(l) / polytope.F().row(l).norm());
  return scale * r * r;
}

SynthesisResult synth_open_loop(const Eigen::MatrixXd& A, const PolyhedralSetd& polytope,
                                const SynthesisConfig& config)
{
  check_square(A, polytope);
  config.validate(A.rows());
  ProgramInputs in = common_inputs(SynthesisMode::open_loop, polytope, config);
  in.contraction = Contraction::open_loop;
  in.A = A;
  return solve_program(in, config, {});
}

SynthesisResult synth_model_based(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B, const PolyhedralSetd& polytope,
                                  const SynthesisConfig& config)
{
  check_square(A, polytope);
  if (B.rows() != A.rows() || B.cols() < 1) throw SynthesisError("B must have n rows and at least one column");
  config.validate(A.rows());
  ProgramInputs in = common_inputs(SynthesisMode::model_csie, polytope, config);
  in.contraction = Contraction::model;
  in.A = A;
  in.B = B;
  return solve_program(in, config, {});
}

SynthesisResult synth_single_baseline(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B,
                                      const PolyhedralSetd& polytope, const SynthesisConfig& config)
{
  check_square(A, polytope);
  if (B.rows() != A.rows() || B.cols() < 1) throw SynthesisError("B must have n rows and at least one column");
  SynthesisConfig cfg = config;
  cfg.n_v = 1;
  if (cfg.directions.size() > 1) cfg.directions.resize(1);
  cfg.validate(A.rows(), true);
  ProgramInputs in = common_inputs(SynthesisMode::single_baseline, polytope, cfg);
  in.contraction = Contraction::model;
  in.self_loop = true;
  in.A = A;
  in.B = B;
  return solve_program(in, cfg, {});
}

SynthesisResult synth_data_ce(const TrajectoryDataset& data, const PolyhedralSetd& polytope,
                              const SynthesisConfig& config)
{
  if (config.ce_noise_measured && !data.W0.has_value()) {
    throw SynthesisError("certainty-equivalence synthesis needs recorded noise W0; use the minvar mode for unmeasured noise");
  }
  check_data(data, polytope);
  config.validate(data.n());
  ProgramInputs in = common_inputs(SynthesisMode::data_ce, polytope, config);
  in.contraction = Contraction::data_ce;
  in.X0 = data.X0;
  in.U0 = data.U0;
  in.X1 = config.ce_noise_measured ? Eigen::MatrixXd(data.X1 - *data.W0) : data.X1;
  set_data_basis(in, data);
  return solve_program(in, config, {});
}

SynthesisResult synth_data_minvar(const TrajectoryDataset& data, const Eigen::MatrixXd& sigma,
                                  const PolyhedralSetd& polytope, const SynthesisConfig& config)
{
  const auto t0 = Clock::now();
  check_data(data, polytope);
  config.validate(data.n());
  const Eigen::Index n = data.n();
  if (sigma.rows() != n || sigma.cols() != n) throw SynthesisError("sigma must be n x n");
  if ((sigma - sigma.transpose()).cwiseAbs().maxCoeff() > 1e-12 || lmi::min_eigenvalue(sigma) < -1e-12) {
    throw SynthesisError("sigma must be symmetric positive semidefinite");
  }
  ProgramInputs in = common_inputs(SynthesisMode::data_minvar, polytope, config);
  in.contraction = Contraction::data_minvar;
  in.X0 = data.X0;
  in.U0 = data.U0;
  in.X1 = data.X1;
  in.sigma_sqrt = psd_sqrt(sigma);
  in.delta_n = confidence_scale(n, config.delta);
  set_data_basis(in, data);

  const std::vector<double> grid = config.tau_grid.empty() ? default_tau_grid(config.lambda) : config.tau_grid;
  std::vector<double> valid;
  for (double t : grid) {
    if (t > 0.0 && t < config.lambda) valid.push_back(t);
  }
  SynthesisResult best;
  best.tau_tried = grid;
  if (valid.empty()) {
    best.status = SynthesisStatus::infeasible;
    std::ostringstream os;
    os << "no tau in (0, lambda) on the grid {";
    for (std::size_t k = 0; k < grid.size(); ++k) os << (k ? ", " : "") << grid[k];
    os << "}";
    best.message = os.str();
    best.seconds = seconds_since(t0);
    return best;
  }

  const int n_v = static_cast<int>(in.directions.size());
  auto run_all = [&](const std::vector<std::vector<double>>& assignments) {
    std::vector<std::future<SynthesisResult>> jobs;
    for (const auto& tau : assignments) {
      jobs.push_back(std::async(std::launch::async, [&in, &config, tau] { return solve_program(in, config, tau); }));
    }
    std::vector<SynthesisResult> out;
    for (auto& j : jobs) out.push_back(j.get());
    return out;
  };

  std::vector<std::vector<double>> uniform;
  for (double t : valid) uniform.emplace_back(n_v, t);
  const std::vector<SynthesisResult> results = run_all(uniform);

  int n_infeasible = 0;
  std::optional<std::size_t> best_idx;
  for (std::size_t k = 0; k < results.size(); ++k) {
    if (results[k].feasible()) {
      if (!best_idx || results[k].certificate->objective > results[*best_idx].certificate->objective) best_idx = k;
    } else if (results[k].status == SynthesisStatus::infeasible) {
      ++n_infeasible;
    }
  }
  if (!best_idx) {
    best.status = n_infeasible == static_cast<int>(results.size()) ? SynthesisStatus::infeasible
                                                                   : SynthesisStatus::numerical_failure;
    for (const auto& r : results) {
      if (r.status == SynthesisStatus::infeasible) {
        best.infeasibility = r.infeasibility;
        break;
      }
    }
    std::ostringstream os;
    os << n_infeasible << " of " << results.size() << " tau values certified infeasible, the rest failed numerically;"
       << " tau grid {";
    for (std::size_t k = 0; k < valid.size(); ++k) os << (k ? ", " : "") << valid[k];
    os << "}";
    best.message = os.str();
    best.seconds = seconds_since(t0);
    return best;
  }

  HullCertificate cert = *results[*best_idx].certificate;
  std::string message = results[*best_idx].message;
  if (config.refine_tau) {
    for (int j = 0; j < n_v; ++j) {
      std::vector<std::vector<double>> trials;
      for (double t : valid) {
        if (t == cert.tau[j]) continue;
        std::vector<double> tau = cert.tau;
        tau[j] = t;
        trials.push_back(tau);
      }
      for (auto& r : run_all(trials)) {
        if (r.feasible() && r.certificate->objective > cert.objective) cert = *r.certificate;
      }
    }
  }
  best.status = SynthesisStatus::feasible;
  best.certificate = std::move(cert);
  best.message = message;
  best.seconds = seconds_since(t0);
  return best;
}

CertificateCheck verify_certificate(const HullCertificate& c, double tol, std::optional<double> lambda_override)
{
  CertificateCheck out;
  std::ostringstream detail;
  const int n_v = c.n_v();
  const Eigen::Index n = c.n();
  const double lambda = lambda_override.value_or(c.lambda);
  auto note = [&](const lmi::SchurCheck& s, const std::string& what) {
    out.max_psd_violation = std::max(out.max_psd_violation, -s.min_eigenvalue);
    if (!s.degenerate && s.direct != s.complement) out.schur_consistent = false;
    if (!s.psd) detail << what << " violated (min eigenvalue " << s.min_eigenvalue << "); ";
  };
  auto scalar = [](double v) { return Eigen::MatrixXd::Constant(1, 1, v); };

  if (n_v == 0 || static_cast<int>(c.mu.size()) != n_v || static_cast<int>(c.directions.size()) != n_v ||
      static_cast<int>(c.closed_loop_map.size()) != n_v) {
    out.detail = "certificate is incomplete";
    return out;
  }
  const bool minvar = c.mode == SynthesisMode::data_minvar;
  const bool data = c.mode == SynthesisMode::data_ce || minvar;

  for (int i = 0; i < n_v; ++i) {
    const Eigen::MatrixXd& Pi = c.P[i];
    const std::string tag = "ellipsoid " + std::to_string(i + 1) + ": ";
    const double m = lmi::min_eigenvalue(Pi - c.p_min * Eigen::MatrixXd::Identity(n, n));
    out.max_psd_violation = std::max(out.max_psd_violation, -m);
    if (m < -tol) detail << tag << "margin violated; ";
    for (Eigen::Index l = 0; l < c.F.rows(); ++l) {
      const Eigen::MatrixXd Fl = c.F.row(l);
      note(lmi::schur_psd_check(Pi, Pi * Fl.transpose(), scalar(c.g(l) * c.g(l)), tol),
           tag + "containment row " + std::to_string(l + 1));
    }
    note(lmi::schur_psd_check(scalar(1.0), c.mu[i] * c.directions[i].transpose(), Pi, tol), tag + "direction");

    const int j = c.predecessor(i);
    const Eigen::MatrixXd& Pj = c.P[j];
    Eigen::MatrixXd off;
    if (data) {
      off = c.X1 * c.Y[j];
    } else {
      off = c.closed_loop_map[j] * Pj;
    }
    if (!minvar) {
      note(lmi::schur_psd_check(Pi, off, lambda * Pj, tol), tag + "contraction");
    } else {
      Eigen::MatrixXd M12(n, 2 * n);
      M12 << off, c.eta[j] * c.sigma_sqrt;
      Eigen::MatrixXd M22 = Eigen::MatrixXd::Zero(2 * n, 2 * n);
      M22.topLeftCorner(n, n) = (lambda - c.tau[j]) * Pj;
      M22.bottomRightCorner(n, n) = (c.tau[j] / c.delta_n) * Eigen::MatrixXd::Identity(n, n);
      note(lmi::schur_psd_check(Pi, M12, M22, tol), tag + "contraction");
      note(lmi::schur_psd_check(c.H[i], c.Y[i], Pi, tol), tag + "variance");
      Eigen::Matrix2d ez;
      ez << c.zeta[i] + 1.0, c.eta[i], c.eta[i], 1.0;
      const double ezm = lmi::min_eigenvalue(ez);
      out.max_psd_violation = std::max(out.max_psd_violation, -ezm);
      if (ezm < -tol) detail << tag << "eta/zeta block violated; ";
      const double tr = c.zeta[i] - c.H[i].trace();
      out.max_psd_violation = std::max(out.max_psd_violation, -tr);
      if (tr < -tol) detail << tag << "trace bound violated; ";
      if (c.eta[i] < -tol) detail << tag << "eta negative; ";
    }

    const Eigen::MatrixXd Pinv = Pi.inverse();
    if (data) {
      const double eq = (c.X0 * c.Y[i] - Pi).cwiseAbs().maxCoeff();
      out.max_equality_violation = std::max(out.max_equality_violation, eq);
      if (eq > tol) detail << tag << "X0 Y = P violated (" << eq << "); ";
      out.gain_residual = std::max(out.gain_residual, (c.K[i] - c.U0 * c.Y[i] * Pinv).cwiseAbs().maxCoeff());
    } else if (!c.S.empty()) {
      out.gain_residual = std::max(out.gain_residual, (c.K[i] - c.S[i] * Pinv).cwiseAbs().maxCoeff());
    }
  }
  if (out.gain_residual > tol) detail << "gain formula residual " << out.gain_residual << "; ";
  if (!out.schur_consistent) detail << "Schur and eigenvalue routes disagree; ";
  out.detail = detail.str();
  out.ok = out.detail.empty();
  return out;
}

double hull_level(const HullCertificate& cert, const Eigen::VectorXd& x)
{
  double best = std::numeric_limits<double>::infinity();
  for (const auto& P : cert.P) best = std::min(best, Ellipsoidd(P).quadratic(x));
  return best;
}

ContractionReport check_contraction(const HullCertificate& cert, int samples_per_ellipsoid, std::uint64_t seed)
{
  ContractionReport rep;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd;
  const int n_v = cert.n_v();
  const Eigen::Index n = cert.n();
  std::vector<Ellipsoidd> E;
  for (const auto& P : cert.P) E.emplace_back(P);
  for (int j = 0; j < n_v; ++j) {
    int succ = j;
    for (int i = 0; i < n_v; ++i) {
      if (cert.predecessor(i) == j) succ = i;
    }
    const Eigen::MatrixXd L = Eigen::LLT<Eigen::MatrixXd>(cert.P[j]).matrixL();
    for (int s = 0; s < samples_per_ellipsoid; ++s) {
      Eigen::VectorXd u(n);
      for (Eigen::Index k = 0; k < n; ++k) u(k) = nd(rng);
      const Eigen::VectorXd v = L * u.normalized();
      const Eigen::VectorXd y = cert.closed_loop_map[j] * v;
      double level = std::numeric_limits<double>::infinity();
      for (const auto& e : E) level = std::min(level, e.quadratic(y));
      rep.worst_hull_level = std::max(rep.worst_hull_level, level);
      rep.worst_cyclic_level = std::max(rep.worst_cyclic_level, E[succ].quadratic(y));
      ++rep.samples;
    }
  }
  return rep;
}

json certificate_to_json(const HullCertificate& c)
{
  json j;
  j["format"] = "hullguard-certificate/1";
  j["mode"] = to_string(c.mode);
  j["config"] = {{"lambda", c.lambda}, {"delta", c.delta}, {"n_v", c.n_v()}, {"delta_n", c.delta_n}, {"p_min", c.p_min}};
  j["admissible"] = {{"F", matrix_to_json(c.F)}, {"g", vector_to_json(c.g)}};
  j["directions"] = vectors_to_json(c.directions);
  j["P"] = matrices_to_json(c.P);
  j["mu"] = c.mu;
  j["K"] = matrices_to_json(c.K);
  j["S"] = matrices_to_json(c.S);
  j["Y"] = matrices_to_json(c.Y);
  j["H"] = matrices_to_json(c.H);
  j["eta"] = c.eta;
  j["zeta"] = c.zeta;
  j["tau"] = c.tau;
  j["closed_loop_map"] = matrices_to_json(c.closed_loop_map);
  j["variance_trace"] = c.variance_trace;
  j["data"] = {{"X0", matrix_to_json(c.X0)}, {"U0", matrix_to_json(c.U0)}, {"X1", matrix_to_json(c.X1)}};
  j["sigma_sqrt"] = matrix_to_json(c.sigma_sqrt);
  j["residuals"] = {{"objective", c.objective},
                    {"max_psd_violation", c.max_psd_violation},
                    {"max_equality_violation", c.max_equality_violation}};
  return j;
}

HullCertificate certificate_from_json(const json& j)
{
  if (j.value("format", std::string()) != "hullguard-certificate/1") {
    throw std::invalid_argument("not a hullguard certificate");
  }
  HullCertificate c;
  c.mode = synthesis_mode_from_string(j.at("mode").get<std::string>());
  const json& cfg = j.at("config");
  c.lambda = cfg.at("lambda").get<double>();
  c.delta = cfg.at("delta").get<double>();
  c.delta_n = cfg.value("delta_n", 0.0);
  c.p_min = cfg.value("p_min", 0.0);
  c.F = matrix_from_json(j.at("admissible").at("F"));
  c.g = vector_from_json(j.at("admissible").at("g"));
  c.directions = vectors_from_json(j.at("directions"));
  c.P = matrices_from_json(j.at("P"));
  c.mu = j.at("mu").get<std::vector<double>>();
  c.K = matrices_from_json(j.at("K"));
  c.S = matrices_from_json(j.at("S"));
  c.Y = matrices_from_json(j.at("Y"));
  c.H = matrices_from_json(j.at("H"));
  c.eta = j.at("eta").get<std::vector<double>>();
  c.zeta = j.at("zeta").get<std::vector<double>>();
  c.tau = j.at("tau").get<std::vector<double>>();
  c.closed_loop_map = matrices_from_json(j.at("closed_loop_map"));
  c.variance_trace = j.at("variance_trace").get<std::vector<double>>();
  c.X0 = matrix_from_json(j.at("data").at("X0"));
  c.U0 = matrix_from_json(j.at("data").at("U0"));
  c.X1 = matrix_from_json(j.at("data").at("X1"));
  c.sigma_sqrt = matrix_from_json(j.at("sigma_sqrt"));
  const json& r = j.at("residuals");
  c.objective = r.value("objective", 0.0);
  c.max_psd_violation = r.value("max_psd_violation", 0.0);
  c.max_equality_violation = r.value("max_equality_violation", 0.0);
  if (c.P.empty() || static_cast<int>(c.mu.size()) != c.n_v() || static_cast<int>(c.directions.size()) != c.n_v()) {
    throw std::invalid_argument("certificate arrays have inconsistent lengths");
  }
  return c;
}

}  // namespace hullguard
