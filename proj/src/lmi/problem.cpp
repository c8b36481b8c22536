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
#include "hullguard/lmi.hpp"

#include <atomic>
#include <cmath>
#include <cstdlib>

namespace hullguard::lmi {

namespace {

std::atomic<std::size_t> next_problem_id{1};

constexpr double kSymmetryTol = 1e-12;

bool is_symmetric(const Eigen::MatrixXd& m)
{
  return m.rows() == m.cols() && (m - m.transpose()).cwiseAbs().maxCoeff() <= kSymmetryTol * (1.0 + m.cwiseAbs().maxCoeff());
}

}  // namespace

std::string to_string(SolveStatus status)
{
  switch (status) {
    case SolveStatus::optimal: return "optimal";
    case SolveStatus::infeasible: return "infeasible";
    case SolveStatus::numerical_failure: return "numerical_failure";
  }
  return "unknown";
}

SolverOptions SolverOptions::from_environment()
{
  SolverOptions opts;
  if (const char* env = std::getenv("HULLGUARD_SOLVER_TOL")) {
    char* end = nullptr;
    const double v = std::strtod(env, &end);
    if (end != env && v > 0.0 && std::isfinite(v)) opts.feas_tol = v;
  }
  return opts;
}

SdpProblem::SdpProblem() : id_(next_problem_id++) {}

AffineMatrix SdpProblem::make_variable(const std::string& name, Eigen::Index rows, Eigen::Index cols, bool symmetric)
{
  if (rows <= 0 || cols <= 0) throw AssemblyError("variable '" + name + "' must have positive dimensions");
  for (const auto& v : variables_) {
    if (v.name == name) throw AssemblyError("variable '" + name + "' declared twice");
  }
  VariableInfo info;
  info.name = name;
  info.rows = rows;
  info.cols = cols;
  info.symmetric = symmetric;
  info.offset = num_coords_;

  AffineMatrix expr = AffineMatrix::zeros(rows, cols);
  expr.owner_ = id_;
  int k = num_coords_;
  if (symmetric) {
    for (Eigen::Index c = 0; c < cols; ++c) {
      for (Eigen::Index r = 0; r <= c; ++r) {
        Eigen::MatrixXd e = Eigen::MatrixXd::Zero(rows, cols);
        e(r, c) = 1.0;
        e(c, r) = 1.0;
        expr.terms_.emplace(k++, std::move(e));
      }
    }
  } else {
    for (Eigen::Index c = 0; c < cols; ++c) {
      for (Eigen::Index r = 0; r < rows; ++r) {
        Eigen::MatrixXd e = Eigen::MatrixXd::Zero(rows, cols);
        e(r, c) = 1.0;
        expr.terms_.emplace(k++, std::move(e));
      }
    }
  }
  info.size = k - num_coords_;
  num_coords_ = k;
  variables_.push_back(info);
  return expr;
}

AffineMatrix SdpProblem::add_symmetric(const std::string& name, Eigen::Index dim)
{
  return make_variable(name, dim, dim, true);
}

AffineMatrix SdpProblem::add_matrix(const std::string& name, Eigen::Index rows, Eigen::Index cols)
{
  return make_variable(name, rows, cols, false);
}

AffineMatrix SdpProblem::add_scalar(const std::string& name) { return make_variable(name, 1, 1, false); }

const VariableInfo& SdpProblem::variable(const std::string& name) const
{
  for (const auto& v : variables_) {
    if (v.name == name) return v;
  }
  throw AssemblyError("undeclared variable '" + name + "'");
}

AffineMatrix SdpProblem::variable_expr(const std::string& name) const
{
  const VariableInfo& info = variable(name);
  AffineMatrix expr = AffineMatrix::zeros(info.rows, info.cols);
  expr.owner_ = id_;
  int k = info.offset;
  if (info.symmetric) {
    for (Eigen::Index c = 0; c < info.cols; ++c) {
      for (Eigen::Index r = 0; r <= c; ++r) {
        Eigen::MatrixXd e = Eigen::MatrixXd::Zero(info.rows, info.cols);
        e(r, c) = 1.0;
        e(c, r) = 1.0;
        expr.terms_.emplace(k++, std::move(e));
      }
    }
  } else {
    for (Eigen::Index c = 0; c < info.cols; ++c) {
      for (Eigen::Index r = 0; r < info.rows; ++r) {
        Eigen::MatrixXd e = Eigen::MatrixXd::Zero(info.rows, info.cols);
        e(r, c) = 1.0;
        expr.terms_.emplace(k++, std::move(e));
      }
    }
  }
  return expr;
}

void SdpProblem::check_owned(const AffineMatrix& m, const char* what) const
{
  if (m.owner() != 0 && m.owner() != id_) {
    throw AssemblyError(std::string(what) + " references variables not declared in this problem");
  }
  for (const auto& [k, c] : m.terms()) {
    (void)c;
    if (k < 0 || k >= num_coords_) {
      throw AssemblyError(std::string(what) + " references an undeclared variable coordinate");
    }
  }
}

void SdpProblem::add_psd(const BlockRows& upper, const std::string& label)
{
  const std::size_t k = upper.size();
  if (k == 0) throw AssemblyError("empty PSD block list");
  std::vector<Eigen::Index> dims(k);
  for (std::size_t r = 0; r < k; ++r) {
    if (upper[r].size() != k - r) {
      throw AssemblyError("PSD block row " + std::to_string(r) + " must hold " + std::to_string(k - r) +
                          " upper-triangular blocks, got " + std::to_string(upper[r].size()));
    }
    const AffineMatrix& diag = upper[r][0];
    if (diag.rows() != diag.cols()) {
      throw AssemblyError("diagonal block " + std::to_string(r) + " is not square");
    }
    dims[r] = diag.rows();
  }
  Eigen::Index total = 0;
  std::vector<Eigen::Index> start(k);
  for (std::size_t r = 0; r < k; ++r) {
    start[r] = total;
    total += dims[r];
  }

  AffineMatrix full = AffineMatrix::zeros(total, total);
  for (std::size_t r = 0; r < k; ++r) {
    for (std::size_t j = 0; j < upper[r].size(); ++j) {
      const std::size_t c = r + j;
      const AffineMatrix& b = upper[r][j];
      check_owned(b, "PSD block");
      if (b.rows() != dims[r] || b.cols() != dims[c]) {
        throw AssemblyError("dimension mismatch in PSD block (" + std::to_string(r) + "," + std::to_string(c) +
                            "): expected " + std::to_string(dims[r]) + "x" + std::to_string(dims[c]) + ", got " +
                            std::to_string(b.rows()) + "x" + std::to_string(b.cols()));
      }
      full.adopt_owner(b.owner());
      full.constant_.block(start[r], start[c], dims[r], dims[c]) += b.constant();
      if (c != r) full.constant_.block(start[c], start[r], dims[c], dims[r]) += b.constant().transpose();
      for (const auto& [coord, coef] : b.terms()) {
        auto it = full.terms_.find(coord);
        if (it == full.terms_.end()) it = full.terms_.emplace(coord, Eigen::MatrixXd::Zero(total, total)).first;
        it->second.block(start[r], start[c], dims[r], dims[c]) += coef;
        if (c != r) it->second.block(start[c], start[r], dims[c], dims[r]) += coef.transpose();
      }
    }
  }
  add_psd(full, label);
}

void SdpProblem::add_psd(const AffineMatrix& m, const std::string& label)
{
  check_owned(m, "PSD constraint");
  if (m.rows() != m.cols()) throw AssemblyError("PSD constraint must be square");
  if (!is_symmetric(m.constant())) throw AssemblyError("PSD constraint '" + label + "' is not symmetric");
  for (const auto& [k, c] : m.terms()) {
    (void)k;
    if (!is_symmetric(c)) throw AssemblyError("PSD constraint '" + label + "' is not symmetric");
  }
  psd_.push_back({label, m});
}

void SdpProblem::add_equality(const AffineMatrix& lhs, const AffineMatrix& rhs, const std::string& label)
{
  check_owned(lhs, "equality");
  check_owned(rhs, "equality");
  if (lhs.rows() != rhs.rows() || lhs.cols() != rhs.cols()) {
    throw AssemblyError("dimension mismatch in equality '" + label + "'");
  }
  equalities_.push_back({label, lhs - rhs});
}

void SdpProblem::maximize(const AffineMatrix& objective)
{
  check_owned(objective, "objective");
  if (objective.rows() != 1 || objective.cols() != 1) throw AssemblyError("objective must be a scalar expression");
  objective_ = objective;
}

Residuals evaluate_residuals(const SdpProblem& problem, const Eigen::VectorXd& coords)
{
  Residuals res;
  res.min_block_eigenvalue = std::numeric_limits<double>::infinity();
  for (const auto& c : problem.psd_constraints()) {
    const double ev = min_eigenvalue(c.matrix.evaluate(coords));
    res.min_block_eigenvalue = std::min(res.min_block_eigenvalue, ev);
    res.max_psd_violation = std::max(res.max_psd_violation, -ev);
  }
  for (const auto& e : problem.equalities()) {
    const Eigen::MatrixXd r = e.residual.evaluate(coords);
    if (r.size() > 0) res.max_equality_violation = std::max(res.max_equality_violation, r.cwiseAbs().maxCoeff());
  }
  if (problem.psd_constraints().empty()) res.min_block_eigenvalue = 0.0;
  return res;
}

double min_eigenvalue(const Eigen::MatrixXd& m)
{
  if (m.size() == 0) return 0.0;
  const Eigen::MatrixXd sym = 0.5 * (m + m.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sym, Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

SchurCheck schur_psd_check(const Eigen::MatrixXd& M11, const Eigen::MatrixXd& M12, const Eigen::MatrixXd& M22,
                           double tol)
{
  if (M11.rows() != M11.cols() || M22.rows() != M22.cols() || M12.rows() != M11.rows() ||
      M12.cols() != M22.rows()) {
    throw AssemblyError("schur_psd_check: inconsistent block dimensions");
  }
  const Eigen::Index n1 = M11.rows();
  const Eigen::Index n2 = M22.rows();
  Eigen::MatrixXd full(n1 + n2, n1 + n2);
  full << M11, M12, M12.transpose(), M22;

  SchurCheck out;
  out.min_eigenvalue = min_eigenvalue(full);
  out.direct = out.min_eigenvalue >= -tol;

  Eigen::LLT<Eigen::MatrixXd> llt(0.5 * (M22 + M22.transpose()));
  const double m22_min = min_eigenvalue(M22);
  const double scale = std::max(1.0, M22.cwiseAbs().maxCoeff());
  if (llt.info() != Eigen::Success || m22_min <= 1e-10 * scale) {
    out.degenerate = true;
    out.complement = out.direct;
    out.psd = out.direct;
    return out;
  }
  // With M22 > 0: full >= 0 iff M11 - M12 M22^{-1} M12^T >= 0. The tolerance is carried over by
  // shifting M22 by tol, which keeps the two routes comparable near the boundary.
  const Eigen::MatrixXd shifted = M22 + tol * Eigen::MatrixXd::Identity(n2, n2);
  const Eigen::MatrixXd complement = M11 + tol * Eigen::MatrixXd::Identity(n1, n1) -
                                     M12 * shifted.llt().solve(M12.transpose());
  out.complement = min_eigenvalue(complement) >= -1e-12 * (1.0 + complement.cwiseAbs().maxCoeff());
  out.psd = out.direct && out.complement;
  return out;
}

}  // namespace hullguard::lmi
