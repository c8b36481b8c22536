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

#include <cstddef>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace hullguard::lmi {

/// Raised for malformed problem assembly (dimension mismatch, foreign variables).
class AssemblyError : public std::invalid_argument
{
public:
  using std::invalid_argument::invalid_argument;
};

/**
 * @brief Affine matrix-valued function of the scalar coordinates of an SdpProblem.
 *
 * value(y) = constant + sum_k y_k * coefficient_k. Every coordinate belongs to the
 * problem identified by owner(); mixing expressions of two problems is an error.
 */
class AffineMatrix
{
public:
  AffineMatrix() = default;
  explicit AffineMatrix(Eigen::MatrixXd constant);

  static AffineMatrix zeros(Eigen::Index rows, Eigen::Index cols);
  static AffineMatrix identity(Eigen::Index n);
  static AffineMatrix scalar(double value);

  Eigen::Index rows() const { return constant_.rows(); }
  Eigen::Index cols() const { return constant_.cols(); }
  std::size_t owner() const { return owner_; }
  bool is_constant() const { return terms_.empty(); }

  const Eigen::MatrixXd& constant() const { return constant_; }
  const std::map<int, Eigen::MatrixXd>& terms() const { return terms_; }

  AffineMatrix transpose() const;
  AffineMatrix block(Eigen::Index row, Eigen::Index col, Eigen::Index rows, Eigen::Index cols) const;

  /// Evaluates at a full coordinate vector of the owning problem.
  Eigen::MatrixXd evaluate(const Eigen::VectorXd& coords) const;

  AffineMatrix& operator+=(const AffineMatrix& rhs);
  AffineMatrix& operator-=(const AffineMatrix& rhs);
  AffineMatrix& operator*=(double s);

  friend AffineMatrix operator+(AffineMatrix lhs, const AffineMatrix& rhs) { return lhs += rhs; }
  friend AffineMatrix operator-(AffineMatrix lhs, const AffineMatrix& rhs) { return lhs -= rhs; }
  friend AffineMatrix operator-(AffineMatrix m) { return m *= -1.0; }
  friend AffineMatrix operator*(double s, AffineMatrix m) { return m *= s; }
  friend AffineMatrix operator*(AffineMatrix m, double s) { return m *= s; }
  friend AffineMatrix operator*(const Eigen::MatrixXd& lhs, const AffineMatrix& rhs);
  friend AffineMatrix operator*(const AffineMatrix& lhs, const Eigen::MatrixXd& rhs);

private:
  friend class SdpProblem;
  void adopt_owner(std::size_t other);

  Eigen::MatrixXd constant_;
  std::map<int, Eigen::MatrixXd> terms_;
  std::size_t owner_ = 0;
};

/// 1x1 expression equal to the trace of a square expression.
AffineMatrix trace(const AffineMatrix& m);

/// Upper-triangular block rows: row r holds blocks (r, r), (r, r+1), ..., (r, k-1).
using BlockRows = std::vector<std::vector<AffineMatrix>>;

struct VariableInfo
{
  std::string name;
  Eigen::Index rows = 0;
  Eigen::Index cols = 0;
  bool symmetric = false;
  int offset = 0;  ///< first coordinate
  int size = 0;    ///< number of coordinates
};

struct PsdConstraint
{
  std::string label;
  AffineMatrix matrix;  ///< full, symmetric
};

struct EqualityConstraint
{
  std::string label;
  AffineMatrix residual;  ///< lhs - rhs, required to vanish
};

/**
 * @brief Semidefinite program: maximize a linear objective subject to affine LMIs and equalities.
 *
 * Immutable once handed to solve_sdp(); building is single-threaded.
 */
class SdpProblem
{
public:
  SdpProblem();

  AffineMatrix add_symmetric(const std::string& name, Eigen::Index dim);
  AffineMatrix add_matrix(const std::string& name, Eigen::Index rows, Eigen::Index cols);
  AffineMatrix add_scalar(const std::string& name);

  /// Adds [[B00, B01, ...], [*, B11, ...], ...] >= 0 from its upper triangle.
  void add_psd(const BlockRows& upper, const std::string& label = {});
  void add_psd(const AffineMatrix& symmetric_matrix, const std::string& label = {});
  void add_equality(const AffineMatrix& lhs, const AffineMatrix& rhs, const std::string& label = {});
  void maximize(const AffineMatrix& objective);

  std::size_t id() const { return id_; }
  int num_coords() const { return num_coords_; }
  const std::vector<VariableInfo>& variables() const { return variables_; }
  const std::vector<PsdConstraint>& psd_constraints() const { return psd_; }
  const std::vector<EqualityConstraint>& equalities() const { return equalities_; }
  const AffineMatrix& objective() const { return objective_; }

  const VariableInfo& variable(const std::string& name) const;
  /// Expression for a declared variable, usable to read solution values.
  AffineMatrix variable_expr(const std::string& name) const;

private:
  void check_owned(const AffineMatrix& m, const char* what) const;
  AffineMatrix make_variable(const std::string& name, Eigen::Index rows, Eigen::Index cols, bool symmetric);

  std::size_t id_;
  int num_coords_ = 0;
  std::vector<VariableInfo> variables_;
  std::vector<PsdConstraint> psd_;
  std::vector<EqualityConstraint> equalities_;
  AffineMatrix objective_ = AffineMatrix::scalar(0.0);
};

enum class SolveStatus
{
  optimal,
  infeasible,
  numerical_failure,
};

std::string to_string(SolveStatus status);

struct SolverOptions
{
  double feas_tol = 1e-7;     ///< required primal/dual feasibility of the returned point
  double gap_tol = 1e-7;      ///< relative duality gap
  double resubstitution_tol = 1e-6;
  int max_iterations = 120;
  bool verbose = false;

  /// Defaults, with feas_tol overridden by HULLGUARD_SOLVER_TOL when set.
  static SolverOptions from_environment();
};

/// Farkas-type evidence that no point satisfies every LMI.
struct InfeasibilityCertificate
{
  bool present = false;
  double margin = 0.0;          ///< <C, X> for the normalized multiplier (negative)
  double multiplier_residual = 0.0;  ///< norm of A*(X), ideally zero
  double certified_radius = 0.0;     ///< no feasible point within this coordinate radius
  bool equality_inconsistent = false;
};

struct SdpSolution
{
  SolveStatus status = SolveStatus::numerical_failure;
  Eigen::VectorXd coords;
  double objective = 0.0;
  double max_psd_violation = 0.0;       ///< max over blocks of max(0, -lambda_min)
  double max_equality_violation = 0.0;
  double duality_gap = 0.0;
  int iterations = 0;
  InfeasibilityCertificate certificate;
  std::string message;

  Eigen::MatrixXd value(const AffineMatrix& expr) const { return expr.evaluate(coords); }
  double scalar(const AffineMatrix& expr) const { return expr.evaluate(coords)(0, 0); }
};

SdpSolution solve_sdp(const SdpProblem& problem, const SolverOptions& options = {});

/// Min eigenvalue of every PSD block and the worst equality residual at coords.
struct Residuals
{
  double max_psd_violation = 0.0;
  double max_equality_violation = 0.0;
  double min_block_eigenvalue = 0.0;
};
Residuals evaluate_residuals(const SdpProblem& problem, const Eigen::VectorXd& coords);

struct SchurCheck
{
  bool psd = false;
  bool direct = false;       ///< eigenvalue route
  bool complement = false;   ///< Schur complement route (equal to direct when not degenerate)
  bool degenerate = false;   ///< M22 not positive definite; complement route skipped
  double min_eigenvalue = 0.0;
};

/// Decides [[M11, M12], [M12^T, M22]] >= -tol I by eigenvalues and by the Schur complement.
SchurCheck schur_psd_check(const Eigen::MatrixXd& M11, const Eigen::MatrixXd& M12, const Eigen::MatrixXd& M22,
                           double tol = 1e-9);

/// Smallest eigenvalue of the symmetric part of m.
double min_eigenvalue(const Eigen::MatrixXd& m);

}  // namespace hullguard::lmi
