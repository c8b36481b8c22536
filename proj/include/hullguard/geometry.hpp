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

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

namespace hullguard {

/// Raised when a point set spans less than the full space.
class DegenerateHullError : public std::runtime_error
{
public:
  using std::runtime_error::runtime_error;
};

/**
 * @brief Polyhedral C-set {x : F x <= g} with g > 0.
 */
template <typename Scalar>
class PolyhedralSet
{
public:
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

  PolyhedralSet() = default;
  PolyhedralSet(Matrix F, Vector g) : F_(std::move(F)), g_(std::move(g))
  {
    if (F_.rows() != g_.size() || F_.rows() == 0) throw std::invalid_argument("F and g must have the same rows");
    for (Eigen::Index s = 0; s < F_.rows(); ++s) {
      if (!(g_(s) > Scalar(0))) throw std::invalid_argument("g must be strictly positive");
      if (F_.row(s).cwiseAbs().maxCoeff() == Scalar(0)) throw std::invalid_argument("F has a zero row");
    }
  }

  const Matrix& F() const { return F_; }
  const Vector& g() const { return g_; }
  Eigen::Index dim() const { return F_.cols(); }
  Eigen::Index rows() const { return F_.rows(); }

  /// Minkowski gauge max_s F_s x / g_s, clamped below at zero.
  template <typename Derived>
  Scalar gauge(const Eigen::MatrixBase<Derived>& x) const
  {
    Scalar best(0);
    for (Eigen::Index s = 0; s < F_.rows(); ++s) best = std::max(best, Scalar(F_.row(s).dot(x) / g_(s)));
    return best;
  }

  template <typename Derived>
  bool contains(const Eigen::MatrixBase<Derived>& x, Scalar tol = Scalar(0)) const
  {
    return ((F_ * x) - g_).maxCoeff() <= tol;
  }

  /// Same set with every row divided by its offset, so that g = 1.
  PolyhedralSet normalized() const
  {
    Matrix F = F_;
    for (Eigen::Index s = 0; s < F.rows(); ++s) F.row(s) /= g_(s);
    return PolyhedralSet(F, Vector::Ones(F.rows()));
  }

private:
  Matrix F_;
  Vector g_;
};

/**
 * @brief Ellipsoid {x : x' P^{-1} x <= level} with P positive definite.
 */
template <typename Scalar>
class Ellipsoid
{
public:
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

  Ellipsoid() = default;
  explicit Ellipsoid(Matrix P) : P_(std::move(P))
  {
    if (P_.rows() != P_.cols() || P_.rows() == 0) throw std::invalid_argument("ellipsoid shape must be square");
    if ((P_ - P_.transpose()).cwiseAbs().maxCoeff() > Scalar(1e-9) * (Scalar(1) + P_.cwiseAbs().maxCoeff())) {
      throw std::invalid_argument("ellipsoid shape must be symmetric");
    }
    llt_.compute(Scalar(0.5) * (P_ + P_.transpose()));
    if (llt_.info() != Eigen::Success) throw std::invalid_argument("ellipsoid shape must be positive definite");
  }

  const Matrix& P() const { return P_; }
  Eigen::Index dim() const { return P_.rows(); }

  /// x' P^{-1} x
  template <typename Derived>
  Scalar quadratic(const Eigen::MatrixBase<Derived>& x) const
  {
    const Vector z = llt_.matrixL().solve(Vector(x));
    return z.squaredNorm();
  }

  template <typename Derived>
  bool contains(const Eigen::MatrixBase<Derived>& x, Scalar level = Scalar(1), Scalar tol = Scalar(0)) const
  {
    return quadratic(x) <= level + tol;
  }

  /// Support function sqrt(d' P d).
  template <typename Derived>
  Scalar support(const Eigen::MatrixBase<Derived>& d) const
  {
    return std::sqrt(Scalar(d.dot(P_ * d)));
  }

  /// Boundary point maximizing d'x.
  template <typename Derived>
  Vector support_point(const Eigen::MatrixBase<Derived>& d) const
  {
    return (P_ * d) / support(d);
  }

private:
  Matrix P_;
  Eigen::LLT<Matrix> llt_;
};

using PolyhedralSetd = PolyhedralSet<double>;
using Ellipsoidd = Ellipsoid<double>;

/// Cyclic predecessor index j = mod(i + M - 2, M) + 1 (one-based).
int rotational_index(int i, int M);

struct Membership
{
  bool inside = false;
  double value = 0.0;  ///< x' P^{-1} x
};

Membership ellipsoid_membership(const Ellipsoidd& E, const Eigen::VectorXd& x, double level = 1.0);

double gauge_polytope(const Eigen::MatrixXd& F, const Eigen::VectorXd& g, const Eigen::VectorXd& x);

/// Vertices of a bounded polytope {F x <= g} by enumeration of row subsets (small q only).
std::vector<Eigen::VectorXd> polytope_vertices(const PolyhedralSetd& S, double tol = 1e-9);

struct ExtremePointOptions
{
  double newton_tol = 1e-10;
  int max_iterations = 100;
  bool support_filter = true;   ///< keep roots whose hyperplane supports every ellipsoid
  double support_tol = 1e-7;
  double boundary_tol = 1e-6;   ///< candidates must satisfy v' P^{-1} v = 1 within this
  double dedup_tol = 1e-6;      ///< relative to the candidate bounding box
  int support_samples = 0;      ///< extra exposed points along sampled directions
};

struct CandidateSet
{
  std::vector<Eigen::VectorXd> points;
  std::vector<int> owners;  ///< ellipsoid index (zero-based) each point lies on
  std::vector<std::string> warnings;
  int roots = 0;  ///< accepted Newton roots, counting mirrors
};

/**
 * Solves phi' P_k phi = 1 over every size-n combination of ellipsoids by damped Newton from
 * 2n^2 deterministic starts and maps each root to the touching points v_k = P_k phi.
 */
CandidateSet extract_extreme_points(const std::vector<Eigen::MatrixXd>& shapes, const ExtremePointOptions& options = {});

/// Adds the hull's exposed point (on the ellipsoid of largest support) for sampled directions.
void add_support_points(CandidateSet& candidates, const std::vector<Eigen::MatrixXd>& shapes, int samples);

struct ConvexHull
{
  std::vector<int> vertices;               ///< indices into the input points
  std::vector<std::vector<int>> facets;    ///< n point indices per simplicial facet
  std::vector<Eigen::VectorXd> normals;    ///< outward unit normals
  std::vector<double> offsets;             ///< normal' x <= offset on the hull
};

/// n-dimensional quickhull with simplicial facets; throws DegenerateHullError for flat input.
ConvexHull quickhull(const std::vector<Eigen::VectorXd>& points, double rel_eps = 1e-10);

struct HullPolytope
{
  std::vector<Eigen::VectorXd> vertices;
  std::vector<int> vertex_owner;        ///< ellipsoid owning each vertex, -1 if unknown
  Eigen::MatrixXd F_CH;                 ///< unique facet rows, g_CH = 1
  Eigen::VectorXd g_CH;
  std::vector<std::vector<int>> facets; ///< vertex indices per simplicial facet
  std::vector<int> facet_row;           ///< row of F_CH for each facet

  Eigen::Index dim() const { return F_CH.cols(); }
  PolyhedralSetd as_set() const { return PolyhedralSetd(F_CH, g_CH); }
};

HullPolytope build_hull_polytope(const CandidateSet& candidates);

struct PartitionRegion
{
  std::vector<int> vertex_ids;
  std::vector<int> ellipsoid_ids;
  Eigen::MatrixXd V_star;     ///< n x r
  Eigen::MatrixXd gamma_map;  ///< r x n, V_v S_v^{-1} U_v'
  int facet_row = -1;
};

/// One cone Co(0, facet vertices) per hull facet.
std::vector<PartitionRegion> build_partitions(const HullPolytope& hull);

/// Thin-SVD pseudo-inverse of V*; throws when V* is rank deficient (relative threshold 1e-10).
Eigen::MatrixXd svd_gamma_map(const Eigen::MatrixXd& V_star);

/// Lowest-id region whose barycentric weights are all >= -tol, or -1.
int locate_region(const std::vector<PartitionRegion>& regions, const Eigen::VectorXd& x, double tol = 1e-9);

}  // namespace hullguard
