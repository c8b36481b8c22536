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
#include "hullguard/geometry.hpp"

#include <Eigen/QR>
#include <Eigen/SVD>

#include <algorithm>
#include <limits>
#include <map>
#include <numeric>
#include <random>
#include <sstream>

namespace hullguard {

int rotational_index(int i, int M)
{
  if (M < 1 || i < 1 || i > M) throw std::invalid_argument("rotational_index requires 1 <= i <= M");
  return (i + M - 2) % M + 1;
}

Membership ellipsoid_membership(const Ellipsoidd& E, const Eigen::VectorXd& x, double level)
{
  Membership m;
  m.value = E.quadratic(x);
  m.inside = m.value <= level;
  return m;
}

double gauge_polytope(const Eigen::MatrixXd& F, const Eigen::VectorXd& g, const Eigen::VectorXd& x)
{
  double best = 0.0;
  for (Eigen::Index s = 0; s < F.rows(); ++s) {
    if (!(g(s) > 0.0)) throw std::invalid_argument("gauge requires g > 0");
    best = std::max(best, F.row(s).dot(x) / g(s));
  }
  return best;
}

namespace {

// Calls f on every size-k subset of {0..n-1} in lexicographic order.
template <typename F>
void for_each_combination(int n, int k, F&& f)
{
  if (k > n || k <= 0) return;
  std::vector<int> idx(k);
  std::iota(idx.begin(), idx.end(), 0);
  while (true) {
    f(idx);
    int i = k - 1;
    while (i >= 0 && idx[i] == n - k + i) --i;
    if (i < 0) return;
    ++idx[i];
    for (int j = i + 1; j < k; ++j) idx[j] = idx[j - 1] + 1;
  }
}

}  // namespace

std::vector<Eigen::VectorXd> polytope_vertices(const PolyhedralSetd& S, double tol)
{
  const int n = static_cast<int>(S.dim());
  const int q = static_cast<int>(S.rows());
  std::vector<Eigen::VectorXd> out;
  const double scale = 1.0 + S.g().cwiseAbs().maxCoeff();
  for_each_combination(q, n, [&](const std::vector<int>& rows) {
    Eigen::MatrixXd M(n, n);
    Eigen::VectorXd rhs(n);
    for (int k = 0; k < n; ++k) {
      M.row(k) = S.F().row(rows[k]);
      rhs(k) = S.g()(rows[k]);
    }
    Eigen::FullPivLU<Eigen::MatrixXd> lu(M);
    if (lu.rank() < n) return;
    const Eigen::VectorXd v = lu.solve(rhs);
    if (!S.contains(v, tol * scale)) return;
    for (const auto& w : out) {
      if ((w - v).norm() <= 1e-9 * (1.0 + v.norm())) return;
    }
    out.push_back(v);
  });
  return out;
}

namespace {

struct NewtonResult
{
  bool converged = false;
  Eigen::VectorXd phi;
};

NewtonResult newton_common_tangent(const std::vector<const Eigen::MatrixXd*>& P, Eigen::VectorXd phi,
                                   const ExtremePointOptions& opt)
{
  const Eigen::Index n = phi.size();
  auto residual = [&](const Eigen::VectorXd& f) {
    Eigen::VectorXd r(static_cast<Eigen::Index>(P.size()));
    for (std::size_t k = 0; k < P.size(); ++k) r(static_cast<Eigen::Index>(k)) = f.dot(*P[k] * f) - 1.0;
    return r;
  };
  Eigen::VectorXd r = residual(phi);
  for (int it = 0; it < opt.max_iterations; ++it) {
    if (r.cwiseAbs().maxCoeff() < opt.newton_tol) return {true, phi};
    Eigen::MatrixXd J(static_cast<Eigen::Index>(P.size()), n);
    for (std::size_t k = 0; k < P.size(); ++k) J.row(static_cast<Eigen::Index>(k)) = 2.0 * (*P[k] * phi).transpose();
    // Minimum-norm least-squares step copes with coincident equations.
    const Eigen::VectorXd step = J.completeOrthogonalDecomposition().solve(-r);
    double alpha = 1.0;
    bool improved = false;
    for (int h = 0; h < 40; ++h) {
      const Eigen::VectorXd trial = phi + alpha * step;
      const Eigen::VectorXd rt = residual(trial);
      if (rt.norm() < r.norm()) {
        phi = trial;
        r = rt;
        improved = true;
        break;
      }
      alpha *= 0.5;
    }
    if (!improved) break;
  }
  return {r.cwiseAbs().maxCoeff() < opt.newton_tol, phi};
}

void push_unique(CandidateSet& set, const Eigen::VectorXd& v, int owner, double tol)
{
  for (std::size_t i = 0; i < set.points.size(); ++i) {
    if ((set.points[i] - v).cwiseAbs().maxCoeff() <= tol) return;
  }
  set.points.push_back(v);
  set.owners.push_back(owner);
}

double shapes_scale(const std::vector<Eigen::MatrixXd>& shapes)
{
  double s = 0.0;
  for (const auto& P : shapes) s = std::max(s, std::sqrt(P.diagonal().maxCoeff()));
  return std::max(s, 1e-300);
}

}  // namespace

CandidateSet extract_extreme_points(const std::vector<Eigen::MatrixXd>& shapes, const ExtremePointOptions& opt)
{
  if (shapes.empty()) throw std::invalid_argument("no ellipsoids given");
  const int n = static_cast<int>(shapes.front().rows());
  const int nv = static_cast<int>(shapes.size());
  if (nv < n) throw std::invalid_argument("extract_extreme_points needs at least n ellipsoids");
  std::vector<Ellipsoidd> ells;
  for (const auto& P : shapes) {
    if (P.rows() != n || P.cols() != n) throw std::invalid_argument("ellipsoid dimensions differ");
    ells.emplace_back(P);
  }

  // Deterministic starts: +-e_a and +-(e_a +- e_b)/sqrt(2), 2 n^2 in total.
  std::vector<Eigen::VectorXd> dirs;
  for (int a = 0; a < n; ++a) {
    Eigen::VectorXd e = Eigen::VectorXd::Unit(n, a);
    dirs.push_back(e);
    dirs.push_back(-e);
    for (int b = a + 1; b < n; ++b) {
      Eigen::VectorXd f = Eigen::VectorXd::Unit(n, b);
      dirs.push_back((e + f) / std::sqrt(2.0));
      dirs.push_back(-(e + f) / std::sqrt(2.0));
      dirs.push_back((e - f) / std::sqrt(2.0));
      dirs.push_back(-(e - f) / std::sqrt(2.0));
    }
  }

  CandidateSet out;
  const double tol = opt.dedup_tol * shapes_scale(shapes);
  for_each_combination(nv, n, [&](const std::vector<int>& combo) {
    std::vector<const Eigen::MatrixXd*> Ps;
    Eigen::MatrixXd mean = Eigen::MatrixXd::Zero(n, n);
    for (int k : combo) {
      Ps.push_back(&shapes[k]);
      mean += shapes[k] / static_cast<double>(n);
    }
    // phi' P phi = 1 has natural scale 1/sqrt(trace(P)/n).
    const double radius = 1.0 / std::sqrt(std::max(mean.trace() / n, 1e-300));
    int found = 0;
    for (const auto& d : dirs) {
      const NewtonResult nr = newton_common_tangent(Ps, radius * d, opt);
      if (!nr.converged) continue;
      if (opt.support_filter) {
        double worst = 0.0;
        for (const auto& P : shapes) worst = std::max(worst, nr.phi.dot(P * nr.phi));
        if (worst > 1.0 + opt.support_tol) continue;
      }
      ++found;
      for (double sgn : {1.0, -1.0}) {
        const Eigen::VectorXd phi = sgn * nr.phi;
        out.roots += 1;
        for (int k : combo) {
          const Eigen::VectorXd v = shapes[k] * phi;
          if (std::abs(ells[k].quadratic(v) - 1.0) > opt.boundary_tol) continue;
          push_unique(out, v, k, tol);
        }
      }
    }
    if (found == 0) {
      std::ostringstream os;
      os << "no supporting root for ellipsoid combination {";
      for (std::size_t i = 0; i < combo.size(); ++i) os << (i ? "," : "") << combo[i];
      os << "}";
      out.warnings.push_back(os.str());
    }
  });
  if (opt.support_samples > 0) add_support_points(out, shapes, opt.support_samples);
  return out;
}

void add_support_points(CandidateSet& candidates, const std::vector<Eigen::MatrixXd>& shapes, int samples)
{
  if (shapes.empty() || samples <= 0) return;
  const Eigen::Index n = shapes.front().rows();
  std::vector<Ellipsoidd> ells;
  for (const auto& P : shapes) ells.emplace_back(P);
  const double tol = 1e-6 * shapes_scale(shapes);
  std::vector<Eigen::VectorXd> dirs;
  if (n == 2) {
    for (int k = 0; k < samples; ++k) {
      const double th = 2.0 * M_PI * (k + 0.5) / samples;
      dirs.push_back(Eigen::Vector2d(std::cos(th), std::sin(th)));
    }
  } else {
    std::mt19937_64 rng(0x5eed);
    std::normal_distribution<double> nd(0.0, 1.0);
    for (int k = 0; k < samples; ++k) {
      Eigen::VectorXd d(n);
      for (Eigen::Index i = 0; i < n; ++i) d(i) = nd(rng);
      d.normalize();
      dirs.push_back(d);
      dirs.push_back(-d);
    }
  }
  for (const auto& d : dirs) {
    int best = 0;
    double h = -1.0;
    for (std::size_t k = 0; k < ells.size(); ++k) {
      const double hk = ells[k].support(d);
      if (hk > h) {
        h = hk;
        best = static_cast<int>(k);
      }
    }
    push_unique(candidates, ells[best].support_point(d), best, tol);
  }
}

HullPolytope build_hull_polytope(const CandidateSet& candidates)
{
  if (candidates.points.empty()) throw DegenerateHullError("no candidate points");
  const Eigen::Index n = candidates.points.front().size();
  const ConvexHull ch = quickhull(candidates.points);
  HullPolytope hp;
  std::map<int, int> remap;
  for (int idx : ch.vertices) {
    remap[idx] = static_cast<int>(hp.vertices.size());
    hp.vertices.push_back(candidates.points[idx]);
    hp.vertex_owner.push_back(idx < static_cast<int>(candidates.owners.size()) ? candidates.owners[idx] : -1);
  }
  std::vector<Eigen::VectorXd> rows;
  for (std::size_t f = 0; f < ch.facets.size(); ++f) {
    if (!(ch.offsets[f] > 0.0)) throw DegenerateHullError("origin is not interior to the candidate hull");
    const Eigen::VectorXd row = ch.normals[f] / ch.offsets[f];
    int found = -1;
    for (std::size_t r = 0; r < rows.size(); ++r) {
      if ((rows[r] - row).norm() <= 1e-9 * (1.0 + row.norm())) {
        found = static_cast<int>(r);
        break;
      }
    }
    if (found < 0) {
      found = static_cast<int>(rows.size());
      rows.push_back(row);
    }
    std::vector<int> ids;
    for (int idx : ch.facets[f]) ids.push_back(remap.at(idx));
    hp.facets.push_back(ids);
    hp.facet_row.push_back(found);
  }
  hp.F_CH.resize(static_cast<Eigen::Index>(rows.size()), n);
  for (std::size_t r = 0; r < rows.size(); ++r) hp.F_CH.row(static_cast<Eigen::Index>(r)) = rows[r].transpose();
  hp.g_CH = Eigen::VectorXd::Ones(static_cast<Eigen::Index>(rows.size()));
  return hp;
}

Eigen::MatrixXd svd_gamma_map(const Eigen::MatrixXd& V_star)
{
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(V_star, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Eigen::VectorXd& s = svd.singularValues();
  if (s.size() == 0 || s(0) <= 0.0 || s(s.size() - 1) <= 1e-10 * s(0)) {
    throw std::invalid_argument("vertex matrix of a region is rank deficient");
  }
  return svd.matrixV() * s.cwiseInverse().asDiagonal() * svd.matrixU().transpose();
}

std::vector<PartitionRegion> build_partitions(const HullPolytope& hull)
{
  std::vector<PartitionRegion> regions;
  const Eigen::Index n = hull.dim();
  for (std::size_t f = 0; f < hull.facets.size(); ++f) {
    const auto& ids = hull.facets[f];
    std::vector<int> sorted = ids;
    std::sort(sorted.begin(), sorted.end());
    if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) {
      throw std::invalid_argument("facet with repeated vertices");
    }
    PartitionRegion r;
    r.vertex_ids = ids;
    r.V_star.resize(n, static_cast<Eigen::Index>(ids.size()));
    for (std::size_t k = 0; k < ids.size(); ++k) {
      r.V_star.col(static_cast<Eigen::Index>(k)) = hull.vertices[ids[k]];
      r.ellipsoid_ids.push_back(hull.vertex_owner[ids[k]]);
    }
    r.gamma_map = svd_gamma_map(r.V_star);
    r.facet_row = hull.facet_row[f];
    regions.push_back(std::move(r));
  }
  return regions;
}

int locate_region(const std::vector<PartitionRegion>& regions, const Eigen::VectorXd& x, double tol)
{
  int best = -1;
  double best_min = -std::numeric_limits<double>::infinity();
  const double scale = std::max(1.0, x.norm());
  for (std::size_t r = 0; r < regions.size(); ++r) {
    const Eigen::VectorXd gamma = regions[r].gamma_map * x;
    const double lo = gamma.size() ? gamma.minCoeff() : 0.0;
    if (lo >= -tol * scale) return static_cast<int>(r);
    if (lo > best_min) {
      best_min = lo;
      best = static_cast<int>(r);
    }
  }
  // The cones cover R^n, so this is reached only through rounding.
  return best;
}

}  // namespace hullguard
