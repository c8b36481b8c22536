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

#include <Eigen/SVD>

#include <algorithm>
#include <list>
#include <map>

namespace hullguard {

namespace {

struct Facet
{
  std::vector<int> verts;
  Eigen::VectorXd normal;
  double offset = 0.0;
  std::vector<int> outside;
  bool alive = true;
};

// Hyperplane through the n points; oriented so that 'inside' lies on the negative side.
bool make_plane(const std::vector<Eigen::VectorXd>& pts, Facet& f, const Eigen::VectorXd& inside)
{
  const Eigen::Index n = inside.size();
  Eigen::MatrixXd D(n - 1, n);
  for (Eigen::Index k = 1; k < n; ++k) D.row(k - 1) = (pts[f.verts[k]] - pts[f.verts[0]]).transpose();
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(D, Eigen::ComputeFullV);
  f.normal = svd.matrixV().col(n - 1);
  f.offset = f.normal.dot(pts[f.verts[0]]);
  if (f.normal.dot(inside) > f.offset) {
    f.normal = -f.normal;
    f.offset = -f.offset;
  }
  return true;
}

}  // namespace

ConvexHull quickhull(const std::vector<Eigen::VectorXd>& points, double rel_eps)
{
  if (points.empty()) throw DegenerateHullError("empty point set");
  const Eigen::Index n = points.front().size();
  if (n < 2) throw std::invalid_argument("quickhull requires dimension >= 2");
  const int np = static_cast<int>(points.size());
  if (np < n + 1) throw DegenerateHullError("fewer than n+1 points");
  double scale = 0.0;
  for (const auto& p : points) {
    if (p.size() != n) throw std::invalid_argument("points of mixed dimension");
    scale = std::max(scale, p.cwiseAbs().maxCoeff());
  }
  const double eps = rel_eps * std::max(scale, 1e-300);

  // Initial simplex: extreme point along the first axis, then greedily the farthest from the current affine hull.
  std::vector<int> simplex;
  {
    int lo = 0;
    int hi = 0;
    for (int i = 1; i < np; ++i) {
      if (points[i](0) < points[lo](0)) lo = i;
      if (points[i](0) > points[hi](0)) hi = i;
    }
    simplex.push_back(lo);
    if (hi == lo) {
      double best = -1.0;
      for (int i = 0; i < np; ++i) {
        const double d = (points[i] - points[lo]).norm();
        if (d > best) {
          best = d;
          hi = i;
        }
      }
    }
    if ((points[hi] - points[lo]).norm() <= eps) throw DegenerateHullError("all points coincide");
    simplex.push_back(hi);
    while (static_cast<Eigen::Index>(simplex.size()) < n + 1) {
      Eigen::MatrixXd basis(n, static_cast<Eigen::Index>(simplex.size()) - 1);
      for (std::size_t k = 1; k < simplex.size(); ++k) {
        basis.col(static_cast<Eigen::Index>(k) - 1) = points[simplex[k]] - points[simplex[0]];
      }
      const Eigen::HouseholderQR<Eigen::MatrixXd> qr(basis);
      const Eigen::MatrixXd Q = qr.householderQ() * Eigen::MatrixXd::Identity(n, basis.cols());
      int far = -1;
      double best = eps;
      for (int i = 0; i < np; ++i) {
        const Eigen::VectorXd d = points[i] - points[simplex[0]];
        const double dist = (d - Q * (Q.transpose() * d)).norm();
        if (dist > best) {
          best = dist;
          far = i;
        }
      }
      if (far < 0) throw DegenerateHullError("points lie in a lower-dimensional affine subspace");
      simplex.push_back(far);
    }
  }

  Eigen::VectorXd inside = Eigen::VectorXd::Zero(n);
  for (int idx : simplex) inside += points[idx];
  inside /= static_cast<double>(simplex.size());

  std::vector<Facet> facets;
  for (Eigen::Index skip = 0; skip <= n; ++skip) {
    Facet f;
    for (Eigen::Index k = 0; k <= n; ++k) {
      if (k != skip) f.verts.push_back(simplex[k]);
    }
    make_plane(points, f, inside);
    facets.push_back(std::move(f));
  }

  std::vector<char> used(np, 0);
  for (int idx : simplex) used[idx] = 1;
  auto assign = [&](int p, const std::vector<int>& candidates) {
    int best = -1;
    double bestd = eps;
    for (int fi : candidates) {
      const double d = facets[fi].normal.dot(points[p]) - facets[fi].offset;
      if (d > bestd) {
        bestd = d;
        best = fi;
      }
    }
    if (best >= 0) facets[best].outside.push_back(p);
  };
  {
    std::vector<int> all(facets.size());
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = static_cast<int>(i);
    for (int p = 0; p < np; ++p) {
      if (!used[p]) assign(p, all);
    }
  }

  while (true) {
    int fi = -1;
    for (std::size_t i = 0; i < facets.size(); ++i) {
      if (facets[i].alive && !facets[i].outside.empty()) {
        fi = static_cast<int>(i);
        break;
      }
    }
    if (fi < 0) break;
    int apex = -1;
    double far = -1.0;
    for (int p : facets[fi].outside) {
      const double d = facets[fi].normal.dot(points[p]) - facets[fi].offset;
      if (d > far) {
        far = d;
        apex = p;
      }
    }

    std::vector<int> visible;
    for (std::size_t i = 0; i < facets.size(); ++i) {
      if (facets[i].alive && facets[i].normal.dot(points[apex]) - facets[i].offset > eps) {
        visible.push_back(static_cast<int>(i));
      }
    }
    std::map<std::vector<int>, int> ridge_count;
    for (int v : visible) {
      const auto& verts = facets[v].verts;
      for (std::size_t skip = 0; skip < verts.size(); ++skip) {
        std::vector<int> ridge;
        for (std::size_t k = 0; k < verts.size(); ++k) {
          if (k != skip) ridge.push_back(verts[k]);
        }
        std::sort(ridge.begin(), ridge.end());
        ++ridge_count[ridge];
      }
    }
    std::vector<int> orphans;
    for (int v : visible) {
      facets[v].alive = false;
      for (int p : facets[v].outside) {
        if (p != apex) orphans.push_back(p);
      }
      facets[v].outside.clear();
    }
    used[apex] = 1;
    std::vector<int> created;
    for (const auto& [ridge, count] : ridge_count) {
      if (count != 1) continue;
      Facet f;
      f.verts = ridge;
      f.verts.push_back(apex);
      make_plane(points, f, inside);
      created.push_back(static_cast<int>(facets.size()));
      facets.push_back(std::move(f));
    }
    for (int p : orphans) assign(p, created);
  }

  ConvexHull out;
  std::vector<char> is_vertex(np, 0);
  for (const auto& f : facets) {
    if (!f.alive) continue;
    out.facets.push_back(f.verts);
    out.normals.push_back(f.normal);
    out.offsets.push_back(f.offset);
    for (int v : f.verts) is_vertex[v] = 1;
  }
  for (int i = 0; i < np; ++i) {
    if (is_vertex[i]) out.vertices.push_back(i);
  }
  return out;
}

}  // namespace hullguard
