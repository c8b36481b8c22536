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
// Dense primal-dual path-following solver for
//
//   (D)  maximize b'y  s.t.  S = C - sum_i y_i A_i >= 0
//   (P)  minimize <C,X> s.t. <A_i, X> = b_i, X >= 0
//
// over a direct sum of symmetric blocks. LMIs F(z) = F0 + sum z_i F_i >= 0 map to (D)
// with C = F0 and A_i = -F_i. Search direction is HKM with Mehrotra predictor-corrector.

#include "hullguard/lmi.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <iostream>
#include <limits>
#include <sstream>

namespace hullguard::lmi {

namespace {

struct Block
{
  Eigen::Index dim = 0;
  Eigen::MatrixXd C;
  std::vector<std::pair<int, Eigen::MatrixXd>> A;  // (coordinate, coefficient)
};

struct Conic
{
  std::vector<Block> blocks;
  Eigen::VectorXd b;
  int m = 0;
};

struct IpmResult
{
  bool converged = false;
  Eigen::VectorXd y;
  std::vector<Eigen::MatrixXd> X;
  double pobj = 0.0;
  double dobj = 0.0;
  double pinf = 0.0;
  double dinf = 0.0;
  double gap = 0.0;
  int iterations = 0;
  std::string message;
};

double frob_dot(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) { return a.cwiseProduct(b).sum(); }

Eigen::MatrixXd sym(const Eigen::MatrixXd& m) { return 0.5 * (m + m.transpose()); }

Eigen::VectorXd apply_A(const Conic& c, const std::vector<Eigen::MatrixXd>& X)
{
  Eigen::VectorXd out = Eigen::VectorXd::Zero(c.m);
  for (std::size_t k = 0; k < c.blocks.size(); ++k) {
    for (const auto& [i, Ai] : c.blocks[k].A) out(i) += frob_dot(Ai, X[k]);
  }
  return out;
}

Eigen::MatrixXd apply_At(const Block& blk, const Eigen::VectorXd& y)
{
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(blk.dim, blk.dim);
  for (const auto& [i, Ai] : blk.A) out.noalias() += y(i) * Ai;
  return out;
}

/// Largest step in [0, inf) keeping M + a*D positive semidefinite; M must be positive definite.
double max_step(const Eigen::MatrixXd& M, const Eigen::MatrixXd& D)
{
  Eigen::LLT<Eigen::MatrixXd> llt(M);
  if (llt.info() != Eigen::Success) return 0.0;
  const Eigen::MatrixXd Linv_D = llt.matrixL().solve(D);
  const Eigen::MatrixXd W = llt.matrixL().solve(Linv_D.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sym(W), Eigen::EigenvaluesOnly);
  const double lo = es.eigenvalues().minCoeff();
  if (lo >= 0.0) return std::numeric_limits<double>::infinity();
  return -1.0 / lo;
}

struct IpmSettings
{
  double tol = 1e-9;      ///< primal and dual infeasibility
  double gap_tol = 1e-9;  ///< relative duality gap
  double relaxed_feas = 1e-7;
  double relaxed_gap = 1e-7;
  double near_gap = 1e-4;  ///< accepted gap for a strictly feasible LMI point when the multiplier stalls
  int max_iterations = 120;
  bool verbose = false;
  const char* tag = "sdp";
};

IpmResult run_ipm(const Conic& c, const IpmSettings& st)
{
  const std::size_t nb = c.blocks.size();
  IpmResult res;
  std::vector<Eigen::MatrixXd> X(nb), S(nb);
  Eigen::VectorXd y = Eigen::VectorXd::Zero(c.m);

  double normC = 0.0;
  for (const auto& blk : c.blocks) normC = std::max(normC, blk.C.norm());
  const double normb = c.b.norm();
  double total_dim = 0.0;
  for (std::size_t k = 0; k < nb; ++k) {
    const Block& blk = c.blocks[k];
    const double nk = static_cast<double>(blk.dim);
    total_dim += nk;
    double xi = std::max(10.0, std::sqrt(nk));
    double eta = std::max(10.0, std::sqrt(nk));
    double amax = 0.0;
    for (const auto& [i, Ai] : blk.A) {
      const double an = Ai.norm();
      amax = std::max(amax, an);
      xi = std::max(xi, nk * (1.0 + std::abs(c.b(i))) / (1.0 + an));
    }
    eta = std::max(eta, (1.0 + std::max(amax, blk.C.norm())) / std::sqrt(nk));
    X[k] = xi * Eigen::MatrixXd::Identity(blk.dim, blk.dim);
    S[k] = eta * Eigen::MatrixXd::Identity(blk.dim, blk.dim);
  }

  int stalls = 0;
  bool relaxed_ok = false;
  Eigen::VectorXd y_relaxed;
  std::vector<Eigen::MatrixXd> X_relaxed;
  double near_best = std::numeric_limits<double>::infinity();
  Eigen::VectorXd y_near;
  std::vector<Eigen::MatrixXd> X_near;

  for (int iter = 0; iter <= st.max_iterations; ++iter) {
    res.iterations = iter;
    std::vector<Eigen::MatrixXd> Rd(nb);
    double dinf_abs = 0.0;
    double pobj = 0.0;
    double xs = 0.0;
    for (std::size_t k = 0; k < nb; ++k) {
      Rd[k] = c.blocks[k].C - apply_At(c.blocks[k], y) - S[k];
      dinf_abs = std::max(dinf_abs, Rd[k].norm());
      pobj += frob_dot(c.blocks[k].C, X[k]);
      xs += frob_dot(X[k], S[k]);
    }
    const Eigen::VectorXd rp = c.b - apply_A(c, X);
    const double dobj = c.b.dot(y);
    const double mu = xs / total_dim;
    const double pinf = rp.norm() / (1.0 + normb);
    const double dinf = dinf_abs / (1.0 + normC);
    const double gap = std::abs(pobj - dobj) / (1.0 + std::abs(pobj) + std::abs(dobj));
    res.pobj = pobj;
    res.dobj = dobj;
    res.pinf = pinf;
    res.dinf = dinf;
    res.gap = gap;
    if (st.verbose) {
      std::cerr << "[" << st.tag << "] it " << iter << " pobj " << pobj << " dobj " << dobj << " pinf " << pinf
                << " dinf " << dinf << " gap " << gap << " mu " << mu << "\n";
    }
    if (pinf <= st.tol && dinf <= st.tol && gap <= st.gap_tol) {
      res.converged = true;
      res.y = y;
      res.X = X;
      res.message = "converged";
      return res;
    }
    if (pinf <= st.relaxed_feas && dinf <= st.relaxed_feas * 1e-2 && gap <= st.relaxed_gap) {
      relaxed_ok = true;
      y_relaxed = y;
      X_relaxed = X;
    }
    if (dinf <= st.relaxed_feas * 1e-2 && pinf <= std::sqrt(st.relaxed_feas) && gap <= st.near_gap &&
        gap < near_best) {
      near_best = gap;
      y_near = y;
      X_near = X;
    }
    double xnorm = 0.0;
    for (const auto& Xk : X) xnorm = std::max(xnorm, Xk.norm());
    if (xnorm > 1e12 || y.norm() > 1e12 || !std::isfinite(pobj) || !std::isfinite(dobj)) {
      res.message = xnorm > 1e12 ? "primal multiplier diverging (constraints likely infeasible)"
                                 : "iterates diverging (objective likely unbounded)";
      break;
    }
    if (iter == st.max_iterations) {
      res.message = "iteration limit reached";
      break;
    }

    // Schur complement matrix M_ij = sum_k tr(A_ki X_k A_kj S_k^{-1}).
    std::vector<Eigen::MatrixXd> Sinv(nb);
    bool s_ok = true;
    for (std::size_t k = 0; k < nb; ++k) {
      Eigen::LLT<Eigen::MatrixXd> llt(S[k]);
      if (llt.info() != Eigen::Success) {
        s_ok = false;
        break;
      }
      Sinv[k] = sym(llt.solve(Eigen::MatrixXd::Identity(S[k].rows(), S[k].cols())));
    }
    if (!s_ok) {
      res.message = "slack lost positive definiteness";
      break;
    }
    Eigen::MatrixXd M = Eigen::MatrixXd::Zero(c.m, c.m);
    for (std::size_t k = 0; k < nb; ++k) {
      const auto& list = c.blocks[k].A;
      for (std::size_t a = 0; a < list.size(); ++a) {
        const Eigen::MatrixXd T = X[k] * list[a].second * Sinv[k];
        for (std::size_t bidx = a; bidx < list.size(); ++bidx) {
          const double v = frob_dot(list[bidx].second, T);
          M(list[a].first, list[bidx].first) += v;
          if (bidx != a) M(list[bidx].first, list[a].first) += v;
        }
      }
    }
    M = sym(M);
    Eigen::LLT<Eigen::MatrixXd> mfac(M);
    if (mfac.info() != Eigen::Success) {
      const double reg = 1e-14 * std::max(1.0, M.diagonal().cwiseAbs().maxCoeff());
      mfac.compute(M + reg * Eigen::MatrixXd::Identity(c.m, c.m));
      if (mfac.info() != Eigen::Success) {
        res.message = "Schur complement matrix singular";
        break;
      }
    }

    auto direction = [&](const std::vector<Eigen::MatrixXd>& K, Eigen::VectorXd& dy, std::vector<Eigen::MatrixXd>& dX,
                         std::vector<Eigen::MatrixXd>& dS) {
      // dX = K - X dS S^{-1} with dS = Rd - A*(dy) and A(dX) = rp.
      std::vector<Eigen::MatrixXd> tmp(nb);
      for (std::size_t k = 0; k < nb; ++k) tmp[k] = K[k] - X[k] * Rd[k] * Sinv[k];
      const Eigen::VectorXd rhs = rp - apply_A(c, tmp);
      dy = mfac.solve(rhs);
      dX.resize(nb);
      dS.resize(nb);
      for (std::size_t k = 0; k < nb; ++k) {
        dS[k] = sym(Rd[k] - apply_At(c.blocks[k], dy));
        dX[k] = sym(K[k] - X[k] * dS[k] * Sinv[k]);
      }
    };
    auto steps = [&](const std::vector<Eigen::MatrixXd>& dX, const std::vector<Eigen::MatrixXd>& dS, double& ap,
                     double& ad) {
      ap = std::numeric_limits<double>::infinity();
      ad = std::numeric_limits<double>::infinity();
      for (std::size_t k = 0; k < nb; ++k) {
        ap = std::min(ap, max_step(X[k], dX[k]));
        ad = std::min(ad, max_step(S[k], dS[k]));
      }
    };

    // Predictor.
    std::vector<Eigen::MatrixXd> K(nb);
    for (std::size_t k = 0; k < nb; ++k) K[k] = -X[k];
    Eigen::VectorXd dy;
    std::vector<Eigen::MatrixXd> dX, dS;
    direction(K, dy, dX, dS);
    double ap = 0.0;
    double ad = 0.0;
    steps(dX, dS, ap, ad);
    ap = std::min(1.0, ap);
    ad = std::min(1.0, ad);
    double mu_aff = 0.0;
    for (std::size_t k = 0; k < nb; ++k) mu_aff += frob_dot(X[k] + ap * dX[k], S[k] + ad * dS[k]);
    mu_aff /= total_dim;
    double sigma = std::pow(std::max(0.0, mu_aff) / mu, 3.0);
    sigma = std::clamp(sigma, 0.0, 1.0);

    // Corrector.
    for (std::size_t k = 0; k < nb; ++k) {
      K[k] = (sigma * mu * Eigen::MatrixXd::Identity(X[k].rows(), X[k].cols()) - dX[k] * dS[k]) * Sinv[k] - X[k];
    }
    direction(K, dy, dX, dS);
    steps(dX, dS, ap, ad);
    const double frac = 0.98;
    ap = std::min(1.0, frac * ap);
    ad = std::min(1.0, frac * ad);
    if (ap < 1e-9 && ad < 1e-9) {
      if (++stalls >= 3) {
        res.message = "step length stalled";
        break;
      }
    } else {
      stalls = 0;
    }
    for (std::size_t k = 0; k < nb; ++k) {
      X[k] = sym(X[k] + ap * dX[k]);
      S[k] = sym(S[k] + ad * dS[k]);
    }
    y += ad * dy;
  }

  if (relaxed_ok) {
    res.converged = true;
    res.y = y_relaxed;
    res.X = X_relaxed;
    res.message = "converged to relaxed tolerance (" + res.message + ")";
    return res;
  }
  if (std::isfinite(near_best)) {
    // S stays positive definite along the path, so with a vanishing dual residual y satisfies
    // every LMI; only the optimality bound is weaker than requested.
    std::ostringstream os;
    os << "feasible point with relative gap " << near_best << " (" << res.message << ")";
    res.converged = true;
    res.y = y_near;
    res.X = X_near;
    res.message = os.str();
    return res;
  }
  res.y = y;
  res.X = X;
  return res;
}

/// Problem after eliminating equalities and directions that touch no block: y = y0 + T w.
struct Reduction
{
  Eigen::VectorXd y0;
  Eigen::MatrixXd T;  // spanning columns
  bool equality_inconsistent = false;
  bool unbounded = false;
  double equality_residual = 0.0;
};

Reduction reduce(const SdpProblem& p)
{
  const int n = p.num_coords();
  Reduction red;

  Eigen::Index neq = 0;
  for (const auto& e : p.equalities()) neq += e.residual.rows() * e.residual.cols();
  Eigen::MatrixXd J = Eigen::MatrixXd::Zero(neq, n);
  Eigen::VectorXd r0 = Eigen::VectorXd::Zero(neq);
  Eigen::Index row = 0;
  for (const auto& e : p.equalities()) {
    const Eigen::Index sz = e.residual.rows() * e.residual.cols();
    r0.segment(row, sz) = Eigen::Map<const Eigen::VectorXd>(e.residual.constant().data(), sz);
    for (const auto& [k, coef] : e.residual.terms()) J.block(row, k, sz, 1) = Eigen::Map<const Eigen::VectorXd>(coef.data(), sz);
    row += sz;
  }

  Eigen::MatrixXd N;
  if (neq > 0 && n > 0) {
    Eigen::BDCSVD<Eigen::MatrixXd> svd(J, Eigen::ComputeFullU | Eigen::ComputeFullV);
    const Eigen::VectorXd& sv = svd.singularValues();
    const double smax = sv.size() > 0 ? sv(0) : 0.0;
    Eigen::Index rank = 0;
    for (Eigen::Index i = 0; i < sv.size(); ++i) {
      if (sv(i) > 1e-11 * std::max(1.0, smax)) ++rank;
    }
    Eigen::VectorXd y0 = Eigen::VectorXd::Zero(n);
    const Eigen::VectorXd ub = svd.matrixU().leftCols(rank).transpose() * (-r0);
    for (Eigen::Index i = 0; i < rank; ++i) y0 += svd.matrixV().col(i) * (ub(i) / sv(i));
    red.y0 = y0;
    red.equality_residual = (J * y0 + r0).cwiseAbs().maxCoeff();
    const double scale = 1.0 + r0.cwiseAbs().maxCoeff() + (J.size() ? J.cwiseAbs().maxCoeff() * y0.cwiseAbs().maxCoeff() : 0.0);
    if (red.equality_residual > 1e-9 * scale) red.equality_inconsistent = true;
    N = svd.matrixV().rightCols(n - rank);
  } else {
    red.y0 = Eigen::VectorXd::Zero(n);
    if (neq > 0) {
      red.equality_residual = r0.cwiseAbs().maxCoeff();
      red.equality_inconsistent = red.equality_residual > 1e-9 * (1.0 + red.equality_residual);
    }
    N = Eigen::MatrixXd::Identity(n, n);
  }

  // Columns of N that leave every PSD block unchanged span the lineality space.
  Eigen::Index rows = 0;
  for (const auto& c : p.psd_constraints()) rows += c.matrix.rows() * c.matrix.rows();
  Eigen::MatrixXd L = Eigen::MatrixXd::Zero(rows, n);
  row = 0;
  for (const auto& c : p.psd_constraints()) {
    const Eigen::Index sz = c.matrix.rows() * c.matrix.rows();
    for (const auto& [k, coef] : c.matrix.terms()) L.block(row, k, sz, 1) = Eigen::Map<const Eigen::VectorXd>(coef.data(), sz);
    row += sz;
  }
  const Eigen::MatrixXd LN = L * N;
  if (LN.cols() == 0) {
    red.T = N;
    return red;
  }
  // Keep a spanning subset of the columns of N rather than a rotated basis, so blocks stay sparse
  // in the reduced coordinates.
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(LN);
  qr.setThreshold(1e-11);
  const Eigen::Index rank = qr.rank();
  if (rank == N.cols()) {
    red.T = N;
    return red;
  }
  std::vector<Eigen::Index> keep(qr.colsPermutation().indices().data(),
                                 qr.colsPermutation().indices().data() + rank);
  std::sort(keep.begin(), keep.end());
  Eigen::MatrixXd T(n, rank);
  for (Eigen::Index i = 0; i < rank; ++i) T.col(i) = N.col(keep[i]);
  red.T = T;
  Eigen::FullPivLU<Eigen::MatrixXd> lu(LN);
  lu.setThreshold(1e-11);
  const Eigen::MatrixXd Z = N * lu.kernel();
  Eigen::VectorXd cobj = Eigen::VectorXd::Zero(n);
  for (const auto& [k, coef] : p.objective().terms()) cobj(k) = coef(0, 0);
  if (Z.cols() > 0 && (Z.transpose() * cobj).norm() > 1e-10 * (1.0 + cobj.norm())) red.unbounded = true;
  return red;
}

/// Builds (D) for F(w) = F0(y0) + sum_j w_j F_j(T e_j) >= 0 with objective c'T w.
/// block_scale, col_scale and b_scale are recorded so that results map back.
struct Scaled
{
  Conic conic;
  std::vector<double> block_scale;
  Eigen::VectorXd col_scale;
  double b_scale = 1.0;
};

Scaled build_conic(const std::vector<Eigen::MatrixXd>& F0, const std::vector<std::vector<Eigen::MatrixXd>>& Fj,
                   const Eigen::VectorXd& obj)
{
  Scaled out;
  const int m = static_cast<int>(obj.size());
  out.conic.m = m;
  out.block_scale.resize(F0.size());
  Eigen::VectorXd colsq = Eigen::VectorXd::Zero(m);
  for (std::size_t k = 0; k < F0.size(); ++k) {
    Block blk;
    blk.dim = F0[k].rows();
    double s = F0[k].norm();
    for (int j = 0; j < m; ++j) s = std::max(s, Fj[k][j].norm());
    if (s <= 0.0) s = 1.0;
    out.block_scale[k] = s;
    blk.C = F0[k] / s;
    for (int j = 0; j < m; ++j) {
      if (Fj[k][j].cwiseAbs().maxCoeff() > 1e-14 * s) {
        blk.A.emplace_back(j, -Fj[k][j] / s);
        colsq(j) += blk.A.back().second.squaredNorm();
      }
    }
    out.conic.blocks.push_back(std::move(blk));
  }
  out.col_scale = colsq.cwiseSqrt();
  for (int j = 0; j < m; ++j) {
    if (out.col_scale(j) <= 0.0) out.col_scale(j) = 1.0;
  }
  for (auto& blk : out.conic.blocks) {
    for (auto& [j, Aj] : blk.A) Aj /= out.col_scale(j);
  }
  Eigen::VectorXd b = obj.cwiseQuotient(out.col_scale);
  out.b_scale = std::max(1.0, b.norm());
  out.conic.b = b / out.b_scale;
  return out;
}

struct Reduced
{
  std::vector<Eigen::MatrixXd> F0;
  std::vector<std::vector<Eigen::MatrixXd>> Fj;
  Eigen::VectorXd obj;
};

Reduced reduced_blocks(const SdpProblem& p, const Reduction& red)
{
  Reduced r;
  const Eigen::Index m = red.T.cols();
  for (const auto& c : p.psd_constraints()) {
    const Eigen::Index d = c.matrix.rows();
    r.F0.push_back(sym(c.matrix.evaluate(red.y0)));
    // Gather the coordinates this block touches, then map them through T in one product.
    const auto& terms = c.matrix.terms();
    Eigen::MatrixXd Lk(d * d, static_cast<Eigen::Index>(terms.size()));
    Eigen::MatrixXd Tk(static_cast<Eigen::Index>(terms.size()), m);
    Eigen::Index col = 0;
    for (const auto& [k, coef] : terms) {
      Lk.col(col) = Eigen::Map<const Eigen::VectorXd>(coef.data(), d * d);
      Tk.row(col) = red.T.row(k);
      ++col;
    }
    const Eigen::MatrixXd LT = Lk * Tk;
    std::vector<Eigen::MatrixXd> cols(m);
    for (Eigen::Index j = 0; j < m; ++j) cols[j] = sym(Eigen::Map<const Eigen::MatrixXd>(LT.col(j).data(), d, d));
    r.Fj.push_back(std::move(cols));
  }
  Eigen::VectorXd cobj = Eigen::VectorXd::Zero(p.num_coords());
  for (const auto& [k, coef] : p.objective().terms()) cobj(k) = coef(0, 0);
  r.obj = red.T.transpose() * cobj;
  return r;
}

InfeasibilityCertificate verify_certificate(const Reduced& r, std::vector<Eigen::MatrixXd> X)
{
  InfeasibilityCertificate cert;
  double tr = 0.0;
  for (auto& Xk : X) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sym(Xk));
    Eigen::VectorXd ev = es.eigenvalues().cwiseMax(0.0);
    Xk = es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
    tr += Xk.trace();
  }
  if (!(tr > 0.0)) return cert;
  for (auto& Xk : X) Xk /= tr;
  double margin = 0.0;
  for (std::size_t k = 0; k < X.size(); ++k) margin += frob_dot(r.F0[k], X[k]);
  Eigen::VectorXd resid = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(r.obj.size()));
  for (std::size_t k = 0; k < X.size(); ++k) {
    for (Eigen::Index j = 0; j < resid.size(); ++j) resid(j) += frob_dot(r.Fj[k][j], X[k]);
  }
  cert.margin = margin;
  cert.multiplier_residual = resid.norm();
  cert.certified_radius = cert.multiplier_residual > 0.0 ? -margin / cert.multiplier_residual
                                                          : std::numeric_limits<double>::infinity();
  // <F(w), X> = margin + w'resid must be >= 0 for any feasible w, so none exists with
  // |w| < certified_radius; a large radius is taken as proof.
  cert.present = margin < 0.0 && cert.certified_radius > 1e6;
  return cert;
}

}  // namespace

SdpSolution solve_sdp(const SdpProblem& problem, const SolverOptions& options)
{
  SdpSolution sol;
  const Reduction red = reduce(problem);
  if (red.equality_inconsistent) {
    sol.status = SolveStatus::infeasible;
    sol.coords = red.y0;
    sol.certificate.present = true;
    sol.certificate.equality_inconsistent = true;
    sol.certificate.margin = -red.equality_residual;
    sol.certificate.certified_radius = std::numeric_limits<double>::infinity();
    sol.max_equality_violation = red.equality_residual;
    sol.message = "linear equalities are inconsistent";
    return sol;
  }
  if (red.unbounded) {
    sol.status = SolveStatus::numerical_failure;
    sol.coords = red.y0;
    sol.message = "objective unbounded along a direction unconstrained by every LMI";
    return sol;
  }

  const Reduced r = reduced_blocks(problem, red);
  const int m = static_cast<int>(r.obj.size());

  auto finish_optimal = [&](const Eigen::VectorXd& y) -> bool {
    const Residuals res = evaluate_residuals(problem, y);
    sol.coords = y;
    sol.max_psd_violation = res.max_psd_violation;
    sol.max_equality_violation = res.max_equality_violation;
    sol.objective = problem.objective().evaluate(y)(0, 0);
    return res.max_psd_violation <= options.feas_tol && res.max_equality_violation <= options.feas_tol;
  };

  IpmSettings st;
  st.tol = std::min(1e-9, 1e-2 * options.feas_tol);
  // Stopping at a moderate gap keeps the final iterate near the central path; on a degenerate
  // optimal face this makes the returned point reproducible across equivalent formulations.
  st.gap_tol = options.gap_tol;
  st.relaxed_feas = options.feas_tol;
  st.relaxed_gap = options.gap_tol;
  st.max_iterations = options.max_iterations;
  st.verbose = options.verbose;

  if (problem.psd_constraints().empty()) {
    if (m > 0 && r.obj.norm() > 0.0) {
      sol.status = SolveStatus::numerical_failure;
      sol.coords = red.y0;
      sol.message = "objective unbounded (no LMI constraints)";
      return sol;
    }
    finish_optimal(red.y0);
    sol.status = SolveStatus::optimal;
    sol.message = "no LMI constraints";
    return sol;
  }

  std::string phase2_msg;
  if (m == 0) {
    if (finish_optimal(red.y0)) {
      sol.status = SolveStatus::optimal;
      sol.message = "unique point fixed by equalities";
      return sol;
    }
    phase2_msg = "unique point fixed by equalities violates an LMI";
  } else {
    const Scaled sc = build_conic(r.F0, r.Fj, r.obj);
    st.tag = "phase2";
    const IpmResult ipm = run_ipm(sc.conic, st);
    sol.iterations = ipm.iterations;
    if (ipm.converged) {
      const Eigen::VectorXd w = ipm.y.cwiseQuotient(sc.col_scale);
      const Eigen::VectorXd y = red.y0 + red.T * w;
      sol.duality_gap = ipm.gap;
      if (finish_optimal(y)) {
        sol.status = SolveStatus::optimal;
        sol.message = ipm.message;
        return sol;
      }
      std::ostringstream os;
      os << "re-substitution check failed (psd violation " << sol.max_psd_violation << ")";
      phase2_msg = os.str();
    } else {
      phase2_msg = ipm.message;
    }
  }

  // Phase I: maximize t s.t. F(w) - t I >= 0 and t <= 1.
  std::vector<Eigen::MatrixXd> F0 = r.F0;
  std::vector<std::vector<Eigen::MatrixXd>> Fj = r.Fj;
  for (std::size_t k = 0; k < F0.size(); ++k) {
    Fj[k].push_back(-Eigen::MatrixXd::Identity(F0[k].rows(), F0[k].cols()));
  }
  F0.push_back(Eigen::MatrixXd::Ones(1, 1));
  std::vector<Eigen::MatrixXd> cap(m + 1, Eigen::MatrixXd::Zero(1, 1));
  cap[m](0, 0) = -1.0;
  Fj.push_back(cap);
  Eigen::VectorXd obj1 = Eigen::VectorXd::Zero(m + 1);
  obj1(m) = 1.0;
  const Scaled sc1 = build_conic(F0, Fj, obj1);
  IpmSettings st1 = st;
  st1.tag = "phase1";
  st1.gap_tol = st.tol;
  st1.max_iterations = std::max(options.max_iterations, 150);
  const IpmResult ipm1 = run_ipm(sc1.conic, st1);
  sol.iterations += ipm1.iterations;

  std::vector<Eigen::MatrixXd> Xorig;
  for (std::size_t k = 0; k + 1 < F0.size() && k < ipm1.X.size(); ++k) {
    Xorig.push_back(ipm1.X[k] / sc1.block_scale[k]);
  }
  const double tstar = ipm1.X.empty() ? 0.0 : ipm1.y(m) / sc1.col_scale(m);
  if (!Xorig.empty()) {
    const InfeasibilityCertificate cert = verify_certificate(r, Xorig);
    if (cert.present) {
      sol.status = SolveStatus::infeasible;
      sol.certificate = cert;
      sol.coords = red.y0 + red.T * ipm1.y.head(m).cwiseQuotient(sc1.col_scale.head(m));
      const Residuals res = evaluate_residuals(problem, sol.coords);
      sol.max_psd_violation = res.max_psd_violation;
      sol.max_equality_violation = res.max_equality_violation;
      std::ostringstream os;
      os << "infeasible: dual certificate with margin " << cert.margin << ", certified radius "
         << cert.certified_radius << " (phase I t* = " << tstar << ")";
      sol.message = os.str();
      return sol;
    }
    sol.certificate = cert;
    sol.certificate.present = false;
  }
  sol.status = SolveStatus::numerical_failure;
  std::ostringstream os;
  os << "solver did not converge: " << phase2_msg << "; phase I t* = " << tstar << " (" << ipm1.message << ")";
  sol.message = os.str();
  if (sol.coords.size() != problem.num_coords()) sol.coords = red.y0;
  return sol;
}

}  // namespace hullguard::lmi
