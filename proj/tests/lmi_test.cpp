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
#include <doctest.h>

#include "hullguard/lmi.hpp"

#include <random>

using namespace hullguard::lmi;

namespace {

// Builds [[a, t], [t, b]] from a scalar expression t.
AffineMatrix two_by_two(double a, const AffineMatrix& t, double b)
{
  Eigen::MatrixXd base = Eigen::MatrixXd::Zero(2, 2);
  base(0, 0) = a;
  base(1, 1) = b;
  const Eigen::MatrixXd e0 = Eigen::Vector2d(1.0, 0.0);
  const Eigen::MatrixXd e1 = Eigen::Vector2d(0.0, 1.0);
  return AffineMatrix(base) + e0 * t * e1.transpose() + e1 * t * e0.transpose();
}

}  // namespace

TEST_CASE("assembly mirrors upper blocks and validates shapes")
{
  SdpProblem p;
  AffineMatrix P = p.add_symmetric("P", 2);
  CHECK(p.num_coords() == 3);
  p.add_psd(BlockRows{{P}});
  p.maximize(trace(P));
  CHECK(p.psd_constraints().size() == 1);
  CHECK(p.psd_constraints()[0].matrix.rows() == 2);

  AffineMatrix S = p.add_matrix("S", 1, 2);
  CHECK(S.rows() == 1);
  CHECK(S.cols() == 2);
  // Row 0 block (0,1) has 2x2 * 1x? mismatch.
  CHECK_THROWS_AS(p.add_psd(BlockRows{{P, S}, {AffineMatrix::identity(1)}}), AssemblyError);
  CHECK_NOTHROW(p.add_psd(BlockRows{{P, S.transpose()}, {AffineMatrix::identity(1)}}));
  CHECK_THROWS_AS(p.add_psd(BlockRows{{P}, {AffineMatrix::identity(1)}}), AssemblyError);

  SdpProblem other;
  AffineMatrix Q = other.add_symmetric("Q", 2);
  CHECK_THROWS_AS(p.add_psd(BlockRows{{Q}}), AssemblyError);
  CHECK_THROWS_AS(P + Q, AssemblyError);
  CHECK_THROWS_AS(p.add_symmetric("P", 2), AssemblyError);
}

TEST_CASE("open-loop style assembly gives three 4x4 blocks")
{
  // n = 2, n_v = 3 contraction blocks [[P_i, A P_j], [*, lambda P_j]].
  Eigen::Matrix2d A;
  A << 0.2895, -0.0001, -1.6012, 0.0295;
  SdpProblem p;
  std::vector<AffineMatrix> P;
  for (int i = 0; i < 3; ++i) P.push_back(p.add_symmetric("P" + std::to_string(i), 2));
  for (int i = 0; i < 3; ++i) {
    const int j = (i + 2) % 3;
    p.add_psd(BlockRows{{P[i], Eigen::MatrixXd(A) * P[j]}, {0.8 * P[j]}});
  }
  REQUIRE(p.psd_constraints().size() == 3);
  for (const auto& c : p.psd_constraints()) {
    CHECK(c.matrix.rows() == 4);
    CHECK(c.matrix.cols() == 4);
  }
}

TEST_CASE("2x2 boundary: max t s.t. [[1,t],[t,1]] >= 0")
{
  SdpProblem p;
  AffineMatrix t = p.add_scalar("t");
  p.add_psd(two_by_two(1.0, t, 1.0));
  p.maximize(t);
  const SdpSolution sol = solve_sdp(p);
  REQUIRE(sol.status == SolveStatus::optimal);
  CHECK(sol.scalar(t) == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(sol.max_psd_violation <= 1e-7);
}

TEST_CASE("negative diagonal is infeasible with a certificate")
{
  SdpProblem p;
  AffineMatrix t = p.add_scalar("t");
  Eigen::MatrixXd base = Eigen::MatrixXd::Zero(2, 2);
  base(0, 0) = -1.0;
  AffineMatrix m = AffineMatrix(base) + Eigen::Vector2d(0.0, 1.0) * t * Eigen::RowVector2d(0.0, 1.0);
  p.add_psd(m);
  p.maximize(t);
  const SdpSolution sol = solve_sdp(p);
  CHECK(sol.status == SolveStatus::infeasible);
  CHECK(sol.certificate.present);
  CHECK(sol.certificate.margin < 0.0);
}

TEST_CASE("inconsistent equalities are reported infeasible")
{
  SdpProblem p;
  AffineMatrix a = p.add_scalar("a");
  p.add_equality(a, AffineMatrix::scalar(1.0));
  p.add_equality(a, AffineMatrix::scalar(2.0));
  p.add_psd(a);
  const SdpSolution sol = solve_sdp(p);
  CHECK(sol.status == SolveStatus::infeasible);
  CHECK(sol.certificate.equality_inconsistent);
}

TEST_CASE("equalities are honoured")
{
  // maximize trace(P) s.t. P <= 2 I elementwise via LMI, P(0,1) = 0.5.
  SdpProblem p;
  AffineMatrix P = p.add_symmetric("P", 2);
  p.add_psd(P);
  p.add_psd(2.0 * AffineMatrix::identity(2) - P);
  p.add_equality(P.block(0, 1, 1, 1), AffineMatrix::scalar(0.5));
  p.maximize(trace(P));
  const SdpSolution sol = solve_sdp(p);
  REQUIRE(sol.status == SolveStatus::optimal);
  const Eigen::MatrixXd Pv = sol.value(P);
  // 2I - P = [[d1, -0.5], [-0.5, d2]] needs d1 d2 >= 0.25, so d1 + d2 >= 1 and trace(P) <= 3.
  CHECK(Pv(0, 1) == doctest::Approx(0.5).epsilon(1e-7));
  CHECK(Pv.trace() == doctest::Approx(3.0).epsilon(1e-6));
  CHECK(sol.max_equality_violation <= 1e-7);
}

TEST_CASE("unconstrained direction in objective is not reported optimal")
{
  SdpProblem p;
  AffineMatrix a = p.add_scalar("a");
  AffineMatrix b = p.add_scalar("b");
  p.add_psd(AffineMatrix::identity(1) - a);
  p.maximize(a + b);
  const SdpSolution sol = solve_sdp(p);
  CHECK(sol.status == SolveStatus::numerical_failure);
}

TEST_CASE("schur check agrees with eigenvalues on random matrices")
{
  std::mt19937_64 rng(1234);
  std::normal_distribution<double> nd(0.0, 1.0);
  int agree = 0;
  int psd_count = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    Eigen::MatrixXd G(4, 4);
    for (int i = 0; i < 16; ++i) G(i) = nd(rng);
    Eigen::MatrixXd M = G * G.transpose();
    // Shift so that about half of the samples are indefinite.
    const double shift = 0.5 * nd(rng) * M.trace() / 4.0;
    M -= std::max(0.0, shift) * Eigen::MatrixXd::Identity(4, 4);
    Eigen::MatrixXd M22 = M.bottomRightCorner(2, 2);
    // Keep M22 well conditioned.
    M.bottomRightCorner(2, 2) = M22 + (1.0 + std::abs(min_eigenvalue(M22))) * Eigen::MatrixXd::Identity(2, 2);
    const SchurCheck c = schur_psd_check(M.topLeftCorner(2, 2), M.topRightCorner(2, 2), M.bottomRightCorner(2, 2));
    CHECK_FALSE(c.degenerate);
    if (c.direct == c.complement) ++agree;
    if (c.psd) ++psd_count;
  }
  CHECK(agree == 1000);
  CHECK(psd_count > 50);
  CHECK(psd_count < 950);
}

TEST_CASE("schur check examples")
{
  const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(2, 2);
  CHECK(schur_psd_check(I, Eigen::MatrixXd::Zero(2, 2), I).psd);
  const Eigen::MatrixXd one = Eigen::MatrixXd::Ones(1, 1);
  const SchurCheck c = schur_psd_check(one, 2.0 * one, one);
  CHECK_FALSE(c.psd);
  // Eigenvalues of [[1,2],[2,1]] are 3 and -1.
  CHECK(c.min_eigenvalue == doctest::Approx(-1.0));
  const SchurCheck d = schur_psd_check(one, Eigen::MatrixXd::Zero(1, 1), Eigen::MatrixXd::Zero(1, 1));
  CHECK(d.degenerate);
  CHECK(d.psd);
}

TEST_CASE("scaling an LMI does not change the verdict")
{
  for (double s : {1e-3, 1.0, 1e3}) {
    SdpProblem feas;
    AffineMatrix t = feas.add_scalar("t");
    feas.add_psd(s * two_by_two(1.0, t, 1.0));
    feas.add_psd(s * (t - AffineMatrix::scalar(0.5)));
    CHECK(solve_sdp(feas).status == SolveStatus::optimal);

    SdpProblem infeas;
    AffineMatrix u = infeas.add_scalar("u");
    infeas.add_psd(s * two_by_two(1.0, u, 1.0));
    infeas.add_psd(s * (u - AffineMatrix::scalar(1.5)));
    const SdpSolution sol = solve_sdp(infeas);
    CHECK(sol.status == SolveStatus::infeasible);
    CHECK(sol.certificate.present);
  }
}

TEST_CASE("re-substitution of a Lyapunov program")
{
  // Find P >= I with A'PA - P <= -I for a stable A; maximize -trace(P).
  Eigen::MatrixXd A(2, 2);
  A << 0.5, 0.2, -0.1, 0.7;
  SdpProblem p;
  AffineMatrix P = p.add_symmetric("P", 2);
  p.add_psd(P - AffineMatrix::identity(2));
  p.add_psd(P - A.transpose() * P * A - AffineMatrix::identity(2));
  p.maximize(-1.0 * trace(P));
  const SdpSolution sol = solve_sdp(p);
  REQUIRE(sol.status == SolveStatus::optimal);
  const Residuals r = evaluate_residuals(p, sol.coords);
  CHECK(r.min_block_eigenvalue >= -1e-6);
  // Any feasible P dominates the Lyapunov solution sum_k (A')^k A^k, which is itself feasible.
  Eigen::MatrixXd lyap = Eigen::MatrixXd::Zero(2, 2);
  Eigen::MatrixXd Ak = Eigen::MatrixXd::Identity(2, 2);
  for (int k = 0; k < 200; ++k) {
    lyap += Ak.transpose() * Ak;
    Ak = Ak * A;
  }
  CHECK((sol.value(P) - lyap).cwiseAbs().maxCoeff() < 1e-5);
}
