#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "iscsc/conic.hpp"
#include "iscsc/linalg.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/QR>
#include <cmath>

using namespace iscsc;

namespace {

MatD random_symmetric(int n, RngStream& rng) {
  MatD a(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) a(i, j) = rng.normal();
  return 0.5 * (a + a.transpose());
}

MatD random_orthogonal(int n, RngStream& rng) {
  MatD a(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) a(i, j) = rng.normal();
  return Eigen::HouseholderQR<MatD>(a).householderQ();
}

VecD project_block(const VecD& v, const ConeBlock& blk) {
  return project_cones(v, {blk});
}

VecD project_block_dual(const VecD& v, const ConeBlock& blk) {
  return project_dual_cones(v, {blk});
}

}  // namespace

TEST_CASE("svec preserves the frobenius inner product") {
  RngStream rng(21, "svec");
  for (int n : {1, 2, 5}) {
    const MatD s = random_symmetric(n, rng);
    const MatD t = random_symmetric(n, rng);
    CHECK((unsvec(svec(s), n) - s).norm() < 1e-14);
    CHECK(svec(s).dot(svec(t)) ==
          doctest::Approx((s.transpose() * t).trace()).epsilon(1e-12));
    CHECK(svec(s).size() == svec_dim(n));
  }
}

TEST_CASE("nonneg and soc projections match hand results") {
  const ConeBlock nn{ConeKind::nonneg, 2};
  VecD v(2);
  v << -1.0, 2.0;
  const VecD pv = project_block(v, nn);
  CHECK(pv[0] == 0.0);
  CHECK(pv[1] == 2.0);

  const ConeBlock soc{ConeKind::soc, 3};
  VecD in(3);
  in << 5.0, 3.0, 4.0;  // ||(3,4)|| = 5 <= 5: on the cone
  CHECK((project_block(in, soc) - in).norm() == 0.0);
  VecD below(3);
  below << -6.0, 3.0, 4.0;  // in the polar: projects to zero
  CHECK(project_block(below, soc).norm() == 0.0);
  VecD outside(3);
  outside << 0.0, 3.0, 4.0;
  const VecD po = project_block(outside, soc);
  CHECK(po[0] == doctest::Approx(2.5));
  CHECK(po[1] == doctest::Approx(1.5));
  CHECK(po[2] == doctest::Approx(2.0));
}

TEST_CASE("psd projection equals the eigenvalue-clip oracle") {
  RngStream rng(22, "psd-proj");
  for (int trial = 0; trial < 20; ++trial) {
    const MatD s = random_symmetric(4, rng);
    Eigen::SelfAdjointEigenSolver<MatD> es(s);
    const MatD oracle = es.eigenvectors() *
                        es.eigenvalues().cwiseMax(0.0).asDiagonal() *
                        es.eigenvectors().transpose();
    const VecD proj = project_block(svec(s), {ConeKind::psd, 4});
    CHECK((unsvec(proj, 4) - oracle).norm() < 1e-10);
  }
}

TEST_CASE("exponential-cone projection fixes known points") {
  const ConeBlock exp_blk{ConeKind::exp_primal, 3};
  VecD bdry(3);
  bdry << 1.0, 1.0, std::exp(1.0);  // on the boundary
  CHECK((project_block(bdry, exp_blk) - bdry).norm() < 1e-9);

  VecD inside(3);
  inside << 0.0, 1.0, 3.0;  // 1*e^0 = 1 <= 3
  CHECK((project_block(inside, exp_blk) - inside).norm() == 0.0);

  VecD polar(3);
  polar << 1.0, 0.0, -0.5;  // negated dual-cone point
  CHECK(project_block(polar, exp_blk).norm() == 0.0);

  VecD face(3);
  face << -2.0, -1.0, 4.0;  // x,y <= 0: lands on the y = 0 face
  const VecD pf = project_block(face, exp_blk);
  CHECK(pf[0] == -2.0);
  CHECK(pf[1] == 0.0);
  CHECK(pf[2] == 4.0);
}

TEST_CASE("projections satisfy the moreau decomposition") {
  RngStream rng(23, "moreau");
  const std::vector<ConeBlock> blocks = {{ConeKind::soc, 4},
                                         {ConeKind::psd, 3},
                                         {ConeKind::exp_primal, 3}};
  for (const auto& blk : blocks) {
    const int rows = blk.rows();
    for (int trial = 0; trial < 400; ++trial) {
      VecD v(rows);
      for (int i = 0; i < rows; ++i) v[i] = 3.0 * rng.normal();
      const VecD p = project_block(v, blk);
      const VecD q = project_block_dual(-v, blk);
      const double scale = 1.0 + v.norm();
      CHECK((p - q - v).norm() < 1e-8 * scale);          // v = P_K(v) - P_K*(-v)
      CHECK(std::abs(p.dot(q)) < 1e-7 * scale * scale);  // complementary
      CHECK((project_block(p, blk) - p).norm() < 1e-8 * scale);  // idempotent
      // Non-expansiveness against a second draw.
      VecD w(rows);
      for (int i = 0; i < rows; ++i) w[i] = 3.0 * rng.normal();
      CHECK((project_block(v, blk) - project_block(w, blk)).norm() <=
            (v - w).norm() + 1e-12);
    }
  }
}

TEST_CASE("product-cone projection applies blocks at the right offsets") {
  const std::vector<ConeBlock> layout = {{ConeKind::nonneg, 2},
                                         {ConeKind::soc, 3},
                                         {ConeKind::zero, 2}};
  VecD v(7);
  v << -1.0, 2.0, 0.0, 3.0, 4.0, 5.0, -6.0;
  const VecD p = project_cones(v, layout);
  CHECK(p[0] == 0.0);
  CHECK(p[1] == 2.0);
  CHECK(p[2] == doctest::Approx(2.5));
  CHECK(p[5] == 0.0);
  CHECK(p[6] == 0.0);
  // Dual: zero rows stay free.
  const VecD pd = project_dual_cones(v, layout);
  CHECK(pd[5] == 5.0);
  CHECK(pd[6] == -6.0);
}

TEST_CASE("layout validation rejects inconsistent problems") {
  ConeProblem p;
  p.c = VecD::Ones(2);
  p.a = MatD::Ones(3, 2);
  p.b = VecD::Ones(3);
  p.cones = {{ConeKind::nonneg, 2}};  // 2 rows declared, 3 present
  CHECK_THROWS_AS(p.validate(), std::invalid_argument);
  p.cones = {{ConeKind::nonneg, 3}};
  CHECK_NOTHROW(p.validate());
}

TEST_CASE("lp: minimize x subject to x >= 3") {
  ConeProblem p;
  p.c = VecD::Ones(1);
  p.a = -MatD::Ones(1, 1);
  p.b = -3.0 * VecD::Ones(1);
  p.cones = {{ConeKind::nonneg, 1}};
  const SolveReport r = solve(p);
  CHECK(r.status == SolveStatus::optimal);
  CHECK(r.x[0] == doctest::Approx(3.0).epsilon(1e-5));
  CHECK(r.primal_res <= 1e-6);
  CHECK(r.dual_res <= 1e-6);
}

TEST_CASE("lp with an equality row") {
  // minimize x1 + 2 x2  s.t.  x1 + x2 = 2, x1 <= 3, x2 >= 0.
  ConeProblem p;
  p.c = (VecD(2) << 1.0, 2.0).finished();
  p.a = MatD::Zero(4, 2);
  p.b = VecD::Zero(4);
  p.a(0, 0) = 1.0; p.a(0, 1) = 1.0; p.b[0] = 2.0;   // equality
  p.a(1, 0) = 1.0; p.b[1] = 3.0;                      // x1 <= 3
  p.a(2, 1) = -1.0;                                   // x2 >= 0
  p.a(3, 0) = -1.0; p.b[3] = 5.0;                     // slack row x1 >= -5
  p.cones = {{ConeKind::zero, 1}, {ConeKind::nonneg, 3}};
  const SolveReport r = solve(p);
  CHECK(r.status == SolveStatus::optimal);
  CHECK(r.x[0] == doctest::Approx(2.0).epsilon(1e-5));
  CHECK(r.x[1] == doctest::Approx(0.0).epsilon(1e-5));
  CHECK(r.obj == doctest::Approx(2.0).epsilon(1e-5));
}

TEST_CASE("sdp: smallest t with tI - A psd is the largest eigenvalue") {
  RngStream rng(24, "sdp");
  SolverSettings st;
  st.tol = 1e-8;
  for (int trial = 0; trial < 3; ++trial) {
    const MatD a = random_symmetric(4, rng);
    ConeProblem p;
    p.c = VecD::Ones(1);
    p.a = -svec(MatD::Identity(4, 4));
    p.b = -svec(a);
    p.cones = {{ConeKind::psd, 4}};
    const SolveReport r = solve(p, st);
    const double lmax =
        Eigen::SelfAdjointEigenSolver<MatD>(a).eigenvalues().maxCoeff();
    CHECK(r.status == SolveStatus::optimal);
    CHECK(std::abs(r.x[0] - lmax) / std::max(1.0, std::abs(lmax)) < 1e-6);
  }
}

TEST_CASE("exp: minimal z with (1,1,z) in the cone is e") {
  ConeProblem p;
  p.c = VecD::Ones(1);
  p.a = MatD::Zero(3, 1);
  p.a(2, 0) = -1.0;
  p.b = (VecD(3) << 1.0, 1.0, 0.0).finished();
  p.cones = {{ConeKind::exp_primal, 3}};
  SolverSettings st;
  st.tol = 1e-8;
  const SolveReport r = solve(p, st);
  CHECK(r.status == SolveStatus::optimal);
  CHECK(std::abs(r.x[0] - std::exp(1.0)) / std::exp(1.0) < 1e-6);
}

TEST_CASE("soc: minimal t bounding a fixed norm") {
  ConeProblem p;
  p.c = VecD::Ones(1);
  p.a = MatD::Zero(3, 1);
  p.a(0, 0) = -1.0;
  p.b = (VecD(3) << 0.0, 3.0, 4.0).finished();
  p.cones = {{ConeKind::soc, 3}};
  const SolveReport r = solve(p);
  CHECK(r.status == SolveStatus::optimal);
  CHECK(r.x[0] == doctest::Approx(5.0).epsilon(1e-5));
}

namespace {

struct KnownInstance {
  ConeProblem p;
  double obj;
};

// Builds a problem with a known optimum by sampling a complementary
// primal-dual pair per cone block and reading b and c off the KKT system.
KnownInstance known_instance(RngStream& rng) {
  const std::vector<ConeBlock> layout = {{ConeKind::zero, 2},
                                         {ConeKind::nonneg, 4},
                                         {ConeKind::soc, 3},
                                         {ConeKind::psd, 3},
                                         {ConeKind::exp_primal, 3}};
  int m = 0;
  for (const auto& blk : layout) m += blk.rows();
  const int n = 8;

  VecD sstar = VecD::Zero(m), ystar = VecD::Zero(m);
  int at = 0;
  for (const auto& blk : layout) {
    const int rows = blk.rows();
    auto s = sstar.segment(at, rows);
    auto y = ystar.segment(at, rows);
    switch (blk.kind) {
      case ConeKind::zero:
        for (int i = 0; i < rows; ++i) y[i] = rng.normal();
        break;
      case ConeKind::nonneg:
        for (int i = 0; i < rows; ++i) {
          if (rng.uniform() < 0.5)
            s[i] = 0.1 + std::abs(rng.normal());
          else
            y[i] = 0.1 + std::abs(rng.normal());
        }
        break;
      case ConeKind::soc: {
        VecD z(rows - 1);
        for (int i = 0; i < rows - 1; ++i) z[i] = rng.normal();
        const double mu = 0.2 + rng.uniform();
        s[0] = z.norm();
        s.tail(rows - 1) = z;
        y[0] = mu * z.norm();
        y.tail(rows - 1) = -mu * z;
        break;
      }
      case ConeKind::psd: {
        const int side = blk.dim;
        const MatD q = random_orthogonal(side, rng);
        VecD ls = VecD::Zero(side), ly = VecD::Zero(side);
        for (int i = 0; i < side; ++i) {
          if (i < side / 2 + 1)
            ls[i] = 0.2 + rng.uniform();
          else
            ly[i] = 0.2 + rng.uniform();
        }
        s = svec(q * ls.asDiagonal() * q.transpose());
        y = svec(q * ly.asDiagonal() * q.transpose());
        break;
      }
      case ConeKind::exp_primal: {
        // Complementary boundary pair of the exponential cone.
        const double yv = 0.3 + rng.uniform();
        const double alpha = rng.uniform(-1.5, 1.5);
        const double mu = 0.2 + rng.uniform();
        const double ea = std::exp(alpha);
        s[0] = alpha * yv;
        s[1] = yv;
        s[2] = yv * ea;
        y[0] = -mu * ea;
        y[1] = mu * (alpha - 1.0) * ea;
        y[2] = mu;
        break;
      }
    }
    at += rows;
  }

  KnownInstance inst;
  VecD xstar(n);
  for (int i = 0; i < n; ++i) xstar[i] = rng.normal();
  inst.p.a = MatD(m, n);
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < n; ++j) inst.p.a(i, j) = rng.normal();
  inst.p.b = inst.p.a * xstar + sstar;
  inst.p.c = -inst.p.a.transpose() * ystar;
  inst.p.cones = layout;
  inst.obj = inst.p.c.dot(xstar);
  return inst;
}

}  // namespace

TEST_CASE("random instances with certified optima are solved to 1e-5") {
  RngStream rng(25, "known-opt");
  for (int trial = 0; trial < 10; ++trial) {
    const KnownInstance inst = known_instance(rng);
    const SolveReport r = solve(inst.p);
    REQUIRE(r.status == SolveStatus::optimal);
    CHECK(std::abs(r.obj - inst.obj) / std::max(1.0, std::abs(inst.obj)) <
          1e-5);
    CHECK((inst.p.a * r.x + r.s - inst.p.b).norm() <
          1e-5 * (1.0 + inst.p.b.norm()));
  }
}

TEST_CASE("infeasible and unbounded problems are certified") {
  ConeProblem bad;  // x >= 3 and x <= 2
  bad.c = VecD::Ones(1);
  bad.a = (MatD(2, 1) << -1.0, 1.0).finished();
  bad.b = (VecD(2) << -3.0, 2.0).finished();
  bad.cones = {{ConeKind::nonneg, 2}};
  CHECK(solve(bad).status == SolveStatus::infeasible);

  ConeProblem unb;  // minimize x with x <= 3
  unb.c = VecD::Ones(1);
  unb.a = MatD::Ones(1, 1);
  unb.b = 3.0 * VecD::Ones(1);
  unb.cones = {{ConeKind::nonneg, 1}};
  CHECK(solve(unb).status == SolveStatus::unbounded);
}

TEST_CASE("solves are deterministic") {
  RngStream rng(26, "det");
  const KnownInstance inst = known_instance(rng);
  const SolveReport r1 = solve(inst.p);
  const SolveReport r2 = solve(inst.p);
  CHECK(r1.iterations == r2.iterations);
  CHECK((r1.x - r2.x).norm() == 0.0);
  CHECK((r1.y - r2.y).norm() == 0.0);
}

TEST_CASE("warm starts do not slow convergence on a perturbed problem") {
  RngStream rng(27, "warm");
  KnownInstance inst = known_instance(rng);
  const SolveReport base = solve(inst.p);
  REQUIRE(base.status == SolveStatus::optimal);
  inst.p.b.array() += 1e-6;
  const SolveReport cold = solve(inst.p);
  WarmStart w{base.x, base.y, base.s};
  const SolveReport hot = solve(inst.p, {}, &w);
  REQUIRE(cold.status == SolveStatus::optimal);
  REQUIRE(hot.status == SolveStatus::optimal);
  CHECK(hot.iterations <= cold.iterations);
}

TEST_CASE("mixed-magnitude rows still solve to tolerance") {
  // minimize x1 + x2 with 1e2*x1 >= 3e2, 1e-2*x2 >= 2e-2.
  ConeProblem p;
  p.c = VecD::Ones(2);
  p.a = MatD::Zero(2, 2);
  p.a(0, 0) = -1e2;
  p.a(1, 1) = -1e-2;
  p.b = (VecD(2) << -3e2, -2e-2).finished();
  p.cones = {{ConeKind::nonneg, 2}};
  const SolveReport r = solve(p);
  CHECK(r.status == SolveStatus::optimal);
  CHECK(r.x[0] == doctest::Approx(3.0).epsilon(1e-4));
  CHECK(r.x[1] == doctest::Approx(2.0).epsilon(1e-4));

  // An eigenvalue problem whose matrix spans six orders of magnitude.
  RngStream rng(28, "mixed-sdp");
  MatD a = random_symmetric(3, rng);
  a(0, 0) *= 1e6;
  a(2, 2) *= 1e-3;
  a(0, 1) *= 1e3;
  a(1, 0) = a(0, 1);
  ConeProblem q;
  q.c = VecD::Ones(1);
  q.a = -svec(MatD::Identity(3, 3));
  q.b = -svec(a);
  q.cones = {{ConeKind::psd, 3}};
  const SolveReport rq = solve(q);
  const double lmax =
      Eigen::SelfAdjointEigenSolver<MatD>(a).eigenvalues().maxCoeff();
  CHECK(rq.status == SolveStatus::optimal);
  CHECK(std::abs(rq.x[0] - lmax) / std::abs(lmax) < 1e-5);
}

TEST_CASE("problem dump lists cones and nonzero triplets") {
  ConeProblem p;
  p.c = (VecD(2) << 1.0, 0.0).finished();
  p.a = MatD::Zero(4, 2);
  p.a(0, 0) = -1.0;
  p.a(3, 1) = 2.0;
  p.b = (VecD(4) << -3.0, 0.0, 0.0, 1.0).finished();
  p.cones = {{ConeKind::nonneg, 1}, {ConeKind::soc, 3}};
  const std::string txt = problem_to_text(p);
  CHECK(txt.find("2 vars, 4 rows") != std::string::npos);
  CHECK(txt.find("nonneg:1 soc:3") != std::string::npos);
  CHECK(txt.find("A 0 0 -1") != std::string::npos);
  CHECK(txt.find("A 3 1 2") != std::string::npos);
  CHECK(txt.find("b 0 -3") != std::string::npos);
}
