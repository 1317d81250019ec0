#include <doctest.h>

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "dopf/local.hpp"
#include "dopf/network.hpp"
#include "dopf/parse.hpp"

using namespace dopf;

namespace {

const char* kCase9 = DOPF_CASES_DIR "/case9.m";

struct Case9Local {
  Network net;
  LocalProblem lp;
  Case9Local(int bus) : net(parse_case_file(kCase9)) {
    lp = local_problem(net, build_admittance(net), bus);
  }
};

Eigen::VectorXd random_vec(std::mt19937& rng, int n, double lo, double hi) {
  std::uniform_real_distribution<double> u(lo, hi);
  Eigen::VectorXd v(n);
  for (int i = 0; i < n; ++i) v(i) = u(rng);
  return v;
}

// true (nonconvex) residuals of the two power-injection equations
double g_true_p(const LocalVars& ix, const Eigen::VectorXd& z) {
  return z(ix.p()) -
         (z(ix.v_re(0)) * z(ix.i_re()) + z(ix.v_im(0)) * z(ix.i_im()));
}
double g_true_q(const LocalVars& ix, const Eigen::VectorXd& z) {
  return z(ix.q()) -
         (z(ix.v_im(0)) * z(ix.i_re()) - z(ix.v_re(0)) * z(ix.i_im()));
}
double g_true_lp(const LocalVars& ix, const Eigen::VectorXd& z, int r) {
  return z(ix.lp(r)) -
         (z(ix.v_re(0)) * z(ix.li_re(r)) + z(ix.v_im(0)) * z(ix.li_im(r)));
}
double g_true_lq(const LocalVars& ix, const Eigen::VectorXd& z, int r) {
  return z(ix.lq(r)) -
         (z(ix.v_im(0)) * z(ix.li_re(r)) - z(ix.v_re(0)) * z(ix.li_im(r)));
}

}  // namespace

TEST_CASE("local variable indices tile the vector exactly once") {
  const LocalVars ix(4);
  REQUIRE(ix.deg() == 3);
  REQUIRE(ix.len() == 26);
  CHECK(ix.v_begin() == 6);
  CHECK(ix.v_len() == 8);

  std::vector<int> seen = {ix.pg(), ix.qg(), ix.p(),
                           ix.q(),  ix.i_re(), ix.i_im()};
  for (int r = 0; r < 4; ++r) {
    seen.push_back(ix.v_re(r));
    seen.push_back(ix.v_im(r));
  }
  for (int r = 0; r < 3; ++r) {
    seen.push_back(ix.li_re(r));
    seen.push_back(ix.li_im(r));
    seen.push_back(ix.lp(r));
    seen.push_back(ix.lq(r));
  }
  std::sort(seen.begin(), seen.end());
  REQUIRE(seen.size() == 26);
  for (int i = 0; i < 26; ++i) CHECK(seen[i] == i);
}

TEST_CASE("donut halfspace: tangency and one-sided containment") {
  const double vmin = 0.9;

  SUBCASE("tangent to the v_min circle at the radial projection") {
    const Halfspace hs = donut_halfspace(0.8, 0.5, vmin);
    CHECK(std::hypot(hs.a, hs.b) == doctest::Approx(vmin).epsilon(1e-14));
    const double r = std::hypot(0.8, 0.5);
    const double tx = vmin * 0.8 / r, ty = vmin * 0.5 / r;
    CHECK(hs.a * tx + hs.b * ty == doctest::Approx(hs.c).epsilon(1e-14));
    // the normal points along the generating point
    CHECK(hs.a * 0.8 + hs.b * 0.5 == doctest::Approx(vmin * r).epsilon(1e-14));
  }

  SUBCASE("satisfying the cut implies leaving the v_min disk") {
    std::mt19937 rng(314159u);
    std::uniform_real_distribution<double> u(-1.2, 1.2);
    for (int k = 0; k < 2000; ++k) {
      const double px = u(rng), py = u(rng);
      const double gx = u(rng), gy = u(rng);
      if (gx == 0.0 && gy == 0.0) continue;
      const Halfspace hs = donut_halfspace(gx, gy, vmin);
      const double lhs = hs.a * px + hs.b * py;
      const double r = std::hypot(px, py);
      if (lhs >= hs.c) CHECK(r >= vmin - 1e-12);
      if (r < vmin - 1e-12) CHECK(lhs < hs.c);
    }
  }

  SUBCASE("vertical tangent on the imaginary axis") {
    const Halfspace up = donut_halfspace(0.0, 0.7, vmin);
    CHECK(up.a == 0.0);
    CHECK(up.b == 1.0);
    CHECK(up.c == vmin);
    const Halfspace dn = donut_halfspace(0.0, -0.7, vmin);
    CHECK(dn.b == -1.0);
    CHECK(dn.c == vmin);
  }

  SUBCASE("origin is rejected") {
    CHECK_THROWS_AS(donut_halfspace(0.0, 0.0, vmin), std::domain_error);
  }
}

TEST_CASE("outer cut: contains the disk, excludes the generating point") {
  const double R = 1.1;
  const Halfspace hs = outer_cut(-0.9, 1.0, R);
  CHECK(std::hypot(hs.a, hs.b) == doctest::Approx(R).epsilon(1e-14));
  CHECK(hs.c == R * R);
  // generating point lies strictly outside
  CHECK(hs.a * -0.9 + hs.b * 1.0 > hs.c + 1e-12);

  std::mt19937 rng(2718u);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int k = 0; k < 2000; ++k) {
    double px = u(rng) * R, py = u(rng) * R;
    if (std::hypot(px, py) > R) continue;
    CHECK(hs.a * px + hs.b * py <= hs.c + 1e-12);
  }

  const Halfspace axis = outer_cut(0.0, -2.0, 1.5);
  CHECK(axis.a == 0.0);
  CHECK(axis.b == -1.0);
  CHECK(axis.c == 1.5);
  CHECK_THROWS_AS(outer_cut(0.0, 0.0, R), std::domain_error);
}

TEST_CASE("initial octagon circumscribes the circle") {
  const double R = 1.1;
  const auto oct = initial_octagon(R);
  for (const Halfspace& hs : oct) {
    CHECK(hs.a * hs.a + hs.b * hs.b == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(hs.c == R);
  }
  // every boundary point of the circle satisfies all eight cuts
  for (int k = 0; k < 720; ++k) {
    const double th = k * std::acos(-1.0) / 360.0;
    const double px = R * std::cos(th), py = R * std::sin(th);
    for (const Halfspace& hs : oct)
      CHECK(hs.a * px + hs.b * py <= hs.c + 1e-12);
  }
  // adjacent cuts intersect at radius R / cos(pi/8)
  for (int k = 0; k < 8; ++k) {
    const Halfspace& f = oct[k];
    const Halfspace& g = oct[(k + 1) % 8];
    Eigen::Matrix2d M;
    M << f.a, f.b, g.a, g.b;
    const Eigen::Vector2d v = M.inverse() * Eigen::Vector2d(f.c, g.c);
    CHECK(v.norm() ==
          doctest::Approx(R / std::cos(std::acos(-1.0) / 8.0)).epsilon(1e-12));
  }
}

TEST_CASE("zhat initialization satisfies every defining equation") {
  Case9Local c(3);
  const LocalProblem& lp = c.lp;
  const int nn = lp.n_neighbors();
  LocalVars ix(nn);

  std::mt19937 rng(99u);
  Eigen::VectorXd v_net(18);
  v_net.head(9) = random_vec(rng, 9, 0.95, 1.05);
  v_net.tail(9) = random_vec(rng, 9, -0.05, 0.05);

  const Eigen::VectorXd z = initialize_zhat(lp, v_net);
  REQUIRE(z.size() == lp.z_len());

  Eigen::VectorXd vre(nn), vim(nn);
  for (int r = 0; r < nn; ++r) {
    vre(r) = v_net(lp.neighbors[r]);
    vim(r) = v_net(9 + lp.neighbors[r]);
    CHECK(z(ix.v_re(r)) == vre(r));
    CHECK(z(ix.v_im(r)) == vim(r));
  }
  CHECK(z(ix.i_re()) ==
        doctest::Approx(lp.g_col.dot(vre) - lp.b_col.dot(vim)).epsilon(1e-14));
  CHECK(z(ix.i_im()) ==
        doctest::Approx(lp.b_col.dot(vre) + lp.g_col.dot(vim)).epsilon(1e-14));
  CHECK(std::abs(g_true_p(ix, z)) < 1e-14);
  CHECK(std::abs(g_true_q(ix, z)) < 1e-14);
  CHECK(z(ix.pg()) == doctest::Approx(z(ix.p()) + lp.pd));
  CHECK(z(ix.qg()) == doctest::Approx(z(ix.q()) + lp.qd));

  const Eigen::VectorXd lire = lp.C * vre - lp.D * vim;
  const Eigen::VectorXd liim = lp.D * vre + lp.C * vim;
  for (int r = 0; r < ix.deg(); ++r) {
    CHECK(z(ix.li_re(r)) == doctest::Approx(lire(r)).epsilon(1e-14));
    CHECK(z(ix.li_im(r)) == doctest::Approx(liim(r)).epsilon(1e-14));
    CHECK(std::abs(g_true_lp(ix, z, r)) < 1e-14);
    CHECK(std::abs(g_true_lq(ix, z, r)) < 1e-14);
  }
}

TEST_CASE("linearized rows are first-order exact in each bilinear factor") {
  Case9Local c(3);
  const LocalProblem& lp = c.lp;
  LocalVars ix(lp.n_neighbors());
  const int n = lp.z_len();
  std::mt19937 rng(4242u);

  for (int trial = 0; trial < 1000; ++trial) {
    const Eigen::VectorXd zhat = random_vec(rng, n, -1.5, 1.5);
    const Eigen::VectorXd z = random_vec(rng, n, -1.5, 1.5);

    Eigen::MatrixXd A;
    Eigen::VectorXd b;
    linearize_power_injection(lp, zhat, A, b);
    REQUIRE(A.rows() == 2);
    REQUIRE(A.cols() == n);

    // value match at the expansion point
    CHECK(std::abs((A.row(0).dot(zhat) - b(0)) - g_true_p(ix, zhat)) < 1e-13);
    CHECK(std::abs((A.row(1).dot(zhat) - b(1)) - g_true_q(ix, zhat)) < 1e-13);

    // the remainder is exactly the product of the increments
    const double dvre = z(ix.v_re(0)) - zhat(ix.v_re(0));
    const double dvim = z(ix.v_im(0)) - zhat(ix.v_im(0));
    const double dire = z(ix.i_re()) - zhat(ix.i_re());
    const double diim = z(ix.i_im()) - zhat(ix.i_im());
    const double rem_p = g_true_p(ix, z) - (A.row(0).dot(z) - b(0));
    const double rem_q = g_true_q(ix, z) - (A.row(1).dot(z) - b(1));
    CHECK(rem_p == doctest::Approx(-(dvre * dire + dvim * diim)).epsilon(1e-10));
    CHECK(rem_q == doctest::Approx(-(dvim * dire - dvre * diim)).epsilon(1e-10));
  }

  // central differences of the true residuals recover every coefficient
  {
    std::mt19937 rng2(7u);
    const Eigen::VectorXd zhat = random_vec(rng2, n, -1.5, 1.5);
    Eigen::MatrixXd A;
    Eigen::VectorXd b;
    linearize_power_injection(lp, zhat, A, b);
    const double eps = 1e-5;
    for (int j = 0; j < n; ++j) {
      Eigen::VectorXd zp = zhat, zm = zhat;
      zp(j) += eps;
      zm(j) -= eps;
      const double dp = (g_true_p(ix, zp) - g_true_p(ix, zm)) / (2.0 * eps);
      const double dq = (g_true_q(ix, zp) - g_true_q(ix, zm)) / (2.0 * eps);
      CHECK(dp == doctest::Approx(A(0, j)).epsilon(1e-8));
      CHECK(dq == doctest::Approx(A(1, j)).epsilon(1e-8));
    }
  }

  // line-power rows interleave (real, reactive) per line and obey the same
  // remainder identity
  {
    std::mt19937 rng3(11u);
    const Eigen::VectorXd zhat = random_vec(rng3, n, -1.5, 1.5);
    const Eigen::VectorXd z = random_vec(rng3, n, -1.5, 1.5);
    Eigen::MatrixXd A;
    Eigen::VectorXd b;
    linearize_line_power(lp, zhat, A, b);
    REQUIRE(A.rows() == 2 * ix.deg());
    const double dvre = z(ix.v_re(0)) - zhat(ix.v_re(0));
    const double dvim = z(ix.v_im(0)) - zhat(ix.v_im(0));
    for (int r = 0; r < ix.deg(); ++r) {
      const double dlre = z(ix.li_re(r)) - zhat(ix.li_re(r));
      const double dlim = z(ix.li_im(r)) - zhat(ix.li_im(r));
      const double rp = g_true_lp(ix, z, r) - (A.row(2 * r).dot(z) - b(2 * r));
      const double rq =
          g_true_lq(ix, z, r) - (A.row(2 * r + 1).dot(z) - b(2 * r + 1));
      CHECK(rp == doctest::Approx(-(dvre * dlre + dvim * dlim)).epsilon(1e-10));
      CHECK(rq == doctest::Approx(-(dvim * dlre - dvre * dlim)).epsilon(1e-10));
    }
  }
}

TEST_CASE("inner solve: dual layout accounts for every constraint row") {
  Case9Local c(3);  // no generator here: both box pairs collapse to pins
  const LocalProblem& lp = c.lp;
  const int nn = lp.n_neighbors();
  const int deg = lp.degree();

  Eigen::VectorXd v_net(18);
  v_net.head(9).setOnes();
  v_net.tail(9).setZero();
  const Eigen::VectorXd zhat = initialize_zhat(lp, v_net);
  Eigen::VectorXd v_target(2 * nn);
  for (int r = 0; r < nn; ++r) {
    v_target(r) = v_net(lp.neighbors[r]);
    v_target(nn + r) = v_net(9 + lp.neighbors[r]);
  }
  const Eigen::VectorXd y = Eigen::VectorXd::Zero(2 * nn);

  std::vector<Halfspace> donut;
  for (int r = 0; r < nn; ++r)
    donut.push_back(
        donut_halfspace(v_target(r), v_target(nn + r), lp.v_min(r)));

  const InnerResult res =
      solve_convex_inner(lp, zhat, y, v_target, 1e3, donut, SubOptions{});
  REQUIRE(res.status == InnerStatus::Ok);
  CHECK(res.layout.n_alpha == 4 + 2 * deg);
  CHECK(res.layout.n_inj == 2);
  CHECK(res.layout.n_line == 2 * deg);
  CHECK(res.layout.n_box == 2);  // pg and qg pinned at zero
  CHECK(res.layout.n_donut == nn);
  CHECK(res.layout.n_flow_cuts >= 8 * deg);
  CHECK(res.layout.n_outer >= 8 * nn);
  CHECK(res.u.size() == res.layout.total());
  CHECK(res.qp.A.rows() + res.qp.G.rows() == res.layout.total());

  Case9Local g(0);  // generator bus: both box pairs stay inequalities
  Eigen::VectorXd vt2(2 * g.lp.n_neighbors()), y2(2 * g.lp.n_neighbors());
  for (int r = 0; r < g.lp.n_neighbors(); ++r) {
    vt2(r) = 1.0;
    vt2(g.lp.n_neighbors() + r) = 0.0;
  }
  y2.setZero();
  std::vector<Halfspace> donut2;
  for (int r = 0; r < g.lp.n_neighbors(); ++r)
    donut2.push_back(donut_halfspace(1.0, 0.0, g.lp.v_min(r)));
  const InnerResult res2 =
      solve_convex_inner(g.lp, initialize_zhat(g.lp, v_net), y2, vt2, 1e3,
                         donut2, SubOptions{});
  REQUIRE(res2.status == InnerStatus::Ok);
  CHECK(res2.layout.n_box == 4);
  CHECK(res2.u.size() == res2.layout.total());
}

TEST_CASE("successive approximation converges from a flat net point") {
  Case9Local c(3);
  Eigen::VectorXd v_net(18);
  v_net.head(9).setOnes();
  v_net.tail(9).setZero();
  const Eigen::VectorXd y = Eigen::VectorXd::Zero(2 * c.lp.n_neighbors());

  const SubproblemResult r = run_algorithm2(c.lp, y, v_net, 1e3, SubOptions{});
  REQUIRE(r.status == SubStatus::ConvergedEps);
  CHECK(r.inner_iterations >= 1);
  CHECK(r.z.size() == c.lp.z_len());
  CHECK(r.u.size() == r.layout.total());
  LocalVars ix(c.lp.n_neighbors());
  for (int j = 0; j < c.lp.n_neighbors(); ++j) {
    CHECK(std::abs(r.z(ix.v_re(j)) - 1.0) < 0.1);
    CHECK(std::abs(r.z(ix.v_im(j))) < 0.1);
  }
}

TEST_CASE("converged multipliers are stationary for the true equations") {
  // Re-linearize the bilinear rows at the returned point: the multipliers of
  // the convex subproblem must satisfy the nonconvex stationarity system up
  // to the linearization gap.
  Case9Local c(3);
  Eigen::VectorXd v_net(18);
  v_net.head(9).setOnes();
  v_net.tail(9).setZero();
  const Eigen::VectorXd y = Eigen::VectorXd::Zero(2 * c.lp.n_neighbors());

  const SubproblemResult r = run_algorithm2(c.lp, y, v_net, 1e3, SubOptions{});
  REQUIRE(r.status == SubStatus::ConvergedEps);
  const InnerResult& ir = r.last_inner;
  REQUIRE(ir.status == InnerStatus::Ok);

  const int deg = c.lp.degree();
  Eigen::MatrixXd A = ir.qp.A;
  Eigen::MatrixXd Ainj, Alin;
  Eigen::VectorXd binj, blin;
  linearize_power_injection(c.lp, r.z, Ainj, binj);
  A.middleRows(4 + 2 * deg, 2) = Ainj;
  linearize_line_power(c.lp, r.z, Alin, blin);
  A.middleRows(6 + 2 * deg, 2 * deg) = Alin;

  const Eigen::VectorXd grad = ir.qp.P * r.z + ir.qp.q +
                               A.transpose() * ir.qp_sol.nu +
                               ir.qp.G.transpose() * ir.qp_sol.lambda;
  CHECK(grad.cwiseAbs().maxCoeff() < 1e-4);
}

TEST_CASE("degree of feasibility measures the injection-box distance in MVA") {
  Case9Local c(3);  // no generator, no load: the box is the origin
  LocalVars ix(c.lp.n_neighbors());
  Eigen::VectorXd z = Eigen::VectorXd::Zero(c.lp.z_len());
  CHECK(degree_of_feasibility(c.lp, z) == 0.0);
  z(ix.p()) = 0.02;
  CHECK(degree_of_feasibility(c.lp, z) == doctest::Approx(2.0));
  z(ix.q()) = -0.03;
  CHECK(degree_of_feasibility(c.lp, z) ==
        doctest::Approx(100.0 * std::hypot(0.02, 0.03)));

  Case9Local ld(4);  // pd = 0.9: the box shifts by the demand
  LocalVars ix2(ld.lp.n_neighbors());
  Eigen::VectorXd z2 = Eigen::VectorXd::Zero(ld.lp.z_len());
  z2(ix2.p()) = -ld.lp.pd;
  z2(ix2.q()) = -ld.lp.qd;
  CHECK(degree_of_feasibility(ld.lp, z2) == 0.0);
  z2(ix2.p()) += 0.01;
  CHECK(degree_of_feasibility(ld.lp, z2) == doctest::Approx(1.0));

  Case9Local gen(0);  // generator: interior injections cost nothing
  LocalVars ix3(gen.lp.n_neighbors());
  Eigen::VectorXd z3 = Eigen::VectorXd::Zero(gen.lp.z_len());
  z3(ix3.p()) = 1.0;  // within [0.1, 2.5]
  z3(ix3.q()) = 0.0;
  CHECK(degree_of_feasibility(gen.lp, z3) == 0.0);
  z3(ix3.p()) = 2.6;
  CHECK(degree_of_feasibility(gen.lp, z3) == doctest::Approx(10.0));
}
