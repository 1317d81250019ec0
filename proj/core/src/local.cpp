#include "dopf/local.hpp"

#include <cmath>
#include <stdexcept>
#include <utility>

namespace dopf {

Halfspace donut_halfspace(double re, double im, double v_min) {
  if (re == 0.0 && im == 0.0)
    throw std::domain_error("donut_halfspace: reference point at the origin");
  if (re == 0.0) return {0.0, im > 0.0 ? 1.0 : -1.0, v_min};
  const double t = im / re;
  const double a = std::copysign(std::sqrt(v_min * v_min / (1.0 + t * t)), re);
  return {a, a * t, v_min * v_min};
}

Halfspace outer_cut(double re, double im, double radius) {
  if (re == 0.0 && im == 0.0)
    throw std::domain_error("outer_cut: reference point at the origin");
  if (re == 0.0) return {0.0, im > 0.0 ? 1.0 : -1.0, radius};
  const double t = im / re;
  const double a = std::copysign(std::sqrt(radius * radius / (1.0 + t * t)), re);
  return {a, a * t, radius * radius};
}

std::array<Halfspace, 8> initial_octagon(double radius) {
  const double s = std::sqrt(0.5);
  const double ca[8] = {1.0, s, 0.0, -s, -1.0, -s, 0.0, s};
  const double sa[8] = {0.0, s, 1.0, s, 0.0, -s, -1.0, -s};
  std::array<Halfspace, 8> out;
  for (int k = 0; k < 8; ++k) out[k] = {ca[k], sa[k], radius};
  return out;
}

Eigen::VectorXd initialize_zhat(const LocalProblem& lp,
                                const Eigen::VectorXd& v_net) {
  const int nn = lp.n_neighbors();
  const int nb = static_cast<int>(v_net.size()) / 2;
  LocalVars ix(nn);
  Eigen::VectorXd z = Eigen::VectorXd::Zero(ix.len());
  Eigen::VectorXd vre(nn), vim(nn);
  for (int r = 0; r < nn; ++r) {
    vre(r) = v_net(lp.neighbors[r]);
    vim(r) = v_net(nb + lp.neighbors[r]);
    z(ix.v_re(r)) = vre(r);
    z(ix.v_im(r)) = vim(r);
  }
  const double ire = lp.g_col.dot(vre) - lp.b_col.dot(vim);
  const double iim = lp.b_col.dot(vre) + lp.g_col.dot(vim);
  z(ix.i_re()) = ire;
  z(ix.i_im()) = iim;
  z(ix.p()) = vre(0) * ire + vim(0) * iim;
  z(ix.q()) = vim(0) * ire - vre(0) * iim;
  z(ix.pg()) = z(ix.p()) + lp.pd;
  z(ix.qg()) = z(ix.q()) + lp.qd;
  if (ix.deg() > 0) {
    Eigen::VectorXd lire = lp.C * vre - lp.D * vim;
    Eigen::VectorXd liim = lp.D * vre + lp.C * vim;
    for (int r = 0; r < ix.deg(); ++r) {
      z(ix.li_re(r)) = lire(r);
      z(ix.li_im(r)) = liim(r);
      z(ix.lp(r)) = vre(0) * lire(r) + vim(0) * liim(r);
      z(ix.lq(r)) = vim(0) * lire(r) - vre(0) * liim(r);
    }
  }
  return z;
}

namespace {

// First-order rows of p = vre*ire + vim*iim, q = vim*ire - vre*iim around
// (vre_h, vim_h, ire_h, iim_h); the bilinearity makes the expansion exact
// in each factor, so the constant term carries no zhat residual.
void bilinear_rows(Eigen::MatrixXd& A, Eigen::VectorXd& b, int row, int col_p,
                   int col_q, int col_ire, int col_iim, int col_vre,
                   int col_vim, double vre_h, double vim_h, double ire_h,
                   double iim_h) {
  A(row, col_p) = 1.0;
  A(row, col_ire) = -vre_h;
  A(row, col_iim) = -vim_h;
  A(row, col_vre) -= ire_h;
  A(row, col_vim) -= iim_h;
  b(row) = -(vre_h * ire_h + vim_h * iim_h);
  A(row + 1, col_q) = 1.0;
  A(row + 1, col_ire) = -vim_h;
  A(row + 1, col_iim) = vre_h;
  A(row + 1, col_vim) -= ire_h;
  A(row + 1, col_vre) += iim_h;
  b(row + 1) = -(vim_h * ire_h - vre_h * iim_h);
}

}  // namespace

void linearize_power_injection(const LocalProblem& lp,
                               const Eigen::VectorXd& zhat, Eigen::MatrixXd& A,
                               Eigen::VectorXd& b) {
  LocalVars ix(lp.n_neighbors());
  A.setZero(2, ix.len());
  b.setZero(2);
  bilinear_rows(A, b, 0, ix.p(), ix.q(), ix.i_re(), ix.i_im(), ix.v_re(0),
                ix.v_im(0), zhat(ix.v_re(0)), zhat(ix.v_im(0)),
                zhat(ix.i_re()), zhat(ix.i_im()));
}

void linearize_line_power(const LocalProblem& lp, const Eigen::VectorXd& zhat,
                          Eigen::MatrixXd& A, Eigen::VectorXd& b) {
  LocalVars ix(lp.n_neighbors());
  A.setZero(2 * ix.deg(), ix.len());
  b.setZero(2 * ix.deg());
  for (int r = 0; r < ix.deg(); ++r)
    bilinear_rows(A, b, 2 * r, ix.lp(r), ix.lq(r), ix.li_re(r), ix.li_im(r),
                  ix.v_re(0), ix.v_im(0), zhat(ix.v_re(0)), zhat(ix.v_im(0)),
                  zhat(ix.li_re(r)), zhat(ix.li_im(r)));
}

namespace {

// accumulated tangent cuts, one list per circle
struct CutSet {
  std::vector<std::vector<Halfspace>> flow_i;  // per line, |li| circle
  std::vector<std::vector<Halfspace>> flow_s;  // per line, |lp+j*lq| circle
  std::vector<std::vector<Halfspace>> volt;    // per component, v_max circle
};

QpProblem assemble_subproblem(const LocalProblem& lp,
                              const Eigen::VectorXd& zhat,
                              const Eigen::VectorXd& y,
                              const Eigen::VectorXd& v_target, double rho,
                              const std::vector<Halfspace>& donut,
                              const CutSet& cuts, DualLayout& layout,
                              bool& pg_pinned, bool& qg_pinned) {
  const int nn = lp.n_neighbors();
  const int deg = lp.degree();
  LocalVars ix(nn);
  const int n = ix.len();
  pg_pinned = lp.pg_min == lp.pg_max;
  qg_pinned = lp.qg_min == lp.qg_max;

  layout = DualLayout{};
  layout.n_alpha = 4 + 2 * deg;
  layout.n_inj = 2;
  layout.n_line = 2 * deg;
  layout.n_box = (pg_pinned ? 1 : 2) + (qg_pinned ? 1 : 2);
  for (int r = 0; r < deg; ++r) {
    if (lp.i_max[r])
      layout.n_flow_cuts += 8 + static_cast<int>(cuts.flow_i[r].size());
    if (lp.s_max[r])
      layout.n_flow_cuts += 8 + static_cast<int>(cuts.flow_s[r].size());
    if (lp.p_max[r]) layout.n_flow_cuts += 2;
  }
  layout.n_donut = nn;
  for (int r = 0; r < nn; ++r)
    layout.n_outer += 8 + static_cast<int>(cuts.volt[r].size());

  QpProblem qp;
  qp.P = Eigen::MatrixXd::Zero(n, n);
  qp.q = Eigen::VectorXd::Zero(n);
  if (lp.cost) {
    qp.P(ix.pg(), ix.pg()) = 2.0 * lp.cost->c2 * lp.base_mva * lp.base_mva;
    qp.q(ix.pg()) = lp.cost->c1 * lp.base_mva;
  }
  qp.P.diagonal().segment(ix.v_begin(), ix.v_len()).array() += rho;
  qp.q.segment(ix.v_begin(), ix.v_len()) = y - rho * v_target;

  const int me = layout.n_alpha + layout.n_inj + layout.n_line +
                 (pg_pinned ? 1 : 0) + (qg_pinned ? 1 : 0);
  qp.A = Eigen::MatrixXd::Zero(me, n);
  qp.b = Eigen::VectorXd::Zero(me);
  int row = 0;
  // current injection: i = (g + jb)^T (vre + j*vim), split re/im
  qp.A(row, ix.i_re()) = 1.0;
  for (int r = 0; r < nn; ++r) {
    qp.A(row, ix.v_re(r)) = -lp.g_col(r);
    qp.A(row, ix.v_im(r)) = lp.b_col(r);
  }
  ++row;
  qp.A(row, ix.i_im()) = 1.0;
  for (int r = 0; r < nn; ++r) {
    qp.A(row, ix.v_re(r)) = -lp.b_col(r);
    qp.A(row, ix.v_im(r)) = -lp.g_col(r);
  }
  ++row;
  // power balance
  qp.A(row, ix.p()) = 1.0;
  qp.A(row, ix.pg()) = -1.0;
  qp.b(row) = -lp.pd;
  ++row;
  qp.A(row, ix.q()) = 1.0;
  qp.A(row, ix.qg()) = -1.0;
  qp.b(row) = -lp.qd;
  ++row;
  // line currents, all real rows then all imaginary rows
  for (int r = 0; r < deg; ++r, ++row) {
    qp.A(row, ix.li_re(r)) = 1.0;
    for (int j = 0; j < nn; ++j) {
      qp.A(row, ix.v_re(j)) = -lp.C(r, j);
      qp.A(row, ix.v_im(j)) = lp.D(r, j);
    }
  }
  for (int r = 0; r < deg; ++r, ++row) {
    qp.A(row, ix.li_im(r)) = 1.0;
    for (int j = 0; j < nn; ++j) {
      qp.A(row, ix.v_re(j)) = -lp.D(r, j);
      qp.A(row, ix.v_im(j)) = -lp.C(r, j);
    }
  }
  Eigen::MatrixXd Al;
  Eigen::VectorXd bl;
  linearize_power_injection(lp, zhat, Al, bl);
  qp.A.middleRows(row, 2) = Al;
  qp.b.segment(row, 2) = bl;
  row += 2;
  if (deg > 0) {
    linearize_line_power(lp, zhat, Al, bl);
    qp.A.middleRows(row, 2 * deg) = Al;
    qp.b.segment(row, 2 * deg) = bl;
    row += 2 * deg;
  }
  if (pg_pinned) {
    qp.A(row, ix.pg()) = 1.0;
    qp.b(row) = lp.pg_min;
    ++row;
  }
  if (qg_pinned) {
    qp.A(row, ix.qg()) = 1.0;
    qp.b(row) = lp.qg_min;
    ++row;
  }

  const int mi = (pg_pinned ? 0 : 2) + (qg_pinned ? 0 : 2) +
                 layout.n_flow_cuts + layout.n_donut + layout.n_outer;
  qp.G = Eigen::MatrixXd::Zero(mi, n);
  qp.h = Eigen::VectorXd::Zero(mi);
  row = 0;
  if (!pg_pinned) {
    qp.G(row, ix.pg()) = 1.0;
    qp.h(row) = lp.pg_max;
    ++row;
    qp.G(row, ix.pg()) = -1.0;
    qp.h(row) = -lp.pg_min;
    ++row;
  }
  if (!qg_pinned) {
    qp.G(row, ix.qg()) = 1.0;
    qp.h(row) = lp.qg_max;
    ++row;
    qp.G(row, ix.qg()) = -1.0;
    qp.h(row) = -lp.qg_min;
    ++row;
  }
  auto put_circle = [&](int cx, int cy, double radius,
                        const std::vector<Halfspace>& extra) {
    for (const Halfspace& hs : initial_octagon(radius)) {
      qp.G(row, cx) = hs.a;
      qp.G(row, cy) = hs.b;
      qp.h(row) = hs.c;
      ++row;
    }
    for (const Halfspace& hs : extra) {
      qp.G(row, cx) = hs.a;
      qp.G(row, cy) = hs.b;
      qp.h(row) = hs.c;
      ++row;
    }
  };
  for (int r = 0; r < deg; ++r) {
    if (lp.i_max[r])
      put_circle(ix.li_re(r), ix.li_im(r), *lp.i_max[r], cuts.flow_i[r]);
    if (lp.s_max[r])
      put_circle(ix.lp(r), ix.lq(r), *lp.s_max[r], cuts.flow_s[r]);
    if (lp.p_max[r]) {
      qp.G(row, ix.lp(r)) = 1.0;
      qp.h(row) = *lp.p_max[r];
      ++row;
      qp.G(row, ix.lp(r)) = -1.0;
      qp.h(row) = *lp.p_max[r];
      ++row;
    }
  }
  for (int r = 0; r < nn; ++r) {
    qp.G(row, ix.v_re(r)) = -donut[r].a;
    qp.G(row, ix.v_im(r)) = -donut[r].b;
    qp.h(row) = -donut[r].c;
    ++row;
  }
  for (int r = 0; r < nn; ++r)
    put_circle(ix.v_re(r), ix.v_im(r), lp.v_max(r), cuts.volt[r]);
  return qp;
}

// nu is packed [alpha | inj | line | pinned box rows], lambda
// [box pairs | flow | donut | outer]; u interleaves the box slot.
Eigen::VectorXd pack_duals(const DualLayout& layout, bool pg_pinned,
                           bool qg_pinned, const QpSolution& sol) {
  Eigen::VectorXd u(layout.total());
  const int head = layout.n_alpha + layout.n_inj + layout.n_line;
  u.head(head) = sol.nu.head(head);
  int k = head;
  int nu_pin = head;
  int lam = 0;
  if (pg_pinned) {
    u(k++) = sol.nu(nu_pin++);
  } else {
    u(k++) = sol.lambda(lam++);
    u(k++) = sol.lambda(lam++);
  }
  if (qg_pinned) {
    u(k++) = sol.nu(nu_pin++);
  } else {
    u(k++) = sol.lambda(lam++);
    u(k++) = sol.lambda(lam++);
  }
  const int rest = layout.n_flow_cuts + layout.n_donut + layout.n_outer;
  u.segment(k, rest) = sol.lambda.segment(lam, rest);
  return u;
}

}  // namespace

InnerResult solve_convex_inner(const LocalProblem& lp,
                               const Eigen::VectorXd& zhat,
                               const Eigen::VectorXd& y,
                               const Eigen::VectorXd& v_target, double rho,
                               const std::vector<Halfspace>& donut_cuts,
                               const SubOptions& opts) {
  const int nn = lp.n_neighbors();
  const int deg = lp.degree();
  LocalVars ix(nn);
  CutSet cuts;
  cuts.flow_i.resize(deg);
  cuts.flow_s.resize(deg);
  cuts.volt.resize(nn);

  InnerResult out;
  QpOptions qopts;
  qopts.tol = opts.qp_tol;
  for (int round = 0; round < opts.max_cut_rounds; ++round) {
    bool pg_pinned = false, qg_pinned = false;
    out.qp = assemble_subproblem(lp, zhat, y, v_target, rho, donut_cuts, cuts,
                                 out.layout, pg_pinned, qg_pinned);
    out.qp_sol = solve_qp(out.qp, qopts);
    out.cut_rounds = round + 1;
    if (out.qp_sol.status != QpStatus::Optimal) {
      out.status = InnerStatus::Infeasible;
      return out;
    }
    const Eigen::VectorXd& z = out.qp_sol.x;
    auto violated = [&](int cx, int cy, double radius) {
      return z(cx) * z(cx) + z(cy) * z(cy) - radius * radius >
             opts.circle_tol;
    };
    int added = 0;
    for (int r = 0; r < deg; ++r) {
      if (lp.i_max[r] && violated(ix.li_re(r), ix.li_im(r), *lp.i_max[r])) {
        cuts.flow_i[r].push_back(
            outer_cut(z(ix.li_re(r)), z(ix.li_im(r)), *lp.i_max[r]));
        ++added;
      }
      if (lp.s_max[r] && violated(ix.lp(r), ix.lq(r), *lp.s_max[r])) {
        cuts.flow_s[r].push_back(
            outer_cut(z(ix.lp(r)), z(ix.lq(r)), *lp.s_max[r]));
        ++added;
      }
    }
    for (int r = 0; r < nn; ++r) {
      if (violated(ix.v_re(r), ix.v_im(r), lp.v_max(r))) {
        cuts.volt[r].push_back(
            outer_cut(z(ix.v_re(r)), z(ix.v_im(r)), lp.v_max(r)));
        ++added;
      }
    }
    if (added == 0) {
      out.z = z;
      out.u = pack_duals(out.layout, pg_pinned, qg_pinned, out.qp_sol);
      out.status = InnerStatus::Ok;
      return out;
    }
  }
  out.status = InnerStatus::CutCapExceeded;
  return out;
}

SubproblemResult run_algorithm2(const LocalProblem& lp,
                                const Eigen::VectorXd& y,
                                const Eigen::VectorXd& v_net, double rho,
                                const SubOptions& opts) {
  const int nn = lp.n_neighbors();
  const int nb = static_cast<int>(v_net.size()) / 2;
  LocalVars ix(nn);
  Eigen::VectorXd v_target(2 * nn);
  for (int r = 0; r < nn; ++r) {
    v_target(r) = v_net(lp.neighbors[r]);
    v_target(nn + r) = v_net(nb + lp.neighbors[r]);
  }

  SubproblemResult out;
  std::vector<Halfspace> donut(nn);
  try {
    for (int r = 0; r < nn; ++r)
      donut[r] = donut_halfspace(v_target(r), v_target(nn + r), lp.v_min(r));
  } catch (const std::domain_error&) {
    out.status = SubStatus::Infeasible;  // net voltage collapsed to the origin
    return out;
  }

  Eigen::VectorXd zhat = initialize_zhat(lp, v_net);
  for (int t = 0; t < opts.max_sub_iter; ++t) {
    InnerResult inner =
        solve_convex_inner(lp, zhat, y, v_target, rho, donut, opts);
    out.inner_iterations = t + 1;
    if (inner.status != InnerStatus::Ok) {
      out.z = zhat;
      out.status = SubStatus::Infeasible;
      out.last_inner = std::move(inner);
      return out;
    }
    const double decrement = (inner.z.segment(ix.v_begin(), ix.v_len()) -
                              zhat.segment(ix.v_begin(), ix.v_len()))
                                 .norm();
    out.z = inner.z;
    out.u = inner.u;
    out.layout = inner.layout;
    zhat = inner.z;
    out.last_inner = std::move(inner);
    if (decrement < opts.eps_sub) {
      out.status = SubStatus::ConvergedEps;
      out.df = degree_of_feasibility(lp, out.z);
      return out;
    }
  }
  out.status = SubStatus::StoppedMaxIter;
  out.df = degree_of_feasibility(lp, out.z);
  return out;
}

double degree_of_feasibility(const LocalProblem& lp,
                             const Eigen::VectorXd& z) {
  LocalVars ix(lp.n_neighbors());
  const double p = z(ix.p());
  const double q = z(ix.q());
  const double dx =
      std::max({lp.pg_min - lp.pd - p, p - (lp.pg_max - lp.pd), 0.0});
  const double dy =
      std::max({lp.qg_min - lp.qd - q, q - (lp.qg_max - lp.qd), 0.0});
  return std::hypot(dx, dy) * lp.base_mva;
}

}  // namespace dopf
