#include "dopf/oracle.hpp"

#include <cmath>
#include <vector>

namespace dopf {

namespace {

constexpr double kFeasTol = 1e-9;

struct Sweep {
  const Network& net;
  const AdmittanceMatrix& Y;
  int ppa;
  GridOracleResult best;

  Eigen::VectorXd vre, vim, ire, iim, pg, qg;

  explicit Sweep(const Network& n, const AdmittanceMatrix& y, int p)
      : net(n), Y(y), ppa(p) {
    const int nb = net.n_buses();
    vre = Eigen::VectorXd::Zero(nb);
    vim = Eigen::VectorXd::Zero(nb);
    ire = Eigen::VectorXd::Zero(nb);
    iim = Eigen::VectorXd::Zero(nb);
    pg = Eigen::VectorXd::Zero(nb);
    qg = Eigen::VectorXd::Zero(nb);
  }

  double axis(double lo, double hi, int i) const {
    return lo + (hi - lo) * static_cast<double>(i) /
                    static_cast<double>(ppa - 1);
  }

  bool donut_ok(int k) const {
    const double m2 = vre(k) * vre(k) + vim(k) * vim(k);
    const Bus& bus = net.buses[k];
    return m2 >= bus.v_min * bus.v_min - kFeasTol &&
           m2 <= bus.v_max * bus.v_max + kFeasTol;
  }

  void evaluate() {
    const int nb = net.n_buses();
    ++best.evaluated;
    for (int k = 0; k < nb; ++k) {
      double re = 0.0, im = 0.0;
      for (int j = 0; j < nb; ++j) {
        re += Y.G(k, j) * vre(j) - Y.B(k, j) * vim(j);
        im += Y.B(k, j) * vre(j) + Y.G(k, j) * vim(j);
      }
      ire(k) = re;
      iim(k) = im;
    }

    double obj = 0.0;
    for (int k = 0; k < nb; ++k) {
      const Bus& bus = net.buses[k];
      const double p = vre(k) * ire(k) + vim(k) * iim(k);
      const double q = vim(k) * ire(k) - vre(k) * iim(k);
      pg(k) = p + bus.pd;
      qg(k) = q + bus.qd;
      if (pg(k) < bus.pg_min - kFeasTol || pg(k) > bus.pg_max + kFeasTol)
        return;
      if (qg(k) < bus.qg_min - kFeasTol || qg(k) > bus.qg_max + kFeasTol)
        return;
      if (bus.cost) {
        const double mw = pg(k) * net.base_mva;
        obj += bus.cost->c2 * mw * mw + bus.cost->c1 * mw + bus.cost->c0;
      }
    }
    for (const Line& ln : net.lines) {
      const double dre = vre(ln.from) - vre(ln.to);
      const double dim = vim(ln.from) - vim(ln.to);
      const double fre = ln.g * dre - ln.b * dim;
      const double fim = ln.b * dre + ln.g * dim;
      if (ln.i_max &&
          fre * fre + fim * fim > *ln.i_max * *ln.i_max + kFeasTol)
        return;
      const double lp = vre(ln.from) * fre + vim(ln.from) * fim;
      const double lq = vim(ln.from) * fre - vre(ln.from) * fim;
      if (ln.s_max && lp * lp + lq * lq > *ln.s_max * *ln.s_max + kFeasTol)
        return;
      if (ln.p_max && std::abs(lp) > *ln.p_max + kFeasTol) return;
    }
    if (!best.feasible_found || obj < best.objective) {
      best.feasible_found = true;
      best.objective = obj;
      const int n = nb;
      best.v.resize(2 * n);
      best.v.head(n) = vre;
      best.v.tail(n) = vim;
      best.pg = pg;
      best.qg = qg;
    }
  }

  void recurse(int k) {
    const int nb = net.n_buses();
    if (k == nb) {
      evaluate();
      return;
    }
    const Bus& bus = net.buses[k];
    if (k == 0) {
      // global phase is pinned: bus 0 real and positive
      for (int i = 0; i < ppa; ++i) {
        vre(0) = axis(bus.v_min, bus.v_max, i);
        vim(0) = 0.0;
        recurse(1);
      }
      return;
    }
    for (int i = 0; i < ppa; ++i) {
      vre(k) = axis(-bus.v_max, bus.v_max, i);
      for (int j = 0; j < ppa; ++j) {
        vim(k) = axis(-bus.v_max, bus.v_max, j);
        if (!donut_ok(k)) continue;
        recurse(k + 1);
      }
    }
  }
};

}  // namespace

GridOracleResult grid_oracle(const Network& net, int points_per_axis) {
  const AdmittanceMatrix Y = build_admittance(net);
  Sweep sweep(net, Y, std::max(points_per_axis, 2));
  sweep.recurse(0);
  return sweep.best;
}

}  // namespace dopf
