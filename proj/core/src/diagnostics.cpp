#include "dopf/diagnostics.hpp"

#include <algorithm>
#include <cmath>

#include <json.hpp>

#include "dopf/local.hpp"

namespace dopf {

KktReport kkt_delta_epsilon(const std::vector<LocalProblem>& lps,
                            const std::vector<Eigen::VectorXd>& z,
                            const Eigen::VectorXd& v, double rho) {
  KktReport rep;
  rep.rho = rho;
  const int nb = static_cast<int>(v.size()) / 2;
  rep.per_bus_delta_sq.resize(lps.size(), 0.0);
  for (size_t k = 0; k < lps.size(); ++k) {
    const int nn = lps[k].n_neighbors();
    LocalVars ix(nn);
    double d2 = 0.0;
    for (int r = 0; r < nn; ++r) {
      const int g = lps[k].neighbors[r];
      const double dre = z[k](ix.v_re(r)) - v(g);
      const double dim = z[k](ix.v_im(r)) - v(nb + g);
      d2 += dre * dre + dim * dim;
    }
    rep.per_bus_delta_sq[k] = d2;
    rep.delta_bar += d2;
    rep.a += 2.0 * nn;
    rep.b += lps[k].z_len();
  }
  rep.b += 2.0 * nb;
  rep.delta = rep.delta_bar / rep.a;
  rep.epsilon = rho * rho * rep.delta_bar / rep.b;
  return rep;
}

double FeasibilityReport::max() const {
  return std::max({current_injection, power_balance, line_current,
                   power_injection, line_power, pg_bounds, qg_bounds,
                   current_limit, apparent_limit, line_p_limit,
                   voltage_bounds});
}

FeasibilityReport evaluate_centralized_feasibility(
    const Network& net, const std::vector<LocalProblem>& lps,
    const std::vector<Eigen::VectorXd>& z, const Eigen::VectorXd& v) {
  FeasibilityReport rep;
  const int nb = net.n_buses();
  const AdmittanceMatrix Y = build_admittance(net);
  const Eigen::VectorXd vre = v.head(nb);
  const Eigen::VectorXd vim = v.tail(nb);
  const Eigen::VectorXd ire_true = Y.G * vre - Y.B * vim;
  const Eigen::VectorXd iim_true = Y.B * vre + Y.G * vim;

  auto up = [](double& field, double value) {
    field = std::max(field, std::abs(value));
  };
  auto clamp_up = [](double& field, double violation) {
    field = std::max(field, std::max(violation, 0.0));
  };

  for (int k = 0; k < nb; ++k) {
    const Bus& bus = net.buses[k];
    const int nn = lps[k].n_neighbors();
    LocalVars ix(nn);
    const Eigen::VectorXd& zk = z[k];

    up(rep.current_injection, zk(ix.i_re()) - ire_true(k));
    up(rep.current_injection, zk(ix.i_im()) - iim_true(k));

    up(rep.power_balance, zk(ix.p()) - zk(ix.pg()) + bus.pd);
    up(rep.power_balance, zk(ix.q()) - zk(ix.qg()) + bus.qd);

    up(rep.power_injection,
       zk(ix.p()) - (vre(k) * zk(ix.i_re()) + vim(k) * zk(ix.i_im())));
    up(rep.power_injection,
       zk(ix.q()) - (vim(k) * zk(ix.i_re()) - vre(k) * zk(ix.i_im())));

    for (int r = 0; r < ix.deg(); ++r) {
      const int m = lps[k].neighbors[r + 1];
      const double g = lps[k].C(r, 0);
      const double b = lps[k].D(r, 0);
      const double dre = vre(k) - vre(m);
      const double dim = vim(k) - vim(m);
      up(rep.line_current, zk(ix.li_re(r)) - (g * dre - b * dim));
      up(rep.line_current, zk(ix.li_im(r)) - (b * dre + g * dim));
      up(rep.line_power,
         zk(ix.lp(r)) -
             (vre(k) * zk(ix.li_re(r)) + vim(k) * zk(ix.li_im(r))));
      up(rep.line_power,
         zk(ix.lq(r)) -
             (vim(k) * zk(ix.li_re(r)) - vre(k) * zk(ix.li_im(r))));

      const double i2 =
          zk(ix.li_re(r)) * zk(ix.li_re(r)) + zk(ix.li_im(r)) * zk(ix.li_im(r));
      const double s2 =
          zk(ix.lp(r)) * zk(ix.lp(r)) + zk(ix.lq(r)) * zk(ix.lq(r));
      if (lps[k].i_max[r])
        clamp_up(rep.current_limit, i2 - *lps[k].i_max[r] * *lps[k].i_max[r]);
      if (lps[k].s_max[r])
        clamp_up(rep.apparent_limit, s2 - *lps[k].s_max[r] * *lps[k].s_max[r]);
      if (lps[k].p_max[r])
        clamp_up(rep.line_p_limit, std::abs(zk(ix.lp(r))) - *lps[k].p_max[r]);
    }

    clamp_up(rep.pg_bounds, zk(ix.pg()) - bus.pg_max);
    clamp_up(rep.pg_bounds, bus.pg_min - zk(ix.pg()));
    clamp_up(rep.qg_bounds, zk(ix.qg()) - bus.qg_max);
    clamp_up(rep.qg_bounds, bus.qg_min - zk(ix.qg()));

    const double vmag2 = vre(k) * vre(k) + vim(k) * vim(k);
    clamp_up(rep.voltage_bounds, vmag2 - bus.v_max * bus.v_max);
    clamp_up(rep.voltage_bounds, bus.v_min * bus.v_min - vmag2);
  }
  return rep;
}

double objective_value(const Network& net,
                       const std::vector<Eigen::VectorXd>& z) {
  double total = 0.0;
  for (int k = 0; k < net.n_buses(); ++k) {
    if (!net.buses[k].cost) continue;
    const CostPoly& c = *net.buses[k].cost;
    const double pg = z[k](0) * net.base_mva;  // MW
    total += c.c2 * pg * pg + c.c1 * pg + c.c0;
  }
  return total;
}

double relative_objective(double obj, double reference) {
  if (reference == 0.0) return std::abs(obj);
  return std::abs(obj - reference) / std::abs(reference);
}

std::string kkt_report_json(const KktReport& r) {
  nlohmann::ordered_json j{{"delta", r.delta},
                           {"epsilon", r.epsilon},
                           {"delta_bar", r.delta_bar},
                           {"a", r.a},
                           {"b", r.b},
                           {"rho", r.rho},
                           {"per_bus_delta_sq", r.per_bus_delta_sq}};
  return j.dump(2);
}

std::string feasibility_report_json(const FeasibilityReport& r) {
  nlohmann::ordered_json j{{"current_injection", r.current_injection},
                           {"power_balance", r.power_balance},
                           {"line_current", r.line_current},
                           {"power_injection", r.power_injection},
                           {"line_power", r.line_power},
                           {"pg_bounds", r.pg_bounds},
                           {"qg_bounds", r.qg_bounds},
                           {"current_limit", r.current_limit},
                           {"apparent_limit", r.apparent_limit},
                           {"line_p_limit", r.line_p_limit},
                           {"voltage_bounds", r.voltage_bounds},
                           {"max", r.max()}};
  return j.dump(2);
}

}  // namespace dopf
