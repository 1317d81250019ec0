#include "dopf/network.hpp"

#include <algorithm>
#include <map>

namespace dopf {

AdmittanceMatrix build_admittance(const Network& net) {
  const int n = net.n_buses();
  AdmittanceMatrix Y;
  Y.G = Eigen::MatrixXd::Zero(n, n);
  Y.B = Eigen::MatrixXd::Zero(n, n);
  for (int k = 0; k < n; ++k) {
    Y.G(k, k) += net.buses[k].gs;
    Y.B(k, k) += net.buses[k].bs;
  }
  for (const Line& ln : net.lines) {
    Y.G(ln.from, ln.from) += ln.g;
    Y.B(ln.from, ln.from) += ln.b;
    Y.G(ln.to, ln.to) += ln.g;
    Y.B(ln.to, ln.to) += ln.b;
    Y.G(ln.from, ln.to) -= ln.g;
    Y.B(ln.from, ln.to) -= ln.b;
    Y.G(ln.to, ln.from) -= ln.g;
    Y.B(ln.to, ln.from) -= ln.b;
  }
  return Y;
}

LocalProblem local_problem(const Network& net, const AdmittanceMatrix& Y,
                           int bus) {
  LocalProblem lp;
  lp.bus = bus;
  lp.base_mva = net.base_mva;

  // merged line data per non-self neighbor
  std::map<int, Line> adj;
  for (const Line& ln : net.lines) {
    int other = -1;
    if (ln.from == bus) other = ln.to;
    else if (ln.to == bus) other = ln.from;
    else continue;
    auto [it, fresh] = adj.emplace(other, ln);
    if (!fresh) {
      it->second.g += ln.g;
      it->second.b += ln.b;
    }
  }

  lp.neighbors.push_back(bus);
  for (const auto& [other, ln] : adj) lp.neighbors.push_back(other);

  const int nn = lp.n_neighbors();
  const int deg = nn - 1;
  lp.g_col.resize(nn);
  lp.b_col.resize(nn);
  for (int r = 0; r < nn; ++r) {
    lp.g_col(r) = Y.G(lp.neighbors[r], bus);
    lp.b_col(r) = Y.B(lp.neighbors[r], bus);
  }

  lp.C = Eigen::MatrixXd::Zero(deg, nn);
  lp.D = Eigen::MatrixXd::Zero(deg, nn);
  lp.i_max.resize(deg);
  lp.s_max.resize(deg);
  lp.p_max.resize(deg);
  for (int r = 0; r < deg; ++r) {
    const Line& ln = adj.at(lp.neighbors[r + 1]);
    lp.C(r, 0) = ln.g;
    lp.C(r, r + 1) = -ln.g;
    lp.D(r, 0) = ln.b;
    lp.D(r, r + 1) = -ln.b;
    lp.i_max[r] = ln.i_max;
    lp.s_max[r] = ln.s_max;
    lp.p_max[r] = ln.p_max;
  }

  const Bus& bk = net.buses[bus];
  lp.pd = bk.pd;
  lp.qd = bk.qd;
  lp.pg_min = bk.pg_min;
  lp.pg_max = bk.pg_max;
  lp.qg_min = bk.qg_min;
  lp.qg_max = bk.qg_max;
  lp.cost = bk.cost;

  lp.v_min.resize(nn);
  lp.v_max.resize(nn);
  for (int r = 0; r < nn; ++r) {
    lp.v_min(r) = net.buses[lp.neighbors[r]].v_min;
    lp.v_max(r) = net.buses[lp.neighbors[r]].v_max;
  }
  return lp;
}

std::vector<Violation> validate(const Network& net) {
  std::vector<Violation> out;
  auto bad = [&out](const std::string& msg) { out.push_back({msg}); };

  if (net.base_mva <= 0.0) bad("base_mva must be positive");
  for (int k = 0; k < net.n_buses(); ++k) {
    const Bus& b = net.buses[k];
    const std::string at = "bus " + std::to_string(k) + ": ";
    if (b.pg_min > b.pg_max) bad(at + "pg_min exceeds pg_max");
    if (b.qg_min > b.qg_max) bad(at + "qg_min exceeds qg_max");
    if (!(b.v_min > 0.0)) bad(at + "v_min must be positive");
    if (b.v_min > b.v_max) bad(at + "v_min exceeds v_max");
    if (b.cost) {
      if (b.cost->c2 < 0.0) bad(at + "negative quadratic cost coefficient");
    } else {
      if (b.pg_min != 0.0 || b.pg_max != 0.0 || b.qg_min != 0.0 ||
          b.qg_max != 0.0)
        bad(at + "generation bounds on a bus without a generator");
    }
  }
  for (size_t i = 0; i < net.lines.size(); ++i) {
    const Line& ln = net.lines[i];
    const std::string at = "line " + std::to_string(i) + ": ";
    if (ln.from == ln.to) bad(at + "self loop");
    if (ln.from < 0 || ln.from >= net.n_buses() || ln.to < 0 ||
        ln.to >= net.n_buses())
      bad(at + "endpoint out of range");
    for (const auto& lim : {ln.i_max, ln.s_max, ln.p_max})
      if (lim && *lim <= 0.0) bad(at + "nonpositive flow limit");
  }
  return out;
}

}  // namespace dopf
