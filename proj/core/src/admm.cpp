#include "dopf/admm.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <stdexcept>
#include <utility>

#include <json.hpp>

#include "dopf/diagnostics.hpp"

namespace dopf {

Eigen::VectorXd net_update_general(const std::vector<LocalProblem>& lps,
                                   const std::vector<Eigen::VectorXd>& z,
                                   const std::vector<Eigen::VectorXd>& y,
                                   double rho, int n_buses) {
  Eigen::VectorXd num = Eigen::VectorXd::Zero(2 * n_buses);
  Eigen::VectorXd cnt = Eigen::VectorXd::Zero(n_buses);
  for (size_t k = 0; k < lps.size(); ++k) {
    const int nn = lps[k].n_neighbors();
    LocalVars ix(nn);
    for (int r = 0; r < nn; ++r) {
      const int g = lps[k].neighbors[r];
      num(g) += z[k](ix.v_re(r)) + y[k](r) / rho;
      num(n_buses + g) += z[k](ix.v_im(r)) + y[k](nn + r) / rho;
      cnt(g) += 1.0;
    }
  }
  Eigen::VectorXd v(2 * n_buses);
  for (int j = 0; j < n_buses; ++j) {
    v(j) = num(j) / cnt(j);
    v(n_buses + j) = num(n_buses + j) / cnt(j);
  }
  return v;
}

Eigen::VectorXd net_update_average(const std::vector<LocalProblem>& lps,
                                   const std::vector<Eigen::VectorXd>& z,
                                   int n_buses) {
  Eigen::VectorXd num = Eigen::VectorXd::Zero(2 * n_buses);
  Eigen::VectorXd cnt = Eigen::VectorXd::Zero(n_buses);
  for (size_t k = 0; k < lps.size(); ++k) {
    const int nn = lps[k].n_neighbors();
    LocalVars ix(nn);
    for (int r = 0; r < nn; ++r) {
      const int g = lps[k].neighbors[r];
      num(g) += z[k](ix.v_re(r));
      num(n_buses + g) += z[k](ix.v_im(r));
      cnt(g) += 1.0;
    }
  }
  Eigen::VectorXd v(2 * n_buses);
  for (int j = 0; j < n_buses; ++j) {
    v(j) = num(j) / cnt(j);
    v(n_buses + j) = num(n_buses + j) / cnt(j);
  }
  return v;
}

void gossip_average(std::vector<double>& values,
                    const std::vector<std::pair<int, int>>& pairs, int rounds,
                    std::mt19937& rng) {
  if (pairs.empty()) return;
  for (int t = 0; t < rounds; ++t) {
    const auto& pr = pairs[rng() % pairs.size()];
    const double mid = 0.5 * (values[pr.first] + values[pr.second]);
    values[pr.first] = mid;
    values[pr.second] = mid;
  }
}

Eigen::VectorXd net_update_gossip(const Network& net,
                                  const std::vector<LocalProblem>& lps,
                                  const std::vector<Eigen::VectorXd>& z,
                                  int rounds, std::mt19937& rng) {
  const int nb = net.n_buses();
  std::set<std::pair<int, int>> edges;
  for (const Line& ln : net.lines)
    edges.insert({std::min(ln.from, ln.to), std::max(ln.from, ln.to)});

  Eigen::VectorXd v(2 * nb);
  for (int j = 0; j < nb; ++j) {
    // holders of component j are exactly the closed neighborhood of j
    const std::vector<int>& holders = lps[j].neighbors;
    const int nh = static_cast<int>(holders.size());
    std::vector<int> pos(nh, -1);
    for (int a = 0; a < nh; ++a) {
      const auto& nbrs = lps[holders[a]].neighbors;
      for (size_t r = 0; r < nbrs.size(); ++r)
        if (nbrs[r] == j) pos[a] = static_cast<int>(r);
    }
    std::vector<std::pair<int, int>> pairs;
    for (int a = 0; a < nh; ++a)
      for (int c = a + 1; c < nh; ++c)
        if (edges.count({std::min(holders[a], holders[c]),
                         std::max(holders[a], holders[c])}))
          pairs.emplace_back(a, c);

    std::vector<double> vals(nh);
    for (int a = 0; a < nh; ++a)
      vals[a] = z[holders[a]](LocalVars(lps[holders[a]].n_neighbors())
                                  .v_re(pos[a]));
    gossip_average(vals, pairs, rounds, rng);
    v(j) = vals[0];
    for (int a = 0; a < nh; ++a)
      vals[a] = z[holders[a]](LocalVars(lps[holders[a]].n_neighbors())
                                  .v_im(pos[a]));
    gossip_average(vals, pairs, rounds, rng);
    v(nb + j) = vals[0];
  }
  return v;
}

std::vector<double> dual_update(const std::vector<LocalProblem>& lps,
                                const std::vector<Eigen::VectorXd>& z,
                                std::vector<Eigen::VectorXd>& y,
                                const Eigen::VectorXd& v, double rho,
                                const std::vector<char>& skip) {
  const int nb = static_cast<int>(v.size()) / 2;
  std::vector<double> res(lps.size(), 0.0);
  for (size_t k = 0; k < lps.size(); ++k) {
    const int nn = lps[k].n_neighbors();
    LocalVars ix(nn);
    Eigen::VectorXd diff(2 * nn);
    for (int r = 0; r < nn; ++r) {
      const int g = lps[k].neighbors[r];
      diff(r) = z[k](ix.v_re(r)) - v(g);
      diff(nn + r) = z[k](ix.v_im(r)) - v(nb + g);
    }
    res[k] = diff.norm();
    if (!skip[k]) y[k] += rho * diff;
  }
  return res;
}

std::string check_stop(const StopRule& rule,
                       const std::vector<IterRecord>& trace, int iter,
                       double max_consensus_residual) {
  switch (rule.kind) {
    case StopRule::Kind::FixedIters:
      return {};
    case StopRule::Kind::Consensus:
      return max_consensus_residual <= rule.theta ? "consensus" : "";
    case StopRule::Kind::Objective: {
      if (iter < 2 || trace.size() < 2) return {};
      const double cur = trace.back().objective;
      const double prev = trace[trace.size() - 2].objective;
      const bool fired =
          std::abs(cur - prev) <= rule.theta * std::max(1.0, std::abs(prev));
      return fired ? "objective" : "";
    }
  }
  return {};
}

AdmmResult run_admm(const Network& net, const AdmmConfig& cfg,
                    const IterObserver& observer) {
  const int nb = net.n_buses();
  const AdmittanceMatrix Y = build_admittance(net);

  AdmmResult out;
  out.locals.reserve(nb);
  for (int k = 0; k < nb; ++k) out.locals.push_back(local_problem(net, Y, k));
  const std::vector<LocalProblem>& lps = out.locals;

  // flat start
  out.state.v = Eigen::VectorXd::Zero(2 * nb);
  out.state.v.head(nb).setOnes();
  out.state.z.resize(nb);
  out.state.y.resize(nb);
  for (int k = 0; k < nb; ++k) {
    out.state.z[k] = initialize_zhat(lps[k], out.state.v);
    out.state.y[k] = Eigen::VectorXd::Zero(2 * lps[k].n_neighbors());
    out.a_len += 2.0 * lps[k].n_neighbors();
    out.b_len += lps[k].z_len();
  }
  out.b_len += 2.0 * nb;

  SubOptions sopts;
  sopts.eps_sub = cfg.eps_sub;
  sopts.max_sub_iter = cfg.max_sub_iter;
  sopts.qp_tol = cfg.qp_tol;

  std::mt19937 rng(cfg.seed);
  out.trace.reserve(cfg.max_admm_iters);
  std::vector<char> failed(nb, 0);

  for (int iter = 1; iter <= cfg.max_admm_iters; ++iter) {
    const auto t0 = std::chrono::steady_clock::now();
    IterRecord rec;
    rec.iter = iter;

    int n_failed = 0;
    for (int k = 0; k < nb; ++k) {
      SubproblemResult sub =
          run_algorithm2(lps[k], out.state.y[k], out.state.v, cfg.rho, sopts);
      switch (sub.status) {
        case SubStatus::ConvergedEps:
          ++rec.sub_eps_stops;
          break;
        case SubStatus::StoppedMaxIter:
          ++rec.sub_maxiter_stops;
          break;
        case SubStatus::Infeasible:
          ++rec.sub_infeasible;
          break;
      }
      if (sub.status == SubStatus::Infeasible) {
        failed[k] = 1;  // stale z is kept; the dual update skips this bus
        ++n_failed;
      } else {
        failed[k] = 0;
        out.state.z[k] = std::move(sub.z);
        rec.worst_df = std::max(rec.worst_df, sub.df);
      }
    }
    out.sub_eps_total += rec.sub_eps_stops;
    out.sub_maxiter_total += rec.sub_maxiter_stops;
    out.sub_infeasible_total += rec.sub_infeasible;
    out.worst_df = std::max(out.worst_df, rec.worst_df);

    switch (cfg.net_update) {
      case NetUpdateMode::ExactGeneral:
        out.state.v =
            net_update_general(lps, out.state.z, out.state.y, cfg.rho, nb);
        break;
      case NetUpdateMode::ExactAverage:
        out.state.v = net_update_average(lps, out.state.z, nb);
        break;
      case NetUpdateMode::Gossip:
        out.state.v = net_update_gossip(net, lps, out.state.z,
                                        cfg.gossip_rounds, rng);
        break;
    }

    const std::vector<double> res =
        dual_update(lps, out.state.z, out.state.y, out.state.v, cfg.rho,
                    failed);
    double delta_bar = 0.0;
    double rmax = 0.0;
    for (double r : res) {
      delta_bar += r * r;
      rmax = std::max(rmax, r);
    }
    rec.delta = delta_bar / out.a_len;
    rec.epsilon = cfg.rho * cfg.rho * delta_bar / out.b_len;
    rec.objective = objective_value(net, out.state.z);
    rec.wall_ms = std::chrono::duration<double, std::milli>(
                      std::chrono::steady_clock::now() - t0)
                      .count();
    if (observer) observer(rec);
    out.trace.push_back(rec);

    if (n_failed == nb) {
      out.unrecoverable = true;
      out.stop_reason = "unrecoverable";
      break;
    }
    const std::string reason = check_stop(cfg.stop, out.trace, iter, rmax);
    if (!reason.empty()) {
      out.stop_reason = reason;
      break;
    }
  }
  out.iterations = static_cast<int>(out.trace.size());
  if (out.stop_reason.empty())
    out.stop_reason = cfg.stop.kind == StopRule::Kind::FixedIters
                          ? "fixed_iters"
                          : "iter_cap";
  return out;
}

std::string trace_csv_header() {
  return "iter,objective,delta,epsilon,worst_df,sub_eps_stops,"
         "sub_maxiter_stops,sub_infeasible,wall_ms";
}

void write_trace_csv(const std::string& path,
                     const std::vector<IterRecord>& trace) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot open trace file: " + path);
  f << trace_csv_header() << '\n';
  char buf[512];
  for (const IterRecord& r : trace) {
    std::snprintf(buf, sizeof buf,
                  "%d,%.17g,%.17g,%.17g,%.17g,%d,%d,%d,%.17g\n", r.iter,
                  r.objective, r.delta, r.epsilon, r.worst_df, r.sub_eps_stops,
                  r.sub_maxiter_stops, r.sub_infeasible, r.wall_ms);
    f << buf;
  }
  if (!f) throw std::runtime_error("error writing trace file: " + path);
}

void write_trace_jsonl(const std::string& path,
                       const std::vector<IterRecord>& trace) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot open trace file: " + path);
  for (const IterRecord& r : trace) {
    nlohmann::ordered_json j{{"iter", r.iter},
                             {"objective", r.objective},
                             {"delta", r.delta},
                             {"epsilon", r.epsilon},
                             {"worst_df", r.worst_df},
                             {"sub_eps_stops", r.sub_eps_stops},
                             {"sub_maxiter_stops", r.sub_maxiter_stops},
                             {"sub_infeasible", r.sub_infeasible},
                             {"wall_ms", r.wall_ms}};
    f << j.dump() << '\n';
  }
  if (!f) throw std::runtime_error("error writing trace file: " + path);
}

}  // namespace dopf
