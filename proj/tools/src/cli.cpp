#include "cli.hpp"

#include <cstdio>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>
#include <json.hpp>

#include "dopf/diagnostics.hpp"
#include "dopf/oracle.hpp"
#include "dopf/parse.hpp"

namespace dopf::cli {

void apply_overrides(Network& net, const RunSpec& spec) {
  for (Bus& bus : net.buses) {
    bus.pd *= spec.scale_pd;
    bus.qd *= spec.scale_qd;
    if (!std::isnan(spec.qgmin_mvar) && bus.cost)
      bus.qg_min = spec.qgmin_mvar / net.base_mva;
  }
  if (spec.line_limit.empty()) return;
  for (Line& ln : net.lines) {
    if (spec.line_limit == "none") {
      ln.i_max.reset();
      ln.s_max.reset();
      ln.p_max.reset();
    } else if (spec.line_limit == "imax") {
      if (ln.s_max && !ln.i_max) ln.i_max = *ln.s_max;
      ln.s_max.reset();
      ln.p_max.reset();
    } else if (spec.line_limit == "smax") {
      ln.i_max.reset();
      ln.p_max.reset();
    } else if (spec.line_limit == "pmax") {
      if (ln.s_max && !ln.p_max) ln.p_max = *ln.s_max;
      ln.s_max.reset();
      ln.i_max.reset();
    }
  }
}

namespace {

int report_violations(const std::vector<Violation>& violations,
                      std::ostream& err) {
  for (const Violation& v : violations) err << "violation: " << v.message << "\n";
  return 1;
}

AdmmConfig make_config(const RunSpec& spec) {
  AdmmConfig cfg = spec.cfg;
  if (spec.stop == "fixed")
    cfg.stop.kind = StopRule::Kind::FixedIters;
  else if (spec.stop == "consensus")
    cfg.stop.kind = StopRule::Kind::Consensus;
  else
    cfg.stop.kind = StopRule::Kind::Objective;
  cfg.stop.theta = spec.theta;
  if (spec.net_update == "general")
    cfg.net_update = NetUpdateMode::ExactGeneral;
  else if (spec.net_update == "average")
    cfg.net_update = NetUpdateMode::ExactAverage;
  else
    cfg.net_update = NetUpdateMode::Gossip;
  return cfg;
}

bool ends_with(const std::string& s, const std::string& suffix) {
  return s.size() >= suffix.size() &&
         s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

void emit_report(const nlohmann::ordered_json& j, const RunSpec& spec,
                 std::ostream& out) {
  out << j.dump(2) << "\n";
  if (!spec.report_path.empty()) {
    std::ofstream f(spec.report_path);
    if (!f) throw std::runtime_error("cannot open report file: " +
                                     spec.report_path);
    f << j.dump(2) << "\n";
  }
}

}  // namespace

int cmd_solve(const RunSpec& spec, std::ostream& out, std::ostream& err) {
  Network net = parse_case_file(spec.case_path);
  apply_overrides(net, spec);
  const std::vector<Violation> violations = validate(net);
  if (!violations.empty()) return report_violations(violations, err);

  const AdmmConfig cfg = make_config(spec);
  IterObserver observer;
  if (!spec.quiet) {
    const int total = cfg.max_admm_iters;
    observer = [&err, total](const IterRecord& rec) {
      if (rec.iter % 100 != 0 && rec.iter != total && rec.iter != 1) return;
      char buf[256];
      std::snprintf(buf, sizeof buf,
                    "iter %d/%d  objective %.10g  delta %.4g  epsilon %.4g\n",
                    rec.iter, total, rec.objective, rec.delta, rec.epsilon);
      err << buf;
    };
  }

  const AdmmResult result = run_admm(net, cfg, observer);

  if (!spec.trace_path.empty()) {
    if (ends_with(spec.trace_path, ".jsonl"))
      write_trace_jsonl(spec.trace_path, result.trace);
    else
      write_trace_csv(spec.trace_path, result.trace);
  }

  const KktReport kkt = kkt_delta_epsilon(result.locals, result.state.z,
                                          result.state.v, cfg.rho);
  const FeasibilityReport feas = evaluate_centralized_feasibility(
      net, result.locals, result.state.z, result.state.v);

  nlohmann::ordered_json j{
      {"case", spec.case_path},
      {"buses", net.n_buses()},
      {"lines", static_cast<int>(net.lines.size())},
      {"rho", cfg.rho},
      {"iterations", result.iterations},
      {"stop_reason", result.stop_reason},
      {"unrecoverable", result.unrecoverable},
      {"objective", objective_value(net, result.state.z)},
      {"worst_df", result.worst_df},
      {"sub_eps_total", result.sub_eps_total},
      {"sub_maxiter_total", result.sub_maxiter_total},
      {"sub_infeasible_total", result.sub_infeasible_total},
      {"kkt", nlohmann::ordered_json::parse(kkt_report_json(kkt))},
      {"feasibility",
       nlohmann::ordered_json::parse(feasibility_report_json(feas))}};
  emit_report(j, spec, out);
  return result.unrecoverable ? 1 : 0;
}

int cmd_oracle(const RunSpec& spec, std::ostream& out, std::ostream& err) {
  Network net = parse_case_file(spec.case_path);
  apply_overrides(net, spec);
  const std::vector<Violation> violations = validate(net);
  if (!violations.empty()) return report_violations(violations, err);

  int res = spec.grid_res;
  if (res <= 0) {
    if (net.n_buses() <= 2)
      res = 400;
    else if (net.n_buses() == 3)
      res = 24;
    else {
      err << "error: --grid-res is required for networks larger than 3 "
             "buses\n";
      return 2;
    }
  }

  const GridOracleResult result = grid_oracle(net, res);
  nlohmann::ordered_json j{{"case", spec.case_path},
                           {"grid_res", res},
                           {"feasible_found", result.feasible_found},
                           {"evaluated", result.evaluated},
                           {"objective", result.objective}};
  if (result.feasible_found) {
    const int nb = net.n_buses();
    j["v_re"] = std::vector<double>(result.v.data(), result.v.data() + nb);
    j["v_im"] =
        std::vector<double>(result.v.data() + nb, result.v.data() + 2 * nb);
    j["pg"] = std::vector<double>(result.pg.data(), result.pg.data() + nb);
    j["qg"] = std::vector<double>(result.qg.data(), result.qg.data() + nb);
  }
  emit_report(j, spec, out);
  return result.feasible_found ? 0 : 1;
}

int cmd_validate(const RunSpec& spec, std::ostream& out, std::ostream& err) {
  const Network net = parse_case_file(spec.case_path);
  const std::vector<Violation> violations = validate(net);
  if (!violations.empty()) return report_violations(violations, err);
  nlohmann::ordered_json j{{"case", spec.case_path},
                           {"buses", net.n_buses()},
                           {"lines", static_cast<int>(net.lines.size())},
                           {"ok", true}};
  out << j.dump(2) << "\n";
  return 0;
}

int run_cli(int argc, const char* const* argv) {
  CLI::App app{"consensus solver for AC optimal power flow"};
  app.require_subcommand(1);
  RunSpec spec;

  auto add_case = [&spec](CLI::App* sub) {
    sub->add_option("--case", spec.case_path, "case file (.m or .json)")
        ->required();
  };
  auto add_overrides = [&spec](CLI::App* sub) {
    sub->add_option("--scale-pd", spec.scale_pd,
                    "scale every active power demand");
    sub->add_option("--scale-qd", spec.scale_qd,
                    "scale every reactive power demand");
    sub->add_option("--qgmin-override", spec.qgmin_mvar,
                    "reactive lower bound for all generator buses [MVAr]");
    sub->add_option("--line-limit", spec.line_limit,
                    "line limit family to enforce")
        ->check(CLI::IsMember({"none", "imax", "smax", "pmax"}));
  };

  CLI::App* solve = app.add_subcommand("solve", "run the consensus solver");
  add_case(solve);
  add_overrides(solve);
  solve->add_option("--rho", spec.cfg.rho, "penalty parameter");
  solve->add_option("--iters", spec.cfg.max_admm_iters,
                    "iteration budget (hard cap for every stop rule)");
  solve->add_option("--eps-sub", spec.cfg.eps_sub,
                    "local refinement decrement threshold");
  solve->add_option("--max-sub-iter", spec.cfg.max_sub_iter,
                    "local refinement budget");
  solve->add_option("--qp-tol", spec.cfg.qp_tol, "inner QP tolerance");
  solve->add_option("--stop", spec.stop, "stop rule")
      ->check(CLI::IsMember({"fixed", "consensus", "objective"}));
  solve->add_option("--theta", spec.theta, "stop rule threshold");
  solve->add_option("--net-update", spec.net_update, "net voltage update")
      ->check(CLI::IsMember({"general", "average", "gossip"}));
  solve->add_option("--gossip-rounds", spec.cfg.gossip_rounds,
                    "pairwise exchanges per component per iteration");
  solve->add_option("--seed", spec.cfg.seed, "gossip seed");
  solve->add_option("--trace", spec.trace_path,
                    "per-iteration trace file (.jsonl for JSONL, else CSV)");
  solve->add_option("--report", spec.report_path, "write the report here too");
  solve->add_flag("--quiet", spec.quiet, "suppress progress output");

  CLI::App* oracle =
      app.add_subcommand("oracle", "brute-force grid reference");
  add_case(oracle);
  add_overrides(oracle);
  oracle->add_option("--grid-res", spec.grid_res, "grid points per axis");
  oracle->add_option("--report", spec.report_path,
                     "write the report here too");

  CLI::App* validate_cmd =
      app.add_subcommand("validate", "parse and check a case file");
  add_case(validate_cmd);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (solve->parsed()) return cmd_solve(spec, std::cout, std::cerr);
    if (oracle->parsed()) return cmd_oracle(spec, std::cout, std::cerr);
    return cmd_validate(spec, std::cout, std::cerr);
  } catch (const ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
}

}  // namespace dopf::cli
