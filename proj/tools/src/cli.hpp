#pragma once

#include <cmath>
#include <ostream>
#include <string>

#include "dopf/admm.hpp"
#include "dopf/network.hpp"

namespace dopf::cli {

// One resolved invocation. String-typed choices are validated by the
// argument parser; NaN / empty sentinels mean "not requested".
struct RunSpec {
  std::string case_path;

  double scale_pd = 1.0;
  double scale_qd = 1.0;
  double qgmin_mvar = std::nan("");     // applied to generator buses only
  std::string line_limit;               // none | imax | smax | pmax

  AdmmConfig cfg;
  std::string stop = "fixed";           // fixed | consensus | objective
  double theta = 0.0;
  std::string net_update = "general";   // general | average | gossip

  std::string trace_path;               // .jsonl selects JSONL, else CSV
  std::string report_path;
  bool quiet = false;

  int grid_res = 0;                     // 0 = size-based default
};

void apply_overrides(Network& net, const RunSpec& spec);

// exit codes: 0 success, 1 domain failure (invalid network, unrecoverable
// run, no feasible point), 2 input error, 3 internal error
int cmd_solve(const RunSpec& spec, std::ostream& out, std::ostream& err);
int cmd_oracle(const RunSpec& spec, std::ostream& out, std::ostream& err);
int cmd_validate(const RunSpec& spec, std::ostream& out, std::ostream& err);

int run_cli(int argc, const char* const* argv);

}  // namespace dopf::cli
