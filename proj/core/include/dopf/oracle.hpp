#pragma once

#include <Eigen/Dense>

#include "dopf/network.hpp"

namespace dopf {

struct GridOracleResult {
  bool feasible_found = false;
  double objective = 0.0;       // $/h
  Eigen::VectorXd v;            // best point, (re block, im block)
  Eigen::VectorXd pg, qg;       // per-unit
  long long evaluated = 0;      // grid points visited
};

// Brute-force reference: exhaustive voltage grid, everything else forward
// computed. Global phase freedom is removed by pinning bus 0 to v_im = 0,
// v_re in [v_min, v_max]; other buses sweep (v_re, v_im) squares. Intended
// for N <= 3.
GridOracleResult grid_oracle(const Network& net, int points_per_axis);

}  // namespace dopf
