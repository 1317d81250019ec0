#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

#include "dopf/network.hpp"

namespace dopf {

// Approximate-KKT quality of a consensus point. delta and epsilon follow
// the averaged squared-residual definitions; a and b are the normalizing
// lengths (a = sum of 2|N_k|, b = total primal variable count).
struct KktReport {
  double delta = 0.0;
  double epsilon = 0.0;
  double delta_bar = 0.0;  // sum_k ||v_k - E_k v||^2
  double a = 0.0;
  double b = 0.0;
  double rho = 0.0;
  std::vector<double> per_bus_delta_sq;
};

KktReport kkt_delta_epsilon(const std::vector<LocalProblem>& lps,
                            const std::vector<Eigen::VectorXd>& z,
                            const Eigen::VectorXd& v, double rho);

// Residuals of the centralized formulation at the assembled global point
// (net voltages + per-bus copies of everything else). Equation families
// are infinity norms; bound families are clamped violations (quadratic
// families in squared units).
struct FeasibilityReport {
  double current_injection = 0.0;  // i = Yv
  double power_balance = 0.0;      // p + jq = pg - pd + j(qg - qd)
  double line_current = 0.0;       // i_ls = y_ls (v_l - v_s)
  double power_injection = 0.0;    // p + jq = v conj(i)
  double line_power = 0.0;         // p_ls + j q_ls = v_l conj(i_ls)
  double pg_bounds = 0.0;
  double qg_bounds = 0.0;
  double current_limit = 0.0;
  double apparent_limit = 0.0;
  double line_p_limit = 0.0;
  double voltage_bounds = 0.0;
  double max() const;
};

FeasibilityReport evaluate_centralized_feasibility(
    const Network& net, const std::vector<LocalProblem>& lps,
    const std::vector<Eigen::VectorXd>& z, const Eigen::VectorXd& v);

// Total generation cost [$/h] from the pg entries of the copies.
double objective_value(const Network& net,
                       const std::vector<Eigen::VectorXd>& z);

double relative_objective(double obj, double reference);

std::string kkt_report_json(const KktReport& r);
std::string feasibility_report_json(const FeasibilityReport& r);

}  // namespace dopf
