#pragma once

#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace dopf {

// Quadratic generation cost, MW units: f(pg) = c2*pg^2 + c1*pg + c0 [$/h].
struct CostPoly {
  double c2 = 0.0;
  double c1 = 0.0;
  double c0 = 0.0;
};

// All electrical quantities are per-unit on the system MVA base.
// A bus is a generator bus iff cost is set; non-generator buses must have
// all generation bounds equal to zero.
struct Bus {
  double pd = 0.0;
  double qd = 0.0;
  double pg_min = 0.0;
  double pg_max = 0.0;
  double qg_min = 0.0;
  double qg_max = 0.0;
  double v_min = 0.0;
  double v_max = 0.0;
  double gs = 0.0;  // shunt conductance to ground
  double bs = 0.0;  // shunt susceptance (line charging folded in at parse)
  std::optional<CostPoly> cost;
};

// Series admittance g + jb between two buses. Limits are per-unit and
// optional: i_max caps |i_ls|, s_max caps sqrt(p^2+q^2), p_max caps |p_ls|.
struct Line {
  int from = 0;
  int to = 0;
  double g = 0.0;
  double b = 0.0;
  std::optional<double> i_max;
  std::optional<double> s_max;
  std::optional<double> p_max;
};

struct Network {
  double base_mva = 100.0;
  std::vector<Bus> buses;
  std::vector<Line> lines;

  int n_buses() const { return static_cast<int>(buses.size()); }
};

// Y = G + jB, dense.
struct AdmittanceMatrix {
  Eigen::MatrixXd G;
  Eigen::MatrixXd B;
};

struct Violation {
  std::string message;
};

// Per-bus view used by the local subproblems. neighbors[0] is the bus
// itself, the rest follow in ascending id order; every vector/matrix row
// below is aligned with that ordering.
struct LocalProblem {
  int bus = 0;
  std::vector<int> neighbors;

  // column `bus` of G and B restricted to `neighbors`
  Eigen::VectorXd g_col;
  Eigen::VectorXd b_col;

  // line-current coefficients, one row per non-self neighbor r:
  // row r of C is g_{k,l_r} (e_1 - e_{r+1})^T, row r of D the same with b.
  Eigen::MatrixXd C;
  Eigen::MatrixXd D;

  // per-row line limits, aligned with rows of C/D
  std::vector<std::optional<double>> i_max;
  std::vector<std::optional<double>> s_max;
  std::vector<std::optional<double>> p_max;

  // local bus data
  double pd = 0.0, qd = 0.0;
  double pg_min = 0.0, pg_max = 0.0;
  double qg_min = 0.0, qg_max = 0.0;
  std::optional<CostPoly> cost;

  // voltage bounds per neighbor component (self first)
  Eigen::VectorXd v_min;
  Eigen::VectorXd v_max;

  double base_mva = 100.0;

  int n_neighbors() const { return static_cast<int>(neighbors.size()); }
  int degree() const { return n_neighbors() - 1; }
  // local variable count: 6 + 2|N| + 4(|N|-1)
  int z_len() const { return 6 + 2 * n_neighbors() + 4 * degree(); }
};

AdmittanceMatrix build_admittance(const Network& net);

LocalProblem local_problem(const Network& net, const AdmittanceMatrix& Y, int bus);

// Value-level invariant check; empty result means the network is usable.
std::vector<Violation> validate(const Network& net);

}  // namespace dopf
