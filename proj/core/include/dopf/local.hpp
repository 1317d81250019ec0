#pragma once

#include <array>
#include <vector>

#include <Eigen/Dense>

#include "dopf/network.hpp"
#include "dopf/qp.hpp"

namespace dopf {

// Index layout of a bus-local variable vector
//   (pg, qg, p, q, i_re, i_im,
//    v_re[|N|], v_im[|N|], li_re[|N|-1], li_im[|N|-1], lp[|N|-1], lq[|N|-1]).
// Neighbor components are ordered self-first, then ascending bus id; all
// slicing goes through these helpers.
struct LocalVars {
  int nn;  // |N|

  explicit LocalVars(int n_neighbors) : nn(n_neighbors) {}

  int deg() const { return nn - 1; }
  int len() const { return 6 + 2 * nn + 4 * deg(); }

  int pg() const { return 0; }
  int qg() const { return 1; }
  int p() const { return 2; }
  int q() const { return 3; }
  int i_re() const { return 4; }
  int i_im() const { return 5; }
  int v_re(int r) const { return 6 + r; }            // r in [0, nn)
  int v_im(int r) const { return 6 + nn + r; }       // r in [0, nn)
  int li_re(int r) const { return 6 + 2 * nn + r; }  // r in [0, deg)
  int li_im(int r) const { return 6 + 2 * nn + deg() + r; }
  int lp(int r) const { return 6 + 2 * nn + 2 * deg() + r; }
  int lq(int r) const { return 6 + 2 * nn + 3 * deg() + r; }

  // the (v_re; v_im) slice as one segment of length 2|N|
  int v_begin() const { return 6; }
  int v_len() const { return 2 * nn; }
};

// Halfspace a*x + b*y {>=,<=} c in one complex-component plane; the sense
// is fixed by the producing operation (donut cuts >=, circle cuts <=).
struct Halfspace {
  double a = 0.0;
  double b = 0.0;
  double c = 0.0;
};

// Inner halfspace of the voltage donut, tangent to the v_min circle at the
// radial projection of (re, im). Throws std::domain_error at the origin.
Halfspace donut_halfspace(double re, double im, double v_min);

// Outer cut for a circle x^2 + y^2 <= radius^2, tangent at the radial
// projection of the violating point (re, im); sense <=.
Halfspace outer_cut(double re, double im, double radius);

// Regular octagon circumscribing the radius circle, tangent at angles
// k*pi/4; sense <=. Vertices sit at radius/cos(pi/8).
std::array<Halfspace, 8> initial_octagon(double radius);

// zhat from the net voltages: v copies are E_k v, everything else follows
// from the affine and bilinear defining equations.
Eigen::VectorXd initialize_zhat(const LocalProblem& lp,
                                const Eigen::VectorXd& v_net);

// First-order rows of the bus power-injection equations at zhat, as
// equality rows Az = b (2 rows: real then reactive).
void linearize_power_injection(const LocalProblem& lp,
                               const Eigen::VectorXd& zhat,
                               Eigen::MatrixXd& A, Eigen::VectorXd& b);

// Same for the per-line power equations (2*(|N|-1) rows).
void linearize_line_power(const LocalProblem& lp, const Eigen::VectorXd& zhat,
                          Eigen::MatrixXd& A, Eigen::VectorXd& b);

enum class InnerStatus { Ok, Infeasible, CutCapExceeded };

// Multiplier packing of the convex subproblem:
//   [affine equalities | linearized injection | linearized line power |
//    box rows | flow-circle cuts | donut cuts | voltage outer cuts].
// Box bounds with lower == upper are solved as equality rows; their
// (unrestricted) multipliers still occupy the box slot.
struct DualLayout {
  int n_alpha = 0;
  int n_inj = 0;
  int n_line = 0;
  int n_box = 0;
  int n_flow_cuts = 0;
  int n_donut = 0;
  int n_outer = 0;
  int total() const {
    return n_alpha + n_inj + n_line + n_box + n_flow_cuts + n_donut + n_outer;
  }
};

struct InnerResult {
  Eigen::VectorXd z;
  Eigen::VectorXd u;  // packed per DualLayout
  DualLayout layout;
  InnerStatus status = InnerStatus::Ok;
  int cut_rounds = 0;
  QpProblem qp;        // final assembled subproblem
  QpSolution qp_sol;   // its solution
};

struct SubOptions {
  double eps_sub = 1e-10;
  int max_sub_iter = 20;
  double qp_tol = 1e-9;
  int max_cut_rounds = 50;
  double circle_tol = 1e-8;  // quadratic-violation tolerance for cuts
};

// Cutting-plane loop for one linearization point: octagon initialization of
// every circle, then one tangent cut per violated circle and re-solve.
InnerResult solve_convex_inner(const LocalProblem& lp,
                               const Eigen::VectorXd& zhat,
                               const Eigen::VectorXd& y,
                               const Eigen::VectorXd& v_target, double rho,
                               const std::vector<Halfspace>& donut_cuts,
                               const SubOptions& opts);

enum class SubStatus { ConvergedEps, StoppedMaxIter, Infeasible };

struct SubproblemResult {
  Eigen::VectorXd z;
  Eigen::VectorXd u;
  DualLayout layout;
  SubStatus status = SubStatus::Infeasible;
  int inner_iterations = 0;  // linearization refinements performed
  double df = 0.0;           // degree of feasibility [MVA]
  InnerResult last_inner;
};

// Successive approximation around the current net point: donut cuts are
// built once per call from E_k v_net, zhat is refreshed after every inner
// solve until the voltage decrement drops below eps_sub or the refinement
// budget runs out.
SubproblemResult run_algorithm2(const LocalProblem& lp,
                                const Eigen::VectorXd& y,
                                const Eigen::VectorXd& v_net, double rho,
                                const SubOptions& opts);

// Distance in MVA from the bus power injection (p, q) to the box of
// demand-shifted generation bounds.
double degree_of_feasibility(const LocalProblem& lp, const Eigen::VectorXd& z);

}  // namespace dopf
