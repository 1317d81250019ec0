#pragma once

#include <Eigen/Dense>

namespace dopf {

// min 0.5 x'Px + q'x  s.t.  Ax = b, Gx <= h.  P must be symmetric PSD.
struct QpProblem {
  Eigen::MatrixXd P;
  Eigen::VectorXd q;
  Eigen::MatrixXd A;
  Eigen::VectorXd b;
  Eigen::MatrixXd G;
  Eigen::VectorXd h;
};

enum class QpStatus { Optimal, Infeasible, MaxIter };

struct KktResiduals {
  double stationarity = 0.0;    // ||Px + q + A'nu + G'lambda||_inf
  double primal_eq = 0.0;       // ||Ax - b||_inf
  double primal_ineq = 0.0;     // ||max(Gx - h, 0)||_inf
  double complementarity = 0.0; // ||lambda .* (Gx - h)||_inf
  double max() const;
};

struct QpSolution {
  Eigen::VectorXd x;
  Eigen::VectorXd nu;      // equality multipliers
  Eigen::VectorXd lambda;  // inequality multipliers, >= 0 up to tolerance
  QpStatus status = QpStatus::MaxIter;
  KktResiduals kkt;
  int iterations = 0;
  bool p_regularized = false;  // P needed +1e-10*I to factor
};

struct QpOptions {
  double tol = 1e-9;
  int max_iter = 100;
};

// Dense Mehrotra predictor-corrector interior point; deterministic.
// Throws std::invalid_argument on dimension mismatch, asymmetric or
// non-PSD P.
QpSolution solve_qp(const QpProblem& prob, const QpOptions& opts = {});

KktResiduals kkt_residuals(const QpProblem& prob, const Eigen::VectorXd& x,
                           const Eigen::VectorXd& nu,
                           const Eigen::VectorXd& lambda);

}  // namespace dopf
