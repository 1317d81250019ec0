#include "dopf/qp.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace dopf {

double KktResiduals::max() const {
  return std::max(std::max(stationarity, primal_eq),
                  std::max(primal_ineq, complementarity));
}

KktResiduals kkt_residuals(const QpProblem& prob, const Eigen::VectorXd& x,
                           const Eigen::VectorXd& nu,
                           const Eigen::VectorXd& lambda) {
  KktResiduals r;
  Eigen::VectorXd grad = prob.P * x + prob.q;
  if (prob.A.rows() > 0) grad += prob.A.transpose() * nu;
  if (prob.G.rows() > 0) grad += prob.G.transpose() * lambda;
  r.stationarity = grad.size() ? grad.cwiseAbs().maxCoeff() : 0.0;
  if (prob.A.rows() > 0)
    r.primal_eq = (prob.A * x - prob.b).cwiseAbs().maxCoeff();
  if (prob.G.rows() > 0) {
    Eigen::VectorXd gap = prob.G * x - prob.h;
    r.primal_ineq = gap.cwiseMax(0.0).maxCoeff();
    r.complementarity = (lambda.array() * gap.array()).abs().maxCoeff();
  }
  return r;
}

namespace {

// In-place unpivoted LDL^T, lower triangle; D on the diagonal. The caller
// guarantees quasidefiniteness through regularization.
bool ldlt_factor(Eigen::MatrixXd& K) {
  const int n = static_cast<int>(K.rows());
  for (int j = 0; j < n; ++j) {
    const int m = n - j - 1;
    double d = K(j, j);
    for (int k = 0; k < j; ++k) {
      const double ljk_dk = K(j, k) * K(k, k);
      d -= K(j, k) * ljk_dk;
      if (m > 0) K.col(j).tail(m).noalias() -= K.col(k).tail(m) * ljk_dk;
    }
    if (d == 0.0 || !std::isfinite(d)) return false;
    K(j, j) = d;
    if (m > 0) K.col(j).tail(m) /= d;
  }
  return true;
}

void ldlt_solve(const Eigen::MatrixXd& K, Eigen::VectorXd& x) {
  const int n = static_cast<int>(K.rows());
  for (int j = 0; j < n; ++j) {
    const int m = n - j - 1;
    if (m > 0) x.tail(m).noalias() -= K.col(j).tail(m) * x(j);
  }
  for (int j = 0; j < n; ++j) x(j) /= K(j, j);
  for (int j = n - 1; j >= 0; --j) {
    const int m = n - j - 1;
    if (m > 0) x(j) -= K.col(j).tail(m).dot(x.tail(m));
  }
}

// KKT operator of the *unregularized* system, used for refinement:
//   [P  A' G'] [x]   [P x + A'nu + G'lam]
//   [A  0  0 ] [nu] = [A x               ]
//   [G  0  -D] [lam]  [G x - D lam       ]
Eigen::VectorXd apply_kkt(const QpProblem& p, const Eigen::VectorXd& dvec,
                          const Eigen::VectorXd& sol) {
  const int n = static_cast<int>(p.P.rows());
  const int me = static_cast<int>(p.A.rows());
  const int mi = static_cast<int>(p.G.rows());
  Eigen::VectorXd out(n + me + mi);
  Eigen::VectorXd x = sol.head(n);
  out.head(n) = p.P * x;
  if (me > 0) {
    out.head(n) += p.A.transpose() * sol.segment(n, me);
    out.segment(n, me) = p.A * x;
  }
  if (mi > 0) {
    Eigen::VectorXd lam = sol.tail(mi);
    out.head(n) += p.G.transpose() * lam;
    out.tail(mi) = p.G * x - dvec.cwiseProduct(lam);
  }
  return out;
}

struct KktSolver {
  const QpProblem& p;
  int n, me, mi, dim;
  Eigen::MatrixXd K;
  Eigen::VectorXd dvec;

  explicit KktSolver(const QpProblem& prob)
      : p(prob),
        n(static_cast<int>(prob.P.rows())),
        me(static_cast<int>(prob.A.rows())),
        mi(static_cast<int>(prob.G.rows())),
        dim(n + me + mi) {
    K.resize(dim, dim);
    dvec = Eigen::VectorXd::Zero(mi);
  }

  // lower triangle only; +delta on the primal block, -delta on the duals
  // makes K quasidefinite. delta escalates on pivot breakdown; iterative
  // refinement against the unregularized operator absorbs the perturbation.
  bool factor(const Eigen::VectorXd& d) {
    dvec = d;
    for (double delta = 1e-8; delta <= 1e-2; delta *= 100.0) {
      K.setZero();
      K.topLeftCorner(n, n) = p.P;
      K.topLeftCorner(n, n).diagonal().array() += delta;
      if (me > 0) K.block(n, 0, me, n) = p.A;
      if (mi > 0) K.block(n + me, 0, mi, n) = p.G;
      for (int i = 0; i < me; ++i) K(n + i, n + i) = -delta;
      for (int i = 0; i < mi; ++i) K(n + me + i, n + me + i) = -(d(i) + delta);
      if (ldlt_factor(K)) return true;
    }
    return false;
  }

  Eigen::VectorXd solve(const Eigen::VectorXd& rhs) const {
    Eigen::VectorXd sol = rhs;
    ldlt_solve(K, sol);
    const double scale = 1.0 + rhs.cwiseAbs().maxCoeff();
    for (int pass = 0; pass < 5; ++pass) {
      Eigen::VectorXd r = rhs - apply_kkt(p, dvec, sol);
      if (r.cwiseAbs().maxCoeff() <= 1e-14 * scale) break;
      ldlt_solve(K, r);
      sol += r;
    }
    return sol;
  }
};

void validate_problem(const QpProblem& prob) {
  const auto n = prob.P.rows();
  if (prob.P.cols() != n || prob.q.size() != n)
    throw std::invalid_argument("solve_qp: P/q dimension mismatch");
  if (prob.A.rows() != prob.b.size() ||
      (prob.A.rows() > 0 && prob.A.cols() != n))
    throw std::invalid_argument("solve_qp: A/b dimension mismatch");
  if (prob.G.rows() != prob.h.size() ||
      (prob.G.rows() > 0 && prob.G.cols() != n))
    throw std::invalid_argument("solve_qp: G/h dimension mismatch");

  const double scale = n > 0 ? 1.0 + prob.P.cwiseAbs().maxCoeff() : 1.0;
  if (n > 0 && (prob.P - prob.P.transpose()).cwiseAbs().maxCoeff() >
                   1e-9 * scale)
    throw std::invalid_argument("solve_qp: P is not symmetric");

  // PSD to tolerance: robust LDLT first, eigenvalues as the fallback
  if (n > 0) {
    Eigen::LDLT<Eigen::MatrixXd> ldlt(prob.P);
    bool ok = ldlt.info() == Eigen::Success &&
              ldlt.vectorD().minCoeff() >= -1e-9 * scale;
    if (!ok) {
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(prob.P,
                                                        Eigen::EigenvaluesOnly);
      if (es.info() != Eigen::Success ||
          es.eigenvalues().minCoeff() < -1e-9 * scale)
        throw std::invalid_argument("solve_qp: P is not positive semidefinite");
    }
  }
}

double step_to_boundary(const Eigen::VectorXd& v, const Eigen::VectorXd& dv) {
  double alpha = 1.0;
  for (int i = 0; i < v.size(); ++i)
    if (dv(i) < 0.0) alpha = std::min(alpha, -v(i) / dv(i));
  return alpha;
}

QpSolution solve_equality_only(QpProblem prob, const QpOptions& opts) {
  QpSolution sol;
  const int n = static_cast<int>(prob.P.rows());
  const int me = static_cast<int>(prob.A.rows());
  sol.lambda.resize(0);

  for (int attempt = 0; attempt < 2; ++attempt) {
    KktSolver kkt(prob);
    if (!kkt.factor(Eigen::VectorXd())) {
      prob.P.diagonal().array() += 1e-10;
      sol.p_regularized = true;
      continue;
    }
    Eigen::VectorXd rhs(n + me);
    rhs.head(n) = -prob.q;
    rhs.tail(me) = prob.b;
    Eigen::VectorXd xy = kkt.solve(rhs);
    sol.x = xy.head(n);
    sol.nu = xy.tail(me);
    sol.iterations = 1;
    sol.kkt = kkt_residuals(prob, sol.x, sol.nu, sol.lambda);
    if (sol.kkt.max() <= opts.tol)
      sol.status = QpStatus::Optimal;
    else if (sol.kkt.primal_eq > 1e-6)
      sol.status = QpStatus::Infeasible;  // inconsistent equalities
    else
      sol.status = QpStatus::MaxIter;
    return sol;
  }
  sol.status = QpStatus::MaxIter;
  return sol;
}

}  // namespace

QpSolution solve_qp(const QpProblem& prob_in, const QpOptions& opts) {
  validate_problem(prob_in);
  QpProblem prob = prob_in;
  const int n = static_cast<int>(prob.P.rows());
  const int me = static_cast<int>(prob.A.rows());
  const int mi = static_cast<int>(prob.G.rows());

  if (mi == 0) return solve_equality_only(std::move(prob), opts);

  QpSolution sol;
  Eigen::VectorXd x;
  if (me > 0)
    x = prob.A.colPivHouseholderQr().solve(prob.b);  // least-squares start
  else
    x = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd nu = Eigen::VectorXd::Zero(me);
  Eigen::VectorXd lam = Eigen::VectorXd::Ones(mi);
  Eigen::VectorXd s = Eigen::VectorXd::Ones(mi);

  KktSolver kkt(prob);
  double best = std::numeric_limits<double>::infinity();
  double mu0 = 1.0;
  double pinf_slow = std::numeric_limits<double>::infinity();
  int stall = 0;

  for (int it = 0; it < opts.max_iter; ++it) {
    sol.iterations = it;
    KktResiduals res = kkt_residuals(prob, x, nu, lam);
    if (res.max() < best) {
      best = res.max();
      sol.x = x;
      sol.nu = nu;
      sol.lambda = lam;
      sol.kkt = res;
    }
    if (res.max() <= opts.tol) {
      sol.status = QpStatus::Optimal;
      return sol;
    }

    const double mu = s.dot(lam) / mi;
    if (it == 0) mu0 = mu;
    const double pinf = std::max(res.primal_eq, res.primal_ineq);

    // infeasibility heuristics: exploding duals or a collapsed barrier
    // while the primal residual has stopped improving
    if (it >= 10) {
      const bool stuck = pinf > 0.5 * pinf_slow && pinf > 10.0 * opts.tol;
      if (stuck && lam.lpNorm<1>() > 1e8 * (1.0 + mi)) {
        sol.status = QpStatus::Infeasible;
        return sol;
      }
      if (stuck && mu < 1e-10 * mu0) {
        sol.status = QpStatus::Infeasible;
        return sol;
      }
      if (stall >= 8 && pinf > 10.0 * opts.tol) {
        sol.status = QpStatus::Infeasible;
        return sol;
      }
    }
    if (it % 10 == 0) pinf_slow = pinf;

    Eigen::VectorXd rd = prob.P * x + prob.q + prob.G.transpose() * lam;
    if (me > 0) rd += prob.A.transpose() * nu;
    Eigen::VectorXd rp = me > 0 ? (prob.A * x - prob.b).eval()
                                : Eigen::VectorXd();
    Eigen::VectorXd ri = prob.G * x + s - prob.h;

    if (!kkt.factor(s.cwiseQuotient(lam))) {
      prob.P.diagonal().array() += 1e-10;
      sol.p_regularized = true;
      if (!kkt.factor(s.cwiseQuotient(lam))) {
        sol.status = QpStatus::MaxIter;
        return sol;
      }
    }

    Eigen::VectorXd rhs(n + me + mi);
    rhs.head(n) = -rd;
    if (me > 0) rhs.segment(n, me) = -rp;
    rhs.tail(mi) = -ri + s;  // affine: complementarity residual s.*lam

    Eigen::VectorXd daff = kkt.solve(rhs);
    Eigen::VectorXd dx_aff = daff.head(n);
    Eigen::VectorXd dlam_aff = daff.tail(mi);
    Eigen::VectorXd ds_aff = -ri - prob.G * dx_aff;

    const double a_aff = std::min(step_to_boundary(s, ds_aff),
                                  step_to_boundary(lam, dlam_aff));
    const double mu_aff =
        (s + a_aff * ds_aff).dot(lam + a_aff * dlam_aff) / mi;
    double sigma = std::pow(mu_aff / mu, 3);
    sigma = std::clamp(sigma, 0.0, 1.0);

    // corrector with Mehrotra's second-order term
    Eigen::VectorXd rc = s.cwiseProduct(lam) + ds_aff.cwiseProduct(dlam_aff) -
                         Eigen::VectorXd::Constant(mi, sigma * mu);
    rhs.tail(mi) = -ri + rc.cwiseQuotient(lam);
    Eigen::VectorXd d = kkt.solve(rhs);
    Eigen::VectorXd dx = d.head(n);
    Eigen::VectorXd dnu = me > 0 ? d.segment(n, me).eval() : Eigen::VectorXd();
    Eigen::VectorXd dlam = d.tail(mi);
    Eigen::VectorXd ds = -ri - prob.G * dx;

    const double ap = std::min(1.0, 0.99 * step_to_boundary(s, ds));
    const double ad = std::min(1.0, 0.99 * step_to_boundary(lam, dlam));
    stall = (ap < 1e-8 && ad < 1e-8) ? stall + 1 : 0;

    x += ap * dx;
    s += ap * ds;
    if (me > 0) nu += ad * dnu;
    lam += ad * dlam;
  }

  KktResiduals res = kkt_residuals(prob, x, nu, lam);
  if (res.max() < best) {
    sol.x = x;
    sol.nu = nu;
    sol.lambda = lam;
    sol.kkt = res;
  }
  sol.iterations = opts.max_iter;
  sol.status =
      sol.kkt.max() <= opts.tol ? QpStatus::Optimal : QpStatus::MaxIter;
  return sol;
}

}  // namespace dopf
