#include "pseudoreg/gee.hpp"

#include "pseudoreg/error.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>

namespace pseudoreg {

LinkValue link_eval(Link link, double x) {
  switch (link) {
    case Link::identity:
      return {x, 1.0, 0.0};
    case Link::logit: {
      const double e = std::exp(-std::abs(x));
      const double p = 1.0 / (1.0 + e);  // sigma(|x|)
      const double mu = x >= 0.0 ? p : e / (1.0 + e);
      const double d1 = e / ((1.0 + e) * (1.0 + e));
      return {mu, d1, d1 * (1.0 - 2.0 * mu)};
    }
    case Link::cloglog: {
      const double ex = std::exp(x);
      if (!std::isfinite(ex)) return {1.0, 0.0, 0.0};
      const double d1 = std::exp(x - ex);
      return {-std::expm1(-ex), d1, d1 * (1.0 - ex)};
    }
  }
  return {};
}

double link_transform(Link link, double mu) {
  switch (link) {
    case Link::identity:
      return mu;
    case Link::logit:
      return std::log(mu / (1.0 - mu));
    case Link::cloglog:
      return std::log(-std::log1p(-mu));
  }
  return 0.0;
}

MuGradient mu_eval(const MeanModel& model, const Eigen::VectorXd& beta, const Eigen::VectorXd& z) {
  const LinkValue lv = link_eval(model.link, beta.dot(z));
  return {lv.mu, lv.d1 * z};
}

namespace {

double weight_at(const Eigen::VectorXd& w, Eigen::Index k) { return w.size() == 0 ? 1.0 : w[k]; }

void check_shapes(const Eigen::MatrixXd& X, const Eigen::VectorXd& theta, const Eigen::VectorXd& w) {
  if (theta.size() != X.rows()) throw std::invalid_argument("response length differs from design rows");
  if (w.size() != 0 && w.size() != X.rows()) throw std::invalid_argument("weight length differs from design rows");
}

}  // namespace

EstimatingEquation estimating_fn(const MeanModel& model, const Eigen::VectorXd& beta, const Eigen::MatrixXd& X,
                                 const Eigen::VectorXd& theta, const Eigen::VectorXd& weights) {
  check_shapes(X, theta, weights);
  const Eigen::VectorXd eta = X * beta;
  Eigen::VectorXd cu(X.rows()), cj(X.rows());
  for (Eigen::Index k = 0; k < X.rows(); ++k) {
    const double w = weight_at(weights, k);
    if (w == 0.0) {
      cu[k] = cj[k] = 0.0;
      continue;
    }
    const LinkValue lv = link_eval(model.link, eta[k]);
    const double r = theta[k] - lv.mu;
    // A = a_scale * z; dA/dbeta = a_slope * z z^T.
    const double a_scale = model.a_kind == AKind::dmu ? lv.d1 : 1.0;
    const double a_slope = model.a_kind == AKind::dmu ? lv.d2 : 0.0;
    cu[k] = w * a_scale * r;
    cj[k] = w * (a_slope * r - a_scale * lv.d1);
  }
  EstimatingEquation eq;
  eq.U.noalias() = X.transpose() * cu;
  eq.J.noalias() = X.transpose() * cj.asDiagonal() * X;
  return eq;
}

Eigen::VectorXd initial_beta(const MeanModel& model, const Eigen::MatrixXd& X, const Eigen::VectorXd& theta,
                             const Eigen::VectorXd& weights) {
  Eigen::VectorXd beta = Eigen::VectorXd::Zero(X.cols());
  if (X.cols() == 0 || !(X.col(0).array() == 1.0).all()) return beta;
  double sw = 0.0, swt = 0.0;
  for (Eigen::Index k = 0; k < X.rows(); ++k) {
    const double w = weight_at(weights, k);
    sw += w;
    swt += w * theta[k];
  }
  double mean = sw > 0.0 ? swt / sw : 0.5;
  if (model.link != Link::identity) mean = std::clamp(mean, 0.02, 0.98);
  beta[0] = link_transform(model.link, mean);
  return beta;
}

bool full_column_rank(const Eigen::MatrixXd& X, const Eigen::VectorXd& weights) {
  const Eigen::Index q = X.cols();
  if (q == 0) return false;
  Eigen::MatrixXd Xw(X.rows(), q);
  Eigen::Index support = 0;
  for (Eigen::Index k = 0; k < X.rows(); ++k) {
    const double w = weight_at(weights, k);
    if (w <= 0.0) continue;
    Xw.row(support++) = std::sqrt(w) * X.row(k);
  }
  if (support < q) return false;
  // R from a thin QR has the singular values of Xw at O(n q^2) cost.
  const Eigen::HouseholderQR<Eigen::MatrixXd> qr(Xw.topRows(support));
  const Eigen::MatrixXd R = qr.matrixQR().topRows(q).triangularView<Eigen::Upper>();
  const Eigen::JacobiSVD<Eigen::MatrixXd> svd(R);
  const auto& sv = svd.singularValues();
  return sv[0] > 0.0 && sv[q - 1] > 1e-10 * sv[0];
}

namespace {

double scaled_residual(const Eigen::VectorXd& U, double n) { return U.size() ? U.cwiseAbs().maxCoeff() / n : 0.0; }

// Newton direction, with one ridge attempt if J is numerically singular.
bool newton_direction(const Eigen::MatrixXd& J, const Eigen::VectorXd& U, Eigen::VectorXd& delta) {
  Eigen::FullPivLU<Eigen::MatrixXd> lu(J);
  if (lu.isInvertible()) {
    delta = -lu.solve(U);
    if (delta.allFinite()) return true;
  }
  const double ridge = 1e-8 * J.trace() / static_cast<double>(J.rows());
  if (ridge == 0.0 || !std::isfinite(ridge)) return false;
  const Eigen::MatrixXd Jr = J + ridge * Eigen::MatrixXd::Identity(J.rows(), J.cols());
  lu.compute(Jr);
  if (!lu.isInvertible()) return false;
  delta = -lu.solve(U);
  return delta.allFinite();
}

}  // namespace

NewtonResult newton_solve(const MeanModel& model, const Eigen::MatrixXd& X, const Eigen::VectorXd& theta,
                          const Eigen::VectorXd& weights, const std::optional<Eigen::VectorXd>& init,
                          const NewtonOptions& options) {
  check_shapes(X, theta, weights);
  const double n = static_cast<double>(X.rows());
  NewtonResult res;
  res.beta = init ? *init : initial_beta(model, X, theta, weights);
  if (res.beta.size() != X.cols()) throw std::invalid_argument("initial value has the wrong dimension");

  EstimatingEquation eq = estimating_fn(model, res.beta, X, theta, weights);
  res.residual_norm = scaled_residual(eq.U, n);
  for (res.iterations = 0; res.iterations < options.max_iterations; ++res.iterations) {
    if (!std::isfinite(res.residual_norm)) {
      res.failure = "non-finite estimating function";
      return res;
    }
    if (res.residual_norm < options.tolerance) break;
    Eigen::VectorXd delta;
    if (!newton_direction(eq.J, eq.U, delta)) {
      res.failure = "singular Jacobian";
      return res;
    }
    const double norm0 = eq.U.norm();
    double t = 1.0;
    bool accepted = false;
    Eigen::VectorXd trial;
    EstimatingEquation trial_eq;
    for (int h = 0; h <= options.max_halvings; ++h, t *= 0.5) {
      trial = res.beta + t * delta;
      trial_eq = estimating_fn(model, trial, X, theta, weights);
      const double norm1 = trial_eq.U.norm();
      if (std::isfinite(norm1) && norm1 < norm0) {
        accepted = true;
        break;
      }
    }
    if (!accepted) {
      res.failure = "step halving failed to reduce the estimating function";
      return res;
    }
    res.beta = trial;
    eq = std::move(trial_eq);
    res.residual_norm = scaled_residual(eq.U, n);
    if ((t * delta).cwiseAbs().maxCoeff() < options.step_tolerance) {
      ++res.iterations;
      break;
    }
  }
  res.converged = res.residual_norm <= options.tolerance;
  if (!res.converged && res.failure.empty())
    res.failure = res.iterations >= options.max_iterations ? "iteration limit reached"
                                                           : "step size vanished before the residual did";
  return res;
}

Eigen::MatrixXd m_hat(const MeanModel& model, const Eigen::VectorXd& beta, const Eigen::MatrixXd& X,
                      const Eigen::VectorXd& weights) {
  const Eigen::Index q = X.cols();
  const Eigen::VectorXd eta = X * beta;
  Eigen::VectorXd c(X.rows());
  for (Eigen::Index k = 0; k < X.rows(); ++k) {
    const double w = weight_at(weights, k);
    if (w == 0.0) {
      c[k] = 0.0;
      continue;
    }
    const LinkValue lv = link_eval(model.link, eta[k]);
    const double a_scale = model.a_kind == AKind::dmu ? lv.d1 : 1.0;
    c[k] = w * a_scale * lv.d1;
  }
  Eigen::MatrixXd M(q, q);
  M.noalias() = X.transpose() * c.asDiagonal() * X;
  return M / static_cast<double>(X.rows());
}

FitResult solve(const MeanModel& model, const Eigen::MatrixXd& X, const PseudoValues& pseudo,
                const Eigen::VectorXd& weights, const std::optional<Eigen::VectorXd>& init,
                const NewtonOptions& options) {
  if (X.cols() > X.rows()) throw DesignError("more parameters than observations");
  if (!full_column_rank(X, weights)) throw DesignError("design matrix is not of full column rank");
  const NewtonResult nr = newton_solve(model, X, pseudo.values, weights, init, options);
  if (!nr.converged) throw NonConvergenceError(nr.failure, {nr.beta.data(), nr.beta.data() + nr.beta.size()});
  FitResult fit;
  fit.model = model;
  fit.beta_hat = nr.beta;
  fit.m_hat = m_hat(model, nr.beta, X, weights);
  fit.pseudo = pseudo;
  fit.iterations = nr.iterations;
  fit.converged = true;
  fit.residual_norm = nr.residual_norm;
  return fit;
}

}  // namespace pseudoreg
