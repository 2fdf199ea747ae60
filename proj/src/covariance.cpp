#include "pseudoreg/covariance.hpp"

#include "pseudoreg/error.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <sstream>

namespace pseudoreg {

std::string to_string(CovKind kind) {
  switch (kind) {
    case CovKind::hw:
      return "hw";
    case CovKind::hc3:
      return "hc3";
    case CovKind::pv:
      return "pv";
    case CovKind::bootstrap_empirical:
      return "bootstrap";
  }
  return "?";
}

Eigen::MatrixXd sandwich(const Eigen::MatrixXd& m_hat, const Eigen::MatrixXd& sigma) {
  const Eigen::JacobiSVD<Eigen::MatrixXd> svd(m_hat);
  const auto& sv = svd.singularValues();
  const double smin = sv.size() ? sv[sv.size() - 1] : 0.0;
  if (sv.size() == 0 || !(smin > 0.0) || sv[0] / smin >= 1e12) {
    std::ostringstream msg;
    msg << "M-hat is near singular (condition number " << (smin > 0.0 ? sv[0] / smin : INFINITY) << ")";
    throw ConditioningError(msg.str());
  }
  const Eigen::PartialPivLU<Eigen::MatrixXd> lu(m_hat);
  const Eigen::MatrixXd left = lu.solve(sigma);                        // M^{-1} S
  const Eigen::MatrixXd s = lu.solve(left.transpose()).transpose();    // M^{-1} S M^{-T}
  return 0.5 * (s + s.transpose());
}

Eigen::VectorXd leverages(const Eigen::MatrixXd& X, const Eigen::VectorXd& weights) {
  const Eigen::Index q = X.cols();
  Eigen::MatrixXd G(q, q);
  if (weights.size())
    G.noalias() = X.transpose() * weights.asDiagonal() * X;
  else
    G.noalias() = X.transpose() * X;
  const Eigen::LDLT<Eigen::MatrixXd> ldlt(G);
  const Eigen::JacobiSVD<Eigen::MatrixXd> svd(G);
  const auto& sv = svd.singularValues();
  if (ldlt.info() != Eigen::Success || !(sv[q - 1] > 1e-12 * sv[0]))
    throw LeverageError("design cross-product matrix is singular");
  const Eigen::MatrixXd solved = ldlt.solve(X.transpose());  // q x n
  return (X.array() * solved.transpose().array()).rowwise().sum();
}

namespace {

struct Scores {
  Eigen::MatrixXd A;       // n x q, row k = A(beta_hat, Z_k)^T
  Eigen::VectorXd mu;
  Eigen::VectorXd resid;   // theta_k - mu_k
};

Scores scores(const FitResult& fit, const Eigen::MatrixXd& X) {
  if (fit.pseudo.size() != X.rows()) throw std::invalid_argument("fit and design differ in length");
  Scores s{Eigen::MatrixXd(X.rows(), X.cols()), Eigen::VectorXd(X.rows()), Eigen::VectorXd(X.rows())};
  const Eigen::VectorXd eta = X * fit.beta_hat;
  for (Eigen::Index k = 0; k < X.rows(); ++k) {
    const LinkValue lv = link_eval(fit.model.link, eta[k]);
    const double a_scale = fit.model.a_kind == AKind::dmu ? lv.d1 : 1.0;
    s.A.row(k) = a_scale * X.row(k);
    s.mu[k] = lv.mu;
    s.resid[k] = fit.pseudo.values[k] - lv.mu;
  }
  return s;
}

CovarianceEstimate finish(CovKind kind, const FitResult& fit, Eigen::MatrixXd sigma) {
  sigma = 0.5 * (sigma + sigma.transpose());
  CovarianceEstimate est{kind, sigma, sandwich(fit.m_hat, sigma)};
  return est;
}

CovarianceEstimate residual_meat(CovKind kind, const FitResult& fit, const Eigen::MatrixXd& X,
                                 const Eigen::VectorXd& weights, const Eigen::VectorXd& inflation) {
  const Scores s = scores(fit, X);
  Eigen::VectorXd c(X.rows());
  for (Eigen::Index k = 0; k < X.rows(); ++k) {
    const double w = weights.size() ? weights[k] : 1.0;
    c[k] = w * s.resid[k] * s.resid[k] * (inflation.size() ? inflation[k] : 1.0);
  }
  const Eigen::MatrixXd sigma = s.A.transpose() * c.asDiagonal() * s.A / static_cast<double>(X.rows());
  return finish(kind, fit, sigma);
}

}  // namespace

CovarianceEstimate sigma_hw(const FitResult& fit, const Eigen::MatrixXd& X, const Eigen::VectorXd& weights) {
  return residual_meat(CovKind::hw, fit, X, weights, {});
}

CovarianceEstimate sigma_hc3(const FitResult& fit, const Eigen::MatrixXd& X, const Eigen::VectorXd& weights) {
  const Eigen::VectorXd d = leverages(X, weights);
  Eigen::VectorXd inflation(d.size());
  for (Eigen::Index k = 0; k < d.size(); ++k) {
    const double w = weights.size() ? weights[k] : 1.0;
    if (w == 0.0) {
      inflation[k] = 0.0;
      continue;
    }
    if (!(d[k] < 1.0 - 1e-10)) {
      std::ostringstream msg;
      msg << "leverage of record " << k << " is " << d[k] << " (saturated)";
      throw LeverageError(msg.str());
    }
    inflation[k] = 1.0 / ((1.0 - d[k]) * (1.0 - d[k]));
  }
  return residual_meat(CovKind::hc3, fit, X, weights, inflation);
}

InfluenceTerms influence_terms(const EstimandFunctional& phi, std::span<const ObservationMark> marks, int threads) {
  const DerivativeTable table(phi, EmpiricalDistribution::uniform({marks.begin(), marks.end()}));
  return {table.value(), table.d1_all(marks), table.d2_matrix(marks, threads)};
}

CovarianceEstimate sigma_pv(const FitResult& fit, const Eigen::MatrixXd& X, const InfluenceTerms& terms) {
  const Scores s = scores(fit, X);
  const double n = static_cast<double>(X.rows());
  if (terms.d1.size() != X.rows() || terms.d2.rows() != X.rows() || terms.d2.cols() != X.rows())
    throw std::invalid_argument("influence terms do not match the design");
  const Eigen::MatrixXd h1 = terms.d2 * s.A / n;  // row k = h1(X_k)^T
  Eigen::VectorXd first(X.rows());
  for (Eigen::Index k = 0; k < X.rows(); ++k) first[k] = terms.value + terms.d1[k] - s.mu[k];
  const Eigen::MatrixXd V = first.asDiagonal() * s.A + h1;
  return finish(CovKind::pv, fit, V.transpose() * V / n);
}

CovarianceEstimate sigma_pv(const FitResult& fit, const Eigen::MatrixXd& X, std::span<const ObservationMark> marks,
                            int threads) {
  return sigma_pv(fit, X, influence_terms(fit.pseudo.functional, marks, threads));
}

CovarianceEstimate estimate_covariance(CovKind kind, const FitResult& fit, const Eigen::MatrixXd& X,
                                       std::span<const ObservationMark> marks, int threads) {
  switch (kind) {
    case CovKind::hw:
      return sigma_hw(fit, X);
    case CovKind::hc3:
      return sigma_hc3(fit, X);
    case CovKind::pv:
      return sigma_pv(fit, X, marks, threads);
    case CovKind::bootstrap_empirical:
      break;
  }
  throw std::invalid_argument("bootstrap covariance needs a bootstrap configuration");
}

}  // namespace pseudoreg
