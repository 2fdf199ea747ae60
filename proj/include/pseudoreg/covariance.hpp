#pragma once

#include "pseudoreg/gee.hpp"

#include <Eigen/Core>

#include <span>
#include <string>

namespace pseudoreg {

enum class CovKind { hw, hc3, pv, bootstrap_empirical };

std::string to_string(CovKind kind);

/// sigma estimates the covariance of the estimating function per observation;
/// sandwich = M^{-1} sigma M^{-T} estimates the covariance of sqrt(n)(beta_hat - beta).
struct CovarianceEstimate {
  CovKind kind = CovKind::hw;
  Eigen::MatrixXd sigma;
  Eigen::MatrixXd sandwich;
};

/// M^{-1} S M^{-T}, symmetrized. Throws ConditioningError if cond(M) >= 1e12.
Eigen::MatrixXd sandwich(const Eigen::MatrixXd& m_hat, const Eigen::MatrixXd& sigma);

/// Hat-matrix diagonal d_kk = z_k^T (sum_j w_j z_j z_j^T)^{-1} z_k of the plain design.
/// Throws LeverageError if the cross-product matrix is singular.
Eigen::VectorXd leverages(const Eigen::MatrixXd& X, const Eigen::VectorXd& weights = {});

/// (1/n) sum_k w_k A_k A_k^T r_k^2 with raw pseudo-residuals.
CovarianceEstimate sigma_hw(const FitResult& fit, const Eigen::MatrixXd& X, const Eigen::VectorXd& weights = {});

/// HW summands inflated by (1 - d_kk)^{-2}. Throws LeverageError when some d_kk >= 1.
CovarianceEstimate sigma_hc3(const FitResult& fit, const Eigen::MatrixXd& X, const Eigen::VectorXd& weights = {});

/// First- and second-order derivatives of phi at F_n for every pair of records.
struct InfluenceTerms {
  double value = 0.0;     // phi(F_n)
  Eigen::VectorXd d1;     // phi'(delta_k - F_n)
  Eigen::MatrixXd d2;     // phi''(delta_k - F_n, delta_j - F_n)
};

InfluenceTerms influence_terms(const EstimandFunctional& phi, std::span<const ObservationMark> marks,
                               int threads = 1);

/// Corrected plug-in estimator
/// (1/n) sum_k [A_k (phi(F_n) + d1_k - mu_k) + h1_k]^{(x)2}, h1_k = (1/n) sum_j A_j d2(k, j).
CovarianceEstimate sigma_pv(const FitResult& fit, const Eigen::MatrixXd& X, const InfluenceTerms& terms);
CovarianceEstimate sigma_pv(const FitResult& fit, const Eigen::MatrixXd& X, std::span<const ObservationMark> marks,
                            int threads = 1);

CovarianceEstimate estimate_covariance(CovKind kind, const FitResult& fit, const Eigen::MatrixXd& X,
                                       std::span<const ObservationMark> marks, int threads = 1);

}  // namespace pseudoreg
