#pragma once

#include "pseudoreg/pseudo.hpp"

#include <Eigen/Core>

#include <optional>
#include <string>

namespace pseudoreg {

enum class Link { identity, logit, cloglog };
enum class AKind {
  dmu,    // A(beta, z) = d mu / d beta
  design  // A(beta, z) = z
};

struct MeanModel {
  Link link = Link::logit;
  AKind a_kind = AKind::dmu;
};

/// Inverse link and its first two derivatives at the linear predictor x.
struct LinkValue {
  double mu = 0.0;
  double d1 = 0.0;
  double d2 = 0.0;
};

LinkValue link_eval(Link link, double x);

/// Inverse of the mean function, used to start Newton from a constant fit.
double link_transform(Link link, double mu);

struct MuGradient {
  double mu = 0.0;
  Eigen::VectorXd gradient;  // d mu / d beta
};

MuGradient mu_eval(const MeanModel& model, const Eigen::VectorXd& beta, const Eigen::VectorXd& z);

struct EstimatingEquation {
  Eigen::VectorXd U;  // sum_k w_k A_k (theta_k - mu_k)
  Eigen::MatrixXd J;  // dU / d beta
};

/// Empty `weights` means all ones.
EstimatingEquation estimating_fn(const MeanModel& model, const Eigen::VectorXd& beta, const Eigen::MatrixXd& X,
                                 const Eigen::VectorXd& theta, const Eigen::VectorXd& weights = {});

struct NewtonOptions {
  double tolerance = 1e-10;  // on ||U/n||_inf
  double step_tolerance = 1e-12;
  int max_iterations = 100;
  int max_halvings = 30;
};

struct NewtonResult {
  Eigen::VectorXd beta;
  int iterations = 0;
  bool converged = false;
  double residual_norm = 0.0;  // ||U/n||_inf at beta
  std::string failure;         // empty unless !converged
};

/// Damped Newton iteration for U(beta) = 0. Never throws on numerical failure;
/// the result carries the last iterate and a reason.
NewtonResult newton_solve(const MeanModel& model, const Eigen::MatrixXd& X, const Eigen::VectorXd& theta,
                          const Eigen::VectorXd& weights = {}, const std::optional<Eigen::VectorXd>& init = {},
                          const NewtonOptions& options = {});

/// Starting value: intercept from the (weighted) mean response, other coordinates zero.
Eigen::VectorXd initial_beta(const MeanModel& model, const Eigen::MatrixXd& X, const Eigen::VectorXd& theta,
                             const Eigen::VectorXd& weights = {});

/// Whether diag(w)^{1/2} X has full column rank (singular-value check).
bool full_column_rank(const Eigen::MatrixXd& X, const Eigen::VectorXd& weights = {});

/// M_n = (1/n) sum_k w_k A_k (d mu_k / d beta)^T. Not symmetric in general.
Eigen::MatrixXd m_hat(const MeanModel& model, const Eigen::VectorXd& beta, const Eigen::MatrixXd& X,
                      const Eigen::VectorXd& weights = {});

struct FitResult {
  MeanModel model;
  Eigen::VectorXd beta_hat;
  Eigen::MatrixXd m_hat;
  PseudoValues pseudo;
  int iterations = 0;
  bool converged = false;
  double residual_norm = 0.0;
};

/// Solves the pseudo-value estimating equation. Throws DesignError when the
/// design is rank deficient and NonConvergenceError (with the last iterate) on failure.
FitResult solve(const MeanModel& model, const Eigen::MatrixXd& X, const PseudoValues& pseudo,
                const Eigen::VectorXd& weights = {}, const std::optional<Eigen::VectorXd>& init = {},
                const NewtonOptions& options = {});

}  // namespace pseudoreg
