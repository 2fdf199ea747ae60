#pragma once

#include "pseudoreg/inference.hpp"
#include "pseudoreg/rng.hpp"

#include <Eigen/Core>

#include <vector>

namespace pseudoreg {

enum class Standardization { hw, hc3 };

std::string to_string(Standardization s);

struct BootstrapConfig {
  int B = 1000;
  double alpha = 0.05;
  int retry_limit = 20;
  Standardization standardization = Standardization::hw;
  std::uint64_t seed = 0;
  int threads = 1;

  void validate() const;
};

struct BootstrapReplicate {
  Eigen::VectorXd weights;  // multinomial counts, summing to n
  Eigen::VectorXd beta_b;
  double statistic_b = 0.0;
  bool converged = false;
};

/// Mult(n; 1/n, ..., 1/n) counts from n uniform draws with replacement.
Eigen::VectorXd draw_weights(Rng& rng, Eigen::Index n);

/// Weighted refit started at beta_hat; pseudo-values stay those of the original sample.
/// A rank-deficient weighted design, a failed Newton solve or a near-singular M-hat at the
/// root (condition number >= 1e12) leaves converged = false.
BootstrapReplicate bootstrap_fit(const FitResult& fit, const Eigen::MatrixXd& X, const Eigen::VectorXd& weights);

/// Covariance of the replicate: weighted M^B and Sigma^{HW,B} (or HC3^B) assembled into a sandwich.
/// Throws ConditioningError / LeverageError on degenerate resamples.
Eigen::MatrixXd bootstrap_sandwich(const BootstrapReplicate& rep, const FitResult& fit, const Eigen::MatrixXd& X,
                                   Standardization standardization);

/// T^B = n (C(beta^B - beta_hat))^T (C V^B C^T)^+ (C(beta^B - beta_hat)).
double bootstrap_statistic(const BootstrapReplicate& rep, const FitResult& fit, const Eigen::MatrixXd& X,
                           const Hypothesis& hyp, Standardization standardization);

/// Replicates shared across several hypotheses and standardizations.
struct ReplicateSet {
  std::vector<Eigen::VectorXd> betas;  // converged replicate estimates, in replicate order
  // statistics[h][s][r]: hypothesis h, standardization s, replicate r
  std::vector<std::vector<std::vector<double>>> statistics;
  int failed = 0;   // replicates that exhausted the retry limit
  int redraws = 0;  // failed attempts that were redrawn
};

/// Draws config.B replicates. Replicate r, attempt a uses rng.substream({r, a}).
/// A replicate counts only if its fit converges and every requested statistic is finite.
/// Throws BootstrapUnstableError when more than 20% of replicates fail.
ReplicateSet run_replicates(const FitResult& fit, const Eigen::MatrixXd& X, const BootstrapConfig& config,
                            const std::vector<Hypothesis>& hyps, const std::vector<Standardization>& standardizations,
                            const Rng& rng);

/// Order statistic at ceil((B+1)(1-alpha)), clipped to B.
double bootstrap_quantile(std::vector<double> statistics, double alpha);

/// Decision for an observed statistic against replicate statistics.
TestResult bootstrap_decision(double statistic, int rank_c, const std::vector<double>& replicates, double alpha);

/// Bootstrap test: T_n standardized by the supplied (corrected) covariance, critical value from T^B.
TestResult bootstrap_test(const FitResult& fit, const Eigen::MatrixXd& X, const CovarianceEstimate& cov_pv,
                          const Hypothesis& hyp, const BootstrapConfig& config);

/// Empirical covariance of sqrt(n)(beta^B - beta_hat). It targets M^{-1} Sigma~ M^{-T}, not the
/// covariance of the pseudo-observation estimator; exposed as a diagnostic.
CovarianceEstimate bootstrap_covariance(const FitResult& fit, const Eigen::MatrixXd& X, const BootstrapConfig& config);
CovarianceEstimate empirical_covariance(const FitResult& fit, const std::vector<Eigen::VectorXd>& betas);

}  // namespace pseudoreg
