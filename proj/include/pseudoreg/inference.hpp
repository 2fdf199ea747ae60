#pragma once

#include "pseudoreg/covariance.hpp"

#include <Eigen/Core>

#include <string>

namespace pseudoreg {

struct PseudoInverse {
  Eigen::MatrixXd matrix;
  int rank = 0;
};

/// SVD-based Moore-Penrose inverse; singular values below rel_tol * sigma_max are dropped.
PseudoInverse pinv(const Eigen::MatrixXd& H, double rel_tol = 1e-10);

/// Numerical rank by the same truncation rule as pinv.
int numerical_rank(const Eigen::MatrixXd& H, double rel_tol = 1e-10);

/// H0: C beta = b. Construction rejects inconsistent systems (rank [C|b] > rank C).
class Hypothesis {
 public:
  Hypothesis(Eigen::MatrixXd C, Eigen::VectorXd b, std::string label = {});

  const Eigen::MatrixXd& C() const noexcept { return C_; }
  const Eigen::VectorXd& b() const noexcept { return b_; }
  const std::string& label() const noexcept { return label_; }

  /// Tests beta_j = 0 for each listed coefficient index.
  static Hypothesis coefficients_zero(Eigen::Index q, const std::vector<Eigen::Index>& indices,
                                      std::string label = {});

 private:
  Eigen::MatrixXd C_;
  Eigen::VectorXd b_;
  std::string label_;
};

enum class TestMethod { asymptotic, bootstrap };

struct TestResult {
  double statistic = 0.0;
  int rank_c = 0;
  double p_value = 1.0;
  TestMethod method = TestMethod::asymptotic;
  double alpha = 0.05;
  bool reject = false;
  double critical_value = 0.0;
};

/// n (C beta - b)^T (C V C^T)^+ (C beta - b) with V a sandwich covariance.
struct WaldStatistic {
  double statistic = 0.0;
  int rank_c = 0;
};

WaldStatistic wald_statistic(const Eigen::VectorXd& beta, const Eigen::MatrixXd& V, double n, const Hypothesis& hyp);
WaldStatistic wald_statistic(const FitResult& fit, const CovarianceEstimate& cov, const Hypothesis& hyp);

/// Upper tail of the chi-square distribution, Q(df/2, x/2).
double chisq_sf(double x, double df);

/// (1 - alpha) quantile of chi-square(df), by bracketing and bisection on chisq_sf.
double chisq_quantile(double one_minus_alpha, double df);

TestResult run_test(const FitResult& fit, const CovarianceEstimate& cov, const Hypothesis& hyp, double alpha = 0.05);

}  // namespace pseudoreg
