#include "pseudoreg/inference.hpp"

#include "pseudoreg/error.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <limits>

namespace pseudoreg {

PseudoInverse pinv(const Eigen::MatrixXd& H, double rel_tol) {
  PseudoInverse out{Eigen::MatrixXd::Zero(H.cols(), H.rows()), 0};
  if (H.size() == 0) return out;
  const Eigen::JacobiSVD<Eigen::MatrixXd> svd(H, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const auto& sv = svd.singularValues();
  if (!(sv[0] > 0.0)) return out;
  const double cutoff = rel_tol * sv[0];
  Eigen::VectorXd inv = Eigen::VectorXd::Zero(sv.size());
  for (Eigen::Index i = 0; i < sv.size(); ++i) {
    if (sv[i] > cutoff) {
      inv[i] = 1.0 / sv[i];
      ++out.rank;
    }
  }
  out.matrix = svd.matrixV() * inv.asDiagonal() * svd.matrixU().transpose();
  return out;
}

int numerical_rank(const Eigen::MatrixXd& H, double rel_tol) {
  if (H.size() == 0) return 0;
  const Eigen::JacobiSVD<Eigen::MatrixXd> svd(H);
  const auto& sv = svd.singularValues();
  if (!(sv[0] > 0.0)) return 0;
  int r = 0;
  for (Eigen::Index i = 0; i < sv.size(); ++i)
    if (sv[i] > rel_tol * sv[0]) ++r;
  return r;
}

Hypothesis::Hypothesis(Eigen::MatrixXd C, Eigen::VectorXd b, std::string label)
    : C_(std::move(C)), b_(std::move(b)), label_(std::move(label)) {
  if (C_.rows() < 1 || C_.cols() < 1) throw HypothesisError("C must have at least one row and column");
  if (b_.size() != C_.rows()) throw HypothesisError("b must have one entry per row of C");
  if (!C_.allFinite() || !b_.allFinite()) throw HypothesisError("C and b must be finite");
  Eigen::MatrixXd augmented(C_.rows(), C_.cols() + 1);
  augmented << C_, b_;
  const int rc = numerical_rank(C_);
  if (rc == 0) throw HypothesisError("C is the zero matrix");
  if (numerical_rank(augmented) != rc) throw HypothesisError("the system C beta = b has no solution");
}

Hypothesis Hypothesis::coefficients_zero(Eigen::Index q, const std::vector<Eigen::Index>& indices,
                                         std::string label) {
  Eigen::MatrixXd C = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(indices.size()), q);
  for (std::size_t i = 0; i < indices.size(); ++i) {
    if (indices[i] < 0 || indices[i] >= q) throw HypothesisError("coefficient index out of range");
    C(static_cast<Eigen::Index>(i), indices[i]) = 1.0;
  }
  return {std::move(C), Eigen::VectorXd::Zero(static_cast<Eigen::Index>(indices.size())), std::move(label)};
}

WaldStatistic wald_statistic(const Eigen::VectorXd& beta, const Eigen::MatrixXd& V, double n, const Hypothesis& hyp) {
  if (hyp.C().cols() != beta.size()) throw HypothesisError("C has the wrong number of columns for this fit");
  const Eigen::VectorXd diff = hyp.C() * beta - hyp.b();
  Eigen::MatrixXd middle = hyp.C() * V * hyp.C().transpose();
  middle = 0.5 * (middle + middle.transpose());
  const PseudoInverse pi = pinv(middle);
  const double t = n * diff.dot(pi.matrix * diff);
  return {std::max(t, 0.0), pi.rank};
}

WaldStatistic wald_statistic(const FitResult& fit, const CovarianceEstimate& cov, const Hypothesis& hyp) {
  return wald_statistic(fit.beta_hat, cov.sandwich, static_cast<double>(fit.pseudo.size()), hyp);
}

namespace {

constexpr double kEps = 1e-16;
constexpr int kMaxTerms = 10000;

// P(a, x) by its power series; valid for x < a + 1.
double lower_series(double a, double x) {
  double term = 1.0 / a;
  double sum = term;
  for (int i = 1; i < kMaxTerms; ++i) {
    term *= x / (a + i);
    sum += term;
    if (std::abs(term) < std::abs(sum) * kEps) break;
  }
  return sum * std::exp(-x + a * std::log(x) - std::lgamma(a));
}

// Q(a, x) by the Legendre continued fraction (modified Lentz); valid for x >= a + 1.
double upper_fraction(double a, double x) {
  constexpr double tiny = std::numeric_limits<double>::min() / kEps;
  double b = x + 1.0 - a;
  double c = 1.0 / tiny;
  double d = 1.0 / b;
  double h = d;
  for (int i = 1; i < kMaxTerms; ++i) {
    const double an = -i * (i - a);
    b += 2.0;
    d = an * d + b;
    if (std::abs(d) < tiny) d = tiny;
    c = b + an / c;
    if (std::abs(c) < tiny) c = tiny;
    d = 1.0 / d;
    const double delta = d * c;
    h *= delta;
    if (std::abs(delta - 1.0) < kEps) break;
  }
  return std::exp(-x + a * std::log(x) - std::lgamma(a)) * h;
}

}  // namespace

double chisq_sf(double x, double df) {
  if (!(df > 0.0)) throw std::invalid_argument("chi-square degrees of freedom must be positive");
  if (std::isnan(x)) return x;
  if (x <= 0.0) return 1.0;
  if (std::isinf(x)) return 0.0;
  const double a = 0.5 * df;
  const double z = 0.5 * x;
  if (x < df + 1.0) return 1.0 - lower_series(a, z);
  return upper_fraction(a, z);
}

double chisq_quantile(double one_minus_alpha, double df) {
  if (!(one_minus_alpha > 0.0 && one_minus_alpha < 1.0)) throw std::invalid_argument("probability must be in (0,1)");
  const double tail = 1.0 - one_minus_alpha;
  double lo = 0.0, hi = std::max(1.0, df);
  while (chisq_sf(hi, df) > tail) hi *= 2.0;
  for (int i = 0; i < 200 && hi - lo > 1e-13 * hi; ++i) {
    const double mid = 0.5 * (lo + hi);
    (chisq_sf(mid, df) > tail ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

TestResult run_test(const FitResult& fit, const CovarianceEstimate& cov, const Hypothesis& hyp, double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw std::invalid_argument("alpha must be in (0,1)");
  const WaldStatistic w = wald_statistic(fit, cov, hyp);
  TestResult r;
  r.statistic = w.statistic;
  r.rank_c = w.rank_c;
  r.method = TestMethod::asymptotic;
  r.alpha = alpha;
  if (w.rank_c == 0) return r;
  r.p_value = chisq_sf(w.statistic, w.rank_c);
  r.critical_value = chisq_quantile(1.0 - alpha, w.rank_c);
  r.reject = r.statistic > r.critical_value;
  return r;
}

}  // namespace pseudoreg
