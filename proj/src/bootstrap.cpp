#include "pseudoreg/bootstrap.hpp"

#include "pseudoreg/error.hpp"
#include "pseudoreg/parallel.hpp"

#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

namespace pseudoreg {

std::string to_string(Standardization s) { return s == Standardization::hw ? "hw" : "hc3"; }

void BootstrapConfig::validate() const {
  if (B < 100) throw std::invalid_argument("bootstrap needs at least 100 replicates");
  if (retry_limit < 0 || retry_limit > 20) throw std::invalid_argument("retry limit must lie in [0, 20]");
  if (!(alpha > 0.0 && alpha < 1.0)) throw std::invalid_argument("alpha must be in (0,1)");
}

Eigen::VectorXd draw_weights(Rng& rng, Eigen::Index n) {
  if (n < 1) throw std::invalid_argument("bootstrap weights need n >= 1");
  Eigen::VectorXd w = Eigen::VectorXd::Zero(n);
  std::uniform_int_distribution<Eigen::Index> pick(0, n - 1);
  for (Eigen::Index i = 0; i < n; ++i) w[pick(rng)] += 1.0;
  return w;
}

BootstrapReplicate bootstrap_fit(const FitResult& fit, const Eigen::MatrixXd& X, const Eigen::VectorXd& weights) {
  BootstrapReplicate rep;
  rep.weights = weights;
  if (!full_column_rank(X, weights)) {
    rep.beta_b = fit.beta_hat;
    return rep;
  }
  const NewtonResult nr = newton_solve(fit.model, X, fit.pseudo.values, weights, fit.beta_hat);
  rep.beta_b = nr.beta;
  rep.converged = nr.converged;
  if (rep.converged) {
    // A root reached by drifting along a separating direction leaves M-hat numerically singular.
    const Eigen::JacobiSVD<Eigen::MatrixXd> svd(m_hat(fit.model, nr.beta, X, weights));
    const auto& sv = svd.singularValues();
    const double smin = sv[sv.size() - 1];
    rep.converged = smin > 0.0 && sv[0] / smin < 1e12;
  }
  return rep;
}

Eigen::MatrixXd bootstrap_sandwich(const BootstrapReplicate& rep, const FitResult& fit, const Eigen::MatrixXd& X,
                                   Standardization standardization) {
  FitResult resample;
  resample.model = fit.model;
  resample.beta_hat = rep.beta_b;
  resample.m_hat = m_hat(fit.model, rep.beta_b, X, rep.weights);
  resample.pseudo = fit.pseudo;
  const auto cov = standardization == Standardization::hw ? sigma_hw(resample, X, rep.weights)
                                                          : sigma_hc3(resample, X, rep.weights);
  return cov.sandwich;
}

namespace {

double centered_statistic(const Eigen::VectorXd& diff, const Eigen::MatrixXd& V, double n, const Hypothesis& hyp) {
  const Eigen::VectorXd c = hyp.C() * diff;
  Eigen::MatrixXd middle = hyp.C() * V * hyp.C().transpose();
  middle = 0.5 * (middle + middle.transpose());
  return std::max(0.0, n * c.dot(pinv(middle).matrix * c));
}

}  // namespace

double bootstrap_statistic(const BootstrapReplicate& rep, const FitResult& fit, const Eigen::MatrixXd& X,
                           const Hypothesis& hyp, Standardization standardization) {
  const Eigen::MatrixXd V = bootstrap_sandwich(rep, fit, X, standardization);
  return centered_statistic(rep.beta_b - fit.beta_hat, V, static_cast<double>(X.rows()), hyp);
}

ReplicateSet run_replicates(const FitResult& fit, const Eigen::MatrixXd& X, const BootstrapConfig& config,
                            const std::vector<Hypothesis>& hyps, const std::vector<Standardization>& standardizations,
                            const Rng& rng) {
  config.validate();
  const auto B = static_cast<std::size_t>(config.B);
  const double n = static_cast<double>(X.rows());

  struct Slot {
    bool ok = false;
    int attempts = 0;
    Eigen::VectorXd beta;
    std::vector<double> stats;  // [h * S + s]
  };
  std::vector<Slot> slots(B);

  parallel_for(B, config.threads, [&](std::size_t begin, std::size_t end) {
    for (std::size_t r = begin; r < end; ++r) {
      Slot& slot = slots[r];
      for (int attempt = 0; attempt <= config.retry_limit && !slot.ok; ++attempt) {
        ++slot.attempts;
        Rng stream = rng.substream({static_cast<std::uint64_t>(r), static_cast<std::uint64_t>(attempt)});
        const BootstrapReplicate rep = bootstrap_fit(fit, X, draw_weights(stream, X.rows()));
        if (!rep.converged) continue;
        std::vector<double> stats;
        stats.reserve(hyps.size() * standardizations.size());
        bool ok = true;
        try {
          std::vector<Eigen::MatrixXd> V;
          for (auto s : standardizations) V.push_back(bootstrap_sandwich(rep, fit, X, s));
          const Eigen::VectorXd diff = rep.beta_b - fit.beta_hat;
          for (const auto& h : hyps) {
            for (const auto& v : V) {
              const double t = centered_statistic(diff, v, n, h);
              ok = ok && std::isfinite(t);
              stats.push_back(t);
            }
          }
        } catch (const Error&) {
          ok = false;
        }
        if (!ok) continue;
        slot.ok = true;
        slot.beta = rep.beta_b;
        slot.stats = std::move(stats);
      }
    }
  });

  ReplicateSet out;
  const std::size_t S = standardizations.size();
  out.statistics.assign(hyps.size(), std::vector<std::vector<double>>(S));
  for (const auto& slot : slots) {
    out.redraws += slot.attempts - 1;
    if (!slot.ok) {
      ++out.failed;
      continue;
    }
    out.betas.push_back(slot.beta);
    for (std::size_t h = 0; h < hyps.size(); ++h)
      for (std::size_t s = 0; s < S; ++s) out.statistics[h][s].push_back(slot.stats[h * S + s]);
  }
  if (out.failed > 0.2 * static_cast<double>(B)) {
    std::ostringstream msg;
    msg << out.failed << " of " << B << " replicates failed after " << config.retry_limit << " redraws";
    throw BootstrapUnstableError(msg.str());
  }
  return out;
}

double bootstrap_quantile(std::vector<double> statistics, double alpha) {
  if (statistics.empty()) throw std::invalid_argument("no bootstrap statistics");
  std::sort(statistics.begin(), statistics.end());
  const auto B = static_cast<double>(statistics.size());
  // Small slack keeps exact products such as 1000 * 0.95 from rounding up.
  auto idx = static_cast<std::size_t>(std::ceil((B + 1.0) * (1.0 - alpha) - 1e-9));
  idx = std::clamp<std::size_t>(idx, 1, statistics.size());
  return statistics[idx - 1];
}

TestResult bootstrap_decision(double statistic, int rank_c, const std::vector<double>& replicates, double alpha) {
  TestResult r;
  r.statistic = statistic;
  r.rank_c = rank_c;
  r.method = TestMethod::bootstrap;
  r.alpha = alpha;
  r.critical_value = bootstrap_quantile(replicates, alpha);
  r.reject = statistic > r.critical_value;
  const auto exceed = std::count_if(replicates.begin(), replicates.end(), [&](double t) { return t >= statistic; });
  r.p_value = (1.0 + static_cast<double>(exceed)) / (static_cast<double>(replicates.size()) + 1.0);
  return r;
}

TestResult bootstrap_test(const FitResult& fit, const Eigen::MatrixXd& X, const CovarianceEstimate& cov_pv,
                          const Hypothesis& hyp, const BootstrapConfig& config) {
  const WaldStatistic w = wald_statistic(fit, cov_pv, hyp);
  const ReplicateSet reps = run_replicates(fit, X, config, {hyp}, {config.standardization}, Rng(config.seed));
  return bootstrap_decision(w.statistic, w.rank_c, reps.statistics[0][0], config.alpha);
}

CovarianceEstimate empirical_covariance(const FitResult& fit, const std::vector<Eigen::VectorXd>& betas) {
  if (betas.empty()) throw std::invalid_argument("no bootstrap replicates");
  const auto q = fit.beta_hat.size();
  const double n = static_cast<double>(fit.pseudo.size());
  Eigen::MatrixXd acc = Eigen::MatrixXd::Zero(q, q);
  for (const auto& b : betas) {
    const Eigen::VectorXd d = b - fit.beta_hat;
    acc.noalias() += d * d.transpose();
  }
  CovarianceEstimate est;
  est.kind = CovKind::bootstrap_empirical;
  est.sandwich = n * acc / static_cast<double>(betas.size());
  est.sandwich = 0.5 * (est.sandwich + est.sandwich.transpose());
  est.sigma = fit.m_hat * est.sandwich * fit.m_hat.transpose();
  return est;
}

CovarianceEstimate bootstrap_covariance(const FitResult& fit, const Eigen::MatrixXd& X, const BootstrapConfig& config) {
  const ReplicateSet reps = run_replicates(fit, X, config, {}, {}, Rng(config.seed));
  return empirical_covariance(fit, reps.betas);
}

}  // namespace pseudoreg
