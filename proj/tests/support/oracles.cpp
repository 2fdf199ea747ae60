#include "support/oracles.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <random>
#include <utility>

namespace oracle {

double fd_directional(const EmpiricalDistribution& F, const std::vector<ObservationMark>& directions, double t0,
                      double step, Boundary boundary) {
  if (!(step > 0.0 && step < 0.1)) throw OracleError("finite-difference step must lie in (0, 0.1)");
  using Dir = std::pair<ObservationMark, double>;
  auto phi = [&](std::vector<Dir> dirs) {
    const auto G = F.mixture(dirs);
    for (std::size_t i = 0; i < G.size(); ++i) {
      // Perturbations may push atom weights slightly negative, but not past the mass they perturb.
      if (G.weights()[i] < -2.0 * step) throw OracleError("step too large: perturbed weights invalid");
    }
    return pseudoreg::km_value(G, t0, boundary);
  };
  if (directions.size() == 1) {
    const auto& x = directions[0];
    return (phi({{x, step}}) - phi({{x, -step}})) / (2.0 * step);
  }
  if (directions.size() == 2) {
    const auto& a = directions[0];
    const auto& b = directions[1];
    const double pp = phi({{a, step}, {b, step}});
    const double pm = phi({{a, step}, {b, -step}});
    const double mp = phi({{a, -step}, {b, step}});
    const double mm = phi({{a, -step}, {b, -step}});
    return (pp - pm - mp + mm) / (4.0 * step * step);
  }
  throw OracleError("one or two directions required");
}

double plain_km(const std::vector<double>& times, const std::vector<int>& events, const std::vector<double>& weights,
                double t0, bool strict) {
  std::vector<double> ev;
  for (std::size_t i = 0; i < times.size(); ++i)
    if (events[i] && weights[i] != 0.0 && (strict ? times[i] < t0 : times[i] <= t0)) ev.push_back(times[i]);
  std::sort(ev.begin(), ev.end());
  ev.erase(std::unique(ev.begin(), ev.end()), ev.end());
  double s = 1.0;
  for (double t : ev) {
    double y = 0.0, d = 0.0;
    for (std::size_t i = 0; i < times.size(); ++i) {
      if (times[i] >= t) y += weights[i];
      if (times[i] == t && events[i]) d += weights[i];
    }
    s *= 1.0 - d / y;
  }
  return s;
}

std::vector<double> brute_force_pseudo(const std::vector<double>& times, const std::vector<int>& events, double t0,
                                       bool strict) {
  const std::size_t n = times.size();
  const double full = plain_km(times, events, std::vector<double>(n, 1.0 / n), t0, strict);
  std::vector<double> out(n);
  for (std::size_t k = 0; k < n; ++k) {
    std::vector<double> w(n, 1.0 / (n - 1));
    w[k] = 0.0;
    out[k] = n * full - (n - 1.0) * plain_km(times, events, w, t0, strict);
  }
  return out;
}

Eigen::VectorXd irls_logistic(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, int max_iter) {
  Eigen::VectorXd b = Eigen::VectorXd::Zero(X.cols());
  for (int it = 0; it < max_iter; ++it) {
    const Eigen::VectorXd eta = X * b;
    Eigen::VectorXd p(eta.size()), w(eta.size()), z(eta.size());
    for (Eigen::Index i = 0; i < eta.size(); ++i) {
      p[i] = 1.0 / (1.0 + std::exp(-eta[i]));
      w[i] = p[i] * (1.0 - p[i]);
      z[i] = eta[i] + (y[i] - p[i]) / w[i];
    }
    const Eigen::MatrixXd XtW = X.transpose() * w.asDiagonal();
    const Eigen::VectorXd next = (XtW * X).ldlt().solve(XtW * z);
    const double change = (next - b).cwiseAbs().maxCoeff();
    b = next;
    if (change < 1e-14) break;
  }
  return b;
}

Eigen::MatrixXd pairs_bootstrap_ols(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, int B, std::uint64_t seed) {
  const Eigen::Index n = X.rows();
  const Eigen::VectorXd b = (X.transpose() * X).ldlt().solve(X.transpose() * y);
  std::mt19937_64 gen(seed);
  std::uniform_int_distribution<Eigen::Index> pick(0, n - 1);
  Eigen::MatrixXd acc = Eigen::MatrixXd::Zero(X.cols(), X.cols());
  Eigen::MatrixXd Xs(n, X.cols());
  Eigen::VectorXd ys(n);
  for (int r = 0; r < B; ++r) {
    for (Eigen::Index i = 0; i < n; ++i) {
      const Eigen::Index j = pick(gen);
      Xs.row(i) = X.row(j);
      ys[i] = y[j];
    }
    const Eigen::VectorXd bs = (Xs.transpose() * Xs).ldlt().solve(Xs.transpose() * ys);
    const Eigen::VectorXd d = bs - b;
    acc += static_cast<double>(n) * d * d.transpose();
  }
  return acc / B;
}

std::vector<ObservationMark> random_marks(pseudoreg::Rng& rng, int n, double censor_bound, bool ties) {
  std::vector<ObservationMark> out;
  out.reserve(n);
  for (int i = 0; i < n; ++i) {
    double t = -std::log(rng.uniform());
    double c = censor_bound * rng.uniform();
    if (ties) {
      t = std::ceil(t * 4.0) / 4.0;
      c = std::ceil(c * 4.0) / 4.0;
    }
    out.push_back({std::min(t, c), t <= c});
  }
  return out;
}

}  // namespace oracle
