#include "pseudoreg/pseudo.hpp"

#include "pseudoreg/error.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace pseudoreg {

std::vector<ObservationMark> marks_of(const Dataset& dataset) {
  std::vector<ObservationMark> marks;
  marks.reserve(dataset.size());
  for (const auto& r : dataset.records()) marks.push_back({r.time, r.is_event()});
  return marks;
}

namespace {

bool in_window(double s, const EstimandFunctional& phi) {
  return phi.boundary == Boundary::right_continuous ? s <= phi.t0 : s < phi.t0;
}

void undefined_at(std::size_t k, const std::string& detail) {
  throw EstimandUndefinedError("leave-one-out sample without record " + std::to_string(k) + ": " + detail);
}

Eigen::VectorXd naive_values(std::span<const ObservationMark> marks, const EstimandFunctional& phi, double full) {
  const auto F = EmpiricalDistribution::uniform({marks.begin(), marks.end()});
  const auto n = static_cast<double>(marks.size());
  Eigen::VectorXd out(static_cast<Eigen::Index>(marks.size()));
  for (std::size_t k = 0; k < marks.size(); ++k) {
    double loo = 0.0;
    try {
      loo = functional_value(phi, F.without(k));
    } catch (const EstimandUndefinedError& e) {
      undefined_at(k, e.what());
    }
    out[static_cast<Eigen::Index>(k)] = n * full - (n - 1.0) * loo;
  }
  return out;
}

// Kaplan-Meier on counts: each leave-one-out product reuses the full-sample
// risk sets with record k's contribution removed.
Eigen::VectorXd incremental_km(std::span<const ObservationMark> marks, const EstimandFunctional& phi,
                               double& full) {
  const std::size_t n = marks.size();
  std::vector<double> times;
  for (const auto& m : marks)
    if (m.is_event && in_window(m.time, phi)) times.push_back(m.time);
  std::sort(times.begin(), times.end());
  times.erase(std::unique(times.begin(), times.end()), times.end());

  std::vector<double> sorted_times(n);
  for (std::size_t i = 0; i < n; ++i) sorted_times[i] = marks[i].time;
  std::sort(sorted_times.begin(), sorted_times.end());
  auto at_risk = [&](double s) {
    return static_cast<double>(sorted_times.end() - std::lower_bound(sorted_times.begin(), sorted_times.end(), s));
  };

  const std::size_t m = times.size();
  std::vector<double> Y(m), D(m, 0.0);
  for (std::size_t j = 0; j < m; ++j) Y[j] = at_risk(times[j]);
  for (const auto& mk : marks) {
    if (!mk.is_event || !in_window(mk.time, phi)) continue;
    const auto j = static_cast<std::size_t>(std::lower_bound(times.begin(), times.end(), mk.time) - times.begin());
    D[j] += 1.0;
  }
  const double risk_t0 = at_risk(phi.t0);

  full = 1.0;
  for (std::size_t j = 0; j < m; ++j) full *= 1.0 - D[j] / Y[j];
  if (risk_t0 <= 0.0 && full != 0.0) throw EstimandUndefinedError("no subject at risk at t0 in the full sample");

  Eigen::VectorXd out(static_cast<Eigen::Index>(n));
  const auto nd = static_cast<double>(n);
  for (std::size_t k = 0; k < n; ++k) {
    const auto& xk = marks[k];
    double s = 1.0;
    for (std::size_t j = 0; j < m; ++j) {
      const double y = Y[j] - (xk.time >= times[j] ? 1.0 : 0.0);
      const double d = D[j] - ((xk.is_event && xk.time == times[j]) ? 1.0 : 0.0);
      if (d == 0.0) continue;
      s *= 1.0 - d / y;
    }
    const double risk = risk_t0 - (xk.time >= phi.t0 ? 1.0 : 0.0);
    if (risk <= 0.0 && s != 0.0) undefined_at(k, "no subject at risk at t0");
    out[static_cast<Eigen::Index>(k)] = nd * full - (nd - 1.0) * s;
  }
  return out;
}

}  // namespace

PseudoValues jackknife_pseudo(std::span<const ObservationMark> marks, const EstimandFunctional& phi,
                              LeaveOneOut method) {
  if (marks.size() < 2) throw std::invalid_argument("pseudo-values need at least two records");
  PseudoValues pv;
  pv.functional = phi;
  if (method == LeaveOneOut::incremental && phi.kind == FunctionalKind::km_survival) {
    pv.values = incremental_km(marks, phi, pv.full_sample_value);
    return pv;
  }
  if (method == LeaveOneOut::incremental && phi.kind == FunctionalKind::mean_indicator) {
    // n*phi(F_n) and (n-1)*phi(F_n^{(k)}) are survivor counts.
    std::vector<double> alive(marks.size());
    double count = 0.0;
    for (std::size_t k = 0; k < marks.size(); ++k) {
      const double t = marks[k].time;
      alive[k] = (phi.boundary == Boundary::right_continuous ? t > phi.t0 : t >= phi.t0) ? 1.0 : 0.0;
      count += alive[k];
    }
    pv.full_sample_value = count / static_cast<double>(marks.size());
    pv.values.resize(static_cast<Eigen::Index>(marks.size()));
    for (std::size_t k = 0; k < marks.size(); ++k) pv.values[static_cast<Eigen::Index>(k)] = count - (count - alive[k]);
    return pv;
  }
  pv.full_sample_value = functional_value(phi, EmpiricalDistribution::uniform({marks.begin(), marks.end()}));
  pv.values = naive_values(marks, phi, pv.full_sample_value);
  return pv;
}

PseudoValues jackknife_pseudo(const Dataset& dataset, const EstimandFunctional& phi, LeaveOneOut method) {
  const auto marks = marks_of(dataset);
  return jackknife_pseudo(std::span<const ObservationMark>(marks), phi, method);
}

double EssentialDecomposition::scaled_max_remainder() const {
  if (remainder.size() == 0) return 0.0;
  return std::sqrt(static_cast<double>(remainder.size())) * remainder.cwiseAbs().maxCoeff();
}

EssentialDecomposition essential_part(std::span<const ObservationMark> marks, const EstimandFunctional& phi) {
  const auto pv = jackknife_pseudo(marks, phi);
  const DerivativeTable table(phi, EmpiricalDistribution::uniform({marks.begin(), marks.end()}));
  const auto n = static_cast<double>(marks.size());

  EssentialDecomposition out;
  out.values = pv.values;
  out.essential.resize(pv.size());
  for (std::size_t k = 0; k < marks.size(); ++k) {
    // F_n^{(k)} - F_n = -(delta_k - F_n)/(n-1), so the second-order term is linear in that scaling.
    const double d2 = table.d2(marks[k], marks[k]);
    out.essential[static_cast<Eigen::Index>(k)] = table.value() + table.d1(marks[k]) - d2 / (n - 1.0);
  }
  out.remainder = out.values - out.essential;
  return out;
}

EssentialDecomposition essential_part(const Dataset& dataset, const EstimandFunctional& phi) {
  const auto marks = marks_of(dataset);
  return essential_part(std::span<const ObservationMark>(marks), phi);
}

}  // namespace pseudoreg
