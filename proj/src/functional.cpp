#include "pseudoreg/functional.hpp"

#include "pseudoreg/error.hpp"
#include "pseudoreg/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace pseudoreg {

namespace {

void check_marks(const std::vector<ObservationMark>& marks) {
  if (marks.empty()) throw std::invalid_argument("empirical distribution needs at least one mark");
  for (const auto& m : marks) {
    if (!(m.time > 0.0) || !std::isfinite(m.time))
      throw std::invalid_argument("observation mark time must be positive and finite");
  }
}

bool in_window(double s, double t0, Boundary b) { return b == Boundary::right_continuous ? s <= t0 : s < t0; }

}  // namespace

EmpiricalDistribution EmpiricalDistribution::uniform(std::vector<ObservationMark> marks) {
  check_marks(marks);
  std::vector<double> w(marks.size(), 1.0 / static_cast<double>(marks.size()));
  return {std::move(marks), std::move(w), false};
}

EmpiricalDistribution EmpiricalDistribution::weighted(std::vector<ObservationMark> marks,
                                                      std::vector<double> weights) {
  check_marks(marks);
  if (weights.size() != marks.size()) throw std::invalid_argument("weights and marks differ in length");
  double total = 0.0;
  for (double w : weights) {
    if (!(w >= 0.0) || !std::isfinite(w)) throw std::invalid_argument("weights must be nonnegative and finite");
    total += w;
  }
  if (std::abs(total - 1.0) > 1e-12) throw std::invalid_argument("weights must sum to one");
  return {std::move(marks), std::move(weights), false};
}

EmpiricalDistribution EmpiricalDistribution::mixture(
    std::span<const std::pair<ObservationMark, double>> directions) const {
  double shift = 0.0;
  for (const auto& d : directions) shift += d.second;
  std::vector<ObservationMark> marks = marks_;
  std::vector<double> w(weights_.size());
  for (std::size_t i = 0; i < w.size(); ++i) w[i] = weights_[i] * (1.0 - shift);
  for (const auto& [x, eps] : directions) {
    auto it = std::find(marks.begin(), marks.end(), x);
    if (it == marks.end()) {
      marks.push_back(x);
      w.push_back(eps);
    } else {
      w[static_cast<std::size_t>(it - marks.begin())] += eps;
    }
  }
  return {std::move(marks), std::move(w), true};
}

EmpiricalDistribution EmpiricalDistribution::without(std::size_t k) const {
  if (k >= marks_.size()) throw std::out_of_range("leave-one-out index out of range");
  if (marks_.size() < 2) throw std::invalid_argument("cannot leave out the only mark");
  std::vector<ObservationMark> marks;
  std::vector<double> w;
  marks.reserve(marks_.size() - 1);
  w.reserve(marks_.size() - 1);
  const double rest = 1.0 - weights_[k];
  if (!(rest > 0.0)) throw std::invalid_argument("left-out mark carries all the mass");
  for (std::size_t i = 0; i < marks_.size(); ++i) {
    if (i == k) continue;
    marks.push_back(marks_[i]);
    w.push_back(weights_[i] / rest);
  }
  return {std::move(marks), std::move(w), signed_};
}

EstimandFunctional EstimandFunctional::km_survival(double t0, Boundary b) {
  if (!(t0 > 0.0)) throw std::invalid_argument("t0 must be positive");
  return {FunctionalKind::km_survival, t0, b};
}

EstimandFunctional EstimandFunctional::mean_indicator(double t0, Boundary b) {
  if (!(t0 > 0.0)) throw std::invalid_argument("t0 must be positive");
  return {FunctionalKind::mean_indicator, t0, b};
}

template <class Scalar>
Scalar weighted_product_limit(std::span<const ObservationMark> marks, std::span<const Scalar> weights, double t0,
                              Boundary boundary) {
  if (marks.size() != weights.size()) throw std::invalid_argument("weights and marks differ in length");
  std::vector<std::size_t> order(marks.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return marks[a].time < marks[b].time; });

  // Group by distinct time: event mass and total mass at each time.
  struct Group {
    double time;
    bool has_event;
    Scalar events;
    Scalar total;
  };
  std::vector<Group> groups;
  for (std::size_t idx : order) {
    const auto& m = marks[idx];
    if (groups.empty() || groups.back().time != m.time) groups.push_back({m.time, false, Scalar(0.0), Scalar(0.0)});
    auto& g = groups.back();
    g.total += weights[idx];
    if (m.is_event) {
      g.has_event = true;
      g.events += weights[idx];
    }
  }

  std::vector<Scalar> at_risk(groups.size() + 1, Scalar(0.0));
  for (std::size_t j = groups.size(); j-- > 0;) at_risk[j] = groups[j].total + at_risk[j + 1];

  Scalar surv(1.0);
  std::size_t j = 0;
  for (; j < groups.size() && in_window(groups[j].time, t0, boundary); ++j) {
    if (!groups[j].has_event) continue;
    if (!(value_of(at_risk[j]) > 0.0)) {
      if (value_of(surv) == 0.0) break;
      throw EstimandUndefinedError("no mass at risk at an event time before t0");
    }
    surv *= Scalar(1.0) - groups[j].events / at_risk[j];
  }
  // Mass at risk at t0 itself: first group with time >= t0.
  std::size_t first = 0;
  while (first < groups.size() && groups[first].time < t0) ++first;
  if (!(value_of(at_risk[first]) > 0.0) && value_of(surv) != 0.0) {
    std::ostringstream msg;
    msg << "no mass at risk at t0 = " << t0 << " and the product-limit has not reached zero";
    throw EstimandUndefinedError(msg.str());
  }
  return surv;
}

template double weighted_product_limit<double>(std::span<const ObservationMark>, std::span<const double>, double,
                                               Boundary);
template Jet<double> weighted_product_limit<Jet<double>>(std::span<const ObservationMark>,
                                                         std::span<const Jet<double>>, double, Boundary);

namespace {

// Jet weights of F + e(delta_a - F) + h(delta_b - F); b may be absent.
std::pair<std::vector<ObservationMark>, std::vector<Jet<double>>> jet_mixture(const EmpiricalDistribution& F,
                                                                              const ObservationMark& a,
                                                                              const ObservationMark* b) {
  std::vector<ObservationMark> marks = F.marks();
  std::vector<Jet<double>> w(marks.size());
  for (std::size_t i = 0; i < w.size(); ++i) {
    const double wi = F.weights()[i];
    w[i] = Jet<double>(wi, -wi, b ? -wi : 0.0, 0.0);
  }
  auto add = [&](const ObservationMark& x, const Jet<double>& seed) {
    auto it = std::find(marks.begin(), marks.end(), x);
    if (it == marks.end()) {
      marks.push_back(x);
      w.push_back(seed);
    } else {
      w[static_cast<std::size_t>(it - marks.begin())] += seed;
    }
  };
  add(a, Jet<double>(0.0, 1.0, 0.0, 0.0));
  if (b) add(*b, Jet<double>(0.0, 0.0, 1.0, 0.0));
  return {std::move(marks), std::move(w)};
}

}  // namespace

double km_value(const EmpiricalDistribution& F, double t0, Boundary boundary) {
  return weighted_product_limit<double>(F.marks(), F.weights(), t0, boundary);
}

double km_d1(const EmpiricalDistribution& F, const ObservationMark& x, double t0, Boundary boundary) {
  km_value(F, t0, boundary);
  auto [marks, w] = jet_mixture(F, x, nullptr);
  return weighted_product_limit<Jet<double>>(marks, w, t0, boundary).de;
}

double km_d2(const EmpiricalDistribution& F, const ObservationMark& x1, const ObservationMark& x2, double t0,
             Boundary boundary) {
  km_value(F, t0, boundary);
  auto [marks, w] = jet_mixture(F, x1, &x2);
  return weighted_product_limit<Jet<double>>(marks, w, t0, boundary).deh;
}

double km_d1_closed_form(const EmpiricalDistribution& F, const ObservationMark& x, double t0, Boundary boundary) {
  const double surv = km_value(F, t0, boundary);
  std::vector<double> times;
  for (const auto& m : F.marks())
    if (m.is_event && in_window(m.time, t0, boundary)) times.push_back(m.time);
  if (x.is_event && in_window(x.time, t0, boundary)) times.push_back(x.time);
  std::sort(times.begin(), times.end());
  times.erase(std::unique(times.begin(), times.end()), times.end());

  double sum = 0.0;
  for (double s : times) {
    double Y = 0.0, N = 0.0;
    for (std::size_t i = 0; i < F.size(); ++i) {
      const auto& m = F.marks()[i];
      if (m.time >= s) Y += F.weights()[i];
      if (m.is_event && m.time == s) N += F.weights()[i];
    }
    const double y_x = x.time >= s ? 1.0 : 0.0;
    const double n_x = (x.is_event && x.time == s) ? 1.0 : 0.0;
    if (!(Y > N)) throw EstimandUndefinedError("closed-form influence function needs S(t0) > 0");
    sum += (n_x * Y - N * y_x) / (Y * (Y - N));
  }
  return -surv * sum;
}

namespace {

bool survives(const ObservationMark& x, double t0, Boundary b) {
  return b == Boundary::right_continuous ? x.time > t0 : x.time >= t0;
}

}  // namespace

double mean_value(const EmpiricalDistribution& F, double t0, Boundary boundary) {
  double v = 0.0;
  for (std::size_t i = 0; i < F.size(); ++i)
    if (survives(F.marks()[i], t0, boundary)) v += F.weights()[i];
  return v;
}

double mean_d1(const EmpiricalDistribution& F, const ObservationMark& x, double t0, Boundary boundary) {
  return (survives(x, t0, boundary) ? 1.0 : 0.0) - mean_value(F, t0, boundary);
}

double mean_d2(const EmpiricalDistribution&, const ObservationMark&, const ObservationMark&, double, Boundary) {
  return 0.0;
}

double functional_value(const EstimandFunctional& phi, const EmpiricalDistribution& F) {
  return phi.kind == FunctionalKind::km_survival ? km_value(F, phi.t0, phi.boundary)
                                                 : mean_value(F, phi.t0, phi.boundary);
}

double functional_d1(const EstimandFunctional& phi, const EmpiricalDistribution& F, const ObservationMark& x) {
  return phi.kind == FunctionalKind::km_survival ? km_d1(F, x, phi.t0, phi.boundary)
                                                 : mean_d1(F, x, phi.t0, phi.boundary);
}

double functional_d2(const EstimandFunctional& phi, const EmpiricalDistribution& F, const ObservationMark& x1,
                     const ObservationMark& x2) {
  return phi.kind == FunctionalKind::km_survival ? km_d2(F, x1, x2, phi.t0, phi.boundary)
                                                 : mean_d2(F, x1, x2, phi.t0, phi.boundary);
}

DerivativeTable::DerivativeTable(const EstimandFunctional& phi, const EmpiricalDistribution& F)
    : phi_(phi), base_(F) {
  value_ = functional_value(phi, F);
  if (phi.kind != FunctionalKind::km_survival) return;

  for (const auto& m : F.marks())
    if (m.is_event && in_window(m.time, phi.t0, phi.boundary)) event_times_.push_back(m.time);
  std::sort(event_times_.begin(), event_times_.end());
  event_times_.erase(std::unique(event_times_.begin(), event_times_.end()), event_times_.end());

  // Same grouping and suffix summation as weighted_product_limit so values agree bitwise.
  std::vector<std::size_t> order(F.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return F.marks()[a].time < F.marks()[b].time; });
  std::vector<double> gtime, gtotal, gevents;
  for (std::size_t idx : order) {
    const auto& m = F.marks()[idx];
    if (gtime.empty() || gtime.back() != m.time) {
      gtime.push_back(m.time);
      gtotal.push_back(0.0);
      gevents.push_back(0.0);
    }
    gtotal.back() += F.weights()[idx];
    if (m.is_event) gevents.back() += F.weights()[idx];
  }
  std::vector<double> suffix(gtime.size() + 1, 0.0);
  for (std::size_t j = gtime.size(); j-- > 0;) suffix[j] = gtotal[j] + suffix[j + 1];

  at_risk_.reserve(event_times_.size());
  events_.reserve(event_times_.size());
  std::size_t g = 0;
  for (double s : event_times_) {
    while (gtime[g] != s) ++g;
    at_risk_.push_back(suffix[g]);
    events_.push_back(gevents[g]);
  }
}

bool DerivativeTable::covers(const ObservationMark& x) const {
  if (!x.is_event || !in_window(x.time, phi_.t0, phi_.boundary)) return true;
  return std::binary_search(event_times_.begin(), event_times_.end(), x.time);
}

Jet<double> DerivativeTable::evaluate(const ObservationMark& a, const ObservationMark& b, bool second) const {
  using J = Jet<double>;
  J surv(1.0);
  for (std::size_t j = 0; j < event_times_.size(); ++j) {
    const double s = event_times_[j];
    const double Y = at_risk_[j];
    const double N = events_[j];
    const double ya = a.time >= s ? 1.0 : 0.0;
    const double na = (a.is_event && a.time == s) ? 1.0 : 0.0;
    double yb = 0.0, nb = 0.0;
    if (second) {
      yb = b.time >= s ? 1.0 : 0.0;
      nb = (b.is_event && b.time == s) ? 1.0 : 0.0;
    }
    const J y(Y, ya - Y, second ? yb - Y : 0.0, 0.0);
    const J n(N, na - N, second ? nb - N : 0.0, 0.0);
    surv *= J(1.0) - n / y;
  }
  return surv;
}

double DerivativeTable::d1(const ObservationMark& x) const {
  if (phi_.kind == FunctionalKind::mean_indicator) return mean_d1(base_, x, phi_.t0, phi_.boundary);
  if (!covers(x)) return km_d1(base_, x, phi_.t0, phi_.boundary);
  return evaluate(x, x, false).de;
}

double DerivativeTable::d2(const ObservationMark& x1, const ObservationMark& x2) const {
  if (phi_.kind == FunctionalKind::mean_indicator) return 0.0;
  if (!covers(x1) || !covers(x2)) return km_d2(base_, x1, x2, phi_.t0, phi_.boundary);
  return evaluate(x1, x2, true).deh;
}

Eigen::VectorXd DerivativeTable::d1_all(std::span<const ObservationMark> marks) const {
  Eigen::VectorXd out(static_cast<Eigen::Index>(marks.size()));
  for (std::size_t k = 0; k < marks.size(); ++k) out[static_cast<Eigen::Index>(k)] = d1(marks[k]);
  return out;
}

Eigen::MatrixXd DerivativeTable::d2_matrix(std::span<const ObservationMark> marks, int threads) const {
  const auto n = static_cast<Eigen::Index>(marks.size());
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(n, n);
  if (phi_.kind == FunctionalKind::mean_indicator) return out;

  // With every factor 1 - N/Y strictly positive, log S is a sum over event times and
  // d2 S = S (L12 + L1 L1'), where both pieces are inner products over event times.
  const bool log_form =
      value_ > 0.0 && std::all_of(marks.begin(), marks.end(), [&](const auto& x) { return covers(x); });
  if (log_form) {
    const auto m = static_cast<Eigen::Index>(event_times_.size());
    Eigen::MatrixXd P(n, m), Q(n, m);
    for (Eigen::Index j = 0; j < m; ++j) {
      const double s = event_times_[j], Y = at_risk_[j], N = events_[j];
      for (Eigen::Index k = 0; k < n; ++k) {
        const auto& x = marks[static_cast<std::size_t>(k)];
        const double dy = (x.time >= s ? 1.0 : 0.0) - Y;
        const double dn = ((x.is_event && x.time == s) ? 1.0 : 0.0) - N;
        P(k, j) = (dy - dn) / (Y - N);
        Q(k, j) = dy / Y;
      }
    }
    const Eigen::VectorXd L1 = P.rowwise().sum() - Q.rowwise().sum();
    out.noalias() = Q * Q.transpose();
    out.noalias() -= P * P.transpose();
    out.noalias() += L1 * L1.transpose();
    out *= value_;
    return 0.5 * (out + out.transpose());
  }

  parallel_for(marks.size(), threads, [&](std::size_t begin, std::size_t end) {
    for (std::size_t k = begin; k < end; ++k) {
      for (std::size_t j = k; j < marks.size(); ++j) {
        const double v = d2(marks[k], marks[j]);
        out(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(j)) = v;
        out(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(k)) = v;
      }
    }
  });
  return out;
}

}  // namespace pseudoreg
