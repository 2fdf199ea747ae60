#pragma once

#include "pseudoreg/jet.hpp"

#include <Eigen/Core>

#include <span>
#include <utility>
#include <vector>

namespace pseudoreg {

/// One subject's observed data: the atom delta_x carrying its counting
/// process N_x(t) = 1{time <= t, event} and at-risk process Y_x(t) = 1{time >= t}.
struct ObservationMark {
  double time = 0.0;
  bool is_event = false;

  friend bool operator==(const ObservationMark&, const ObservationMark&) = default;
};

/// Weighted average of marks. Built as a probability vector; `mixture`
/// produces signed weights (still summing to one) for directional perturbations.
class EmpiricalDistribution {
 public:
  static EmpiricalDistribution uniform(std::vector<ObservationMark> marks);
  static EmpiricalDistribution weighted(std::vector<ObservationMark> marks, std::vector<double> weights);

  /// F + sum_i eps_i (delta_{x_i} - F). Directions need not be atoms of F.
  EmpiricalDistribution mixture(std::span<const std::pair<ObservationMark, double>> directions) const;

  /// Leave-one-out average F^{(k)} of a uniform distribution.
  EmpiricalDistribution without(std::size_t k) const;

  const std::vector<ObservationMark>& marks() const noexcept { return marks_; }
  const std::vector<double>& weights() const noexcept { return weights_; }
  std::size_t size() const noexcept { return marks_.size(); }
  bool is_signed() const noexcept { return signed_; }

 private:
  EmpiricalDistribution(std::vector<ObservationMark> marks, std::vector<double> weights, bool is_signed)
      : marks_(std::move(marks)), weights_(std::move(weights)), signed_(is_signed) {}

  std::vector<ObservationMark> marks_;
  std::vector<double> weights_;
  bool signed_ = false;
};

/// Whether the survival probability at t0 counts events occurring exactly at t0.
/// right_continuous: S(t0) = P(T > t0). left_limit: S(t0-) = P(T >= t0).
enum class Boundary { right_continuous, left_limit };

enum class FunctionalKind { km_survival, mean_indicator };

struct EstimandFunctional {
  FunctionalKind kind = FunctionalKind::km_survival;
  double t0 = 1.0;
  Boundary boundary = Boundary::right_continuous;

  static EstimandFunctional km_survival(double t0, Boundary b = Boundary::right_continuous);
  static EstimandFunctional mean_indicator(double t0, Boundary b = Boundary::right_continuous);
};

/// Weighted product-limit estimate at t0 for arbitrary (possibly signed or jet) weights.
///
/// Ties: events at a time precede censorings at the same time. Throws
/// EstimandUndefinedError when no mass is at risk at t0 and the estimate has
/// not already dropped to zero.
template <class Scalar>
Scalar weighted_product_limit(std::span<const ObservationMark> marks, std::span<const Scalar> weights, double t0,
                              Boundary boundary = Boundary::right_continuous);

extern template double weighted_product_limit<double>(std::span<const ObservationMark>, std::span<const double>,
                                                      double, Boundary);
extern template Jet<double> weighted_product_limit<Jet<double>>(std::span<const ObservationMark>,
                                                                std::span<const Jet<double>>, double, Boundary);

double km_value(const EmpiricalDistribution& F, double t0, Boundary boundary = Boundary::right_continuous);

/// d/de phi((1-e)F + e delta_x) at e = 0, by jet propagation.
double km_d1(const EmpiricalDistribution& F, const ObservationMark& x, double t0,
             Boundary boundary = Boundary::right_continuous);

/// d^2/(de dh) phi(F + e(delta_x1 - F) + h(delta_x2 - F)) at 0, by jet propagation.
double km_d2(const EmpiricalDistribution& F, const ObservationMark& x1, const ObservationMark& x2, double t0,
             Boundary boundary = Boundary::right_continuous);

/// Classical closed form of the first-order influence function of the
/// product-limit estimator: -S(t0) sum_s (n_x(s) Y(s) - N(s) y_x(s)) / (Y(s)(Y(s) - N(s))).
/// Requires S(t0) > 0.
double km_d1_closed_form(const EmpiricalDistribution& F, const ObservationMark& x, double t0,
                         Boundary boundary = Boundary::right_continuous);

double mean_value(const EmpiricalDistribution& F, double t0, Boundary boundary = Boundary::right_continuous);
double mean_d1(const EmpiricalDistribution& F, const ObservationMark& x, double t0,
               Boundary boundary = Boundary::right_continuous);
double mean_d2(const EmpiricalDistribution& F, const ObservationMark& x1, const ObservationMark& x2, double t0,
               Boundary boundary = Boundary::right_continuous);

double functional_value(const EstimandFunctional& phi, const EmpiricalDistribution& F);
double functional_d1(const EstimandFunctional& phi, const EmpiricalDistribution& F, const ObservationMark& x);
double functional_d2(const EstimandFunctional& phi, const EmpiricalDistribution& F, const ObservationMark& x1,
                     const ObservationMark& x2);

/// Derivatives of phi at a fixed base distribution, with the product-limit
/// tables precomputed so each pairwise second derivative costs O(#event times <= t0).
/// Agrees with km_d1 / km_d2 (same jet arithmetic on the same sums).
class DerivativeTable {
 public:
  DerivativeTable(const EstimandFunctional& phi, const EmpiricalDistribution& F);

  double value() const noexcept { return value_; }
  double d1(const ObservationMark& x) const;
  double d2(const ObservationMark& x1, const ObservationMark& x2) const;

  /// First derivatives along delta_{x_k} - F for every mark.
  Eigen::VectorXd d1_all(std::span<const ObservationMark> marks) const;
  /// Symmetric matrix of second derivatives along (delta_{x_k} - F, delta_{x_j} - F).
  Eigen::MatrixXd d2_matrix(std::span<const ObservationMark> marks, int threads = 1) const;

 private:
  Jet<double> evaluate(const ObservationMark& a, const ObservationMark& b, bool second) const;
  bool covers(const ObservationMark& x) const;

  EstimandFunctional phi_;
  EmpiricalDistribution base_;
  double value_ = 0.0;
  std::vector<double> event_times_;  // distinct event times inside the window
  std::vector<double> at_risk_;      // Y_F(s)
  std::vector<double> events_;       // dN_F(s)
};

}  // namespace pseudoreg
