#pragma once

#include "pseudoreg/data_model.hpp"
#include "pseudoreg/functional.hpp"

#include <Eigen/Core>

#include <vector>

namespace pseudoreg {

std::vector<ObservationMark> marks_of(const Dataset& dataset);

/// Jackknife pseudo-observations n*phi(F_n) - (n-1)*phi(F_n^{(k)}), one per record.
struct PseudoValues {
  Eigen::VectorXd values;
  EstimandFunctional functional;
  double full_sample_value = 0.0;  // phi(F_n)

  Eigen::Index size() const noexcept { return values.size(); }
};

enum class LeaveOneOut {
  naive,       // re-evaluate phi on each leave-one-out distribution
  incremental  // subtract record k from precomputed risk-set counts
};

/// Pseudo-values are not clipped to [0, 1].
/// Throws EstimandUndefinedError naming k if some leave-one-out sample is undefined at t0.
PseudoValues jackknife_pseudo(std::span<const ObservationMark> marks, const EstimandFunctional& phi,
                              LeaveOneOut method = LeaveOneOut::incremental);
PseudoValues jackknife_pseudo(const Dataset& dataset, const EstimandFunctional& phi,
                              LeaveOneOut method = LeaveOneOut::incremental);

/// Plug-in second-order expansion of each pseudo-value around F_n:
/// essential[k] = phi(F_n) + phi'(delta_k - F_n) + phi''(delta_k - F_n, F_n^{(k)} - F_n),
/// and remainder = values - essential.
struct EssentialDecomposition {
  Eigen::VectorXd values;
  Eigen::VectorXd essential;
  Eigen::VectorXd remainder;

  /// max_k sqrt(n) |remainder[k]|
  double scaled_max_remainder() const;
};

EssentialDecomposition essential_part(std::span<const ObservationMark> marks, const EstimandFunctional& phi);
EssentialDecomposition essential_part(const Dataset& dataset, const EstimandFunctional& phi);

}  // namespace pseudoreg
