#include "doctest.h"

#include "pseudoreg/error.hpp"
#include "pseudoreg/pseudo.hpp"
#include "support/oracles.hpp"

#include <numeric>
#include <random>

using namespace pseudoreg;

namespace {
std::vector<ObservationMark> censored4() { return {{1, true}, {2, false}, {3, true}, {4, true}}; }
}  // namespace

TEST_CASE("uncensored pseudo-values are the survival indicators") {
  const std::vector<ObservationMark> marks{{1, true}, {2, true}, {3, true}, {4, true}};
  for (auto method : {LeaveOneOut::naive, LeaveOneOut::incremental}) {
    const auto pv = jackknife_pseudo(marks, EstimandFunctional::km_survival(2.5), method);
    const double expected[] = {0, 0, 1, 1};
    for (int k = 0; k < 4; ++k) CHECK(std::abs(pv.values[k] - expected[k]) < 1e-12);
  }
}

TEST_CASE("mean functional gives the indicator identity exactly") {
  Rng rng(4);
  const auto marks = oracle::random_marks(rng, 50, 2.0);
  const auto pv = jackknife_pseudo(marks, EstimandFunctional::mean_indicator(0.5));
  for (std::size_t k = 0; k < marks.size(); ++k)
    CHECK(pv.values[static_cast<Eigen::Index>(k)] == (marks[k].time > 0.5 ? 1.0 : 0.0));
  const auto naive = jackknife_pseudo(marks, EstimandFunctional::mean_indicator(0.5), LeaveOneOut::naive);
  CHECK((naive.values - pv.values).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("censored four-point example matches the brute-force oracle") {
  const auto marks = censored4();
  const auto expected = oracle::brute_force_pseudo({1, 2, 3, 4}, {1, 0, 1, 1}, 3.5);
  const double frozen[] = {0.0, 0.5, -0.5, 1.5};
  for (auto method : {LeaveOneOut::naive, LeaveOneOut::incremental}) {
    const auto pv = jackknife_pseudo(marks, EstimandFunctional::km_survival(3.5), method);
    for (int k = 0; k < 4; ++k) {
      CHECK(std::abs(pv.values[k] - expected[static_cast<std::size_t>(k)]) < 1e-12);
      CHECK(std::abs(pv.values[k] - frozen[k]) < 1e-12);
    }
  }
}

TEST_CASE("leave-one-out undefined sample names the record") {
  // Record 2 is the only subject at risk at t0 after the event at 1.
  const std::vector<ObservationMark> marks{{1, true}, {2, false}, {5, false}};
  try {
    jackknife_pseudo(marks, EstimandFunctional::km_survival(3.0));
    FAIL("expected an undefined estimand");
  } catch (const EstimandUndefinedError& e) {
    CHECK(std::string(e.what()).find("record 2") != std::string::npos);
  }
}

TEST_CASE("pseudo-value properties on random censored data") {
  Rng rng(31);
  for (int rep = 0; rep < 30; ++rep) {
    const auto marks = oracle::random_marks(rng, 40, 2.0, rep % 2 == 0);
    for (auto b : {Boundary::right_continuous, Boundary::left_limit}) {
      const auto phi = EstimandFunctional::km_survival(0.4, b);
      PseudoValues fast, naive;
      try {
        fast = jackknife_pseudo(marks, phi, LeaveOneOut::incremental);
        naive = jackknife_pseudo(marks, phi, LeaveOneOut::naive);
      } catch (const EstimandUndefinedError&) {
        continue;
      }
      CHECK((fast.values - naive.values).cwiseAbs().maxCoeff() < 1e-12);
      CHECK(std::abs(fast.values.mean() - fast.full_sample_value) < 1e-10);

      std::vector<double> t;
      std::vector<int> e;
      for (const auto& m : marks) {
        t.push_back(m.time);
        e.push_back(m.is_event);
      }
      const auto brute = oracle::brute_force_pseudo(t, e, 0.4, b == Boundary::left_limit);
      for (std::size_t k = 0; k < marks.size(); ++k)
        CHECK(std::abs(fast.values[static_cast<Eigen::Index>(k)] - brute[k]) < 1e-11);

      std::vector<std::size_t> order(marks.size());
      std::iota(order.begin(), order.end(), std::size_t{0});
      std::shuffle(order.begin(), order.end(), rng);
      std::vector<ObservationMark> permuted;
      for (auto i : order) permuted.push_back(marks[i]);
      const auto pp = jackknife_pseudo(permuted, phi);
      for (std::size_t k = 0; k < order.size(); ++k)
        CHECK(std::abs(pp.values[static_cast<Eigen::Index>(k)] - fast.values[static_cast<Eigen::Index>(order[k])]) <
              1e-12);
    }
  }
}

TEST_CASE("essential part") {
  SUBCASE("no censoring leaves no remainder") {
    Rng rng(1);
    const auto marks = oracle::random_marks(rng, 30, INFINITY);
    const auto dec = essential_part(marks, EstimandFunctional::km_survival(0.7));
    CHECK(dec.remainder.cwiseAbs().maxCoeff() < 1e-10);
    CHECK((dec.essential + dec.remainder - dec.values).cwiseAbs().maxCoeff() == 0.0);
  }
  SUBCASE("mean functional leaves no remainder") {
    Rng rng(2);
    const auto marks = oracle::random_marks(rng, 30, 2.0);
    const auto dec = essential_part(marks, EstimandFunctional::mean_indicator(0.7));
    CHECK(dec.remainder.cwiseAbs().maxCoeff() < 1e-12);
  }
  SUBCASE("remainder is second order on censored data") {
    Rng rng(3);
    const auto marks = oracle::random_marks(rng, 200, 3.0);
    const auto dec = essential_part(marks, EstimandFunctional::km_survival(0.5));
    CHECK(dec.remainder.cwiseAbs().maxCoeff() < 0.05);
    CHECK(dec.scaled_max_remainder() > 0.0);
  }
}
