#pragma once

#include "pseudoreg/bootstrap.hpp"
#include "pseudoreg/rng.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <limits>
#include <string>
#include <vector>

namespace pseudoreg {

enum class Scheme {
  veteran_like,  // (1, Z1, three celltype dummies, age)
  interaction    // (1, Z1, Z2, Z1*Z2, Z4)
};

enum class TestVariant { corr, hw, hc3, boot_hw, boot_hc3 };

std::string to_string(Scheme s);
std::string to_string(TestVariant v);
Scheme scheme_from_string(const std::string& s);
TestVariant test_variant_from_string(const std::string& s);

inline constexpr double kNoCensoring = std::numeric_limits<double>::infinity();

struct ScenarioConfig {
  std::string id;  // empty: derived from the other fields
  Scheme scheme = Scheme::veteran_like;
  int n = 200;
  double theta = kNoCensoring;  // censoring bound
  double a = 0.85;
  double t0 = 90.0;
  double delta1 = 0.0;  // veteran_like: treatment effect; interaction: unused
  double delta2 = 0.0;  // veteran_like: first celltype effect; interaction: the interaction effect
  Eigen::VectorXd beta0;  // empty: the scheme default built from the deltas
  Link link = Link::logit;
  AKind a_kind = AKind::dmu;
  std::vector<TestVariant> tests{TestVariant::corr, TestVariant::hw, TestVariant::hc3, TestVariant::boot_hw,
                                 TestVariant::boot_hc3};
  int n_sim = 2000;
  int B = 500;
  double alpha = 0.05;
  std::uint64_t seed = 1;
  int rep_offset = 0;

  /// Scheme defaults: veteran_like a = 0.85, t0 = 90; interaction a = 2, t0 = 1.
  static ScenarioConfig veteran_like(int n, double theta, double delta1 = 0.0, double delta2 = 0.0);
  static ScenarioConfig interaction(int n, double theta, double delta = 0.0);

  Eigen::VectorXd true_beta() const;
  std::string scenario_id() const;
  void validate() const;
};

/// Number of regression coefficients of a scheme.
int scheme_dimension(Scheme s);

/// The hypotheses reported for a scheme: H0(1), H0(2) for veteran_like; C1, C2, C3 for interaction.
std::vector<Hypothesis> scheme_hypotheses(Scheme s);

/// n x q design rows (intercept first) drawn from the scheme's covariate distribution.
Eigen::MatrixXd gen_covariates(Rng& rng, Scheme scheme, Eigen::Index n);

/// lambda = t0 (-log mu)^(-1/a): the Weibull scale with P(T > t0) = mu.
double weibull_scale(double mu, double a, double t0);

/// Weibull time with shape a and scale lambda = t0 (-log mu)^(-1/a), so that P(T > t0 | z) = mu(beta0' z).
/// Throws std::domain_error if mu is not inside (0, 1).
double gen_survival(Rng& rng, const Eigen::VectorXd& z, const Eigen::VectorXd& beta0, double a, double t0,
                    Link link);

/// Uniform(0, theta); infinity when theta is infinite.
double gen_censoring(Rng& rng, double theta);

struct SimulatedSample {
  Eigen::MatrixXd X;
  std::vector<ObservationMark> marks;
};

SimulatedSample simulate_sample(Rng& rng, const ScenarioConfig& config);

/// Stream of replication `rep`: keyed on (seed, hash of the scenario id, rep).
Rng replication_stream(const ScenarioConfig& config, int rep);

/// Integer counts for one (scenario, hypothesis, test) cell.
struct CellCounts {
  std::string hypothesis;
  TestVariant test = TestVariant::corr;
  long rejections = 0;
  long valid = 0;     // replications with a decision
  long failures = 0;  // replications excluded, fit failures included

  double rate() const { return valid > 0 ? static_cast<double>(rejections) / static_cast<double>(valid) : 0.0; }
  double mc_se() const;
};

struct SimulationReport {
  ScenarioConfig config;
  long n_sim = 0;
  long fit_failures = 0;
  std::vector<CellCounts> cells;
  double censoring_rate = 0.0;  // average over valid replications

  bool flagged() const { return fit_failures > 0.02 * static_cast<double>(n_sim); }
};

/// Decisions of one replication: reject[h][t], with `ok[t]` false when test t failed.
struct ReplicationOutcome {
  bool fit_ok = false;
  double censored_fraction = 0.0;
  std::vector<std::vector<char>> reject;
  std::vector<char> ok;
};

ReplicationOutcome run_replication(const ScenarioConfig& config, int rep);

/// Runs replications rep_offset .. rep_offset + n_sim - 1 in parallel.
SimulationReport run_scenario(const ScenarioConfig& config, int threads = 1);

/// Adds the counts of two reports of the same scenario (e.g. split seed ranges).
SimulationReport merge_reports(const SimulationReport& a, const SimulationReport& b);

/// Long-format rows ordered by (n, theta, delta1, delta2); header included.
std::string aggregate_csv(std::vector<SimulationReport> reports);

/// Scenario list from a JSON document: either one scenario object or
/// {"defaults": {...}, "scenarios": [{...}, ...]}. theta may be a number, null or "inf".
std::vector<ScenarioConfig> parse_scenarios(const std::string& json_text);
std::string scenario_to_json(const ScenarioConfig& config);

}  // namespace pseudoreg
