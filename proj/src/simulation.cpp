#include "pseudoreg/simulation.hpp"

#include "pseudoreg/error.hpp"
#include "pseudoreg/parallel.hpp"

#include "json.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <random>
#include <sstream>
#include <stdexcept>
#include <tuple>

namespace pseudoreg {

namespace {

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string fmt(double x) {
  if (std::isinf(x)) return "inf";
  std::ostringstream os;
  os << x;
  return os.str();
}

Link link_from_string(const std::string& s) {
  if (s == "identity") return Link::identity;
  if (s == "logit") return Link::logit;
  if (s == "cloglog") return Link::cloglog;
  throw std::invalid_argument("unknown link '" + s + "'");
}

std::string link_name(Link l) {
  switch (l) {
    case Link::identity: return "identity";
    case Link::logit: return "logit";
    case Link::cloglog: return "cloglog";
  }
  return "logit";
}

}  // namespace

std::string to_string(Scheme s) { return s == Scheme::veteran_like ? "veteran_like" : "interaction"; }

std::string to_string(TestVariant v) {
  switch (v) {
    case TestVariant::corr: return "corr";
    case TestVariant::hw: return "hw";
    case TestVariant::hc3: return "hc3";
    case TestVariant::boot_hw: return "boot_hw";
    case TestVariant::boot_hc3: return "boot_hc3";
  }
  return "corr";
}

Scheme scheme_from_string(const std::string& s) {
  if (s == "veteran_like") return Scheme::veteran_like;
  if (s == "interaction") return Scheme::interaction;
  throw std::invalid_argument("unknown scheme '" + s + "'");
}

TestVariant test_variant_from_string(const std::string& s) {
  for (auto v : {TestVariant::corr, TestVariant::hw, TestVariant::hc3, TestVariant::boot_hw, TestVariant::boot_hc3})
    if (to_string(v) == s) return v;
  throw std::invalid_argument("unknown test variant '" + s + "'");
}

ScenarioConfig ScenarioConfig::veteran_like(int n, double theta, double delta1, double delta2) {
  ScenarioConfig c;
  c.scheme = Scheme::veteran_like;
  c.n = n;
  c.theta = theta;
  c.a = 0.85;
  c.t0 = 90.0;
  c.delta1 = delta1;
  c.delta2 = delta2;
  return c;
}

ScenarioConfig ScenarioConfig::interaction(int n, double theta, double delta) {
  ScenarioConfig c;
  c.scheme = Scheme::interaction;
  c.n = n;
  c.theta = theta;
  c.a = 2.0;
  c.t0 = 1.0;
  c.delta2 = delta;
  return c;
}

int scheme_dimension(Scheme s) { return s == Scheme::veteran_like ? 6 : 5; }

Eigen::VectorXd ScenarioConfig::true_beta() const {
  if (beta0.size() > 0) return beta0;
  Eigen::VectorXd b(scheme_dimension(scheme));
  if (scheme == Scheme::veteran_like)
    b << 2.5, delta1, delta2, 0.0, 0.0, -0.04;
  else
    b << 0.3, 0.0, 0.0, delta2, 0.1;
  return b;
}

std::string ScenarioConfig::scenario_id() const {
  if (!id.empty()) return id;
  return to_string(scheme) + "_n" + std::to_string(n) + "_theta" + fmt(theta) + "_d1_" + fmt(delta1) + "_d2_" +
         fmt(delta2);
}

void ScenarioConfig::validate() const {
  const int q = scheme_dimension(scheme);
  if (n < q + 1) throw std::invalid_argument("n must be at least q + 1");
  if (!(a > 0.0)) throw std::invalid_argument("shape a must be positive");
  if (!(t0 > 0.0)) throw std::invalid_argument("t0 must be positive");
  if (!(theta > 0.0)) throw std::invalid_argument("censoring bound must be positive or infinite");
  if (beta0.size() > 0 && beta0.size() != q) throw std::invalid_argument("beta0 length does not match the scheme");
  if (n_sim < 1) throw std::invalid_argument("n_sim must be positive");
  if (rep_offset < 0) throw std::invalid_argument("rep_offset must be nonnegative");
  if (!(alpha > 0.0 && alpha < 1.0)) throw std::invalid_argument("alpha must be in (0,1)");
  const bool boot = std::any_of(tests.begin(), tests.end(), [](TestVariant v) {
    return v == TestVariant::boot_hw || v == TestVariant::boot_hc3;
  });
  if (boot && B < 100) throw std::invalid_argument("bootstrap tests need B >= 100");
}

std::vector<Hypothesis> scheme_hypotheses(Scheme s) {
  const Eigen::Index q = scheme_dimension(s);
  if (s == Scheme::veteran_like)
    return {Hypothesis::coefficients_zero(q, {1}, "H0(1)"), Hypothesis::coefficients_zero(q, {2, 3, 4}, "H0(2)")};
  return {Hypothesis::coefficients_zero(q, {1}, "C1"), Hypothesis::coefficients_zero(q, {1, 3}, "C2"),
          Hypothesis::coefficients_zero(q, {1, 2, 3}, "C3")};
}

Eigen::MatrixXd gen_covariates(Rng& rng, Scheme scheme, Eigen::Index n) {
  std::bernoulli_distribution coin(0.5);
  Eigen::MatrixXd X = Eigen::MatrixXd::Zero(n, scheme_dimension(scheme));
  if (scheme == Scheme::veteran_like) {
    std::uniform_int_distribution<int> cell(1, 4);
    std::normal_distribution<double> age(58.0, 10.5);
    for (Eigen::Index i = 0; i < n; ++i) {
      X(i, 0) = 1.0;
      X(i, 1) = coin(rng) ? 1.0 : 0.0;
      const int c = cell(rng);
      if (c > 1) X(i, c) = 1.0;  // levels 2..4 -> columns 2..4
      X(i, 5) = age(rng);
    }
  } else {
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    for (Eigen::Index i = 0; i < n; ++i) {
      X(i, 0) = 1.0;
      X(i, 1) = coin(rng) ? 1.0 : 0.0;
      X(i, 2) = coin(rng) ? 1.0 : 0.0;
      X(i, 3) = X(i, 1) * X(i, 2);
      X(i, 4) = unif(rng);
    }
  }
  return X;
}

double weibull_scale(double mu, double a, double t0) {
  if (!(mu > 0.0 && mu < 1.0)) throw std::domain_error("mean " + fmt(mu) + " is not a survival probability in (0,1)");
  return t0 * std::pow(-std::log(mu), -1.0 / a);
}

double gen_survival(Rng& rng, const Eigen::VectorXd& z, const Eigen::VectorXd& beta0, double a, double t0,
                    Link link) {
  const double lambda = weibull_scale(link_eval(link, beta0.dot(z)).mu, a, t0);
  return lambda * std::pow(-std::log(rng.uniform()), 1.0 / a);
}

double gen_censoring(Rng& rng, double theta) {
  if (std::isinf(theta)) return kNoCensoring;
  return theta * rng.uniform();
}

SimulatedSample simulate_sample(Rng& rng, const ScenarioConfig& config) {
  SimulatedSample s;
  s.X = gen_covariates(rng, config.scheme, config.n);
  const Eigen::VectorXd beta0 = config.true_beta();
  s.marks.reserve(config.n);
  for (int i = 0; i < config.n; ++i) {
    const double t = gen_survival(rng, s.X.row(i).transpose(), beta0, config.a, config.t0, config.link);
    const double c = gen_censoring(rng, config.theta);
    s.marks.push_back({std::min(t, c), t <= c});
  }
  return s;
}

Rng replication_stream(const ScenarioConfig& config, int rep) {
  return Rng(config.seed).substream({fnv1a(config.scenario_id()), static_cast<std::uint64_t>(rep)});
}

double CellCounts::mc_se() const {
  if (valid == 0) return 0.0;
  const double r = rate();
  return std::sqrt(r * (1.0 - r) / static_cast<double>(valid));
}

ReplicationOutcome run_replication(const ScenarioConfig& config, int rep) {
  const auto hyps = scheme_hypotheses(config.scheme);
  const std::size_t T = config.tests.size();
  ReplicationOutcome out;
  out.reject.assign(hyps.size(), std::vector<char>(T, 0));
  out.ok.assign(T, 0);

  const Rng stream = replication_stream(config, rep);
  Rng data_rng = stream.substream({0});
  const SimulatedSample sample = simulate_sample(data_rng, config);
  out.censored_fraction =
      static_cast<double>(std::count_if(sample.marks.begin(), sample.marks.end(), [](const auto& m) { return !m.is_event; })) /
      static_cast<double>(sample.marks.size());

  FitResult fit;
  try {
    const auto pv = jackknife_pseudo(sample.marks, EstimandFunctional::km_survival(config.t0));
    fit = solve({config.link, config.a_kind}, sample.X, pv);
  } catch (const Error&) {
    return out;
  }
  out.fit_ok = true;

  auto wants = [&](TestVariant v) { return std::find(config.tests.begin(), config.tests.end(), v) != config.tests.end(); };
  auto index = [&](TestVariant v) { return static_cast<std::size_t>(std::find(config.tests.begin(), config.tests.end(), v) - config.tests.begin()); };

  std::map<int, double> chisq_crit;
  auto asymptotic = [&](TestVariant v, CovKind kind) -> std::optional<CovarianceEstimate> {
    try {
      auto cov = estimate_covariance(kind, fit, sample.X, sample.marks);
      const std::size_t t = index(v);
      for (std::size_t h = 0; h < hyps.size(); ++h) {
        const auto w = wald_statistic(fit, cov, hyps[h]);
        auto it = chisq_crit.find(w.rank_c);
        if (it == chisq_crit.end()) it = chisq_crit.emplace(w.rank_c, chisq_quantile(1.0 - config.alpha, w.rank_c)).first;
        out.reject[h][t] = w.statistic > it->second;
      }
      out.ok[t] = 1;
      return cov;
    } catch (const Error&) {
      return std::nullopt;
    }
  };

  const bool boot_hw = wants(TestVariant::boot_hw), boot_hc3 = wants(TestVariant::boot_hc3);
  std::optional<CovarianceEstimate> pv;
  if (wants(TestVariant::corr) || boot_hw || boot_hc3) {
    if (wants(TestVariant::corr)) {
      pv = asymptotic(TestVariant::corr, CovKind::pv);
    } else {
      try {
        pv = estimate_covariance(CovKind::pv, fit, sample.X, sample.marks);
      } catch (const Error&) {
      }
    }
  }
  if (wants(TestVariant::hw)) asymptotic(TestVariant::hw, CovKind::hw);
  if (wants(TestVariant::hc3)) asymptotic(TestVariant::hc3, CovKind::hc3);

  if ((boot_hw || boot_hc3) && pv) {
    std::vector<Standardization> stds;
    std::vector<TestVariant> variants;
    if (boot_hw) {
      stds.push_back(Standardization::hw);
      variants.push_back(TestVariant::boot_hw);
    }
    if (boot_hc3) {
      stds.push_back(Standardization::hc3);
      variants.push_back(TestVariant::boot_hc3);
    }
    BootstrapConfig bc;
    bc.B = config.B;
    bc.alpha = config.alpha;
    try {
      const ReplicateSet reps = run_replicates(fit, sample.X, bc, hyps, stds, stream.substream({1}));
      for (std::size_t h = 0; h < hyps.size(); ++h) {
        const double tn = wald_statistic(fit, *pv, hyps[h]).statistic;
        for (std::size_t s = 0; s < stds.size(); ++s)
          out.reject[h][index(variants[s])] = tn > bootstrap_quantile(reps.statistics[h][s], config.alpha);
      }
      for (auto v : variants) out.ok[index(v)] = 1;
    } catch (const Error&) {
    }
  }
  return out;
}

SimulationReport run_scenario(const ScenarioConfig& config, int threads) {
  config.validate();
  const auto hyps = scheme_hypotheses(config.scheme);
  std::vector<ReplicationOutcome> outcomes(config.n_sim);
  parallel_for(static_cast<std::size_t>(config.n_sim), resolve_threads(threads), [&](std::size_t b, std::size_t e) {
    for (std::size_t i = b; i < e; ++i) outcomes[i] = run_replication(config, config.rep_offset + static_cast<int>(i));
  });

  SimulationReport report;
  report.config = config;
  report.n_sim = config.n_sim;
  for (const auto& h : hyps)
    for (auto t : config.tests) report.cells.push_back({h.label(), t, 0, 0, 0});
  double censored = 0.0;
  for (const auto& o : outcomes) {
    if (!o.fit_ok) {
      ++report.fit_failures;
      for (auto& c : report.cells) ++c.failures;
      continue;
    }
    censored += o.censored_fraction;
    for (std::size_t h = 0; h < hyps.size(); ++h) {
      for (std::size_t t = 0; t < config.tests.size(); ++t) {
        auto& c = report.cells[h * config.tests.size() + t];
        if (!o.ok[t]) {
          ++c.failures;
          continue;
        }
        ++c.valid;
        c.rejections += o.reject[h][t];
      }
    }
  }
  const long fitted = report.n_sim - report.fit_failures;
  report.censoring_rate = fitted > 0 ? censored / static_cast<double>(fitted) : 0.0;
  return report;
}

SimulationReport merge_reports(const SimulationReport& a, const SimulationReport& b) {
  if (a.config.scenario_id() != b.config.scenario_id() || a.cells.size() != b.cells.size())
    throw std::invalid_argument("reports describe different scenarios");
  SimulationReport m = a;
  m.n_sim = a.n_sim + b.n_sim;
  m.fit_failures = a.fit_failures + b.fit_failures;
  const double fa = static_cast<double>(a.n_sim - a.fit_failures), fb = static_cast<double>(b.n_sim - b.fit_failures);
  m.censoring_rate = fa + fb > 0 ? (a.censoring_rate * fa + b.censoring_rate * fb) / (fa + fb) : 0.0;
  for (std::size_t i = 0; i < m.cells.size(); ++i) {
    if (a.cells[i].hypothesis != b.cells[i].hypothesis || a.cells[i].test != b.cells[i].test)
      throw std::invalid_argument("reports have different cell layouts");
    m.cells[i].rejections += b.cells[i].rejections;
    m.cells[i].valid += b.cells[i].valid;
    m.cells[i].failures += b.cells[i].failures;
  }
  return m;
}

std::string aggregate_csv(std::vector<SimulationReport> reports) {
  if (reports.empty()) throw std::invalid_argument("nothing to aggregate");
  std::stable_sort(reports.begin(), reports.end(), [](const SimulationReport& x, const SimulationReport& y) {
    const auto& a = x.config;
    const auto& b = y.config;
    return std::tuple(static_cast<int>(a.scheme), a.n, a.theta, a.delta1, a.delta2) <
           std::tuple(static_cast<int>(b.scheme), b.n, b.theta, b.delta1, b.delta2);
  });
  std::ostringstream os;
  os << "scenario,scheme,n,theta,delta1,delta2,hypothesis,test,rejections,valid,rate,mc_se,failures,flagged\n";
  os.precision(6);
  for (const auto& r : reports) {
    const auto& c = r.config;
    for (const auto& cell : r.cells) {
      os << c.scenario_id() << ',' << to_string(c.scheme) << ',' << c.n << ',' << fmt(c.theta) << ',' << c.delta1
         << ',' << c.delta2 << ',' << cell.hypothesis << ',' << to_string(cell.test) << ',' << cell.rejections << ','
         << cell.valid << ',' << cell.rate() << ',' << cell.mc_se() << ',' << cell.failures << ','
         << (r.flagged() ? 1 : 0) << '\n';
    }
  }
  return os.str();
}

namespace {

using nlohmann::json;

double theta_from_json(const json& j) {
  if (j.is_null()) return kNoCensoring;
  if (j.is_string()) {
    const auto s = j.get<std::string>();
    if (s == "inf" || s == "Inf" || s == "infinity") return kNoCensoring;
    throw std::invalid_argument("theta must be a number, null or \"inf\"");
  }
  return j.get<double>();
}

void apply_fields(ScenarioConfig& c, const json& j) {
  static const char* known[] = {"id", "scheme", "n", "theta", "a", "t0", "delta1", "delta2", "delta", "beta0", "link",
                                "a_kind", "tests", "n_sim", "B", "alpha", "seed", "rep_offset"};
  for (const auto& [key, _] : j.items())
    if (std::find_if(std::begin(known), std::end(known), [&](const char* k) { return key == k; }) == std::end(known))
      throw std::invalid_argument("unknown scenario field '" + key + "'");
  if (j.contains("id")) c.id = j["id"].get<std::string>();
  if (j.contains("n")) c.n = j["n"].get<int>();
  if (j.contains("theta")) c.theta = theta_from_json(j["theta"]);
  if (j.contains("a")) c.a = j["a"].get<double>();
  if (j.contains("t0")) c.t0 = j["t0"].get<double>();
  if (j.contains("delta1")) c.delta1 = j["delta1"].get<double>();
  if (j.contains("delta2")) c.delta2 = j["delta2"].get<double>();
  if (j.contains("delta")) c.delta2 = j["delta"].get<double>();
  if (j.contains("beta0")) {
    const auto v = j["beta0"].get<std::vector<double>>();
    c.beta0 = Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
  }
  if (j.contains("link")) c.link = link_from_string(j["link"].get<std::string>());
  if (j.contains("a_kind")) {
    const auto s = j["a_kind"].get<std::string>();
    if (s != "dmu" && s != "design") throw std::invalid_argument("a_kind must be dmu or design");
    c.a_kind = s == "dmu" ? AKind::dmu : AKind::design;
  }
  if (j.contains("tests")) {
    c.tests.clear();
    for (const auto& t : j["tests"]) c.tests.push_back(test_variant_from_string(t.get<std::string>()));
  }
  if (j.contains("n_sim")) c.n_sim = j["n_sim"].get<int>();
  if (j.contains("B")) c.B = j["B"].get<int>();
  if (j.contains("alpha")) c.alpha = j["alpha"].get<double>();
  if (j.contains("seed")) c.seed = j["seed"].get<std::uint64_t>();
  if (j.contains("rep_offset")) c.rep_offset = j["rep_offset"].get<int>();
}

ScenarioConfig scenario_from(const json& defaults, const json& j) {
  std::string scheme = "veteran_like";
  if (defaults.contains("scheme")) scheme = defaults["scheme"].get<std::string>();
  if (j.contains("scheme")) scheme = j["scheme"].get<std::string>();
  ScenarioConfig c = scheme_from_string(scheme) == Scheme::veteran_like ? ScenarioConfig::veteran_like(200, kNoCensoring)
                                                                        : ScenarioConfig::interaction(200, kNoCensoring);
  json d = defaults;
  d.erase("scheme");
  json s = j;
  s.erase("scheme");
  apply_fields(c, d);
  apply_fields(c, s);
  c.validate();
  return c;
}

}  // namespace

std::vector<ScenarioConfig> parse_scenarios(const std::string& json_text) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::exception& e) {
    throw std::invalid_argument(std::string("invalid scenario JSON: ") + e.what());
  }
  if (!doc.is_object()) throw std::invalid_argument("scenario document must be a JSON object");
  try {
    if (!doc.contains("scenarios")) return {scenario_from(json::object(), doc)};
    const json defaults = doc.value("defaults", json::object());
    std::vector<ScenarioConfig> out;
    for (const auto& s : doc["scenarios"]) out.push_back(scenario_from(defaults, s));
    if (out.empty()) throw std::invalid_argument("scenario list is empty");
    return out;
  } catch (const json::exception& e) {
    throw std::invalid_argument(std::string("bad scenario field: ") + e.what());
  }
}

std::string scenario_to_json(const ScenarioConfig& c) {
  json j;
  j["id"] = c.scenario_id();
  j["scheme"] = to_string(c.scheme);
  j["n"] = c.n;
  j["theta"] = std::isinf(c.theta) ? json("inf") : json(c.theta);
  j["a"] = c.a;
  j["t0"] = c.t0;
  j["delta1"] = c.delta1;
  j["delta2"] = c.delta2;
  const Eigen::VectorXd b = c.true_beta();
  j["beta0"] = std::vector<double>(b.data(), b.data() + b.size());
  j["link"] = link_name(c.link);
  j["a_kind"] = c.a_kind == AKind::dmu ? "dmu" : "design";
  json tests = json::array();
  for (auto t : c.tests) tests.push_back(to_string(t));
  j["tests"] = tests;
  j["n_sim"] = c.n_sim;
  j["B"] = c.B;
  j["alpha"] = c.alpha;
  j["seed"] = c.seed;
  j["rep_offset"] = c.rep_offset;
  return j.dump(2);
}

}  // namespace pseudoreg
