// pseudoreg command-line interface.
//
// Exit codes: 0 success, 2 usage or input validation error, 3 numerical failure.

#include "pseudoreg/bootstrap.hpp"
#include "pseudoreg/data_model.hpp"
#include "pseudoreg/error.hpp"
#include "pseudoreg/parallel.hpp"
#include "pseudoreg/simulation.hpp"

#include "CLI11.hpp"
#include "json.hpp"

#include <openssl/evp.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <limits>
#include <sstream>

#ifndef PSEUDOREG_DATA_DIR
#define PSEUDOREG_DATA_DIR "data"
#endif

using namespace pseudoreg;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

constexpr int kExitUsage = 2;
constexpr int kExitNumerical = 3;

struct Options {
  std::string data;
  std::string schema;
  double t0 = std::numeric_limits<double>::quiet_NaN();
  std::string link = "logit";
  std::string a_kind = "dmu";
  std::string boundary = "right";
  std::string cov = "pv";
  std::string hypothesis_file;
  std::string preset;
  int bootstrap = 0;
  std::string standardize = "hw";
  double alpha = 0.05;
  std::uint64_t seed = 0;
  bool seed_given = false;
  int threads = 0;
  bool json = false;
  bool csv = false;
  bool verbose = false;
  std::string out;
  std::string manifest;
  std::string config;
};

// Usage errors detected after parsing (exit 2).
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::string sha256_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return "";
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr);
  char buf[1 << 15];
  while (in) {
    in.read(buf, sizeof buf);
    if (in.gcount() > 0) EVP_DigestUpdate(ctx, buf, static_cast<std::size_t>(in.gcount()));
  }
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_DigestFinal_ex(ctx, md, &len);
  EVP_MD_CTX_free(ctx);
  std::ostringstream os;
  for (unsigned int i = 0; i < len; ++i) os << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(md[i]);
  return os.str();
}

Link parse_link(const std::string& s) {
  if (s == "identity") return Link::identity;
  if (s == "cloglog") return Link::cloglog;
  return Link::logit;
}

Boundary parse_boundary(const std::string& s) { return s == "left" ? Boundary::left_limit : Boundary::right_continuous; }

std::vector<CovKind> parse_cov(const std::string& s) {
  if (s == "all") return {CovKind::pv, CovKind::hw, CovKind::hc3};
  if (s == "hw") return {CovKind::hw};
  if (s == "hc3") return {CovKind::hc3};
  return {CovKind::pv};
}

struct Analysis {
  Dataset data;
  DataSchema schema;
  DesignMatrix design;
  std::vector<ObservationMark> marks;
  EstimandFunctional phi;
  MeanModel model;
  std::vector<std::string> inputs;
};

Analysis load(const Options& o) {
  if (o.data.empty()) throw UsageError("--data is required");
  if (!std::isfinite(o.t0) || o.t0 <= 0.0) throw UsageError("--t0 must be a positive number");
  Analysis a;
  a.inputs.push_back(o.data);
  fs::path schema_path = o.schema;
  if (schema_path.empty() && fs::exists(o.data + ".schema.json")) schema_path = o.data + ".schema.json";
  if (schema_path.empty()) {
    std::string stem = fs::path(o.data).replace_extension(".schema.json").string();
    if (fs::exists(stem)) schema_path = stem;
  }
  if (!schema_path.empty()) {
    a.schema = load_schema(schema_path);
    a.inputs.push_back(schema_path.string());
    a.data = load_csv(o.data, a.schema.csv);
  } else {
    a.data = load_csv(o.data);
    a.schema = infer_schema(a.data);
  }
  a.design = encode_design(a.data, a.schema.design);
  a.marks = marks_of(a.data);
  a.phi = EstimandFunctional::km_survival(o.t0, parse_boundary(o.boundary));
  a.model = {parse_link(o.link), o.a_kind == "design" ? AKind::design : AKind::dmu};
  return a;
}

FitResult fit_model(const Analysis& a, bool verbose) {
  const PseudoValues pv = jackknife_pseudo(a.marks, a.phi);
  FitResult fit = solve(a.model, a.design.rows, pv);
  if (verbose) {
    std::cerr << "Kaplan-Meier estimate at t0 = " << a.phi.t0 << ": " << std::setprecision(10) << pv.full_sample_value
              << "\nNewton iterations: " << fit.iterations << ", residual " << fit.residual_norm << "\n";
  }
  return fit;
}

Hypothesis read_hypothesis(const Options& o, Eigen::Index q) {
  if (!o.preset.empty()) {
    if (q != 6) throw UsageError("presets apply to the six-coefficient veteran design");
    if (o.preset == "veteran-trt") return Hypothesis::coefficients_zero(q, {1}, "veteran-trt");
    if (o.preset == "veteran-celltype") return Hypothesis::coefficients_zero(q, {2, 3, 4}, "veteran-celltype");
    throw UsageError("unknown preset '" + o.preset + "'");
  }
  if (o.hypothesis_file.empty()) throw UsageError("--hypothesis or --preset is required");
  std::ifstream in(o.hypothesis_file);
  if (!in) throw UsageError("cannot open hypothesis file " + o.hypothesis_file);
  std::vector<std::vector<double>> rows;
  std::vector<double> rhs;
  std::string line;
  while (std::getline(in, line)) {
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto bar = line.find('|');
    if (bar == std::string::npos) throw UsageError("hypothesis row without '|': " + line);
    std::istringstream lhs(line.substr(0, bar)), right(line.substr(bar + 1));
    std::vector<double> row;
    double v;
    while (lhs >> v) row.push_back(v);
    if (!lhs.eof()) throw UsageError("non-numeric entry in hypothesis row: " + line);
    double b;
    if (!(right >> b)) throw UsageError("missing right-hand side in hypothesis row: " + line);
    if (static_cast<Eigen::Index>(row.size()) != q)
      throw UsageError("hypothesis row has " + std::to_string(row.size()) + " entries, design has " +
                       std::to_string(q) + " columns");
    rows.push_back(row);
    rhs.push_back(b);
  }
  if (rows.empty()) throw UsageError("hypothesis file has no rows");
  Eigen::MatrixXd C(static_cast<Eigen::Index>(rows.size()), q);
  Eigen::VectorXd bvec(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (Eigen::Index j = 0; j < q; ++j) C(static_cast<Eigen::Index>(i), j) = rows[i][static_cast<std::size_t>(j)];
    bvec[static_cast<Eigen::Index>(i)] = rhs[i];
  }
  return Hypothesis(C, bvec, fs::path(o.hypothesis_file).filename().string());
}

std::string fixed(double x, int digits = 3) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(digits) << x;
  return os.str();
}

// Output sink: stdout or --out, in the selected format.
struct Output {
  json doc;
  std::string csv;
  std::string text;
};

void emit(const Options& o, const Output& out) {
  std::string body = o.json ? out.doc.dump(2) + "\n" : o.csv ? out.csv : out.text;
  if (o.out.empty()) {
    std::cout << body;
    return;
  }
  std::ofstream f(o.out, std::ios::binary);
  if (!f) throw UsageError("cannot write " + o.out);
  f << body;
}

void write_manifest(const Options& o, const std::string& sub, const std::vector<std::string>& argv,
                    const std::vector<std::string>& inputs, double seconds) {
  std::string path = o.manifest;
  if (path.empty() && !o.out.empty()) path = o.out + ".manifest.json";
  if (path.empty()) return;
  json m;
  m["subcommand"] = sub;
  m["argv"] = argv;
  m["software_version"] = PSEUDOREG_VERSION;
  m["seed"] = o.seed;
  json cfg;
  cfg["data"] = o.data;
  cfg["schema"] = o.schema;
  cfg["t0"] = std::isfinite(o.t0) ? json(o.t0) : json(nullptr);
  cfg["link"] = o.link;
  cfg["a"] = o.a_kind;
  cfg["boundary"] = o.boundary;
  cfg["cov"] = o.cov;
  cfg["hypothesis"] = o.hypothesis_file;
  cfg["preset"] = o.preset;
  cfg["bootstrap"] = o.bootstrap;
  cfg["standardize"] = o.standardize;
  cfg["alpha"] = o.alpha;
  cfg["threads"] = resolve_threads(o.threads);
  cfg["format"] = o.json ? "json" : o.csv ? "csv" : "table";
  cfg["out"] = o.out;
  cfg["config"] = o.config;
  m["config"] = cfg;
  json digests = json::array();
  for (const auto& p : inputs) digests.push_back({{"path", p}, {"sha256", sha256_file(p)}});
  m["inputs"] = digests;
  m["wall_time_seconds"] = seconds;
  std::ofstream f(path);
  if (!f) throw UsageError("cannot write manifest " + path);
  f << m.dump(2) << "\n";
}

std::vector<std::string> collect_inputs(const Analysis& a, const Options& o) {
  auto v = a.inputs;
  if (!o.hypothesis_file.empty()) v.push_back(o.hypothesis_file);
  return v;
}

// ---- subcommands -----------------------------------------------------------

std::vector<std::string> run_pseudo(const Options& o) {
  const Analysis a = load(o);
  const PseudoValues pv = jackknife_pseudo(a.marks, a.phi);
  if (o.verbose) std::cerr << "Kaplan-Meier estimate at t0 = " << o.t0 << ": " << std::setprecision(10) << pv.full_sample_value << "\n";
  Output out;
  out.doc["t0"] = o.t0;
  out.doc["km_estimate"] = pv.full_sample_value;
  std::ostringstream csv, text;
  csv << std::setprecision(17) << "record,time,status,pseudo\n";
  text << std::setprecision(10) << "record  time  status  pseudo\n";
  json rows = json::array();
  for (std::size_t k = 0; k < a.marks.size(); ++k) {
    const double v = pv.values[static_cast<Eigen::Index>(k)];
    rows.push_back({{"record", k}, {"time", a.marks[k].time}, {"status", a.marks[k].is_event ? 1 : 0}, {"pseudo", v}});
    csv << k << ',' << a.marks[k].time << ',' << (a.marks[k].is_event ? 1 : 0) << ',' << v << '\n';
    text << k << "  " << a.marks[k].time << "  " << (a.marks[k].is_event ? 1 : 0) << "  " << v << '\n';
  }
  out.doc["pseudo_values"] = rows;
  out.csv = csv.str();
  out.text = text.str();
  emit(o, out);
  return collect_inputs(a, o);
}

std::vector<std::string> run_fit(const Options& o) {
  const Analysis a = load(o);
  const FitResult fit = fit_model(a, o.verbose);
  const auto kinds = parse_cov(o.cov);
  std::vector<CovarianceEstimate> covs;
  for (auto k : kinds) covs.push_back(estimate_covariance(k, fit, a.design.rows, a.marks, resolve_threads(o.threads)));
  const double n = static_cast<double>(a.design.n());

  Output out;
  std::ostringstream csv, text;
  csv << std::setprecision(17) << "term,coefficient";
  text << std::left << std::setw(22) << "term" << std::right << std::setw(12) << "coefficient";
  for (const auto& c : covs) {
    csv << ",se_" << to_string(c.kind);
    text << std::setw(10) << ("SE(" + to_string(c.kind) + ")");
  }
  csv << '\n';
  text << '\n';
  json terms = json::array();
  for (Eigen::Index j = 0; j < a.design.q(); ++j) {
    const auto& name = a.design.column_names[static_cast<std::size_t>(j)];
    json t{{"term", name}, {"coefficient", fit.beta_hat[j]}};
    csv << name << ',' << fit.beta_hat[j];
    text << std::left << std::setw(22) << name << std::right << std::setw(12) << fixed(fit.beta_hat[j]);
    for (const auto& c : covs) {
      const double se = std::sqrt(c.sandwich(j, j) / n);
      t["se_" + to_string(c.kind)] = se;
      csv << ',' << se;
      text << std::setw(10) << fixed(se);
    }
    terms.push_back(t);
    csv << '\n';
    text << '\n';
  }
  out.doc["n"] = a.design.n();
  out.doc["t0"] = o.t0;
  out.doc["link"] = o.link;
  out.doc["a"] = o.a_kind;
  out.doc["iterations"] = fit.iterations;
  out.doc["km_estimate"] = fit.pseudo.full_sample_value;
  out.doc["terms"] = terms;
  out.csv = csv.str();
  out.text = text.str();
  emit(o, out);
  return collect_inputs(a, o);
}

std::vector<std::string> run_test_cmd(const Options& o) {
  const Analysis a = load(o);
  const FitResult fit = fit_model(a, o.verbose);
  const Hypothesis hyp = read_hypothesis(o, a.design.q());
  const int threads = resolve_threads(o.threads);

  Output out;
  json results = json::array();
  std::ostringstream csv, text;
  csv << std::setprecision(17) << "method,covariance,statistic,rank,p_value,critical_value,reject\n";
  text << "hypothesis " << (hyp.label().empty() ? "C beta = b" : hyp.label()) << ", alpha = " << o.alpha << "\n";
  text << std::left << std::setw(12) << "method" << std::setw(12) << "covariance" << std::right << std::setw(12)
       << "statistic" << std::setw(6) << "rank" << std::setw(12) << "p-value" << std::setw(12) << "critical"
       << std::setw(8) << "reject" << "\n";
  auto add = [&](const std::string& method, const std::string& cov, const TestResult& r) {
    results.push_back({{"method", method}, {"covariance", cov}, {"statistic", r.statistic}, {"rank", r.rank_c},
                       {"p_value", r.p_value}, {"critical_value", r.critical_value}, {"reject", r.reject}});
    csv << method << ',' << cov << ',' << r.statistic << ',' << r.rank_c << ',' << r.p_value << ',' << r.critical_value
        << ',' << (r.reject ? 1 : 0) << '\n';
    text << std::left << std::setw(12) << method << std::setw(12) << cov << std::right << std::setw(12)
         << fixed(r.statistic) << std::setw(6) << r.rank_c << std::setw(12) << fixed(r.p_value, 4) << std::setw(12)
         << fixed(r.critical_value) << std::setw(8) << (r.reject ? "yes" : "no") << "\n";
  };
  for (auto k : parse_cov(o.cov)) {
    const auto cov = estimate_covariance(k, fit, a.design.rows, a.marks, threads);
    add("chisq", to_string(k), run_test(fit, cov, hyp, o.alpha));
  }
  if (o.bootstrap > 0) {
    BootstrapConfig bc;
    bc.B = o.bootstrap;
    bc.alpha = o.alpha;
    bc.seed = o.seed;
    bc.threads = threads;
    bc.standardization = o.standardize == "hc3" ? Standardization::hc3 : Standardization::hw;
    try {
      bc.validate();
    } catch (const std::invalid_argument& e) {
      throw UsageError(e.what());
    }
    const auto pv = estimate_covariance(CovKind::pv, fit, a.design.rows, a.marks, threads);
    add("bootstrap", "pv/" + to_string(bc.standardization), bootstrap_test(fit, a.design.rows, pv, hyp, bc));
  }
  out.doc["hypothesis"] = hyp.label();
  out.doc["alpha"] = o.alpha;
  out.doc["results"] = results;
  out.csv = csv.str();
  out.text = text.str();
  emit(o, out);
  return collect_inputs(a, o);
}

std::vector<std::string> run_simulate(const Options& o) {
  if (o.config.empty()) throw UsageError("--config is required");
  if (o.out.empty()) throw UsageError("--out is required for simulate");
  std::ifstream in(o.config);
  if (!in) throw UsageError("cannot open config " + o.config);
  std::stringstream ss;
  ss << in.rdbuf();
  std::vector<ScenarioConfig> scenarios;
  try {
    scenarios = parse_scenarios(ss.str());
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  std::vector<SimulationReport> reports;
  for (auto sc : scenarios) {
    if (o.seed_given) sc.seed = o.seed;
    if (o.verbose) std::cerr << "running " << sc.scenario_id() << " (" << sc.n_sim << " replications)\n";
    reports.push_back(run_scenario(sc, resolve_threads(o.threads)));
    if (reports.back().flagged())
      std::cerr << "warning: " << sc.scenario_id() << " has " << reports.back().fit_failures << " fit failures\n";
  }
  const std::string table = aggregate_csv(reports);
  std::ofstream f(o.out, std::ios::binary);
  if (!f) throw UsageError("cannot write " + o.out);
  f << table;
  std::cout << "wrote " << o.out << " (" << reports.size() << " scenarios)\n";
  return {o.config};
}

std::vector<std::string> run_veteran_demo(Options o) {
  if (o.data.empty()) o.data = std::string(PSEUDOREG_DATA_DIR) + "/veteran.csv";
  if (!std::isfinite(o.t0)) o.t0 = 90.0;
  o.boundary = "left";
  o.link = "logit";
  o.a_kind = "dmu";
  const Analysis a = load(o);
  const FitResult fit = fit_model(a, o.verbose);
  const int threads = resolve_threads(o.threads);
  const double n = static_cast<double>(a.design.n());
  const std::vector<CovKind> kinds{CovKind::pv, CovKind::hw, CovKind::hc3};
  std::vector<CovarianceEstimate> covs;
  for (auto k : kinds) covs.push_back(estimate_covariance(k, fit, a.design.rows, a.marks, threads));
  const std::vector<Hypothesis> hyps{Hypothesis::coefficients_zero(6, {1}, "t_n(1)"),
                                     Hypothesis::coefficients_zero(6, {2, 3, 4}, "t_n(3)")};

  Output out;
  std::ostringstream text, csv;
  text << "Pseudo-observation regression, 90-day survival (n = " << a.design.n() << ", t0 = " << o.t0 << ")\n\n";
  text << std::left << std::setw(20) << "" << std::right << std::setw(12) << "Coefficient" << std::setw(10) << "PV"
       << std::setw(10) << "HW" << std::setw(10) << "HC3" << "\n";
  csv << std::setprecision(17) << "row,coefficient,pv,hw,hc3\n";
  json terms = json::array();
  for (Eigen::Index j = 0; j < a.design.q(); ++j) {
    const auto& name = a.design.column_names[static_cast<std::size_t>(j)];
    text << std::left << std::setw(20) << name << std::right << std::setw(12) << fixed(fit.beta_hat[j]);
    csv << name << ',' << fit.beta_hat[j];
    json t{{"term", name}, {"coefficient", fit.beta_hat[j]}};
    for (const auto& c : covs) {
      const double se = std::sqrt(c.sandwich(j, j) / n);
      text << std::setw(10) << fixed(se);
      csv << ',' << se;
      t["se_" + to_string(c.kind)] = se;
    }
    text << "\n";
    csv << "\n";
    terms.push_back(t);
  }
  text << std::string(62, '-') << "\n";
  json tests = json::array();
  for (const auto& h : hyps) {
    text << std::left << std::setw(20) << h.label() << std::right << std::setw(12) << "";
    csv << h.label() << ',';
    json t{{"statistic", h.label()}};
    for (const auto& c : covs) {
      const double s = wald_statistic(fit, c, h).statistic;
      text << std::setw(10) << fixed(s);
      csv << ',' << s;
      t[to_string(c.kind)] = s;
    }
    text << "\n";
    csv << "\n";
    tests.push_back(t);
  }
  out.doc["terms"] = terms;
  out.doc["tests"] = tests;
  out.text = text.str();
  out.csv = csv.str();
  emit(o, out);
  return collect_inputs(a, o);
}

void add_data_options(CLI::App* sub, Options& o, bool t0_required) {
  sub->add_option("--data", o.data, "CSV file with time, status and covariate columns")->check(CLI::ExistingFile);
  sub->add_option("--schema", o.schema, "schema JSON (default: <data>.schema.json if present, else inferred)")
      ->check(CLI::ExistingFile);
  auto* t0 = sub->add_option("--t0", o.t0, "time point of the survival probability");
  if (t0_required) t0->required();
  sub->add_option("--link", o.link, "response function")->check(CLI::IsMember({"identity", "logit", "cloglog"}));
  sub->add_option("--a", o.a_kind, "A(beta, z): dmu = d mu / d beta, design = z")->check(CLI::IsMember({"dmu", "design"}));
  sub->add_option("--boundary", o.boundary, "right: S(t0); left: S(t0-)")->check(CLI::IsMember({"right", "left"}));
  sub->add_option("--threads", o.threads, "worker threads (default: PSEUDOREG_THREADS or 1)")->check(CLI::PositiveNumber);
}

void add_output_options(CLI::App* sub, Options& o) {
  auto* j = sub->add_flag("--json", o.json, "JSON output");
  auto* c = sub->add_flag("--csv", o.csv, "CSV output");
  j->excludes(c);
  sub->add_option("--out", o.out, "write output here instead of stdout");
  sub->add_option("--manifest", o.manifest, "run manifest path (default: <out>.manifest.json when --out is given)");
  sub->add_flag("--verbose", o.verbose, "progress and diagnostics on stderr");
}

int classify(const Error& e) { return e.family() == Error::Family::input ? kExitUsage : kExitNumerical; }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Pseudo-observation regression for right-censored survival data"};
  app.set_version_flag("--version", PSEUDOREG_VERSION);
  app.require_subcommand(1);
  Options o;

  auto* pseudo = app.add_subcommand("pseudo", "jackknife pseudo-values of the Kaplan-Meier estimate at t0");
  add_data_options(pseudo, o, true);
  add_output_options(pseudo, o);

  auto* fit = app.add_subcommand("fit", "fit the pseudo-observation regression model");
  add_data_options(fit, o, true);
  add_output_options(fit, o);
  fit->add_option("--cov", o.cov, "covariance estimator")->check(CLI::IsMember({"hw", "hc3", "pv", "all"}));

  auto* test = app.add_subcommand("test", "Wald-type test of C beta = b");
  add_data_options(test, o, true);
  add_output_options(test, o);
  test->add_option("--cov", o.cov, "covariance estimator")->check(CLI::IsMember({"hw", "hc3", "pv", "all"}));
  auto* hfile = test->add_option("--hypothesis", o.hypothesis_file, "file with rows 'c_1 ... c_q | b'")
                    ->check(CLI::ExistingFile);
  auto* preset = test->add_option("--preset", o.preset, "named hypothesis")
                     ->check(CLI::IsMember({"veteran-trt", "veteran-celltype"}));
  hfile->excludes(preset);
  test->add_option("--bootstrap", o.bootstrap, "bootstrap replicates (0: asymptotic tests only)");
  test->add_option("--standardize", o.standardize, "bootstrap standardization")->check(CLI::IsMember({"hw", "hc3"}));
  test->add_option("--alpha", o.alpha, "significance level")->check(CLI::Range(1e-9, 1.0 - 1e-9));
  auto* seed_opt = test->add_option("--seed", o.seed, "bootstrap seed");

  auto* sim = app.add_subcommand("simulate", "Monte-Carlo rejection rates for scenario grids");
  sim->add_option("--config", o.config, "scenario JSON")->required()->check(CLI::ExistingFile);
  sim->add_option("--out", o.out, "results CSV")->required();
  sim->add_option("--manifest", o.manifest, "run manifest path (default: <out>.manifest.json)");
  sim->add_option("--threads", o.threads, "worker threads (default: PSEUDOREG_THREADS or 1)")->check(CLI::PositiveNumber);
  auto* sim_seed = sim->add_option("--seed", o.seed, "base seed overriding the config");
  sim->add_flag("--verbose", o.verbose, "progress on stderr");

  auto* demo = app.add_subcommand("veteran-demo", "the 90-day survival analysis of the bundled veteran data");
  add_data_options(demo, o, false);
  add_output_options(demo, o);

  std::vector<std::string> args(argv, argv + argc);
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }
  o.seed_given = seed_opt->count() > 0 || sim_seed->count() > 0;

  const auto start = std::chrono::steady_clock::now();
  std::string name;
  try {
    std::vector<std::string> inputs;
    if (pseudo->parsed()) {
      name = "pseudo";
      inputs = run_pseudo(o);
    } else if (fit->parsed()) {
      name = "fit";
      inputs = run_fit(o);
    } else if (test->parsed()) {
      name = "test";
      inputs = run_test_cmd(o);
    } else if (sim->parsed()) {
      name = "simulate";
      inputs = run_simulate(o);
    } else {
      name = "veteran-demo";
      inputs = run_veteran_demo(o);
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    write_manifest(o, name, args, inputs, secs);
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return classify(e);
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitNumerical;
  }
  return 0;
}
