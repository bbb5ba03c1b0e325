#include "rre/cli.hpp"

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "rre/config_io.hpp"
#include "rre/critical.hpp"
#include "rre/maps.hpp"
#include "rre/model.hpp"
#include "rre/simulator.hpp"
#include "rre/stats.hpp"
#include "rre/support.hpp"

namespace rre {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

/// Flags shared by every subcommand. Per-command defaults are set when the
/// options are registered; a value given on the command line overrides the
/// same field of --config.
struct Options {
  std::string config;
  std::string example = "scalar";
  std::vector<double> gamma;
  std::uint64_t seed = 1;
  int horizon = 0;
  int burn_in = kDefaultBurnIn;
  int replicates = 0;
  int depth = kDefaultSupportDepth;
  std::string out;
  unsigned threads = 0;
  std::string p0 = "pstar";

  CLI::Option* gamma_opt = nullptr;
  CLI::Option* seed_opt = nullptr;
  CLI::Option* horizon_opt = nullptr;
  CLI::Option* burn_in_opt = nullptr;
  CLI::Option* replicates_opt = nullptr;
  CLI::Option* depth_opt = nullptr;
  CLI::Option* example_opt = nullptr;
};

void add_common(CLI::App* app, Options& o, std::vector<double> default_gamma, int horizon,
                int replicates) {
  o.gamma = std::move(default_gamma);
  o.horizon = horizon;
  o.replicates = replicates;
  app->add_option("--config", o.config, "Experiment configuration (JSON)");
  o.example_opt = app->add_option("--example", o.example, "Built-in system: scalar or random10");
  o.gamma_opt = app->add_option("--gamma", o.gamma, "Arrival probability (comma separated list)")
                    ->delimiter(',');
  o.seed_opt = app->add_option("--seed", o.seed, "Random seed");
  o.horizon_opt = app->add_option("--horizon", o.horizon, "Number of time steps");
  o.burn_in_opt = app->add_option("--burn-in", o.burn_in, "Steps discarded before averaging");
  o.replicates_opt = app->add_option("--replicates", o.replicates, "Independent trajectories");
  o.depth_opt = app->add_option("--depth", o.depth, "Maximum word length for the support atlas");
  app->add_option("--out", o.out,
                  std::string("Output directory (default: $") + kOutputRootEnv +
                      "/<command> if set, else stdout)");
  app->add_option("--threads", o.threads, "Worker threads (0 = hardware concurrency)");
  app->add_option("--p0", o.p0, "Initial covariance: pstar, zero or q")
      ->check(CLI::IsMember({"pstar", "zero", "q"}));
}

/// The resolved experiment: config file values overridden by explicit flags.
struct Experiment {
  ExperimentConfig config;
  unsigned threads = 0;
  std::string p0_kind;
  std::optional<std::filesystem::path> out_dir;

  double gamma() const { return config.gamma_bar.front(); }
  std::uint64_t seed() const { return config.seeds.front(); }
  const SystemModel& system() const { return config.system; }

  SymMatrix initial_covariance() const {
    if (p0_kind == "zero") return SymMatrix::Zero(system().state_dim());
    if (p0_kind == "q") return system().Q();
    return solve_dare(system()).p_star;
  }
};

Experiment resolve(const Options& o, const std::string& command) {
  Experiment e;
  if (!o.config.empty()) {
    e.config = load_config(o.config);
    if (o.example_opt->count()) {
      e.config.source = ExperimentConfig::SystemSource::kExample;
      e.config.system_ref = o.example;
      e.config.system = example_system(o.example);
    }
  } else {
    e.config.source = ExperimentConfig::SystemSource::kExample;
    e.config.system_ref = o.example;
    e.config.system = example_system(o.example);
  }
  const bool from_file = !o.config.empty();
  if (!from_file || o.gamma_opt->count()) e.config.gamma_bar = o.gamma;
  if (!from_file || o.seed_opt->count()) e.config.seeds = {o.seed};
  if (!from_file || o.horizon_opt->count()) e.config.horizon = o.horizon;
  if (!from_file || o.burn_in_opt->count()) e.config.burn_in = o.burn_in;
  if (!from_file || o.replicates_opt->count()) e.config.replicates = o.replicates;
  if (!from_file || o.depth_opt->count()) e.config.depth = o.depth;

  std::vector<std::string> problems;
  if (e.config.gamma_bar.empty()) problems.push_back("--gamma: at least one value required");
  for (double g : e.config.gamma_bar) {
    if (!(g >= 0.0 && g <= 1.0)) problems.push_back("--gamma: " + format_double(g) + " ∉ [0,1]");
  }
  if (e.config.horizon < 1) problems.push_back("--horizon: must be >= 1");
  if (e.config.burn_in < 0) problems.push_back("--burn-in: must be >= 0");
  if (e.config.replicates < 1) problems.push_back("--replicates: must be >= 1");
  if (e.config.depth < 0) problems.push_back("--depth: must be >= 0");
  if (!problems.empty()) throw ValidationError(problems);

  e.threads = o.threads;
  e.p0_kind = o.p0;
  if (!o.out.empty()) {
    e.out_dir = o.out;
  } else if (!e.config.output_dir.empty()) {
    e.out_dir = e.config.output_dir;
  } else if (const char* root = std::getenv(kOutputRootEnv); root && *root) {
    e.out_dir = std::filesystem::path(root) / command;
  }
  if (e.out_dir) e.config.output_dir = e.out_dir->string();
  return e;
}

std::string gamma_tag(double g) {
  std::ostringstream os;
  os << g;
  return os.str();
}

/// Writes `results` to the experiment's output directory, or streams the
/// primary file to stdout when there is none.
void emit(const Experiment& e, const ResultSet& results, std::ostream& out,
          const std::string& primary) {
  if (e.out_dir) {
    const Manifest m = write_outputs(results, *e.out_dir, &e.config);
    out << "wrote " << m.outputs.size() << " file(s) and " << kManifestName << " to "
        << e.out_dir->string() << "\n";
    return;
  }
  for (const auto& f : results.files) {
    if (f.name == primary) out << f.content;
  }
}

int cmd_validate(const Experiment& e, std::ostream& out) {
  const SystemModel& m = e.system();
  nlohmann::json j{{"states", m.state_dim()},
                   {"outputs", m.output_dim()},
                   {"alpha", spectral_abscissa(m)},
                   {"detectable", check_detectability(m)},
                   {"stabilizable", check_stabilizability(m)},
                   {"q_positive_definite", m.q_strictly_positive()},
                   {"r_positive_definite", true}};
  ResultSet rs{{{"validate.json", j.dump(2) + "\n", 0.0}}};
  emit(e, rs, out, "validate.json");
  return kExitOk;
}

int cmd_dare(const Experiment& e, double tol, int max_iter, std::ostream& out) {
  const auto start = Clock::now();
  const DareSolution sol = solve_dare(e.system(), tol, max_iter);
  nlohmann::json j{{"p_star", matrix_to_json(sol.p_star.mat())},
                   {"gain", matrix_to_json(sol.gain)},
                   {"residual", sol.residual},
                   {"iterations", sol.iterations}};
  std::ostringstream text;
  text.precision(17);
  text << "P* =\n" << sol.p_star.mat() << "\nK =\n" << sol.gain << "\nresidual = "
       << std::scientific << sol.residual << "\niterations = " << sol.iterations << "\n";
  ResultSet rs{{{"dare.json", j.dump(2) + "\n", seconds_since(start)}}};
  if (e.out_dir) {
    emit(e, rs, out, "dare.json");
  }
  out << text.str();
  return kExitOk;
}

int cmd_simulate(const Experiment& e, bool full_matrix, std::ostream& out) {
  const auto start = Clock::now();
  std::ostringstream csv;
  write_trajectory_csv(csv, e.system(), ArrivalProcess{e.gamma(), e.seed(), 0},
                       e.initial_covariance(), e.config.horizon, full_matrix);
  ResultSet rs{{{"trajectory.csv", csv.str(), seconds_since(start)}}};
  emit(e, rs, out, "trajectory.csv");
  return kExitOk;
}

int cmd_cdf(const Experiment& e, const std::vector<std::string>& functionals,
            const std::vector<double>& thresholds, std::ostream& out) {
  const SystemModel& m = e.system();
  const SymMatrix p0 = e.initial_covariance();
  const DareSolution dare = solve_dare(m);
  std::vector<Functional> fs;
  for (const auto& name : functionals) fs.push_back(Functional::parse(name));

  ResultSet rs;
  nlohmann::json summary{{"time", e.config.horizon},
                         {"replicates", e.config.replicates},
                         {"seed", e.seed()},
                         {"p0", e.p0_kind},
                         {"lambda_max_p_star", dare.p_star.lambda_max()},
                         {"trace_p_star", dare.p_star.trace()},
                         {"curves", nlohmann::json::array()}};
  std::string combined = "gamma_bar,functional,value,cdf\n";
  for (double g : e.config.gamma_bar) {
    const auto start = Clock::now();
    EnsembleRequest req;
    req.gamma_bar = g;
    req.p0 = p0;
    req.times = {e.config.horizon};
    req.replicates = e.config.replicates;
    req.seed = e.seed();
    req.functionals = fs;
    req.threads = e.threads;
    const EnsembleSamples samples = ensemble_sample(m, req);
    for (std::size_t f = 0; f < fs.size(); ++f) {
      const EmpiricalDistribution dist(samples[0][f]);
      const std::string csv = cdf_csv(dist);
      rs.files.push_back({"cdf_" + fs[f].name() + "_g" + gamma_tag(g) + ".csv", csv,
                          seconds_since(start)});
      std::istringstream lines(csv);
      std::string line;
      std::getline(lines, line);
      while (std::getline(lines, line)) {
        combined += format_double(g) + "," + fs[f].name() + "," + line + "\n";
      }
      summary["curves"].push_back({{"gamma_bar", g},
                                   {"functional", fs[f].name()},
                                   {"median", dist.median()},
                                   {"q10", dist.quantile(0.1)},
                                   {"q90", dist.quantile(0.9)},
                                   {"min", dist.min()}});
    }
    if (!thresholds.empty()) {
      std::vector<int> times{e.config.horizon / 2, e.config.horizon};
      if (times.front() == times.back()) times.pop_back();
      const ExceedanceTable table = boundedness_probe(
          m, g, p0, thresholds, times, std::max(e.config.replicates, 1000), e.seed(), e.threads);
      rs.files.push_back({"exceedance_g" + gamma_tag(g) + ".csv", exceedance_csv(table), 0.0});
    }
  }
  rs.files.push_back({"cdf.csv", combined, 0.0});
  rs.files.push_back({"cdf_summary.json", summary.dump(2) + "\n", 0.0});
  emit(e, rs, out, "cdf.csv");
  return kExitOk;
}

int cmd_support(const Experiment& e, double dedupe_tol, std::size_t max_nodes,
                std::ostream& out, std::ostream& err) {
  const auto start = Clock::now();
  const DareSolution dare = solve_dare(e.system());
  SupportAtlas atlas;
  try {
    atlas = enumerate_support(e.system(), dare.p_star, e.config.depth, dedupe_tol, max_nodes);
  } catch (const SupportTruncated& t) {
    err << "warning: " << t.what() << "\n";
    atlas = t.partial();
  }
  std::ostringstream csv;
  write_atlas_csv(csv, atlas);
  nlohmann::json summary{{"depth", atlas.depth},
                         {"nodes", atlas.nodes.size()},
                         {"complete", atlas.complete},
                         {"complete_depth", atlas.complete_depth},
                         {"dedupe_tol", atlas.dedupe_tol},
                         {"dominance_violations", atlas.dominance_violations}};
  ResultSet rs{{{"atlas.csv", csv.str(), seconds_since(start)},
                {"atlas_summary.json", summary.dump(2) + "\n", 0.0}}};
  emit(e, rs, out, "atlas.csv");
  return atlas.complete ? kExitOk : kExitNumerical;
}

int cmd_scalar_fractal(const Experiment& e, int n_max, std::ostream& out) {
  const SystemModel& m = e.system();
  if (!m.is_scalar()) throw ValidationError("scalar-fractal requires a scalar system");
  const auto start = Clock::now();
  const DareSolution dare = solve_dare(m);
  const SupportAtlas atlas = enumerate_support(m, dare.p_star, e.config.depth);
  const ScalarPartition part = scalar_partition(m, atlas, n_max);

  ResultSet rs;
  for (std::size_t n = 0; n < part.level_sets.size(); ++n) {
    std::string csv = "value,depth\n";
    for (const auto& p : part.level_sets[n]) csv += format_double(p.value) + "," + std::to_string(p.depth) + "\n";
    rs.files.push_back({"S" + std::to_string(n) + ".csv", csv, 0.0});
  }
  std::string holes = "n,lo,hi,violations\n";
  nlohmann::json hole_json = nlohmann::json::array();
  for (std::size_t n = 0; n < part.holes.size(); ++n) {
    const auto count = std::count_if(part.hole_violations.begin(), part.hole_violations.end(),
                                     [&](const auto& v) { return v.second == static_cast<int>(n); });
    holes += std::to_string(n) + "," + format_double(part.holes[n].lo) + "," +
             format_double(part.holes[n].hi) + "," + std::to_string(count) + "\n";
    hole_json.push_back({{"n", n}, {"lo", part.holes[n].lo}, {"hi", part.holes[n].hi},
                         {"violations", count}});
  }
  nlohmann::json report{{"depth", atlas.depth},
                        {"nodes", atlas.nodes.size()},
                        {"p_star", dare.p_star(0, 0)},
                        {"hole_violations", part.hole_violations.size()},
                        {"below_floor", part.below_floor.size()},
                        {"holes", hole_json}};
  if (part.level_sets.size() >= 2) {
    const SelfSimilarityReport ss = check_self_similarity(m, part, atlas.depth, 0);
    report["self_similarity_S1_vs_S0"] = {{"lower_count", ss.lower_count},
                                          {"upper_count", ss.upper_count},
                                          {"max_error", ss.max_error}};
  }
  rs.files.push_back({"holes.csv", holes, 0.0});
  rs.files.push_back({"fractal_report.json", report.dump(2) + "\n", seconds_since(start)});
  emit(e, rs, out, "fractal_report.json");
  if (e.out_dir) {
    out << "hole violations: " << part.hole_violations.size() << " (n in 0.." << n_max << ")\n";
  }
  return kExitOk;
}

int cmd_critical(const Experiment& e, double bisect_tol, bool refine, std::ostream& out) {
  const auto start = Clock::now();
  const CriticalBounds b = upper_bound(e.system(), bisect_tol, refine);
  ResultSet rs{{{"critical.json", b.to_json().dump(2) + "\n", seconds_since(start)}}};
  emit(e, rs, out, "critical.json");
  return kExitOk;
}

int cmd_ergodic(const Experiment& e, const std::string& functional, std::ostream& out) {
  const auto start = Clock::now();
  const Functional h = Functional::parse(functional);
  const SymMatrix p0 = e.initial_covariance();
  nlohmann::json list = nlohmann::json::array();
  for (double g : e.config.gamma_bar) {
    const ErgodicEstimate est = ergodic_average(e.system(), ArrivalProcess{g, e.seed(), 0}, p0,
                                                h, e.config.burn_in, e.config.horizon);
    nlohmann::json j{{"functional", h.name()},
                     {"gamma_bar", g},
                     {"seed", est.seed},
                     {"burn_in", est.burn_in},
                     {"horizon", est.horizon},
                     {"p0", e.p0_kind},
                     {"divergent", est.divergent},
                     {"diagnostic", est.diagnostic},
                     {"growth_ratio", est.growth_ratio},
                     {"tail_index", std::isfinite(est.tail_index) ? nlohmann::json(est.tail_index)
                                                                  : nlohmann::json(nullptr)}};
    if (std::holds_alternative<double>(est.value)) {
      const double v = est.scalar_value();
      j["value"] = std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr);
    } else {
      j["value"] = matrix_to_json(std::get<SymMatrix>(est.value).mat());
    }
    list.push_back(std::move(j));
  }
  const nlohmann::json doc = list.size() == 1 ? list[0] : list;
  ResultSet rs{{{"ergodic.json", doc.dump(2) + "\n", seconds_since(start)}}};
  emit(e, rs, out, "ergodic.json");
  return kExitOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Random Riccati equation toolkit: Kalman filtering with random packet arrivals",
               "rre"};
  app.option_defaults()->always_capture_default();
  app.require_subcommand(1);
  app.set_version_flag("--version", kToolVersion);

  Options o_validate, o_dare, o_sim, o_cdf, o_support, o_fractal, o_critical, o_ergodic;
  auto* validate = app.add_subcommand("validate", "Structural checks on the system");
  add_common(validate, o_validate, {0.8}, 1000, 1);

  auto* dare = app.add_subcommand("dare", "Riccati fixed point P*, gain and residual");
  add_common(dare, o_dare, {1.0}, 1000, 1);
  double dare_tol = kDareTol;
  int dare_iter = kDareMaxIter;
  dare->add_option("--tol", dare_tol, "Relative residual tolerance");
  dare->add_option("--max-iter", dare_iter, "Iteration limit");

  auto* sim = app.add_subcommand("simulate", "Covariance trajectory as CSV");
  add_common(sim, o_sim, {0.8}, 1000, 1);
  bool full_matrix = false;
  sim->add_flag("--full-matrix", full_matrix, "Append every matrix entry (row-major)");

  auto* cdf = app.add_subcommand("cdf", "Ensemble CDF tables over a grid of arrival rates");
  add_common(cdf, o_cdf, {0.6, 0.7, 0.8, 0.9, 0.99}, 500, 2000);
  std::vector<std::string> cdf_functionals{"lambda_max", "trace"};
  std::vector<double> thresholds;
  cdf->add_option("--functional", cdf_functionals, "Functionals to tabulate")->delimiter(',');
  cdf->add_option("--thresholds", thresholds,
                  "Also write P(||P_t|| > N) tables for these N (increasing)")
      ->delimiter(',');

  auto* support = app.add_subcommand("support", "Support atlas of the invariant distribution");
  add_common(support, o_support, {0.8}, 1000, 1);
  double dedupe_tol = kDedupeTol;
  std::size_t max_nodes = kDefaultMaxNodes;
  support->add_option("--dedupe-tol", dedupe_tol, "Relative Frobenius merge tolerance");
  support->add_option("--max-nodes", max_nodes, "Node limit");

  auto* fractal = app.add_subcommand("scalar-fractal", "Band sets S_n and hole report (scalar systems)");
  add_common(fractal, o_fractal, {0.8}, 1000, 1);
  int n_max = 2;
  fractal->add_option("--bands", n_max, "Highest band index n");

  auto* critical = app.add_subcommand("critical", "Bounds on the mean-stability critical rate");
  add_common(critical, o_critical, {0.8}, 1000, 1);
  double bisect_tol = kBisectTol;
  bool refine = false;
  critical->add_option("--bisect-tol", bisect_tol, "Bisection tolerance");
  critical->add_flag("--refine-gain", refine, "Also scan gains c K, c in [0.5, 1.5]");

  auto* ergodic = app.add_subcommand("ergodic", "Time-average estimate along one trajectory");
  add_common(ergodic, o_ergodic, {0.8}, 1000000, 1);
  std::string functional = "trace";
  ergodic->add_option("--functional", functional,
                      "trace, lambda_max, spectral_norm, mean_matrix or indicator_above:<x>");

  std::vector<std::string> rev(args.rbegin(), args.rend());
  try {
    app.parse(rev);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitValidation;
  }

  try {
    if (*validate) return cmd_validate(resolve(o_validate, "validate"), out);
    if (*dare) return cmd_dare(resolve(o_dare, "dare"), dare_tol, dare_iter, out);
    if (*sim) return cmd_simulate(resolve(o_sim, "simulate"), full_matrix, out);
    if (*cdf) return cmd_cdf(resolve(o_cdf, "cdf"), cdf_functionals, thresholds, out);
    if (*support) return cmd_support(resolve(o_support, "support"), dedupe_tol, max_nodes, out, err);
    if (*fractal) return cmd_scalar_fractal(resolve(o_fractal, "scalar-fractal"), n_max, out);
    if (*critical) return cmd_critical(resolve(o_critical, "critical"), bisect_tol, refine, out);
    if (*ergodic) return cmd_ergodic(resolve(o_ergodic, "ergodic"), functional, out);
  } catch (const ValidationError& e) {
    err << "error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const DimensionError& e) {
    err << "error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const NumericalError& e) {
    err << "numerical failure: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const std::runtime_error& e) {
    err << "error: " << e.what() << "\n";
    return kExitNumerical;
  }
  err << app.help();
  return kExitValidation;
}

}  // namespace rre
