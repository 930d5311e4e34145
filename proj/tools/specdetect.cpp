// specdetect command-line front end.
#include <CLI11.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <chrono>
#include <cstdlib>
#include <iostream>
#include <optional>
#include <sstream>

#include "specdetect/classical_tests.hpp"
#include "specdetect/errors.hpp"
#include "specdetect/io.hpp"
#include "specdetect/optimal_lss.hpp"
#include "specdetect/simulation.hpp"

namespace sd = specdetect;
namespace io = specdetect::io;
using io::json;
namespace fs = std::filesystem;

namespace {

enum ExitCode { kOk = 0, kFailure = 1, kConfig = 2, kDomain = 3, kNumerical = 4, kInvariant = 5 };

struct InvariantError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Flags {
  std::string config;
  std::string out = "out";
  std::optional<std::uint64_t> seed;
  int threads = 0;
  std::string solver;
  bool list = false;
};

// Tracks files written by one run so a failure can remove them.
class Outputs {
 public:
  explicit Outputs(fs::path dir) : dir_(std::move(dir)) {}
  const fs::path& dir() const { return dir_; }
  void write(const std::string& name, const std::string& text) {
    const fs::path path = dir_ / name;
    fs::create_directories(path.parent_path());
    io::write_text_atomic(path, text);
    written_.push_back(path);
    spdlog::debug("wrote {}", path.string());
  }
  void discard() {
    std::error_code ec;
    for (const auto& p : written_) fs::remove(p, ec);
    written_.clear();
  }

 private:
  fs::path dir_;
  std::vector<fs::path> written_;
};

void check(bool ok, const std::string& what) {
  if (!ok) throw InvariantError(what);
}

json classification_json(const sd::SpikeClassification& c) {
  json out = json::array();
  for (const auto& r : c.spikes)
    out.push_back({{"location", r.location},
                   {"weight", r.weight},
                   {"sample_location", std::isfinite(r.psi) ? json(r.psi) : json(nullptr)},
                   {"supercritical", r.supercritical}});
  return out;
}

json cmd_spectrum(const json& cfg, Outputs& out) {
  const auto H = io::measure_from_json(io::require(cfg, "H"), "H");
  const double gamma = io::require_number(cfg, "gamma");
  sd::GridOptions g;
  g.epsilon = io::number_or(cfg, "epsilon", g.epsilon);
  g.points_per_interval = io::int_or(cfg, "points_per_interval", g.points_per_interval);
  const auto curve = sd::stieltjes_grid(H, gamma, g);
  double worst = 0.0;
  for (std::size_t m = 0; m < curve.size(); ++m)
    worst = std::max(worst, std::abs(sd::silverstein_residual(H, gamma, curve.grid[m], curve.v[m])));
  json support = io::to_json(curve.support);
  support["zero_mass"] = curve.zero_mass();
  support["dropped_points"] = curve.dropped_points;
  support["max_residual"] = worst;
  out.write("curve.csv", io::curve_csv(curve));
  out.write("support.json", io::dump_json(support));
  check(curve.dropped_points == 0, std::to_string(curve.dropped_points) + " grid points did not converge");
  check(worst <= 1e-8, "Silverstein residual " + io::format_number(worst) + " exceeds 1e-8");
  return {{"intervals", curve.support.intervals.size()}, {"max_residual", worst}};
}

json cmd_weak_derivative(const json& cfg, Outputs& out) {
  const auto H = io::measure_from_json(io::require(cfg, "H"), "H");
  const double gamma = io::require_number(cfg, "gamma");
  auto g = io::algo_from_json(cfg).grid_options();
  g.epsilon = io::number_or(cfg, "epsilon", g.epsilon);
  const auto curve = sd::stieltjes_grid(H, gamma, g);
  sd::SignedMeasureCdf d;
  // The cdf must vanish beyond the support and every separated spike.
  auto far_right = [&](const sd::SignedMeasureCdf& w) {
    double x = curve.support.enclosing.upper;
    for (const auto& m : w.point_masses) x = std::max(x, m.location);
    return 1.1 * x + 1.0;
  };
  double right_end = 0.0;
  if (cfg.contains("G")) {
    const auto G = io::measure_from_json(cfg.at("G"), "G");
    d = sd::weak_derivative_cdf(G, curve);
    right_end = sd::weak_derivative_cdf_at(curve, G, far_right(d));
  } else {
    const auto G0 = io::measure_from_json(io::require(cfg, "G0"), "G0");
    const auto G1 = io::measure_from_json(io::require(cfg, "G1"), "G1");
    d = sd::delta_diff(G0, G1, curve);
    const double x = far_right(d);
    right_end = sd::weak_derivative_cdf_at(curve, G1, x) - sd::weak_derivative_cdf_at(curve, G0, x);
  }
  json outside = json::array();
  for (const auto& p : d.outside) outside.push_back({{"lower", p.lower}, {"upper", p.upper}, {"value", p.value}});
  json masses{{"point_masses", io::to_json(d.point_masses)},
              {"outside", outside},
              {"cdf_right_end", right_end},
              {"near_pole_points", d.near_pole_points}};
  out.write("weak_derivative.csv", io::weak_derivative_csv(d));
  out.write("point_masses.json", io::dump_json(masses));
  check(std::abs(right_end) <= 1e-3, "weak derivative has nonzero total mass");
  return {{"point_masses", d.point_masses.size()}, {"cdf_right_end", right_end}};
}

json cmd_optimal_lss(const json& cfg, Outputs& out) {
  const auto model = io::model_from_json(cfg);
  const auto algo = io::algo_from_json(cfg);
  const bool scale_invariant = cfg.value("scale_invariant", false);
  const sd::OptimalLssSolver solver(model.H, model.gamma, algo);
  const auto r = scale_invariant ? solver.solve_scale_invariant(model) : solver.solve(model);
  const auto t = solver.thresholds();
  json report = io::to_json(r.report);
  report["normalization"] = r.phi.normalization();
  report["substituted"] = r.substituted;
  if (r.substituted) report["substitute_spike"] = r.substitute_spike;
  report["spikes"] = classification_json(r.classification);
  report["thresholds"] = {{"a_pt", t.a_pt}, {"s_plus", t.s_plus}, {"s_minus", t.s_minus}};
  report["solver"] = std::string(sd::to_string(algo.solver));
  report["scale_invariant"] = scale_invariant;
  out.write("lss.csv", io::lss_csv(r.phi));
  out.write("report.json", io::dump_json(report));
  if (!r.derivative.empty()) {
    std::ostringstream os;
    os << "x,g\n";
    for (std::size_t m = 0; m < r.grid.size(); ++m)
      os << io::format_number(r.grid[m]) << ',' << io::format_number(r.derivative[m]) << '\n';
    out.write("derivative.csv", os.str());
  }
  if (cfg.value("dump_kernel", false)) out.write("kernel.csv", io::kernel_csv(solver.kernel()));
  check(std::isfinite(r.report.mu) && std::isfinite(r.report.sigma), "LSS moments are not finite");
  check(r.report.power >= 0.0 && r.report.power <= 1.0, "predicted power outside [0, 1]");
  return {{"efficacy", std::isfinite(r.report.efficacy) ? json(r.report.efficacy) : json("inf")},
          {"regime", std::string(sd::to_string(r.report.regime))}};
}

json cmd_power(const json& cfg, Outputs& out, int threads) {
  auto sim = io::sim_config_from_json(cfg);
  sim.threads = threads;
  if (sim.spikes.empty()) throw io::ConfigError("missing required field 'spikes'");
  const auto curve = sd::power_experiment(sim);
  out.write("power.csv", io::power_csv(curve));
  out.write("power.json", io::dump_json(io::to_json(curve)));
  for (const auto& p : curve.points)
    check(p.power_lss >= 0.0 && p.power_lss <= 1.0 && p.power_top >= 0.0 && p.power_top <= 1.0,
          "power estimate outside [0, 1]");
  return {{"spikes", curve.points.size()}, {"level_top", curve.level_top}};
}

json cmd_classical(const json& cfg, Outputs& out) {
  const auto H = io::measure_from_json(io::require(cfg, "H"), "H");
  const double gamma = io::require_number(cfg, "gamma");
  const auto params = io::catalog_parameters_from_json(cfg);
  const auto algo = io::algo_from_json(cfg);
  std::vector<const sd::TestCatalogEntry*> entries;
  if (cfg.contains("tests")) {
    for (const auto& id : cfg.at("tests")) {
      if (!id.is_string()) throw io::ConfigError("field 'tests' must list test ids");
      try {
        entries.push_back(&sd::catalog_entry(id.get<std::string>()));
      } catch (const sd::DomainError& e) {
        throw io::ConfigError(std::string("field 'tests': ") + e.what());
      }
    }
  } else {
    for (const auto& e : sd::test_catalog()) entries.push_back(&e);
  }
  const sd::OptimalLssSolver solver(H, gamma, algo);
  const bool compare = cfg.contains("G1");
  std::optional<sd::SpikedModel> model;
  json summary{{"tests", json::array()}};
  if (compare) {
    json m = cfg;
    if (!m.contains("G0")) m["G0"] = io::to_json(sd::AtomicMeasure::point(1.0));
    model = io::model_from_json(m);
    const auto best = solver.solve(*model);
    summary["optimal"] = io::to_json(best.report);
  }
  for (const auto* e : entries) {
    const auto phi = sd::equivalent_lss(*e, solver.curve(), params);
    out.write("classical/" + std::string(e->test_id) + ".csv", io::lss_csv(phi));
    json row{{"test_id", e->test_id},
             {"null_kind", std::string(sd::to_string(e->null_kind))},
             {"original_form", e->original_form},
             {"equivalent_lss", e->equivalent_form}};
    if (model) row["report"] = io::to_json(solver.evaluate(phi, *model));
    summary["tests"].push_back(row);
  }
  out.write("classical.json", io::dump_json(summary));
  return {{"tests", entries.size()}};
}

json cmd_simulate(const json& cfg, Outputs& out, int threads) {
  auto sim = io::sim_config_from_json(cfg);
  sim.threads = threads;
  if (sim.spikes.size() != 1) throw io::ConfigError("missing required field 'spike'");
  const auto s = sd::mean_shift_experiment(sim, sim.spikes.front());
  std::ostringstream os;
  os << "rep,hypothesis,lss,standardized,top_eig\n";
  auto rows = [&](const std::vector<double>& stats, const std::vector<double>& tops, const char* hyp) {
    for (std::size_t r = 0; r < stats.size(); ++r)
      os << r << ',' << hyp << ',' << io::format_number(stats[r]) << ','
         << io::format_number((stats[r] - s.null_mean) / s.null_sd) << ',' << io::format_number(tops[r]) << '\n';
  };
  rows(s.null_statistics, s.null_top, "null");
  rows(s.alt_statistics, s.alt_top, "alternative");
  json summary{{"spike", sim.spikes.front()},       {"n", sim.n},
               {"p", sim.p()},                      {"n_reps", sim.n_reps},
               {"seed", sim.seed},                  {"null_mean", s.null_mean},
               {"null_sd", s.null_sd},              {"standardized_alt_mean", s.alt_mean},
               {"standardized_alt_sd", s.alt_sd},
               {"predicted_efficacy", std::isfinite(s.predicted_efficacy) ? json(s.predicted_efficacy) : json("inf")}};
  out.write("replicates.csv", os.str());
  out.write("summary.json", io::dump_json(summary));
  return {{"standardized_alt_mean", s.alt_mean}};
}

void list_catalog() {
  for (const auto& e : sd::test_catalog())
    std::cout << e.test_id << '\t' << sd::to_string(e.null_kind) << '\t' << e.equivalent_form << '\n';
}

void configure_logging() {
  auto logger = spdlog::stderr_color_mt("specdetect");
  spdlog::set_default_logger(logger);
  spdlog::set_level(spdlog::level::warn);
  if (const char* env = std::getenv("SPECDETECT_LOG")) spdlog::set_level(spdlog::level::from_str(env));
}

int run(const std::string& sub, const Flags& flags) {
  if (sub == "classical-lss" && flags.list) {
    list_catalog();
    return kOk;
  }
  if (flags.config.empty()) throw io::ConfigError("--config is required");
  json cfg = io::read_json_file(flags.config);
  std::optional<std::uint64_t> seed = flags.seed;
  if (cfg.value("run_manifest", false)) {
    const std::string recorded = io::require(cfg, "subcommand").get<std::string>();
    if (recorded != sub) throw io::ConfigError("manifest was written by '" + recorded + "', not '" + sub + "'");
    cfg = io::require(cfg, "config");
  }
  if (seed) cfg["seed"] = *seed;
  if (!flags.solver.empty()) cfg["algo"]["solver"] = flags.solver;
  if (cfg.contains("seed") && !cfg["seed"].is_number_unsigned())
    throw io::ConfigError("field 'seed' must be a nonnegative integer");

  Outputs out(flags.out);
  const auto start = std::chrono::steady_clock::now();
  json result;
  try {
    if (sub == "spectrum") result = cmd_spectrum(cfg, out);
    else if (sub == "weak-derivative") result = cmd_weak_derivative(cfg, out);
    else if (sub == "optimal-lss") result = cmd_optimal_lss(cfg, out);
    else if (sub == "power") result = cmd_power(cfg, out, flags.threads);
    else if (sub == "classical-lss") result = cmd_classical(cfg, out);
    else if (sub == "simulate") result = cmd_simulate(cfg, out, flags.threads);
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    json manifest{{"run_manifest", true},
                  {"subcommand", sub},
                  {"config_path", flags.config},
                  {"output_dir", flags.out},
                  {"seed", cfg.contains("seed") ? cfg["seed"] : json(nullptr)},
                  {"version", SPECDETECT_VERSION},
                  {"wall_seconds", seconds},
                  {"result", result},
                  {"config", cfg}};
    out.write("manifest.json", io::dump_json(manifest));
  } catch (...) {
    out.discard();
    throw;
  }
  spdlog::info("{} finished: {}", sub, result.dump());
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  configure_logging();
  CLI::App app{"Optimal linear spectral statistics for detecting weak principal components"};
  app.set_version_flag("--version", std::string(SPECDETECT_VERSION));
  app.require_subcommand(1);
  Flags flags;
  const std::vector<std::pair<std::string, std::string>> subs = {
      {"spectrum", "Stieltjes transform grid and support of the limiting spectrum"},
      {"weak-derivative", "Density, cdf and point masses of the weak derivative"},
      {"optimal-lss", "Optimal LSS and its efficacy for one spiked alternative"},
      {"power", "Monte-Carlo power curve: optimal LSS vs top eigenvalue"},
      {"classical-lss", "Equivalent LSS of classical identity and sphericity tests"},
      {"simulate", "Null and alternative replicates of the optimal LSS statistic"}};
  for (const auto& [name, help] : subs) {
    auto* s = app.add_subcommand(name, help);
    s->add_option("--config", flags.config, "JSON config or a run manifest to replay");
    s->add_option("--out", flags.out, "Output directory")->capture_default_str();
    s->add_option("--seed", flags.seed, "Master RNG seed (overrides the config)");
    s->add_option("--threads", flags.threads, "Worker threads, 0 = all cores")->check(CLI::NonNegativeNumber);
    s->add_option("--solver", flags.solver, "Kernel solver")->check(CLI::IsMember({"diagreg", "collocation"}));
    if (name == "classical-lss") s->add_flag("--list", flags.list, "List the catalog and exit");
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfig;
  }
  const std::string sub = app.get_subcommands().front()->get_name();
  try {
    return run(sub, flags);
  } catch (const io::ConfigError& e) {
    spdlog::error("config error: {}", e.what());
    return kConfig;
  } catch (const json::exception& e) {
    spdlog::error("config error: {}", e.what());
    return kConfig;
  } catch (const sd::DomainError& e) {
    spdlog::error("invalid input: {}", e.what());
    return kDomain;
  } catch (const sd::NumericalError& e) {
    spdlog::error("numerical failure: {}", e.what());
    return kNumerical;
  } catch (const InvariantError& e) {
    spdlog::error("invariant check failed: {}", e.what());
    return kInvariant;
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return kFailure;
  }
}
