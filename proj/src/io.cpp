#include "specdetect/io.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>

#include "specdetect/errors.hpp"

namespace specdetect::io {

namespace {

std::string field_path(std::string_view where, std::string_view key) {
  return where.empty() ? std::string(key) : std::string(where) + "." + std::string(key);
}

std::vector<double> number_array(const json& j, std::string_view name) {
  if (!j.is_array()) throw ConfigError("field '" + std::string(name) + "' must be an array of numbers");
  std::vector<double> out;
  for (const auto& v : j) {
    if (!v.is_number()) throw ConfigError("field '" + std::string(name) + "' must contain only numbers");
    out.push_back(v.get<double>());
  }
  return out;
}

json number_or_string(double v) {
  if (std::isfinite(v)) return v;
  if (std::isnan(v)) return "nan";
  return v > 0 ? "inf" : "-inf";
}

}  // namespace

std::string format_number(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

json read_json_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path.string() + "'");
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("config file '" + path.string() + "' is not valid JSON: " + e.what());
  }
}

void write_text_atomic(const fs::path& path, const std::string& text) {
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write '" + tmp.string() + "'");
    out << text;
    if (!out.flush()) throw std::runtime_error("write to '" + tmp.string() + "' failed");
  }
  fs::rename(tmp, path);
}

std::string dump_json(const json& j) { return j.dump(2) + "\n"; }

const json& require(const json& j, std::string_view key, std::string_view where) {
  if (!j.is_object()) throw ConfigError("'" + (where.empty() ? std::string("config") : std::string(where)) + "' must be an object");
  const auto it = j.find(std::string(key));
  if (it == j.end()) throw ConfigError("missing required field '" + field_path(where, key) + "'");
  return *it;
}

double require_number(const json& j, std::string_view key, std::string_view where) {
  const auto& v = require(j, key, where);
  if (!v.is_number()) throw ConfigError("field '" + field_path(where, key) + "' must be a number");
  return v.get<double>();
}

int require_int(const json& j, std::string_view key, std::string_view where) {
  const auto& v = require(j, key, where);
  if (!v.is_number_integer()) throw ConfigError("field '" + field_path(where, key) + "' must be an integer");
  return v.get<int>();
}

double number_or(const json& j, std::string_view key, double fallback) {
  return j.contains(std::string(key)) ? require_number(j, key) : fallback;
}

int int_or(const json& j, std::string_view key, int fallback) {
  return j.contains(std::string(key)) ? require_int(j, key) : fallback;
}

AtomicMeasure measure_from_json(const json& j, std::string_view where) {
  const auto atoms = number_array(require(j, "atoms", where), field_path(where, "atoms"));
  const auto weights = number_array(require(j, "weights", where), field_path(where, "weights"));
  if (atoms.size() != weights.size())
    throw ConfigError("fields '" + field_path(where, "atoms") + "' and '" + field_path(where, "weights") +
                      "' differ in length");
  try {
    return AtomicMeasure(atoms, weights);
  } catch (const DomainError& e) {
    throw ConfigError("field '" + std::string(where) + "': " + e.what());
  }
}

json to_json(const AtomicMeasure& m) {
  return {{"atoms", std::vector<double>(m.atoms().begin(), m.atoms().end())},
          {"weights", std::vector<double>(m.weights().begin(), m.weights().end())}};
}

AlgoConfig algo_from_json(const json& j) {
  AlgoConfig c;
  if (!j.contains("algo")) return c;
  const auto& a = j.at("algo");
  if (!a.is_object()) throw ConfigError("field 'algo' must be an object");
  c.s_plus_factor = number_or(a, "s_plus_factor", c.s_plus_factor);
  c.s_minus_factor = number_or(a, "s_minus_factor", c.s_minus_factor);
  c.epsilon = number_or(a, "epsilon", c.epsilon);
  c.c0 = number_or(a, "c0", c.c0);
  c.c1 = number_or(a, "c1", c.c1);
  c.ridge_factor = number_or(a, "ridge_factor", c.ridge_factor);
  c.n_sd = number_or(a, "n_sd", c.n_sd);
  c.points_per_interval = int_or(a, "points_per_interval", c.points_per_interval);
  c.collocation_points_per_interval = int_or(a, "collocation_points_per_interval", c.collocation_points_per_interval);
  c.collocation_refinement = int_or(a, "collocation_refinement", c.collocation_refinement);
  c.alpha = number_or(a, "alpha", c.alpha);
  if (a.contains("solver")) {
    const auto& s = a.at("solver");
    if (!s.is_string()) throw ConfigError("field 'algo.solver' must be a string");
    try {
      c.solver = solver_from_string(s.get<std::string>());
    } catch (const DomainError& e) {
      throw ConfigError(std::string("field 'algo.solver': ") + e.what());
    }
  }
  return c;
}

json to_json(const AlgoConfig& c) {
  return {{"s_plus_factor", c.s_plus_factor},
          {"s_minus_factor", c.s_minus_factor},
          {"epsilon", c.epsilon},
          {"c0", c.c0},
          {"c1", c.c1},
          {"ridge_factor", c.ridge_factor},
          {"n_sd", c.n_sd},
          {"points_per_interval", c.points_per_interval},
          {"solver", std::string(to_string(c.solver))},
          {"collocation_points_per_interval", c.collocation_points_per_interval},
          {"collocation_refinement", c.collocation_refinement},
          {"alpha", c.alpha}};
}

SpikedModel model_from_json(const json& j) {
  SpikedModel m{measure_from_json(require(j, "H"), "H"), measure_from_json(require(j, "G0"), "G0"),
                measure_from_json(require(j, "G1"), "G1"), require_number(j, "gamma"), int_or(j, "h", 1),
                std::nullopt};
  if (j.contains("n")) m.n = require_int(j, "n");
  return m;
}

std::vector<double> bulk_from_json(const json& population) {
  if (population.contains("ar1")) {
    const auto& a = population.at("ar1");
    const double rho = require_number(a, "rho", "population.ar1");
    const int p = require_int(a, "p", "population.ar1");
    if (p < 3) throw ConfigError("field 'population.ar1.p' must be at least 3");
    try {
      return ar1_eigenvalues(rho, p - 1);
    } catch (const DomainError& e) {
      throw ConfigError(std::string("field 'population.ar1': ") + e.what());
    }
  }
  if (population.contains("eigenvalues")) return number_array(population.at("eigenvalues"), "population.eigenvalues");
  throw ConfigError("field 'population' needs either 'ar1' or 'eigenvalues'");
}

SimConfig sim_config_from_json(const json& j) {
  SimConfig c;
  c.bulk = bulk_from_json(require(j, "population"));
  c.null_spike = number_or(j, "null_spike", c.null_spike);
  if (j.contains("spikes")) c.spikes = number_array(j.at("spikes"), "spikes");
  if (j.contains("spike")) c.spikes = {require_number(j, "spike")};
  c.n = require_int(j, "n");
  c.n_reps = int_or(j, "n_reps", c.n_reps);
  c.alpha = number_or(j, "alpha", c.alpha);
  if (j.contains("seed")) {
    if (!j.at("seed").is_number_unsigned()) throw ConfigError("field 'seed' must be a nonnegative integer");
    c.seed = j.at("seed").get<std::uint64_t>();
  }
  c.algo = algo_from_json(j);
  return c;
}

CatalogParameters catalog_parameters_from_json(const json& j) {
  CatalogParameters p;
  if (!j.contains("parameters")) return p;
  const auto& q = j.at("parameters");
  p.omh_spike = number_or(q, "omh_spike", p.omh_spike);
  p.lambda = number_or(q, "lambda", p.lambda);
  return p;
}

json to_json(const SupportSet& s) {
  json intervals = json::array();
  for (const auto& iv : s.intervals) intervals.push_back({{"lower", iv.lower}, {"upper", iv.upper}});
  return {{"intervals", intervals}, {"enclosing", {{"lower", s.enclosing.lower}, {"upper", s.enclosing.upper}}}};
}

json to_json(const EfficacyReport& r) {
  return {{"mu", number_or_string(r.mu)},
          {"sigma", number_or_string(r.sigma)},
          {"efficacy", number_or_string(r.efficacy)},
          {"power", number_or_string(r.power)},
          {"alpha", r.alpha},
          {"regime", std::string(to_string(r.regime))}};
}

json to_json(const PowerCurve& c) {
  json points = json::array();
  for (const auto& p : c.points)
    points.push_back({{"spike", p.spike},
                      {"critical_lss", p.critical_lss},
                      {"level_lss", p.level_lss},
                      {"predicted_power", p.predicted_power},
                      {"regime", std::string(to_string(p.regime))}});
  return {{"n", c.n},     {"p", c.p},         {"gamma", static_cast<double>(c.p) / c.n},
          {"n_reps", c.n_reps}, {"alpha", c.alpha}, {"seed", c.seed},
          {"a_pt", c.a_pt}, {"critical_top", c.critical_top}, {"level_top", c.level_top},
          {"points", points}};
}

json to_json(const std::vector<PointMass>& masses) {
  json out = json::array();
  for (const auto& m : masses) out.push_back({{"location", m.location}, {"weight", m.weight}});
  return out;
}

std::string curve_csv(const StieltjesCurve& curve) {
  std::ostringstream os;
  os << "x,re_v,im_v,re_vp,im_vp,in_support\n";
  for (std::size_t m = 0; m < curve.size(); ++m)
    os << format_number(curve.grid[m]) << ',' << format_number(curve.v[m].real()) << ','
       << format_number(curve.v[m].imag()) << ',' << format_number(curve.v_prime[m].real()) << ','
       << format_number(curve.v_prime[m].imag()) << ',' << (curve.support.contains(curve.grid[m]) ? 1 : 0) << '\n';
  return os.str();
}

std::string weak_derivative_csv(const SignedMeasureCdf& d) {
  std::ostringstream os;
  os << "x,density,cdf\n";
  for (std::size_t m = 0; m < d.grid.size(); ++m)
    os << format_number(d.grid[m]) << ',' << format_number(d.density[m]) << ',' << format_number(d.cdf[m]) << '\n';
  return os.str();
}

std::string lss_csv(const LssFunction& phi) {
  std::ostringstream os;
  os << "x,phi,segment\n";
  for (std::size_t i = 0; i < phi.size(); ++i)
    os << format_number(phi.knots()[i]) << ',' << format_number(phi.values()[i]) << ','
       << to_string(phi.segments()[i]) << '\n';
  return os.str();
}

LssFunction lss_from_csv(const std::string& text) {
  std::istringstream is(text);
  std::string line;
  if (!std::getline(is, line) || line != "x,phi,segment") throw ConfigError("LSS CSV must start with 'x,phi,segment'");
  std::vector<double> knots, values;
  std::vector<Segment> segments;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::istringstream row(line);
    std::string x, v, s;
    if (!std::getline(row, x, ',') || !std::getline(row, v, ',') || !std::getline(row, s))
      throw ConfigError("malformed LSS CSV row '" + line + "'");
    try {
      knots.push_back(std::stod(x));
      values.push_back(std::stod(v));
      segments.push_back(segment_from_string(s));
    } catch (const std::exception&) {
      throw ConfigError("malformed LSS CSV row '" + line + "'");
    }
  }
  return LssFunction(std::move(knots), std::move(values), std::move(segments));
}

std::string power_csv(const PowerCurve& c) {
  std::ostringstream os;
  os << "spike,power_lss,se_lss,power_top,se_top\n";
  for (const auto& p : c.points)
    os << format_number(p.spike) << ',' << format_number(p.power_lss) << ',' << format_number(p.se_lss) << ','
       << format_number(p.power_top) << ',' << format_number(p.se_top) << '\n';
  return os.str();
}

std::string kernel_csv(const KernelMatrix& K) {
  std::ostringstream os;
  os << 'x';
  for (double x : K.grid) os << ',' << format_number(x);
  os << '\n';
  for (std::size_t i = 0; i < K.size(); ++i) {
    os << format_number(K.grid[i]);
    for (std::size_t j = 0; j < K.size(); ++j)
      os << ',' << format_number(K.raw(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)));
    os << '\n';
  }
  return os.str();
}

}  // namespace specdetect::io
