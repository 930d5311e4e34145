#pragma once

#include <nlohmann/json.hpp>

#include <filesystem>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "specdetect/classical_tests.hpp"
#include "specdetect/kernel_operator.hpp"
#include "specdetect/lss_function.hpp"
#include "specdetect/measure.hpp"
#include "specdetect/mp_spectrum.hpp"
#include "specdetect/optimal_lss.hpp"
#include "specdetect/simulation.hpp"
#include "specdetect/weak_derivative.hpp"

namespace specdetect::io {

using json = nlohmann::json;
namespace fs = std::filesystem;

/// Malformed or incomplete configuration; the message names the field.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// %.17g: exact round trip through text.
std::string format_number(double v);

json read_json_file(const fs::path& path);
/// Writes via a temporary sibling and rename.
void write_text_atomic(const fs::path& path, const std::string& text);
/// Indented JSON; doubles use the shortest text that round-trips exactly.
std::string dump_json(const json& j);

// Field access with errors that name the field path.
const json& require(const json& j, std::string_view key, std::string_view where = {});
double require_number(const json& j, std::string_view key, std::string_view where = {});
int require_int(const json& j, std::string_view key, std::string_view where = {});
double number_or(const json& j, std::string_view key, double fallback);
int int_or(const json& j, std::string_view key, int fallback);

/// {"atoms": [...], "weights": [...]}
AtomicMeasure measure_from_json(const json& j, std::string_view where);
json to_json(const AtomicMeasure& m);

/// Overrides of the algorithm constants from an optional "algo" object.
AlgoConfig algo_from_json(const json& j);
json to_json(const AlgoConfig& c);

/// H, G0, G1, gamma, h and optional n.
SpikedModel model_from_json(const json& j);

/// population: {"ar1": {"rho", "p"}} (p counts the spike) or {"eigenvalues": [...]} (the bulk).
std::vector<double> bulk_from_json(const json& population);
SimConfig sim_config_from_json(const json& j);

CatalogParameters catalog_parameters_from_json(const json& j);

json to_json(const SupportSet& s);
json to_json(const EfficacyReport& r);
json to_json(const PowerCurve& c);
json to_json(const std::vector<PointMass>& masses);

/// x,re_v,im_v,re_vp,im_vp,in_support
std::string curve_csv(const StieltjesCurve& curve);
/// x,density,cdf
std::string weak_derivative_csv(const SignedMeasureCdf& d);
/// x,phi,segment
std::string lss_csv(const LssFunction& phi);
LssFunction lss_from_csv(const std::string& text);
/// spike,power_lss,se_lss,power_top,se_top
std::string power_csv(const PowerCurve& c);
/// Raw kernel matrix: header row "x" then the grid, one row per grid point.
std::string kernel_csv(const KernelMatrix& K);

}  // namespace specdetect::io
