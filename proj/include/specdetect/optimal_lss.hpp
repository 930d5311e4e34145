#pragma once

#include <memory>
#include <optional>
#include <string_view>
#include <vector>

#include "specdetect/kernel_operator.hpp"
#include "specdetect/lss_function.hpp"
#include "specdetect/measure.hpp"
#include "specdetect/mp_spectrum.hpp"
#include "specdetect/weak_derivative.hpp"

namespace specdetect {

enum class SolverKind { Diagreg, Collocation };
std::string_view to_string(SolverKind k);
SolverKind solver_from_string(std::string_view s);

/// Algorithm constants. Defaults are the published choices.
struct AlgoConfig {
  double s_plus_factor = 0.75;   // s+ = 0.75 (1 + sqrt(gamma)) a_PT
  double s_minus_factor = 0.99;  // s- = 0.99 a_PT
  double epsilon = 5e-6;
  double c0 = 1e-2;
  double c1 = 1.5;
  double ridge_factor = 1e-4;
  double n_sd = 3.0;
  int points_per_interval = 1000;
  SolverKind solver = SolverKind::Diagreg;
  int collocation_points_per_interval = 200;
  int collocation_refinement = 9;
  double alpha = 0.05;

  double epsilon1() const;
  GridOptions grid_options() const;
  KernelOptions kernel_options() const;
  CollocationOptions collocation_options() const;
};

/// Null H_p = (1 - h/p) H + (h/p) G0 against the alternative with G1.
struct SpikedModel {
  AtomicMeasure H;
  AtomicMeasure G0;
  AtomicMeasure G1;
  double gamma = 0.5;
  int h = 1;
  std::optional<int> n;

  void validate() const;
  /// Number of population eigenvalues behind H: the smallest d with every weight a multiple of 1/d.
  int population_count() const;
  /// n, or round((d + h) / gamma) when absent.
  int sample_size() const;
};

struct SpikeThresholds {
  double a_pt = 0.0;     // -1/v at the upper support edge: smallest spike that separates
  double s_plus = 0.0;
  double s_minus = 0.0;
};

SpikeThresholds spike_thresholds(const StieltjesCurve& curve, const AlgoConfig& config);

struct OptimalLss {
  LssFunction phi;                   // max-abs 1 on the support; factor in phi.normalization()
  EfficacyReport report;
  SpikeClassification classification;
  std::vector<double> grid;          // grid the derivative lives on (empty above the PT)
  std::vector<double> derivative;    // solved g
  bool substituted = false;          // near-PT spike replaced by s-
  double substitute_spike = 0.0;
};

/// Cumulative trapezoid of g over each support interval with knots at the interval edges
/// (g held constant over the half cells next to an edge), flat across gaps and constant
/// outside. Values are scaled to max-abs 1 over the support knots; the factor is recorded.
LssFunction integrate_derivative(const StieltjesCurve& curve, std::span<const double> g);

/// Epanechnikov bumps of half-width n_SD n^{-1/2} sigma_j at each separated sample spike,
/// held at 1 beyond extremal spikes; zero on the support outside the bump windows.
LssFunction lss_above_pt(const SpikedModel& model, const SpikeClassification& classification,
                         const StieltjesCurve& curve, const AlgoConfig& config);

/// Optimal LSS pipeline for one (H, gamma). Builds the Stieltjes curve and kernel once and
/// reuses them for every alternative.
class OptimalLssSolver {
 public:
  OptimalLssSolver(AtomicMeasure H, double gamma, AlgoConfig config = {});
  ~OptimalLssSolver();
  OptimalLssSolver(OptimalLssSolver&&) noexcept;
  OptimalLssSolver& operator=(OptimalLssSolver&&) noexcept;

  const StieltjesCurve& curve() const;
  const KernelMatrix& kernel() const;
  const AlgoConfig& config() const;
  SpikeThresholds thresholds() const;

  /// Throws DomainError if the model's H or gamma differ from the solver's, or G0 has a separated spike.
  OptimalLss solve(const SpikedModel& model) const;
  /// Scale-invariant variant: the derivative is constrained orthogonal to x dF(x).
  OptimalLss solve_scale_invariant(const SpikedModel& model) const;
  /// Mean shift, sd, efficacy and power of an arbitrary LSS for this model.
  EfficacyReport evaluate(const LssFunction& phi, const SpikedModel& model) const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

OptimalLss optimal_lss(const SpikedModel& model, const AlgoConfig& config = {});
OptimalLss optimal_ls3(const SpikedModel& model, const AlgoConfig& config = {});

/// x times the density of F_gamma(H) on the curve grid.
std::vector<double> scale_direction(const StieltjesCurve& curve);

}  // namespace specdetect
