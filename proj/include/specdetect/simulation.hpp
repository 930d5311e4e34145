#pragma once

#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "specdetect/lss_function.hpp"
#include "specdetect/optimal_lss.hpp"

namespace specdetect {

/// Eigenvalues of the p x p Toeplitz matrix rho^|i-j|, descending. rho = 0 gives all ones.
std::vector<double> ar1_eigenvalues(double rho, int p);

/// Deterministic engine for replicate `rep` of stream `stream` under a master seed.
std::mt19937_64 replicate_engine(std::uint64_t master_seed, std::uint64_t stream, std::uint64_t rep);

/// Eigenvalues (descending) of n^{-1} X^T X with X = Z diag(pop)^{1/2}, Z iid N(0,1) of size n x p.
std::vector<double> sample_eigenvalues(std::span<const double> population, int n, std::mt19937_64& rng);
std::vector<double> sample_eigenvalues(std::span<const double> population, int n, std::uint64_t seed);

/// sum_i phi(lambda_i)
double apply_lss(const LssFunction& phi, std::span<const double> eigenvalues);

/// Monte-Carlo setup: p - 1 bulk eigenvalues plus one spike that sits at `null_spike`
/// under the null and at each value of `spikes` under the alternatives.
struct SimConfig {
  std::vector<double> bulk;
  double null_spike = 1.0;
  std::vector<double> spikes;
  int n = 500;
  int n_reps = 1000;
  double alpha = 0.05;
  std::uint64_t seed = 1;
  int threads = 0;  // 0 = all hardware threads
  AlgoConfig algo;

  int p() const { return static_cast<int>(bulk.size()) + 1; }
  double gamma() const { return static_cast<double>(p()) / n; }
  /// Throws DomainError naming the offending field.
  void validate() const;
  /// Null model for the bulk, with G1 at `spike` and n set.
  SpikedModel model(double spike) const;
  std::vector<double> population(double spike) const;
};

struct PowerPoint {
  double spike = 0.0;
  double power_lss = 0.0;
  double se_lss = 0.0;
  double power_top = 0.0;
  double se_top = 0.0;
  double critical_lss = 0.0;
  double level_lss = 0.0;  // rejection rate on held-out null replicates
  double predicted_power = 0.0;
  Regime regime = Regime::SubcriticalSolvable;
};

struct PowerCurve {
  std::vector<PowerPoint> points;
  double critical_top = 0.0;
  double level_top = 0.0;
  double a_pt = 0.0;  // spikes above this separate from the bulk
  int n = 0;
  int p = 0;
  int n_reps = 0;
  double alpha = 0.05;
  std::uint64_t seed = 0;
};

/// Empirical upper (1 - alpha) point: the ceil((1 - alpha) m)-th smallest of m values.
double empirical_critical_value(std::vector<double> values, double alpha);

/// Parallel map over replicate indices; results land at their index, so the output does not
/// depend on the thread count.
std::vector<double> parallel_replicates(int count, int threads, const std::function<double(int)>& body);

/// Null replicates: 2 n_reps, the first half calibrates the one-sided critical values and the
/// second half measures the realized level. Each spike then gets n_reps alternative replicates.
/// The LSS for each spike is the optimal LSS of `config.model(spike)`.
PowerCurve power_experiment(const SimConfig& config);

struct ShiftSummary {
  double null_mean = 0.0;
  double null_sd = 0.0;
  double alt_mean = 0.0;  // mean of (T - null_mean) / null_sd over alternative replicates
  double alt_sd = 0.0;
  double predicted_efficacy = 0.0;
  std::vector<double> null_statistics;
  std::vector<double> alt_statistics;
  std::vector<double> null_top;
  std::vector<double> alt_top;
};

/// Null and alternative distributions of the optimal LSS for one spike, standardized by the
/// empirical null mean and sd. Uses n_reps replicates of each.
ShiftSummary mean_shift_experiment(const SimConfig& config, double spike);

}  // namespace specdetect
