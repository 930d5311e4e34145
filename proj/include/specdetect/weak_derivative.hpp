#pragma once

#include <cstddef>
#include <vector>

#include "specdetect/measure.hpp"
#include "specdetect/mp_spectrum.hpp"

namespace specdetect {

/// psi(s) = s [1 + gamma * sum_i w_i t_i / (s - t_i)]: where a population spike s lands in the sample spectrum.
double spike_forward_map(const AtomicMeasure& H, double gamma, double s);
double spike_forward_derivative(const AtomicMeasure& H, double gamma, double s);

struct SpikeRecord {
  double location = 0.0;  // population spike s_j
  double weight = 0.0;    // u_j, its mass in G
  double psi = 0.0;       // NaN when s_j coincides with an atom of H
  double psi_prime = 0.0;
  bool supercritical = false;
  double asy_sd = 0.0;  // sqrt(2 s^2 psi'(s)); NaN when subcritical
};

struct SpikeClassification {
  std::vector<SpikeRecord> spikes;
  bool any_supercritical() const;
};

/// A spike separates from the bulk when psi is increasing at s (so s lies in the image
/// -1/v of the real complement of the support) and psi(s) is more than `tolerance`
/// away from every support interval.
SpikeClassification classify_spikes(const StieltjesCurve& curve, const AtomicMeasure& G, double tolerance);
/// Support edges are located to machine precision, so no tolerance is applied by default.
SpikeClassification classify_spikes(const StieltjesCurve& curve, const AtomicMeasure& G);

/// Stieltjes transform -gamma v'(x) int t / (1 + t v(x)) d(G - H)(t) of the weak derivative,
/// evaluated on the curve's grid.
std::vector<cplx> weak_derivative_st(const AtomicMeasure& G, const StieltjesCurve& curve);

struct PointMass {
  double location = 0.0;
  double weight = 0.0;
};

/// Constant value of a distribution function on a bounded stretch outside the support.
struct FlatPiece {
  double lower = 0.0;
  double upper = 0.0;
  double value = 0.0;
};

/// Distribution function of a compactly supported signed measure with zero total mass,
/// sampled on a curve grid. Outside the support it is piecewise constant.
struct SignedMeasureCdf {
  std::vector<double> grid;
  std::vector<double> density;
  std::vector<double> cdf;
  std::vector<PointMass> point_masses;
  /// Bounded gaps between support intervals and atoms where the cdf is a nonzero
  /// constant; the cdf vanishes on every unlisted stretch outside the support.
  std::vector<FlatPiece> outside;
  /// Grid points where some 1 + t v(x) was within 1e-12 of zero.
  std::size_t near_pole_points = 0;

  double outside_value(double x) const;
  /// Sum of |density| dx over the grid plus the absolute point masses.
  double total_variation(const std::vector<double>& cell_widths) const;
};

/// Exact distribution function of delta F_gamma(H, G) at any real x: the imaginary part of
/// the log potential -gamma int log(1 + t v(x)) d(G - H)(t), divided by pi.
double weak_derivative_cdf_at(const StieltjesCurve& curve, const AtomicMeasure& G, double x);

/// Density, cdf and point masses of delta F_gamma(H, G) on the curve grid.
SignedMeasureCdf weak_derivative_cdf(const AtomicMeasure& G, const StieltjesCurve& curve);

/// cdf(H, G1) - cdf(H, G0) on the shared grid; point masses concatenated with signs.
/// Throws DomainError when the grids differ.
SignedMeasureCdf delta_diff(const SignedMeasureCdf& d0, const SignedMeasureCdf& d1);
SignedMeasureCdf delta_diff(const AtomicMeasure& G0, const AtomicMeasure& G1, const StieltjesCurve& curve);

/// Running trapezoid integral of a density sampled on the curve grid, restarting from the
/// gap value at each support interval. Independent cross-check of the exact cdf.
std::vector<double> trapezoid_cdf(const StieltjesCurve& curve, const SignedMeasureCdf& measure);

}  // namespace specdetect
