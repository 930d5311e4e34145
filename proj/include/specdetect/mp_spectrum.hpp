#pragma once

#include <complex>
#include <cstddef>
#include <functional>
#include <vector>

#include "specdetect/measure.hpp"

namespace specdetect {

using cplx = std::complex<double>;

struct Interval {
  double lower = 0.0;
  double upper = 0.0;
  double width() const { return upper - lower; }
  bool contains(double x) const { return x >= lower && x <= upper; }
};

/// Support of the limiting ESD F_gamma(H) as a union of closed intervals.
struct SupportSet {
  std::vector<Interval> intervals;
  /// Compact interval [a, b] strictly containing every support interval.
  Interval enclosing;
  /// Real companion Stieltjes transform v at each lower/upper edge (the
  /// critical points of the inverse map); NaN for an edge at the origin.
  std::vector<Interval> edge_v;

  bool contains(double x, double tolerance = 0.0) const;
  double lower_edge() const { return intervals.front().lower; }
  double upper_edge() const { return intervals.back().upper; }
  /// Distance from x to the nearest support interval (0 inside).
  double distance(double x) const;
};

/// Companion Stieltjes transform of F_gamma(H) sampled inside the support.
struct StieltjesCurve {
  AtomicMeasure population;
  double gamma = 0.0;
  SupportSet support;
  std::vector<double> grid;            // strictly increasing, inside support
  std::vector<double> weights;         // midpoint-rule cell widths
  std::vector<int> interval_index;     // which support interval each point lies in
  std::vector<cplx> v;                 // v(x_m)
  std::vector<cplx> v_prime;           // v'(x_m) from derivative_map
  std::size_t dropped_points = 0;      // grid points whose solve did not converge

  std::size_t size() const { return grid.size(); }
  /// Density of F_gamma(H) at grid point m: Im v / (pi gamma).
  double density(std::size_t m) const;
  /// Mass of F_gamma(H) at zero: max(0, 1 - 1/gamma) plus the contribution of an atom of H at 0.
  double zero_mass() const;
};

struct SilversteinOptions {
  int max_newton_iterations = 100;
  /// Keep the root in the closed upper half plane when z is real (in-support evaluation).
  bool upper_branch = true;
};

/// Residual -1/v + z - gamma * sum_i w_i t_i / (1 + t_i v).
cplx silverstein_residual(const AtomicMeasure& H, double gamma, cplx z, cplx v);

/// Inverse map z(v) = -1/v + gamma * int t / (1 + t v) dH(t).
cplx inverse_map(const AtomicMeasure& H, double gamma, cplx v);

/// Solve the Silverstein equation for the companion Stieltjes transform v(z).
/// For Im z > 0 the unique root in C+ is returned; for real z the limit from above.
/// Throws NumericalError if Newton continuation fails, DomainError for H = delta_0.
cplx solve_silverstein(const AtomicMeasure& H, double gamma, cplx z,
                       const SilversteinOptions& options = {});

/// Same, warm-started from `guess` (falls back to the cold path on failure).
cplx solve_silverstein_from(const AtomicMeasure& H, double gamma, cplx z, cplx guess,
                            const SilversteinOptions& options = {});

/// v'(z) = [1/v^2 - gamma * int t^2 / (1 + t v)^2 dH]^{-1}.
/// Throws NumericalError when the bracket is below 1e-14 in magnitude (support edge).
cplx derivative_map(const AtomicMeasure& H, double gamma, cplx v);

SupportSet support_intervals(const AtomicMeasure& H, double gamma);

struct GridOptions {
  int points_per_interval = 1000;
  /// Accuracy control; the eta-limit stops once successive values differ by
  /// less than epsilon1 = max(1e-8, c0 * epsilon).
  double epsilon = 5e-6;
  double c0 = 1e-2;
  double epsilon1() const;
};

StieltjesCurve stieltjes_grid(const AtomicMeasure& H, double gamma, const GridOptions& options = {});

/// int x^k dF_gamma(H) by midpoint quadrature of the density on the curve, k in {1,2,3,4}.
/// The atom at zero contributes nothing for k >= 1.
double esd_moment(const StieltjesCurve& curve, int k);

/// Closed-form moments of F_gamma(H) in terms of the moments of H (any k >= 0).
double esd_moment_exact(const AtomicMeasure& H, double gamma, int k);

/// int f dF_gamma(H): midpoint quadrature over the curve plus f(0) times the zero mass.
double esd_integral(const StieltjesCurve& curve, const std::function<double(double)>& f);

/// Mass of the continuous part of F_gamma(H) captured by the curve.
double esd_continuous_mass(const StieltjesCurve& curve);

}  // namespace specdetect
