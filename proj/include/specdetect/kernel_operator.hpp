#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "specdetect/lss_function.hpp"
#include "specdetect/mp_spectrum.hpp"
#include "specdetect/weak_derivative.hpp"

namespace specdetect {

/// (1 / 2 pi^2) log(1 + 4 Im v1 Im v2 / |v1 - v2|^2); +inf when v1 == v2 inside the support.
double kernel_value(cplx v1, cplx v2);

/// Covariance kernel at two abscissas; zero unless both lie inside the support.
/// Throws DomainError for x == y inside the support (the kernel is singular there).
double kernel_eval(const StieltjesCurve& curve, double x, double y);

struct KernelOptions {
  double diagonal_multiplier = 1.5;  // c1
  double ridge_factor = 1e-4;        // r = ridge_factor * trace(K0) / I
};

/// Discretized covariance operator on the curve grid.
///
/// `raw` holds k(x_i, x_j) with the singular diagonal replaced by c1 times the kernel
/// against the previous point (the second point for the first row). `folded` is
/// W^{1/2} raw W^{1/2} with W the quadrature weights, so quadratic forms in it are
/// integrals: f' W raw W f = int int f(x) f(y) k(x, y) dx dy.
struct KernelMatrix {
  std::vector<double> grid;
  std::vector<double> weights;
  Eigen::MatrixXd raw;
  Eigen::MatrixXd folded;
  double ridge = 0.0;  // added to the folded diagonal
  double diagonal_multiplier = 1.5;

  std::size_t size() const { return grid.size(); }
  /// int int f(x) f(y) k(x,y) dx dy including the ridge, for f sampled on the grid.
  double quadratic_form(std::span<const double> f) const;
  double smallest_regularized_eigenvalue() const;
};

KernelMatrix assemble_diagreg(const StieltjesCurve& curve, const KernelOptions& options = {});

struct DerivativeSolution {
  std::vector<double> grid;
  std::vector<double> g;  // derivative of the optimal LSS at the grid points
  double residual_norm = 0.0;
  double pairing = 0.0;  // -<g, delta>
  double energy = 0.0;   // <g, (K + r) g>
  /// pairing / energy^{1/2}; equals <delta, (K + r)^{-1} delta>^{1/2} for an exact solve.
  double delta_norm = 0.0;
};

/// Solves (K + r I) g = -delta in function values. Cholesky, with an LU fallback when the
/// diagonal rule leaves the matrix indefinite. Throws NumericalError when singular.
DerivativeSolution solve_diagreg(const KernelMatrix& K, std::span<const double> delta);

/// Reusable factorization of one kernel for many right-hand sides.
class DiagregSolver {
 public:
  explicit DiagregSolver(KernelMatrix K);
  DerivativeSolution solve(std::span<const double> delta) const;
  const KernelMatrix& kernel() const { return K_; }

 private:
  KernelMatrix K_;
  Eigen::LLT<Eigen::MatrixXd> llt_;
  Eigen::PartialPivLU<Eigen::MatrixXd> lu_;
  bool use_lu_ = false;
};

struct CollocationOptions {
  int coarse_points_per_interval = 200;
  /// Dense quadrature grid = coarse grid refined by this odd factor, so each collocation
  /// node is also a quadrature node.
  int refinement = 9;
  double epsilon1 = 1e-8;
  double diagonal_multiplier = 1.5;
  double min_rcond = 1e-14;
};

struct CollocationSolution {
  StieltjesCurve coarse;  // collocation nodes
  StieltjesCurve dense;   // quadrature nodes
  DerivativeSolution solution;  // hat coefficients on the coarse grid
};

/// Collocation with piecewise linear hat functions on a coarse midpoint grid and a dense
/// quadrature grid solved at accuracy epsilon1. The weak-derivative cdf is recomputed on
/// both grids from the measures G0, G1.
CollocationSolution solve_collocation(const AtomicMeasure& H, double gamma, const AtomicMeasure& G0,
                                      const AtomicMeasure& G1, const CollocationOptions& options = {});

enum class Regime { SubcriticalSolvable, SupercriticalFullPower };
std::string_view to_string(Regime r);

struct EfficacyReport {
  double mu = 0.0;
  double sigma = 0.0;
  double efficacy = 0.0;
  double power = 0.0;
  double alpha = 0.05;
  Regime regime = Regime::SubcriticalSolvable;
};

/// Phi(z_alpha + |theta|) with z_alpha = Phi^{-1}(alpha), the lower alpha point.
double asymptotic_power(double efficacy, double alpha);

/// Mean shift -(h / gamma) int phi' Delta and sd (int int phi' phi' k)^{1/2} of the LSS
/// between the two hypotheses behind `delta`. phi' comes from finite differences of phi at the
/// grid points; outside the support the cdf is piecewise constant and handled exactly.
EfficacyReport lss_moments(const StieltjesCurve& curve, const KernelMatrix& K, const LssFunction& phi,
                           const SignedMeasureCdf& delta, int h, double alpha = 0.05);

/// Moments of the LSS whose derivative is the solved g: mu = (h / gamma) pairing,
/// sigma = energy^{1/2}.
EfficacyReport derivative_moments(const DerivativeSolution& solution, double gamma, int h, double alpha = 0.05);

/// phi' on the curve grid: central differences inside each support interval, one-sided at
/// the first and last grid point of an interval.
std::vector<double> grid_derivative(const StieltjesCurve& curve, const LssFunction& phi);

}  // namespace specdetect
