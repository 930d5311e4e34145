#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace specdetect {

enum class Segment { Support, Bridge, Outside, Bump };

std::string_view to_string(Segment s);
Segment segment_from_string(std::string_view s);

/// Test function phi for a linear spectral statistic sum_i phi(lambda_i).
///
/// Sampled on strictly increasing knots and evaluated by linear interpolation, held
/// constant beyond the first and last knot. A closed-form callable may be attached;
/// it then takes precedence for point evaluation while the knots still drive the
/// finite-difference derivatives used in moment computations.
class LssFunction {
 public:
  LssFunction(std::vector<double> knots, std::vector<double> values, std::vector<Segment> segments);

  /// Samples `f` at `knots`, all tagged Support, and keeps `f` for point evaluation.
  static LssFunction analytic(std::function<double(double)> f, std::vector<double> knots, std::string label = {});

  double operator()(double x) const;
  /// Derivative of the interpolant; one-sided at knots that end a segment run.
  double slope(double x) const;

  std::span<const double> knots() const { return knots_; }
  std::span<const double> values() const { return values_; }
  std::span<const Segment> segments() const { return segments_; }
  std::size_t size() const { return knots_.size(); }
  bool is_analytic() const { return static_cast<bool>(exact_); }
  const std::string& label() const { return label_; }

  /// Factor the values were multiplied by in the last normalization (1 if never normalized).
  double normalization() const { return scale_; }
  /// Rescaled copy with max |phi| = 1 over the Support knots (unchanged when all are zero).
  LssFunction normalized() const;
  LssFunction scaled(double c) const;
  /// this + c * other evaluated on this function's knots; drops any closed form.
  LssFunction plus(const LssFunction& other, double c = 1.0) const;

 private:
  std::vector<double> knots_;
  std::vector<double> values_;
  std::vector<Segment> segments_;
  std::function<double(double)> exact_;
  std::string label_;
  double scale_ = 1.0;
};

/// Mean absolute deviation between two functions on the given points after subtracting each
/// one's mean over the points and scaling each to max-abs 1 there.
double centered_mad(std::span<const double> a, std::span<const double> b);

}  // namespace specdetect
