#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace specdetect {

/// Discrete probability measure sum_i w_i delta_{t_i} on [0, inf).
///
/// Atoms are kept strictly increasing; duplicate locations are merged by
/// summing their weights. Weights must be positive and sum to one within 1e-12.
class AtomicMeasure {
 public:
  AtomicMeasure(std::vector<double> atoms, std::vector<double> weights);

  /// Uniform measure d^{-1} sum delta_{t_i}; repeated atoms become multiplicities.
  static AtomicMeasure uniform(std::vector<double> atoms);
  static AtomicMeasure point(double location);
  /// Accepts any positive weights and rescales them to sum to one.
  static AtomicMeasure normalized(std::vector<double> atoms, std::vector<double> weights);

  std::span<const double> atoms() const { return atoms_; }
  std::span<const double> weights() const { return weights_; }
  std::size_t size() const { return atoms_.size(); }

  double min_atom() const { return atoms_.front(); }
  double max_atom() const { return atoms_.back(); }
  /// sum_i w_i t_i^k
  double moment(int k) const;
  bool is_zero_point_mass() const;
  bool has_atom(double location) const;

  /// (1 - eps) * this + eps * other
  AtomicMeasure mixture(const AtomicMeasure& other, double eps) const;
  /// Pushforward under t -> c t.
  AtomicMeasure scaled(double c) const;

  friend bool operator==(const AtomicMeasure&, const AtomicMeasure&) = default;

 private:
  AtomicMeasure() = default;
  std::vector<double> atoms_;
  std::vector<double> weights_;
};

}  // namespace specdetect
