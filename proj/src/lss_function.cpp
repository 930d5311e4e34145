#include "specdetect/lss_function.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <utility>

#include "specdetect/errors.hpp"

namespace specdetect {

std::string_view to_string(Segment s) {
  switch (s) {
    case Segment::Support: return "support";
    case Segment::Bridge: return "bridge";
    case Segment::Outside: return "outside";
    case Segment::Bump: return "bump";
  }
  return "support";
}

Segment segment_from_string(std::string_view s) {
  if (s == "support") return Segment::Support;
  if (s == "bridge") return Segment::Bridge;
  if (s == "outside") return Segment::Outside;
  if (s == "bump") return Segment::Bump;
  throw DomainError("unknown LSS segment label '" + std::string(s) + "'");
}

LssFunction::LssFunction(std::vector<double> knots, std::vector<double> values, std::vector<Segment> segments)
    : knots_(std::move(knots)), values_(std::move(values)), segments_(std::move(segments)) {
  if (knots_.empty()) throw DomainError("LSS function needs at least one knot");
  if (knots_.size() != values_.size() || knots_.size() != segments_.size())
    throw DomainError("LSS knots, values and segments must have equal length");
  for (std::size_t i = 0; i < knots_.size(); ++i) {
    if (!std::isfinite(knots_[i]) || !std::isfinite(values_[i])) throw DomainError("LSS samples must be finite");
    if (i > 0 && !(knots_[i] > knots_[i - 1])) throw DomainError("LSS knots must be strictly increasing");
  }
}

LssFunction LssFunction::analytic(std::function<double(double)> f, std::vector<double> knots, std::string label) {
  std::vector<double> values(knots.size());
  std::transform(knots.begin(), knots.end(), values.begin(), f);
  LssFunction out(std::move(knots), std::move(values), std::vector<Segment>(values.size(), Segment::Support));
  out.exact_ = std::move(f);
  out.label_ = std::move(label);
  return out;
}

double LssFunction::operator()(double x) const {
  if (exact_) return scale_ * exact_(x);
  if (x <= knots_.front()) return values_.front();
  if (x >= knots_.back()) return values_.back();
  const auto it = std::upper_bound(knots_.begin(), knots_.end(), x);
  const std::size_t j = static_cast<std::size_t>(it - knots_.begin());
  const double x0 = knots_[j - 1], x1 = knots_[j];
  const double tau = (x - x0) / (x1 - x0);
  return values_[j - 1] + tau * (values_[j] - values_[j - 1]);
}

double LssFunction::slope(double x) const {
  if (knots_.size() < 2 || x < knots_.front() || x > knots_.back()) return 0.0;
  auto it = std::upper_bound(knots_.begin(), knots_.end(), x);
  std::size_t j = static_cast<std::size_t>(it - knots_.begin());
  if (j >= knots_.size()) j = knots_.size() - 1;
  if (j == 0) j = 1;
  return (values_[j] - values_[j - 1]) / (knots_[j] - knots_[j - 1]);
}

LssFunction LssFunction::normalized() const {
  double peak = 0.0;
  for (std::size_t i = 0; i < size(); ++i)
    if (segments_[i] == Segment::Support) peak = std::max(peak, std::abs(values_[i]));
  if (peak == 0.0) return *this;
  return scaled(1.0 / peak);
}

LssFunction LssFunction::scaled(double c) const {
  if (!std::isfinite(c)) throw DomainError("LSS scale factor must be finite");
  LssFunction out = *this;
  for (auto& v : out.values_) v *= c;
  out.scale_ *= c;
  return out;
}

LssFunction LssFunction::plus(const LssFunction& other, double c) const {
  std::vector<double> values(size());
  for (std::size_t i = 0; i < size(); ++i) values[i] = (*this)(knots_[i]) + c * other(knots_[i]);
  return LssFunction(knots_, std::move(values), segments_);
}

double centered_mad(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size() || a.empty()) throw DomainError("centered_mad needs equal nonempty samples");
  auto standardize = [](std::span<const double> s) {
    double mean = 0.0;
    for (double v : s) mean += v;
    mean /= static_cast<double>(s.size());
    std::vector<double> out(s.size());
    double peak = 0.0;
    for (std::size_t i = 0; i < s.size(); ++i) {
      out[i] = s[i] - mean;
      peak = std::max(peak, std::abs(out[i]));
    }
    if (peak > 0.0)
      for (auto& v : out) v /= peak;
    return out;
  };
  const auto sa = standardize(a), sb = standardize(b);
  double mad = 0.0;
  for (std::size_t i = 0; i < sa.size(); ++i) mad += std::abs(sa[i] - sb[i]);
  return mad / static_cast<double>(sa.size());
}

}  // namespace specdetect
