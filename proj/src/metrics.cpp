#include "sparselb/metrics.hpp"

#include <algorithm>
#include <cmath>

namespace sparselb {

double CcdfCurve::eval(double v) const {
  // First support value strictly greater than v carries P(X > v).
  auto it = std::upper_bound(values.begin(), values.end(), v);
  if (it == values.end()) return 0.0;
  if (it == values.begin()) return 1.0;
  // P(X > v) = P(X > previous support point) for v between support points.
  return tail[static_cast<std::size_t>(it - values.begin()) - 1];
}

CcdfCurve make_ccdf(std::vector<double> samples) {
  CcdfCurve c;
  if (samples.empty()) return c;
  std::sort(samples.begin(), samples.end());
  const double n = static_cast<double>(samples.size());
  std::size_t i = 0;
  while (i < samples.size()) {
    std::size_t j = i;
    while (j < samples.size() && samples[j] == samples[i]) ++j;
    c.values.push_back(samples[i]);
    c.tail.push_back(static_cast<double>(samples.size() - j) / n);
    i = j;
  }
  return c;
}

double ccdf_dominance_fraction(const CcdfCurve& a, const CcdfCurve& b) {
  std::vector<double> grid;
  grid.reserve(a.values.size() + b.values.size());
  grid.insert(grid.end(), a.values.begin(), a.values.end());
  grid.insert(grid.end(), b.values.begin(), b.values.end());
  std::sort(grid.begin(), grid.end());
  grid.erase(std::unique(grid.begin(), grid.end()), grid.end());
  if (grid.empty()) return 1.0;
  std::size_t at_or_below = 0;
  for (double v : grid)
    if (a.eval(v) <= b.eval(v)) ++at_or_below;
  return static_cast<double>(at_or_below) / static_cast<double>(grid.size());
}

SummaryStats summarize(std::vector<double> samples) {
  SummaryStats s;
  s.count = samples.size();
  if (samples.empty()) return s;
  std::sort(samples.begin(), samples.end());
  double sum = 0.0;
  for (double v : samples) sum += v;
  s.mean = sum / static_cast<double>(samples.size());
  const std::size_t n = samples.size();
  s.median = (n % 2 == 1) ? samples[n / 2] : 0.5 * (samples[n / 2 - 1] + samples[n / 2]);
  // p99 by the nearest-rank rule.
  std::size_t rank = static_cast<std::size_t>(std::ceil(0.99 * static_cast<double>(n)));
  if (rank < 1) rank = 1;
  s.p99 = samples[rank - 1];
  return s;
}

std::uint64_t MetricsLog::total_violations() const {
  std::uint64_t total = 0;
  for (const auto& [key, n] : violations) total += n;
  return total;
}

std::optional<double> mean_of(const std::vector<double>& v) {
  if (v.empty()) return std::nullopt;
  double sum = 0.0;
  for (double x : v) sum += x;
  return sum / static_cast<double>(v.size());
}

}  // namespace sparselb
