#include "lidarint/robust_stats.hpp"

#include <algorithm>
#include <cmath>

#include "lidarint/error.hpp"

namespace lidarint {

double nearest_rank_percentile_inplace(std::vector<double>& values, double percent) {
  if (values.empty()) {
    throw ContractError("percentile of an empty sample");
  }
  if (!(percent > 0.0 && percent <= 100.0)) {
    throw ContractError("percentile must lie in (0, 100]");
  }
  const auto n = values.size();
  auto rank = static_cast<std::size_t>(std::ceil(percent / 100.0 * static_cast<double>(n)));
  rank = std::clamp<std::size_t>(rank, 1, n);
  auto nth = values.begin() + static_cast<std::ptrdiff_t>(rank - 1);
  std::nth_element(values.begin(), nth, values.end());
  return *nth;
}

double nearest_rank_percentile(std::span<const double> values, double percent) {
  std::vector<double> copy(values.begin(), values.end());
  return nearest_rank_percentile_inplace(copy, percent);
}

double interpolated_quantile(std::vector<double> values, double q) {
  if (values.empty()) {
    throw ContractError("quantile of an empty sample");
  }
  std::sort(values.begin(), values.end());
  const double pos = std::clamp(q, 0.0, 1.0) * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, values.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return values[lo] + frac * (values[hi] - values[lo]);
}

}  // namespace lidarint
