#pragma once

#include <span>
#include <vector>

namespace lidarint {

/// Nearest-rank percentile: the smallest sample x such that at least
/// `percent`% of the samples are <= x. percent = 100 gives the exact maximum,
/// and any percentile of fewer than 100 samples at 99 equals the maximum.
/// Throws ContractError on empty input or percent outside (0, 100].
double nearest_rank_percentile(std::span<const double> values, double percent);

/// Same, but reorders `values` in place instead of copying.
double nearest_rank_percentile_inplace(std::vector<double>& values, double percent);

/// Linear-interpolated quantile in [0, 1] (type 7); used for spreads.
double interpolated_quantile(std::vector<double> values, double q);

}  // namespace lidarint
