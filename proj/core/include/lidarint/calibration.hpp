#pragma once

#include <cstddef>
#include <functional>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "lidarint/geometry.hpp"
#include "lidarint/scan.hpp"

namespace lidarint {

inline constexpr double deg_to_rad(double deg) { return deg * std::numbers::pi / 180.0; }
inline constexpr double rad_to_deg(double rad) { return rad * 180.0 / std::numbers::pi; }

/// Ranges where the ideal 1/R^2 law holds. Both ends are inclusive; below
/// r_min the near-range efficiency is below one and is not inverted.
struct RangeGate {
  double r_min = 6.0;
  double r_max = 60.0;

  /// Throws ContractError unless 0 < r_min < r_max.
  void validate() const;
  bool contains(double range) const { return range >= r_min && range <= r_max; }
};

struct CalibrationLimits {
  RangeGate gate;
  /// Incidence angles beyond this are rejected: 1/cos(alpha) explodes at
  /// grazing incidence.
  double alpha_max = deg_to_rad(85.0);
};

/// Reflectivity proxy intensity * R^2 / cos(alpha).
/// Throws GateError for a range outside the gate, GrazingAngleError for
/// alpha > alpha_max, ContractError for negative intensity or alpha.
double calibrate(double intensity, double range, double alpha, const CalibrationLimits& limits = {});

/// intensity * R^2. Throws GateError outside the gate.
double range_correct(double intensity, double range, const RangeGate& gate = {});

// --- ground-truth incidence angles from per-range maxima -------------------

struct AlphaBinOptions {
  double bin_width = 1.0;
  std::size_t min_bin_count = 20;
  /// Nearest-rank percentile used as the robust maximum; 100 = exact max.
  double percentile = 99.0;
};

struct AlphaBin {
  double lo = 0.0;
  double hi = 0.0;
  /// Robust maximum of the range-normalized intensity I * R^2 in this bin.
  double robust_max = 0.0;
  std::size_t count = 0;
  bool usable = false;
};

/// Per-range-bin robust maxima. Inside a bin the maximum is carried as
/// I * R^2, so MaxIntensity(R) = robust_max / R^2 at the point's own range
/// rather than at the bin edge.
class AlphaBinTable {
 public:
  AlphaBinTable() = default;
  AlphaBinTable(const RangeGate& gate, const AlphaBinOptions& options);

  std::size_t bin_of(double range) const;
  const std::vector<AlphaBin>& bins() const { return bins_; }
  std::vector<AlphaBin>& mutable_bins() { return bins_; }
  const AlphaBinOptions& options() const { return options_; }
  const RangeGate& gate() const { return gate_; }

  /// Robust maximum raw intensity expected at `range`, or nullopt when the
  /// bin is unusable.
  std::optional<double> max_intensity_at(double range) const;

  /// Plain-text table: comment header, then `<bin_lo> <bin_hi> <robust_max> <count>`.
  std::string to_text() const;

 private:
  RangeGate gate_;
  AlphaBinOptions options_;
  std::vector<AlphaBin> bins_;
};

struct IntensitySample {
  double intensity = 0.0;
  double range = 0.0;
};

struct AlphaExtraction {
  AlphaBinTable table;
  /// One entry per input sample; nullopt when its bin has fewer than
  /// min_bin_count samples or a zero maximum.
  std::vector<std::optional<double>> alpha;
};

/// alpha = arccos(I / MaxIntensity(R)) for samples of one class, clipped to
/// [0, pi/2]. Throws GateError if any sample lies outside the gate.
AlphaExtraction extract_alpha_ground_truth(std::span<const IntensitySample> samples,
                                           const RangeGate& gate,
                                           const AlphaBinOptions& options = {});

// --- scan-level calibration ------------------------------------------------

enum class Rejection : std::uint8_t {
  none,
  self_return,
  near_range,
  far_range,
  degenerate_normal,
  grazing_angle,
};

std::string_view to_string(Rejection r) noexcept;

struct RejectionCounts {
  std::size_t self_return = 0;
  std::size_t near_range = 0;
  std::size_t far_range = 0;
  std::size_t degenerate_normal = 0;
  std::size_t grazing_angle = 0;

  std::size_t total() const {
    return self_return + near_range + far_range + degenerate_normal + grazing_angle;
  }
  void add(Rejection r);
  RejectionCounts& operator+=(const RejectionCounts& o);
};

struct CalibratedPoint {
  std::size_t index = 0;  // position in the source scan
  Point point;
  UnitVector3 normal{0.0, 0.0, 1.0};
  double alpha = 0.0;
  double calibrated_intensity = 0.0;
};

struct CalibrationResult {
  std::vector<CalibratedPoint> points;  // ascending source index
  RejectionCounts rejected;
};

/// Maps (surface normal, beam direction) to an incidence angle in radians.
using AlphaProvider = std::function<double(const UnitVector3& normal, const UnitVector3& beam)>;

/// arccos(|n . l|).
AlphaProvider analytic_alpha();

/// Calibrates every point of an Ouster-raw scan. Points failing a gate are
/// omitted and tallied by reason. Throws PreconditionError for Velodyne scans
/// (convert them first) and ContractError when normals.size() != scan.size().
CalibrationResult calibrate_scan(const Scan& scan, std::span<const NormalEstimate> normals,
                                 const CalibrationLimits& limits = {},
                                 const AlphaProvider& alpha_of = analytic_alpha());

}  // namespace lidarint
