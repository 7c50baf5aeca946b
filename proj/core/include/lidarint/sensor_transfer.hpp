#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "lidarint/calibration.hpp"
#include "lidarint/scan.hpp"

namespace lidarint {

struct MaxCurveOptions {
  RangeGate gate;
  double bin_width = 1.0;
  std::size_t min_bin_count = 20;
  /// Nearest-rank percentile; 100 = exact max.
  double percentile = 99.0;
};

struct MaxCurveBin {
  double lo = 0.0;
  double hi = 0.0;
  double max_intensity = 0.0;  // robust maximum referred to the bin center
  std::size_t count = 0;

  double center() const { return 0.5 * (lo + hi); }
};

/// Robust maximum intensity per range bin for one class and one sensor.
/// Only bins with at least min_bin_count samples are kept.
///
/// Raw (Ouster) intensities follow 1/R^2 inside a bin, so each sample is
/// referred to the bin center as I * (R / r_center)^2 before taking the
/// maximum. Velodyne intensities are already range-compensated by the sensor
/// and are used as-is.
struct MaxCurve {
  ClassId cls = ClassId::void_;
  SensorKind sensor = SensorKind::ouster_raw;
  RangeGate gate;
  double bin_width = 1.0;
  std::vector<MaxCurveBin> bins;
};

/// Throws ContractError if the scans are unlabeled or carry mixed sensor
/// tags, InsufficientDataError if no bin qualifies.
MaxCurve build_max_curve(std::span<const Scan> scans, ClassId cls,
                         const MaxCurveOptions& options = {});

struct QSample {
  double lo = 0.0;
  double hi = 0.0;
  double q = 0.0;
  double weight = 1.0;  // pooled-fit weight (bin sample count)

  double center() const { return 0.5 * (lo + hi); }
};

struct QSeries {
  ClassId cls = ClassId::void_;
  std::vector<QSample> samples;
  /// Bins dropped because the Velodyne maximum was zero.
  std::size_t zero_velodyne_bins = 0;
};

/// Per-bin ratio ouster.max / velodyne.max over the bins both curves keep.
/// Throws ContractError when the curves differ in class or binning.
QSeries compute_q(const MaxCurve& ouster, const MaxCurve& velodyne);

struct ClassPairRatio {
  ClassId numerator = ClassId::void_;
  ClassId denominator = ClassId::void_;
  std::vector<double> centers;
  std::vector<double> ratios;
  double mean = 0.0;           // 0 when no bins overlap
  double max_deviation = 0.0;  // max |ratio - 1|
};

/// Q_a / Q_b per shared bin for every class pair a < b.
/// Throws PreconditionError with fewer than two series.
std::vector<ClassPairRatio> check_class_independence(std::span<const QSeries> series);

enum class TransferBasis {
  power,          // Q(r) = sum_k c_k r^k
  inverse_power,  // Q(r) = sum_k c_k r^-k
};

std::string_view to_string(TransferBasis b) noexcept;
std::optional<TransferBasis> parse_transfer_basis(std::string_view name) noexcept;

/// Fitted Q(r). Evaluation is only defined on [r_lo, r_hi].
class TransferCurve {
 public:
  TransferCurve() = default;
  TransferCurve(TransferBasis basis, std::vector<double> coefficients, double r_lo, double r_hi,
                double residual_rms = 0.0, double relative_rms = 0.0);

  TransferBasis basis() const { return basis_; }
  int degree() const { return static_cast<int>(coefficients_.size()) - 1; }
  const std::vector<double>& coefficients() const { return coefficients_; }
  double r_lo() const { return r_lo_; }
  double r_hi() const { return r_hi_; }
  double residual_rms() const { return residual_rms_; }
  double relative_rms() const { return relative_rms_; }

  bool contains(double r) const { return r >= r_lo_ && r <= r_hi_; }
  /// Throws ContractError outside the domain.
  double operator()(double r) const;
  /// Evaluation without the domain check.
  double evaluate_unchecked(double r) const;

 private:
  TransferBasis basis_ = TransferBasis::inverse_power;
  std::vector<double> coefficients_{1.0};
  double r_lo_ = 0.0;
  double r_hi_ = 0.0;
  double residual_rms_ = 0.0;
  double relative_rms_ = 0.0;
};

/// Concatenates the samples of several classes for a pooled fit.
std::vector<QSample> pool_q_samples(std::span<const QSeries> series);

/// Weighted least squares: minimizes sum w_i ((Q(r_i) - q_i) / q_i)^2 with
/// w_i the bin weight. The domain spans the outer bin edges.
/// Throws InsufficientDataError with fewer than degree+1 samples and
/// FitRejectedError when the fit is non-positive anywhere on the domain.
TransferCurve fit_transfer(std::span<const QSample> samples, int degree = 3,
                           TransferBasis basis = TransferBasis::inverse_power);

struct ConversionResult {
  Scan scan;  // tagged ouster_raw; labels kept for surviving points
  std::size_t dropped_out_of_domain = 0;
};

/// intensity <- Q(range) * intensity, geometry unchanged, out-of-domain
/// points dropped. Throws PreconditionError for a scan not tagged Velodyne or
/// when a non-empty scan has no point inside the curve domain.
ConversionResult convert_velodyne(const Scan& scan, const TransferCurve& curve);

std::string serialize_transfer_curve(const TransferCurve& curve,
                                     std::string_view comment_header = {});
TransferCurve parse_transfer_curve(std::string_view text);
void save_transfer_curve(const TransferCurve& curve, const std::filesystem::path& path,
                         std::string_view comment_header = {});
TransferCurve load_transfer_curve(const std::filesystem::path& path);

}  // namespace lidarint
