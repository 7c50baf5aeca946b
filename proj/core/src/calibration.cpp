#include "lidarint/calibration.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "lidarint/error.hpp"
#include "lidarint/file_util.hpp"
#include "lidarint/robust_stats.hpp"

namespace lidarint {

namespace {

std::string fmt_range(double r) { return format_double(r) + " m"; }

void check_gate(double range, const RangeGate& gate) {
  if (!gate.contains(range)) {
    throw GateError("range " + fmt_range(range) + " outside gate [" + fmt_range(gate.r_min) +
                    ", " + fmt_range(gate.r_max) + "]");
  }
}

}  // namespace

void RangeGate::validate() const {
  if (!(r_min > 0.0 && r_min < r_max) || !std::isfinite(r_max)) {
    throw ContractError("range gate requires 0 < r_min < r_max");
  }
}

double calibrate(double intensity, double range, double alpha, const CalibrationLimits& limits) {
  if (!(intensity >= 0.0)) throw ContractError("intensity must be non-negative");
  if (!(alpha >= 0.0)) throw ContractError("incidence angle must be non-negative");
  check_gate(range, limits.gate);
  if (alpha > limits.alpha_max) {
    throw GrazingAngleError("incidence angle " + format_double(rad_to_deg(alpha)) +
                            " deg exceeds " + format_double(rad_to_deg(limits.alpha_max)) +
                            " deg");
  }
  return intensity * range * range / std::cos(alpha);
}

double range_correct(double intensity, double range, const RangeGate& gate) {
  if (!(intensity >= 0.0)) throw ContractError("intensity must be non-negative");
  check_gate(range, gate);
  return intensity * range * range;
}

AlphaBinTable::AlphaBinTable(const RangeGate& gate, const AlphaBinOptions& options)
    : gate_(gate), options_(options) {
  gate.validate();
  if (!(options.bin_width > 0.0)) throw ContractError("bin width must be positive");
  const auto n = static_cast<std::size_t>(
      std::max(1.0, std::ceil((gate.r_max - gate.r_min) / options.bin_width - 1e-12)));
  bins_.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    bins_[i].lo = gate.r_min + static_cast<double>(i) * options.bin_width;
    bins_[i].hi = std::min(gate.r_max, bins_[i].lo + options.bin_width);
  }
}

std::size_t AlphaBinTable::bin_of(double range) const {
  const double rel = (range - gate_.r_min) / options_.bin_width;
  const auto i = static_cast<std::size_t>(std::max(0.0, std::floor(rel)));
  return std::min(i, bins_.size() - 1);
}

std::optional<double> AlphaBinTable::max_intensity_at(double range) const {
  if (!gate_.contains(range)) return std::nullopt;
  const auto& b = bins_[bin_of(range)];
  if (!b.usable) return std::nullopt;
  return b.robust_max / (range * range);
}

std::string AlphaBinTable::to_text() const {
  std::ostringstream out;
  out << "# alpha bin table\n";
  out << "# r_min " << format_double(gate_.r_min) << " r_max " << format_double(gate_.r_max)
      << " bin_width " << format_double(options_.bin_width) << " min_bin_count "
      << options_.min_bin_count << " percentile " << format_double(options_.percentile) << "\n";
  out << "# robust_max is the robust maximum of intensity * range^2 within the bin\n";
  out << "# bin_lo bin_hi robust_max count\n";
  for (const auto& b : bins_) {
    out << format_double(b.lo) << ' ' << format_double(b.hi) << ' ' << format_double(b.robust_max)
        << ' ' << b.count << '\n';
  }
  return out.str();
}

AlphaExtraction extract_alpha_ground_truth(std::span<const IntensitySample> samples,
                                           const RangeGate& gate,
                                           const AlphaBinOptions& options) {
  AlphaExtraction result{AlphaBinTable(gate, options), {}};
  auto& bins = result.table.mutable_bins();

  std::vector<std::vector<double>> per_bin(bins.size());
  std::vector<std::size_t> bin_index(samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const auto& s = samples[i];
    check_gate(s.range, gate);
    if (!(s.intensity >= 0.0)) throw ContractError("intensity must be non-negative");
    bin_index[i] = result.table.bin_of(s.range);
    per_bin[bin_index[i]].push_back(s.intensity * s.range * s.range);
  }

  for (std::size_t b = 0; b < bins.size(); ++b) {
    bins[b].count = per_bin[b].size();
    if (per_bin[b].empty()) continue;
    bins[b].robust_max = nearest_rank_percentile_inplace(per_bin[b], options.percentile);
    bins[b].usable = bins[b].count >= options.min_bin_count && bins[b].robust_max > 0.0;
  }

  result.alpha.resize(samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const auto& bin = bins[bin_index[i]];
    if (!bin.usable) continue;
    const double ratio = samples[i].intensity * samples[i].range * samples[i].range / bin.robust_max;
    result.alpha[i] = std::acos(std::clamp(ratio, 0.0, 1.0));
  }
  return result;
}

std::string_view to_string(Rejection r) noexcept {
  switch (r) {
    case Rejection::none: return "none";
    case Rejection::self_return: return "self_return";
    case Rejection::near_range: return "near_range";
    case Rejection::far_range: return "far_range";
    case Rejection::degenerate_normal: return "degenerate_normal";
    case Rejection::grazing_angle: return "grazing_angle";
  }
  return "unknown";
}

void RejectionCounts::add(Rejection r) {
  switch (r) {
    case Rejection::none: break;
    case Rejection::self_return: ++self_return; break;
    case Rejection::near_range: ++near_range; break;
    case Rejection::far_range: ++far_range; break;
    case Rejection::degenerate_normal: ++degenerate_normal; break;
    case Rejection::grazing_angle: ++grazing_angle; break;
  }
}

RejectionCounts& RejectionCounts::operator+=(const RejectionCounts& o) {
  self_return += o.self_return;
  near_range += o.near_range;
  far_range += o.far_range;
  degenerate_normal += o.degenerate_normal;
  grazing_angle += o.grazing_angle;
  return *this;
}

AlphaProvider analytic_alpha() {
  return [](const UnitVector3& normal, const UnitVector3& beam) {
    return incidence_angle(beam, normal);
  };
}

CalibrationResult calibrate_scan(const Scan& scan, std::span<const NormalEstimate> normals,
                                 const CalibrationLimits& limits, const AlphaProvider& alpha_of) {
  if (scan.sensor() != SensorKind::ouster_raw) {
    throw PreconditionError(
        "scan carries Velodyne-preprocessed intensity; convert it to raw form with a transfer "
        "curve (convert-velodyne) before calibration");
  }
  if (normals.size() != scan.size()) {
    throw ContractError("normal count " + std::to_string(normals.size()) +
                        " does not match point count " + std::to_string(scan.size()));
  }
  limits.gate.validate();

  CalibrationResult result;
  result.points.reserve(scan.size());
  for (std::size_t i = 0; i < scan.size(); ++i) {
    const Point& p = scan[i];
    const double range = p.range();
    Rejection why = Rejection::none;
    if (range < kSelfReturnRange) {
      why = Rejection::self_return;
    } else if (range < limits.gate.r_min) {
      why = Rejection::near_range;
    } else if (range > limits.gate.r_max) {
      why = Rejection::far_range;
    } else if (!normals[i].trusted) {
      why = Rejection::degenerate_normal;
    }
    if (why != Rejection::none) {
      result.rejected.add(why);
      continue;
    }
    const UnitVector3 beam = beam_direction(p);
    const double alpha = alpha_of(normals[i].normal, beam);
    if (!(alpha <= limits.alpha_max)) {
      result.rejected.add(Rejection::grazing_angle);
      continue;
    }
    result.points.push_back(
        {i, p, normals[i].normal, alpha, p.intensity * range * range / std::cos(alpha)});
  }
  return result;
}

}  // namespace lidarint
