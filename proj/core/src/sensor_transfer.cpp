#include "lidarint/sensor_transfer.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>

#include <Eigen/QR>

#include "lidarint/error.hpp"
#include "lidarint/file_util.hpp"
#include "lidarint/robust_stats.hpp"

namespace lidarint {

namespace {

constexpr int kPositivityChecks = 1000;

bool same_binning(const MaxCurve& a, const MaxCurve& b) {
  return a.bin_width == b.bin_width && a.gate.r_min == b.gate.r_min &&
         a.gate.r_max == b.gate.r_max;
}

double basis_term(TransferBasis basis, double r, int k) {
  return basis == TransferBasis::power ? std::pow(r, k) : std::pow(r, -k);
}

}  // namespace

MaxCurve build_max_curve(std::span<const Scan> scans, ClassId cls, const MaxCurveOptions& options) {
  if (scans.empty()) throw InsufficientDataError("no scans given for the max-intensity curve");
  const AlphaBinTable layout(options.gate, {options.bin_width, options.min_bin_count, 100.0});

  MaxCurve curve;
  curve.cls = cls;
  curve.sensor = scans.front().sensor();
  curve.gate = options.gate;
  curve.bin_width = options.bin_width;

  std::vector<std::vector<double>> per_bin(layout.bins().size());
  for (const auto& scan : scans) {
    if (!scan.has_labels()) throw ContractError("max-intensity curves need labeled scans");
    if (scan.sensor() != curve.sensor) throw ContractError("scans carry mixed sensor tags");
    const auto labels = scan.labels();
    for (std::size_t i = 0; i < scan.size(); ++i) {
      if (labels[i] != cls) continue;
      const double r = scan[i].range();
      if (!options.gate.contains(r)) continue;
      const auto b = layout.bin_of(r);
      double value = scan[i].intensity;
      if (curve.sensor == SensorKind::ouster_raw) {
        const double rc = 0.5 * (layout.bins()[b].lo + layout.bins()[b].hi);
        value *= (r / rc) * (r / rc);
      }
      per_bin[b].push_back(value);
    }
  }

  for (std::size_t b = 0; b < per_bin.size(); ++b) {
    if (per_bin[b].size() < options.min_bin_count || per_bin[b].empty()) continue;
    MaxCurveBin bin;
    bin.lo = layout.bins()[b].lo;
    bin.hi = layout.bins()[b].hi;
    bin.count = per_bin[b].size();
    bin.max_intensity = nearest_rank_percentile_inplace(per_bin[b], options.percentile);
    curve.bins.push_back(bin);
  }
  if (curve.bins.empty()) {
    throw InsufficientDataError("no range bin of class '" + std::string(class_name(cls)) +
                                "' has " + std::to_string(options.min_bin_count) +
                                " samples inside the gate");
  }
  return curve;
}

QSeries compute_q(const MaxCurve& ouster, const MaxCurve& velodyne) {
  if (ouster.cls != velodyne.cls) throw ContractError("max curves belong to different classes");
  if (!same_binning(ouster, velodyne)) throw ContractError("max curves use different binning");
  QSeries series;
  series.cls = ouster.cls;
  std::size_t j = 0;
  for (const auto& ob : ouster.bins) {
    while (j < velodyne.bins.size() && velodyne.bins[j].lo < ob.lo) ++j;
    if (j == velodyne.bins.size()) break;
    const auto& vb = velodyne.bins[j];
    if (vb.lo != ob.lo) continue;
    if (!(vb.max_intensity > 0.0)) {
      ++series.zero_velodyne_bins;
      continue;
    }
    series.samples.push_back({ob.lo, ob.hi, ob.max_intensity / vb.max_intensity,
                              static_cast<double>(std::min(ob.count, vb.count))});
  }
  return series;
}

std::vector<ClassPairRatio> check_class_independence(std::span<const QSeries> series) {
  if (series.size() < 2) {
    throw PreconditionError("class-independence check needs Q series for at least two classes");
  }
  std::vector<ClassPairRatio> out;
  for (std::size_t a = 0; a < series.size(); ++a) {
    for (std::size_t b = a + 1; b < series.size(); ++b) {
      ClassPairRatio pr;
      pr.numerator = series[a].cls;
      pr.denominator = series[b].cls;
      std::map<double, double> qb;
      for (const auto& s : series[b].samples) qb[s.lo] = s.q;
      for (const auto& s : series[a].samples) {
        const auto it = qb.find(s.lo);
        if (it == qb.end() || !(it->second > 0.0)) continue;
        pr.centers.push_back(s.center());
        pr.ratios.push_back(s.q / it->second);
      }
      if (!pr.ratios.empty()) {
        double sum = 0.0;
        for (double r : pr.ratios) {
          sum += r;
          pr.max_deviation = std::max(pr.max_deviation, std::abs(r - 1.0));
        }
        pr.mean = sum / static_cast<double>(pr.ratios.size());
      }
      out.push_back(std::move(pr));
    }
  }
  return out;
}

std::string_view to_string(TransferBasis b) noexcept {
  return b == TransferBasis::power ? "power" : "inverse_power";
}

std::optional<TransferBasis> parse_transfer_basis(std::string_view name) noexcept {
  if (name == "power") return TransferBasis::power;
  if (name == "inverse_power") return TransferBasis::inverse_power;
  return std::nullopt;
}

TransferCurve::TransferCurve(TransferBasis basis, std::vector<double> coefficients, double r_lo,
                             double r_hi, double residual_rms, double relative_rms)
    : basis_(basis),
      coefficients_(std::move(coefficients)),
      r_lo_(r_lo),
      r_hi_(r_hi),
      residual_rms_(residual_rms),
      relative_rms_(relative_rms) {
  if (coefficients_.empty()) throw ContractError("transfer curve needs coefficients");
  if (!(r_lo_ > 0.0 && r_lo_ <= r_hi_)) throw ContractError("transfer curve domain is invalid");
}

double TransferCurve::evaluate_unchecked(double r) const {
  double sum = 0.0;
  for (int k = degree(); k >= 0; --k) {
    // Horner in r (power) or in 1/r (inverse_power).
    sum = sum * (basis_ == TransferBasis::power ? r : 1.0 / r) +
          coefficients_[static_cast<std::size_t>(k)];
  }
  return sum;
}

double TransferCurve::operator()(double r) const {
  if (!contains(r)) {
    throw ContractError("transfer curve evaluated at " + format_double(r) +
                        " m outside its domain [" + format_double(r_lo_) + ", " +
                        format_double(r_hi_) + "]");
  }
  return evaluate_unchecked(r);
}

std::vector<QSample> pool_q_samples(std::span<const QSeries> series) {
  std::vector<QSample> pooled;
  for (const auto& s : series) pooled.insert(pooled.end(), s.samples.begin(), s.samples.end());
  return pooled;
}

TransferCurve fit_transfer(std::span<const QSample> samples, int degree, TransferBasis basis) {
  if (degree < 0) throw ContractError("polynomial degree must be non-negative");
  const auto cols = static_cast<std::size_t>(degree) + 1;
  if (samples.size() < cols) {
    throw InsufficientDataError("fitting degree " + std::to_string(degree) + " needs " +
                                std::to_string(cols) + " bins, got " +
                                std::to_string(samples.size()));
  }
  double r_lo = samples.front().lo;
  double r_hi = samples.front().hi;
  const auto n = static_cast<Eigen::Index>(samples.size());
  Eigen::MatrixXd a(n, static_cast<Eigen::Index>(cols));
  Eigen::VectorXd b(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& s = samples[static_cast<std::size_t>(i)];
    if (!(s.q > 0.0) || !(s.weight > 0.0) || !(s.lo > 0.0)) {
      throw ContractError("Q samples need positive ratio, weight and range");
    }
    r_lo = std::min(r_lo, s.lo);
    r_hi = std::max(r_hi, s.hi);
    const double w = std::sqrt(s.weight) / s.q;
    for (std::size_t k = 0; k < cols; ++k) {
      a(i, static_cast<Eigen::Index>(k)) = w * basis_term(basis, s.center(), static_cast<int>(k));
    }
    b(i) = w * s.q;
  }
  const Eigen::VectorXd coef = a.colPivHouseholderQr().solve(b);
  if (!coef.allFinite()) throw FitRejectedError("transfer fit produced non-finite coefficients");

  std::vector<double> c(coef.data(), coef.data() + coef.size());
  TransferCurve probe(basis, c, r_lo, r_hi);
  double sq = 0.0, rel_sq = 0.0;
  for (const auto& s : samples) {
    const double res = probe.evaluate_unchecked(s.center()) - s.q;
    sq += res * res;
    rel_sq += (res / s.q) * (res / s.q);
  }
  const double count = static_cast<double>(samples.size());
  for (int i = 0; i <= kPositivityChecks; ++i) {
    const double r = r_lo + (r_hi - r_lo) * static_cast<double>(i) / kPositivityChecks;
    if (!(probe.evaluate_unchecked(r) > 0.0)) {
      throw FitRejectedError("fitted Q is non-positive at " + format_double(r) +
                             " m; converted intensities would be negative");
    }
  }
  return TransferCurve(basis, std::move(c), r_lo, r_hi, std::sqrt(sq / count),
                       std::sqrt(rel_sq / count));
}

ConversionResult convert_velodyne(const Scan& scan, const TransferCurve& curve) {
  if (scan.sensor() != SensorKind::velodyne_preprocessed) {
    throw PreconditionError("convert_velodyne expects a Velodyne-preprocessed scan");
  }
  std::vector<Point> points;
  std::vector<ClassId> labels;
  points.reserve(scan.size());
  const auto src_labels = scan.labels();
  ConversionResult result;
  for (std::size_t i = 0; i < scan.size(); ++i) {
    Point p = scan[i];
    const double r = p.range();
    if (!curve.contains(r)) {
      ++result.dropped_out_of_domain;
      continue;
    }
    p.intensity *= curve.evaluate_unchecked(r);
    points.push_back(p);
    if (scan.has_labels()) labels.push_back(src_labels[i]);
  }
  if (!scan.empty() && points.empty()) {
    throw PreconditionError("no point of the scan lies inside the transfer curve domain [" +
                            format_double(curve.r_lo()) + ", " + format_double(curve.r_hi()) +
                            "] m");
  }
  result.scan = scan.has_labels() ? Scan(std::move(points), std::move(labels), SensorKind::ouster_raw)
                                  : Scan(std::move(points), SensorKind::ouster_raw);
  return result;
}

std::string serialize_transfer_curve(const TransferCurve& curve, std::string_view comment_header) {
  std::ostringstream out;
  out << "# lidarint transfer curve\n" << comment_block(comment_header);
  out << "basis " << to_string(curve.basis()) << '\n';
  out << "degree " << curve.degree() << '\n';
  out << "coefficients";
  for (double c : curve.coefficients()) out << ' ' << format_double(c);
  out << "\ndomain " << format_double(curve.r_lo()) << ' ' << format_double(curve.r_hi()) << '\n';
  out << "residual_rms " << format_double(curve.residual_rms()) << '\n';
  out << "relative_rms " << format_double(curve.relative_rms()) << '\n';
  return out.str();
}

TransferCurve parse_transfer_curve(std::string_view text) {
  std::optional<TransferBasis> basis = TransferBasis::power;
  std::optional<int> degree;
  std::vector<double> coefficients;
  std::optional<std::pair<double, double>> domain;
  double rms = 0.0, rel = 0.0;
  std::size_t line_no = 0;
  for (auto line : split_lines(text)) {
    ++line_no;
    const std::string where = "transfer curve line " + std::to_string(line_no);
    if (!line.empty() && line.front() == '#') continue;
    const auto tok = split_ws(line);
    if (tok.empty()) continue;
    if (tok[0] == "basis" && tok.size() == 2) {
      basis = parse_transfer_basis(tok[1]);
      if (!basis) throw FormatError(where + ": unknown basis '" + std::string(tok[1]) + "'");
    } else if (tok[0] == "degree" && tok.size() == 2) {
      degree = static_cast<int>(parse_int(tok[1], where));
    } else if (tok[0] == "coefficients") {
      for (std::size_t i = 1; i < tok.size(); ++i) coefficients.push_back(parse_double(tok[i], where));
    } else if (tok[0] == "domain" && tok.size() == 3) {
      domain = std::pair{parse_double(tok[1], where), parse_double(tok[2], where)};
    } else if (tok[0] == "residual_rms" && tok.size() == 2) {
      rms = parse_double(tok[1], where);
    } else if (tok[0] == "relative_rms" && tok.size() == 2) {
      rel = parse_double(tok[1], where);
    } else {
      throw FormatError(where + ": unexpected '" + std::string(tok[0]) + "'");
    }
  }
  if (!degree || !domain) throw FormatError("transfer curve lacks degree or domain");
  if (*degree < 0 || coefficients.size() != static_cast<std::size_t>(*degree) + 1) {
    throw FormatError("transfer curve degree " + std::to_string(*degree) + " needs " +
                      std::to_string(*degree + 1) + " coefficients, got " +
                      std::to_string(coefficients.size()));
  }
  try {
    return TransferCurve(*basis, std::move(coefficients), domain->first, domain->second, rms, rel);
  } catch (const ContractError& e) {
    throw FormatError(e.what());
  }
}

void save_transfer_curve(const TransferCurve& curve, const std::filesystem::path& path,
                         std::string_view comment_header) {
  write_file_atomic(path, serialize_transfer_curve(curve, comment_header));
}

TransferCurve load_transfer_curve(const std::filesystem::path& path) {
  try {
    return parse_transfer_curve(read_file_text(path));
  } catch (const FormatError& e) {
    throw FormatError("'" + path.string() + "': " + e.what());
  }
}

}  // namespace lidarint
