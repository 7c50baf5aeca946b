#include "lidarint/class_profiles.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <sstream>

#include "lidarint/error.hpp"
#include "lidarint/file_util.hpp"
#include "lidarint/robust_stats.hpp"

namespace lidarint {

double Histogram::bin_width() const {
  if (counts.empty()) return 0.0;
  return (hi - lo) / static_cast<double>(counts.size());
}

double Histogram::center(std::size_t bin) const {
  return lo + (static_cast<double>(bin) + 0.5) * bin_width();
}

std::size_t Histogram::bin_of(double value) const {
  const double w = bin_width();
  if (!(w > 0.0)) return 0;
  const double rel = std::floor((value - lo) / w);
  if (rel <= 0.0) return 0;
  return std::min(static_cast<std::size_t>(rel), counts.size() - 1);
}

ProfileSet::ProfileSet(std::vector<ClassProfile> profiles, ProfileOptions options,
                       std::vector<ExcludedClass> excluded)
    : profiles_(std::move(profiles)), options_(options), excluded_(std::move(excluded)) {
  std::sort(profiles_.begin(), profiles_.end(),
            [](const ClassProfile& a, const ClassProfile& b) { return a.cls < b.cls; });
  for (std::size_t i = 1; i < profiles_.size(); ++i) {
    if (profiles_[i].cls == profiles_[i - 1].cls) {
      throw ContractError("duplicate profile for class '" +
                          std::string(class_name(profiles_[i].cls)) + "'");
    }
  }
}

const ClassProfile* ProfileSet::find(ClassId cls) const {
  for (const auto& p : profiles_) {
    if (p.cls == cls) return &p;
  }
  return nullptr;
}

std::vector<LabeledIntensity> labeled_intensities(const CalibrationResult& calibrated,
                                                  const Scan& scan) {
  if (!scan.has_labels()) throw ContractError("scan has no labels");
  const auto labels = scan.labels();
  std::vector<LabeledIntensity> out;
  out.reserve(calibrated.points.size());
  for (const auto& cp : calibrated.points) {
    out.push_back({labels[cp.index], cp.calibrated_intensity});
  }
  return out;
}

ProfileSet build_profiles(std::span<const LabeledIntensity> samples,
                          const ProfileOptions& options) {
  if (!(options.bin_fraction > 0.0 && options.bin_fraction <= 1.0) || options.min_bins == 0) {
    throw ContractError("profile bin fraction must lie in (0, 1] and min_bins be positive");
  }
  std::array<std::vector<double>, kClassCount> values;
  for (const auto& s : samples) {
    if (s.cls == ClassId::void_) continue;
    if (!std::isfinite(s.value)) throw ContractError("non-finite calibrated intensity");
    values[index_of(s.cls)].push_back(s.value);
  }

  const auto bins = std::max<std::size_t>(
      options.min_bins, static_cast<std::size_t>(std::ceil(1.0 / options.bin_fraction - 1e-9)));

  std::vector<ClassProfile> profiles;
  std::vector<ExcludedClass> excluded;
  for (std::size_t c = 1; c < kClassCount; ++c) {
    auto& v = values[c];
    if (v.empty()) continue;
    const ClassId cls = class_from_index(c);
    if (v.size() < options.min_support) {
      excluded.push_back({cls, v.size()});
      continue;
    }
    const auto [mn, mx] = std::minmax_element(v.begin(), v.end());
    ClassProfile p;
    p.cls = cls;
    p.support = v.size();
    p.histogram.lo = *mn;
    p.histogram.hi = *mx;
    if (*mx > *mn) {
      p.histogram.counts.assign(bins, 0);
      for (double x : v) ++p.histogram.counts[p.histogram.bin_of(x)];
      const auto peak = std::max_element(p.histogram.counts.begin(), p.histogram.counts.end());
      p.mode = p.histogram.center(static_cast<std::size_t>(peak - p.histogram.counts.begin()));
    } else {
      p.histogram.counts.assign(1, v.size());
      p.mode = *mn;
    }
    p.spread = interpolated_quantile(v, 0.75) - interpolated_quantile(v, 0.25);
    profiles.push_back(std::move(p));
  }
  return ProfileSet(std::move(profiles), options, std::move(excluded));
}

ClassId classify_point(double value, const ProfileSet& profiles) {
  if (profiles.empty()) throw ContractError("cannot classify against an empty profile set");
  const ClassProfile* best = nullptr;
  double best_dist = 0.0;
  for (const auto& p : profiles.profiles()) {  // ascending class id
    const double d = std::abs(value - p.mode);
    if (best == nullptr || d < best_dist) {
      best = &p;
      best_dist = d;
    }
  }
  return best->cls;
}

Segmentation classify_scan(const Scan& scan, const ProfileSet& profiles,
                           const SegmentationSettings& settings, const AlphaProvider& alpha_of) {
  if (profiles.empty()) throw ContractError("cannot classify against an empty profile set");
  if (scan.sensor() != SensorKind::ouster_raw) {
    // Let calibrate_scan produce the canonical message.
    calibrate_scan(scan, {}, settings.limits, alpha_of);
  }
  Segmentation seg;
  seg.labels.assign(scan.size(), ClassId::void_);
  if (scan.empty()) return seg;

  const SpatialIndex index(scan, settings.normals.radius);
  const auto normals = estimate_normals(scan, index, settings.normals);
  const auto calibrated = calibrate_scan(scan, normals, settings.limits, alpha_of);
  seg.rejected = calibrated.rejected;
  seg.classified = calibrated.points.size();
  for (const auto& cp : calibrated.points) {
    seg.labels[cp.index] = classify_point(cp.calibrated_intensity, profiles);
  }
  if (settings.neighborhood_filter) {
    seg.labels = neighborhood_mode_filter(seg.labels, index, settings.filter_radius);
  }
  return seg;
}

std::vector<ClassId> neighborhood_mode_filter(std::span<const ClassId> predictions,
                                              const SpatialIndex& index, double radius) {
  if (predictions.size() != index.size()) {
    throw ContractError("prediction count does not match indexed point count");
  }
  std::vector<ClassId> out(predictions.begin(), predictions.end());
  std::vector<std::size_t> neighbors;
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    if (predictions[i] == ClassId::void_) continue;
    index.radius_query(index.position(i), radius, neighbors);
    std::array<std::size_t, kClassCount> votes{};
    for (auto j : neighbors) {
      if (predictions[j] != ClassId::void_) ++votes[index_of(predictions[j])];
    }
    const std::size_t own = votes[index_of(predictions[i])];
    std::size_t best = index_of(predictions[i]);
    std::size_t best_votes = own;
    for (std::size_t c = 1; c < kClassCount; ++c) {
      if (votes[c] > best_votes) {
        best = c;
        best_votes = votes[c];
      }
    }
    // A tie between two challengers that both beat the original label keeps
    // the lower id; a tie with the original keeps the original.
    out[i] = class_from_index(best);
  }
  return out;
}

std::string serialize_profiles(const ProfileSet& set, std::string_view comment_header) {
  std::ostringstream out;
  out << "# lidarint profile set\n" << comment_block(comment_header);
  for (const auto& [k, v] : set.settings()) out << "setting " << k << ' ' << v << '\n';
  const auto& o = set.options();
  out << "options min_support " << o.min_support << " bin_fraction "
      << format_double(o.bin_fraction) << " min_bins " << o.min_bins << '\n';
  for (const auto& p : set.profiles()) {
    out << "class " << class_name(p.cls) << " mode " << format_double(p.mode) << " support "
        << p.support << " spread " << format_double(p.spread) << '\n';
    out << "histogram " << format_double(p.histogram.lo) << ' ' << format_double(p.histogram.hi)
        << ' ' << p.histogram.counts.size() << '\n';
    out << "counts";
    for (auto c : p.histogram.counts) out << ' ' << c;
    out << '\n';
  }
  for (const auto& e : set.excluded()) {
    out << "excluded " << class_name(e.cls) << ' ' << e.support << '\n';
  }
  return out.str();
}

ProfileSet parse_profiles(std::string_view text) {
  std::vector<ClassProfile> profiles;
  std::vector<ExcludedClass> excluded;
  std::vector<std::pair<std::string, std::string>> settings;
  ProfileOptions options;
  std::size_t line_no = 0;
  enum class Expect { any, histogram, counts } expect = Expect::any;
  for (auto line : split_lines(text)) {
    ++line_no;
    const std::string where = "profile line " + std::to_string(line_no);
    if (!line.empty() && line.front() == '#') continue;
    const auto tok = split_ws(line);
    if (tok.empty()) continue;
    const auto need = [&](std::size_t n) {
      if (tok.size() != n) throw FormatError(where + ": expected " + std::to_string(n) + " fields");
    };
    const auto cls_of = [&](std::string_view name) {
      const auto c = parse_class_name(name);
      if (!c || *c == ClassId::void_) {
        throw FormatError(where + ": unknown class '" + std::string(name) + "'");
      }
      return *c;
    };
    if (expect == Expect::histogram) {
      if (tok[0] != "histogram") throw FormatError(where + ": expected histogram line");
      need(4);
      auto& h = profiles.back().histogram;
      h.lo = parse_double(tok[1], where);
      h.hi = parse_double(tok[2], where);
      const auto n = parse_int(tok[3], where);
      if (n <= 0 || h.hi < h.lo) throw FormatError(where + ": invalid histogram domain");
      h.counts.assign(static_cast<std::size_t>(n), 0);
      expect = Expect::counts;
    } else if (expect == Expect::counts) {
      auto& h = profiles.back().histogram;
      if (tok[0] != "counts" || tok.size() != h.counts.size() + 1) {
        throw FormatError(where + ": expected " + std::to_string(h.counts.size()) + " counts");
      }
      for (std::size_t i = 0; i < h.counts.size(); ++i) {
        const auto c = parse_int(tok[i + 1], where);
        if (c < 0) throw FormatError(where + ": negative count");
        h.counts[i] = static_cast<std::size_t>(c);
      }
      expect = Expect::any;
    } else if (tok[0] == "setting") {
      if (tok.size() < 2) throw FormatError(where + ": setting needs a key");
      std::string value;
      for (std::size_t i = 2; i < tok.size(); ++i) {
        if (i > 2) value += ' ';
        value += tok[i];
      }
      settings.emplace_back(std::string(tok[1]), value);
    } else if (tok[0] == "options") {
      need(7);
      options.min_support = static_cast<std::size_t>(parse_int(tok[2], where));
      options.bin_fraction = parse_double(tok[4], where);
      options.min_bins = static_cast<std::size_t>(parse_int(tok[6], where));
    } else if (tok[0] == "class") {
      need(8);
      ClassProfile p;
      p.cls = cls_of(tok[1]);
      p.mode = parse_double(tok[3], where);
      p.support = static_cast<std::size_t>(parse_int(tok[5], where));
      p.spread = parse_double(tok[7], where);
      profiles.push_back(std::move(p));
      expect = Expect::histogram;
    } else if (tok[0] == "excluded") {
      need(3);
      excluded.push_back({cls_of(tok[1]), static_cast<std::size_t>(parse_int(tok[2], where))});
    } else {
      throw FormatError(where + ": unexpected '" + std::string(tok[0]) + "'");
    }
  }
  if (expect != Expect::any) throw FormatError("profile file ends inside a class block");
  try {
    ProfileSet set(std::move(profiles), options, std::move(excluded));
    set.set_settings(std::move(settings));
    return set;
  } catch (const ContractError& e) {
    throw FormatError(e.what());
  }
}

void save_profiles(const ProfileSet& set, const std::filesystem::path& path,
                   std::string_view comment_header) {
  write_file_atomic(path, serialize_profiles(set, comment_header));
}

ProfileSet load_profiles(const std::filesystem::path& path) {
  try {
    return parse_profiles(read_file_text(path));
  } catch (const FormatError& e) {
    throw FormatError("'" + path.string() + "': " + e.what());
  }
}

}  // namespace lidarint
