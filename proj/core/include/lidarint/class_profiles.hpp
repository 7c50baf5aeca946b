#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "lidarint/calibration.hpp"
#include "lidarint/geometry.hpp"
#include "lidarint/scan.hpp"

namespace lidarint {

/// Fixed-width histogram over [lo, hi]. A degenerate sample (all values
/// equal) has lo == hi and a single bin.
struct Histogram {
  double lo = 0.0;
  double hi = 0.0;
  std::vector<std::size_t> counts;

  double bin_width() const;
  double center(std::size_t bin) const;
  std::size_t bin_of(double value) const;
};

struct ClassProfile {
  ClassId cls = ClassId::void_;
  Histogram histogram;
  /// Center of the highest-count bin (lowest bin on ties).
  double mode = 0.0;
  std::size_t support = 0;
  /// Interquartile range of the calibrated values. Recorded, not used for
  /// classification.
  double spread = 0.0;
};

struct ProfileOptions {
  std::size_t min_support = 1000;
  /// Histogram bin width as a fraction of the class's value range.
  double bin_fraction = 0.01;
  std::size_t min_bins = 64;
};

struct ExcludedClass {
  ClassId cls = ClassId::void_;
  std::size_t support = 0;
};

struct LabeledIntensity {
  ClassId cls = ClassId::void_;
  double value = 0.0;
};

/// One profile per class that met min_support, ascending by class id.
class ProfileSet {
 public:
  ProfileSet() = default;
  ProfileSet(std::vector<ClassProfile> profiles, ProfileOptions options,
             std::vector<ExcludedClass> excluded = {});

  const std::vector<ClassProfile>& profiles() const { return profiles_; }
  const ProfileOptions& options() const { return options_; }
  const std::vector<ExcludedClass>& excluded() const { return excluded_; }
  bool empty() const { return profiles_.empty(); }
  const ClassProfile* find(ClassId cls) const;

  /// Free-form `key value` settings recorded for reproducibility (gate,
  /// alpha source, ...). Not interpreted by the classifier.
  const std::vector<std::pair<std::string, std::string>>& settings() const { return settings_; }
  void set_settings(std::vector<std::pair<std::string, std::string>> settings) {
    settings_ = std::move(settings);
  }

 private:
  std::vector<ClassProfile> profiles_;
  ProfileOptions options_;
  std::vector<ExcludedClass> excluded_;
  std::vector<std::pair<std::string, std::string>> settings_;
};

/// Pairs calibrated points with their ground-truth labels from `scan`.
/// Throws ContractError when the scan is unlabeled.
std::vector<LabeledIntensity> labeled_intensities(const CalibrationResult& calibrated,
                                                  const Scan& scan);

/// Builds one histogram and mode per labeled class. Void samples are ignored
/// and classes below min_support are listed as excluded. The result does not
/// depend on input order.
ProfileSet build_profiles(std::span<const LabeledIntensity> samples,
                          const ProfileOptions& options = {});

/// Class whose mode is closest to `value`; ties go to the lower class id.
/// Throws ContractError for an empty profile set.
ClassId classify_point(double value, const ProfileSet& profiles);

struct SegmentationSettings {
  NormalOptions normals;
  CalibrationLimits limits;
  bool neighborhood_filter = false;
  double filter_radius = 0.5;
};

struct Segmentation {
  std::vector<ClassId> labels;  // one per scan point; void where gated out
  RejectionCounts rejected;
  std::size_t classified = 0;
};

/// Normals, calibration and nearest-mode classification for one scan.
/// Propagates calibration errors (e.g. PreconditionError for Velodyne scans).
Segmentation classify_scan(const Scan& scan, const ProfileSet& profiles,
                           const SegmentationSettings& settings = {},
                           const AlphaProvider& alpha_of = analytic_alpha());

/// Replaces each non-void label by the most frequent non-void label within
/// `radius` (the point itself included). Ties keep the original label; void
/// labels stay void and do not vote. Throws ContractError on a size mismatch.
std::vector<ClassId> neighborhood_mode_filter(std::span<const ClassId> predictions,
                                              const SpatialIndex& index, double radius);

std::string serialize_profiles(const ProfileSet& set, std::string_view comment_header = {});
ProfileSet parse_profiles(std::string_view text);
void save_profiles(const ProfileSet& set, const std::filesystem::path& path,
                   std::string_view comment_header = {});
ProfileSet load_profiles(const std::filesystem::path& path);

}  // namespace lidarint
