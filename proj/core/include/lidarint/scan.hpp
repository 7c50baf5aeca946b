#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include <Eigen/Core>

namespace lidarint {

class Ontology;

/// Returns closer than this to the sensor origin are treated as hits on the
/// sensor housing and excluded from every downstream statistic.
inline constexpr double kSelfReturnRange = 0.5;

/// One LiDAR return in the sensor frame (meters). Intensity is the raw
/// backscatter value: Ouster raw counts or Velodyne 0-255.
struct Point {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;
  double intensity = 0.0;

  Eigen::Vector3d position() const { return {x, y, z}; }
  double range() const { return position().norm(); }

  friend bool operator==(const Point&, const Point&) = default;
};

inline bool is_self_return(const Point& p) { return p.range() < kSelfReturnRange; }

enum class SensorKind : std::uint8_t {
  ouster_raw,
  velodyne_preprocessed,
};

std::string_view to_string(SensorKind sensor) noexcept;
std::optional<SensorKind> parse_sensor_kind(std::string_view name) noexcept;

/// The six classes the pipeline reasons about. Numeric order is the
/// deterministic tie-break order used by classification.
enum class ClassId : std::uint16_t {
  void_ = 0,
  grass = 1,
  tree = 2,
  bush = 3,
  puddle = 4,
  person = 5,
};

inline constexpr std::size_t kClassCount = 6;

inline constexpr std::size_t index_of(ClassId c) { return static_cast<std::size_t>(c); }
inline constexpr ClassId class_from_index(std::size_t i) { return static_cast<ClassId>(i); }

std::string_view class_name(ClassId c) noexcept;
std::optional<ClassId> parse_class_name(std::string_view name) noexcept;

/// One sweep. Immutable after construction; safe to share across threads.
class Scan {
 public:
  Scan() = default;
  Scan(std::vector<Point> points, SensorKind sensor);
  /// Throws ContractError unless labels.size() == points.size().
  Scan(std::vector<Point> points, std::vector<ClassId> labels, SensorKind sensor);

  std::span<const Point> points() const { return points_; }
  const Point& operator[](std::size_t i) const { return points_[i]; }
  std::size_t size() const { return points_.size(); }
  bool empty() const { return points_.empty(); }

  bool has_labels() const { return labels_.has_value(); }
  /// Empty span when the scan is unlabeled.
  std::span<const ClassId> labels() const;

  SensorKind sensor() const { return sensor_; }

  Scan with_labels(std::vector<ClassId> labels) const;
  Scan with_sensor(SensorKind sensor) const;

  friend bool operator==(const Scan&, const Scan&) = default;

 private:
  std::vector<Point> points_;
  std::optional<std::vector<ClassId>> labels_;
  SensorKind sensor_ = SensorKind::ouster_raw;
};

/// Reads the KITTI-style binary format: consecutive 16-byte records of four
/// little-endian float32 values (x, y, z, intensity).
/// Throws FormatError for a truncated record (naming its byte offset), a
/// non-finite value or a negative intensity (naming the point index).
Scan read_scan(const std::filesystem::path& path, SensorKind sensor);

/// Writes the same format atomically. Values are narrowed to float32, so
/// read_scan(write_scan(s)) == s whenever s holds float-representable values.
void write_scan(const Scan& scan, const std::filesystem::path& path);

/// Raw 32-bit little-endian label records, one per point.
std::vector<std::uint32_t> read_raw_labels(const std::filesystem::path& path);
void write_raw_labels(std::span<const std::uint32_t> labels, const std::filesystem::path& path);

struct LabelReadResult {
  Scan scan;
  /// Points whose 16-bit semantic id is absent from the ontology file; they
  /// were mapped to void.
  std::size_t unmapped_count = 0;
};

/// Attaches labels from `path` to `scan`. The low 16 bits of each record are
/// the semantic id; the high 16 bits (instance id) are ignored.
/// Throws FormatError when the label count differs from the point count.
LabelReadResult read_labels(const std::filesystem::path& path, const Scan& scan,
                            const Ontology& ontology);

/// Writes class labels using the ontology's canonical raw id for each class.
void write_labels(std::span<const ClassId> labels, const Ontology& ontology,
                  const std::filesystem::path& path);

}  // namespace lidarint
