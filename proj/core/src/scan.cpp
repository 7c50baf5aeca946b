#include "lidarint/scan.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <string>

#include "lidarint/error.hpp"
#include "lidarint/file_util.hpp"
#include "lidarint/ontology.hpp"

namespace lidarint {

namespace {

constexpr std::size_t kScanRecordBytes = 16;
constexpr std::size_t kLabelRecordBytes = 4;

std::uint32_t load_le_u32(const std::byte* p) {
  std::uint32_t v;
  std::memcpy(&v, p, sizeof v);
  if constexpr (std::endian::native == std::endian::big) {
    v = ((v & 0xFFu) << 24) | ((v & 0xFF00u) << 8) | ((v >> 8) & 0xFF00u) | (v >> 24);
  }
  return v;
}

void store_le_u32(std::byte* p, std::uint32_t v) {
  if constexpr (std::endian::native == std::endian::big) {
    v = ((v & 0xFFu) << 24) | ((v & 0xFF00u) << 8) | ((v >> 8) & 0xFF00u) | (v >> 24);
  }
  std::memcpy(p, &v, sizeof v);
}

float load_le_f32(const std::byte* p) { return std::bit_cast<float>(load_le_u32(p)); }

void store_le_f32(std::byte* p, float f) { store_le_u32(p, std::bit_cast<std::uint32_t>(f)); }

void validate_points(std::span<const Point> points) {
  for (std::size_t i = 0; i < points.size(); ++i) {
    const auto& p = points[i];
    if (!std::isfinite(p.x) || !std::isfinite(p.y) || !std::isfinite(p.z) ||
        !std::isfinite(p.intensity)) {
      throw ContractError("point " + std::to_string(i) + " has a non-finite value");
    }
    if (p.intensity < 0.0) {
      throw ContractError("point " + std::to_string(i) + " has negative intensity");
    }
  }
}

}  // namespace

std::string_view to_string(SensorKind sensor) noexcept {
  switch (sensor) {
    case SensorKind::ouster_raw: return "ouster";
    case SensorKind::velodyne_preprocessed: return "velodyne";
  }
  return "unknown";
}

std::optional<SensorKind> parse_sensor_kind(std::string_view name) noexcept {
  if (name == "ouster") return SensorKind::ouster_raw;
  if (name == "velodyne") return SensorKind::velodyne_preprocessed;
  return std::nullopt;
}

std::string_view class_name(ClassId c) noexcept {
  switch (c) {
    case ClassId::void_: return "void";
    case ClassId::grass: return "grass";
    case ClassId::tree: return "tree";
    case ClassId::bush: return "bush";
    case ClassId::puddle: return "puddle";
    case ClassId::person: return "person";
  }
  return "void";
}

std::optional<ClassId> parse_class_name(std::string_view name) noexcept {
  for (std::size_t i = 0; i < kClassCount; ++i) {
    if (class_name(class_from_index(i)) == name) return class_from_index(i);
  }
  return std::nullopt;
}

Scan::Scan(std::vector<Point> points, SensorKind sensor)
    : points_(std::move(points)), sensor_(sensor) {
  validate_points(points_);
}

Scan::Scan(std::vector<Point> points, std::vector<ClassId> labels, SensorKind sensor)
    : points_(std::move(points)), sensor_(sensor) {
  validate_points(points_);
  if (labels.size() != points_.size()) {
    throw ContractError("label count " + std::to_string(labels.size()) +
                        " does not match point count " + std::to_string(points_.size()));
  }
  labels_ = std::move(labels);
}

std::span<const ClassId> Scan::labels() const {
  if (!labels_) return {};
  return *labels_;
}

Scan Scan::with_labels(std::vector<ClassId> labels) const {
  return Scan(points_, std::move(labels), sensor_);
}

Scan Scan::with_sensor(SensorKind sensor) const {
  Scan copy = *this;
  copy.sensor_ = sensor;
  return copy;
}

Scan read_scan(const std::filesystem::path& path, SensorKind sensor) {
  const auto bytes = read_file_bytes(path);
  const std::size_t whole = bytes.size() / kScanRecordBytes * kScanRecordBytes;
  if (whole != bytes.size()) {
    throw FormatError("'" + path.string() + "': truncated record at byte offset " +
                      std::to_string(whole) + " (file length " + std::to_string(bytes.size()) +
                      " is not a multiple of 16)");
  }
  std::vector<Point> points;
  points.reserve(bytes.size() / kScanRecordBytes);
  for (std::size_t off = 0, idx = 0; off < bytes.size(); off += kScanRecordBytes, ++idx) {
    const std::byte* rec = bytes.data() + off;
    const float x = load_le_f32(rec);
    const float y = load_le_f32(rec + 4);
    const float z = load_le_f32(rec + 8);
    const float intensity = load_le_f32(rec + 12);
    if (!std::isfinite(x) || !std::isfinite(y) || !std::isfinite(z) || !std::isfinite(intensity)) {
      throw FormatError("'" + path.string() + "': non-finite value in point " +
                        std::to_string(idx));
    }
    if (intensity < 0.0f) {
      throw FormatError("'" + path.string() + "': negative intensity in point " +
                        std::to_string(idx));
    }
    points.push_back({x, y, z, intensity});
  }
  return Scan(std::move(points), sensor);
}

void write_scan(const Scan& scan, const std::filesystem::path& path) {
  std::vector<std::byte> bytes(scan.size() * kScanRecordBytes);
  std::byte* out = bytes.data();
  for (const auto& p : scan.points()) {
    store_le_f32(out, static_cast<float>(p.x));
    store_le_f32(out + 4, static_cast<float>(p.y));
    store_le_f32(out + 8, static_cast<float>(p.z));
    store_le_f32(out + 12, static_cast<float>(p.intensity));
    out += kScanRecordBytes;
  }
  write_file_atomic(path, bytes);
}

std::vector<std::uint32_t> read_raw_labels(const std::filesystem::path& path) {
  const auto bytes = read_file_bytes(path);
  if (bytes.size() % kLabelRecordBytes != 0) {
    throw FormatError("'" + path.string() + "': truncated label record at byte offset " +
                      std::to_string(bytes.size() / kLabelRecordBytes * kLabelRecordBytes));
  }
  std::vector<std::uint32_t> labels(bytes.size() / kLabelRecordBytes);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    labels[i] = load_le_u32(bytes.data() + i * kLabelRecordBytes);
  }
  return labels;
}

void write_raw_labels(std::span<const std::uint32_t> labels, const std::filesystem::path& path) {
  std::vector<std::byte> bytes(labels.size() * kLabelRecordBytes);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    store_le_u32(bytes.data() + i * kLabelRecordBytes, labels[i]);
  }
  write_file_atomic(path, bytes);
}

LabelReadResult read_labels(const std::filesystem::path& path, const Scan& scan,
                            const Ontology& ontology) {
  const auto raw = read_raw_labels(path);
  if (raw.size() != scan.size()) {
    throw FormatError("'" + path.string() + "': label count " + std::to_string(raw.size()) +
                      " does not match point count " + std::to_string(scan.size()));
  }
  LabelReadResult result;
  std::vector<ClassId> labels(raw.size());
  for (std::size_t i = 0; i < raw.size(); ++i) {
    const auto semantic = static_cast<std::uint16_t>(raw[i] & 0xFFFFu);
    if (!ontology.is_listed(semantic)) ++result.unmapped_count;
    labels[i] = ontology.map(semantic);
  }
  result.scan = scan.with_labels(std::move(labels));
  return result;
}

void write_labels(std::span<const ClassId> labels, const Ontology& ontology,
                  const std::filesystem::path& path) {
  std::array<std::uint32_t, kClassCount> encode{};
  for (std::size_t c = 0; c < kClassCount; ++c) {
    const auto raw = ontology.raw_id_for(class_from_index(c));
    // A class with no raw id can only be written if it never occurs.
    encode[c] = raw ? *raw : 0xFFFFFFFFu;
  }
  std::vector<std::uint32_t> raw(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    raw[i] = encode[index_of(labels[i])];
    if (raw[i] == 0xFFFFFFFFu) {
      throw ContractError("ontology has no raw id for class '" +
                          std::string(class_name(labels[i])) + "'");
    }
  }
  write_raw_labels(raw, path);
}

}  // namespace lidarint
