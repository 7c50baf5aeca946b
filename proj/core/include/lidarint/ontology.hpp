#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string_view>

#include "lidarint/scan.hpp"

namespace lidarint {

/// Total map from 16-bit dataset semantic ids to ClassId. Ids not listed in
/// the source file map to void.
class Ontology {
 public:
  /// Every id maps to void.
  Ontology();

  /// Ids 0..5 map to the ClassId with the same numeric value. This is the id
  /// space the synthetic generator writes.
  static Ontology identity();

  /// Parses lines of `<raw_id> <class_name>`; '#' starts a comment.
  /// Throws FormatError naming the line on malformed input, unknown class
  /// names, out-of-range ids or duplicate ids.
  static Ontology parse(std::string_view text);
  static Ontology load(const std::filesystem::path& path);

  ClassId map(std::uint16_t raw_id) const { return table_[raw_id]; }
  bool is_listed(std::uint16_t raw_id) const { return listed_[raw_id]; }

  /// Smallest raw id mapping to `c`, used when writing predicted labels back
  /// into the dataset's id space. For void, unlisted ids count too.
  std::optional<std::uint16_t> raw_id_for(ClassId c) const;

 private:
  std::array<ClassId, 65536> table_{};
  std::array<bool, 65536> listed_{};
};

}  // namespace lidarint
