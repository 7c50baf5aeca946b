#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "lidarint/ontology.hpp"
#include "lidarint/scan.hpp"

namespace lidarint::cli {

/// A dataset directory holds scans/<stem>.bin with optional
/// labels/<stem>.label and truth/<stem>.txt beside them.
struct ScanEntry {
  std::string stem;
  std::filesystem::path scan_path;
  std::optional<std::filesystem::path> label_path;
};

/// Entries sorted by stem. Throws IoError when the directory is missing.
std::vector<ScanEntry> list_dataset(const std::filesystem::path& root);

/// Label files (<stem>.label) under root/labels, or root itself when it has
/// no labels/ subdirectory. Sorted by stem.
std::vector<ScanEntry> list_label_files(const std::filesystem::path& root);

struct LoadedScan {
  Scan scan;
  std::size_t unmapped_labels = 0;
};

/// Reads the scan and, when present, its labels through the ontology.
/// With require_labels, a missing label file throws PreconditionError.
LoadedScan load_entry(const ScanEntry& entry, SensorKind sensor, const Ontology& ontology,
                      bool require_labels);

std::string scan_stem(std::size_t i);  // 000000, 000001, ...

}  // namespace lidarint::cli
