#include "lidarint_cli/dataset.hpp"

#include <algorithm>
#include <cstdio>
#include <initializer_list>

#include "lidarint/error.hpp"

namespace lidarint::cli {

namespace fs = std::filesystem;

namespace {

std::vector<fs::path> files_with_extension(const fs::path& dir, std::string_view ext) {
  std::vector<fs::path> out;
  std::error_code ec;
  for (fs::directory_iterator it(dir, ec), end; !ec && it != end; it.increment(ec)) {
    if (it->is_regular_file() && it->path().extension() == ext) out.push_back(it->path());
  }
  if (ec) throw IoError("cannot list '" + dir.string() + "': " + ec.message());
  std::sort(out.begin(), out.end());
  return out;
}

// First existing subdirectory, else the root itself. The second names are the
// RELLIS-3D Ouster folders.
fs::path first_dir(const fs::path& root, std::initializer_list<const char*> names) {
  for (const char* n : names) {
    if (fs::is_directory(root / n)) return root / n;
  }
  return root;
}

fs::path scan_dir(const fs::path& root) {
  return first_dir(root, {"scans", "os1_cloud_node_kitti_bin"});
}

fs::path label_dir(const fs::path& root) {
  return first_dir(root, {"labels", "os1_cloud_node_semantickitti_label_id"});
}

}  // namespace

std::vector<ScanEntry> list_dataset(const fs::path& root) {
  if (!fs::is_directory(root)) throw IoError("dataset directory '" + root.string() + "' not found");
  const fs::path labels = label_dir(root);
  std::vector<ScanEntry> out;
  for (const auto& p : files_with_extension(scan_dir(root), ".bin")) {
    ScanEntry e;
    e.stem = p.stem().string();
    e.scan_path = p;
    const fs::path label = labels / (e.stem + ".label");
    if (fs::is_regular_file(label)) e.label_path = label;
    out.push_back(std::move(e));
  }
  return out;
}

std::vector<ScanEntry> list_label_files(const fs::path& root) {
  if (!fs::is_directory(root)) throw IoError("label directory '" + root.string() + "' not found");
  std::vector<ScanEntry> out;
  for (const auto& p : files_with_extension(label_dir(root), ".label")) {
    ScanEntry e;
    e.stem = p.stem().string();
    e.label_path = p;
    out.push_back(std::move(e));
  }
  return out;
}

LoadedScan load_entry(const ScanEntry& entry, SensorKind sensor, const Ontology& ontology,
                      bool require_labels) {
  LoadedScan out;
  out.scan = read_scan(entry.scan_path, sensor);
  if (entry.label_path) {
    auto r = read_labels(*entry.label_path, out.scan, ontology);
    out.scan = std::move(r.scan);
    out.unmapped_labels = r.unmapped_count;
  } else if (require_labels) {
    throw PreconditionError("scan '" + entry.scan_path.string() + "' has no label file");
  }
  return out;
}

std::string scan_stem(std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%06zu", i);
  return buf;
}

}  // namespace lidarint::cli
