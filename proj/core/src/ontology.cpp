#include "lidarint/ontology.hpp"

#include <string>

#include "lidarint/error.hpp"
#include "lidarint/file_util.hpp"

namespace lidarint {

Ontology::Ontology() {
  table_.fill(ClassId::void_);
  listed_.fill(false);
}

Ontology Ontology::identity() {
  Ontology o;
  for (std::size_t c = 0; c < kClassCount; ++c) {
    o.table_[c] = class_from_index(c);
    o.listed_[c] = true;
  }
  return o;
}

Ontology Ontology::parse(std::string_view text) {
  Ontology o;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const auto eol = text.find('\n', pos);
    auto line = text.substr(pos, eol == std::string_view::npos ? text.npos : eol - pos);
    pos = eol == std::string_view::npos ? text.size() + 1 : eol + 1;
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) {
      line = line.substr(0, hash);
    }
    const auto tokens = split_ws(line);
    if (tokens.empty()) continue;
    const std::string where = "ontology line " + std::to_string(line_no);
    if (tokens.size() != 2) {
      throw FormatError(where + ": expected '<raw_id> <class_name>'");
    }
    const auto id = parse_int(tokens[0], where);
    if (id < 0 || id > 0xFFFF) {
      throw FormatError(where + ": raw id " + std::to_string(id) + " outside 0..65535");
    }
    const auto cls = parse_class_name(tokens[1]);
    if (!cls) {
      throw FormatError(where + ": unknown class name '" + std::string(tokens[1]) + "'");
    }
    const auto raw = static_cast<std::uint16_t>(id);
    if (o.listed_[raw]) {
      throw FormatError(where + ": duplicate raw id " + std::to_string(id));
    }
    o.table_[raw] = *cls;
    o.listed_[raw] = true;
  }
  return o;
}

Ontology Ontology::load(const std::filesystem::path& path) {
  try {
    return parse(read_file_text(path));
  } catch (const FormatError& e) {
    throw FormatError("'" + path.string() + "': " + e.what());
  }
}

std::optional<std::uint16_t> Ontology::raw_id_for(ClassId c) const {
  for (std::size_t id = 0; id < table_.size(); ++id) {
    if (table_[id] != c) continue;
    if (listed_[id] || c == ClassId::void_) return static_cast<std::uint16_t>(id);
  }
  return std::nullopt;
}

}  // namespace lidarint
