#include "lidarint/evaluation.hpp"

#include <algorithm>
#include <cstdio>
#include <sstream>

#include "lidarint/error.hpp"
#include "lidarint/file_util.hpp"

namespace lidarint {

namespace {

std::string_view column_title(ClassId c) {
  switch (c) {
    case ClassId::tree: return "Tree";
    case ClassId::grass: return "Grass";
    case ClassId::puddle: return "Puddle";
    case ClassId::bush: return "Bushes";
    case ClassId::person: return "Person";
    case ClassId::void_: return "Void";
  }
  return "?";
}

std::string percent(const std::optional<double>& v) {
  if (!v) return "-";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", *v * 100.0);
  return buf;
}

}  // namespace

std::size_t ConfusionMatrix::total() const {
  std::size_t t = 0;
  for (const auto& row : counts_) {
    for (auto c : row) t += c;
  }
  return t;
}

void ConfusionMatrix::accumulate(std::span<const ClassId> gt, std::span<const ClassId> pred,
                                 const ScoringOptions& options) {
  if (gt.size() != pred.size()) {
    throw ContractError("ground truth has " + std::to_string(gt.size()) +
                        " labels, prediction has " + std::to_string(pred.size()));
  }
  for (std::size_t i = 0; i < gt.size(); ++i) {
    if (gt[i] == ClassId::void_) {
      ++void_gt_;
      continue;
    }
    if (options.in_gate_only && pred[i] == ClassId::void_) {
      ++skipped_gated_;
      continue;
    }
    ++counts_[index_of(gt[i])][index_of(pred[i])];
    ++scored_;
  }
}

ConfusionMatrix& ConfusionMatrix::operator+=(const ConfusionMatrix& other) {
  for (std::size_t g = 0; g < kClassCount; ++g) {
    for (std::size_t p = 0; p < kClassCount; ++p) counts_[g][p] += other.counts_[g][p];
  }
  scored_ += other.scored_;
  void_gt_ += other.void_gt_;
  skipped_gated_ += other.skipped_gated_;
  return *this;
}

ConfusionMatrix accumulate(ConfusionMatrix cm, std::span<const ClassId> gt,
                           std::span<const ClassId> pred, const ScoringOptions& options) {
  cm.accumulate(gt, pred, options);
  return cm;
}

IouReport iou(const ConfusionMatrix& cm) {
  if (cm.scored() == 0) {
    throw InsufficientDataError("no labeled points were scored; cannot compute IoU");
  }
  IouReport report;
  report.scored = cm.scored();
  report.void_ground_truth = cm.void_ground_truth();
  report.skipped_gated = cm.skipped_gated();
  double sum = 0.0;
  std::size_t present = 0;
  for (std::size_t c = 1; c < kClassCount; ++c) {
    const ClassId cls = class_from_index(c);
    report.gated += cm.at(cls, ClassId::void_);
    std::size_t row = 0, col = 0;
    for (std::size_t k = 0; k < kClassCount; ++k) {
      row += cm.at(cls, class_from_index(k));
      col += cm.at(class_from_index(k), cls);
    }
    if (row == 0) continue;
    const std::size_t tp = cm.at(cls, cls);
    const std::size_t uni = row + col - tp;
    const double value = static_cast<double>(tp) / static_cast<double>(uni);
    report.iou[c] = value;
    sum += value;
    ++present;
  }
  report.mean_iou = sum / static_cast<double>(present);
  return report;
}

std::string format_iou_table(const IouReport& report, std::string_view framework) {
  std::vector<std::string> header{"Framework"};
  std::vector<std::string> row{std::string(framework)};
  for (auto c : kReportColumns) {
    header.emplace_back(column_title(c));
    row.push_back(percent(report.iou[index_of(c)]));
  }
  header.emplace_back("mean");
  row.push_back(percent(report.mean_iou));

  std::vector<std::size_t> width(header.size());
  for (std::size_t i = 0; i < header.size(); ++i) {
    width[i] = std::max(header[i].size(), row[i].size());
  }
  const auto rule = [&] {
    std::string s = "+";
    for (auto w : width) s += std::string(w + 2, '-') + "+";
    return s + "\n";
  };
  const auto line = [&](const std::vector<std::string>& cells) {
    std::string s = "|";
    for (std::size_t i = 0; i < cells.size(); ++i) {
      s += ' ' + std::string(width[i] - cells[i].size(), ' ') + cells[i] + " |";
    }
    return s + "\n";
  };
  return rule() + line(header) + rule() + line(row) + rule();
}

std::string format_iou_key_values(const IouReport& report) {
  std::ostringstream out;
  for (std::size_t c = 1; c < kClassCount; ++c) {
    out << "iou." << class_name(class_from_index(c)) << '='
        << (report.iou[c] ? format_double(*report.iou[c]) : std::string("absent")) << '\n';
  }
  out << "mean_iou=" << format_double(report.mean_iou) << '\n';
  out << "scored_points=" << report.scored << '\n';
  out << "gated_points=" << report.gated << '\n';
  out << "void_ground_truth_points=" << report.void_ground_truth << '\n';
  out << "skipped_gated_points=" << report.skipped_gated << '\n';
  return out.str();
}

}  // namespace lidarint
