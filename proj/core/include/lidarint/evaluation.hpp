#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>

#include "lidarint/scan.hpp"

namespace lidarint {

struct ScoringOptions {
  /// Skip points predicted void (gated out by the pipeline) instead of
  /// counting them as misses. Diagnostic only.
  bool in_gate_only = false;
};

/// counts[gt][pred] over scored points. Rows for void ground truth stay zero:
/// those points are tallied in void_ground_truth instead. A void prediction
/// on a labeled point lands in the void column and is a false negative.
class ConfusionMatrix {
 public:
  std::size_t at(ClassId gt, ClassId pred) const { return counts_[index_of(gt)][index_of(pred)]; }
  std::size_t scored() const { return scored_; }
  std::size_t void_ground_truth() const { return void_gt_; }
  std::size_t skipped_gated() const { return skipped_gated_; }
  std::size_t total() const;

  /// Throws ContractError when gt and pred lengths differ.
  void accumulate(std::span<const ClassId> gt, std::span<const ClassId> pred,
                  const ScoringOptions& options = {});
  ConfusionMatrix& operator+=(const ConfusionMatrix& other);

  friend bool operator==(const ConfusionMatrix&, const ConfusionMatrix&) = default;

 private:
  std::array<std::array<std::size_t, kClassCount>, kClassCount> counts_{};
  std::size_t scored_ = 0;
  std::size_t void_gt_ = 0;
  std::size_t skipped_gated_ = 0;
};

ConfusionMatrix accumulate(ConfusionMatrix cm, std::span<const ClassId> gt,
                           std::span<const ClassId> pred, const ScoringOptions& options = {});

struct IouReport {
  /// TP / (TP + FP + FN) per class; nullopt for classes absent from the
  /// ground truth (excluded from the mean). Index by index_of(ClassId).
  std::array<std::optional<double>, kClassCount> iou{};
  double mean_iou = 0.0;
  std::size_t scored = 0;
  std::size_t gated = 0;  // scored points predicted void
  std::size_t void_ground_truth = 0;
  std::size_t skipped_gated = 0;
};

/// Throws InsufficientDataError when no point was scored.
IouReport iou(const ConfusionMatrix& cm);

/// Column order of the results table: Tree, Grass, Puddle, Bushes, Person.
inline constexpr std::array<ClassId, 5> kReportColumns{ClassId::tree, ClassId::grass,
                                                       ClassId::puddle, ClassId::bush,
                                                       ClassId::person};

/// Aligned table with columns Framework, Tree, Grass, Puddle, Bushes, Person,
/// mean; values in percent with two decimals, "-" for absent classes.
std::string format_iou_table(const IouReport& report, std::string_view framework = "intensity");

/// `key=value` lines (iou.<class>, mean_iou, counts) for scripts.
std::string format_iou_key_values(const IouReport& report);

}  // namespace lidarint
