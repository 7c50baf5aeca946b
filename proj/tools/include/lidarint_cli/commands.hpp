#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <ostream>

#include "lidarint_cli/config.hpp"

namespace lidarint::cli {

struct SynthArgs {
  std::filesystem::path scene;
  std::filesystem::path out;
};

struct FitAlphaArgs {
  std::filesystem::path input;
  std::filesystem::path model;
  std::optional<std::filesystem::path> report;  // default: <model>.report.txt
};

struct ProfileArgs {
  std::filesystem::path input;
  std::filesystem::path out;
};

struct SegmentArgs {
  std::filesystem::path input;
  std::filesystem::path profiles;
  std::filesystem::path out;
};

struct ConvertArgs {
  std::filesystem::path input;                 // Velodyne dataset
  std::optional<std::filesystem::path> pair;   // Ouster dataset for fitting
  std::optional<std::filesystem::path> curve;  // saved curve instead of fitting
  std::filesystem::path out;
};

struct EvaluateArgs {
  std::filesystem::path gt;
  std::filesystem::path pred;
  std::optional<std::filesystem::path> out;
};

// Each command writes its artifacts and a short summary to `out`. Errors are
// thrown as lidarint::Error; the caller maps them to exit codes.
void cmd_synth(const SynthArgs& args, const PipelineConfig& config, std::size_t jobs,
               std::ostream& out);
void cmd_fit_alpha(const FitAlphaArgs& args, const PipelineConfig& config, std::size_t jobs,
                   std::ostream& out);
void cmd_profile(const ProfileArgs& args, const PipelineConfig& config, std::size_t jobs,
                 std::ostream& out);
void cmd_segment(const SegmentArgs& args, const PipelineConfig& config, std::size_t jobs,
                 std::ostream& out);
void cmd_convert_velodyne(const ConvertArgs& args, const PipelineConfig& config, std::size_t jobs,
                          std::ostream& out);
void cmd_evaluate(const EvaluateArgs& args, const PipelineConfig& config, std::size_t jobs,
                  std::ostream& out);

}  // namespace lidarint::cli
