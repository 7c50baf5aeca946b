#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "lidarint/alpha_regressor.hpp"
#include "lidarint/calibration.hpp"
#include "lidarint/class_profiles.hpp"
#include "lidarint/sensor_transfer.hpp"

namespace lidarint::cli {

inline constexpr std::string_view kEnvPrefix = "LIDARINT_";

/// Every knob of the pipeline. Field names double as config-file keys,
/// command-line flags (--<name>) and environment variables
/// (LIDARINT_<NAME>).
struct PipelineConfig {
  // range gate and calibration
  double r_min = 6.0;
  double r_max = 60.0;
  double alpha_max_deg = 85.0;
  double ball_radius = 0.5;
  std::size_t min_neighbors = 5;
  std::string sensor = "ouster";  // tag of the scans given with --input

  // ground-truth alpha extraction
  double alpha_bin_width = 1.0;
  std::size_t alpha_min_bin_count = 20;
  double robust_percentile = 99.0;

  // incidence angle source for calibration
  std::string alpha_source = "analytic";  // analytic | regressor
  std::string alpha_model;                // model file when alpha_source = regressor

  // regressor training
  std::uint64_t seed = 42;
  int epochs = 200;
  double learning_rate = 1e-3;
  std::size_t batch_size = 32;
  double validation_fraction = 0.1;
  std::string optimizer = "adam";

  // class profiles and segmentation
  std::size_t profile_min_support = 1000;
  double profile_bin_fraction = 0.01;
  std::size_t profile_min_bins = 64;
  bool neighborhood_filter = false;
  double filter_radius = 0.5;

  // sensor transfer
  int transfer_degree = 3;
  std::string transfer_basis = "inverse_power";
  double transfer_bin_width = 1.0;
  std::size_t transfer_min_bin_count = 20;

  // evaluation
  bool in_gate_only = false;

  // label id mapping; empty means the identity ontology
  std::string ontology;

  // synthetic scans
  std::size_t synth_scans = 1;
  std::string synth_mode = "ouster";  // ouster | velodyne
  double emitted_power = 1e4;
  double velodyne_c = 1e-4;
  double near_range_threshold = 6.0;
  double near_range_shape = 0.5;

  /// Throws ContractError naming the offending field.
  void validate() const;

  CalibrationLimits limits() const;
  NormalOptions normal_options() const;
  AlphaBinOptions alpha_bin_options() const;
  TrainConfig train_config() const;
  ProfileOptions profile_options() const;
  SegmentationSettings segmentation_settings() const;
  MaxCurveOptions max_curve_options() const;
  TransferBasis basis() const;
  SensorKind input_sensor() const;
};

struct ConfigField {
  std::string name;
  std::string help;
  std::function<std::string(const PipelineConfig&)> get;
  /// Throws FormatError when the text does not parse.
  std::function<void(PipelineConfig&, std::string_view)> set;
};

const std::vector<ConfigField>& config_fields();
const ConfigField* find_field(std::string_view name);

/// `key = value` or `key value` per line; '#' starts a comment. Unknown keys
/// and bad values throw FormatError naming the line.
void apply_config_text(PipelineConfig& config, std::string_view text, std::string_view origin);
void apply_config_file(PipelineConfig& config, const std::string& path);

/// Reads LIDARINT_<NAME> for every field. `getenv` is injectable for tests.
void apply_environment(PipelineConfig& config,
                       const std::function<const char*(const char*)>& getenv);

/// Applies explicit flag values keyed by field name.
void apply_overrides(PipelineConfig& config, const std::map<std::string, std::string>& values);

/// One `key value` line per field in registry order.
std::string serialize_config(const PipelineConfig& config);

/// Header embedded (as comments) in every text artifact.
std::string artifact_header(std::string_view command, const PipelineConfig& config);

}  // namespace lidarint::cli
