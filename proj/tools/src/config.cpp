#include "lidarint_cli/config.hpp"

#include <algorithm>
#include <cctype>
#include <cstdlib>
#include <sstream>
#include <type_traits>

#include "lidarint/error.hpp"
#include "lidarint/file_util.hpp"

#ifndef LIDARINT_VERSION
#define LIDARINT_VERSION "0.0.0"
#endif

namespace lidarint::cli {

namespace {

std::string lower(std::string_view s) {
  std::string out(s);
  for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

bool parse_bool(std::string_view text, std::string_view ctx) {
  const auto v = lower(text);
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw FormatError(std::string(ctx) + ": expected a boolean, got '" + std::string(text) + "'");
}

template <class T>
ConfigField field(std::string name, std::string help, T PipelineConfig::*member) {
  ConfigField f;
  f.name = name;
  f.help = std::move(help);
  f.get = [member](const PipelineConfig& c) -> std::string {
    const auto& v = c.*member;
    if constexpr (std::is_same_v<T, double>) {
      return format_double(v);
    } else if constexpr (std::is_same_v<T, bool>) {
      return v ? "true" : "false";
    } else if constexpr (std::is_same_v<T, std::string>) {
      return v;
    } else {
      return std::to_string(v);
    }
  };
  f.set = [member, name](PipelineConfig& c, std::string_view text) {
    const std::string ctx = "config '" + name + "'";
    auto& v = c.*member;
    if constexpr (std::is_same_v<T, double>) {
      v = parse_double(text, ctx);
    } else if constexpr (std::is_same_v<T, bool>) {
      v = parse_bool(text, ctx);
    } else if constexpr (std::is_same_v<T, std::string>) {
      v = std::string(text);
    } else {
      const long long n = parse_int(text, ctx);
      if (std::is_unsigned_v<T> && n < 0) throw FormatError(ctx + ": must be non-negative");
      v = static_cast<T>(n);
    }
  };
  return f;
}

std::vector<ConfigField> make_fields() {
  using C = PipelineConfig;
  return {
      field("r_min", "lower edge of the range gate (m)", &C::r_min),
      field("r_max", "upper edge of the range gate (m)", &C::r_max),
      field("alpha_max_deg", "reject incidence angles above this (degrees)", &C::alpha_max_deg),
      field("ball_radius", "neighborhood radius for normals (m)", &C::ball_radius),
      field("min_neighbors", "neighbors needed for a trusted normal", &C::min_neighbors),
      field("sensor", "sensor tag of input scans: ouster | velodyne", &C::sensor),
      field("alpha_bin_width", "range bin width for alpha extraction (m)", &C::alpha_bin_width),
      field("alpha_min_bin_count", "points needed for a usable alpha bin", &C::alpha_min_bin_count),
      field("robust_percentile", "percentile used as robust maximum", &C::robust_percentile),
      field("alpha_source", "incidence angle source: analytic | regressor", &C::alpha_source),
      field("alpha_model", "regressor model file for alpha_source=regressor", &C::alpha_model),
      field("seed", "random seed", &C::seed),
      field("epochs", "training epochs", &C::epochs),
      field("learning_rate", "optimizer step size", &C::learning_rate),
      field("batch_size", "mini-batch size", &C::batch_size),
      field("validation_fraction", "hold-out fraction", &C::validation_fraction),
      field("optimizer", "adam | sgd", &C::optimizer),
      field("profile_min_support", "points needed to keep a class profile",
            &C::profile_min_support),
      field("profile_bin_fraction", "histogram bin width as a fraction of the value span",
            &C::profile_bin_fraction),
      field("profile_min_bins", "minimum histogram bins", &C::profile_min_bins),
      field("neighborhood_filter", "smooth predictions with a neighborhood mode filter",
            &C::neighborhood_filter),
      field("filter_radius", "neighborhood filter radius (m)", &C::filter_radius),
      field("transfer_degree", "transfer polynomial degree", &C::transfer_degree),
      field("transfer_basis", "inverse_power | power", &C::transfer_basis),
      field("transfer_bin_width", "range bin width for max curves (m)", &C::transfer_bin_width),
      field("transfer_min_bin_count", "points needed for a max-curve bin",
            &C::transfer_min_bin_count),
      field("in_gate_only", "skip points predicted void when scoring", &C::in_gate_only),
      field("ontology", "raw label id map file (empty: identity)", &C::ontology),
      field("synth_scans", "scans generated per synth run", &C::synth_scans),
      field("synth_mode", "synthetic sensor: ouster | velodyne", &C::synth_mode),
      field("emitted_power", "synthetic emitted power constant", &C::emitted_power),
      field("velodyne_c", "c in the hidden compensation g(r) = c r^2", &C::velodyne_c),
      field("near_range_threshold", "near-range efficiency threshold (m)",
            &C::near_range_threshold),
      field("near_range_shape", "near-range efficiency decay (1/m)", &C::near_range_shape),
  };
}

void require(bool ok, std::string_view what) {
  if (!ok) throw ContractError("invalid config: " + std::string(what));
}

}  // namespace

void PipelineConfig::validate() const {
  require(r_min > 0.0 && r_min < r_max, "need 0 < r_min < r_max");
  require(alpha_max_deg > 0.0 && alpha_max_deg < 90.0, "alpha_max_deg must lie in (0, 90)");
  require(ball_radius > 0.0, "ball_radius must be positive");
  require(min_neighbors >= 3, "min_neighbors must be at least 3");
  require(parse_sensor_kind(sensor).has_value(), "sensor must be ouster or velodyne");
  require(alpha_bin_width > 0.0, "alpha_bin_width must be positive");
  require(alpha_min_bin_count >= 1, "alpha_min_bin_count must be positive");
  require(robust_percentile > 0.0 && robust_percentile <= 100.0,
          "robust_percentile must lie in (0, 100]");
  require(alpha_source == "analytic" || alpha_source == "regressor",
          "alpha_source must be analytic or regressor");
  require(alpha_source != "regressor" || !alpha_model.empty(),
          "alpha_source=regressor needs alpha_model");
  require(epochs > 0, "epochs must be positive");
  require(learning_rate > 0.0, "learning_rate must be positive");
  require(batch_size > 0, "batch_size must be positive");
  require(validation_fraction > 0.0 && validation_fraction < 1.0,
          "validation_fraction must lie in (0, 1)");
  require(parse_optimizer(optimizer).has_value(), "optimizer must be adam or sgd");
  require(profile_min_support >= 1, "profile_min_support must be positive");
  require(profile_bin_fraction > 0.0 && profile_bin_fraction <= 1.0,
          "profile_bin_fraction must lie in (0, 1]");
  require(profile_min_bins >= 1, "profile_min_bins must be positive");
  require(filter_radius > 0.0, "filter_radius must be positive");
  require(transfer_degree >= 0 && transfer_degree <= 8, "transfer_degree must lie in [0, 8]");
  require(parse_transfer_basis(transfer_basis).has_value(),
          "transfer_basis must be inverse_power or power");
  require(transfer_bin_width > 0.0, "transfer_bin_width must be positive");
  require(transfer_min_bin_count >= 1, "transfer_min_bin_count must be positive");
  require(synth_scans >= 1, "synth_scans must be positive");
  require(synth_mode == "ouster" || synth_mode == "velodyne", "synth_mode must be ouster or velodyne");
  require(emitted_power > 0.0, "emitted_power must be positive");
  require(velodyne_c > 0.0, "velodyne_c must be positive");
  require(near_range_threshold >= 0.0 && near_range_shape >= 0.0,
          "near-range parameters must be non-negative");
}

CalibrationLimits PipelineConfig::limits() const {
  return {RangeGate{r_min, r_max}, deg_to_rad(alpha_max_deg)};
}

NormalOptions PipelineConfig::normal_options() const { return {ball_radius, min_neighbors}; }

AlphaBinOptions PipelineConfig::alpha_bin_options() const {
  return {alpha_bin_width, alpha_min_bin_count, robust_percentile};
}

TrainConfig PipelineConfig::train_config() const {
  TrainConfig t;
  t.learning_rate = learning_rate;
  t.batch_size = batch_size;
  t.epochs = epochs;
  t.seed = seed;
  t.validation_fraction = validation_fraction;
  t.optimizer = *parse_optimizer(optimizer);
  return t;
}

ProfileOptions PipelineConfig::profile_options() const {
  return {profile_min_support, profile_bin_fraction, profile_min_bins};
}

SegmentationSettings PipelineConfig::segmentation_settings() const {
  SegmentationSettings s;
  s.normals = normal_options();
  s.limits = limits();
  s.neighborhood_filter = neighborhood_filter;
  s.filter_radius = filter_radius;
  return s;
}

MaxCurveOptions PipelineConfig::max_curve_options() const {
  return {RangeGate{r_min, r_max}, transfer_bin_width, transfer_min_bin_count, robust_percentile};
}

TransferBasis PipelineConfig::basis() const { return *parse_transfer_basis(transfer_basis); }

SensorKind PipelineConfig::input_sensor() const { return *parse_sensor_kind(sensor); }

const std::vector<ConfigField>& config_fields() {
  static const std::vector<ConfigField> fields = make_fields();
  return fields;
}

const ConfigField* find_field(std::string_view name) {
  for (const auto& f : config_fields()) {
    if (f.name == name) return &f;
  }
  return nullptr;
}

void apply_config_text(PipelineConfig& config, std::string_view text, std::string_view origin) {
  std::size_t line_no = 0;
  for (auto line : split_lines(text)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    std::string key, value;
    if (const auto eq = line.find('='); eq != std::string_view::npos) {
      const auto k = split_ws(line.substr(0, eq));
      const auto v = split_ws(line.substr(eq + 1));
      if (k.size() != 1 || v.size() > 1) {
        throw FormatError(std::string(origin) + " line " + std::to_string(line_no) +
                          ": expected 'key = value'");
      }
      key = k[0];
      if (!v.empty()) value = v[0];
    } else {
      const auto tok = split_ws(line);
      if (tok.empty()) continue;
      if (tok.size() > 2) {
        throw FormatError(std::string(origin) + " line " + std::to_string(line_no) +
                          ": expected 'key value'");
      }
      key = tok[0];
      if (tok.size() == 2) value = tok[1];
    }
    const auto* f = find_field(key);
    if (f == nullptr) {
      throw FormatError(std::string(origin) + " line " + std::to_string(line_no) +
                        ": unknown key '" + key + "'");
    }
    try {
      f->set(config, value);
    } catch (const FormatError& e) {
      throw FormatError(std::string(origin) + " line " + std::to_string(line_no) + ": " + e.what());
    }
  }
}

void apply_config_file(PipelineConfig& config, const std::string& path) {
  apply_config_text(config, read_file_text(path), path);
}

void apply_environment(PipelineConfig& config,
                       const std::function<const char*(const char*)>& getenv) {
  for (const auto& f : config_fields()) {
    std::string var(kEnvPrefix);
    for (char c : f.name) var += static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
    if (const char* v = getenv(var.c_str()); v != nullptr) {
      try {
        f.set(config, v);
      } catch (const FormatError& e) {
        throw FormatError("environment " + var + ": " + e.what());
      }
    }
  }
}

void apply_overrides(PipelineConfig& config, const std::map<std::string, std::string>& values) {
  for (const auto& [name, value] : values) {
    const auto* f = find_field(name);
    if (f == nullptr) throw FormatError("unknown config field '" + name + "'");
    f->set(config, value);
  }
}

std::string serialize_config(const PipelineConfig& config) {
  std::ostringstream out;
  for (const auto& f : config_fields()) {
    out << f.name << ' ' << f.get(config) << '\n';
  }
  return out.str();
}

std::string artifact_header(std::string_view command, const PipelineConfig& config) {
  std::string h = "lidarint " LIDARINT_VERSION " " + std::string(command) + "\n";
  return h + serialize_config(config);
}

}  // namespace lidarint::cli
