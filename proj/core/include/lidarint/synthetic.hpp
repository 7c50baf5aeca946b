#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <Eigen/Core>

#include "lidarint/calibration.hpp"
#include "lidarint/geometry.hpp"
#include "lidarint/scan.hpp"

namespace lidarint::synth {

/// Plane through `point` with normal `normal`. A positive `radius` bounds it
/// to a disk around `point`; zero means unbounded.
struct Plane {
  Eigen::Vector3d point = Eigen::Vector3d::Zero();
  UnitVector3 normal{0.0, 0.0, 1.0};
  double radius = 0.0;
};

struct Sphere {
  Eigen::Vector3d center = Eigen::Vector3d::Zero();
  double radius = 1.0;
};

struct SceneSurface {
  std::variant<Plane, Sphere> geometry;
  double reflectivity = 1.0;  // rho > 0
  ClassId cls = ClassId::grass;
  double noise_sigma = 0.0;  // relative, in [0, 0.2]

  /// Throws ContractError when an invariant is violated.
  void validate() const;
};

/// Optical efficiency: 1 at and beyond `threshold`, exp(-shape * (threshold - R))
/// below it.
struct NearRangeModel {
  double threshold = 6.0;
  double shape = 0.5;

  double eta(double range) const;
};

/// Rays on an azimuth x elevation grid, elevation-major order. Azimuths
/// cover [azimuth_min, azimuth_max) and elevations [elevation_min, elevation_max]
/// inclusive (radians).
struct RayGrid {
  std::size_t azimuth_count = 1024;
  std::size_t elevation_count = 64;
  double elevation_min = deg_to_rad(-22.5);
  double elevation_max = deg_to_rad(22.5);
  double azimuth_min = deg_to_rad(-180.0);
  double azimuth_max = deg_to_rad(180.0);

  std::size_t size() const { return azimuth_count * elevation_count; }
  UnitVector3 direction(std::size_t ray) const;
};

/// Hidden range compensation applied by a simulated Velodyne; the true
/// transfer ratio is 1 / g(r).
using RangeCompensation = std::function<double(double)>;

/// g(r) = c * r^2.
RangeCompensation quadratic_compensation(double c);

enum class SimMode { raw_ouster, simulated_velodyne };

struct SensorSimConfig {
  RayGrid rays;
  std::uint64_t seed = 0;
  /// Global emitted-power constant folded into every return.
  double emitted_power = 1e4;
  NearRangeModel near_range;
  SimMode mode = SimMode::raw_ouster;
  /// c in g(r) = c r^2 when mode == simulated_velodyne.
  double velodyne_c = 1e-4;
};

struct PointTruth {
  double reflectivity = 0.0;
  double alpha = 0.0;
  double eta = 1.0;
  ClassId cls = ClassId::void_;
  UnitVector3 normal{0.0, 0.0, 1.0};  // exact, facing the sensor
};

struct SyntheticScan {
  Scan scan;  // labeled with the surface classes
  std::vector<PointTruth> truth;
};

/// Casts every ray against the scene and keeps the nearest hit.
/// intensity = eta(R) * E * rho * cos(alpha) / R^2 * (1 + sigma * z), z a
/// standard normal truncated to [-3, 3] drawn from a per-ray seed.
/// Throws ContractError for an empty or invalid scene.
SyntheticScan generate_scan(std::span<const SceneSurface> scene, const SensorSimConfig& config);

struct VelodyneSimulation {
  Scan scan;                   // tagged velodyne_preprocessed
  std::vector<double> true_q;  // 1 / g(r) per point
};

/// intensity <- clamp(round(raw * g(r)), 0, 255).
VelodyneSimulation simulate_velodyne_channel(const Scan& raw, const RangeCompensation& g);

enum class AlphaDistribution {
  isotropic,  // facet normals uniform on the sensor-facing hemisphere: cos(alpha) uniform
  uniform,    // alpha uniform
};

/// Independent planar facets, one per ray: each sample picks a beam
/// direction, a range and an incidence angle, and places a plane through the
/// hit point with the matching normal. Every range bin therefore sees the
/// full spread of incidence angles, near-normal hits included.
///
/// With patch_side > 1 each facet emits a patch_side x patch_side grid of
/// points (spacing patch_spacing) on its plane, centered on the sampled hit,
/// so neighborhood normal estimation has something to work with. Every grid
/// point gets its own range, incidence angle and noise draw. Occlusion
/// between facets is not modeled.
struct FacetBenchmarkConfig {
  std::size_t count = 10000;
  double r_min = 6.0;
  double r_max = 60.0;
  double alpha_min = 0.0;
  double alpha_max = deg_to_rad(70.0);
  AlphaDistribution distribution = AlphaDistribution::isotropic;
  double reflectivity = 100.0;
  ClassId cls = ClassId::grass;
  double noise_sigma = 0.0;
  double emitted_power = 1e4;
  NearRangeModel near_range;
  std::size_t patch_side = 1;
  double patch_spacing = 0.1;
  std::uint64_t seed = 0;

  /// Throws ContractError when a field is out of range.
  void validate() const;
};

SyntheticScan generate_facet_benchmark(const FacetBenchmarkConfig& config);

/// Exact normals from the ground truth, each tilted by exactly `tilt` radians
/// about a random axis (seeded). tilt = 0 reproduces the exact normals.
std::vector<NormalEstimate> truth_normals(std::span<const PointTruth> truth, double tilt = 0.0,
                                          std::uint64_t seed = 0);

/// Ground-truth sidecar: one line `<idx> <rho> <alpha> <eta> <class>` per point.
std::string serialize_truth(std::span<const PointTruth> truth, std::string_view comment_header = {});
void write_truth(std::span<const PointTruth> truth, const std::filesystem::path& path,
                 std::string_view comment_header = {});

struct TruthRecord {
  std::size_t index = 0;
  double reflectivity = 0.0;
  double alpha = 0.0;
  double eta = 1.0;
  ClassId cls = ClassId::void_;
};
std::vector<TruthRecord> parse_truth(std::string_view text);

/// Declarative scene file:
///   rays <azimuth_count> <elevation_count> <elev_min_deg> <elev_max_deg> [<az_min_deg> <az_max_deg>]
///   plane <class> <rho> <sigma> <px> <py> <pz> <nx> <ny> <nz> [<radius>]
///   sphere <class> <rho> <sigma> <cx> <cy> <cz> <radius>
///   facets <class> <rho> <sigma> <count> <r_min> <r_max> <alpha_max_deg> [<patch_side> <patch_spacing>]
/// '#' starts a comment. Facet sets default to 3 x 3 patches at 0.1 m.
/// Throws FormatError naming the line number.
struct SceneSpec {
  std::vector<SceneSurface> surfaces;
  std::vector<FacetBenchmarkConfig> facets;
  RayGrid rays;
};
SceneSpec parse_scene_spec(std::string_view text);

/// Ray-cast surfaces followed by every facet set, in file order. Facet set j
/// draws from a seed derived from (config.seed, j) and uses the config's
/// emitted power and near-range model. The Velodyne channel, when selected,
/// is applied to the merged scan.
SyntheticScan generate_scene(const SceneSpec& spec, const SensorSimConfig& config);

}  // namespace lidarint::synth
