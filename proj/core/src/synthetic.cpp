#include "lidarint/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <sstream>

#include <Eigen/Geometry>

#include "lidarint/error.hpp"
#include "lidarint/file_util.hpp"

namespace lidarint::synth {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

std::mt19937_64 stream_rng(std::uint64_t seed, std::uint64_t stream) {
  return std::mt19937_64(splitmix64(seed ^ splitmix64(stream + 1)));
}

double truncated_normal(std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  return std::clamp(n(rng), -3.0, 3.0);
}

// Unit vector perpendicular to v at a random azimuth around it.
Eigen::Vector3d random_perpendicular(const Eigen::Vector3d& v, std::mt19937_64& rng) {
  const Eigen::Vector3d helper =
      std::abs(v.x()) < 0.9 ? Eigen::Vector3d::UnitX() : Eigen::Vector3d::UnitY();
  const Eigen::Vector3d e1 = helper.cross(v).normalized();
  const Eigen::Vector3d e2 = v.cross(e1);
  std::uniform_real_distribution<double> phi(0.0, 2.0 * std::numbers::pi);
  const double a = phi(rng);
  return std::cos(a) * e1 + std::sin(a) * e2;
}

struct Hit {
  double t = std::numeric_limits<double>::infinity();
  Eigen::Vector3d normal = Eigen::Vector3d::UnitZ();
};

bool intersect(const Plane& plane, const Eigen::Vector3d& d, Hit& hit) {
  const Eigen::Vector3d& n = plane.normal.vec();
  const double denom = n.dot(d);
  if (std::abs(denom) < 1e-12) return false;
  const double t = n.dot(plane.point) / denom;
  if (!(t > 0.0)) return false;
  if (plane.radius > 0.0 && (t * d - plane.point).norm() > plane.radius) return false;
  hit.t = t;
  hit.normal = n;
  return true;
}

bool intersect(const Sphere& sphere, const Eigen::Vector3d& d, Hit& hit) {
  const double b = d.dot(sphere.center);
  const double c = sphere.center.squaredNorm() - sphere.radius * sphere.radius;
  const double disc = b * b - c;
  if (disc < 0.0) return false;
  const double root = std::sqrt(disc);
  double t = b - root;
  if (!(t > 0.0)) t = b + root;  // sensor inside the sphere
  if (!(t > 0.0)) return false;
  hit.t = t;
  hit.normal = (t * d - sphere.center) / sphere.radius;
  return true;
}

}  // namespace

void SceneSurface::validate() const {
  if (!(reflectivity > 0.0) || !std::isfinite(reflectivity)) {
    throw ContractError("surface reflectivity must be positive");
  }
  if (!(noise_sigma >= 0.0 && noise_sigma <= 0.2)) {
    throw ContractError("surface noise sigma must lie in [0, 0.2]");
  }
  if (const auto* s = std::get_if<Sphere>(&geometry); s && !(s->radius > 0.0)) {
    throw ContractError("sphere radius must be positive");
  }
  if (const auto* p = std::get_if<Plane>(&geometry); p && !(p->radius >= 0.0)) {
    throw ContractError("plane radius must be non-negative");
  }
}

double NearRangeModel::eta(double range) const {
  if (range >= threshold) return 1.0;
  return std::exp(-shape * (threshold - range));
}

UnitVector3 RayGrid::direction(std::size_t ray) const {
  const std::size_t e = ray / azimuth_count;
  const std::size_t a = ray % azimuth_count;
  const double elev =
      elevation_count > 1
          ? elevation_min + (elevation_max - elevation_min) * static_cast<double>(e) /
                                static_cast<double>(elevation_count - 1)
          : 0.5 * (elevation_min + elevation_max);
  const double az = azimuth_min + (azimuth_max - azimuth_min) * static_cast<double>(a) /
                                      static_cast<double>(azimuth_count);
  return UnitVector3::normalize(
      {std::cos(elev) * std::cos(az), std::cos(elev) * std::sin(az), std::sin(elev)});
}

RangeCompensation quadratic_compensation(double c) {
  return [c](double r) { return c * r * r; };
}

SyntheticScan generate_scan(std::span<const SceneSurface> scene, const SensorSimConfig& config) {
  if (scene.empty()) throw ContractError("scene has no surfaces");
  for (const auto& s : scene) s.validate();
  if (config.rays.azimuth_count == 0 || config.rays.elevation_count == 0) {
    throw ContractError("ray grid is empty");
  }

  std::vector<Point> points;
  std::vector<ClassId> labels;
  SyntheticScan out;
  for (std::size_t ray = 0; ray < config.rays.size(); ++ray) {
    const UnitVector3 dir = config.rays.direction(ray);
    const Eigen::Vector3d& d = dir.vec();
    Hit best;
    const SceneSurface* hit_surface = nullptr;
    for (const auto& surface : scene) {
      Hit h;
      const bool ok = std::visit([&](const auto& g) { return intersect(g, d, h); }, surface.geometry);
      if (ok && h.t < best.t) {
        best = h;
        hit_surface = &surface;
      }
    }
    if (hit_surface == nullptr) continue;

    Eigen::Vector3d n = best.normal;
    if (n.dot(d) > 0.0) n = -n;
    const UnitVector3 normal = UnitVector3::normalize(n);
    const double range = best.t;
    const double alpha = incidence_angle(dir, normal);
    const double eta = config.near_range.eta(range);
    double intensity = eta * config.emitted_power * hit_surface->reflectivity * std::cos(alpha) /
                       (range * range);
    if (hit_surface->noise_sigma > 0.0) {
      auto rng = stream_rng(config.seed, ray);
      intensity *= 1.0 + hit_surface->noise_sigma * truncated_normal(rng);
    }
    const Eigen::Vector3d pos = range * d;
    points.push_back({pos.x(), pos.y(), pos.z(), std::max(intensity, 0.0)});
    labels.push_back(hit_surface->cls);
    out.truth.push_back({hit_surface->reflectivity, alpha, eta, hit_surface->cls, normal});
  }
  out.scan = Scan(std::move(points), std::move(labels), SensorKind::ouster_raw);
  if (config.mode == SimMode::simulated_velodyne) {
    auto velo = simulate_velodyne_channel(out.scan, quadratic_compensation(config.velodyne_c));
    out.scan = std::move(velo.scan);
  }
  return out;
}

VelodyneSimulation simulate_velodyne_channel(const Scan& raw, const RangeCompensation& g) {
  std::vector<Point> points(raw.points().begin(), raw.points().end());
  VelodyneSimulation sim;
  sim.true_q.reserve(points.size());
  for (auto& p : points) {
    const double gain = g(p.range());
    p.intensity = std::clamp(std::round(p.intensity * gain), 0.0, 255.0);
    sim.true_q.push_back(1.0 / gain);
  }
  std::vector<ClassId> labels(raw.labels().begin(), raw.labels().end());
  sim.scan = raw.has_labels()
                 ? Scan(std::move(points), std::move(labels), SensorKind::velodyne_preprocessed)
                 : Scan(std::move(points), SensorKind::velodyne_preprocessed);
  return sim;
}

void FacetBenchmarkConfig::validate() const {
  if (!(r_min > 0.0 && r_min <= r_max)) throw ContractError("facet ranges need 0 < r_min <= r_max");
  if (!(alpha_min >= 0.0 && alpha_min <= alpha_max && alpha_max < std::numbers::pi / 2)) {
    throw ContractError("facet incidence angles need 0 <= alpha_min <= alpha_max < 90 deg");
  }
  if (!(reflectivity > 0.0)) throw ContractError("reflectivity must be positive");
  if (!(noise_sigma >= 0.0 && noise_sigma <= 0.2)) {
    throw ContractError("noise sigma must lie in [0, 0.2]");
  }
  if (!(emitted_power > 0.0)) throw ContractError("emitted power must be positive");
  if (patch_side == 0 || !(patch_spacing > 0.0)) {
    throw ContractError("facet patches need a positive side and spacing");
  }
}

SyntheticScan generate_facet_benchmark(const FacetBenchmarkConfig& config) {
  config.validate();
  std::mt19937_64 rng(splitmix64(config.seed));
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const std::size_t per_facet = config.patch_side * config.patch_side;
  std::vector<Point> points;
  std::vector<ClassId> labels;
  SyntheticScan out;
  points.reserve(config.count * per_facet);
  labels.reserve(config.count * per_facet);
  out.truth.reserve(config.count * per_facet);
  const double cos_lo = std::cos(config.alpha_max);
  const double cos_hi = std::cos(config.alpha_min);
  const double half = 0.5 * static_cast<double>(config.patch_side - 1);

  for (std::size_t i = 0; i < config.count; ++i) {
    // Beam direction uniform on the sphere.
    const double z = 2.0 * unit(rng) - 1.0;
    const double az = 2.0 * std::numbers::pi * unit(rng);
    const double s = std::sqrt(std::max(0.0, 1.0 - z * z));
    const Eigen::Vector3d l(s * std::cos(az), s * std::sin(az), z);
    const double range = config.r_min + (config.r_max - config.r_min) * unit(rng);
    const double alpha = config.distribution == AlphaDistribution::isotropic
                             ? std::acos(cos_lo + (cos_hi - cos_lo) * unit(rng))
                             : config.alpha_min + (config.alpha_max - config.alpha_min) * unit(rng);
    const Eigen::Vector3d axis = random_perpendicular(l, rng);
    const Eigen::Vector3d n = Eigen::AngleAxisd(alpha, axis) * (-l);
    const auto normal = UnitVector3::normalize(n);
    const Eigen::Vector3d center = range * l;
    const Eigen::Vector3d u = n.unitOrthogonal();
    const Eigen::Vector3d v = n.cross(u);

    for (std::size_t a = 0; a < config.patch_side; ++a) {
      for (std::size_t b = 0; b < config.patch_side; ++b) {
        const double noise = config.noise_sigma > 0.0 ? truncated_normal(rng) : 0.0;
        Eigen::Vector3d pos = center;
        double r = range;
        double cos_a = std::cos(alpha);
        double alpha_p = alpha;
        if (per_facet > 1) {
          pos += config.patch_spacing * ((static_cast<double>(a) - half) * u +
                                         (static_cast<double>(b) - half) * v);
          r = pos.norm();
          cos_a = std::min(1.0, std::abs(n.dot(pos) / r));
          alpha_p = std::acos(cos_a);
        }
        const double eta = config.near_range.eta(r);
        const double intensity = eta * config.emitted_power * config.reflectivity * cos_a /
                                 (r * r) * (1.0 + config.noise_sigma * noise);
        points.push_back({pos.x(), pos.y(), pos.z(), intensity});
        labels.push_back(config.cls);
        out.truth.push_back({config.reflectivity, alpha_p, eta, config.cls, normal});
      }
    }
  }
  out.scan = Scan(std::move(points), std::move(labels), SensorKind::ouster_raw);
  return out;
}

SyntheticScan generate_scene(const SceneSpec& spec, const SensorSimConfig& config) {
  if (spec.surfaces.empty() && spec.facets.empty()) {
    throw ContractError("scene has neither surfaces nor facet sets");
  }
  SensorSimConfig raw_config = config;
  raw_config.rays = spec.rays;
  raw_config.mode = SimMode::raw_ouster;

  std::vector<Point> points;
  std::vector<ClassId> labels;
  SyntheticScan out;
  const auto append = [&](const SyntheticScan& part) {
    points.insert(points.end(), part.scan.points().begin(), part.scan.points().end());
    labels.insert(labels.end(), part.scan.labels().begin(), part.scan.labels().end());
    out.truth.insert(out.truth.end(), part.truth.begin(), part.truth.end());
  };
  if (!spec.surfaces.empty()) append(generate_scan(spec.surfaces, raw_config));
  for (std::size_t j = 0; j < spec.facets.size(); ++j) {
    FacetBenchmarkConfig fc = spec.facets[j];
    fc.seed = splitmix64(config.seed ^ splitmix64(0xFACE7000ull + j));
    fc.emitted_power = config.emitted_power;
    fc.near_range = config.near_range;
    append(generate_facet_benchmark(fc));
  }
  out.scan = Scan(std::move(points), std::move(labels), SensorKind::ouster_raw);
  if (config.mode == SimMode::simulated_velodyne) {
    auto velo = simulate_velodyne_channel(out.scan, quadratic_compensation(config.velodyne_c));
    out.scan = std::move(velo.scan);
  }
  return out;
}

std::vector<NormalEstimate> truth_normals(std::span<const PointTruth> truth, double tilt,
                                          std::uint64_t seed) {
  std::vector<NormalEstimate> out;
  out.reserve(truth.size());
  for (std::size_t i = 0; i < truth.size(); ++i) {
    NormalEstimate est;
    est.normal = truth[i].normal;
    if (tilt != 0.0) {
      auto rng = stream_rng(seed, i);
      const Eigen::Vector3d axis = random_perpendicular(truth[i].normal.vec(), rng);
      est.normal = UnitVector3::normalize(Eigen::AngleAxisd(tilt, axis) * truth[i].normal.vec());
    }
    est.neighbor_count = std::numeric_limits<std::size_t>::max();
    est.planarity = 1.0;
    est.trusted = true;
    out.push_back(est);
  }
  return out;
}

std::string serialize_truth(std::span<const PointTruth> truth, std::string_view comment_header) {
  std::ostringstream out;
  out << "# lidarint ground truth\n" << comment_block(comment_header);
  out << "# idx rho alpha eta class\n";
  for (std::size_t i = 0; i < truth.size(); ++i) {
    const auto& t = truth[i];
    out << i << ' ' << format_double(t.reflectivity) << ' ' << format_double(t.alpha) << ' '
        << format_double(t.eta) << ' ' << class_name(t.cls) << '\n';
  }
  return out.str();
}

void write_truth(std::span<const PointTruth> truth, const std::filesystem::path& path,
                 std::string_view comment_header) {
  write_file_atomic(path, serialize_truth(truth, comment_header));
}

std::vector<TruthRecord> parse_truth(std::string_view text) {
  std::vector<TruthRecord> out;
  std::size_t line_no = 0;
  for (auto line : split_lines(text)) {
    ++line_no;
    if (!line.empty() && line.front() == '#') continue;
    const auto tok = split_ws(line);
    if (tok.empty()) continue;
    const std::string where = "truth line " + std::to_string(line_no);
    if (tok.size() != 5) throw FormatError(where + ": expected 5 fields");
    const auto cls = parse_class_name(tok[4]);
    if (!cls) throw FormatError(where + ": unknown class '" + std::string(tok[4]) + "'");
    out.push_back({static_cast<std::size_t>(parse_int(tok[0], where)), parse_double(tok[1], where),
                   parse_double(tok[2], where), parse_double(tok[3], where), *cls});
  }
  return out;
}

SceneSpec parse_scene_spec(std::string_view text) {
  SceneSpec spec;
  std::size_t line_no = 0;
  for (auto raw_line : split_lines(text)) {
    ++line_no;
    auto line = raw_line;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    const auto tok = split_ws(line);
    if (tok.empty()) continue;
    const std::string where = "scene line " + std::to_string(line_no);
    const auto num = [&](std::size_t i) { return parse_double(tok[i], where); };
    const auto cls_at = [&](std::size_t i) {
      const auto c = parse_class_name(tok[i]);
      if (!c) throw FormatError(where + ": unknown class '" + std::string(tok[i]) + "'");
      return *c;
    };
    try {
      if (tok[0] == "rays") {
        if (tok.size() != 5 && tok.size() != 7) {
          throw FormatError(where + ": rays needs 4 or 6 values");
        }
        const auto az = parse_int(tok[1], where);
        const auto el = parse_int(tok[2], where);
        if (az <= 0 || el <= 0) throw FormatError(where + ": ray counts must be positive");
        spec.rays.azimuth_count = static_cast<std::size_t>(az);
        spec.rays.elevation_count = static_cast<std::size_t>(el);
        spec.rays.elevation_min = deg_to_rad(num(3));
        spec.rays.elevation_max = deg_to_rad(num(4));
        if (tok.size() == 7) {
          spec.rays.azimuth_min = deg_to_rad(num(5));
          spec.rays.azimuth_max = deg_to_rad(num(6));
        }
      } else if (tok[0] == "plane") {
        if (tok.size() != 10 && tok.size() != 11) {
          throw FormatError(where + ": plane needs class rho sigma px py pz nx ny nz [radius]");
        }
        Plane p;
        p.point = {num(4), num(5), num(6)};
        p.normal = UnitVector3::normalize({num(7), num(8), num(9)});
        if (tok.size() == 11) p.radius = num(10);
        SceneSurface s{p, num(2), cls_at(1), num(3)};
        s.validate();
        spec.surfaces.push_back(s);
      } else if (tok[0] == "sphere") {
        if (tok.size() != 8) {
          throw FormatError(where + ": sphere needs class rho sigma cx cy cz radius");
        }
        SceneSurface s{Sphere{{num(4), num(5), num(6)}, num(7)}, num(2), cls_at(1), num(3)};
        s.validate();
        spec.surfaces.push_back(s);
      } else if (tok[0] == "facets") {
        if (tok.size() != 8 && tok.size() != 10) {
          throw FormatError(where +
                            ": facets needs class rho sigma count r_min r_max alpha_max_deg "
                            "[patch_side patch_spacing]");
        }
        FacetBenchmarkConfig fc;
        fc.cls = cls_at(1);
        fc.reflectivity = num(2);
        fc.noise_sigma = num(3);
        const auto count = parse_int(tok[4], where);
        if (count <= 0) throw FormatError(where + ": facet count must be positive");
        fc.count = static_cast<std::size_t>(count);
        fc.r_min = num(5);
        fc.r_max = num(6);
        fc.alpha_max = deg_to_rad(num(7));
        fc.patch_side = 3;
        if (tok.size() == 10) {
          const auto side = parse_int(tok[8], where);
          if (side <= 0) throw FormatError(where + ": patch side must be positive");
          fc.patch_side = static_cast<std::size_t>(side);
          fc.patch_spacing = num(9);
        }
        fc.validate();
        spec.facets.push_back(fc);
      } else {
        throw FormatError(where + ": unknown directive '" + std::string(tok[0]) + "'");
      }
    } catch (const ContractError& e) {
      throw FormatError(where + ": " + e.what());
    }
  }
  if (spec.surfaces.empty() && spec.facets.empty()) {
    throw FormatError("scene defines no surfaces or facet sets");
  }
  return spec;
}

}  // namespace lidarint::synth
