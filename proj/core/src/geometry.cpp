#include "lidarint/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include <Eigen/Eigenvalues>

#include "lidarint/error.hpp"

namespace lidarint {

namespace {

constexpr double kUnitTolerance = 1e-6;
constexpr std::int64_t kCoordBias = std::int64_t{1} << 20;
constexpr std::uint64_t kCoordMask = (std::uint64_t{1} << 21) - 1;

}  // namespace

UnitVector3::UnitVector3(const Eigen::Vector3d& v) {
  const double n = v.norm();
  if (!std::isfinite(n) || std::abs(n - 1.0) > kUnitTolerance) {
    throw ContractError("expected a unit vector, got norm " + std::to_string(n));
  }
  v_ = v / n;
}

UnitVector3 UnitVector3::normalize(const Eigen::Vector3d& v) {
  const double n = v.norm();
  if (!(n > 0.0) || !std::isfinite(n)) {
    throw ContractError("cannot normalize a zero or non-finite vector");
  }
  return UnitVector3(v / n, Trusted{});
}

SpatialIndex::SpatialIndex(const Scan& scan, double cell_size) : cell_size_(cell_size) {
  if (scan.empty()) {
    throw ContractError("cannot index an empty scan");
  }
  if (!(cell_size > 0.0)) {
    throw ContractError("index cell size must be positive");
  }
  positions_.reserve(scan.size());
  entries_.reserve(scan.size());
  for (std::size_t i = 0; i < scan.size(); ++i) {
    const auto pos = scan[i].position();
    positions_.push_back(pos);
    entries_.push_back(
        {key_of(cell_coord(pos.x()), cell_coord(pos.y()), cell_coord(pos.z())),
         static_cast<std::uint32_t>(i)});
  }
  std::sort(entries_.begin(), entries_.end(), [](const Entry& a, const Entry& b) {
    return a.key != b.key ? a.key < b.key : a.index < b.index;
  });
}

std::int64_t SpatialIndex::cell_coord(double v) const {
  return static_cast<std::int64_t>(std::floor(v / cell_size_));
}

std::uint64_t SpatialIndex::key_of(std::int64_t cx, std::int64_t cy, std::int64_t cz) const {
  const auto pack = [](std::int64_t c) {
    return static_cast<std::uint64_t>(c + kCoordBias) & kCoordMask;
  };
  return (pack(cx) << 42) | (pack(cy) << 21) | pack(cz);
}

std::vector<std::size_t> SpatialIndex::radius_query(const Eigen::Vector3d& center,
                                                    double radius) const {
  std::vector<std::size_t> out;
  radius_query(center, radius, out);
  return out;
}

void SpatialIndex::radius_query(const Eigen::Vector3d& center, double radius,
                                std::vector<std::size_t>& out) const {
  out.clear();
  if (!(radius >= 0.0)) {
    throw ContractError("query radius must be non-negative");
  }
  const double r2 = radius * radius;
  const auto lo = [&](double c) { return cell_coord(c - radius); };
  const auto hi = [&](double c) { return cell_coord(c + radius); };
  const std::int64_t x0 = lo(center.x()), x1 = hi(center.x());
  const std::int64_t y0 = lo(center.y()), y1 = hi(center.y());
  const std::int64_t z0 = lo(center.z()), z1 = hi(center.z());
  const double cells = static_cast<double>(x1 - x0 + 1) * static_cast<double>(y1 - y0 + 1) *
                       static_cast<double>(z1 - z0 + 1);

  if (cells > static_cast<double>(positions_.size())) {
    for (std::size_t i = 0; i < positions_.size(); ++i) {
      if ((positions_[i] - center).squaredNorm() <= r2) out.push_back(i);
    }
    return;
  }

  for (std::int64_t cx = x0; cx <= x1; ++cx) {
    for (std::int64_t cy = y0; cy <= y1; ++cy) {
      for (std::int64_t cz = z0; cz <= z1; ++cz) {
        const std::uint64_t key = key_of(cx, cy, cz);
        auto it = std::lower_bound(entries_.begin(), entries_.end(), key,
                                   [](const Entry& e, std::uint64_t k) { return e.key < k; });
        for (; it != entries_.end() && it->key == key; ++it) {
          if ((positions_[it->index] - center).squaredNorm() <= r2) out.push_back(it->index);
        }
      }
    }
  }
  std::sort(out.begin(), out.end());
}

NormalEstimate estimate_normal(const SpatialIndex& index, const Point& query,
                               const NormalOptions& options) {
  if (!(options.radius > 0.0)) {
    throw ContractError("normal estimation radius must be positive");
  }
  const Eigen::Vector3d q = query.position();

  NormalEstimate est;
  if (q.norm() > 0.0) est.normal = -UnitVector3::normalize(q);

  std::vector<std::size_t> neighbors;
  index.radius_query(q, options.radius, neighbors);
  std::erase_if(neighbors,
                [&](std::size_t i) { return index.position(i).norm() < kSelfReturnRange; });
  est.neighbor_count = neighbors.size();
  if (neighbors.size() < std::max<std::size_t>(options.min_neighbors, 3)) {
    return est;
  }

  Eigen::Vector3d mean = Eigen::Vector3d::Zero();
  for (auto i : neighbors) mean += index.position(i);
  mean /= static_cast<double>(neighbors.size());
  Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
  for (auto i : neighbors) {
    const Eigen::Vector3d d = index.position(i) - mean;
    cov.noalias() += d * d.transpose();
  }
  cov /= static_cast<double>(neighbors.size());

  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> solver(cov);
  if (solver.info() != Eigen::Success) return est;
  const Eigen::Vector3d ev = solver.eigenvalues();  // ascending
  const double largest = ev(2);
  const double middle = ev(1);
  if (!(largest > 0.0) || middle <= 1e-12 * largest) {
    return est;  // all coincident or collinear
  }

  Eigen::Vector3d n = solver.eigenvectors().col(0);
  if (n.dot(q) > 0.0) n = -n;
  est.normal = UnitVector3::normalize(n);
  est.planarity = std::clamp(1.0 - std::max(ev(0), 0.0) / middle, 0.0, 1.0);
  est.trusted = true;
  return est;
}

std::vector<NormalEstimate> estimate_normals(const Scan& scan, const SpatialIndex& index,
                                             const NormalOptions& options) {
  if (index.size() != scan.size()) {
    throw ContractError("spatial index was built from a different scan");
  }
  std::vector<NormalEstimate> out;
  out.reserve(scan.size());
  for (const auto& p : scan.points()) out.push_back(estimate_normal(index, p, options));
  return out;
}

UnitVector3 beam_direction(const Point& p) {
  const Eigen::Vector3d v = p.position();
  if (!(v.norm() > 0.0)) {
    throw ContractError("beam direction undefined for a point at the sensor origin");
  }
  return UnitVector3::normalize(v);
}

double incidence_angle(const UnitVector3& beam, const UnitVector3& normal) {
  const double c = std::min(std::abs(beam.dot(normal)), 1.0);
  return std::acos(c);
}

}  // namespace lidarint
