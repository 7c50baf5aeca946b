#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "lidarint/scan.hpp"

namespace lidarint {

/// A direction in the sensor frame. Construction rejects inputs whose norm is
/// off by more than 1e-6 and then renormalizes, so the stored norm is 1 to
/// rounding.
class UnitVector3 {
 public:
  /// Throws ContractError when |v| deviates from 1 by more than 1e-6.
  explicit UnitVector3(const Eigen::Vector3d& v);
  UnitVector3(double x, double y, double z) : UnitVector3(Eigen::Vector3d(x, y, z)) {}

  /// Normalizes any non-zero vector. Throws ContractError on a zero vector.
  static UnitVector3 normalize(const Eigen::Vector3d& v);

  const Eigen::Vector3d& vec() const { return v_; }
  double x() const { return v_.x(); }
  double y() const { return v_.y(); }
  double z() const { return v_.z(); }
  double dot(const UnitVector3& o) const { return v_.dot(o.v_); }
  UnitVector3 operator-() const { return UnitVector3(-v_, Trusted{}); }

 private:
  struct Trusted {};
  UnitVector3(const Eigen::Vector3d& v, Trusted) : v_(v) {}
  Eigen::Vector3d v_;
};

/// Uniform-grid index over a scan's point positions for exact ball queries.
/// Immutable after construction; concurrent queries are safe.
class SpatialIndex {
 public:
  /// Throws ContractError for an empty scan or a non-positive cell size.
  explicit SpatialIndex(const Scan& scan, double cell_size = 0.5);

  /// Indices of every point p with |p - center| <= radius, ascending.
  std::vector<std::size_t> radius_query(const Eigen::Vector3d& center, double radius) const;
  /// Allocation-reusing variant; `out` is cleared first.
  void radius_query(const Eigen::Vector3d& center, double radius,
                    std::vector<std::size_t>& out) const;

  std::size_t size() const { return positions_.size(); }
  const Eigen::Vector3d& position(std::size_t i) const { return positions_[i]; }
  double cell_size() const { return cell_size_; }

 private:
  struct Entry {
    std::uint64_t key;
    std::uint32_t index;
  };
  std::uint64_t key_of(std::int64_t cx, std::int64_t cy, std::int64_t cz) const;
  std::int64_t cell_coord(double v) const;

  std::vector<Eigen::Vector3d> positions_;
  std::vector<Entry> entries_;  // sorted by (key, index)
  double cell_size_;
};

inline SpatialIndex build_index(const Scan& scan, double cell_size = 0.5) {
  return SpatialIndex(scan, cell_size);
}

struct NormalOptions {
  double radius = 0.5;
  /// Fewer neighbors than this (self-returns excluded) gives an untrusted
  /// estimate.
  std::size_t min_neighbors = 5;
};

struct NormalEstimate {
  UnitVector3 normal{0.0, 0.0, 1.0};
  std::size_t neighbor_count = 0;
  /// 1 - l3/l2 from the neighborhood covariance eigenvalues (l3 smallest);
  /// 0 when the estimate is degenerate.
  double planarity = 0.0;
  /// False for too few neighbors or collinear neighborhoods. Callers must
  /// skip untrusted estimates.
  bool trusted = false;
};

/// PCA normal of the ball around `query`: the smallest-eigenvalue eigenvector
/// of the neighborhood covariance, flipped to face the sensor at the origin.
NormalEstimate estimate_normal(const SpatialIndex& index, const Point& query,
                               const NormalOptions& options = {});

/// Estimates for every point of `scan`, in point order. `index` must have
/// been built from the same scan.
std::vector<NormalEstimate> estimate_normals(const Scan& scan, const SpatialIndex& index,
                                             const NormalOptions& options = {});

/// Unit vector from the sensor origin toward `p`. Throws ContractError for a
/// point at the origin.
UnitVector3 beam_direction(const Point& p);

/// arccos(|beam . normal|), in [0, pi/2].
double incidence_angle(const UnitVector3& beam, const UnitVector3& normal);

}  // namespace lidarint
