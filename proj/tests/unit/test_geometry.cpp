#include <algorithm>
#include <cmath>
#include <numbers>

#include "doctest.h"
#include "lidarint/error.hpp"
#include "lidarint/geometry.hpp"
#include "test_support.hpp"

#include <Eigen/Geometry>

using namespace lidarint;
using testing_support::deg;
using testing_support::Gen;

namespace {

std::vector<std::size_t> brute_force(const std::vector<Point>& pts, const Eigen::Vector3d& c,
                                     double r) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    if ((pts[i].position() - c).norm() <= r) out.push_back(i);
  }
  return out;
}

double angle_between(const Eigen::Vector3d& a, const Eigen::Vector3d& b) {
  return std::acos(std::clamp(a.normalized().dot(b.normalized()), -1.0, 1.0));
}

}  // namespace

TEST_CASE("radius query boundary is inclusive") {
  const Scan scan({{10, 0, 0, 1}, {11, 0, 0, 1}}, SensorKind::ouster_raw);
  const auto index = build_index(scan);
  CHECK(index.radius_query({10, 0, 0}, 1.0) == std::vector<std::size_t>{0, 1});
  CHECK(index.radius_query({10, 0, 0}, 0.99) == std::vector<std::size_t>{0});
}

TEST_CASE("empty scan cannot be indexed") {
  CHECK_THROWS_AS(build_index(Scan({}, SensorKind::ouster_raw)), ContractError);
}

TEST_CASE("property: radius query equals a linear scan") {
  Gen gen(21);
  for (int trial = 0; trial < 5; ++trial) {
    std::vector<Point> pts;
    const double extent = trial == 0 ? 1.0 : 20.0;
    for (int i = 0; i < 1000; ++i) {
      pts.push_back({gen.uniform(-extent, extent), gen.uniform(-extent, extent),
                     gen.uniform(-extent / 4, extent / 4), 1.0});
    }
    // exact duplicates and boundary cases
    pts.push_back(pts[0]);
    pts.push_back({pts[1].x + 0.5, pts[1].y, pts[1].z, 1.0});
    const Scan scan(pts, SensorKind::ouster_raw);
    const double cell = trial == 4 ? 1e-4 : gen.uniform(0.2, 3.0);
    const SpatialIndex index(scan, cell);
    for (int q = 0; q < 100; ++q) {
      const Eigen::Vector3d c = q < 50 ? pts[gen.index(pts.size())].position()
                                       : Eigen::Vector3d(gen.uniform(-extent, extent),
                                                         gen.uniform(-extent, extent), 0.0);
      const double r = q == 0 ? 0.5 : gen.uniform(0.0, extent * 0.6);
      const Eigen::Vector3d center = q == 0 ? pts[1].position() : c;
      CHECK(index.radius_query(center, r) == brute_force(pts, center, r));
    }
  }
}

TEST_CASE("exact plane above the sensor gives a downward normal") {
  std::vector<Point> pts;
  for (int i = -5; i <= 5; ++i) {
    for (int j = -5; j <= 5; ++j) pts.push_back({i * 0.1, j * 0.1, 5.0, 1.0});
  }
  const Scan scan(pts, SensorKind::ouster_raw);
  const auto index = build_index(scan);
  const auto est = estimate_normal(index, {0.0, 0.0, 5.0, 1.0});
  CHECK(est.trusted);
  CHECK(est.normal.z() == doctest::Approx(-1.0).epsilon(1e-12));
  CHECK(std::abs(est.normal.x()) < 1e-9);
  CHECK(est.planarity == doctest::Approx(1.0));
  CHECK(est.neighbor_count >= 5);
}

TEST_CASE("too few neighbors or collinear neighbors are degenerate") {
  const Scan two({{10, 0, 0, 1}, {10.1, 0, 0, 1}}, SensorKind::ouster_raw);
  const auto i2 = build_index(two);
  const auto e2 = estimate_normal(i2, two[0]);
  CHECK_FALSE(e2.trusted);
  CHECK(e2.planarity == 0.0);
  CHECK(e2.neighbor_count == 2);

  std::vector<Point> line;
  for (int i = 0; i < 9; ++i) line.push_back({10.0 + 0.05 * i, 0.0, 0.0, 1.0});
  const Scan ln(line, SensorKind::ouster_raw);
  const auto il = build_index(ln);
  const auto el = estimate_normal(il, ln[4]);
  CHECK_FALSE(el.trusted);
  CHECK(el.planarity == 0.0);
}

TEST_CASE("self-returns do not count as neighbors") {
  std::vector<Point> pts;
  for (int i = 0; i < 12; ++i) pts.push_back({0.01 * i, 0.02 * (i % 3), 0.1, 1.0});
  const Scan scan(pts, SensorKind::ouster_raw);
  const auto index = build_index(scan);
  const auto e = estimate_normal(index, pts[3]);
  CHECK(e.neighbor_count == 0);
  CHECK_FALSE(e.trusted);
}

TEST_CASE("sphere normals point inward within 2 degrees") {
  // Fibonacci lattice on a sphere of radius 10 around the sensor.
  const std::size_t n = 20000;
  std::vector<Point> pts;
  const double golden = std::numbers::pi * (3.0 - std::sqrt(5.0));
  for (std::size_t i = 0; i < n; ++i) {
    const double z = 1.0 - 2.0 * (static_cast<double>(i) + 0.5) / static_cast<double>(n);
    const double r = std::sqrt(1.0 - z * z);
    const double phi = golden * static_cast<double>(i);
    pts.push_back({10 * r * std::cos(phi), 10 * r * std::sin(phi), 10 * z, 1.0});
  }
  const Scan scan(pts, SensorKind::ouster_raw);
  const auto index = build_index(scan);
  Gen gen(4);
  for (int q = 0; q < 100; ++q) {
    const auto& p = pts[gen.index(n)];
    const auto e = estimate_normal(index, p);
    REQUIRE(e.trusted);
    CHECK(angle_between(e.normal.vec(), -p.position()) < deg(2.0));
  }
}

TEST_CASE("property: exact random planes recover their normal to 1e-9") {
  Gen gen(8);
  for (int trial = 0; trial < 50; ++trial) {
    const Eigen::Vector3d n = gen.unit_vector();
    const Eigen::Vector3d center = gen.unit_vector() * gen.uniform(8, 40);
    const Eigen::Vector3d u = n.unitOrthogonal();
    const Eigen::Vector3d v = n.cross(u);
    std::vector<Point> pts;
    for (int i = 0; i < 30; ++i) {
      const Eigen::Vector3d p = center + gen.uniform(-0.3, 0.3) * u + gen.uniform(-0.3, 0.3) * v;
      pts.push_back({p.x(), p.y(), p.z(), 1.0});
    }
    pts.push_back({center.x(), center.y(), center.z(), 1.0});
    const Scan scan(pts, SensorKind::ouster_raw);
    const auto index = build_index(scan);
    const auto e = estimate_normal(index, pts.back());
    REQUIRE(e.trusted);
    const Eigen::Vector3d expected = n.dot(center) > 0 ? Eigen::Vector3d(-n) : n;
    CHECK((e.normal.vec() - expected).norm() < 1e-9);
    CHECK(e.normal.vec().dot(center) <= 0.0);
  }
}

TEST_CASE("estimate_normals is parallel to the scan") {
  Gen gen(9);
  std::vector<Point> pts;
  for (int i = 0; i < 500; ++i) pts.push_back({gen.uniform(5, 8), gen.uniform(-1, 1), -1.5, 1.0});
  const Scan scan(pts, SensorKind::ouster_raw);
  const auto index = build_index(scan);
  const auto normals = estimate_normals(scan, index);
  REQUIRE(normals.size() == scan.size());
  for (const auto& e : normals) {
    if (e.trusted) CHECK(e.normal.z() == doctest::Approx(1.0));
  }
}

TEST_CASE("incidence angle examples") {
  CHECK(incidence_angle(UnitVector3(0, 0, -1), UnitVector3(0, 0, 1)) == doctest::Approx(0.0));
  CHECK(incidence_angle(UnitVector3(1, 0, 0), UnitVector3(0, 0, 1)) ==
        doctest::Approx(std::numbers::pi / 2));
  CHECK(incidence_angle(UnitVector3::normalize({1, 0, -1}), UnitVector3(0, 0, 1)) ==
        doctest::Approx(std::numbers::pi / 4));
}

TEST_CASE("property: incidence angle is sign-symmetric and bounded") {
  Gen gen(10);
  for (int i = 0; i < 5000; ++i) {
    const UnitVector3 l = UnitVector3::normalize(gen.unit_vector());
    const UnitVector3 n = UnitVector3::normalize(gen.unit_vector());
    const double a = incidence_angle(l, n);
    CHECK(a == incidence_angle(l, -n));
    CHECK(a >= 0.0);
    CHECK(a <= std::numbers::pi / 2);
  }
}

TEST_CASE("non-unit vectors are rejected") {
  CHECK_THROWS_AS(UnitVector3(1.0, 0.0, 1e-2), ContractError);
  CHECK_THROWS_AS(UnitVector3(1.0 + 2e-6, 0.0, 0.0), ContractError);
  CHECK_NOTHROW(UnitVector3(1.0 + 5e-7, 0.0, 0.0));
  CHECK(std::abs(UnitVector3(1.0 + 5e-7, 0.0, 0.0).vec().norm() - 1.0) < 1e-12);
  CHECK_THROWS_AS(UnitVector3::normalize({0, 0, 0}), ContractError);
}

TEST_CASE("beam direction examples") {
  const auto b = beam_direction({3, 0, 0, 1});
  CHECK(b.x() == 1.0);
  CHECK_THROWS_AS(beam_direction({0, 0, 0, 1}), ContractError);
  const auto c = beam_direction({1, 2, 2, 1});
  CHECK(c.x() == doctest::Approx(1.0 / 3));
  CHECK(c.y() == doctest::Approx(2.0 / 3));
  CHECK(c.z() == doctest::Approx(2.0 / 3));
}
