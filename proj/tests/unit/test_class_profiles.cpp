#include <algorithm>
#include <cmath>
#include <random>

#include "doctest.h"
#include "lidarint/class_profiles.hpp"
#include "lidarint/error.hpp"
#include "lidarint/file_util.hpp"
#include "lidarint/synthetic.hpp"
#include "test_support.hpp"

using namespace lidarint;
using testing_support::deg;
using testing_support::Gen;
using testing_support::TempDir;

namespace {

std::vector<LabeledIntensity> normal_samples(Gen& gen, ClassId cls, double mean, double sd,
                                             std::size_t n) {
  std::vector<LabeledIntensity> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back({cls, gen.normal(mean, sd)});
  return out;
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

ProfileSet two_modes(double grass, double tree) {
  ClassProfile g;
  g.cls = ClassId::grass;
  g.mode = grass;
  g.support = 1000;
  g.histogram = {grass - 1, grass + 1, std::vector<std::size_t>(64, 1)};
  ClassProfile t = g;
  t.cls = ClassId::tree;
  t.mode = tree;
  t.histogram = {tree - 1, tree + 1, std::vector<std::size_t>(64, 1)};
  return ProfileSet({g, t}, {});
}

// Two walls at different reflectivities, both in gate.
std::vector<synth::SceneSurface> two_wall_scene(double sigma) {
  return {
      {synth::Plane{{15, 0, 0}, UnitVector3(-1, 0, 0), 0.0}, 100.0, ClassId::grass, sigma},
      {synth::Plane{{-20, 0, 0}, UnitVector3(1, 0, 0), 0.0}, 500.0, ClassId::tree, sigma},
  };
}

synth::SensorSimConfig wall_rays(std::uint64_t seed) {
  synth::SensorSimConfig cfg;
  cfg.rays.azimuth_count = 360;
  cfg.rays.elevation_count = 32;
  cfg.rays.elevation_min = deg(-20);
  cfg.rays.elevation_max = deg(20);
  cfg.seed = seed;
  return cfg;
}

ProfileSet profiles_from(const synth::SyntheticScan& gen) {
  const auto normals = synth::truth_normals(gen.truth);
  const auto cal = calibrate_scan(gen.scan, normals);
  const auto samples = labeled_intensities(cal, gen.scan);
  return build_profiles(samples);
}

}  // namespace

TEST_CASE("two disjoint classes give modes near their medians") {
  Gen gen(1);
  auto s = normal_samples(gen, ClassId::grass, 100, 1, 5000);
  const auto t = normal_samples(gen, ClassId::tree, 500, 1, 5000);
  s.insert(s.end(), t.begin(), t.end());
  const auto set = build_profiles(s);
  REQUIRE(set.profiles().size() == 2);
  std::vector<double> gv, tv;
  for (const auto& x : s) (x.cls == ClassId::grass ? gv : tv).push_back(x.value);
  CHECK(std::abs(set.find(ClassId::grass)->mode - median(gv)) < 5.0);
  CHECK(std::abs(set.find(ClassId::tree)->mode - median(tv)) < 5.0);
  CHECK(set.find(ClassId::grass)->support == 5000);
  CHECK(set.find(ClassId::grass)->histogram.counts.size() >= 64);
}

TEST_CASE("small classes are excluded, void is ignored") {
  Gen gen(2);
  auto s = normal_samples(gen, ClassId::grass, 100, 1, 2000);
  for (int i = 0; i < 5; ++i) s.push_back({ClassId::person, 7.0});
  for (int i = 0; i < 3000; ++i) s.push_back({ClassId::void_, 1.0});
  const auto set = build_profiles(s);
  CHECK(set.profiles().size() == 1);
  CHECK(set.find(ClassId::person) == nullptr);
  CHECK(set.find(ClassId::void_) == nullptr);
  REQUIRE(set.excluded().size() == 1);
  CHECK(set.excluded()[0].cls == ClassId::person);
  CHECK(set.excluded()[0].support == 5);
}

TEST_CASE("constant class has its value as mode") {
  std::vector<LabeledIntensity> s(1500, {ClassId::bush, 42.0});
  const auto set = build_profiles(s);
  REQUIRE(set.profiles().size() == 1);
  CHECK(set.profiles()[0].mode == 42.0);
  CHECK(set.profiles()[0].spread == 0.0);
}

TEST_CASE("mode is the center of the tallest bin and lies in the domain") {
  Gen gen(3);
  for (int trial = 0; trial < 20; ++trial) {
    const auto s = normal_samples(gen, ClassId::grass, gen.uniform(10, 1000), gen.uniform(1, 50),
                                  1000 + gen.index(3000));
    const auto set = build_profiles(s);
    const auto& p = set.profiles()[0];
    const auto& h = p.histogram;
    CHECK(p.mode >= h.lo);
    CHECK(p.mode <= h.hi);
    const auto peak = std::max_element(h.counts.begin(), h.counts.end()) - h.counts.begin();
    const double width = (h.hi - h.lo) / static_cast<double>(h.counts.size());
    CHECK(p.mode == doctest::Approx(h.lo + (static_cast<double>(peak) + 0.5) * width));
  }
}

TEST_CASE("property: profile build is order independent") {
  Gen gen(4);
  auto s = normal_samples(gen, ClassId::grass, 100, 5, 3000);
  const auto t = normal_samples(gen, ClassId::tree, 300, 20, 2000);
  s.insert(s.end(), t.begin(), t.end());
  const auto a = build_profiles(s);
  for (int trial = 0; trial < 5; ++trial) {
    std::shuffle(s.begin(), s.end(), gen.engine());
    const auto b = build_profiles(s);
    REQUIRE(b.profiles().size() == a.profiles().size());
    for (std::size_t i = 0; i < a.profiles().size(); ++i) {
      CHECK(a.profiles()[i].histogram.counts == b.profiles()[i].histogram.counts);
      CHECK(a.profiles()[i].mode == b.profiles()[i].mode);
      CHECK(a.profiles()[i].spread == b.profiles()[i].spread);
    }
  }
}

TEST_CASE("classify_point examples") {
  const auto set = two_modes(100, 500);
  CHECK(classify_point(100, set) == ClassId::grass);
  CHECK(classify_point(500, set) == ClassId::tree);
  CHECK(classify_point(150, set) == ClassId::grass);
  CHECK(classify_point(300, set) == ClassId::grass);  // midway, lower id wins
  CHECK(classify_point(300.0001, set) == ClassId::tree);
  CHECK(classify_point(-1e9, set) == ClassId::grass);
  CHECK_THROWS_AS(classify_point(1.0, ProfileSet{}), ContractError);
}

TEST_CASE("property: classification is invariant under a common positive rescale") {
  Gen gen(5);
  for (int trial = 0; trial < 500; ++trial) {
    const double g = gen.uniform(1, 1000), t = gen.uniform(1, 1000), v = gen.uniform(0, 1100);
    // powers of two keep every comparison exact
    const double k2 = std::exp2(static_cast<double>(gen.index(21)) - 10.0);
    CHECK(classify_point(v, two_modes(g, t)) == classify_point(v * k2, two_modes(g * k2, t * k2)));
    CHECK(classify_point(g, two_modes(g, t)) == ClassId::grass);
    if (g != t) CHECK(classify_point(t, two_modes(g, t)) == ClassId::tree);
  }
}

TEST_CASE("classify_scan on a separable two-wall scene") {
  const auto scene = two_wall_scene(0.0);
  const auto train = synth::generate_scan(scene, wall_rays(1));
  const auto profiles = profiles_from(train);
  REQUIRE(profiles.profiles().size() == 2);
  // calibrated values carry the emitted-power constant
  const double e = synth::SensorSimConfig{}.emitted_power;
  CHECK(profiles.find(ClassId::grass)->mode == doctest::Approx(100.0 * e).epsilon(0.05));
  CHECK(profiles.find(ClassId::tree)->mode == doctest::Approx(500.0 * e).epsilon(0.05));

  SUBCASE("noise-free: every in-gate point is right") {
    const auto seg = classify_scan(train.scan, profiles);
    REQUIRE(seg.labels.size() == train.scan.size());
    std::size_t hit = 0;
    for (std::size_t i = 0; i < seg.labels.size(); ++i) {
      if (seg.labels[i] == ClassId::void_) continue;
      CHECK(seg.labels[i] == train.scan.labels()[i]);
      ++hit;
    }
    CHECK(hit == seg.classified);
    CHECK(hit > 1000);
  }
  SUBCASE("5% intensity noise still classifies at least 95%") {
    const auto noisy = synth::generate_scan(two_wall_scene(0.05), wall_rays(2));
    const auto seg = classify_scan(noisy.scan, profiles);
    std::size_t ok = 0, n = 0;
    for (std::size_t i = 0; i < seg.labels.size(); ++i) {
      if (seg.labels[i] == ClassId::void_) continue;
      ++n;
      ok += seg.labels[i] == noisy.scan.labels()[i];
    }
    REQUIRE(n > 0);
    CHECK(static_cast<double>(ok) / static_cast<double>(n) >= 0.95);
  }
}

TEST_CASE("a scan entirely under 6 m is all void") {
  const std::vector<synth::SceneSurface> scene{
      {synth::Sphere{{0, 0, 0}, 4.0}, 100.0, ClassId::grass, 0.0}};
  synth::SensorSimConfig cfg = wall_rays(3);
  const auto gen = synth::generate_scan(scene, cfg);
  const auto seg = classify_scan(gen.scan, two_modes(100, 500));
  CHECK(seg.classified == 0);
  for (auto c : seg.labels) CHECK(c == ClassId::void_);
  CHECK(seg.rejected.near_range == gen.scan.size() - seg.rejected.degenerate_normal);
}

TEST_CASE("classify_scan refuses Velodyne scans") {
  const Scan scan({{10, 0, 0, 1}}, SensorKind::velodyne_preprocessed);
  CHECK_THROWS_AS(classify_scan(scan, two_modes(1, 2)), PreconditionError);
}

TEST_CASE("neighborhood mode filter") {
  std::vector<Point> pts;
  for (int i = 0; i < 11; ++i) pts.push_back({10.0 + 0.01 * i, 0.0, 0.0, 1.0});
  const Scan scan(pts, SensorKind::ouster_raw);
  const SpatialIndex index(scan, 0.5);

  SUBCASE("uniform labels are unchanged") {
    const std::vector<ClassId> labels(11, ClassId::tree);
    CHECK(neighborhood_mode_filter(labels, index, 0.5) == labels);
  }
  SUBCASE("a single flipped label is restored") {
    std::vector<ClassId> labels(11, ClassId::tree);
    labels[5] = ClassId::grass;
    const auto out = neighborhood_mode_filter(labels, index, 0.5);
    CHECK(out == std::vector<ClassId>(11, ClassId::tree));
  }
  SUBCASE("void neither votes nor changes") {
    std::vector<ClassId> labels(11, ClassId::void_);
    labels[0] = ClassId::grass;
    const auto out = neighborhood_mode_filter(labels, index, 0.5);
    CHECK(out == labels);
  }
  SUBCASE("ties keep the original label") {
    std::vector<ClassId> labels{ClassId::grass, ClassId::tree};
    const Scan two({{10, 0, 0, 1}, {10.1, 0, 0, 1}}, SensorKind::ouster_raw);
    const SpatialIndex i2(two, 0.5);
    CHECK(neighborhood_mode_filter(labels, i2, 0.5) == labels);
  }
  SUBCASE("size mismatch") {
    CHECK_THROWS_AS(neighborhood_mode_filter(std::vector<ClassId>(3), index, 0.5), ContractError);
  }
}

TEST_CASE("property: neighborhood filter commutes with point reordering") {
  Gen gen(6);
  for (int trial = 0; trial < 5; ++trial) {
    const std::size_t n = 400;
    std::vector<Point> pts;
    std::vector<ClassId> labels;
    for (std::size_t i = 0; i < n; ++i) {
      pts.push_back({gen.uniform(8, 12), gen.uniform(-2, 2), gen.uniform(-1, 1), 1.0});
      labels.push_back(class_from_index(gen.index(kClassCount)));
    }
    const Scan scan(pts, SensorKind::ouster_raw);
    const auto out = neighborhood_mode_filter(labels, SpatialIndex(scan, 0.7), 0.7);

    std::vector<std::size_t> perm(n);
    for (std::size_t i = 0; i < n; ++i) perm[i] = i;
    std::shuffle(perm.begin(), perm.end(), gen.engine());
    std::vector<Point> pp(n);
    std::vector<ClassId> pl(n);
    for (std::size_t i = 0; i < n; ++i) {
      pp[i] = pts[perm[i]];
      pl[i] = labels[perm[i]];
    }
    const Scan ps(pp, SensorKind::ouster_raw);
    const auto pout = neighborhood_mode_filter(pl, SpatialIndex(ps, 0.7), 0.7);
    for (std::size_t i = 0; i < n; ++i) CHECK(pout[i] == out[perm[i]]);

    // fixed points stay fixed
    const auto again = neighborhood_mode_filter(out, SpatialIndex(scan, 0.7), 0.7);
    if (out == labels) CHECK(again == out);
  }
}

TEST_CASE("profile file round-trip") {
  TempDir dir;
  Gen gen(7);
  auto s = normal_samples(gen, ClassId::grass, 100, 5, 3000);
  const auto t = normal_samples(gen, ClassId::puddle, 20, 2, 1200);
  s.insert(s.end(), t.begin(), t.end());
  s.push_back({ClassId::person, 3.0});
  auto set = build_profiles(s);
  set.set_settings({{"r_min", "6"}, {"alpha_source", "analytic"}});
  save_profiles(set, dir / "p.txt", "seed 42");
  const auto back = load_profiles(dir / "p.txt");
  REQUIRE(back.profiles().size() == 2);
  for (std::size_t i = 0; i < 2; ++i) {
    CHECK(back.profiles()[i].cls == set.profiles()[i].cls);
    CHECK(back.profiles()[i].mode == set.profiles()[i].mode);
    CHECK(back.profiles()[i].histogram.counts == set.profiles()[i].histogram.counts);
    CHECK(back.profiles()[i].histogram.lo == set.profiles()[i].histogram.lo);
  }
  CHECK(back.settings() == set.settings());
  CHECK(back.excluded().size() == 1);
  CHECK(read_file_text(dir / "p.txt").find("# seed 42\n") != std::string::npos);
  CHECK_THROWS_AS(parse_profiles("class grass mode x\n"), FormatError);
}
