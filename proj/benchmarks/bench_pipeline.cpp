#include <benchmark/benchmark.h>

#include "lidarint/alpha_regressor.hpp"
#include "lidarint/calibration.hpp"
#include "lidarint/class_profiles.hpp"
#include "lidarint/geometry.hpp"
#include "lidarint/synthetic.hpp"

using namespace lidarint;

namespace {

// One Ouster-sized sweep of a ground plane and two walls.
const synth::SyntheticScan& sweep() {
  static const synth::SyntheticScan scan = [] {
    const std::vector<synth::SceneSurface> scene{
        {synth::Plane{{0, 0, -1.8}, UnitVector3(0, 0, 1), 0.0}, 100.0, ClassId::grass, 0.02},
        {synth::Plane{{15, 0, 0}, UnitVector3(-1, 0, 0), 0.0}, 300.0, ClassId::tree, 0.02},
        {synth::Plane{{-25, 0, 0}, UnitVector3(1, 0, 0), 0.0}, 500.0, ClassId::bush, 0.02},
    };
    synth::SensorSimConfig cfg;
    cfg.seed = 1;
    return synth::generate_scan(scene, cfg);
  }();
  return scan;
}

void BM_BuildIndex(benchmark::State& state) {
  const auto& s = sweep();
  for (auto _ : state) benchmark::DoNotOptimize(build_index(s.scan));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(s.scan.size()));
}
BENCHMARK(BM_BuildIndex)->Unit(benchmark::kMillisecond);

void BM_EstimateNormals(benchmark::State& state) {
  const auto& s = sweep();
  const auto index = build_index(s.scan);
  for (auto _ : state) benchmark::DoNotOptimize(estimate_normals(s.scan, index));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(s.scan.size()));
}
BENCHMARK(BM_EstimateNormals)->Unit(benchmark::kMillisecond);

void BM_CalibrateScan(benchmark::State& state) {
  const auto& s = sweep();
  const auto normals = synth::truth_normals(s.truth);
  for (auto _ : state) benchmark::DoNotOptimize(calibrate_scan(s.scan, normals));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(s.scan.size()));
}
BENCHMARK(BM_CalibrateScan)->Unit(benchmark::kMillisecond);

void BM_ClassifyScan(benchmark::State& state) {
  const auto& s = sweep();
  const auto index = build_index(s.scan);
  const auto cal = calibrate_scan(s.scan, estimate_normals(s.scan, index));
  const auto profiles = build_profiles(labeled_intensities(cal, s.scan));
  for (auto _ : state) benchmark::DoNotOptimize(classify_scan(s.scan, profiles));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(s.scan.size()));
}
BENCHMARK(BM_ClassifyScan)->Unit(benchmark::kMillisecond);

void BM_RegressorForward(benchmark::State& state) {
  const auto model = MlpModel::initialized({6, 64, 64, 1}, 3);
  const auto n = static_cast<Eigen::Index>(state.range(0));
  Eigen::MatrixXd x = Eigen::MatrixXd::Random(6, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    x.col(j).head<3>().normalize();
    x.col(j).tail<3>().normalize();
  }
  for (auto _ : state) benchmark::DoNotOptimize(forward_batch(model, x));
  state.SetItemsProcessed(state.iterations() * n);
}
BENCHMARK(BM_RegressorForward)->Arg(1)->Arg(256)->Arg(65536);

void BM_RegressorBackward(benchmark::State& state) {
  const auto model = MlpModel::initialized({6, 64, 64, 1}, 3);
  const Eigen::Index n = 32;
  Eigen::MatrixXd x = Eigen::MatrixXd::Random(6, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    x.col(j).head<3>().normalize();
    x.col(j).tail<3>().normalize();
  }
  const Eigen::VectorXd t = Eigen::VectorXd::Constant(n, 0.3);
  for (auto _ : state) benchmark::DoNotOptimize(backward(model, x, t));
  state.SetItemsProcessed(state.iterations() * n);
}
BENCHMARK(BM_RegressorBackward);

}  // namespace

BENCHMARK_MAIN();
