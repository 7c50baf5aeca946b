#include <cmath>
#include <numbers>

#include "doctest.h"
#include "lidarint/alpha_regressor.hpp"
#include "lidarint/error.hpp"
#include "test_support.hpp"

#include <Eigen/Geometry>

using namespace lidarint;
using testing_support::deg;
using testing_support::Gen;
using testing_support::TempDir;

namespace {

constexpr double kHalfPi = std::numbers::pi / 2;

FeatureVector random_features(Gen& gen) {
  const auto l = UnitVector3::normalize(gen.unit_vector());
  auto n = UnitVector3::normalize(gen.unit_vector());
  if (n.dot(l) > 0) n = -n;
  return FeatureVector(n, l);
}

Eigen::MatrixXd batch_matrix(const std::vector<FeatureVector>& f) {
  Eigen::MatrixXd x(6, static_cast<Eigen::Index>(f.size()));
  for (std::size_t j = 0; j < f.size(); ++j) {
    for (int i = 0; i < 6; ++i) x(i, static_cast<Eigen::Index>(j)) = f[j][static_cast<std::size_t>(i)];
  }
  return x;
}

double loss_with(const MlpModel& base, const Eigen::VectorXd& params, const Eigen::MatrixXd& x,
                 const Eigen::VectorXd& t) {
  MlpModel m = base;
  m.set_parameters(params);
  const Eigen::VectorXd p = forward_batch(m, x);
  return (p - t).cwiseAbs().mean();
}

// Synthetic alpha data: alpha = arccos(|n . l|) exactly.
std::vector<AlphaExample> analytic_dataset(std::size_t n, std::uint64_t seed) {
  Gen gen(seed);
  std::vector<AlphaExample> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto f = random_features(gen);
    const double dot = f[0] * f[3] + f[1] * f[4] + f[2] * f[5];
    out.push_back({f, std::acos(std::min(1.0, std::abs(dot)))});
  }
  return out;
}

}  // namespace

TEST_CASE("zero model predicts pi/4 everywhere") {
  MlpModel m;
  Gen gen(1);
  for (int i = 0; i < 20; ++i) CHECK(forward(m, random_features(gen)) == doctest::Approx(kHalfPi / 2));
}

TEST_CASE("property: output stays in [0, pi/2] for any finite parameters") {
  Gen gen(2);
  for (int trial = 0; trial < 20; ++trial) {
    auto m = MlpModel::initialized({6, 64, 64, 1}, trial);
    Eigen::VectorXd p = m.parameters() * gen.uniform(0.1, 100.0);
    m.set_parameters(p);
    for (int i = 0; i < 50; ++i) {
      const double a = forward(m, random_features(gen));
      CHECK(a >= 0.0);
      CHECK(a <= kHalfPi);
    }
  }
}

TEST_CASE("non-finite parameters are a corrupt model") {
  auto m = MlpModel::initialized({6, 8, 1}, 3);
  Eigen::VectorXd p = m.parameters();
  p(5) = std::numeric_limits<double>::quiet_NaN();
  m.set_parameters(p);
  Gen gen(3);
  CHECK_THROWS_AS(forward(m, random_features(gen)), ModelCorruptError);
}

TEST_CASE("feature blocks must be unit vectors") {
  CHECK_THROWS_AS(FeatureVector({1, 0, 0, 0, 0, 0.5}), ContractError);
  CHECK_NOTHROW(FeatureVector({1, 0, 0, 0, 0, 1}));
}

TEST_CASE("dims must start at 6 and end at 1") {
  CHECK_THROWS_AS(MlpModel({5, 1}), ContractError);
  CHECK_THROWS_AS(MlpModel({6, 4, 2}), ContractError);
  CHECK(MlpModel({6, 64, 64, 1}).parameter_count() == 6 * 64 + 64 + 64 * 64 + 64 + 64 + 1);
}

TEST_CASE("mae_loss") {
  const std::vector<double> a{0.1, 0.2, 0.3};
  CHECK(mae_loss(a, a) == 0.0);
  CHECK(mae_loss(std::vector<double>{0, kHalfPi}, std::vector<double>{kHalfPi, 0}) ==
        doctest::Approx(kHalfPi));
  CHECK_THROWS_AS(mae_loss(std::vector<double>{1}, std::vector<double>{1, 2}), ContractError);
  CHECK_THROWS_AS(mae_loss(std::vector<double>{}, std::vector<double>{}), ContractError);

  Gen gen(4);
  std::vector<double> p(100), t(100);
  for (int i = 0; i < 100; ++i) {
    p[i] = gen.uniform(0, kHalfPi);
    t[i] = gen.uniform(0, kHalfPi);
  }
  double naive = 0.0;
  for (int i = 0; i < 100; ++i) naive += std::abs(p[i] - t[i]);
  naive /= 100.0;
  CHECK(std::abs(mae_loss(p, t) - naive) <= 1e-12);
}

TEST_CASE("gradient matches central differences on every parameter of one example") {
  Gen gen(5);
  const auto m = MlpModel::initialized({6, 64, 64, 1}, 5);
  const std::vector<FeatureVector> f{random_features(gen)};
  const auto x = batch_matrix(f);
  Eigen::VectorXd t(1);
  t(0) = forward(m, f[0]) > 0.8 ? 0.05 : 1.5;  // far from the kink
  const auto lg = backward(m, x, t);
  const double h = 1e-6;
  Eigen::VectorXd p = m.parameters();
  double worst = 0.0;
  for (Eigen::Index k = 0; k < p.size(); ++k) {
    const double orig = p(k);
    p(k) = orig + h;
    const double up = loss_with(m, p, x, t);
    p(k) = orig - h;
    const double down = loss_with(m, p, x, t);
    p(k) = orig;
    const double fd = (up - down) / (2 * h);
    const double a = lg.gradient(k);
    const double rel = std::abs(a - fd) / std::max({std::abs(a), std::abs(fd), 1e-6});
    worst = std::max(worst, rel);
  }
  CHECK(worst <= 1e-4);
}

TEST_CASE("exact fit has zero gradient") {
  Gen gen(6);
  const auto m = MlpModel::initialized({6, 16, 1}, 6);
  const std::vector<FeatureVector> f{random_features(gen), random_features(gen)};
  const auto x = batch_matrix(f);
  const Eigen::VectorXd t = forward_batch(m, x);
  const auto lg = backward(m, x, t);
  CHECK(lg.loss == 0.0);
  CHECK(lg.gradient.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("batch gradient is the mean of per-example gradients") {
  Gen gen(7);
  const auto m = MlpModel::initialized({6, 32, 32, 1}, 7);
  std::vector<FeatureVector> f;
  Eigen::VectorXd t(8);
  for (int i = 0; i < 8; ++i) {
    f.push_back(random_features(gen));
    t(i) = gen.uniform(0, kHalfPi);
  }
  const auto whole = backward(m, batch_matrix(f), t);
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(whole.gradient.size());
  for (int i = 0; i < 8; ++i) {
    Eigen::VectorXd ti(1);
    ti(0) = t(i);
    sum += backward(m, batch_matrix({f[static_cast<std::size_t>(i)]}), ti).gradient;
  }
  CHECK((whole.gradient - sum / 8.0).cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("constant targets are learned") {
  std::vector<AlphaExample> data;
  Gen gen(8);
  for (int i = 0; i < 500; ++i) data.push_back({random_features(gen), 0.3});
  TrainConfig cfg;
  cfg.epochs = 100;
  const auto r = train(data, cfg);
  CHECK(r.final_validation_mae < 0.01);
  CHECK(r.train_count + r.validation_count == 500);
  CHECK(r.validation_count == 50);
}

TEST_CASE("training is deterministic given the seed") {
  const auto data = analytic_dataset(400, 9);
  TrainConfig cfg;
  cfg.epochs = 5;
  const auto a = train(data, cfg);
  const auto b = train(data, cfg);
  CHECK(a.train_loss == b.train_loss);
  CHECK(a.validation_loss == b.validation_loss);
  CHECK(a.model == b.model);
  cfg.seed = 43;
  CHECK_FALSE(train(data, cfg).model == a.model);
}

TEST_CASE("training preconditions") {
  CHECK_THROWS_AS(train(analytic_dataset(99, 1), TrainConfig{}), InsufficientDataError);
  auto data = analytic_dataset(150, 1);
  data[3].alpha = 2.0;
  CHECK_THROWS_AS(train(data, TrainConfig{}), ContractError);
  TrainConfig bad;
  bad.learning_rate = 0.0;
  CHECK_THROWS_AS(train(analytic_dataset(150, 1), bad), ContractError);
}

TEST_CASE("plain gradient descent is available") {
  TrainConfig cfg;
  cfg.optimizer = Optimizer::sgd;
  cfg.epochs = 3;
  const auto r = train(analytic_dataset(300, 2), cfg);
  CHECK(r.train_loss.size() == 3);
  CHECK(parse_optimizer("sgd") == Optimizer::sgd);
  CHECK_FALSE(parse_optimizer("rmsprop").has_value());
}

TEST_CASE("regressor beats the raw arccos baseline on noisy normals") {
  // Normals tilted by a fixed 10 degrees about a random axis; arccos of the
  // noisy normal is biased upward near head-on incidence.
  const auto noisy_set = [](std::size_t n, std::uint64_t seed) {
    Gen gen(seed);
    std::vector<AlphaExample> out;
    const double tilt = deg(10.0);
    for (std::size_t i = 0; i < n; ++i) {
      const auto l = UnitVector3::normalize(gen.unit_vector());
      const double alpha = std::acos(gen.uniform(std::cos(deg(40.0)), 1.0));
      const Eigen::Vector3d axis = (-l.vec()).unitOrthogonal();
      const Eigen::Vector3d n_true =
          Eigen::AngleAxisd(alpha, Eigen::AngleAxisd(gen.uniform(0, 6.283), -l.vec()) * axis) *
          (-l.vec());
      const Eigen::Vector3d n_noisy =
          Eigen::AngleAxisd(tilt, Eigen::AngleAxisd(gen.uniform(0, 6.283), n_true) *
                                      n_true.unitOrthogonal()) *
          n_true;
      out.push_back({FeatureVector(UnitVector3::normalize(n_noisy), l), alpha});
    }
    return out;
  };
  const auto train_set = noisy_set(4000, 10);
  const auto hold_out = noisy_set(2000, 11);
  TrainConfig cfg;
  cfg.epochs = 60;
  const auto r = train(train_set, cfg);
  double model_mae = 0.0, baseline = 0.0;
  for (const auto& ex : hold_out) {
    const double dot = ex.features[0] * ex.features[3] + ex.features[1] * ex.features[4] +
                       ex.features[2] * ex.features[5];
    baseline += std::abs(std::acos(std::min(1.0, std::abs(dot))) - ex.alpha);
    model_mae += std::abs(forward(r.model, ex.features) - ex.alpha);
  }
  model_mae /= static_cast<double>(hold_out.size());
  baseline /= static_cast<double>(hold_out.size());
  MESSAGE("regressor " << model_mae << " baseline " << baseline);
  CHECK(model_mae < baseline);
}

TEST_CASE("model trained on exact geometry predicts a 30 degree hit within 3 degrees") {
  TrainConfig cfg;
  cfg.epochs = 100;
  const auto r = train(analytic_dataset(5000, 13), cfg);
  Gen gen(14);
  for (int i = 0; i < 20; ++i) {
    const auto l = UnitVector3::normalize(gen.unit_vector());
    const Eigen::Vector3d axis = l.vec().unitOrthogonal();
    const Eigen::Vector3d n = Eigen::AngleAxisd(deg(30.0), axis) * (-l.vec());
    const double pred = forward(r.model, FeatureVector(UnitVector3::normalize(n), l));
    CHECK(std::abs(pred - deg(30.0)) < deg(3.0));
  }
}

TEST_CASE("model file round-trip") {
  TempDir dir;
  const auto m = MlpModel::initialized({6, 64, 64, 1}, 12);
  save_model(m, dir / "m.txt", "cfg a 1\ncfg b 2");
  const auto back = load_model(dir / "m.txt");
  CHECK(back == m);
  Gen gen(12);
  const auto f = random_features(gen);
  CHECK(forward(back, f) == forward(m, f));
  const auto text = serialize_model(m, "cfg a 1");
  CHECK(text.find("# cfg a 1\n") != std::string::npos);
  CHECK(text.find("dims 6 64 64 1\n") != std::string::npos);
  CHECK(serialize_model(MlpModel{}).size() > 0);
  CHECK(load_model(dir / "m.txt").seed() == 12);
}

TEST_CASE("header and parameter block must agree") {
  const auto small = MlpModel::initialized({6, 64, 1}, 1);
  auto text = serialize_model(small);
  const auto pos = text.find("dims 6 64 1");
  REQUIRE(pos != std::string::npos);
  text.replace(pos, 11, "dims 6 32 1");
  CHECK_THROWS_AS(parse_model(text), FormatError);
  CHECK_THROWS_AS(parse_model("dims 6 1\nactivation relu\nparameters 7\n0 0 0 0 0 0\n0\n"),
                  FormatError);
}

TEST_CASE("regressor alpha provider") {
  const MlpModel m;
  const auto provider = regressor_alpha(m);
  CHECK(provider(UnitVector3(0, 0, 1), UnitVector3(0, 0, -1)) == doctest::Approx(kHalfPi / 2));
}
