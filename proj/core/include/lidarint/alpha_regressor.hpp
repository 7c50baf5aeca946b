#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "lidarint/calibration.hpp"
#include "lidarint/geometry.hpp"

namespace lidarint {

/// Surface normal followed by the beam direction.
class FeatureVector {
 public:
  FeatureVector(const UnitVector3& normal, const UnitVector3& beam);
  /// Throws ContractError unless both 3-blocks have unit norm within 1e-6.
  explicit FeatureVector(const std::array<double, 6>& values);

  const std::array<double, 6>& values() const { return v_; }
  double operator[](std::size_t i) const { return v_[i]; }

 private:
  std::array<double, 6> v_;
};

/// Fully connected regressor with tanh hidden layers and a scaled-sigmoid
/// output (pi/2 * sigmoid), so every prediction lies in [0, pi/2].
///
/// Parameters live in one flat vector: for each layer, the weight matrix
/// (column-major, out x in) followed by the bias vector.
class MlpModel {
 public:
  static constexpr std::string_view kActivation = "tanh";
  static constexpr std::string_view kOutput = "scaled_sigmoid";

  /// All-zero parameters. Throws ContractError unless dims has at least two
  /// entries, starts at 6 and ends at 1.
  explicit MlpModel(std::vector<std::size_t> dims = {6, 64, 64, 1});

  /// Glorot-uniform weights and zero biases drawn from `seed`.
  static MlpModel initialized(std::vector<std::size_t> dims, std::uint64_t seed);

  const std::vector<std::size_t>& dims() const { return dims_; }
  std::size_t layer_count() const { return dims_.size() - 1; }
  std::uint64_t seed() const { return seed_; }
  void set_seed(std::uint64_t seed) { seed_ = seed; }

  std::size_t parameter_count() const { return static_cast<std::size_t>(params_.size()); }
  const Eigen::VectorXd& parameters() const { return params_; }
  /// Throws ContractError on a size mismatch.
  void set_parameters(const Eigen::VectorXd& params);

  bool finite() const { return finite_; }

  Eigen::Map<const Eigen::MatrixXd> weights(std::size_t layer) const;
  Eigen::Map<const Eigen::VectorXd> biases(std::size_t layer) const;
  std::size_t weight_offset(std::size_t layer) const { return offsets_[layer]; }
  std::size_t bias_offset(std::size_t layer) const {
    return offsets_[layer] + dims_[layer + 1] * dims_[layer];
  }

  friend bool operator==(const MlpModel& a, const MlpModel& b) {
    return a.dims_ == b.dims_ && a.seed_ == b.seed_ && a.params_ == b.params_;
  }

 private:
  std::vector<std::size_t> dims_;
  std::vector<std::size_t> offsets_;
  Eigen::VectorXd params_;
  std::uint64_t seed_ = 0;
  bool finite_ = true;
};

/// Prediction in [0, pi/2]. Throws ModelCorruptError for non-finite parameters.
double forward(const MlpModel& model, const FeatureVector& features);

/// Batched forward pass over the columns of a 6 x B matrix.
Eigen::VectorXd forward_batch(const MlpModel& model, const Eigen::MatrixXd& features);

/// mean |pred - target|. Throws ContractError on empty or mismatched input.
double mae_loss(std::span<const double> predictions, std::span<const double> targets);

struct LossAndGradient {
  double loss = 0.0;
  Eigen::VectorXd gradient;  // same layout as MlpModel::parameters()
};

/// Exact reverse-mode gradient of the batch MAE. The subgradient of |x| at 0
/// is taken as 0. Throws ContractError for an empty or mismatched batch.
LossAndGradient backward(const MlpModel& model, const Eigen::MatrixXd& features,
                         const Eigen::VectorXd& targets);

struct AlphaExample {
  FeatureVector features;
  double alpha;
};

enum class Optimizer { adam, sgd };

std::string_view to_string(Optimizer o) noexcept;
std::optional<Optimizer> parse_optimizer(std::string_view name) noexcept;

struct TrainConfig {
  std::vector<std::size_t> dims{6, 64, 64, 1};
  double learning_rate = 1e-3;
  std::size_t batch_size = 32;
  int epochs = 200;
  std::uint64_t seed = 42;
  double validation_fraction = 0.1;
  Optimizer optimizer = Optimizer::adam;
};

struct TrainResult {
  MlpModel model;
  std::vector<double> train_loss;       // per epoch, mean over training examples
  std::vector<double> validation_loss;  // per epoch, hold-out MAE
  double final_validation_mae = 0.0;
  std::size_t train_count = 0;
  std::size_t validation_count = 0;
};

inline constexpr std::size_t kMinTrainingExamples = 100;

/// Mini-batch training on MAE. A pure function of (examples order, config).
/// Throws InsufficientDataError below kMinTrainingExamples, ContractError for
/// targets outside [0, pi/2] or bad config, TrainingDivergedError (with the
/// epoch index) on a non-finite loss.
TrainResult train(std::span<const AlphaExample> examples, const TrainConfig& config);

/// Plain-text model: `#` comment lines, then `dims`, `activation`, `output`,
/// `seed` and `parameters <count>` header lines, then one line per weight row
/// (row-major) and one line per bias vector, layer by layer.
std::string serialize_model(const MlpModel& model, std::string_view comment_header = {});
MlpModel parse_model(std::string_view text);
void save_model(const MlpModel& model, const std::filesystem::path& path,
                std::string_view comment_header = {});
MlpModel load_model(const std::filesystem::path& path);

/// Incidence angle predicted by `model`; the model must outlive the provider.
AlphaProvider regressor_alpha(const MlpModel& model);

}  // namespace lidarint
