#include "lidarint/alpha_regressor.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <random>
#include <sstream>

#include "lidarint/error.hpp"
#include "lidarint/file_util.hpp"

namespace lidarint {

namespace {

constexpr double kHalfPi = std::numbers::pi / 2.0;

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

void check_block(const std::array<double, 6>& v, std::size_t start) {
  const double n = std::sqrt(v[start] * v[start] + v[start + 1] * v[start + 1] +
                             v[start + 2] * v[start + 2]);
  if (!(std::abs(n - 1.0) <= 1e-6)) {
    throw ContractError("feature block at " + std::to_string(start) + " is not a unit vector");
  }
}

// Forward pass keeping every activation for the backward sweep.
struct Activations {
  std::vector<Eigen::MatrixXd> a;  // a[0] = input, a[L] = output sigmoid
};

Activations run_forward(const MlpModel& model, const Eigen::MatrixXd& x) {
  Activations acts;
  const std::size_t layers = model.layer_count();
  acts.a.reserve(layers + 1);
  acts.a.push_back(x);
  for (std::size_t l = 0; l < layers; ++l) {
    Eigen::MatrixXd z = model.weights(l) * acts.a.back();
    z.colwise() += model.biases(l);
    if (l + 1 < layers) {
      acts.a.push_back(z.array().tanh().matrix());
    } else {
      acts.a.push_back(z.unaryExpr([](double v) { return sigmoid(v); }));
    }
  }
  return acts;
}

void check_features_matrix(const MlpModel& model, const Eigen::MatrixXd& x) {
  if (static_cast<std::size_t>(x.rows()) != model.dims().front()) {
    throw ContractError("feature matrix has " + std::to_string(x.rows()) + " rows, model expects " +
                        std::to_string(model.dims().front()));
  }
  if (!model.finite()) {
    throw ModelCorruptError("model has non-finite parameters");
  }
}

Eigen::MatrixXd to_matrix(std::span<const AlphaExample> examples,
                          std::span<const std::size_t> order) {
  Eigen::MatrixXd x(6, static_cast<Eigen::Index>(order.size()));
  for (std::size_t j = 0; j < order.size(); ++j) {
    const auto& v = examples[order[j]].features.values();
    for (std::size_t r = 0; r < 6; ++r) x(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(j)) = v[r];
  }
  return x;
}

Eigen::VectorXd to_targets(std::span<const AlphaExample> examples,
                           std::span<const std::size_t> order) {
  Eigen::VectorXd t(static_cast<Eigen::Index>(order.size()));
  for (std::size_t j = 0; j < order.size(); ++j) t(static_cast<Eigen::Index>(j)) = examples[order[j]].alpha;
  return t;
}

}  // namespace

FeatureVector::FeatureVector(const UnitVector3& normal, const UnitVector3& beam)
    : v_{normal.x(), normal.y(), normal.z(), beam.x(), beam.y(), beam.z()} {}

FeatureVector::FeatureVector(const std::array<double, 6>& values) : v_(values) {
  check_block(v_, 0);
  check_block(v_, 3);
}

MlpModel::MlpModel(std::vector<std::size_t> dims) : dims_(std::move(dims)) {
  if (dims_.size() < 2 || dims_.front() != 6 || dims_.back() != 1 ||
      std::find(dims_.begin(), dims_.end(), std::size_t{0}) != dims_.end()) {
    throw ContractError("regressor dims must start at 6, end at 1 and contain no zero");
  }
  std::size_t total = 0;
  for (std::size_t l = 0; l + 1 < dims_.size(); ++l) {
    offsets_.push_back(total);
    total += dims_[l + 1] * dims_[l] + dims_[l + 1];
  }
  params_ = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(total));
}

MlpModel MlpModel::initialized(std::vector<std::size_t> dims, std::uint64_t seed) {
  MlpModel m(std::move(dims));
  m.seed_ = seed;
  std::mt19937_64 rng(seed);
  for (std::size_t l = 0; l < m.layer_count(); ++l) {
    const double fan_in = static_cast<double>(m.dims_[l]);
    const double fan_out = static_cast<double>(m.dims_[l + 1]);
    const double limit = std::sqrt(6.0 / (fan_in + fan_out));
    std::uniform_real_distribution<double> dist(-limit, limit);
    const std::size_t count = m.dims_[l + 1] * m.dims_[l];
    for (std::size_t k = 0; k < count; ++k) {
      m.params_(static_cast<Eigen::Index>(m.offsets_[l] + k)) = dist(rng);
    }
  }
  return m;
}

void MlpModel::set_parameters(const Eigen::VectorXd& params) {
  if (params.size() != params_.size()) {
    throw ContractError("parameter vector has " + std::to_string(params.size()) +
                        " entries, model has " + std::to_string(params_.size()));
  }
  params_ = params;
  finite_ = params_.allFinite();
}

Eigen::Map<const Eigen::MatrixXd> MlpModel::weights(std::size_t layer) const {
  return {params_.data() + offsets_[layer], static_cast<Eigen::Index>(dims_[layer + 1]),
          static_cast<Eigen::Index>(dims_[layer])};
}

Eigen::Map<const Eigen::VectorXd> MlpModel::biases(std::size_t layer) const {
  return {params_.data() + bias_offset(layer), static_cast<Eigen::Index>(dims_[layer + 1])};
}

double forward(const MlpModel& model, const FeatureVector& features) {
  Eigen::MatrixXd x(6, 1);
  for (std::size_t r = 0; r < 6; ++r) x(static_cast<Eigen::Index>(r), 0) = features[r];
  return forward_batch(model, x)(0);
}

Eigen::VectorXd forward_batch(const MlpModel& model, const Eigen::MatrixXd& features) {
  check_features_matrix(model, features);
  const auto acts = run_forward(model, features);
  return (kHalfPi * acts.a.back().row(0)).transpose();
}

double mae_loss(std::span<const double> predictions, std::span<const double> targets) {
  if (predictions.empty() || predictions.size() != targets.size()) {
    throw ContractError("mae_loss needs equal, non-zero lengths (got " +
                        std::to_string(predictions.size()) + " and " +
                        std::to_string(targets.size()) + ")");
  }
  double sum = 0.0;
  for (std::size_t i = 0; i < predictions.size(); ++i) sum += std::abs(predictions[i] - targets[i]);
  return sum / static_cast<double>(predictions.size());
}

LossAndGradient backward(const MlpModel& model, const Eigen::MatrixXd& features,
                         const Eigen::VectorXd& targets) {
  check_features_matrix(model, features);
  const Eigen::Index batch = features.cols();
  if (batch == 0 || targets.size() != batch) {
    throw ContractError("backward needs a non-empty batch with one target per column");
  }
  const auto acts = run_forward(model, features);
  const std::size_t layers = model.layer_count();
  const Eigen::RowVectorXd s = acts.a.back().row(0);
  const Eigen::RowVectorXd pred = kHalfPi * s;
  const Eigen::RowVectorXd diff = pred - targets.transpose();

  LossAndGradient out;
  out.loss = diff.cwiseAbs().sum() / static_cast<double>(batch);
  out.gradient = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(model.parameter_count()));

  const double inv_b = 1.0 / static_cast<double>(batch);
  Eigen::MatrixXd delta(1, batch);
  for (Eigen::Index j = 0; j < batch; ++j) {
    const double d = diff(j);
    const double sign = d > 0.0 ? 1.0 : (d < 0.0 ? -1.0 : 0.0);
    delta(0, j) = sign * inv_b * kHalfPi * s(j) * (1.0 - s(j));
  }

  for (std::size_t l = layers; l-- > 0;) {
    const Eigen::MatrixXd& input = acts.a[l];
    const auto rows = static_cast<Eigen::Index>(model.dims()[l + 1]);
    const auto cols = static_cast<Eigen::Index>(model.dims()[l]);
    Eigen::Map<Eigen::MatrixXd> dw(out.gradient.data() + model.weight_offset(l), rows, cols);
    Eigen::Map<Eigen::VectorXd> db(out.gradient.data() + model.bias_offset(l), rows);
    dw.noalias() = delta * input.transpose();
    db = delta.rowwise().sum();
    if (l > 0) {
      Eigen::MatrixXd upstream = model.weights(l).transpose() * delta;
      delta = upstream.array() * (1.0 - input.array().square());
    }
  }
  return out;
}

std::string_view to_string(Optimizer o) noexcept {
  return o == Optimizer::adam ? "adam" : "sgd";
}

std::optional<Optimizer> parse_optimizer(std::string_view name) noexcept {
  if (name == "adam") return Optimizer::adam;
  if (name == "sgd") return Optimizer::sgd;
  return std::nullopt;
}

TrainResult train(std::span<const AlphaExample> examples, const TrainConfig& config) {
  if (examples.size() < kMinTrainingExamples) {
    throw InsufficientDataError("training needs at least " + std::to_string(kMinTrainingExamples) +
                                " examples, got " + std::to_string(examples.size()));
  }
  if (!(config.learning_rate > 0.0) || config.batch_size == 0 || config.epochs <= 0 ||
      !(config.validation_fraction > 0.0 && config.validation_fraction < 1.0)) {
    throw ContractError("train config needs positive learning rate, batch size, epochs and a "
                        "validation fraction in (0, 1)");
  }
  for (const auto& ex : examples) {
    if (!(ex.alpha >= 0.0 && ex.alpha <= kHalfPi)) {
      throw ContractError("training target outside [0, pi/2]");
    }
  }

  std::mt19937_64 rng(config.seed);
  std::vector<std::size_t> order(examples.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::shuffle(order.begin(), order.end(), rng);
  const auto n_val = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::round(config.validation_fraction *
                                             static_cast<double>(examples.size()))));
  std::vector<std::size_t> val_idx(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_val));
  std::vector<std::size_t> train_idx(order.begin() + static_cast<std::ptrdiff_t>(n_val), order.end());
  const Eigen::MatrixXd val_x = to_matrix(examples, val_idx);
  const Eigen::VectorXd val_t = to_targets(examples, val_idx);

  TrainResult result{MlpModel::initialized(config.dims, config.seed), {}, {}, 0.0,
                     train_idx.size(), val_idx.size()};
  MlpModel& model = result.model;
  Eigen::VectorXd params = model.parameters();
  Eigen::VectorXd m1 = Eigen::VectorXd::Zero(params.size());
  Eigen::VectorXd m2 = Eigen::VectorXd::Zero(params.size());
  constexpr double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
  long long step = 0;

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    std::shuffle(train_idx.begin(), train_idx.end(), rng);
    double loss_sum = 0.0;
    for (std::size_t start = 0; start < train_idx.size(); start += config.batch_size) {
      const std::size_t len = std::min(config.batch_size, train_idx.size() - start);
      const std::span<const std::size_t> batch(train_idx.data() + start, len);
      const auto lg = backward(model, to_matrix(examples, batch), to_targets(examples, batch));
      if (!std::isfinite(lg.loss) || !lg.gradient.allFinite()) {
        throw TrainingDivergedError(epoch, "training diverged at epoch " + std::to_string(epoch));
      }
      loss_sum += lg.loss * static_cast<double>(len);
      ++step;
      if (config.optimizer == Optimizer::adam) {
        m1 = beta1 * m1 + (1.0 - beta1) * lg.gradient;
        m2 = beta2 * m2 + (1.0 - beta2) * lg.gradient.cwiseAbs2();
        const double c1 = 1.0 - std::pow(beta1, static_cast<double>(step));
        const double c2 = 1.0 - std::pow(beta2, static_cast<double>(step));
        params.array() -= config.learning_rate * (m1.array() / c1) /
                          ((m2.array() / c2).sqrt() + eps);
      } else {
        params -= config.learning_rate * lg.gradient;
      }
      model.set_parameters(params);
    }
    const double train_mae = loss_sum / static_cast<double>(train_idx.size());
    if (!std::isfinite(train_mae) || !model.finite()) {
      throw TrainingDivergedError(epoch, "training diverged at epoch " + std::to_string(epoch));
    }
    const Eigen::VectorXd val_pred = forward_batch(model, val_x);
    const double val_mae = (val_pred - val_t).cwiseAbs().mean();
    result.train_loss.push_back(train_mae);
    result.validation_loss.push_back(val_mae);
  }
  result.final_validation_mae = result.validation_loss.back();
  return result;
}

std::string serialize_model(const MlpModel& model, std::string_view comment_header) {
  std::ostringstream out;
  out << "# lidarint alpha regressor\n" << comment_block(comment_header);
  out << "dims";
  for (auto d : model.dims()) out << ' ' << d;
  out << "\nactivation " << MlpModel::kActivation << "\noutput " << MlpModel::kOutput
      << "\nseed " << model.seed() << "\nparameters " << model.parameter_count() << '\n';
  for (std::size_t l = 0; l < model.layer_count(); ++l) {
    const auto w = model.weights(l);
    for (Eigen::Index r = 0; r < w.rows(); ++r) {
      for (Eigen::Index c = 0; c < w.cols(); ++c) {
        if (c) out << ' ';
        out << format_double(w(r, c));
      }
      out << '\n';
    }
    const auto b = model.biases(l);
    for (Eigen::Index r = 0; r < b.size(); ++r) {
      if (r) out << ' ';
      out << format_double(b(r));
    }
    out << '\n';
  }
  return out.str();
}

MlpModel parse_model(std::string_view text) {
  std::vector<std::size_t> dims;
  std::uint64_t seed = 0;
  std::optional<std::size_t> declared;
  std::vector<double> values;
  std::size_t line_no = 0;
  bool in_params = false;
  std::size_t pos = 0;
  while (pos < text.size()) {
    const auto eol = text.find('\n', pos);
    const auto line = text.substr(pos, eol == std::string_view::npos ? text.npos : eol - pos);
    pos = eol == std::string_view::npos ? text.size() : eol + 1;
    ++line_no;
    const std::string where = "model line " + std::to_string(line_no);
    if (!line.empty() && line.front() == '#') continue;
    const auto tok = split_ws(line);
    if (tok.empty()) continue;
    if (in_params) {
      for (auto t : tok) values.push_back(parse_double(t, where));
      continue;
    }
    if (tok[0] == "dims") {
      for (std::size_t i = 1; i < tok.size(); ++i) {
        const auto d = parse_int(tok[i], where);
        if (d <= 0) throw FormatError(where + ": layer width must be positive");
        dims.push_back(static_cast<std::size_t>(d));
      }
    } else if (tok[0] == "activation") {
      if (tok.size() != 2 || tok[1] != MlpModel::kActivation) {
        throw FormatError(where + ": unsupported activation");
      }
    } else if (tok[0] == "output") {
      if (tok.size() != 2 || tok[1] != MlpModel::kOutput) {
        throw FormatError(where + ": unsupported output squash");
      }
    } else if (tok[0] == "seed" && tok.size() == 2) {
      seed = static_cast<std::uint64_t>(parse_int(tok[1], where));
    } else if (tok[0] == "parameters" && tok.size() == 2) {
      declared = static_cast<std::size_t>(parse_int(tok[1], where));
      in_params = true;
    } else {
      throw FormatError(where + ": unexpected '" + std::string(tok[0]) + "'");
    }
  }
  if (dims.empty() || !declared) {
    throw FormatError("model file lacks a dims or parameters header");
  }
  MlpModel model = [&] {
    try {
      return MlpModel(dims);
    } catch (const ContractError& e) {
      throw FormatError(std::string("model header: ") + e.what());
    }
  }();
  if (*declared != model.parameter_count() || values.size() != model.parameter_count()) {
    throw FormatError("model dims imply " + std::to_string(model.parameter_count()) +
                      " parameters, header declares " + std::to_string(*declared) +
                      " and the block holds " + std::to_string(values.size()));
  }
  // File order is row-major per layer; the flat vector is column-major.
  Eigen::VectorXd params(static_cast<Eigen::Index>(values.size()));
  std::size_t k = 0;
  for (std::size_t l = 0; l < model.layer_count(); ++l) {
    const std::size_t rows = dims[l + 1], cols = dims[l];
    for (std::size_t r = 0; r < rows; ++r) {
      for (std::size_t c = 0; c < cols; ++c) {
        params(static_cast<Eigen::Index>(model.weight_offset(l) + c * rows + r)) = values[k++];
      }
    }
    for (std::size_t r = 0; r < rows; ++r) {
      params(static_cast<Eigen::Index>(model.bias_offset(l) + r)) = values[k++];
    }
  }
  model.set_parameters(params);
  model.set_seed(seed);
  if (!model.finite()) throw ModelCorruptError("model file holds non-finite parameters");
  return model;
}

void save_model(const MlpModel& model, const std::filesystem::path& path,
                std::string_view comment_header) {
  write_file_atomic(path, serialize_model(model, comment_header));
}

MlpModel load_model(const std::filesystem::path& path) {
  try {
    return parse_model(read_file_text(path));
  } catch (const FormatError& e) {
    throw FormatError("'" + path.string() + "': " + e.what());
  }
}

AlphaProvider regressor_alpha(const MlpModel& model) {
  if (!model.finite()) throw ModelCorruptError("model has non-finite parameters");
  return [&model](const UnitVector3& normal, const UnitVector3& beam) {
    return forward(model, FeatureVector(normal, beam));
  };
}

}  // namespace lidarint
