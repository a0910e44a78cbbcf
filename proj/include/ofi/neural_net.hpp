#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

namespace ofi {

enum class Activation { ReLU, Tanh, Sigmoid };
enum class OptimizerKind { Adam, SGD };

std::string_view to_string(Activation a);
std::string_view to_string(OptimizerKind o);
std::optional<Activation> parse_activation(std::string_view s);
std::optional<OptimizerKind> parse_optimizer(std::string_view s);

/// Dense network: input -> hidden layers (shared activation) -> identity output.
struct FnnTopology {
  int input_dim = 1;
  std::vector<int> hidden{32, 16};
  int output_dim = 1;
  Activation activation = Activation::ReLU;

  void validate() const;
  friend bool operator==(const FnnTopology&, const FnnTopology&) = default;
};

/// Affine standardization x' = (x - mean) / scale, per component.
struct Scaler {
  Eigen::VectorXd mean;
  Eigen::VectorXd scale;

  static Scaler identity(int dim);
  /// Column means and population standard deviations of `rows`; zero
  /// deviations become 1 so the transform stays invertible.
  static Scaler fit(const Eigen::MatrixXd& rows);

  Eigen::MatrixXd transform(const Eigen::MatrixXd& rows) const;
  Eigen::MatrixXd inverse(const Eigen::MatrixXd& rows) const;
};

struct DenseLayer {
  Eigen::MatrixXd W;  // out x in
  Eigen::VectorXd b;  // out
};

using Gradients = std::vector<DenseLayer>;

struct FnnModel {
  FnnTopology topology;
  std::vector<DenseLayer> layers;
  Scaler input_scaler;
  Scaler target_scaler;

  /// Glorot-uniform weights, zero biases, identity scalers.
  static FnnModel initialize(const FnnTopology& topology, std::uint64_t seed);

  std::size_t parameter_count() const;
  /// Flat parameter view: layer by layer, W row-major then b.
  double& parameter(std::size_t index);
  double parameter(std::size_t index) const;

  /// Makes the network output exactly zero in the original target units.
  void zero_output();

  void validate() const;
};

/// Rows are samples.
struct Dataset {
  Eigen::MatrixXd inputs;   // n x input_dim
  Eigen::MatrixXd targets;  // n x output_dim

  Eigen::Index size() const { return inputs.rows(); }
};

/// Full prediction for one sample: scale input, run network, unscale output.
Eigen::VectorXd forward(const FnnModel& model, const Eigen::VectorXd& input);

/// Row-wise `forward` for a batch of samples.
Eigen::MatrixXd predict(const FnnModel& model, const Eigen::MatrixXd& inputs);

/// Network only, no scalers. Rows are samples.
Eigen::MatrixXd network_output(const FnnModel& model, const Eigen::MatrixXd& inputs);

/// Pre-activations of every layer (features x samples), for diagnostics.
std::vector<Eigen::MatrixXd> pre_activations(const FnnModel& model,
                                             const Eigen::MatrixXd& inputs);

/// Mean squared error over every output component.
double loss(const Eigen::MatrixXd& predictions, const Eigen::MatrixXd& targets);

/// Exact gradient of loss(network_output(model, batch.inputs), batch.targets)
/// with respect to every weight and bias. Works in network space: the batch
/// is expected to be already standardized.
Gradients backward(const FnnModel& model, const Dataset& batch);

struct TrainConfig {
  int epochs = 50;
  int batch_size = 8;
  OptimizerKind optimizer = OptimizerKind::Adam;
  /// Unset means the optimizer's customary default (Adam 0.001, SGD 0.01).
  std::optional<double> learning_rate;
  bool early_stopping = true;
  int patience = 5;
  double validation_fraction = 0.2;
  std::uint64_t seed = 42;

  double effective_learning_rate() const;
  void validate() const;
};

struct TrainingTrace {
  std::vector<double> train_loss;
  std::vector<double> val_loss;  // NaN entries when early stopping is off
  int stopped_epoch = 0;         // epochs executed
  int best_epoch = 0;            // 1-based epoch whose parameters were kept
  std::vector<std::string> warnings;
};

struct TrainResult {
  FnnModel model;
  TrainingTrace trace;
};

/// Mini-batch training on raw (unstandardized) data. Scalers are fitted on
/// the training slice; with early stopping the last validation_fraction of
/// the samples (in order) is held out and the best-epoch parameters restored.
TrainResult train(const Dataset& data, const FnnTopology& topology, const TrainConfig& config);

struct GradientCheckReport {
  double max_relative_error = 0.0;
  std::size_t worst_parameter = 0;
  std::size_t checked = 0;
  bool passed = false;
};

/// Compares `analytic` (or backward() when omitted) with central differences
/// of the batch loss, parameter by parameter. The relative error of one entry
/// is |a - n| / max(|a|, |n|, kGradientFloor).
GradientCheckReport gradient_check(const FnnModel& model, const Dataset& batch, double step,
                                   double tolerance, const Gradients* analytic = nullptr);

inline constexpr double kGradientFloor = 1e-5;

void write_fnn_model(std::ostream& out, const FnnModel& model);
FnnModel read_fnn_model(std::istream& in);

void write_trace_csv(std::ostream& out, const TrainingTrace& trace);

}  // namespace ofi
