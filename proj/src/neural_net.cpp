#include "ofi/neural_net.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <limits>
#include <numeric>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include <fmt/format.h>

#include "ofi/csv.hpp"
#include "ofi/data_io.hpp"
#include "ofi/rng.hpp"

namespace ofi {

namespace {

constexpr std::string_view kFnnMagic = "ofi-fnn-model";
constexpr int kFnnFormatVersion = 1;
constexpr double kAdamBeta1 = 0.9;
constexpr double kMomentFloor = 1e-300;
constexpr double kAdamBeta2 = 0.999;
constexpr double kAdamEpsilon = 1e-8;

Eigen::MatrixXd activate(Activation a, const Eigen::MatrixXd& z) {
  switch (a) {
    case Activation::ReLU:
      return z.cwiseMax(0.0);
    case Activation::Tanh:
      return z.array().tanh().matrix();
    case Activation::Sigmoid:
      return (1.0 / (1.0 + (-z.array()).exp())).matrix();
  }
  return z;
}

// Derivative expressed through pre-activation z and activation value h.
Eigen::MatrixXd activation_derivative(Activation a, const Eigen::MatrixXd& z,
                                      const Eigen::MatrixXd& h) {
  switch (a) {
    case Activation::ReLU:
      // Subgradient at exactly 0 is 0.
      return (z.array() > 0.0).cast<double>().matrix();
    case Activation::Tanh:
      return (1.0 - h.array().square()).matrix();
    case Activation::Sigmoid:
      return (h.array() * (1.0 - h.array())).matrix();
  }
  return Eigen::MatrixXd::Ones(z.rows(), z.cols());
}

struct Cache {
  std::vector<Eigen::MatrixXd> pre;   // z for every layer
  std::vector<Eigen::MatrixXd> post;  // post[0] = input, post[l+1] = h_l
};

// x is features x samples.
Cache run_layers(const FnnModel& model, const Eigen::MatrixXd& x) {
  Cache c;
  c.post.push_back(x);
  const auto last = model.layers.size() - 1;
  for (std::size_t l = 0; l < model.layers.size(); ++l) {
    const auto& layer = model.layers[l];
    Eigen::MatrixXd z = layer.W * c.post.back();
    z.colwise() += layer.b;
    c.post.push_back(l == last ? z : activate(model.topology.activation, z));
    c.pre.push_back(std::move(z));
  }
  return c;
}

// Gradient with x, t as features x samples, network space.
Gradients backprop(const FnnModel& model, const Eigen::MatrixXd& x, const Eigen::MatrixXd& t) {
  const auto cache = run_layers(model, x);
  const double count = static_cast<double>(t.size());
  Eigen::MatrixXd delta = 2.0 * (cache.post.back() - t) / count;
  Gradients g(model.layers.size());
  for (std::size_t l = model.layers.size(); l-- > 0;) {
    g[l].W = delta * cache.post[l].transpose();
    g[l].b = delta.rowwise().sum();
    if (l > 0) {
      delta = (model.layers[l].W.transpose() * delta)
                  .cwiseProduct(activation_derivative(model.topology.activation, cache.pre[l - 1],
                                                      cache.post[l]));
    }
  }
  return g;
}

void check_dims(const FnnModel& model, const Dataset& d) {
  if (d.inputs.cols() != model.topology.input_dim) {
    throw std::invalid_argument(fmt::format("input dimension {} does not match topology {}",
                                            d.inputs.cols(), model.topology.input_dim));
  }
  if (d.targets.cols() != model.topology.output_dim) {
    throw std::invalid_argument(fmt::format("target dimension {} does not match topology {}",
                                            d.targets.cols(), model.topology.output_dim));
  }
  if (d.inputs.rows() != d.targets.rows()) {
    throw std::invalid_argument("inputs and targets have different sample counts");
  }
}

}  // namespace

std::string_view to_string(Activation a) {
  switch (a) {
    case Activation::ReLU:
      return "relu";
    case Activation::Tanh:
      return "tanh";
    case Activation::Sigmoid:
      return "sigmoid";
  }
  return "relu";
}

std::string_view to_string(OptimizerKind o) { return o == OptimizerKind::Adam ? "adam" : "sgd"; }

std::optional<Activation> parse_activation(std::string_view s) {
  if (s == "relu" || s == "ReLU") return Activation::ReLU;
  if (s == "tanh" || s == "Tanh") return Activation::Tanh;
  if (s == "sigmoid" || s == "Sigmoid") return Activation::Sigmoid;
  return std::nullopt;
}

std::optional<OptimizerKind> parse_optimizer(std::string_view s) {
  if (s == "adam" || s == "Adam") return OptimizerKind::Adam;
  if (s == "sgd" || s == "SGD") return OptimizerKind::SGD;
  return std::nullopt;
}

void FnnTopology::validate() const {
  if (input_dim < 1) throw std::invalid_argument("input_dim must be >= 1");
  if (output_dim != 1 && output_dim != 2) {
    throw std::invalid_argument(fmt::format("output_dim must be 1 or 2, got {}", output_dim));
  }
  for (int w : hidden) {
    if (w < 1) throw std::invalid_argument("hidden layer widths must be >= 1");
  }
}

Scaler Scaler::identity(int dim) {
  return {Eigen::VectorXd::Zero(dim), Eigen::VectorXd::Ones(dim)};
}

Scaler Scaler::fit(const Eigen::MatrixXd& rows) {
  if (rows.rows() == 0) throw std::invalid_argument("cannot fit scaler on empty data");
  Scaler s;
  s.mean = rows.colwise().mean().transpose();
  const Eigen::MatrixXd centered = rows.rowwise() - s.mean.transpose();
  s.scale = (centered.array().square().colwise().sum() / static_cast<double>(rows.rows()))
                .sqrt()
                .transpose();
  for (Eigen::Index i = 0; i < s.scale.size(); ++i) {
    if (!(s.scale(i) > 1e-12 * std::max(1.0, std::abs(s.mean(i))))) s.scale(i) = 1.0;
  }
  return s;
}

Eigen::MatrixXd Scaler::transform(const Eigen::MatrixXd& rows) const {
  return ((rows.rowwise() - mean.transpose()).array().rowwise() / scale.transpose().array())
      .matrix();
}

Eigen::MatrixXd Scaler::inverse(const Eigen::MatrixXd& rows) const {
  return ((rows.array().rowwise() * scale.transpose().array()).rowwise() +
          mean.transpose().array())
      .matrix();
}

FnnModel FnnModel::initialize(const FnnTopology& topology, std::uint64_t seed) {
  topology.validate();
  FnnModel m;
  m.topology = topology;
  m.input_scaler = Scaler::identity(topology.input_dim);
  m.target_scaler = Scaler::identity(topology.output_dim);
  Rng rng(seed);
  int fan_in = topology.input_dim;
  std::vector<int> widths = topology.hidden;
  widths.push_back(topology.output_dim);
  for (int fan_out : widths) {
    const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    DenseLayer layer{Eigen::MatrixXd(fan_out, fan_in), Eigen::VectorXd::Zero(fan_out)};
    for (int i = 0; i < fan_out; ++i) {
      for (int j = 0; j < fan_in; ++j) layer.W(i, j) = rng.uniform(-limit, limit);
    }
    m.layers.push_back(std::move(layer));
    fan_in = fan_out;
  }
  return m;
}

std::size_t FnnModel::parameter_count() const {
  std::size_t n = 0;
  for (const auto& l : layers) n += static_cast<std::size_t>(l.W.size() + l.b.size());
  return n;
}

double& FnnModel::parameter(std::size_t index) {
  for (auto& l : layers) {
    const auto w = static_cast<std::size_t>(l.W.size());
    if (index < w) {
      const auto cols = static_cast<std::size_t>(l.W.cols());
      return l.W(static_cast<Eigen::Index>(index / cols), static_cast<Eigen::Index>(index % cols));
    }
    index -= w;
    const auto b = static_cast<std::size_t>(l.b.size());
    if (index < b) return l.b(static_cast<Eigen::Index>(index));
    index -= b;
  }
  throw std::out_of_range("parameter index out of range");
}

double FnnModel::parameter(std::size_t index) const {
  return const_cast<FnnModel*>(this)->parameter(index);
}

void FnnModel::zero_output() {
  auto& last = layers.back();
  last.W.setZero();
  last.b.setZero();
  target_scaler.mean.setZero();
}

void FnnModel::validate() const {
  topology.validate();
  std::vector<int> widths = topology.hidden;
  widths.push_back(topology.output_dim);
  if (layers.size() != widths.size()) {
    throw std::invalid_argument("layer count does not match topology");
  }
  int fan_in = topology.input_dim;
  for (std::size_t l = 0; l < layers.size(); ++l) {
    if (layers[l].W.rows() != widths[l] || layers[l].W.cols() != fan_in ||
        layers[l].b.size() != widths[l]) {
      throw std::invalid_argument(fmt::format("layer {} shape does not match topology", l));
    }
    fan_in = widths[l];
  }
  auto check_scaler = [](const Scaler& s, int dim, std::string_view name) {
    if (s.mean.size() != dim || s.scale.size() != dim) {
      throw std::invalid_argument(fmt::format("{} scaler has wrong dimension", name));
    }
    for (Eigen::Index i = 0; i < s.scale.size(); ++i) {
      if (s.scale(i) == 0.0 || !std::isfinite(s.scale(i))) {
        throw std::invalid_argument(fmt::format("{} scaler is not invertible", name));
      }
    }
  };
  check_scaler(input_scaler, topology.input_dim, "input");
  check_scaler(target_scaler, topology.output_dim, "target");
}

Eigen::MatrixXd network_output(const FnnModel& model, const Eigen::MatrixXd& inputs) {
  if (inputs.cols() != model.topology.input_dim) {
    throw std::invalid_argument(fmt::format("input dimension {} does not match topology {}",
                                            inputs.cols(), model.topology.input_dim));
  }
  return run_layers(model, inputs.transpose()).post.back().transpose();
}

std::vector<Eigen::MatrixXd> pre_activations(const FnnModel& model,
                                             const Eigen::MatrixXd& inputs) {
  if (inputs.cols() != model.topology.input_dim) {
    throw std::invalid_argument("input dimension does not match topology");
  }
  return run_layers(model, inputs.transpose()).pre;
}

Eigen::MatrixXd predict(const FnnModel& model, const Eigen::MatrixXd& inputs) {
  return model.target_scaler.inverse(network_output(model, model.input_scaler.transform(inputs)));
}

Eigen::VectorXd forward(const FnnModel& model, const Eigen::VectorXd& input) {
  if (input.size() != model.topology.input_dim) {
    throw std::invalid_argument(fmt::format("input dimension {} does not match topology {}",
                                            input.size(), model.topology.input_dim));
  }
  return predict(model, input.transpose()).row(0).transpose();
}

double loss(const Eigen::MatrixXd& predictions, const Eigen::MatrixXd& targets) {
  if (predictions.size() == 0) throw std::invalid_argument("loss of empty input");
  if (predictions.rows() != targets.rows() || predictions.cols() != targets.cols()) {
    throw std::invalid_argument("predictions and targets differ in shape");
  }
  return (predictions - targets).squaredNorm() / static_cast<double>(predictions.size());
}

Gradients backward(const FnnModel& model, const Dataset& batch) {
  check_dims(model, batch);
  if (batch.size() == 0) throw std::invalid_argument("backward on empty batch");
  return backprop(model, batch.inputs.transpose(), batch.targets.transpose());
}

double TrainConfig::effective_learning_rate() const {
  if (learning_rate) return *learning_rate;
  return optimizer == OptimizerKind::Adam ? 0.001 : 0.01;
}

void TrainConfig::validate() const {
  if (epochs < 1) throw std::invalid_argument(fmt::format("epochs must be >= 1, got {}", epochs));
  if (batch_size < 1) throw std::invalid_argument("batch_size must be >= 1");
  if (!(effective_learning_rate() > 0.0)) throw std::invalid_argument("learning rate must be > 0");
  if (early_stopping) {
    if (patience < 1) throw std::invalid_argument("patience must be >= 1");
    if (!(validation_fraction > 0.0 && validation_fraction < 1.0)) {
      throw std::invalid_argument("validation fraction must lie in (0, 1)");
    }
  }
}

TrainResult train(const Dataset& data, const FnnTopology& topology, const TrainConfig& config) {
  topology.validate();
  config.validate();
  const auto n = data.size();
  if (n < 1) throw std::invalid_argument("training data is empty");
  if (config.early_stopping && n < 2) {
    throw std::invalid_argument("early stopping needs at least 2 samples");
  }

  Eigen::Index n_val = 0;
  if (config.early_stopping) {
    n_val = std::max<Eigen::Index>(
        1, static_cast<Eigen::Index>(std::floor(config.validation_fraction * static_cast<double>(n))));
    n_val = std::min(n_val, n - 1);
  }
  const Eigen::Index n_train = n - n_val;

  TrainResult result{FnnModel::initialize(topology, config.seed), {}};
  auto& model = result.model;
  auto& trace = result.trace;
  check_dims(model, data);

  const Eigen::MatrixXd train_in = data.inputs.topRows(n_train);
  const Eigen::MatrixXd train_out = data.targets.topRows(n_train);
  model.input_scaler = Scaler::fit(train_in);
  model.target_scaler = Scaler::fit(train_out);

  // features x samples, standardized.
  const Eigen::MatrixXd x_train = model.input_scaler.transform(train_in).transpose();
  const Eigen::MatrixXd t_train = model.target_scaler.transform(train_out).transpose();
  Eigen::MatrixXd x_val;
  Eigen::MatrixXd t_val;
  if (n_val > 0) {
    x_val = model.input_scaler.transform(data.inputs.bottomRows(n_val)).transpose();
    t_val = model.target_scaler.transform(data.targets.bottomRows(n_val)).transpose();
  }

  if (n_train > 1) {
    const bool same_inputs =
        (train_in.rowwise() - train_in.row(0)).cwiseAbs().maxCoeff() == 0.0;
    const bool same_targets =
        (train_out.rowwise() - train_out.row(0)).cwiseAbs().maxCoeff() == 0.0;
    if (same_inputs && !same_targets) {
      trace.warnings.emplace_back(
          "all training inputs are identical but targets differ; the network can only learn "
          "their mean");
    }
  }

  Rng rng(derive_seed(config.seed, 0x5348554646ULL));
  const double lr = config.effective_learning_rate();
  Gradients m1;
  Gradients m2;
  for (const auto& l : model.layers) {
    m1.push_back({Eigen::MatrixXd::Zero(l.W.rows(), l.W.cols()), Eigen::VectorXd::Zero(l.b.size())});
  }
  m2 = m1;
  long step = 0;

  auto eval = [&](const Eigen::MatrixXd& x, const Eigen::MatrixXd& t) {
    return (run_layers(model, x).post.back() - t).squaredNorm() / static_cast<double>(t.size());
  };

  std::vector<Eigen::Index> order(static_cast<std::size_t>(n_train));
  std::vector<DenseLayer> best_layers = model.layers;
  double best_val = std::numeric_limits<double>::infinity();
  int since_best = 0;
  const auto batch = static_cast<Eigen::Index>(config.batch_size);

  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    rng.shuffle(std::span<Eigen::Index>(order));
    for (Eigen::Index start = 0; start < n_train; start += batch) {
      const auto len = std::min(batch, n_train - start);
      const std::vector<Eigen::Index> idx(order.begin() + start, order.begin() + start + len);
      const Eigen::MatrixXd xb = x_train(Eigen::all, idx);
      const Eigen::MatrixXd tb = t_train(Eigen::all, idx);
      const auto g = backprop(model, xb, tb);
      ++step;
      for (std::size_t l = 0; l < model.layers.size(); ++l) {
        auto& layer = model.layers[l];
        if (config.optimizer == OptimizerKind::SGD) {
          layer.W -= lr * g[l].W;
          layer.b -= lr * g[l].b;
          continue;
        }
        const double c1 = 1.0 - std::pow(kAdamBeta1, static_cast<double>(step));
        const double c2 = 1.0 - std::pow(kAdamBeta2, static_cast<double>(step));
        m1[l].W = kAdamBeta1 * m1[l].W + (1.0 - kAdamBeta1) * g[l].W;
        m1[l].b = kAdamBeta1 * m1[l].b + (1.0 - kAdamBeta1) * g[l].b;
        m2[l].W = kAdamBeta2 * m2[l].W + (1.0 - kAdamBeta2) * g[l].W.cwiseAbs2();
        m2[l].b = kAdamBeta2 * m2[l].b + (1.0 - kAdamBeta2) * g[l].b.cwiseAbs2();
        // Moments of units with zero gradient decay into subnormals, which are
        // slow on most FPUs.
        for (auto* mom : {&m1[l], &m2[l]}) {
          mom->W = (mom->W.array().abs() < kMomentFloor).select(0.0, mom->W);
          mom->b = (mom->b.array().abs() < kMomentFloor).select(0.0, mom->b);
        }
        layer.W.array() -= lr * (m1[l].W.array() / c1) /
                           ((m2[l].W.array() / c2).sqrt() + kAdamEpsilon);
        layer.b.array() -= lr * (m1[l].b.array() / c1) /
                           ((m2[l].b.array() / c2).sqrt() + kAdamEpsilon);
      }
    }

    trace.train_loss.push_back(eval(x_train, t_train));
    trace.stopped_epoch = epoch;
    if (n_val == 0) {
      trace.val_loss.push_back(std::numeric_limits<double>::quiet_NaN());
      trace.best_epoch = epoch;
      continue;
    }
    const double v = eval(x_val, t_val);
    trace.val_loss.push_back(v);
    if (v < best_val) {
      best_val = v;
      best_layers = model.layers;
      trace.best_epoch = epoch;
      since_best = 0;
    } else if (++since_best >= config.patience) {
      break;
    }
  }
  if (n_val > 0) model.layers = std::move(best_layers);
  for (const auto& l : model.layers) {
    if (!l.W.allFinite() || !l.b.allFinite()) {
      throw std::runtime_error("training diverged: non-finite parameters");
    }
  }
  return result;
}

GradientCheckReport gradient_check(const FnnModel& model, const Dataset& batch, double step,
                                   double tolerance, const Gradients* analytic) {
  GradientCheckReport report;
  const Gradients computed = analytic ? *analytic : backward(model, batch);
  FnnModel probe = model;
  // Analytic gradients laid out in the same flat order as FnnModel::parameter.
  FnnModel grad_view = model;
  grad_view.layers = computed;
  const auto total = model.parameter_count();
  const Eigen::MatrixXd x = batch.inputs.transpose();
  const Eigen::MatrixXd t = batch.targets.transpose();
  auto batch_loss = [&]() {
    return (run_layers(probe, x).post.back() - t).squaredNorm() / static_cast<double>(t.size());
  };
  for (std::size_t i = 0; i < total; ++i) {
    double& theta = probe.parameter(i);
    const double saved = theta;
    theta = saved + step;
    const double up = batch_loss();
    theta = saved - step;
    const double down = batch_loss();
    theta = saved;
    const double numeric = (up - down) / (2.0 * step);
    const double a = grad_view.parameter(i);
    const double denom = std::max({std::abs(a), std::abs(numeric), kGradientFloor});
    const double rel = std::abs(a - numeric) / denom;
    if (rel > report.max_relative_error || std::isnan(rel)) {
      report.max_relative_error = std::isnan(rel) ? std::numeric_limits<double>::infinity() : rel;
      report.worst_parameter = i;
    }
  }
  report.checked = total;
  report.passed = report.max_relative_error < tolerance;
  return report;
}

void write_fnn_model(std::ostream& out, const FnnModel& model) {
  model.validate();
  auto values = [&](std::string_view key, const auto& m) {
    out << key;
    for (Eigen::Index i = 0; i < m.rows(); ++i)
      for (Eigen::Index j = 0; j < m.cols(); ++j) out << fmt::format(" {:.17g}", m(i, j));
    out << '\n';
  };
  const auto& t = model.topology;
  out << kFnnMagic << ' ' << kFnnFormatVersion << '\n';
  out << "input_dim " << t.input_dim << '\n';
  out << "hidden";
  for (int w : t.hidden) out << ' ' << w;
  out << '\n';
  out << "output_dim " << t.output_dim << '\n';
  out << "activation " << to_string(t.activation) << '\n';
  values("input_mean", model.input_scaler.mean);
  values("input_scale", model.input_scaler.scale);
  values("target_mean", model.target_scaler.mean);
  values("target_scale", model.target_scaler.scale);
  for (std::size_t l = 0; l < model.layers.size(); ++l) {
    values(fmt::format("W{}", l), model.layers[l].W);
    values(fmt::format("b{}", l), model.layers[l].b);
  }
}

FnnModel read_fnn_model(std::istream& in) {
  std::string line;
  std::size_t line_no = 0;
  auto fields_for = [&](std::string_view key) {
    if (!csv::next_nonblank(in, line, line_no)) {
      throw DataError(fmt::format("fnn model: missing '{}' line", key), line_no);
    }
    std::istringstream ss(line);
    std::string got;
    ss >> got;
    if (got != key) {
      throw DataError(fmt::format("fnn model line {}: expected '{}', got '{}'", line_no, key, got),
                      line_no);
    }
    std::vector<std::string> f;
    std::string tok;
    while (ss >> tok) f.push_back(tok);
    return f;
  };
  auto as_int = [&](const std::string& s) {
    const auto v = csv::parse_int(s);
    if (!v) throw DataError(fmt::format("fnn model line {}: bad integer '{}'", line_no, s), line_no);
    return static_cast<int>(*v);
  };
  auto single_int = [&](std::string_view key) {
    const auto f = fields_for(key);
    if (f.size() != 1) throw DataError(fmt::format("fnn model line {}: '{}' needs one value", line_no, key), line_no);
    return as_int(f[0]);
  };
  auto matrix = [&](std::string_view key, Eigen::Index rows, Eigen::Index cols) {
    const auto f = fields_for(key);
    if (f.size() != static_cast<std::size_t>(rows * cols)) {
      throw DataError(fmt::format("fnn model line {}: '{}' needs {} values, got {}", line_no, key,
                                  rows * cols, f.size()),
                      line_no);
    }
    Eigen::MatrixXd m(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i) {
      for (Eigen::Index j = 0; j < cols; ++j) {
        const auto v = csv::parse_double(f[static_cast<std::size_t>(i * cols + j)]);
        if (!v) throw DataError(fmt::format("fnn model line {}: bad number", line_no), line_no);
        m(i, j) = *v;
      }
    }
    return m;
  };

  const auto magic = fields_for(kFnnMagic);
  if (magic.size() != 1 || as_int(magic[0]) != kFnnFormatVersion) {
    throw DataError("fnn model: unsupported format version");
  }
  FnnModel m;
  m.topology.input_dim = single_int("input_dim");
  m.topology.hidden.clear();
  for (const auto& w : fields_for("hidden")) m.topology.hidden.push_back(as_int(w));
  m.topology.output_dim = single_int("output_dim");
  const auto act = fields_for("activation");
  if (act.size() != 1 || !parse_activation(act[0])) {
    throw DataError(fmt::format("fnn model line {}: unknown activation", line_no), line_no);
  }
  m.topology.activation = *parse_activation(act[0]);
  m.topology.validate();
  const int d = m.topology.input_dim;
  const int o = m.topology.output_dim;
  m.input_scaler.mean = matrix("input_mean", d, 1);
  m.input_scaler.scale = matrix("input_scale", d, 1);
  m.target_scaler.mean = matrix("target_mean", o, 1);
  m.target_scaler.scale = matrix("target_scale", o, 1);
  std::vector<int> widths = m.topology.hidden;
  widths.push_back(o);
  int fan_in = d;
  for (std::size_t l = 0; l < widths.size(); ++l) {
    DenseLayer layer;
    layer.W = matrix(fmt::format("W{}", l), widths[l], fan_in);
    layer.b = matrix(fmt::format("b{}", l), widths[l], 1);
    m.layers.push_back(std::move(layer));
    fan_in = widths[l];
  }
  m.validate();
  return m;
}

void write_trace_csv(std::ostream& out, const TrainingTrace& trace) {
  out << "epoch,train_loss,val_loss\n";
  for (std::size_t i = 0; i < trace.train_loss.size(); ++i) {
    const double v = trace.val_loss[i];
    out << (i + 1) << ',' << fmt::format("{:.17g}", trace.train_loss[i]) << ','
        << (std::isnan(v) ? std::string("NA") : fmt::format("{:.17g}", v)) << '\n';
  }
}

}  // namespace ofi
