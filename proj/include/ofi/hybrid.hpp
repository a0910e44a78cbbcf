#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "ofi/data_io.hpp"
#include "ofi/neural_net.hpp"
#include "ofi/ofi_signal.hpp"
#include "ofi/var_model.hpp"

namespace ofi {

enum class ModelKind { VarOnly, FnnOnly, Hybrid };

std::string_view to_string(ModelKind k);
std::optional<ModelKind> parse_model_kind(std::string_view s);

/// Settings shared by the three pipelines. The FNN output head (1 neuron for
/// OFI, 2 for buy/sell residuals) is appended to `hidden` by each pipeline.
struct PipelineConfig {
  int var_lag = 2;
  int fnn_lags = 0;  // 0 means "same as var_lag"
  std::vector<int> hidden{32, 16};
  Activation activation = Activation::ReLU;
  TrainConfig train;
  OfiParams ofi;

  int effective_fnn_lags() const { return fnn_lags > 0 ? fnn_lags : var_lag; }
  void validate() const;
};

struct ModelBundle {
  ModelKind kind = ModelKind::Hybrid;
  std::optional<VarModel> var_part;
  std::optional<FnnModel> fnn_part;
  PipelineConfig config;

  // Fit-time artifacts; not part of the persisted bundle.
  std::optional<FitDiagnostics> var_diagnostics;
  std::optional<TrainingTrace> trace;

  /// Rows of history needed before the first prediction.
  std::size_t warmup() const;
  void validate() const;
};

struct PredictionRecord {
  std::size_t index = 0;
  double actual_ofi = 0.0;
  double predicted_ofi = 0.0;  // clamped to [-1, 1]
  Signal actual_signal = Signal::Hold;
  Signal predicted_signal = Signal::Hold;

  friend bool operator==(const PredictionRecord&, const PredictionRecord&) = default;
};

/// VAR(p) on (buy, sell); predictions are OFI of the one-step forecast.
ModelBundle fit_var_only(const CountSeries& series, const PipelineConfig& config);

/// FNN from the flattened last q (buy, sell) rows to the next OFI value.
ModelBundle fit_fnn_only(const CountSeries& series, const PipelineConfig& config);

/// VAR(p), then an FNN from the last q residual rows to the next residual
/// row. Predicted orders are VAR forecast + predicted residual.
ModelBundle fit_hybrid(const CountSeries& series, const PipelineConfig& config);

ModelBundle fit_model(ModelKind kind, const CountSeries& series, const PipelineConfig& config);

/// Decomposed order forecast for one row of the hybrid pipeline.
struct OrderForecast {
  std::size_t index = 0;
  Eigen::Vector2d var_forecast = Eigen::Vector2d::Zero();
  Eigen::Vector2d residual = Eigen::Vector2d::Zero();  // zero for VAR_ONLY
  Eigen::Vector2d combined = Eigen::Vector2d::Zero();  // before the floor at 0
};

/// Order-level forecasts for rows max(warmup, eval_from)..n-1 of a VAR_ONLY
/// or HYBRID bundle. Each row sees only true history before it.
std::vector<OrderForecast> forecast_orders(const ModelBundle& bundle, const CountSeries& series,
                                           std::size_t eval_from = 0);

/// One-step-ahead rolling predictions for rows max(warmup, eval_from)..n-1.
std::vector<PredictionRecord> predict(const ModelBundle& bundle, const CountSeries& series,
                                      std::size_t eval_from = 0);

/// Bundle directory: manifest.txt plus var.txt and/or fnn.txt.
void save_bundle(const std::filesystem::path& dir, const ModelBundle& bundle);
ModelBundle load_bundle(const std::filesystem::path& dir);

void write_predictions_csv(std::ostream& out, const std::vector<PredictionRecord>& records);
std::vector<PredictionRecord> read_predictions_csv(std::istream& in);

}  // namespace ofi
