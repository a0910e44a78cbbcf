#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "ofi/data_io.hpp"
#include "ofi/hybrid.hpp"
#include "ofi/neural_net.hpp"

namespace ofi {

/// Hyperparameter axes. Architectures hold hidden widths only; the pipeline
/// appends its output head.
struct SweepSpace {
  std::vector<int> lags{1, 2, 5, 10};
  std::vector<std::vector<int>> architectures{
      {128, 64}, {32, 16}, {32, 32}, {128, 64, 32}, {64, 32, 16}};
  std::vector<Activation> activations{Activation::ReLU, Activation::Tanh, Activation::Sigmoid};
  std::vector<OptimizerKind> optimizers{OptimizerKind::Adam, OptimizerKind::SGD};

  std::size_t grid_size() const;
  void validate() const;
};

struct SweepConfig {
  int lag = 2;
  std::vector<int> hidden;
  Activation activation = Activation::ReLU;
  OptimizerKind optimizer = OptimizerKind::Adam;

  friend bool operator==(const SweepConfig&, const SweepConfig&) = default;
};

/// Hidden widths plus output head joined with '-', e.g. "32-16-2".
std::string architecture_label(const std::vector<int>& hidden, int head);

/// Full grid in lexicographic (lag, architecture, activation, optimizer) order.
std::vector<SweepConfig> enumerate_grid(const SweepSpace& space);

/// Latin-hypercube style subsample of k distinct grid points. Each axis value
/// appears floor(k/m) or ceil(k/m) times (m = axis size) whenever a distinct
/// assignment with those counts is found; k equal to the grid size returns a
/// seeded permutation of the grid.
std::vector<SweepConfig> lhs_sample(const SweepSpace& space, std::size_t k, std::uint64_t seed);

struct SweepDataset {
  std::string name;
  CountSeries series;
};

struct SweepOptions {
  ModelKind kind = ModelKind::Hybrid;
  /// Non-swept settings (epochs, batch size, threshold, ...). Its lag,
  /// hidden, activation and optimizer are replaced per cell.
  PipelineConfig base;
  double train_fraction = 0.8;
  std::uint64_t master_seed = 42;
  unsigned workers = 1;
};

struct SweepResult {
  SweepConfig config;
  std::size_t config_index = 0;
  std::size_t dataset_index = 0;
  std::string dataset;
  double mse = 0.0;
  double mae = 0.0;
  double r2 = 0.0;
  double accuracy = 0.0;
  double precision = 0.0;
  double runtime_s = 0.0;
  std::string status;  // "ok" or "error: ..."
  std::uint64_t seed = 0;

  bool ok() const { return status == "ok"; }
};

/// Per-cell seed; a pure function of its arguments.
std::uint64_t cell_seed(std::uint64_t master_seed, std::size_t config_index,
                        std::size_t dataset_index);

/// Trains on the first train_fraction of each dataset and evaluates one-step
/// predictions on the remainder. Results are ordered config-major, then
/// dataset, independent of worker count. Failed cells carry an error status.
std::vector<SweepResult> run_sweep(const std::vector<SweepConfig>& configs,
                                   const std::vector<SweepDataset>& datasets,
                                   const SweepOptions& options);

/// Columns lag,architecture,activation,optimizer,dataset,mse,mae,r2,accuracy,
/// precision,runtime_s,status,seed. Wall-clock times are written only when
/// `include_runtime` is set; otherwise runtime_s is NA so reruns are
/// byte-identical.
void write_sweep_csv(std::ostream& out, const std::vector<SweepResult>& results, ModelKind kind,
                     bool include_runtime);

struct BestConfig {
  std::string metric;
  SweepConfig config;
  double value = 0.0;
};

/// Best configuration per metric by the mean over datasets; only configs
/// whose cells all succeeded are ranked. Lower is better for mse/mae.
std::vector<BestConfig> best_configurations(const std::vector<SweepResult>& results);

/// Long-format dataset,metric,lag,architecture,value averaged over
/// activations and optimizers.
std::string heatmap_csv(const std::vector<SweepResult>& results, ModelKind kind);

}  // namespace ofi
