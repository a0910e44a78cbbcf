#pragma once

#include <array>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ofi/hybrid.hpp"
#include "ofi/ofi_signal.hpp"

namespace ofi {

double mse(std::span<const double> actual, std::span<const double> predicted);
double mae(std::span<const double> actual, std::span<const double> predicted);

/// 1 - SS_res / SS_tot with SS_tot taken about the mean of `actual`. May be
/// negative. Throws std::domain_error when `actual` has zero variance.
double r_squared(std::span<const double> actual, std::span<const double> predicted);

/// How per-class precision is combined into one number.
///  Macro: unweighted mean over classes that occur in the predictions.
///  Micro: pooled over all predictions (equals accuracy for single labels).
///  Weighted: mean over predicted-present classes weighted by actual support.
enum class PrecisionAverage { Macro, Micro, Weighted };

/// Class order used for every 3x3 table: BUY, SELL, HOLD.
std::size_t class_index(Signal s);

struct Confusion {
  std::array<std::array<std::size_t, 3>, 3> counts{};  // [actual][predicted]

  std::size_t total() const;
  std::size_t correct() const;
};

struct IntensityMetrics {
  double accuracy = 0.0;
  double precision = 0.0;
  std::array<std::optional<double>, 3> per_class_precision;  // empty when never predicted
  Confusion confusion;
};

IntensityMetrics intensity_metrics(std::span<const Signal> actual, std::span<const Signal> predicted,
                                   PrecisionAverage average = PrecisionAverage::Macro);

struct EvalReport {
  std::string dataset;
  std::string model;
  double mse = 0.0;
  double mae = 0.0;
  double r2 = 0.0;
  double intensity_accuracy = 0.0;
  double intensity_precision = 0.0;
  Confusion confusion;
};

/// Display label used in comparison tables ("VAR Only", "FNN Only", "Hybrid VAR-FNN").
std::string model_label(ModelKind kind);

EvalReport evaluate(const std::vector<PredictionRecord>& records, std::string dataset,
                    std::string model, PrecisionAverage average = PrecisionAverage::Macro);

struct RenderedComparison {
  std::string table;
  std::string csv;
};

/// Rows grouped by dataset (first-appearance order), then model. The table
/// uses 3 decimals and percentages; the CSV keeps full precision with columns
/// dataset,model,mse,mae,r2,accuracy,precision.
RenderedComparison render_comparison(const std::vector<EvalReport>& reports);

std::vector<EvalReport> read_report_csv(std::istream& in);

/// 3x3 CSV with labeled axes (rows actual, columns predicted).
std::string confusion_csv(const Confusion& confusion);

}  // namespace ofi
