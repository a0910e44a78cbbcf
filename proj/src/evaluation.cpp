#include "ofi/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <stdexcept>

#include <fmt/format.h>

#include "ofi/csv.hpp"

namespace ofi {

namespace {

void check_pair(std::span<const double> a, std::span<const double> b, std::string_view what) {
  if (a.size() != b.size()) {
    throw std::invalid_argument(
        fmt::format("{}: length mismatch ({} vs {})", what, a.size(), b.size()));
  }
  if (a.empty()) throw std::invalid_argument(fmt::format("{}: empty input", what));
}

constexpr std::string_view kCsvHeader = "dataset,model,mse,mae,r2,accuracy,precision";

}  // namespace

double mse(std::span<const double> actual, std::span<const double> predicted) {
  check_pair(actual, predicted, "mse");
  double sum = 0.0;
  for (std::size_t i = 0; i < actual.size(); ++i) {
    const double d = actual[i] - predicted[i];
    sum += d * d;
  }
  return sum / static_cast<double>(actual.size());
}

double mae(std::span<const double> actual, std::span<const double> predicted) {
  check_pair(actual, predicted, "mae");
  double sum = 0.0;
  for (std::size_t i = 0; i < actual.size(); ++i) sum += std::abs(actual[i] - predicted[i]);
  return sum / static_cast<double>(actual.size());
}

double r_squared(std::span<const double> actual, std::span<const double> predicted) {
  check_pair(actual, predicted, "r_squared");
  double mean = 0.0;
  for (double a : actual) mean += a;
  mean /= static_cast<double>(actual.size());
  double ss_tot = 0.0;
  double ss_res = 0.0;
  for (std::size_t i = 0; i < actual.size(); ++i) {
    ss_tot += (actual[i] - mean) * (actual[i] - mean);
    ss_res += (actual[i] - predicted[i]) * (actual[i] - predicted[i]);
  }
  if (ss_tot == 0.0) {
    throw std::domain_error("r_squared: actual values have zero variance");
  }
  return 1.0 - ss_res / ss_tot;
}

std::size_t class_index(Signal s) {
  switch (s) {
    case Signal::Buy:
      return 0;
    case Signal::Sell:
      return 1;
    case Signal::Hold:
      return 2;
  }
  return 2;
}

std::size_t Confusion::total() const {
  std::size_t n = 0;
  for (const auto& row : counts)
    for (auto c : row) n += c;
  return n;
}

std::size_t Confusion::correct() const { return counts[0][0] + counts[1][1] + counts[2][2]; }

IntensityMetrics intensity_metrics(std::span<const Signal> actual, std::span<const Signal> predicted,
                                   PrecisionAverage average) {
  if (actual.size() != predicted.size()) {
    throw std::invalid_argument(fmt::format("intensity_metrics: length mismatch ({} vs {})",
                                            actual.size(), predicted.size()));
  }
  if (actual.empty()) throw std::invalid_argument("intensity_metrics: empty input");
  IntensityMetrics m;
  for (std::size_t i = 0; i < actual.size(); ++i) {
    ++m.confusion.counts[class_index(actual[i])][class_index(predicted[i])];
  }
  const auto total = static_cast<double>(m.confusion.total());
  m.accuracy = static_cast<double>(m.confusion.correct()) / total;

  // Sums in long double so simple ratios such as (1 + 2/3) / 2 round to the
  // nearest double.
  long double macro_sum = 0.0L;
  long double weighted_sum = 0.0L;
  long double weight_total = 0.0L;
  int present = 0;
  for (std::size_t c = 0; c < 3; ++c) {
    std::size_t predicted_c = 0;
    std::size_t support = 0;
    for (std::size_t a = 0; a < 3; ++a) predicted_c += m.confusion.counts[a][c];
    for (std::size_t p = 0; p < 3; ++p) support += m.confusion.counts[c][p];
    if (predicted_c == 0) continue;
    const long double prec = static_cast<long double>(m.confusion.counts[c][c]) /
                             static_cast<long double>(predicted_c);
    m.per_class_precision[c] = static_cast<double>(prec);
    macro_sum += prec;
    ++present;
    weighted_sum += prec * static_cast<long double>(support);
    weight_total += static_cast<long double>(support);
  }
  switch (average) {
    case PrecisionAverage::Macro:
      m.precision = static_cast<double>(macro_sum / present);
      break;
    case PrecisionAverage::Micro:
      m.precision = m.accuracy;
      break;
    case PrecisionAverage::Weighted:
      m.precision = weight_total > 0.0L ? static_cast<double>(weighted_sum / weight_total) : 0.0;
      break;
  }
  return m;
}

std::string model_label(ModelKind kind) {
  switch (kind) {
    case ModelKind::VarOnly:
      return "VAR Only";
    case ModelKind::FnnOnly:
      return "FNN Only";
    case ModelKind::Hybrid:
      return "Hybrid VAR-FNN";
  }
  return "model";
}

EvalReport evaluate(const std::vector<PredictionRecord>& records, std::string dataset,
                    std::string model, PrecisionAverage average) {
  if (records.empty()) throw std::invalid_argument("evaluate: no predictions");
  std::vector<double> actual;
  std::vector<double> predicted;
  std::vector<Signal> actual_sig;
  std::vector<Signal> predicted_sig;
  for (const auto& r : records) {
    actual.push_back(r.actual_ofi);
    predicted.push_back(r.predicted_ofi);
    actual_sig.push_back(r.actual_signal);
    predicted_sig.push_back(r.predicted_signal);
  }
  EvalReport rep;
  rep.dataset = std::move(dataset);
  rep.model = std::move(model);
  rep.mse = ofi::mse(actual, predicted);
  rep.mae = ofi::mae(actual, predicted);
  rep.r2 = r_squared(actual, predicted);
  const auto im = intensity_metrics(actual_sig, predicted_sig, average);
  rep.intensity_accuracy = im.accuracy;
  rep.intensity_precision = im.precision;
  rep.confusion = im.confusion;
  return rep;
}

RenderedComparison render_comparison(const std::vector<EvalReport>& reports) {
  std::vector<std::string> datasets;
  for (const auto& r : reports) {
    if (std::find(datasets.begin(), datasets.end(), r.dataset) == datasets.end()) {
      datasets.push_back(r.dataset);
    }
  }
  std::size_t dw = 8;
  std::size_t mw = 6;
  for (const auto& r : reports) {
    dw = std::max(dw, r.dataset.size());
    mw = std::max(mw, r.model.size());
  }
  RenderedComparison out;
  const auto header = fmt::format("{:<{}}  {:<{}}  {:>8}  {:>8}  {:>8}  {:>22}  {:>23}", "Dataset",
                                  dw, "Model", mw, "MSE", "MAE", "R^2", "Accuracy (Intensity)",
                                  "Precision (Intensity)");
  const std::string rule(header.size(), '-');
  out.table += header + "\n" + rule + "\n";
  out.csv += std::string(kCsvHeader) + "\n";
  for (const auto& ds : datasets) {
    bool first = true;
    for (const auto& r : reports) {
      if (r.dataset != ds) continue;
      out.table += fmt::format("{:<{}}  {:<{}}  {:>8.3f}  {:>8.3f}  {:>8.3f}  {:>21.2f}%  {:>22.2f}%\n",
                               first ? ds : "", dw, r.model, mw, r.mse, r.mae, r.r2,
                               100.0 * r.intensity_accuracy, 100.0 * r.intensity_precision);
      out.csv += fmt::format("{},{},{:.17g},{:.17g},{:.17g},{:.17g},{:.17g}\n", r.dataset, r.model,
                             r.mse, r.mae, r.r2, r.intensity_accuracy, r.intensity_precision);
      first = false;
    }
    out.table += rule + "\n";
  }
  return out;
}

std::vector<EvalReport> read_report_csv(std::istream& in) {
  std::string line;
  std::size_t line_no = 0;
  if (!csv::next_nonblank(in, line, line_no) || csv::split(line) != csv::split(kCsvHeader)) {
    throw DataError("report csv: unexpected header", line_no);
  }
  std::vector<EvalReport> out;
  while (csv::next_nonblank(in, line, line_no)) {
    const auto f = csv::split(line);
    if (f.size() != 7) {
      throw DataError(fmt::format("report csv line {}: expected 7 fields", line_no), line_no);
    }
    EvalReport r;
    r.dataset = std::string(f[0]);
    r.model = std::string(f[1]);
    double* dst[] = {&r.mse, &r.mae, &r.r2, &r.intensity_accuracy, &r.intensity_precision};
    for (std::size_t i = 0; i < 5; ++i) {
      const auto v = csv::parse_double(f[i + 2]);
      if (!v) throw DataError(fmt::format("report csv line {}: bad number", line_no), line_no);
      *dst[i] = *v;
    }
    out.push_back(std::move(r));
  }
  return out;
}

std::string confusion_csv(const Confusion& confusion) {
  static constexpr std::string_view kNames[] = {"BUY", "SELL", "HOLD"};
  std::string s = "actual\\predicted,BUY,SELL,HOLD\n";
  for (std::size_t a = 0; a < 3; ++a) {
    s += fmt::format("{},{},{},{}\n", kNames[a], confusion.counts[a][0], confusion.counts[a][1],
                     confusion.counts[a][2]);
  }
  return s;
}

}  // namespace ofi
