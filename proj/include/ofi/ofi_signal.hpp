#pragma once

#include <cstdint>
#include <optional>
#include <string_view>
#include <vector>

#include "ofi/data_io.hpp"

namespace ofi {

/// Window length and signal threshold.
///
/// Note that the usual notation reuses one symbol for the present time index
/// and the threshold; here they are `time index` (the row position) and
/// `threshold`.
struct OfiParams {
  int window_h = 1;
  double threshold = 0.1;

  void validate() const;
};

struct OfiSeries {
  std::vector<std::int64_t> timestamps;
  std::vector<double> values;
};

enum class Signal { Sell = 0, Hold = 1, Buy = 2 };

inline constexpr Signal kAllSignals[] = {Signal::Buy, Signal::Sell, Signal::Hold};

std::string_view to_string(Signal s);
std::optional<Signal> parse_signal(std::string_view s);

/// Order flow imbalance (buy - sell) / (buy + sell). An empty window
/// (buy + sell == 0) yields 0, which signals HOLD.
double ofi(double buy, double sell);

/// OFI over the trailing `window_h` intervals; the value at position i uses
/// rows i - window_h + 1 .. i. Output length is n - window_h + 1.
OfiSeries ofi_series(const CountSeries& counts, const OfiParams& params);

/// BUY if value > threshold, SELL if value < -threshold, otherwise HOLD.
Signal signal(double ofi_value, double threshold);

/// Restricts a model output to [-1, 1]. NaN maps to 0.
double clamp_ofi(double value);

}  // namespace ofi
