#include "ofi/ofi_signal.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <fmt/format.h>

namespace ofi {

void OfiParams::validate() const {
  if (window_h < 1) {
    throw std::invalid_argument(fmt::format("window_h must be >= 1, got {}", window_h));
  }
  if (!(threshold >= 0.0 && threshold < 1.0)) {
    throw std::invalid_argument(fmt::format("threshold must lie in [0, 1), got {}", threshold));
  }
}

std::string_view to_string(Signal s) {
  switch (s) {
    case Signal::Buy:
      return "BUY";
    case Signal::Sell:
      return "SELL";
    case Signal::Hold:
      return "HOLD";
  }
  return "HOLD";
}

std::optional<Signal> parse_signal(std::string_view s) {
  if (s == "BUY") return Signal::Buy;
  if (s == "SELL") return Signal::Sell;
  if (s == "HOLD") return Signal::Hold;
  return std::nullopt;
}

double ofi(double buy, double sell) {
  if (buy < 0.0 || sell < 0.0 || std::isnan(buy) || std::isnan(sell)) {
    throw std::invalid_argument(fmt::format("ofi: counts must be nonnegative ({}, {})", buy, sell));
  }
  const double total = buy + sell;
  if (total == 0.0) {
    return 0.0;
  }
  return (buy - sell) / total;
}

OfiSeries ofi_series(const CountSeries& counts, const OfiParams& params) {
  params.validate();
  const auto h = static_cast<std::size_t>(params.window_h);
  if (counts.size() < h) {
    throw std::invalid_argument(
        fmt::format("series of {} rows is shorter than window {}", counts.size(), h));
  }
  OfiSeries out;
  out.timestamps.reserve(counts.size() - h + 1);
  out.values.reserve(counts.size() - h + 1);
  // Integer running sums keep the window totals exact.
  std::int64_t buy = 0;
  std::int64_t sell = 0;
  for (std::size_t i = 0; i < counts.size(); ++i) {
    buy += counts[i].buy;
    sell += counts[i].sell;
    if (i >= h) {
      buy -= counts[i - h].buy;
      sell -= counts[i - h].sell;
    }
    if (i + 1 >= h) {
      out.timestamps.push_back(counts[i].timestamp);
      out.values.push_back(ofi(static_cast<double>(buy), static_cast<double>(sell)));
    }
  }
  return out;
}

Signal signal(double ofi_value, double threshold) {
  if (ofi_value > threshold) return Signal::Buy;
  if (ofi_value < -threshold) return Signal::Sell;
  return Signal::Hold;
}

double clamp_ofi(double value) {
  if (std::isnan(value)) return 0.0;
  return std::clamp(value, -1.0, 1.0);
}

}  // namespace ofi
