#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace ofi {

/// Per-interval order counts. `timestamp` is an integer interval index.
struct OrderCounts {
  std::int64_t timestamp = 0;
  std::int64_t buy = 0;
  std::int64_t sell = 0;

  friend bool operator==(const OrderCounts&, const OrderCounts&) = default;
};

using CountSeries = std::vector<OrderCounts>;

enum class TradeSide { Buy, Sell };

struct TradeEvent {
  double timestamp = 0.0;  // epoch seconds
  TradeSide side = TradeSide::Buy;
};

/// Largest VAR lag the tooling is expected to handle; bounds synthetic lengths.
inline constexpr int kMaxSupportedLag = 10;

/// Parameters of the synthetic order-flow generator.
///
/// Each side draws Poisson counts. With z_t = (buy - sell) / (buy + sell + 1)
/// the buy intensity is base_intensity * (1 + drive_t), where
///   drive_t = linear_strength * (0.7 z_{t-1} + 0.3 z_{t-2})
///           - nonlinear_strength * tanh(25 z_{t-1} z_{t-2})
/// and the sell intensity uses 1 - drive_t. Both multipliers are floored at
/// kMinIntensityMultiplier. The tanh term pushes against runs of same-signed
/// imbalance; it is nearly orthogonal to any linear function of the lags.
struct SyntheticSpec {
  std::size_t length = 3000;
  std::uint64_t seed = 42;
  double base_intensity = 30.0;
  double linear_strength = 0.25;
  double nonlinear_strength = 0.25;

  void validate() const;
};

inline constexpr double kSecondLagShare = 0.3;
inline constexpr double kNonlinearGain = 25.0;
inline constexpr double kMinIntensityMultiplier = 0.05;

/// Thrown for malformed input files; `line` is 1-based (0 if not applicable).
class DataError : public std::runtime_error {
 public:
  DataError(const std::string& what, std::size_t line = 0)
      : std::runtime_error(what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

// CSV with header timestamp,buy_orders,sell_orders.
CountSeries load_counts_csv(const std::filesystem::path& path);
CountSeries read_counts_csv(std::istream& in);
void write_counts_csv(std::ostream& out, const CountSeries& series);
void save_counts_csv(const std::filesystem::path& path, const CountSeries& series);

/// Checks nonnegative counts and unit-stride timestamps; throws DataError.
void validate_series(const CountSeries& series);

// CSV with header timestamp,side; side is BUY or SELL.
std::vector<TradeEvent> load_trades_csv(const std::filesystem::path& path);
std::vector<TradeEvent> read_trades_csv(std::istream& in);

/// Buckets sorted trade events into intervals of `bucket_seconds`. The
/// timestamp of each output row is floor(t / bucket_seconds); empty buckets
/// between the first and last event are emitted as (0, 0).
CountSeries aggregate_trades(const std::vector<TradeEvent>& events, double bucket_seconds);

CountSeries generate_synthetic(const SyntheticSpec& spec);

/// key=value record of a synthetic spec (sidecar format).
std::string describe(const SyntheticSpec& spec);

/// First floor(train_fraction * n) rows and the remainder, order preserved.
template <typename T>
std::pair<std::vector<T>, std::vector<T>> chronological_split(const std::vector<T>& series,
                                                              double train_fraction);

std::size_t split_point(std::size_t n, double train_fraction);

template <typename T>
std::pair<std::vector<T>, std::vector<T>> chronological_split(const std::vector<T>& series,
                                                              double train_fraction) {
  const auto cut = static_cast<std::ptrdiff_t>(split_point(series.size(), train_fraction));
  return {std::vector<T>(series.begin(), series.begin() + cut),
          std::vector<T>(series.begin() + cut, series.end())};
}

}  // namespace ofi
