#include "ofi/data_io.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include <fmt/format.h>

#include "ofi/csv.hpp"
#include "ofi/rng.hpp"

namespace ofi {

namespace {

std::ifstream open_input(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw DataError(fmt::format("cannot open '{}'", path.string()));
  }
  return in;
}

void expect_header(std::istream& in, std::size_t& line_no, std::string_view expected) {
  std::string line;
  if (!csv::next_nonblank(in, line, line_no)) {
    throw DataError("missing header row", line_no);
  }
  const auto got = csv::split(line);
  const auto want = csv::split(expected);
  if (got != want) {
    throw DataError(fmt::format("line {}: expected header '{}', got '{}'", line_no, expected,
                                csv::trim(line)),
                    line_no);
  }
}

}  // namespace

void SyntheticSpec::validate() const {
  if (length < static_cast<std::size_t>(2 * kMaxSupportedLag + 1)) {
    throw std::invalid_argument(
        fmt::format("synthetic length {} below minimum {}", length, 2 * kMaxSupportedLag + 1));
  }
  if (!(base_intensity > 0.0) || !std::isfinite(base_intensity)) {
    throw std::invalid_argument("base_intensity must be positive");
  }
  if (!(linear_strength >= 0.0 && linear_strength < 1.0)) {
    throw std::invalid_argument("linear_strength must lie in [0, 1)");
  }
  if (!(nonlinear_strength >= 0.0) || !std::isfinite(nonlinear_strength)) {
    throw std::invalid_argument("nonlinear_strength must be nonnegative");
  }
}

CountSeries read_counts_csv(std::istream& in) {
  std::size_t line_no = 0;
  expect_header(in, line_no, "timestamp,buy_orders,sell_orders");
  static constexpr std::string_view kColumns[] = {"timestamp", "buy_orders", "sell_orders"};

  CountSeries series;
  std::string line;
  while (csv::next_nonblank(in, line, line_no)) {
    const auto fields = csv::split(line);
    if (fields.size() != 3) {
      throw DataError(fmt::format("line {}: expected 3 fields, got {}", line_no, fields.size()),
                      line_no);
    }
    std::int64_t values[3];
    for (std::size_t i = 0; i < 3; ++i) {
      const auto v = csv::parse_int(fields[i]);
      if (!v) {
        throw DataError(fmt::format("line {}, column {}: not an integer: '{}'", line_no,
                                    kColumns[i], fields[i]),
                        line_no);
      }
      values[i] = *v;
    }
    for (std::size_t i = 1; i < 3; ++i) {
      if (values[i] < 0) {
        throw DataError(fmt::format("line {}, column {}: negative count {}", line_no,
                                    kColumns[i], values[i]),
                        line_no);
      }
    }
    if (!series.empty() && values[0] != series.back().timestamp + 1) {
      throw DataError(fmt::format("line {}, column timestamp: expected {} (unit stride), got {}",
                                  line_no, series.back().timestamp + 1, values[0]),
                      line_no);
    }
    series.push_back({values[0], values[1], values[2]});
  }
  if (series.empty()) {
    throw DataError("empty series", line_no);
  }
  return series;
}

CountSeries load_counts_csv(const std::filesystem::path& path) {
  auto in = open_input(path);
  try {
    return read_counts_csv(in);
  } catch (const DataError& e) {
    throw DataError(fmt::format("{}: {}", path.string(), e.what()), e.line());
  }
}

void write_counts_csv(std::ostream& out, const CountSeries& series) {
  out << "timestamp,buy_orders,sell_orders\n";
  for (const auto& row : series) {
    out << row.timestamp << ',' << row.buy << ',' << row.sell << '\n';
  }
}

void save_counts_csv(const std::filesystem::path& path, const CountSeries& series) {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw std::runtime_error(fmt::format("cannot write '{}'", path.string()));
  }
  write_counts_csv(out, series);
  if (!out) {
    throw std::runtime_error(fmt::format("write failed for '{}'", path.string()));
  }
}

void validate_series(const CountSeries& series) {
  for (std::size_t i = 0; i < series.size(); ++i) {
    const auto& r = series[i];
    if (r.buy < 0 || r.sell < 0) {
      throw DataError(fmt::format("row {}: negative count", i));
    }
    if (i > 0 && r.timestamp != series[i - 1].timestamp + 1) {
      throw DataError(fmt::format("row {}: timestamps must increase with unit stride", i));
    }
  }
}

std::vector<TradeEvent> read_trades_csv(std::istream& in) {
  std::size_t line_no = 0;
  expect_header(in, line_no, "timestamp,side");
  std::vector<TradeEvent> events;
  std::string line;
  while (csv::next_nonblank(in, line, line_no)) {
    const auto fields = csv::split(line);
    if (fields.size() != 2) {
      throw DataError(fmt::format("line {}: expected 2 fields, got {}", line_no, fields.size()),
                      line_no);
    }
    const auto ts = csv::parse_double(fields[0]);
    if (!ts || !std::isfinite(*ts)) {
      throw DataError(fmt::format("line {}, column timestamp: not a number: '{}'", line_no,
                                  fields[0]),
                      line_no);
    }
    TradeSide side;
    if (fields[1] == "BUY") {
      side = TradeSide::Buy;
    } else if (fields[1] == "SELL") {
      side = TradeSide::Sell;
    } else {
      throw DataError(fmt::format("line {}, column side: expected BUY or SELL, got '{}'", line_no,
                                  fields[1]),
                      line_no);
    }
    events.push_back({*ts, side});
  }
  return events;
}

std::vector<TradeEvent> load_trades_csv(const std::filesystem::path& path) {
  auto in = open_input(path);
  try {
    return read_trades_csv(in);
  } catch (const DataError& e) {
    throw DataError(fmt::format("{}: {}", path.string(), e.what()), e.line());
  }
}

CountSeries aggregate_trades(const std::vector<TradeEvent>& events, double bucket_seconds) {
  if (!(bucket_seconds > 0.0) || !std::isfinite(bucket_seconds)) {
    throw std::invalid_argument("bucket size must be positive");
  }
  if (events.empty()) {
    return {};
  }
  for (std::size_t i = 1; i < events.size(); ++i) {
    if (events[i].timestamp < events[i - 1].timestamp) {
      throw std::invalid_argument(fmt::format("trade events not sorted at position {}", i));
    }
  }
  auto bucket_of = [&](double t) {
    return static_cast<std::int64_t>(std::floor(t / bucket_seconds));
  };
  const std::int64_t first = bucket_of(events.front().timestamp);
  const std::int64_t last = bucket_of(events.back().timestamp);

  CountSeries out(static_cast<std::size_t>(last - first + 1));
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i].timestamp = first + static_cast<std::int64_t>(i);
  }
  for (const auto& e : events) {
    auto& row = out[static_cast<std::size_t>(bucket_of(e.timestamp) - first)];
    (e.side == TradeSide::Buy ? row.buy : row.sell) += 1;
  }
  return out;
}

CountSeries generate_synthetic(const SyntheticSpec& spec) {
  spec.validate();
  Rng rng(spec.seed);
  CountSeries out;
  out.reserve(spec.length);
  double z1 = 0.0;  // z_{t-1}
  double z2 = 0.0;  // z_{t-2}
  for (std::size_t t = 0; t < spec.length; ++t) {
    const double linear = (1.0 - kSecondLagShare) * z1 + kSecondLagShare * z2;
    const double drive = spec.linear_strength * linear -
                         spec.nonlinear_strength * std::tanh(kNonlinearGain * z1 * z2);
    const double buy_rate = spec.base_intensity * std::max(kMinIntensityMultiplier, 1.0 + drive);
    const double sell_rate = spec.base_intensity * std::max(kMinIntensityMultiplier, 1.0 - drive);
    const std::int64_t buy = rng.poisson(buy_rate);
    const std::int64_t sell = rng.poisson(sell_rate);
    out.push_back({static_cast<std::int64_t>(t), buy, sell});
    z2 = z1;
    z1 = static_cast<double>(buy - sell) / static_cast<double>(buy + sell + 1);
  }
  return out;
}

std::string describe(const SyntheticSpec& spec) {
  return fmt::format(
      "length={}\nseed={}\nbase_intensity={:.17g}\nlinear_strength={:.17g}\n"
      "nonlinear_strength={:.17g}\n",
      spec.length, spec.seed, spec.base_intensity, spec.linear_strength,
      spec.nonlinear_strength);
}

std::size_t split_point(std::size_t n, double train_fraction) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
    throw std::invalid_argument("train fraction must lie in (0, 1)");
  }
  const auto cut = static_cast<std::size_t>(std::floor(train_fraction * static_cast<double>(n) + 1e-9));
  if (cut == 0 || cut >= n) {
    throw std::invalid_argument(
        fmt::format("train fraction {} leaves an empty partition of {} rows", train_fraction, n));
  }
  return cut;
}

}  // namespace ofi
