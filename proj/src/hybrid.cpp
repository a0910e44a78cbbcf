#include "ofi/hybrid.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include <fmt/format.h>
#include <fmt/ranges.h>

#include "ofi/csv.hpp"

namespace ofi {

namespace {

constexpr std::string_view kBundleMagic = "ofi-bundle 1";
constexpr const char* kManifestFile = "manifest.txt";
constexpr const char* kVarFile = "var.txt";
constexpr const char* kFnnFile = "fnn.txt";

struct PrefixSums {
  std::vector<std::int64_t> buy{0};
  std::vector<std::int64_t> sell{0};

  explicit PrefixSums(const CountSeries& s) {
    for (const auto& r : s) {
      buy.push_back(buy.back() + r.buy);
      sell.push_back(sell.back() + r.sell);
    }
  }
  // Sum over rows [from, to).
  std::int64_t buy_sum(std::size_t from, std::size_t to) const { return buy[to] - buy[from]; }
  std::int64_t sell_sum(std::size_t from, std::size_t to) const { return sell[to] - sell[from]; }
};

double actual_ofi_at(const PrefixSums& ps, std::size_t t, std::size_t h) {
  return ofi(static_cast<double>(ps.buy_sum(t + 1 - h, t + 1)),
             static_cast<double>(ps.sell_sum(t + 1 - h, t + 1)));
}

// OFI over the window ending at t where row t is replaced by predicted orders.
double predicted_ofi_at(const PrefixSums& ps, std::size_t t, std::size_t h, double buy,
                        double sell) {
  const double b = static_cast<double>(ps.buy_sum(t + 1 - h, t)) + std::max(0.0, buy);
  const double s = static_cast<double>(ps.sell_sum(t + 1 - h, t)) + std::max(0.0, sell);
  return clamp_ofi(ofi(b, s));
}

// [x_{t-1}, x_{t-2}, ..., x_{t-q}] flattened, each row (buy, sell).
Eigen::RowVectorXd lag_features(const Eigen::MatrixXd& rows, Eigen::Index t, int q) {
  Eigen::RowVectorXd f(2 * q);
  for (int j = 0; j < q; ++j) f.segment(2 * j, 2) = rows.row(t - 1 - j);
  return f;
}

FnnTopology head_topology(const PipelineConfig& config, int output_dim) {
  return {2 * config.effective_fnn_lags(), config.hidden, output_dim, config.activation};
}

std::string join_ints(const std::vector<int>& v) { return fmt::format("{}", fmt::join(v, ",")); }

std::vector<int> parse_int_list(std::string_view s, std::string_view field) {
  std::vector<int> out;
  if (csv::trim(s).empty()) return out;
  for (auto part : csv::split(s)) {
    const auto v = csv::parse_int(part);
    if (!v) throw DataError(fmt::format("manifest field '{}': bad integer '{}'", field, part));
    out.push_back(static_cast<int>(*v));
  }
  return out;
}

}  // namespace

std::string_view to_string(ModelKind k) {
  switch (k) {
    case ModelKind::VarOnly:
      return "var";
    case ModelKind::FnnOnly:
      return "fnn";
    case ModelKind::Hybrid:
      return "hybrid";
  }
  return "hybrid";
}

std::optional<ModelKind> parse_model_kind(std::string_view s) {
  if (s == "var" || s == "VAR_ONLY") return ModelKind::VarOnly;
  if (s == "fnn" || s == "FNN_ONLY") return ModelKind::FnnOnly;
  if (s == "hybrid" || s == "HYBRID") return ModelKind::Hybrid;
  return std::nullopt;
}

void PipelineConfig::validate() const {
  if (var_lag < 1) throw std::invalid_argument("var_lag must be >= 1");
  if (fnn_lags < 0) throw std::invalid_argument("fnn_lags must be >= 1");
  for (int w : hidden) {
    if (w < 1) throw std::invalid_argument("hidden layer widths must be >= 1");
  }
  train.validate();
  ofi.validate();
}

std::size_t ModelBundle::warmup() const {
  const auto h1 = static_cast<std::size_t>(config.ofi.window_h - 1);
  const auto p = static_cast<std::size_t>(config.var_lag);
  const auto q = static_cast<std::size_t>(config.effective_fnn_lags());
  switch (kind) {
    case ModelKind::VarOnly:
      return std::max(p, h1);
    case ModelKind::FnnOnly:
      return std::max(q, h1);
    case ModelKind::Hybrid:
      return std::max(p + q, h1);
  }
  return 0;
}

void ModelBundle::validate() const {
  const bool want_var = kind != ModelKind::FnnOnly;
  const bool want_fnn = kind != ModelKind::VarOnly;
  if (var_part.has_value() != want_var || fnn_part.has_value() != want_fnn) {
    throw std::invalid_argument(
        fmt::format("bundle of kind '{}' has the wrong set of model parts", to_string(kind)));
  }
  if (var_part) {
    var_part->validate();
    if (var_part->p != config.var_lag) {
      throw std::invalid_argument(fmt::format(
          "field 'var_lag' ({}) inconsistent with VAR lag order {}", config.var_lag, var_part->p));
    }
    if (var_part->k() != 2) throw std::invalid_argument("VAR part must be bivariate");
  }
  if (fnn_part) {
    fnn_part->validate();
    const auto& t = fnn_part->topology;
    if (t.input_dim != 2 * config.effective_fnn_lags()) {
      throw std::invalid_argument(
          fmt::format("field 'fnn_lags' ({}) inconsistent with FNN input dimension {}",
                      config.effective_fnn_lags(), t.input_dim));
    }
    if (t.hidden != config.hidden) {
      throw std::invalid_argument(fmt::format(
          "field 'hidden' ({}) inconsistent with FNN layers ({})", join_ints(config.hidden),
          join_ints(t.hidden)));
    }
    if (t.activation != config.activation) {
      throw std::invalid_argument(fmt::format(
          "field 'activation' ({}) inconsistent with FNN activation ({})",
          to_string(config.activation), to_string(t.activation)));
    }
    const int expected_out = kind == ModelKind::Hybrid ? 2 : 1;
    if (t.output_dim != expected_out) {
      throw std::invalid_argument(fmt::format("field 'kind' ({}) inconsistent with FNN output "
                                              "dimension {}",
                                              to_string(kind), t.output_dim));
    }
  }
}

ModelBundle fit_var_only(const CountSeries& series, const PipelineConfig& config) {
  config.validate();
  auto fit = fit_var(series, config.var_lag);
  ModelBundle b;
  b.kind = ModelKind::VarOnly;
  b.config = config;
  b.var_part = std::move(fit.model);
  b.var_diagnostics = std::move(fit.diagnostics);
  return b;
}

ModelBundle fit_fnn_only(const CountSeries& series, const PipelineConfig& config) {
  config.validate();
  const int q = config.effective_fnn_lags();
  const auto h = static_cast<std::size_t>(config.ofi.window_h);
  const std::size_t start = std::max<std::size_t>(static_cast<std::size_t>(q), h - 1);
  if (series.size() <= start) {
    throw std::invalid_argument(fmt::format("series too short: {} rows for {} FNN lags",
                                            series.size(), q));
  }
  const auto rows = to_matrix(series);
  const PrefixSums ps(series);
  const auto n = static_cast<Eigen::Index>(series.size() - start);
  Dataset data{Eigen::MatrixXd(n, 2 * q), Eigen::MatrixXd(n, 1)};
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto t = static_cast<std::size_t>(i) + start;
    data.inputs.row(i) = lag_features(rows, static_cast<Eigen::Index>(t), q);
    data.targets(i, 0) = actual_ofi_at(ps, t, h);
  }
  auto result = train(data, head_topology(config, 1), config.train);
  ModelBundle b;
  b.kind = ModelKind::FnnOnly;
  b.config = config;
  b.fnn_part = std::move(result.model);
  b.trace = std::move(result.trace);
  return b;
}

ModelBundle fit_hybrid(const CountSeries& series, const PipelineConfig& config) {
  config.validate();
  const int p = config.var_lag;
  const int q = config.effective_fnn_lags();
  if (series.size() <= static_cast<std::size_t>(p + q)) {
    throw std::invalid_argument(
        fmt::format("series too short: {} rows for lag {} plus {} FNN lags", series.size(), p, q));
  }
  auto fit = fit_var(series, p);
  // Row r of E is the residual at time p + r.
  const Eigen::MatrixXd E = residuals(fit.model, series);
  const auto n = E.rows() - q;
  Dataset data{Eigen::MatrixXd(n, 2 * q), Eigen::MatrixXd(n, 2)};
  for (Eigen::Index i = 0; i < n; ++i) {
    data.inputs.row(i) = lag_features(E, i + q, q);
    data.targets.row(i) = E.row(i + q);
  }
  auto result = train(data, head_topology(config, 2), config.train);
  ModelBundle b;
  b.kind = ModelKind::Hybrid;
  b.config = config;
  b.var_part = std::move(fit.model);
  b.var_diagnostics = std::move(fit.diagnostics);
  b.fnn_part = std::move(result.model);
  b.trace = std::move(result.trace);
  return b;
}

ModelBundle fit_model(ModelKind kind, const CountSeries& series, const PipelineConfig& config) {
  switch (kind) {
    case ModelKind::VarOnly:
      return fit_var_only(series, config);
    case ModelKind::FnnOnly:
      return fit_fnn_only(series, config);
    case ModelKind::Hybrid:
      return fit_hybrid(series, config);
  }
  throw std::invalid_argument("unknown model kind");
}

std::vector<OrderForecast> forecast_orders(const ModelBundle& bundle, const CountSeries& series,
                                           std::size_t eval_from) {
  bundle.validate();
  if (bundle.kind == ModelKind::FnnOnly) {
    throw std::invalid_argument("FNN-only bundles do not forecast order counts");
  }
  const std::size_t first = std::max(bundle.warmup(), eval_from);
  if (series.size() <= first) {
    throw std::invalid_argument(fmt::format(
        "insufficient history: {} rows, model needs more than {}", series.size(), first));
  }
  const auto& var = *bundle.var_part;
  const auto p = var.p;
  const Eigen::MatrixXd rows = to_matrix(series);
  // fitted.row(r) is the one-step VAR forecast for time p + r.
  const Eigen::MatrixXd fitted = fitted_values(var, rows);
  const auto count = static_cast<Eigen::Index>(series.size() - first);

  Eigen::MatrixXd residual_pred = Eigen::MatrixXd::Zero(count, 2);
  if (bundle.kind == ModelKind::Hybrid) {
    const int q = bundle.config.effective_fnn_lags();
    const Eigen::MatrixXd E = rows.bottomRows(fitted.rows()) - fitted;
    Eigen::MatrixXd inputs(count, 2 * q);
    for (Eigen::Index i = 0; i < count; ++i) {
      const auto t = static_cast<Eigen::Index>(first) + i;
      inputs.row(i) = lag_features(E, t - p, q);
    }
    residual_pred = ofi::predict(*bundle.fnn_part, inputs);
  }

  std::vector<OrderForecast> out;
  out.reserve(static_cast<std::size_t>(count));
  for (Eigen::Index i = 0; i < count; ++i) {
    const auto t = static_cast<Eigen::Index>(first) + i;
    OrderForecast f;
    f.index = static_cast<std::size_t>(t);
    f.var_forecast = fitted.row(t - p).transpose();
    f.residual = residual_pred.row(i).transpose();
    f.combined = f.var_forecast + f.residual;
    out.push_back(f);
  }
  return out;
}

std::vector<PredictionRecord> predict(const ModelBundle& bundle, const CountSeries& series,
                                      std::size_t eval_from) {
  bundle.validate();
  const auto h = static_cast<std::size_t>(bundle.config.ofi.window_h);
  const double threshold = bundle.config.ofi.threshold;
  const PrefixSums ps(series);
  std::vector<PredictionRecord> out;
  auto emit = [&](std::size_t t, double predicted) {
    PredictionRecord r;
    r.index = t;
    r.actual_ofi = actual_ofi_at(ps, t, h);
    r.predicted_ofi = clamp_ofi(predicted);
    r.actual_signal = signal(r.actual_ofi, threshold);
    r.predicted_signal = signal(r.predicted_ofi, threshold);
    out.push_back(r);
  };

  if (bundle.kind == ModelKind::FnnOnly) {
    const std::size_t first = std::max(bundle.warmup(), eval_from);
    if (series.size() <= first) {
      throw std::invalid_argument(fmt::format(
          "insufficient history: {} rows, model needs more than {}", series.size(), first));
    }
    const int q = bundle.config.effective_fnn_lags();
    const Eigen::MatrixXd rows = to_matrix(series);
    const auto count = static_cast<Eigen::Index>(series.size() - first);
    Eigen::MatrixXd inputs(count, 2 * q);
    for (Eigen::Index i = 0; i < count; ++i) {
      inputs.row(i) = lag_features(rows, static_cast<Eigen::Index>(first) + i, q);
    }
    const Eigen::MatrixXd pred = ofi::predict(*bundle.fnn_part, inputs);
    for (Eigen::Index i = 0; i < count; ++i) {
      emit(first + static_cast<std::size_t>(i), pred(i, 0));
    }
    return out;
  }

  for (const auto& f : forecast_orders(bundle, series, eval_from)) {
    emit(f.index, predicted_ofi_at(ps, f.index, h, f.combined(0), f.combined(1)));
  }
  return out;
}

void save_bundle(const std::filesystem::path& dir, const ModelBundle& bundle) {
  bundle.validate();
  std::filesystem::create_directories(dir);
  const auto& c = bundle.config;
  std::ofstream manifest(dir / kManifestFile, std::ios::binary);
  if (!manifest) throw std::runtime_error(fmt::format("cannot write bundle in '{}'", dir.string()));
  manifest << kBundleMagic << '\n';
  manifest << "kind=" << to_string(bundle.kind) << '\n';
  manifest << "var_lag=" << c.var_lag << '\n';
  manifest << "fnn_lags=" << c.effective_fnn_lags() << '\n';
  manifest << "hidden=" << join_ints(c.hidden) << '\n';
  manifest << "activation=" << to_string(c.activation) << '\n';
  manifest << "optimizer=" << to_string(c.train.optimizer) << '\n';
  manifest << "learning_rate="
           << (c.train.learning_rate ? fmt::format("{:.17g}", *c.train.learning_rate) : "default")
           << '\n';
  manifest << "epochs=" << c.train.epochs << '\n';
  manifest << "batch_size=" << c.train.batch_size << '\n';
  manifest << "early_stopping=" << (c.train.early_stopping ? "true" : "false") << '\n';
  manifest << "patience=" << c.train.patience << '\n';
  manifest << "validation_fraction=" << fmt::format("{:.17g}", c.train.validation_fraction) << '\n';
  manifest << "seed=" << c.train.seed << '\n';
  manifest << "window_h=" << c.ofi.window_h << '\n';
  manifest << "threshold=" << fmt::format("{:.17g}", c.ofi.threshold) << '\n';
  if (!manifest) throw std::runtime_error("failed writing manifest");

  if (bundle.var_part) {
    std::ofstream out(dir / kVarFile, std::ios::binary);
    write_var_model(out, *bundle.var_part);
  } else {
    std::filesystem::remove(dir / kVarFile);
  }
  if (bundle.fnn_part) {
    std::ofstream out(dir / kFnnFile, std::ios::binary);
    write_fnn_model(out, *bundle.fnn_part);
  } else {
    std::filesystem::remove(dir / kFnnFile);
  }
}

ModelBundle load_bundle(const std::filesystem::path& dir) {
  std::ifstream manifest(dir / kManifestFile);
  if (!manifest) {
    throw DataError(fmt::format("'{}' is not a model bundle (no {})", dir.string(), kManifestFile));
  }
  std::string line;
  std::size_t line_no = 0;
  if (!csv::next_nonblank(manifest, line, line_no) || csv::trim(line) != kBundleMagic) {
    throw DataError("manifest: unrecognized header", line_no);
  }
  std::map<std::string, std::string, std::less<>> fields;
  while (csv::next_nonblank(manifest, line, line_no)) {
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw DataError(fmt::format("manifest line {}: expected key=value", line_no), line_no);
    }
    fields[std::string(csv::trim(std::string_view(line).substr(0, eq)))] =
        std::string(csv::trim(std::string_view(line).substr(eq + 1)));
  }
  auto get = [&](std::string_view key) -> const std::string& {
    const auto it = fields.find(key);
    if (it == fields.end()) throw DataError(fmt::format("manifest field '{}' is missing", key));
    return it->second;
  };
  auto get_int = [&](std::string_view key) {
    const auto v = csv::parse_int(get(key));
    if (!v) throw DataError(fmt::format("manifest field '{}': bad integer '{}'", key, get(key)));
    return *v;
  };
  auto get_double = [&](std::string_view key) {
    const auto v = csv::parse_double(get(key));
    if (!v) throw DataError(fmt::format("manifest field '{}': bad number '{}'", key, get(key)));
    return *v;
  };

  ModelBundle b;
  const auto kind = parse_model_kind(get("kind"));
  if (!kind) throw DataError(fmt::format("manifest field 'kind': unknown value '{}'", get("kind")));
  b.kind = *kind;
  auto& c = b.config;
  c.var_lag = static_cast<int>(get_int("var_lag"));
  c.fnn_lags = static_cast<int>(get_int("fnn_lags"));
  c.hidden = parse_int_list(get("hidden"), "hidden");
  const auto act = parse_activation(get("activation"));
  if (!act) throw DataError(fmt::format("manifest field 'activation': unknown value '{}'", get("activation")));
  c.activation = *act;
  const auto opt = parse_optimizer(get("optimizer"));
  if (!opt) throw DataError(fmt::format("manifest field 'optimizer': unknown value '{}'", get("optimizer")));
  c.train.optimizer = *opt;
  if (get("learning_rate") != "default") c.train.learning_rate = get_double("learning_rate");
  c.train.epochs = static_cast<int>(get_int("epochs"));
  c.train.batch_size = static_cast<int>(get_int("batch_size"));
  const auto& es = get("early_stopping");
  if (es != "true" && es != "false") {
    throw DataError(fmt::format("manifest field 'early_stopping': expected true/false, got '{}'", es));
  }
  c.train.early_stopping = es == "true";
  c.train.patience = static_cast<int>(get_int("patience"));
  c.train.validation_fraction = get_double("validation_fraction");
  c.train.seed = static_cast<std::uint64_t>(get_int("seed"));
  c.ofi.window_h = static_cast<int>(get_int("window_h"));
  c.ofi.threshold = get_double("threshold");
  try {
    c.validate();
  } catch (const std::exception& e) {
    throw DataError(fmt::format("manifest: {}", e.what()));
  }

  // save_bundle removes parts the kind does not use, so a leftover part means
  // the manifest was edited.
  for (const auto* part : {kVarFile, kFnnFile}) {
    const bool wanted = part == kVarFile ? b.kind != ModelKind::FnnOnly : b.kind != ModelKind::VarOnly;
    if (!wanted && std::filesystem::exists(dir / part)) {
      throw DataError(fmt::format("manifest field 'kind' ({}) inconsistent with {} in bundle", get("kind"), part));
    }
  }
  if (b.kind != ModelKind::FnnOnly) {
    std::ifstream in(dir / kVarFile);
    if (!in) throw DataError(fmt::format("manifest field 'kind' ({}) requires {}", get("kind"), kVarFile));
    b.var_part = read_var_model(in);
  }
  if (b.kind != ModelKind::VarOnly) {
    std::ifstream in(dir / kFnnFile);
    if (!in) throw DataError(fmt::format("manifest field 'kind' ({}) requires {}", get("kind"), kFnnFile));
    b.fnn_part = read_fnn_model(in);
  }
  try {
    b.validate();
  } catch (const std::invalid_argument& e) {
    throw DataError(fmt::format("manifest {}", e.what()));
  }
  return b;
}

void write_predictions_csv(std::ostream& out, const std::vector<PredictionRecord>& records) {
  out << "index,actual_ofi,predicted_ofi,actual_signal,predicted_signal\n";
  for (const auto& r : records) {
    out << r.index << ',' << fmt::format("{:.17g},{:.17g}", r.actual_ofi, r.predicted_ofi) << ','
        << to_string(r.actual_signal) << ',' << to_string(r.predicted_signal) << '\n';
  }
}

std::vector<PredictionRecord> read_predictions_csv(std::istream& in) {
  std::size_t line_no = 0;
  std::string line;
  if (!csv::next_nonblank(in, line, line_no)) throw DataError("empty predictions file");
  if (csv::split(line) != csv::split("index,actual_ofi,predicted_ofi,actual_signal,predicted_signal")) {
    throw DataError(fmt::format("line {}: unexpected predictions header", line_no), line_no);
  }
  std::vector<PredictionRecord> out;
  while (csv::next_nonblank(in, line, line_no)) {
    const auto f = csv::split(line);
    if (f.size() != 5) {
      throw DataError(fmt::format("line {}: expected 5 fields, got {}", line_no, f.size()), line_no);
    }
    const auto idx = csv::parse_int(f[0]);
    const auto a = csv::parse_double(f[1]);
    const auto p = csv::parse_double(f[2]);
    const auto as = parse_signal(f[3]);
    const auto psig = parse_signal(f[4]);
    if (!idx || *idx < 0 || !a || !p || !as || !psig) {
      throw DataError(fmt::format("line {}: malformed prediction row", line_no), line_no);
    }
    out.push_back({static_cast<std::size_t>(*idx), *a, *p, *as, *psig});
  }
  if (out.empty()) throw DataError("predictions file has no rows");
  return out;
}

}  // namespace ofi
