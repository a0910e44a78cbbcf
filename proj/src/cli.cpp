#include "ofi/cli.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <optional>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "ofi/csv.hpp"
#include "ofi/data_io.hpp"
#include "ofi/evaluation.hpp"
#include "ofi/hybrid.hpp"
#include "ofi/rng.hpp"
#include "ofi/sweep.hpp"
#include "ofi/var_model.hpp"

namespace fs = std::filesystem;

namespace ofi::cli {

namespace {

// Salt for synthetic datasets generated inside a sweep.
constexpr std::uint64_t kSweepDataSalt = 0x5357454550;

struct TrainFlags {
  int epochs = 50;
  int batch_size = 8;
  std::optional<double> learning_rate;
  bool early_stopping = true;
  int patience = 5;
  double validation_fraction = 0.2;
  int window = 1;
  double threshold = 0.1;
  std::uint64_t seed = 42;
  int fnn_lags = 0;
};

void add_train_flags(CLI::App* sub, TrainFlags& f) {
  sub->add_option("--epochs", f.epochs, "Training epochs")->capture_default_str();
  sub->add_option("--batch-size", f.batch_size, "Mini-batch size")->capture_default_str();
  sub->add_option("--learning-rate", f.learning_rate,
                  "Step size (default: 0.001 for adam, 0.01 for sgd)");
  sub->add_option("--early-stopping", f.early_stopping, "Stop on stalled validation loss")
      ->capture_default_str();
  sub->add_option("--patience", f.patience, "Early-stopping patience in epochs")
      ->capture_default_str();
  sub->add_option("--validation-fraction", f.validation_fraction,
                  "Trailing share of training rows held out for early stopping")
      ->capture_default_str();
  sub->add_option("--fnn-lags", f.fnn_lags, "Residual/order lags fed to the FNN (0: same as --lag)")
      ->capture_default_str();
  sub->add_option("--window", f.window, "OFI window h")->capture_default_str();
  sub->add_option("--threshold", f.threshold, "Signal threshold T")->capture_default_str();
  sub->add_option("--seed", f.seed, "Master seed")->capture_default_str();
}

PipelineConfig pipeline_from(const TrainFlags& f) {
  PipelineConfig pc;
  pc.fnn_lags = f.fnn_lags;
  pc.train.epochs = f.epochs;
  pc.train.batch_size = f.batch_size;
  pc.train.learning_rate = f.learning_rate;
  pc.train.early_stopping = f.early_stopping;
  pc.train.patience = f.patience;
  pc.train.validation_fraction = f.validation_fraction;
  pc.train.seed = f.seed;
  pc.ofi.window_h = f.window;
  pc.ofi.threshold = f.threshold;
  return pc;
}

Activation activation_from(const std::string& s) {
  const auto a = parse_activation(s);
  if (!a) throw std::invalid_argument(fmt::format("unknown activation '{}'", s));
  return *a;
}

OptimizerKind optimizer_from(const std::string& s) {
  const auto o = parse_optimizer(s);
  if (!o) throw std::invalid_argument(fmt::format("unknown optimizer '{}'", s));
  return *o;
}

ModelKind model_from(const std::string& s) {
  const auto k = parse_model_kind(s);
  if (!k) throw std::invalid_argument(fmt::format("unknown model '{}' (var, fnn, hybrid)", s));
  return *k;
}

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  for (auto part : csv::split(text, ',')) {
    if (!part.empty()) out.emplace_back(part);
  }
  return out;
}

std::ofstream open_out(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error(fmt::format("cannot write {}", path.string()));
  return f;
}

void write_text(const fs::path& path, const std::string& text) {
  auto f = open_out(path);
  f << text;
  if (!f) throw std::runtime_error(fmt::format("write failed: {}", path.string()));
}

fs::path sidecar(const fs::path& out) { return fs::path(out.string() + ".config.toml"); }

// Every option of the invoked subcommand, defaults included, in a form that
// --config accepts.
std::string resolved_config(const CLI::App& app, const CLI::App* sub) {
  const std::string prefix = sub->get_name() + ".";
  std::istringstream all(app.config_to_str(true, false));
  std::string text;
  std::string line;
  while (std::getline(all, line)) {
    if (line.rfind(prefix, 0) == 0) text += line + "\n";
  }
  return text;
}

}  // namespace

std::vector<int> parse_widths(const std::string& text) {
  std::vector<int> widths;
  if (text.empty() || text == "none") return widths;
  std::string norm = text;
  std::replace(norm.begin(), norm.end(), '-', ',');
  for (auto part : csv::split(norm, ',')) {
    const auto v = csv::parse_int(part);
    if (!v || *v < 1) throw std::invalid_argument(fmt::format("bad layer width in '{}'", text));
    widths.push_back(static_cast<int>(*v));
  }
  return widths;
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Order flow imbalance forecasting with VAR, FNN and hybrid VAR-FNN models", "ofi"};
  app.set_config("--config", "", "TOML/INI file with option values (flags take precedence)");
  app.require_subcommand(1);

  // synth
  SyntheticSpec syn;
  std::string synth_out;
  auto* synth = app.add_subcommand("synth", "Generate a synthetic order-count series");
  synth->add_option("--length", syn.length, "Number of intervals")->capture_default_str();
  synth->add_option("--seed", syn.seed, "Generator seed")->capture_default_str();
  synth->add_option("--base-intensity", syn.base_intensity, "Mean orders per side per interval")
      ->capture_default_str();
  synth->add_option("--linear-strength", syn.linear_strength, "Linear feedback of lagged imbalance")
      ->capture_default_str();
  synth->add_option("--nonlinear-strength", syn.nonlinear_strength,
                    "Weight of the tanh interaction term")
      ->capture_default_str();
  synth->add_option("--out", synth_out, "Output CSV")->required();

  // fit
  std::string fit_model_name = "hybrid";
  std::string fit_data;
  std::string fit_out = "bundle";
  int fit_lag = 2;
  std::string fit_hidden = "32,16";
  std::string fit_activation = "relu";
  std::string fit_optimizer = "adam";
  std::string fit_criterion = "none";
  int fit_max_lag = kMaxSupportedLag;
  TrainFlags fit_flags;
  auto* fit = app.add_subcommand("fit", "Fit a model and persist it as a bundle directory");
  fit->add_option("--model", fit_model_name, "var, fnn or hybrid")->capture_default_str();
  fit->add_option("--data", fit_data, "Counts CSV (timestamp,buy_orders,sell_orders)")->required();
  fit->add_option("--out", fit_out, "Bundle directory")->capture_default_str();
  fit->add_option("--lag", fit_lag, "VAR lag order p")->capture_default_str();
  fit->add_option("--lag-criterion", fit_criterion,
                  "Choose p in 1..--max-lag by aic or bic instead of --lag (none)")
      ->capture_default_str();
  fit->add_option("--max-lag", fit_max_lag, "Largest lag considered by --lag-criterion")
      ->capture_default_str();
  fit->add_option("--hidden", fit_hidden, "Hidden layer widths, e.g. 32,16")->capture_default_str();
  fit->add_option("--activation", fit_activation, "relu, tanh or sigmoid")->capture_default_str();
  fit->add_option("--optimizer", fit_optimizer, "adam or sgd")->capture_default_str();
  add_train_flags(fit, fit_flags);

  // predict
  std::string pred_bundle;
  std::string pred_data;
  std::string pred_out;
  std::size_t pred_from = 0;
  auto* pred = app.add_subcommand("predict", "One-step rolling predictions from a bundle");
  pred->add_option("--bundle", pred_bundle, "Bundle directory")->required();
  pred->add_option("--data", pred_data, "Counts CSV")->required();
  pred->add_option("--out", pred_out, "Predictions CSV")->required();
  pred->add_option("--from", pred_from, "First row index to predict")->capture_default_str();

  // evaluate
  std::vector<std::string> eval_files;
  std::vector<std::string> eval_labels;
  std::vector<std::string> eval_datasets;
  std::string eval_out;
  std::string eval_confusion;
  std::string eval_average = "macro";
  auto* eval = app.add_subcommand("evaluate", "Compare prediction files");
  eval->add_option("files", eval_files, "Prediction CSVs")->required();
  eval->add_option("--label", eval_labels, "Model label per file (default: file stem)");
  eval->add_option("--dataset", eval_datasets, "Dataset name, once or per file")
      ->default_str("dataset");
  eval->add_option("--out", eval_out, "Comparison CSV");
  eval->add_option("--confusion-dir", eval_confusion, "Directory for per-file confusion CSVs");
  eval->add_option("--average", eval_average, "Precision averaging: macro, micro or weighted")
      ->capture_default_str();

  // sweep
  std::string sweep_model = "hybrid";
  std::vector<std::string> sweep_data;
  std::size_t sweep_synthetic = 0;
  std::size_t sweep_length = 3000;
  std::string sweep_lags = "1,2,5,10";
  std::vector<std::string> sweep_archs{"128-64", "32-16", "32-32", "128-64-32", "64-32-16"};
  std::string sweep_acts = "relu,tanh,sigmoid";
  std::string sweep_opts = "adam,sgd";
  std::size_t sweep_lhs = 0;
  unsigned sweep_workers = 1;
  double sweep_train_fraction = 0.8;
  std::string sweep_out;
  std::string sweep_heatmap;
  bool sweep_runtime = false;
  TrainFlags sweep_flags;
  auto* sweep = app.add_subcommand("sweep", "Hyperparameter sensitivity sweep");
  sweep->add_option("--model", sweep_model, "var, fnn or hybrid")->capture_default_str();
  sweep->add_option("--data", sweep_data, "Counts CSVs, one dataset each");
  sweep->add_option("--synthetic", sweep_synthetic, "Number of synthetic datasets to add")
      ->capture_default_str();
  sweep->add_option("--length", sweep_length, "Length of synthetic datasets")->capture_default_str();
  sweep->add_option("--lags", sweep_lags, "Lag axis, comma separated")->capture_default_str();
  sweep->add_option("--architectures", sweep_archs,
                    "Architecture axis; repeat the flag, widths as 32,16 or 32-16")
      ->capture_default_str();
  sweep->add_option("--activations", sweep_acts, "Activation axis")->capture_default_str();
  sweep->add_option("--optimizers", sweep_opts, "Optimizer axis")->capture_default_str();
  sweep->add_option("--lhs", sweep_lhs, "Sample this many grid points (0: full grid)")
      ->capture_default_str();
  sweep->add_option("--workers", sweep_workers, "Worker threads")->capture_default_str();
  sweep->add_option("--train-fraction", sweep_train_fraction, "Chronological training share")
      ->capture_default_str();
  sweep->add_option("--out", sweep_out, "Results CSV")->required();
  sweep->add_option("--heatmap", sweep_heatmap, "Long-format heatmap CSV");
  sweep->add_flag("--record-runtime", sweep_runtime,
                  "Write wall-clock seconds (makes the CSV differ between runs)");
  add_train_flags(sweep, sweep_flags);

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err);
  }
  // A resolved config writes empty lists as "", which reads back as one empty entry.
  for (auto* list : {&eval_labels, &eval_datasets, &sweep_data, &sweep_archs}) {
    std::erase(*list, std::string());
  }

  try {
    if (*synth) {
      const auto series = generate_synthetic(syn);
      save_counts_csv(synth_out, series);
      write_text(synth_out + ".spec", describe(syn));
      write_text(sidecar(synth_out), resolved_config(app, synth));
      out << fmt::format("wrote {} rows to {}\n", series.size(), synth_out);
    } else if (*fit) {
      const auto kind = model_from(fit_model_name);
      const auto series = load_counts_csv(fit_data);
      PipelineConfig pc = pipeline_from(fit_flags);
      pc.var_lag = fit_lag;
      pc.hidden = parse_widths(fit_hidden);
      pc.activation = activation_from(fit_activation);
      pc.train.optimizer = optimizer_from(fit_optimizer);
      if (fit_criterion != "none") {
        Criterion crit;
        if (fit_criterion == "aic") {
          crit = Criterion::AIC;
        } else if (fit_criterion == "bic") {
          crit = Criterion::BIC;
        } else {
          throw std::invalid_argument(
              fmt::format("unknown lag criterion '{}' (none, aic, bic)", fit_criterion));
        }
        std::vector<int> candidates;
        for (int p = 1; p <= fit_max_lag; ++p) candidates.push_back(p);
        pc.var_lag = select_lag(series, candidates, crit);
        out << fmt::format("selected lag {} by {}\n", pc.var_lag, fit_criterion);
      }
      const auto bundle = fit_model(kind, series, pc);
      const fs::path dir = fit_out;
      save_bundle(dir, bundle);
      if (bundle.trace) {
        auto f = open_out(dir / "training_trace.csv");
        write_trace_csv(f, *bundle.trace);
        for (const auto& w : bundle.trace->warnings) err << "warning: " << w << "\n";
      }
      if (bundle.var_part && bundle.var_diagnostics) {
        const auto text = summary(*bundle.var_part, *bundle.var_diagnostics);
        write_text(dir / "var_summary.txt", text);
        out << text;
      }
      write_text(dir / "resolved_config.toml", resolved_config(app, fit));
      out << fmt::format("saved {} bundle to {}\n", to_string(kind), dir.string());
    } else if (*pred) {
      const auto bundle = load_bundle(pred_bundle);
      const auto series = load_counts_csv(pred_data);
      if (series.size() <= std::max(bundle.warmup(), pred_from)) {
        throw std::invalid_argument(fmt::format(
            "data has {} rows; the bundle needs more than {} (warmup {}, --from {})",
            series.size(), std::max(bundle.warmup(), pred_from), bundle.warmup(), pred_from));
      }
      const auto records = predict(bundle, series, pred_from);
      {
        auto f = open_out(pred_out);
        write_predictions_csv(f, records);
      }
      write_text(sidecar(pred_out), resolved_config(app, pred));
      out << fmt::format("wrote {} predictions to {}\n", records.size(), pred_out);
    } else if (*eval) {
      if (!eval_labels.empty() && eval_labels.size() != eval_files.size()) {
        throw std::invalid_argument(fmt::format("{} labels for {} files", eval_labels.size(),
                                                eval_files.size()));
      }
      if (eval_datasets.size() > 1 && eval_datasets.size() != eval_files.size()) {
        throw std::invalid_argument(fmt::format("{} dataset names for {} files",
                                                eval_datasets.size(), eval_files.size()));
      }
      PrecisionAverage avg;
      if (eval_average == "macro") {
        avg = PrecisionAverage::Macro;
      } else if (eval_average == "micro") {
        avg = PrecisionAverage::Micro;
      } else if (eval_average == "weighted") {
        avg = PrecisionAverage::Weighted;
      } else {
        throw std::invalid_argument(fmt::format("unknown averaging '{}'", eval_average));
      }
      std::vector<EvalReport> reports;
      for (std::size_t i = 0; i < eval_files.size(); ++i) {
        std::ifstream f(eval_files[i]);
        if (!f) throw std::runtime_error(fmt::format("cannot open {}", eval_files[i]));
        std::vector<PredictionRecord> records;
        try {
          records = read_predictions_csv(f);
        } catch (const std::exception& e) {
          throw std::runtime_error(fmt::format("{}: {}", eval_files[i], e.what()));
        }
        const std::string label =
            eval_labels.empty() ? fs::path(eval_files[i]).stem().string() : eval_labels[i];
        const std::string dataset = eval_datasets.empty()      ? std::string("dataset")
                                    : eval_datasets.size() == 1 ? eval_datasets[0]
                                                                : eval_datasets[i];
        reports.push_back(evaluate(records, dataset, label, avg));
        if (!eval_confusion.empty()) {
          write_text(fs::path(eval_confusion) / (fs::path(eval_files[i]).stem().string() +
                                                  "_confusion.csv"),
                     confusion_csv(reports.back().confusion));
        }
      }
      const auto rendered = render_comparison(reports);
      out << rendered.table;
      if (!eval_out.empty()) {
        write_text(eval_out, rendered.csv);
        write_text(sidecar(eval_out), resolved_config(app, eval));
      }
    } else if (*sweep) {
      SweepSpace space;
      space.lags.clear();
      for (const auto& s : split_list(sweep_lags)) {
        const auto v = csv::parse_int(s);
        if (!v) throw std::invalid_argument(fmt::format("bad lag '{}'", s));
        space.lags.push_back(static_cast<int>(*v));
      }
      space.architectures.clear();
      for (const auto& a : sweep_archs) space.architectures.push_back(parse_widths(a));
      space.activations.clear();
      for (const auto& s : split_list(sweep_acts)) space.activations.push_back(activation_from(s));
      space.optimizers.clear();
      for (const auto& s : split_list(sweep_opts)) space.optimizers.push_back(optimizer_from(s));

      std::vector<SweepDataset> datasets;
      for (const auto& path : sweep_data) {
        datasets.push_back({fs::path(path).stem().string(), load_counts_csv(path)});
      }
      for (std::size_t i = 0; i < sweep_synthetic; ++i) {
        SyntheticSpec spec;
        spec.length = sweep_length;
        spec.seed = derive_seed(sweep_flags.seed, kSweepDataSalt, i);
        datasets.push_back({fmt::format("synthetic-{}", i + 1), generate_synthetic(spec)});
      }
      if (datasets.empty()) throw std::invalid_argument("sweep needs --data or --synthetic");

      const auto configs = sweep_lhs == 0 ? enumerate_grid(space)
                                          : lhs_sample(space, sweep_lhs, sweep_flags.seed);
      SweepOptions opts;
      opts.kind = model_from(sweep_model);
      opts.base = pipeline_from(sweep_flags);
      opts.train_fraction = sweep_train_fraction;
      opts.master_seed = sweep_flags.seed;
      opts.workers = sweep_workers;
      const auto results = run_sweep(configs, datasets, opts);
      {
        auto f = open_out(sweep_out);
        write_sweep_csv(f, results, opts.kind, sweep_runtime);
      }
      if (!sweep_heatmap.empty()) write_text(sweep_heatmap, heatmap_csv(results, opts.kind));
      write_text(sidecar(sweep_out), resolved_config(app, sweep));

      const auto failed = std::count_if(results.begin(), results.end(),
                                        [](const SweepResult& r) { return !r.ok(); });
      out << fmt::format("{} cells ({} configurations x {} datasets), {} failed\n", results.size(),
                         configs.size(), datasets.size(), failed);
      const int head = opts.kind == ModelKind::Hybrid ? 2 : 1;
      for (const auto& b : best_configurations(results)) {
        out << fmt::format("best {:<9} lag={} architecture={} activation={} optimizer={} value={:.6g}\n",
                           b.metric, b.config.lag, architecture_label(b.config.hidden, head),
                           to_string(b.config.activation), to_string(b.config.optimizer), b.value);
      }
    }
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

}  // namespace ofi::cli
