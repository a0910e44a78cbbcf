#include "ofi/sweep.hpp"

#include <algorithm>
#include <array>
#include <optional>
#include <span>
#include <atomic>
#include <chrono>
#include <cmath>
#include <limits>
#include <map>
#include <ostream>
#include <thread>

#include <fmt/format.h>
#include <fmt/ranges.h>

#include "ofi/evaluation.hpp"
#include "ofi/rng.hpp"

namespace ofi {

namespace {

constexpr int kLhsAttempts = 64;

std::array<std::size_t, 4> axis_sizes(const SweepSpace& s) {
  return {s.lags.size(), s.architectures.size(), s.activations.size(), s.optimizers.size()};
}

// Axis value indices of grid entry `flat` (lexicographic order).
std::array<std::size_t, 4> decode(std::size_t flat, const std::array<std::size_t, 4>& m) {
  std::array<std::size_t, 4> idx{};
  for (std::size_t a = 4; a-- > 0;) {
    idx[a] = flat % m[a];
    flat /= m[a];
  }
  return idx;
}

std::string format_metric(double v) {
  return std::isfinite(v) ? fmt::format("{:.17g}", v) : std::string("NA");
}

std::string sanitize(std::string s) {
  for (auto& ch : s) {
    if (ch == ',' || ch == '\n' || ch == '\r') ch = ';';
  }
  return s;
}

int head_size(ModelKind kind) { return kind == ModelKind::Hybrid ? 2 : 1; }

}  // namespace

std::size_t SweepSpace::grid_size() const {
  return lags.size() * architectures.size() * activations.size() * optimizers.size();
}

void SweepSpace::validate() const {
  if (lags.empty() || architectures.empty() || activations.empty() || optimizers.empty()) {
    throw std::invalid_argument("sweep space has an empty axis");
  }
  for (int p : lags) {
    if (p < 1) throw std::invalid_argument("sweep lags must be >= 1");
  }
  for (const auto& a : architectures) {
    for (int w : a) {
      if (w < 1) throw std::invalid_argument("sweep architecture widths must be >= 1");
    }
  }
}

std::string architecture_label(const std::vector<int>& hidden, int head) {
  std::vector<int> all = hidden;
  all.push_back(head);
  return fmt::format("{}", fmt::join(all, "-"));
}

std::vector<SweepConfig> enumerate_grid(const SweepSpace& space) {
  space.validate();
  std::vector<SweepConfig> out;
  out.reserve(space.grid_size());
  for (int lag : space.lags)
    for (const auto& arch : space.architectures)
      for (auto act : space.activations)
        for (auto opt : space.optimizers) out.push_back({lag, arch, act, opt});
  return out;
}

std::vector<SweepConfig> lhs_sample(const SweepSpace& space, std::size_t k, std::uint64_t seed) {
  const auto grid = enumerate_grid(space);
  const auto total = grid.size();
  if (k < 1 || k > total) {
    throw std::invalid_argument(fmt::format("sample count {} outside [1, {}]", k, total));
  }
  Rng rng(seed);
  if (k == total) {
    std::vector<std::size_t> order(total);
    for (std::size_t i = 0; i < total; ++i) order[i] = i;
    rng.shuffle(std::span<std::size_t>(order));
    std::vector<SweepConfig> out;
    for (auto i : order) out.push_back(grid[i]);
    return out;
  }

  const auto m = axis_sizes(space);
  std::vector<std::array<std::size_t, 4>> coords(total);
  for (std::size_t i = 0; i < total; ++i) coords[i] = decode(i, m);

  // Quota-driven greedy: each axis value may be used floor(k/m) times, with a
  // random subset of values allowed one extra use. Picks favour the values
  // with the most remaining quota so that no stratum is starved.
  for (int attempt = 0; attempt < kLhsAttempts; ++attempt) {
    std::array<std::vector<std::size_t>, 4> quota;
    for (std::size_t a = 0; a < 4; ++a) {
      quota[a].assign(m[a], k / m[a]);
      std::vector<std::size_t> perm(m[a]);
      for (std::size_t v = 0; v < m[a]; ++v) perm[v] = v;
      rng.shuffle(std::span<std::size_t>(perm));
      for (std::size_t e = 0; e < k % m[a]; ++e) ++quota[a][perm[e]];
    }
    std::vector<bool> used(total, false);
    std::vector<std::size_t> picks;
    std::vector<std::size_t> ties;
    bool stuck = false;
    for (std::size_t step = 0; step < k && !stuck; ++step) {
      std::size_t best = 0;
      ties.clear();
      for (std::size_t i = 0; i < total; ++i) {
        if (used[i]) continue;
        std::size_t score = 0;
        bool feasible = true;
        for (std::size_t a = 0; a < 4; ++a) {
          const auto q = quota[a][coords[i][a]];
          if (q == 0) {
            feasible = false;
            break;
          }
          score += q;
        }
        if (!feasible) continue;
        if (score > best) {
          best = score;
          ties.clear();
        }
        if (score == best) ties.push_back(i);
      }
      if (ties.empty()) {
        stuck = true;
        break;
      }
      const auto pick = ties[static_cast<std::size_t>(rng.below(ties.size()))];
      used[pick] = true;
      picks.push_back(pick);
      for (std::size_t a = 0; a < 4; ++a) --quota[a][coords[pick][a]];
    }
    if (!stuck) {
      std::vector<SweepConfig> out;
      for (auto i : picks) out.push_back(grid[i]);
      return out;
    }
  }

  // Fallback: distinct points, least-used values first.
  std::array<std::vector<std::size_t>, 4> uses;
  for (std::size_t a = 0; a < 4; ++a) uses[a].assign(m[a], 0);
  std::vector<bool> used(total, false);
  std::vector<SweepConfig> out;
  for (std::size_t step = 0; step < k; ++step) {
    std::size_t best = std::numeric_limits<std::size_t>::max();
    std::vector<std::size_t> ties;
    for (std::size_t i = 0; i < total; ++i) {
      if (used[i]) continue;
      std::size_t score = 0;
      for (std::size_t a = 0; a < 4; ++a) score += uses[a][coords[i][a]];
      if (score < best) {
        best = score;
        ties.clear();
      }
      if (score == best) ties.push_back(i);
    }
    const auto pick = ties[static_cast<std::size_t>(rng.below(ties.size()))];
    used[pick] = true;
    for (std::size_t a = 0; a < 4; ++a) ++uses[a][coords[pick][a]];
    out.push_back(grid[pick]);
  }
  return out;
}

std::uint64_t cell_seed(std::uint64_t master_seed, std::size_t config_index,
                        std::size_t dataset_index) {
  return derive_seed(master_seed, config_index, dataset_index);
}

std::vector<SweepResult> run_sweep(const std::vector<SweepConfig>& configs,
                                   const std::vector<SweepDataset>& datasets,
                                   const SweepOptions& options) {
  if (configs.empty()) throw std::invalid_argument("sweep needs at least one configuration");
  if (datasets.empty()) throw std::invalid_argument("sweep needs at least one dataset");

  const std::size_t cells = configs.size() * datasets.size();
  std::vector<SweepResult> results(cells);

  auto run_cell = [&](std::size_t cell) {
    const std::size_t ci = cell / datasets.size();
    const std::size_t di = cell % datasets.size();
    auto& r = results[cell];
    r.config = configs[ci];
    r.config_index = ci;
    r.dataset_index = di;
    r.dataset = datasets[di].name;
    r.seed = cell_seed(options.master_seed, ci, di);
    const auto start = std::chrono::steady_clock::now();
    try {
      PipelineConfig pc = options.base;
      pc.var_lag = r.config.lag;
      pc.hidden = r.config.hidden;
      pc.activation = r.config.activation;
      pc.train.optimizer = r.config.optimizer;
      pc.train.seed = r.seed;
      const auto& series = datasets[di].series;
      const std::size_t cut = split_point(series.size(), options.train_fraction);
      const CountSeries train_part(series.begin(), series.begin() + static_cast<std::ptrdiff_t>(cut));
      const auto bundle = fit_model(options.kind, train_part, pc);
      const auto records = predict(bundle, series, cut);
      const auto rep = evaluate(records, r.dataset, model_label(options.kind));
      r.mse = rep.mse;
      r.mae = rep.mae;
      r.r2 = rep.r2;
      r.accuracy = rep.intensity_accuracy;
      r.precision = rep.intensity_precision;
      r.status = "ok";
    } catch (const std::exception& e) {
      const double nan = std::numeric_limits<double>::quiet_NaN();
      r.mse = r.mae = r.r2 = r.accuracy = r.precision = nan;
      r.status = sanitize(fmt::format("error: {}", e.what()));
    }
    r.runtime_s =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  };

  const unsigned workers = std::max(1u, std::min<unsigned>(options.workers,
                                                           static_cast<unsigned>(cells)));
  if (workers == 1) {
    for (std::size_t c = 0; c < cells; ++c) run_cell(c);
    return results;
  }
  std::atomic<std::size_t> next{0};
  {
    std::vector<std::jthread> pool;
    for (unsigned w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (std::size_t c = next++; c < cells; c = next++) run_cell(c);
      });
    }
  }
  return results;
}

void write_sweep_csv(std::ostream& out, const std::vector<SweepResult>& results, ModelKind kind,
                     bool include_runtime) {
  out << "lag,architecture,activation,optimizer,dataset,mse,mae,r2,accuracy,precision,runtime_s,"
         "status,seed\n";
  for (const auto& r : results) {
    out << r.config.lag << ',' << architecture_label(r.config.hidden, head_size(kind)) << ','
        << to_string(r.config.activation) << ',' << to_string(r.config.optimizer) << ','
        << r.dataset << ',' << format_metric(r.mse) << ',' << format_metric(r.mae) << ','
        << format_metric(r.r2) << ',' << format_metric(r.accuracy) << ','
        << format_metric(r.precision) << ','
        << (include_runtime ? fmt::format("{:.6f}", r.runtime_s) : std::string("NA")) << ','
        << r.status << ',' << r.seed << '\n';
  }
}

std::vector<BestConfig> best_configurations(const std::vector<SweepResult>& results) {
  struct Agg {
    SweepConfig config;
    double sums[5] = {0, 0, 0, 0, 0};
    std::size_t count = 0;
    bool all_ok = true;
  };
  std::map<std::size_t, Agg> by_config;
  for (const auto& r : results) {
    auto& a = by_config[r.config_index];
    a.config = r.config;
    if (!r.ok()) {
      a.all_ok = false;
      continue;
    }
    const double v[5] = {r.mse, r.mae, r.r2, r.accuracy, r.precision};
    for (int i = 0; i < 5; ++i) a.sums[i] += v[i];
    ++a.count;
  }
  static constexpr const char* kNames[] = {"mse", "mae", "r2", "accuracy", "precision"};
  std::vector<BestConfig> best;
  for (int m = 0; m < 5; ++m) {
    const bool lower = m < 2;
    std::optional<BestConfig> pick;
    for (const auto& [idx, a] : by_config) {
      if (!a.all_ok || a.count == 0) continue;
      const double mean = a.sums[m] / static_cast<double>(a.count);
      if (!pick || (lower ? mean < pick->value : mean > pick->value)) {
        pick = BestConfig{kNames[m], a.config, mean};
      }
    }
    if (pick) best.push_back(*pick);
  }
  return best;
}

std::string heatmap_csv(const std::vector<SweepResult>& results, ModelKind kind) {
  std::vector<std::string> datasets;
  std::vector<int> lags;
  std::vector<std::vector<int>> archs;
  for (const auto& r : results) {
    if (std::find(datasets.begin(), datasets.end(), r.dataset) == datasets.end())
      datasets.push_back(r.dataset);
    if (std::find(lags.begin(), lags.end(), r.config.lag) == lags.end())
      lags.push_back(r.config.lag);
    if (std::find(archs.begin(), archs.end(), r.config.hidden) == archs.end())
      archs.push_back(r.config.hidden);
  }
  static constexpr const char* kNames[] = {"mse", "mae", "r2", "accuracy", "precision"};
  std::string out = "dataset,metric,lag,architecture,value\n";
  for (const auto& ds : datasets) {
    for (int m = 0; m < 5; ++m) {
      for (int lag : lags) {
        for (const auto& arch : archs) {
          double sum = 0.0;
          std::size_t n = 0;
          for (const auto& r : results) {
            if (r.dataset != ds || r.config.lag != lag || r.config.hidden != arch || !r.ok())
              continue;
            const double v[5] = {r.mse, r.mae, r.r2, r.accuracy, r.precision};
            sum += v[m];
            ++n;
          }
          if (n == 0) continue;
          out += fmt::format("{},{},{},{},{:.17g}\n", ds, kNames[m], lag,
                             architecture_label(arch, head_size(kind)), sum / static_cast<double>(n));
        }
      }
    }
  }
  return out;
}

}  // namespace ofi
