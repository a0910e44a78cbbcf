#include "ofi/var_model.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <limits>
#include <numbers>
#include <ostream>
#include <sstream>

#include <fmt/format.h>

#include "ofi/csv.hpp"

namespace ofi {

namespace {

constexpr double kRankThreshold = 1e-10;
constexpr std::string_view kVarMagic = "ofi-var-model";
constexpr int kVarFormatVersion = 1;

std::vector<std::string> default_variables(int k) {
  if (k == 2) return {"buy_orders", "sell_orders"};
  std::vector<std::string> names;
  for (int i = 0; i < k; ++i) names.push_back(fmt::format("y{}", i + 1));
  return names;
}

void require_lag(int p) {
  if (p < 1) {
    throw std::invalid_argument(fmt::format("lag order must be >= 1, got {}", p));
  }
}

// Two-sided normal tail probability for a t statistic.
double normal_two_sided(double t) { return std::erfc(std::abs(t) / std::numbers::sqrt2); }

}  // namespace

Eigen::VectorXd VarModel::predict_from_lags(const Eigen::MatrixXd& lags) const {
  Eigen::VectorXd y = c;
  for (int i = 0; i < p; ++i) {
    y.noalias() += A[static_cast<std::size_t>(i)] * lags.row(i).transpose();
  }
  return y;
}

void VarModel::validate() const {
  require_lag(p);
  const auto kk = c.size();
  if (kk < 1) throw std::invalid_argument("VAR model has no variables");
  if (A.size() != static_cast<std::size_t>(p)) {
    throw std::invalid_argument(
        fmt::format("VAR model has {} coefficient matrices, expected {}", A.size(), p));
  }
  for (const auto& a : A) {
    if (a.rows() != kk || a.cols() != kk) {
      throw std::invalid_argument("VAR coefficient matrix has wrong shape");
    }
  }
  if (sigma.rows() != kk || sigma.cols() != kk) {
    throw std::invalid_argument("VAR sigma has wrong shape");
  }
  const double scale = std::max(1.0, sigma.cwiseAbs().maxCoeff());
  if (((sigma - sigma.transpose()).cwiseAbs().maxCoeff()) > 1e-12 * scale) {
    throw std::invalid_argument("VAR sigma is not symmetric");
  }
  if (variables.size() != static_cast<std::size_t>(kk)) {
    throw std::invalid_argument("VAR variable names do not match dimension");
  }
}

Eigen::MatrixXd to_matrix(const CountSeries& series) {
  Eigen::MatrixXd m(static_cast<Eigen::Index>(series.size()), 2);
  for (std::size_t i = 0; i < series.size(); ++i) {
    m(static_cast<Eigen::Index>(i), 0) = static_cast<double>(series[i].buy);
    m(static_cast<Eigen::Index>(i), 1) = static_cast<double>(series[i].sell);
  }
  return m;
}

LagDesign build_lag_matrix(const Eigen::MatrixXd& series, int p, int first_target) {
  require_lag(p);
  if (first_target < 0) first_target = p;
  if (first_target < p) {
    throw std::invalid_argument("first target row must be >= lag order");
  }
  const auto n = series.rows();
  const auto k = series.cols();
  if (n <= first_target) {
    throw std::invalid_argument(
        fmt::format("series too short: {} rows for lag order {}", n, p));
  }
  const auto rows = n - first_target;
  LagDesign d{Eigen::MatrixXd(rows, 1 + k * p), Eigen::MatrixXd(rows, k)};
  for (Eigen::Index r = 0; r < rows; ++r) {
    const auto t = first_target + r;
    d.Z(r, 0) = 1.0;
    for (int lag = 1; lag <= p; ++lag) {
      d.Z.row(r).segment(1 + (lag - 1) * k, k) = series.row(t - lag);
    }
    d.Y.row(r) = series.row(t);
  }
  return d;
}

LagDesign build_lag_matrix(const CountSeries& series, int p) {
  return build_lag_matrix(to_matrix(series), p);
}

std::vector<std::string> regressor_names(int p, const std::vector<std::string>& variables) {
  std::vector<std::string> names{"const"};
  for (int lag = 1; lag <= p; ++lag) {
    for (const auto& v : variables) names.push_back(fmt::format("L{}.{}", lag, v));
  }
  return names;
}

VarFit fit_var(const Eigen::MatrixXd& series, int p, int first_target) {
  require_lag(p);
  if (first_target < 0) first_target = p;
  const auto k = static_cast<int>(series.cols());
  const auto m = 1 + k * p;
  const auto n_obs = series.rows() - first_target;
  if (series.rows() <= first_target || n_obs < m) {
    throw std::invalid_argument(fmt::format(
        "series too short: {} rows give {} observations for {} regressors (lag order {})",
        series.rows(), std::max<Eigen::Index>(n_obs, 0), m, p));
  }
  const auto design = build_lag_matrix(series, p, first_target);
  const auto names = default_variables(k);
  const auto columns = regressor_names(p, names);

  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(design.Z);
  qr.setThreshold(kRankThreshold);
  if (qr.rank() < m) {
    std::vector<std::string> dependent;
    const auto& perm = qr.colsPermutation().indices();
    for (auto i = qr.rank(); i < m; ++i) {
      dependent.push_back(columns[static_cast<std::size_t>(perm(i))]);
    }
    std::sort(dependent.begin(), dependent.end());
    std::string list;
    for (const auto& d : dependent) list += (list.empty() ? "" : ", ") + d;
    throw RankDeficientError(
        fmt::format("rank deficient design (rank {} of {}): linearly dependent column(s) {{{}}}",
                    qr.rank(), m, list),
        dependent);
  }

  const Eigen::MatrixXd B = qr.solve(design.Y);  // m x k
  const Eigen::MatrixXd E = design.Y - design.Z * B;
  const auto nd = static_cast<double>(n_obs);

  VarFit fit;
  auto& model = fit.model;
  model.p = p;
  model.c = B.row(0).transpose();
  model.A.assign(static_cast<std::size_t>(p), Eigen::MatrixXd(k, k));
  for (int lag = 0; lag < p; ++lag) {
    model.A[static_cast<std::size_t>(lag)] = B.middleRows(1 + lag * k, k).transpose();
  }
  model.sigma = (E.transpose() * E) / nd;
  model.sigma = 0.5 * (model.sigma + model.sigma.transpose()).eval();
  model.n_obs = static_cast<std::size_t>(n_obs);
  model.variables = names;

  auto& diag = fit.diagnostics;
  diag.n_obs = model.n_obs;
  diag.det_sigma = model.sigma.determinant();
  const double ld = std::log(diag.det_sigma);
  const double free_params = static_cast<double>(k * m);
  diag.aic = ld + 2.0 * free_params / nd;
  diag.bic = ld + std::log(nd) * free_params / nd;
  diag.hqic = ld + 2.0 * std::log(std::log(nd)) * free_params / nd;
  diag.fpe = std::pow((nd + m) / (nd - m), k) * diag.det_sigma;
  diag.log_likelihood =
      -0.5 * nd * k * (std::log(2.0 * std::numbers::pi) + 1.0) - 0.5 * nd * ld;

  // (Z'Z)^{-1} = P R^{-1} R^{-T} P'.
  const Eigen::MatrixXd R =
      qr.matrixR().topLeftCorner(m, m).template triangularView<Eigen::Upper>();
  const Eigen::MatrixXd Rinv = R.template triangularView<Eigen::Upper>().solve(
      Eigen::MatrixXd::Identity(m, m));
  Eigen::VectorXd xtx_inv_diag(m);
  const auto& perm = qr.colsPermutation().indices();
  for (int i = 0; i < m; ++i) {
    xtx_inv_diag(perm(i)) = Rinv.row(i).squaredNorm();
  }
  const double dof = nd - m;
  for (int eq = 0; eq < k; ++eq) {
    EquationStats stats{names[static_cast<std::size_t>(eq)], {}};
    const double s2 = dof > 0 ? E.col(eq).squaredNorm() / dof
                              : std::numeric_limits<double>::quiet_NaN();
    for (int j = 0; j < m; ++j) {
      CoefficientStat c;
      c.name = columns[static_cast<std::size_t>(j)];
      c.coefficient = B(j, eq);
      c.std_error = std::sqrt(s2 * xtx_inv_diag(j));
      c.t_stat = c.coefficient / c.std_error;
      c.p_value = normal_two_sided(c.t_stat);
      stats.coefficients.push_back(c);
    }
    diag.equations.push_back(std::move(stats));
  }
  return fit;
}

VarFit fit_var(const CountSeries& series, int p) { return fit_var(to_matrix(series), p); }

std::vector<LagScore> score_lags(const Eigen::MatrixXd& series, std::span<const int> candidates) {
  if (candidates.empty()) {
    throw std::invalid_argument("empty candidate lag set");
  }
  const int max_lag = *std::max_element(candidates.begin(), candidates.end());
  std::vector<LagScore> scores;
  for (int p : candidates) {
    const auto fit = fit_var(series, p, max_lag);
    scores.push_back({p, fit.diagnostics.aic, fit.diagnostics.bic});
  }
  return scores;
}

int select_lag(const Eigen::MatrixXd& series, std::span<const int> candidates,
               Criterion criterion) {
  auto scores = score_lags(series, candidates);
  std::sort(scores.begin(), scores.end(),
            [](const LagScore& a, const LagScore& b) { return a.p < b.p; });
  const LagScore* best = nullptr;
  for (const auto& s : scores) {
    const double v = criterion == Criterion::AIC ? s.aic : s.bic;
    const double bv = best == nullptr ? 0.0 : (criterion == Criterion::AIC ? best->aic : best->bic);
    if (best == nullptr || v < bv) best = &s;
  }
  return best->p;
}

int select_lag(const CountSeries& series, std::span<const int> candidates, Criterion criterion) {
  return select_lag(to_matrix(series), candidates, criterion);
}

Eigen::MatrixXd forecast(const VarModel& model, const Eigen::MatrixXd& history, int steps) {
  if (steps < 1) {
    throw std::invalid_argument("forecast horizon must be >= 1");
  }
  if (history.rows() < model.p) {
    throw std::invalid_argument(fmt::format(
        "insufficient history: {} rows for lag order {}", history.rows(), model.p));
  }
  if (history.cols() != model.k()) {
    throw std::invalid_argument("history dimension does not match model");
  }
  // lags.row(0) is the most recent value.
  Eigen::MatrixXd lags(model.p, model.k());
  for (int i = 0; i < model.p; ++i) {
    lags.row(i) = history.row(history.rows() - 1 - i);
  }
  Eigen::MatrixXd out(steps, model.k());
  for (int s = 0; s < steps; ++s) {
    const Eigen::VectorXd next = model.predict_from_lags(lags);
    out.row(s) = next.transpose();
    for (int i = model.p - 1; i > 0; --i) lags.row(i) = lags.row(i - 1);
    lags.row(0) = next.transpose();
  }
  return out;
}

Eigen::MatrixXd fitted_values(const VarModel& model, const Eigen::MatrixXd& series) {
  if (series.rows() <= model.p) {
    throw std::invalid_argument(
        fmt::format("series too short: {} rows for lag order {}", series.rows(), model.p));
  }
  if (series.cols() != model.k()) {
    throw std::invalid_argument("series dimension does not match model");
  }
  const auto rows = series.rows() - model.p;
  Eigen::MatrixXd out(rows, model.k());
  Eigen::MatrixXd lags(model.p, model.k());
  for (Eigen::Index r = 0; r < rows; ++r) {
    const auto t = model.p + r;
    for (int i = 0; i < model.p; ++i) lags.row(i) = series.row(t - 1 - i);
    out.row(r) = model.predict_from_lags(lags).transpose();
  }
  return out;
}

Eigen::MatrixXd residuals(const VarModel& model, const Eigen::MatrixXd& series) {
  const auto fitted = fitted_values(model, series);
  return series.bottomRows(fitted.rows()) - fitted;
}

Eigen::MatrixXd residuals(const VarModel& model, const CountSeries& series) {
  return residuals(model, to_matrix(series));
}

std::string summary(const VarModel& model, const FitDiagnostics& d) {
  std::string s;
  auto line = [&s](std::string_view text) {
    s += text;
    s += '\n';
  };
  const std::string rule_eq(81, '=');
  const std::string rule_dash(81, '-');
  line("  Summary of Regression Results");
  line("==================================");
  line(fmt::format("{:<15}{:>19}", "Model:", "VAR"));
  line(fmt::format("{:<15}{:>19}", "Method:", "OLS"));
  line(std::string(68, '-'));
  line(fmt::format("{:<18}{:>16}    {:<18}{:>12}", "No. of Equations:",
                   fmt::format("{:#.6g}", static_cast<double>(model.k())), "BIC:",
                   fmt::format("{:#.6g}", d.bic)));
  line(fmt::format("{:<18}{:>16}    {:<18}{:>12}", "Nobs:",
                   fmt::format("{:#.6g}", static_cast<double>(d.n_obs)), "HQIC:",
                   fmt::format("{:#.6g}", d.hqic)));
  line(fmt::format("{:<18}{:>16}    {:<18}{:>12}", "Log likelihood:",
                   fmt::format("{:#.6g}", d.log_likelihood), "FPE:",
                   fmt::format("{:#.6g}", d.fpe)));
  line(fmt::format("{:<18}{:>16}    {:<18}{:>12}", "AIC:", fmt::format("{:#.6g}", d.aic),
                   "Det(Omega_mle):", fmt::format("{:#.6g}", d.det_sigma)));
  line(std::string(68, '-'));
  for (const auto& eq : d.equations) {
    line(fmt::format("Results for equation {}", eq.name));
    line(rule_eq);
    line(fmt::format("{:<16}{:>16}{:>17}{:>16}{:>16}", "", "coefficient", "std. error",
                     "t-stat", "prob"));
    line(rule_dash);
    for (const auto& c : eq.coefficients) {
      line(fmt::format("{:<16}{:>16.6f}{:>17.6f}{:>16.3f}{:>16.3f}", c.name, c.coefficient,
                       c.std_error, c.t_stat, c.p_value));
    }
    line(rule_eq);
    line("");
  }
  line("Correlation matrix of residuals");
  std::string header(16, ' ');
  for (const auto& v : model.variables) header += fmt::format("{:>16}", v);
  line(header);
  const auto k = model.k();
  for (int i = 0; i < k; ++i) {
    std::string row = fmt::format("{:<16}", model.variables[static_cast<std::size_t>(i)]);
    for (int j = 0; j < k; ++j) {
      const double denom = std::sqrt(model.sigma(i, i) * model.sigma(j, j));
      row += fmt::format("{:>16.6f}", denom > 0 ? model.sigma(i, j) / denom : 0.0);
    }
    line(row);
  }
  return s;
}

void write_var_model(std::ostream& out, const VarModel& model) {
  model.validate();
  const auto k = model.k();
  out << kVarMagic << ' ' << kVarFormatVersion << '\n';
  out << "k " << k << '\n';
  out << "p " << model.p << '\n';
  out << "n_obs " << model.n_obs << '\n';
  out << "variables";
  for (const auto& v : model.variables) out << ' ' << v;
  out << '\n';
  auto write_values = [&](std::string_view key, const Eigen::MatrixXd& m) {
    out << key;
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
      for (Eigen::Index j = 0; j < m.cols(); ++j) out << fmt::format(" {:.17g}", m(i, j));
    }
    out << '\n';
  };
  write_values("c", model.c);
  for (int i = 0; i < model.p; ++i) {
    write_values(fmt::format("A{}", i + 1), model.A[static_cast<std::size_t>(i)]);
  }
  write_values("sigma", model.sigma);
}

VarModel read_var_model(std::istream& in) {
  std::string line;
  std::size_t line_no = 0;
  auto next_fields = [&](std::string_view key, std::size_t count) {
    if (!csv::next_nonblank(in, line, line_no)) {
      throw DataError(fmt::format("var model: missing '{}' line", key), line_no);
    }
    std::istringstream ss(line);
    std::string got;
    ss >> got;
    if (got != key) {
      throw DataError(fmt::format("var model line {}: expected '{}', got '{}'", line_no, key, got),
                      line_no);
    }
    std::vector<std::string> fields;
    std::string f;
    while (ss >> f) fields.push_back(f);
    if (count != 0 && fields.size() != count) {
      throw DataError(fmt::format("var model line {}: '{}' needs {} values, got {}", line_no, key,
                                  count, fields.size()),
                      line_no);
    }
    return fields;
  };
  auto to_num = [&](const std::string& s) {
    const auto v = csv::parse_double(s);
    if (!v) throw DataError(fmt::format("var model line {}: bad number '{}'", line_no, s), line_no);
    return *v;
  };
  auto to_int = [&](const std::string& s) {
    const auto v = csv::parse_int(s);
    if (!v) throw DataError(fmt::format("var model line {}: bad integer '{}'", line_no, s), line_no);
    return *v;
  };
  auto read_matrix = [&](std::string_view key, Eigen::Index rows, Eigen::Index cols) {
    const auto f = next_fields(key, static_cast<std::size_t>(rows * cols));
    Eigen::MatrixXd m(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i)
      for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = to_num(f[static_cast<std::size_t>(i * cols + j)]);
    return m;
  };

  const auto magic = next_fields(kVarMagic, 1);
  if (to_int(magic[0]) != kVarFormatVersion) {
    throw DataError(fmt::format("var model: unsupported format version {}", magic[0]));
  }
  VarModel model;
  const auto k = to_int(next_fields("k", 1)[0]);
  model.p = static_cast<int>(to_int(next_fields("p", 1)[0]));
  model.n_obs = static_cast<std::size_t>(to_int(next_fields("n_obs", 1)[0]));
  if (k < 1 || model.p < 1) throw DataError("var model: k and p must be positive");
  model.variables = next_fields("variables", static_cast<std::size_t>(k));
  model.c = read_matrix("c", k, 1);
  for (int i = 0; i < model.p; ++i) model.A.push_back(read_matrix(fmt::format("A{}", i + 1), k, k));
  model.sigma = read_matrix("sigma", k, k);
  model.validate();
  return model;
}

}  // namespace ofi
