#pragma once

#include <iosfwd>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "ofi/data_io.hpp"

namespace ofi {

/// Fitted VAR(p): Y_t = c + sum_i A_i Y_{t-i} + e_t.
struct VarModel {
  int p = 0;
  Eigen::VectorXd c;
  std::vector<Eigen::MatrixXd> A;  // A[i] multiplies Y_{t-1-i}
  Eigen::MatrixXd sigma;           // residual covariance, divided by n_obs
  std::size_t n_obs = 0;
  std::vector<std::string> variables{"buy_orders", "sell_orders"};

  int k() const { return static_cast<int>(c.size()); }

  /// One-step prediction for the row following `lags`, where lags.row(0) is
  /// the most recent observation.
  Eigen::VectorXd predict_from_lags(const Eigen::MatrixXd& lags) const;

  /// Throws if shapes are inconsistent or sigma is not symmetric.
  void validate() const;
};

struct CoefficientStat {
  std::string name;
  double coefficient = 0.0;
  double std_error = 0.0;
  double t_stat = 0.0;
  double p_value = 0.0;
};

struct EquationStats {
  std::string name;
  std::vector<CoefficientStat> coefficients;
};

/// Gaussian-likelihood information criteria use log det of the MLE residual
/// covariance plus a penalty on the k*(k*p + 1) free parameters:
///   aic = ld + 2 f / n,  bic = ld + ln(n) f / n,  hqic = ld + 2 ln(ln n) f / n.
/// Coefficient standard errors use the OLS normalization n - (k*p + 1).
struct FitDiagnostics {
  double aic = 0.0;
  double bic = 0.0;
  double hqic = 0.0;
  double fpe = 0.0;
  double log_likelihood = 0.0;
  double det_sigma = 0.0;
  std::size_t n_obs = 0;
  std::vector<EquationStats> equations;
};

struct VarFit {
  VarModel model;
  FitDiagnostics diagnostics;
};

/// Regressors Z = [1, L1.v1, L1.v2, ..., Lp.v1, Lp.v2] and targets Y.
struct LagDesign {
  Eigen::MatrixXd Z;
  Eigen::MatrixXd Y;
};

class RankDeficientError : public std::invalid_argument {
 public:
  RankDeficientError(const std::string& what, std::vector<std::string> columns)
      : std::invalid_argument(what), columns_(std::move(columns)) {}
  const std::vector<std::string>& columns() const noexcept { return columns_; }

 private:
  std::vector<std::string> columns_;
};

/// Rows of `series` as an n x 2 matrix (buy, sell).
Eigen::MatrixXd to_matrix(const CountSeries& series);

/// Design for targets at rows first_target..n-1. first_target defaults to p
/// and must be >= p.
LagDesign build_lag_matrix(const Eigen::MatrixXd& series, int p, int first_target = -1);
LagDesign build_lag_matrix(const CountSeries& series, int p);

/// Regressor labels in design column order.
std::vector<std::string> regressor_names(int p, const std::vector<std::string>& variables);

VarFit fit_var(const Eigen::MatrixXd& series, int p, int first_target = -1);
VarFit fit_var(const CountSeries& series, int p);

enum class Criterion { AIC, BIC };

struct LagScore {
  int p = 0;
  double aic = 0.0;
  double bic = 0.0;
};

/// Scores every candidate on the common sample that starts at the largest
/// candidate lag.
std::vector<LagScore> score_lags(const Eigen::MatrixXd& series, std::span<const int> candidates);

/// Candidate minimizing the criterion; ties go to the smaller lag.
int select_lag(const Eigen::MatrixXd& series, std::span<const int> candidates,
               Criterion criterion);
int select_lag(const CountSeries& series, std::span<const int> candidates, Criterion criterion);

/// Recursive forecast with zero shocks; each step feeds back as a lag. Uses
/// the last p rows of `history`. Result is steps x k.
Eigen::MatrixXd forecast(const VarModel& model, const Eigen::MatrixXd& history, int steps);

/// In-sample one-step predictions for rows p..n-1; (n-p) x k.
Eigen::MatrixXd fitted_values(const VarModel& model, const Eigen::MatrixXd& series);

/// actual - fitted for rows p..n-1; (n-p) x k.
Eigen::MatrixXd residuals(const VarModel& model, const Eigen::MatrixXd& series);
Eigen::MatrixXd residuals(const VarModel& model, const CountSeries& series);

/// Plain-text regression report: header block with information criteria,
/// one coefficient table per equation, residual correlation matrix.
std::string summary(const VarModel& model, const FitDiagnostics& diagnostics);

// Text persistence. Numbers are written with 17 significant digits so a
// save/load cycle reproduces every coefficient bit for bit.
void write_var_model(std::ostream& out, const VarModel& model);
VarModel read_var_model(std::istream& in);

}  // namespace ofi
