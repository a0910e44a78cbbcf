#pragma once

// Independent reference implementations and fixtures shared by the tests.
// Nothing here calls into the library's numerical routines.

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <unistd.h>

#include <Eigen/Dense>

#include "ofi/data_io.hpp"
#include "ofi/neural_net.hpp"
#include "ofi/rng.hpp"

namespace testsupport {

using Matrix = std::vector<std::vector<double>>;

// Solves (Z'Z) B = Z'Y by Gauss-Jordan elimination with partial pivoting on
// plain nested vectors. Returns B with one row per regressor.
inline Matrix normal_equations(const Eigen::MatrixXd& Z, const Eigen::MatrixXd& Y) {
  const std::size_t n = static_cast<std::size_t>(Z.rows());
  const std::size_t m = static_cast<std::size_t>(Z.cols());
  const std::size_t k = static_cast<std::size_t>(Y.cols());
  Matrix aug(m, std::vector<double>(m + k, 0.0));
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < m; ++j) {
      double s = 0.0;
      for (std::size_t t = 0; t < n; ++t) s += Z(t, i) * Z(t, j);
      aug[i][j] = s;
    }
    for (std::size_t j = 0; j < k; ++j) {
      double s = 0.0;
      for (std::size_t t = 0; t < n; ++t) s += Z(t, i) * Y(t, j);
      aug[i][m + j] = s;
    }
  }
  for (std::size_t col = 0; col < m; ++col) {
    std::size_t piv = col;
    for (std::size_t r = col + 1; r < m; ++r) {
      if (std::abs(aug[r][col]) > std::abs(aug[piv][col])) piv = r;
    }
    if (aug[piv][col] == 0.0) throw std::runtime_error("singular normal equations");
    std::swap(aug[piv], aug[col]);
    const double d = aug[col][col];
    for (auto& v : aug[col]) v /= d;
    for (std::size_t r = 0; r < m; ++r) {
      if (r == col) continue;
      const double f = aug[r][col];
      if (f == 0.0) continue;
      for (std::size_t j = col; j < m + k; ++j) aug[r][j] -= f * aug[col][j];
    }
  }
  Matrix B(m, std::vector<double>(k));
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < k; ++j) B[i][j] = aug[i][m + j];
  return B;
}

inline double act(ofi::Activation a, double x) {
  switch (a) {
    case ofi::Activation::ReLU:
      return x > 0.0 ? x : 0.0;
    case ofi::Activation::Tanh:
      return std::tanh(x);
    case ofi::Activation::Sigmoid:
      return 1.0 / (1.0 + std::exp(-x));
  }
  return x;
}

// Straight-line forward pass including both scalers.
inline std::vector<double> forward(const ofi::FnnModel& m, const std::vector<double>& input) {
  std::vector<double> h(input.size());
  for (std::size_t i = 0; i < input.size(); ++i) {
    h[i] = (input[i] - m.input_scaler.mean(static_cast<Eigen::Index>(i))) /
           m.input_scaler.scale(static_cast<Eigen::Index>(i));
  }
  for (std::size_t l = 0; l < m.layers.size(); ++l) {
    const auto& L = m.layers[l];
    std::vector<double> next(static_cast<std::size_t>(L.W.rows()));
    for (Eigen::Index r = 0; r < L.W.rows(); ++r) {
      double s = L.b(r);
      for (Eigen::Index c = 0; c < L.W.cols(); ++c) s += L.W(r, c) * h[static_cast<std::size_t>(c)];
      next[static_cast<std::size_t>(r)] = l + 1 < m.layers.size() ? act(m.topology.activation, s) : s;
    }
    h = std::move(next);
  }
  for (std::size_t i = 0; i < h.size(); ++i) {
    const auto e = static_cast<Eigen::Index>(i);
    h[i] = h[i] * m.target_scaler.scale(e) + m.target_scaler.mean(e);
  }
  return h;
}

inline ofi::CountSeries random_counts(std::uint64_t seed, std::size_t n, double mean = 30.0) {
  ofi::Rng rng(seed);
  ofi::CountSeries s;
  for (std::size_t t = 0; t < n; ++t) {
    s.push_back({static_cast<std::int64_t>(t), rng.poisson(mean), rng.poisson(mean)});
  }
  return s;
}

inline Eigen::MatrixXd random_matrix(ofi::Rng& rng, Eigen::Index rows, Eigen::Index cols,
                                     double lo = -1.0, double hi = 1.0) {
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = rng.uniform(lo, hi);
  return m;
}

// Integer VAR(1) with period-3 orbit (11,12) -> (7,11) -> (12,7): exactly
// representable counts, and the lagged regressors span full rank.
inline ofi::CountSeries period_three_counts(std::size_t n) {
  ofi::CountSeries s;
  std::int64_t b = 11;
  std::int64_t v = 12;
  for (std::size_t t = 0; t < n; ++t) {
    s.push_back({static_cast<std::int64_t>(t), b, v});
    const std::int64_t nb = 30 - b - v;
    const std::int64_t nv = b;
    b = nb;
    v = nv;
  }
  return s;
}

inline std::string slurp(const std::filesystem::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    path_ = std::filesystem::temp_directory_path() /
            ("ofi_test_" + tag + "_" + std::to_string(::getpid()) + "_" +
             std::to_string(counter()++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::string str(const std::string& name) const { return (path_ / name).string(); }

 private:
  static int& counter() {
    static int c = 0;
    return c;
  }
  std::filesystem::path path_;
};

}  // namespace testsupport
