#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "ofi/evaluation.hpp"
#include "support.hpp"

using namespace ofi;
using S = Signal;

namespace {

std::vector<double> random_values(Rng& rng, int n) {
  std::vector<double> v(n);
  for (auto& x : v) x = rng.uniform(-1.0, 1.0);
  return v;
}

EvalReport report(std::string ds, std::string model, double mse_v) {
  EvalReport r;
  r.dataset = std::move(ds);
  r.model = std::move(model);
  r.mse = mse_v;
  r.mae = 0.25;
  r.r2 = -0.125;
  r.intensity_accuracy = 0.5037;
  r.intensity_precision = 0.5077;
  return r;
}

}  // namespace

TEST(Mse, Examples) {
  const std::vector<double> a{0.3, -0.2, 0.9};
  EXPECT_EQ(mse(a, a), 0.0);
  EXPECT_EQ(mse(std::vector<double>{0, 0}, std::vector<double>{1, 1}), 1.0);
  EXPECT_THROW(mse(a, std::vector<double>{1.0}), std::invalid_argument);
  EXPECT_THROW(mse(std::vector<double>{}, std::vector<double>{}), std::invalid_argument);
}

TEST(Mse, MatchesSecondAccumulation) {
  Rng rng(1);
  const auto a = random_values(rng, 100);
  const auto p = random_values(rng, 100);
  // Pairwise (tree) summation in long double, a different order and width.
  std::vector<long double> sq(100);
  for (int i = 0; i < 100; ++i) sq[i] = (static_cast<long double>(a[i]) - p[i]) * (a[i] - p[i]);
  for (std::size_t w = 1; w < sq.size(); w *= 2)
    for (std::size_t i = 0; i + w < sq.size(); i += 2 * w) sq[i] += sq[i + w];
  EXPECT_NEAR(mse(a, p), static_cast<double>(sq[0] / 100.0L), 1e-12);
}

TEST(Mae, Examples) {
  const std::vector<double> a{0.3, -0.2};
  EXPECT_EQ(mae(a, a), 0.0);
  EXPECT_EQ(mae(std::vector<double>{0, 0}, std::vector<double>{1, -1}), 1.0);
}

TEST(Mae, BoundedByRootMse) {
  Rng rng(2);
  for (int trial = 0; trial < 200; ++trial) {
    const int n = 1 + static_cast<int>(rng.below(50));
    const auto a = random_values(rng, n);
    const auto p = random_values(rng, n);
    EXPECT_LE(mae(a, p), std::sqrt(mse(a, p)) + 1e-15);
  }
}

TEST(RSquared, Examples) {
  const std::vector<double> a{0.1, -0.4, 0.7, 0.2};
  EXPECT_EQ(r_squared(a, a), 1.0);
  const double mean = (0.1 - 0.4 + 0.7 + 0.2) / 4.0;
  EXPECT_NEAR(r_squared(a, std::vector<double>(4, mean)), 0.0, 1e-15);
  std::vector<double> anti;
  for (double v : a) anti.push_back(2 * mean - v);
  EXPECT_LT(r_squared(a, anti), 0.0);
  EXPECT_THROW(r_squared(std::vector<double>{1, 1}, std::vector<double>{1, 2}), std::domain_error);
}

TEST(Intensity, AccuracyCount) {
  const std::vector<S> a{S::Buy, S::Sell, S::Hold};
  const std::vector<S> p{S::Buy, S::Sell, S::Sell};
  EXPECT_DOUBLE_EQ(intensity_metrics(a, p).accuracy, 2.0 / 3.0);
}

TEST(Intensity, PerfectPrediction) {
  const std::vector<S> a{S::Buy, S::Sell, S::Hold, S::Buy};
  const auto m = intensity_metrics(a, a);
  EXPECT_EQ(m.accuracy, 1.0);
  EXPECT_EQ(m.precision, 1.0);
}

TEST(Intensity, HandCountedMacroPrecision) {
  const std::vector<S> a{S::Buy, S::Buy, S::Sell, S::Sell};
  const std::vector<S> p{S::Buy, S::Sell, S::Sell, S::Sell};
  const auto m = intensity_metrics(a, p);
  EXPECT_DOUBLE_EQ(m.accuracy, 0.75);
  EXPECT_DOUBLE_EQ(m.precision, 5.0 / 6.0);
  EXPECT_EQ(m.per_class_precision[class_index(S::Buy)], 1.0);
  EXPECT_DOUBLE_EQ(*m.per_class_precision[class_index(S::Sell)], 2.0 / 3.0);
  EXPECT_FALSE(m.per_class_precision[class_index(S::Hold)].has_value());
  // Confusion [actual][predicted] in BUY, SELL, HOLD order.
  EXPECT_EQ(m.confusion.counts[0][0], 1u);
  EXPECT_EQ(m.confusion.counts[0][1], 1u);
  EXPECT_EQ(m.confusion.counts[1][1], 2u);
  EXPECT_EQ(m.confusion.total(), 4u);

  EXPECT_DOUBLE_EQ(intensity_metrics(a, p, PrecisionAverage::Micro).precision, 0.75);
  // Weighted by actual support: BUY 2 x 1, SELL 2 x 2/3.
  EXPECT_DOUBLE_EQ(intensity_metrics(a, p, PrecisionAverage::Weighted).precision, 5.0 / 6.0);
}

TEST(Intensity, LengthMismatch) {
  EXPECT_THROW(intensity_metrics(std::vector<S>{S::Buy}, std::vector<S>{}), std::invalid_argument);
}

TEST(Evaluate, FromRecords) {
  std::vector<PredictionRecord> recs{{0, 0.3, 0.2, S::Buy, S::Buy},
                                     {1, -0.5, -0.05, S::Sell, S::Hold},
                                     {2, 0.0, 0.1, S::Hold, S::Hold}};
  const auto r = evaluate(recs, "d", "m");
  EXPECT_NEAR(r.mse, (0.01 + 0.2025 + 0.01) / 3.0, 1e-15);
  EXPECT_NEAR(r.mae, (0.1 + 0.45 + 0.1) / 3.0, 1e-15);
  EXPECT_DOUBLE_EQ(r.intensity_accuracy, 2.0 / 3.0);
  EXPECT_DOUBLE_EQ(r.intensity_precision, (1.0 + 0.5) / 2.0);
  EXPECT_THROW(evaluate({}, "d", "m"), std::invalid_argument);
}

TEST(Comparison, SingleRow) {
  const auto out = render_comparison({report("Synthetic", "VAR Only", 0.228)});
  EXPECT_NE(out.table.find("Synthetic"), std::string::npos);
  EXPECT_NE(out.table.find("0.228"), std::string::npos);
  EXPECT_NE(out.table.find("50.37%"), std::string::npos);
  EXPECT_NE(out.table.find("50.77%"), std::string::npos);
  EXPECT_EQ(std::count(out.csv.begin(), out.csv.end(), '\n'), 2);
}

TEST(Comparison, GroupedBlock) {
  const auto out = render_comparison({report("BTCUSD", "VAR Only", 0.3),
                                      report("BTCUSD", "FNN Only", 0.2),
                                      report("BTCUSD", "Hybrid VAR-FNN", 0.1)});
  // The dataset name appears once, on the first row of its block.
  EXPECT_EQ(out.table.find("BTCUSD"), out.table.rfind("BTCUSD"));
  const auto v = out.table.find("VAR Only");
  const auto f = out.table.find("FNN Only");
  const auto h = out.table.find("Hybrid VAR-FNN");
  EXPECT_LT(v, f);
  EXPECT_LT(f, h);
  for (const char* col : {"MSE", "MAE", "R^2", "Accuracy (Intensity)", "Precision (Intensity)"}) {
    EXPECT_NE(out.table.find(col), std::string::npos) << col;
  }
}

TEST(Comparison, CsvRoundTrip) {
  Rng rng(3);
  std::vector<EvalReport> reps;
  for (const char* ds : {"a", "b"}) {
    for (const char* m : {"VAR Only", "Hybrid VAR-FNN"}) {
      auto r = report(ds, m, rng.uniform());
      r.mae = rng.uniform();
      r.r2 = rng.uniform(-1, 1);
      reps.push_back(r);
    }
  }
  std::istringstream in(render_comparison(reps).csv);
  const auto back = read_report_csv(in);
  ASSERT_EQ(back.size(), reps.size());
  for (std::size_t i = 0; i < reps.size(); ++i) {
    EXPECT_EQ(back[i].dataset, reps[i].dataset);
    EXPECT_EQ(back[i].model, reps[i].model);
    EXPECT_EQ(back[i].mse, reps[i].mse);
    EXPECT_EQ(back[i].mae, reps[i].mae);
    EXPECT_EQ(back[i].r2, reps[i].r2);
    EXPECT_EQ(back[i].intensity_accuracy, reps[i].intensity_accuracy);
  }
}

TEST(Comparison, ConfusionCsvLayout) {
  Confusion c;
  c.counts[0][0] = 3;
  c.counts[1][2] = 1;
  EXPECT_EQ(confusion_csv(c), "actual\\predicted,BUY,SELL,HOLD\nBUY,3,0,0\nSELL,0,0,1\nHOLD,0,0,0\n");
  EXPECT_EQ(model_label(ModelKind::Hybrid), "Hybrid VAR-FNN");
}
