#include <gtest/gtest.h>

#include <fstream>
#include <sstream>

#include "ofi/evaluation.hpp"
#include "ofi/hybrid.hpp"
#include "support.hpp"

using namespace ofi;

namespace {

PipelineConfig quick_config(std::uint64_t seed = 42) {
  PipelineConfig pc;
  pc.train.seed = seed;
  return pc;
}

CountSeries head(const CountSeries& s, std::size_t n) {
  return CountSeries(s.begin(), s.begin() + static_cast<std::ptrdiff_t>(n));
}

struct Holdout {
  EvalReport var;
  EvalReport hybrid;
};

Holdout compare_on(const SyntheticSpec& spec, std::uint64_t train_seed) {
  const auto s = generate_synthetic(spec);
  const auto cut = split_point(s.size(), 0.8);
  const auto pc = quick_config(train_seed);
  const auto train_part = head(s, cut);
  return {evaluate(predict(fit_var_only(train_part, pc), s, cut), "syn", "var"),
          evaluate(predict(fit_hybrid(train_part, pc), s, cut), "syn", "hybrid")};
}

}  // namespace

TEST(Config, Validation) {
  PipelineConfig pc;
  EXPECT_NO_THROW(pc.validate());
  EXPECT_EQ(pc.effective_fnn_lags(), 2);
  pc.fnn_lags = 3;
  EXPECT_EQ(pc.effective_fnn_lags(), 3);
  pc.var_lag = 0;
  EXPECT_THROW(pc.validate(), std::invalid_argument);
  EXPECT_EQ(parse_model_kind("hybrid"), ModelKind::Hybrid);
  EXPECT_EQ(parse_model_kind("var"), ModelKind::VarOnly);
  EXPECT_EQ(to_string(ModelKind::FnnOnly), "fnn");
}

TEST(VarOnly, NoiselessCountsPredictedExactly) {
  const auto s = testsupport::period_three_counts(60);
  auto pc = quick_config();
  pc.var_lag = 1;
  const auto bundle = fit_var_only(s, pc);
  const auto recs = predict(bundle, s);
  ASSERT_EQ(recs.size(), 59u);
  for (const auto& r : recs) {
    EXPECT_NEAR(r.predicted_ofi, r.actual_ofi, 1e-6);
    EXPECT_EQ(r.predicted_signal, r.actual_signal);
  }
}

TEST(VarOnly, WhiteNoiseHasNoSkill) {
  const auto s = testsupport::random_counts(31, 3000);
  const auto cut = split_point(s.size(), 0.8);
  const auto rep = evaluate(predict(fit_var_only(head(s, cut), quick_config()), s, cut), "wn", "v");
  EXPECT_LE(rep.r2, 0.05);
}

TEST(VarOnly, OnePredictionPerForecastableIndex) {
  SyntheticSpec spec;
  const auto s = generate_synthetic(spec);
  const auto bundle = fit_var_only(s, quick_config());
  const auto recs = predict(bundle, s);
  ASSERT_EQ(recs.size(), s.size() - 2);
  EXPECT_EQ(recs.front().index, 2u);
  EXPECT_EQ(recs.back().index, s.size() - 1);
}

TEST(FnnOnly, LearnsAlternatingPattern) {
  CountSeries s;
  for (int t = 0; t < 400; ++t) s.push_back({t, t % 2 ? 25 : 75, t % 2 ? 75 : 25});
  const auto cut = split_point(s.size(), 0.8);
  auto pc = quick_config();
  pc.var_lag = 1;
  const auto recs = predict(fit_fnn_only(head(s, cut), pc), s, cut);
  ASSERT_EQ(recs.size(), 80u);
  for (const auto& r : recs) {
    EXPECT_EQ(r.predicted_signal, r.actual_signal) << r.index;
    EXPECT_GT(r.predicted_ofi * r.actual_ofi, 0.0);
  }
}

TEST(FnnOnly, ConstantSeries) {
  CountSeries s;
  for (int t = 0; t < 120; ++t) s.push_back({t, 40, 20});
  const auto recs = predict(fit_fnn_only(s, quick_config()), s);
  for (const auto& r : recs) EXPECT_NEAR(r.predicted_ofi, 1.0 / 3.0, 0.05);
}

TEST(FnnOnly, DeterministicPerSeed) {
  SyntheticSpec spec;
  spec.length = 400;
  const auto s = generate_synthetic(spec);
  EXPECT_EQ(predict(fit_fnn_only(s, quick_config(5)), s), predict(fit_fnn_only(s, quick_config(5)), s));
  EXPECT_NE(predict(fit_fnn_only(s, quick_config(5)), s), predict(fit_fnn_only(s, quick_config(6)), s));
}

TEST(Hybrid, LinearDataLeavesNothingToLearn) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    SyntheticSpec spec;
    spec.seed = 500 + seed;
    spec.nonlinear_strength = 0.0;
    const auto h = compare_on(spec, derive_seed(spec.seed, 1));
    EXPECT_NEAR(h.hybrid.mse / h.var.mse, 1.0, 0.10) << "seed " << spec.seed;
  }
}

TEST(Hybrid, BeatsVarWhenNonlinearityPresent) {
  int wins = 0;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    SyntheticSpec spec;
    spec.seed = 600 + seed;
    const auto h = compare_on(spec, derive_seed(spec.seed, 1));
    wins += h.hybrid.mse < h.var.mse;
  }
  EXPECT_GE(wins, 4);
}

TEST(Hybrid, CombinesForecastAndResidual) {
  ModelBundle b;
  b.kind = ModelKind::Hybrid;
  b.config.var_lag = 1;
  b.config.fnn_lags = 1;
  b.config.hidden = {4};
  VarModel v;
  v.p = 1;
  v.c = Eigen::Vector2d(40.0, 60.0);
  v.A = {Eigen::MatrixXd::Zero(2, 2)};
  v.sigma = Eigen::MatrixXd::Identity(2, 2);
  v.n_obs = 10;
  b.var_part = v;
  FnnTopology t;
  t.input_dim = 2;
  t.hidden = {4};
  t.output_dim = 2;
  auto f = FnnModel::initialize(t, 1);
  f.zero_output();
  f.target_scaler.mean = Eigen::Vector2d(10.0, -10.0);
  b.fnn_part = f;
  ASSERT_NO_THROW(b.validate());

  const auto s = testsupport::random_counts(2, 6);
  const auto fc = forecast_orders(b, s);
  ASSERT_EQ(fc.size(), 4u);
  EXPECT_EQ(fc[0].var_forecast, Eigen::Vector2d(40.0, 60.0));
  EXPECT_EQ(fc[0].residual, Eigen::Vector2d(10.0, -10.0));
  EXPECT_EQ(fc[0].combined, Eigen::Vector2d(50.0, 50.0));
  const auto recs = predict(b, s);
  EXPECT_EQ(recs[0].predicted_ofi, 0.0);
  EXPECT_EQ(recs[0].predicted_signal, Signal::Hold);
}

TEST(Hybrid, AblationMatchesVarOnlyBitForBit) {
  SyntheticSpec spec;
  spec.length = 800;
  const auto s = generate_synthetic(spec);
  auto hybrid = fit_hybrid(head(s, 600), quick_config());
  hybrid.fnn_part->zero_output();
  const auto var = fit_var_only(head(s, 600), quick_config());
  EXPECT_EQ(predict(hybrid, s, 600), predict(var, s, 600));
}

TEST(Predict, PerfectModelReproducesSignals) {
  const auto s = testsupport::period_three_counts(90);
  auto pc = quick_config();
  pc.var_lag = 1;
  for (const auto& r : predict(fit_var_only(s, pc), s)) EXPECT_EQ(r.predicted_signal, r.actual_signal);
}

TEST(Predict, LengthIsSeriesMinusWarmup) {
  SyntheticSpec spec;
  spec.length = 300;
  const auto s = generate_synthetic(spec);
  for (auto kind : {ModelKind::VarOnly, ModelKind::FnnOnly, ModelKind::Hybrid}) {
    for (int h : {1, 4}) {
      auto pc = quick_config();
      pc.train.epochs = 2;
      pc.ofi.window_h = h;
      const auto b = fit_model(kind, s, pc);
      const std::size_t expect_warmup = kind == ModelKind::Hybrid ? 4u : std::max<std::size_t>(2, h - 1);
      EXPECT_EQ(b.warmup(), std::max<std::size_t>(expect_warmup, h - 1)) << to_string(kind);
      EXPECT_EQ(predict(b, s).size(), s.size() - b.warmup()) << to_string(kind);
      EXPECT_EQ(predict(b, s, 250).size(), 50u);
    }
  }
}

TEST(Predict, WindowedOfiUsesActualHistory) {
  const auto s = testsupport::period_three_counts(40);
  auto pc = quick_config();
  pc.var_lag = 1;
  pc.ofi.window_h = 3;
  const auto recs = predict(fit_var_only(s, pc), s);
  ASSERT_FALSE(recs.empty());
  for (const auto& r : recs) {
    double b = 0;
    double v = 0;
    for (std::size_t i = r.index - 2; i <= r.index; ++i) {
      b += static_cast<double>(s[i].buy);
      v += static_cast<double>(s[i].sell);
    }
    EXPECT_DOUBLE_EQ(r.actual_ofi, ofi::ofi(b, v));
    EXPECT_NEAR(r.predicted_ofi, r.actual_ofi, 1e-9);
  }
}

TEST(Persistence, BundleRoundTripPredictsIdentically) {
  SyntheticSpec spec;
  spec.length = 500;
  const auto s = generate_synthetic(spec);
  testsupport::TempDir dir("bundle");
  for (auto kind : {ModelKind::VarOnly, ModelKind::FnnOnly, ModelKind::Hybrid}) {
    auto pc = quick_config();
    pc.train.epochs = 5;
    pc.train.learning_rate = 0.003;
    pc.ofi.threshold = 0.15;
    const auto b = fit_model(kind, head(s, 400), pc);
    const auto path = dir.path() / std::string(to_string(kind));
    save_bundle(path, b);
    const auto back = load_bundle(path);
    EXPECT_EQ(back.kind, kind);
    EXPECT_EQ(back.config.train.learning_rate, 0.003);
    EXPECT_EQ(back.config.ofi.threshold, 0.15);
    EXPECT_EQ(predict(back, s, 400), predict(b, s, 400));
  }
}

TEST(Persistence, TamperedManifestNamesField) {
  SyntheticSpec spec;
  spec.length = 200;
  auto pc = quick_config();
  pc.train.epochs = 2;
  const auto b = fit_hybrid(generate_synthetic(spec), pc);
  testsupport::TempDir dir("tamper");
  save_bundle(dir.path(), b);
  const auto manifest = testsupport::slurp(dir.path() / "manifest.txt");
  auto tamper = [&](const std::string& from, const std::string& to) {
    auto text = manifest;
    const auto pos = text.find(from);
    ASSERT_NE(pos, std::string::npos);
    text.replace(pos, from.size(), to);
    std::ofstream(dir.path() / "manifest.txt", std::ios::binary) << text;
  };
  for (auto [from, to, field] : std::vector<std::array<std::string, 3>>{
           {"var_lag=2", "var_lag=3", "var_lag"},
           {"hidden=32,16", "hidden=32,8", "hidden"},
           {"kind=hybrid", "kind=var", "kind"},
           {"activation=relu", "activation=gelu", "activation"}}) {
    tamper(from, to);
    try {
      load_bundle(dir.path());
      ADD_FAILURE() << "no error for " << field;
    } catch (const std::exception& e) {
      EXPECT_NE(std::string(e.what()).find(field), std::string::npos) << e.what();
    }
  }
}

TEST(PredictionsCsv, RoundTrip) {
  SyntheticSpec spec;
  spec.length = 120;
  const auto s = generate_synthetic(spec);
  const auto recs = predict(fit_var_only(s, quick_config()), s);
  std::stringstream ss;
  write_predictions_csv(ss, recs);
  EXPECT_EQ(read_predictions_csv(ss), recs);
  std::istringstream empty("");
  EXPECT_THROW(read_predictions_csv(empty), std::exception);
  std::istringstream header_only("index,actual_ofi,predicted_ofi,actual_signal,predicted_signal\n");
  EXPECT_THROW(read_predictions_csv(header_only), std::exception);
}
