#include <gtest/gtest.h>

#include <fstream>
#include <sstream>

#include "ofi/cli.hpp"
#include "ofi/data_io.hpp"
#include "support.hpp"

namespace {

struct Run {
  int status;
  std::string out;
  std::string err;
};

Run ofi_cli(std::vector<std::string> args) {
  std::ostringstream out;
  std::ostringstream err;
  const int status = ofi::cli::run(args, out, err);
  return {status, out.str(), err.str()};
}

std::size_t line_count(const std::string& text) {
  return static_cast<std::size_t>(std::count(text.begin(), text.end(), '\n'));
}

std::string manifest_value(const std::string& manifest, const std::string& field) {
  std::istringstream in(manifest);
  std::string line;
  while (std::getline(in, line)) {
    if (line.rfind(field + "=", 0) == 0) return line.substr(field.size() + 1);
  }
  return "<missing>";
}

}  // namespace

TEST(CliWidths, Parse) {
  EXPECT_EQ(ofi::cli::parse_widths("32,16"), (std::vector<int>{32, 16}));
  EXPECT_EQ(ofi::cli::parse_widths("128-64-32"), (std::vector<int>{128, 64, 32}));
  EXPECT_TRUE(ofi::cli::parse_widths("none").empty());
  EXPECT_THROW(ofi::cli::parse_widths("32,x"), std::invalid_argument);
  EXPECT_THROW(ofi::cli::parse_widths("0"), std::invalid_argument);
}

TEST(CliSynth, WritesRowsAndSidecars) {
  testsupport::TempDir dir("synth");
  const auto csv = dir.str("syn.csv");
  auto r = ofi_cli({"synth", "--length", "3000", "--seed", "42", "--out", csv});
  ASSERT_EQ(r.status, 0) << r.err;
  const auto first = testsupport::slurp(csv);
  EXPECT_EQ(line_count(first), 3001u);
  EXPECT_NE(testsupport::slurp(csv + ".spec").find("seed=42"), std::string::npos);
  EXPECT_NE(testsupport::slurp(csv + ".config.toml").find("synth.length=3000"), std::string::npos);
  r = ofi_cli({"synth", "--length", "3000", "--seed", "42", "--out", csv});
  ASSERT_EQ(r.status, 0);
  EXPECT_EQ(testsupport::slurp(csv), first);
}

TEST(CliSynth, RejectsTinyLength) {
  testsupport::TempDir dir("synth_bad");
  const auto r = ofi_cli({"synth", "--length", "1", "--out", dir.str("x.csv")});
  EXPECT_NE(r.status, 0);
  EXPECT_NE(r.err.find("below minimum"), std::string::npos) << r.err;
}

TEST(CliFit, ManifestRecordsOptimalConfiguration) {
  testsupport::TempDir dir("fit");
  ofi::SyntheticSpec spec;
  spec.length = 400;
  ofi::save_counts_csv(dir.path() / "train.csv", ofi::generate_synthetic(spec));
  const auto bundle = dir.str("bundle");
  const std::vector<std::string> args{"fit",        "--model",      "hybrid", "--lag",
                                      "2",          "--hidden",     "32,16",  "--activation",
                                      "relu",       "--optimizer",  "adam",   "--epochs",
                                      "4",          "--data",       dir.str("train.csv"),
                                      "--out",      bundle};
  auto r = ofi_cli(args);
  ASSERT_EQ(r.status, 0) << r.err;
  EXPECT_NE(r.out.find("Results for equation buy_orders"), std::string::npos);
  const auto manifest = testsupport::slurp(dir.path() / "bundle" / "manifest.txt");
  EXPECT_EQ(manifest_value(manifest, "kind"), "hybrid");
  EXPECT_EQ(manifest_value(manifest, "var_lag"), "2");
  EXPECT_EQ(manifest_value(manifest, "hidden"), "32,16");
  EXPECT_EQ(manifest_value(manifest, "activation"), "relu");
  EXPECT_EQ(manifest_value(manifest, "optimizer"), "adam");
  EXPECT_TRUE(std::filesystem::exists(dir.path() / "bundle" / "training_trace.csv"));
  EXPECT_TRUE(std::filesystem::exists(dir.path() / "bundle" / "resolved_config.toml"));
  const auto fnn = testsupport::slurp(dir.path() / "bundle" / "fnn.txt");
  const auto var = testsupport::slurp(dir.path() / "bundle" / "var.txt");

  r = ofi_cli(args);
  ASSERT_EQ(r.status, 0);
  EXPECT_EQ(testsupport::slurp(dir.path() / "bundle" / "fnn.txt"), fnn);
  EXPECT_EQ(testsupport::slurp(dir.path() / "bundle" / "var.txt"), var);
}

TEST(CliFit, ShortSeriesError) {
  testsupport::TempDir dir("fit_short");
  ofi::save_counts_csv(dir.path() / "s.csv", testsupport::random_counts(1, 15));
  const auto r = ofi_cli({"fit", "--model", "var", "--lag", "10", "--data", dir.str("s.csv"),
                          "--out", dir.str("b")});
  EXPECT_NE(r.status, 0);
  EXPECT_NE(r.err.find("series too short"), std::string::npos) << r.err;
}

TEST(CliFit, ConfigFileAndFlagPrecedence) {
  testsupport::TempDir dir("fit_cfg");
  ofi::SyntheticSpec spec;
  spec.length = 200;
  ofi::save_counts_csv(dir.path() / "d.csv", ofi::generate_synthetic(spec));
  std::ofstream(dir.path() / "run.toml") << "[fit]\nmodel=\"var\"\nlag=5\nthreshold=0.2\n";
  auto r = ofi_cli({"--config", dir.str("run.toml"), "fit", "--data", dir.str("d.csv"), "--out",
                    dir.str("a")});
  ASSERT_EQ(r.status, 0) << r.err;
  auto m = testsupport::slurp(dir.path() / "a" / "manifest.txt");
  EXPECT_EQ(manifest_value(m, "kind"), "var");
  EXPECT_EQ(manifest_value(m, "var_lag"), "5");
  EXPECT_EQ(manifest_value(m, "threshold"), "0.20000000000000001");
  r = ofi_cli({"--config", dir.str("run.toml"), "fit", "--lag", "3", "--data", dir.str("d.csv"),
               "--out", dir.str("b")});
  ASSERT_EQ(r.status, 0) << r.err;
  m = testsupport::slurp(dir.path() / "b" / "manifest.txt");
  EXPECT_EQ(manifest_value(m, "var_lag"), "3");
  EXPECT_EQ(manifest_value(m, "kind"), "var");
}

TEST(CliFit, ResolvedConfigReproducesRun) {
  testsupport::TempDir dir("fit_repro");
  ofi::SyntheticSpec spec;
  spec.length = 300;
  ofi::save_counts_csv(dir.path() / "d.csv", ofi::generate_synthetic(spec));
  auto r = ofi_cli({"fit", "--data", dir.str("d.csv"), "--out", dir.str("a"), "--epochs", "3",
                    "--activation", "tanh", "--seed", "9"});
  ASSERT_EQ(r.status, 0) << r.err;
  r = ofi_cli({"--config", dir.str("a/resolved_config.toml"), "fit", "--out", dir.str("b")});
  ASSERT_EQ(r.status, 0) << r.err;
  EXPECT_EQ(testsupport::slurp(dir.path() / "a" / "fnn.txt"),
            testsupport::slurp(dir.path() / "b" / "fnn.txt"));
  EXPECT_EQ(testsupport::slurp(dir.path() / "a" / "manifest.txt"),
            testsupport::slurp(dir.path() / "b" / "manifest.txt"));
}

class CliPipeline : public ::testing::Test {
 protected:
  void SetUp() override {
    ofi::SyntheticSpec spec;
    spec.length = 500;
    const auto s = ofi::generate_synthetic(spec);
    ofi::save_counts_csv(dir.path() / "all.csv", s);
    ofi::save_counts_csv(dir.path() / "train.csv", ofi::CountSeries(s.begin(), s.begin() + 400));
    for (const char* model : {"var", "fnn", "hybrid"}) {
      const auto r = ofi_cli({"fit", "--model", model, "--epochs", "3", "--data",
                              dir.str("train.csv"), "--out", dir.str(std::string("b_") + model)});
      ASSERT_EQ(r.status, 0) << r.err;
    }
  }
  testsupport::TempDir dir{"pipeline"};
};

TEST_F(CliPipeline, PredictIsDeterministic) {
  const auto out = dir.str("p.csv");
  auto r = ofi_cli({"predict", "--bundle", dir.str("b_hybrid"), "--data", dir.str("all.csv"),
                    "--out", out, "--from", "400"});
  ASSERT_EQ(r.status, 0) << r.err;
  const auto first = testsupport::slurp(out);
  EXPECT_EQ(line_count(first), 101u);
  EXPECT_EQ(first.substr(0, first.find('\n')),
            "index,actual_ofi,predicted_ofi,actual_signal,predicted_signal");
  r = ofi_cli({"predict", "--bundle", dir.str("b_hybrid"), "--data", dir.str("all.csv"), "--out",
               out, "--from", "400"});
  ASSERT_EQ(r.status, 0);
  EXPECT_EQ(testsupport::slurp(out), first);
  r = ofi_cli({"evaluate", out});
  EXPECT_EQ(r.status, 0) << r.err;
}

TEST_F(CliPipeline, TamperedManifestIsRejected) {
  const auto manifest = dir.path() / "b_hybrid" / "manifest.txt";
  auto text = testsupport::slurp(manifest);
  text.replace(text.find("var_lag=2"), 9, "var_lag=4");
  std::ofstream(manifest, std::ios::binary) << text;
  const auto r = ofi_cli({"predict", "--bundle", dir.str("b_hybrid"), "--data",
                          dir.str("all.csv"), "--out", dir.str("p.csv")});
  EXPECT_NE(r.status, 0);
  EXPECT_NE(r.err.find("var_lag"), std::string::npos) << r.err;
}

TEST_F(CliPipeline, EvaluateThreeModelsOneBlock) {
  std::vector<std::string> files;
  for (const char* model : {"var", "fnn", "hybrid"}) {
    files.push_back(dir.str(std::string("p_") + model + ".csv"));
    const auto r = ofi_cli({"predict", "--bundle", dir.str(std::string("b_") + model), "--data",
                            dir.str("all.csv"), "--out", files.back(), "--from", "400"});
    ASSERT_EQ(r.status, 0) << r.err;
  }
  const auto r = ofi_cli({"evaluate", files[0], files[1], files[2], "--label", "VAR Only",
                          "--label", "FNN Only", "--label", "Hybrid VAR-FNN", "--dataset",
                          "Synthetic", "--out", dir.str("cmp.csv"), "--confusion-dir",
                          dir.str("conf")});
  ASSERT_EQ(r.status, 0) << r.err;
  EXPECT_EQ(r.out.find("Synthetic"), r.out.rfind("Synthetic"));
  EXPECT_LT(r.out.find("VAR Only"), r.out.find("Hybrid VAR-FNN"));
  EXPECT_EQ(line_count(testsupport::slurp(dir.path() / "cmp.csv")), 4u);
  EXPECT_TRUE(std::filesystem::exists(dir.path() / "conf" / "p_hybrid_confusion.csv"));

  const auto single = ofi_cli({"evaluate", files[2], "--out", dir.str("one.csv")});
  ASSERT_EQ(single.status, 0);
  EXPECT_EQ(line_count(testsupport::slurp(dir.path() / "one.csv")), 2u);
}

TEST(CliEvaluate, EmptyFileFails) {
  testsupport::TempDir dir("eval_empty");
  std::ofstream(dir.path() / "e.csv").close();
  const auto r = ofi_cli({"evaluate", dir.str("e.csv")});
  EXPECT_NE(r.status, 0);
  EXPECT_NE(r.err.find("empty"), std::string::npos) << r.err;
}

TEST(CliSweep, RestrictedAxes) {
  testsupport::TempDir dir("sweep");
  const auto out = dir.str("s.csv");
  const std::vector<std::string> args{"sweep", "--synthetic", "2",  "--length", "150",
                                      "--lags", "2",          "--architectures", "32,16",
                                      "--epochs", "2",        "--out", out};
  auto r = ofi_cli(args);
  ASSERT_EQ(r.status, 0) << r.err;
  const auto first = testsupport::slurp(out);
  EXPECT_EQ(line_count(first), 1u + 2u * 6u);
  EXPECT_NE(r.out.find("best mse"), std::string::npos);
  r = ofi_cli(args);
  ASSERT_EQ(r.status, 0);
  EXPECT_EQ(testsupport::slurp(out), first);
}

TEST(CliSweep, DefaultGridThreeDatasets) {
  testsupport::TempDir dir("sweep_full");
  const auto out = dir.str("s.csv");
  const auto r = ofi_cli({"sweep", "--synthetic", "3", "--length", "80", "--epochs", "1",
                          "--heatmap", dir.str("h.csv"), "--out", out});
  ASSERT_EQ(r.status, 0) << r.err;
  EXPECT_EQ(line_count(testsupport::slurp(out)), 361u);
  EXPECT_NE(testsupport::slurp(dir.path() / "h.csv").find("synthetic-3,accuracy,10,"),
            std::string::npos);
}

TEST(CliErrors, UnknownSubcommandAndMissingFlags) {
  EXPECT_NE(ofi_cli({"bogus"}).status, 0);
  EXPECT_NE(ofi_cli({}).status, 0);
  EXPECT_NE(ofi_cli({"fit"}).status, 0);
  EXPECT_NE(ofi_cli({"fit", "--data", "/nonexistent.csv"}).status, 0);
  EXPECT_EQ(ofi_cli({"--help"}).status, 0);
}
