#include "covshrink/experiment.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "covshrink/config.hpp"
#include "covshrink/errors.hpp"

namespace {

namespace fs = std::filesystem;
using namespace covshrink;

ExperimentConfig parse_text(const std::string& text) {
  std::istringstream in(text);
  return parse_config(in, "test");
}

template <typename Fn>
std::string config_error_of(Fn&& fn) {
  try {
    fn();
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  EXPECT_TRUE(in.is_open()) << path;
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

// scratch directory removed on destruction
struct TempDir {
  fs::path path;

  explicit TempDir(const std::string& tag) : path(fs::temp_directory_path() / ("covshrink_" + tag)) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

// one column of a headered CSV, parsed as doubles
std::vector<double> csv_column(const std::string& body, std::size_t column) {
  std::vector<double> values;
  std::istringstream in(body);
  std::string line;
  std::getline(in, line);  // header
  while (std::getline(in, line)) {
    std::istringstream cells(line);
    std::string cell;
    for (std::size_t c = 0; c <= column; ++c) {
      EXPECT_TRUE(std::getline(cells, cell, ','));
    }
    values.push_back(std::stod(cell));
  }
  return values;
}

const char* kTinyBase =
    "n = 24\n"
    "t = 48\n"
    "k_folds = 3\n"
    "t_out = 6\n"
    "cross = two_peak(1, 3, 0.5)\n"
    "auto = exp_decay(3)\n"
    "seeds = 7, 8\n";

TEST(ParseConfig, RoundTripsEveryKey) {
  const ExperimentConfig config = parse_text(
      "# synthetic run\n"
      "n = 24\n"
      "t = 48  # trailing comment\n"
      "k_folds = 3\n"
      "t_out = 6\n"
      "cross = inverse_wishart(2)\n"
      "auto = varma(ar: 0.3; ma: 0.8, 0.5)\n"
      "noise = student_t(5)\n"
      "methods = mwcv, lp_eff(2.5), fit_exp_decay(logspace(0.1, 10, 3)), "
      "fit_varma(a0: 0.5, 1.0; b1: linspace(0, 0.6, 4))\n"
      "seeds = 1, 2, 3\n"
      "output_dir = somewhere\n");

  EXPECT_EQ(config.n, 24);
  EXPECT_EQ(config.t, 48);
  EXPECT_EQ(config.cv.k_folds, 3);
  EXPECT_EQ(config.cv.t_out, 6);
  EXPECT_DOUBLE_EQ(std::get<InverseWishart>(config.cross).kappa, 2.0);
  const Varma& model = std::get<Varma>(config.auto_true);
  ASSERT_EQ(model.ar.size(), 1u);
  EXPECT_DOUBLE_EQ(model.ar[0], 0.3);
  ASSERT_EQ(model.ma.size(), 2u);
  EXPECT_DOUBLE_EQ(model.ma[0], 0.8);
  EXPECT_DOUBLE_EQ(model.ma[1], 0.5);
  EXPECT_DOUBLE_EQ(std::get<StudentT>(config.noise).nu, 5.0);
  EXPECT_EQ(config.output_dir, "somewhere");
  ASSERT_EQ(config.seeds.size(), 3u);
  EXPECT_EQ(config.seeds[2], 3u);

  ASSERT_EQ(config.methods.size(), 4u);
  EXPECT_STREQ(method_label(config.methods[0]), "mwcv");
  EXPECT_DOUBLE_EQ(std::get<MethodLpEff>(config.methods[1]).tau_eff, 2.5);
  const auto& taus = std::get<MethodFitExp>(config.methods[2]).grid;
  ASSERT_EQ(taus.size(), 3u);
  EXPECT_DOUBLE_EQ(taus[0], 0.1);
  EXPECT_NEAR(taus[1], 1.0, 1e-12);
  EXPECT_DOUBLE_EQ(taus[2], 10.0);
  const VarmaGrid& grid = std::get<MethodFitVarma>(config.methods[3]).grid;
  ASSERT_EQ(grid.ma_grids.size(), 1u);
  EXPECT_EQ(grid.ma_grids[0], (std::vector<double>{0.5, 1.0}));
  ASSERT_EQ(grid.ar_grids.size(), 1u);
  ASSERT_EQ(grid.ar_grids[0].size(), 4u);
  EXPECT_DOUBLE_EQ(grid.ar_grids[0][0], 0.0);
  EXPECT_NEAR(grid.ar_grids[0][1], 0.2, 1e-12);
  EXPECT_DOUBLE_EQ(grid.ar_grids[0][3], 0.6);
}

TEST(ParseConfig, DefaultsMatchDocumentation) {
  const ExperimentConfig config = parse_text(kTinyBase);
  EXPECT_TRUE(std::holds_alternative<Gaussian>(config.noise));
  EXPECT_TRUE(config.methods.empty());
  EXPECT_EQ(config.output_dir, "out");

  const ExperimentConfig defaults = parse_text(
      "n = 500\nt = 1000\ncross = two_peak(1, 3, 0.5)\nauto = identity\nseeds = 1\n");
  EXPECT_EQ(defaults.cv.k_folds, 10);
  EXPECT_EQ(defaults.cv.t_out, 50);

  const ExperimentConfig fit = parse_text(std::string(kTinyBase) +
                                          "methods = fit_exp_decay, fit_varma\n");
  EXPECT_EQ(std::get<MethodFitExp>(fit.methods[0]).grid, default_tau_grid());
  const VarmaGrid& grid = std::get<MethodFitVarma>(fit.methods[1]).grid;
  EXPECT_EQ(grid.ma_grids, default_varma_grid().ma_grids);
  EXPECT_EQ(grid.ar_grids, default_varma_grid().ar_grids);
}

TEST(ParseConfig, ErrorsCarryOriginAndLineNumber) {
  const std::string unknown = config_error_of([] {
    parse_text("n = 24\nt = 48\nwat = 9\n");
  });
  EXPECT_NE(unknown.find("test:3"), std::string::npos) << unknown;
  EXPECT_NE(unknown.find("unknown key 'wat'"), std::string::npos) << unknown;

  const std::string negative_tau = config_error_of([] {
    parse_text("n = 24\nt = 48\ncross = two_peak(1, 3, 0.5)\nauto = exp_decay(-3)\nseeds = 1\n");
  });
  EXPECT_NE(negative_tau.find("test:4"), std::string::npos) << negative_tau;
  EXPECT_NE(negative_tau.find("tau must be positive"), std::string::npos) << negative_tau;
}

TEST(ParseConfig, RejectsMalformedInput) {
  // missing required keys
  EXPECT_THROW(parse_text("t = 48\ncross = two_peak(1, 3, 0.5)\nauto = identity\nseeds = 1\n"),
               ConfigError);
  EXPECT_THROW(parse_text("n = 24\nt = 48\nauto = identity\nseeds = 1\n"), ConfigError);
  EXPECT_THROW(parse_text("n = 24\nt = 48\ncross = two_peak(1, 3, 0.5)\nauto = identity\n"),
               ConfigError);
  // malformed lines and values
  EXPECT_THROW(parse_text(std::string(kTinyBase) + "noise\n"), ConfigError);
  EXPECT_THROW(parse_text(std::string(kTinyBase) + "noise = student_t(2\n"), ConfigError);
  EXPECT_THROW(parse_text(std::string(kTinyBase) + "noise = student_t(2)x\n"), ConfigError);
  EXPECT_THROW(parse_text(std::string(kTinyBase) + "methods = lp(3)\n"), ConfigError);
  EXPECT_THROW(parse_text(std::string(kTinyBase) + "methods = warp\n"), ConfigError);
  EXPECT_THROW(parse_text(std::string(kTinyBase) + "methods = linear(1.5)\n"), ConfigError);
  EXPECT_THROW(parse_text(std::string(kTinyBase) + "methods = fit_exp_decay(0, 1)\n"),
               ConfigError);
  EXPECT_THROW(parse_text(std::string(kTinyBase) + "methods = fit_varma(a1: 0.5)\n"), ConfigError);
  EXPECT_THROW(parse_text(std::string(kTinyBase) + "methods = fit_varma(a0: 0.5; a0: 1)\n"),
               ConfigError);
  EXPECT_THROW(parse_text(std::string(kTinyBase) + "methods = fit_exp_decay(linspace(1, 2))\n"),
               ConfigError);
  EXPECT_THROW(parse_text(std::string(kTinyBase) + "methods = fit_exp_decay(logspace(0, 2, 4))\n"),
               ConfigError);
  // duplicate key, duplicate method, bad seed
  EXPECT_THROW(parse_text(std::string(kTinyBase) + "t = 50\n"), ConfigError);
  EXPECT_THROW(parse_text(std::string(kTinyBase) + "methods = lp, lp\n"), ConfigError);
  EXPECT_THROW(parse_text("n = 24\nt = 48\ncross = two_peak(1, 3, 0.5)\nauto = identity\n"
                          "seeds = -1\n"),
               ConfigError);
  // dimension sanity
  EXPECT_THROW(parse_text("n = 1\nt = 48\ncross = two_peak(1, 3, 0.5)\nauto = identity\n"
                          "seeds = 1\n"),
               ConfigError);
  EXPECT_THROW(parse_text("n = 500\nt = 4\ncross = two_peak(1, 3, 0.5)\nauto = identity\n"
                          "seeds = 1\n"),
               ConfigError);
}

TEST(ParseConfig, VarmaAutoNeedsAtLeastOneSection) {
  EXPECT_THROW(parse_text(std::string(kTinyBase) + "noise = gaussian\nmethods = varma()\n"),
               ConfigError);
  const ExperimentConfig pure_ar = parse_text(
      "n = 24\nt = 48\ncross = two_peak(1, 3, 0.5)\nauto = varma(ar: 0.4)\nseeds = 1\n");
  const Varma& model = std::get<Varma>(pure_ar.auto_true);
  EXPECT_EQ(model.ma, (std::vector<double>{1.0}));
  EXPECT_EQ(model.ar, (std::vector<double>{0.4}));
}

TEST(RunExperiment, TinyEndToEndRunCoversEveryMethod) {
  TempDir dir("e2e");
  ExperimentConfig config = parse_text(
      std::string(kTinyBase) +
      "methods = mwcv, isotonic, lp, lp_eff(3), linear(0.5), exp_decay(3), "
      "varma(ar: 0.2; ma: 1, 0.4), fit_exp_decay(1, 3), fit_effective(1, 3), "
      "fit_varma(a0: 1; a1: 0, 0.4)\n");
  config.output_dir = (dir.path / "run").string();

  const ExperimentReport report = run_experiment(config);
  ASSERT_EQ(report.succeeded, (std::vector<std::uint64_t>{7, 8}));
  EXPECT_TRUE(report.failures.empty());
  ASSERT_EQ(report.methods.size(), 10u);

  double mse_sample = report.methods[0].mse_sample_mean;
  for (const MethodSummary& m : report.methods) {
    ASSERT_EQ(m.ratio_per_seed.size(), 2u) << m.name;
    for (double r : m.ratio_per_seed) {
      EXPECT_TRUE(std::isfinite(r) && r > 0.0) << m.name;
    }
    EXPECT_NEAR(m.ratio_mean, (m.ratio_per_seed[0] + m.ratio_per_seed[1]) / 2.0, 1e-12);
    // the denominator Tr(E - C)^2 is method-independent
    EXPECT_DOUBLE_EQ(m.mse_sample_mean, mse_sample);
  }

  // fitted parameters recorded per seed, for fit methods only
  for (const MethodSummary& m : report.methods) {
    if (m.name.rfind("fit_", 0) == 0) {
      EXPECT_TRUE(m.is_fit);
      ASSERT_FALSE(m.fitted.empty()) << m.name;
      for (const auto& [label, values] : m.fitted) {
        EXPECT_EQ(values.size(), 2u) << m.name << "." << label;
      }
    } else {
      EXPECT_FALSE(m.is_fit);
      EXPECT_TRUE(m.fitted.empty());
    }
  }
  const auto& varma_fit = report.methods[9];
  ASSERT_EQ(varma_fit.fitted.size(), 2u);
  EXPECT_EQ(varma_fit.fitted[0].first, "a0");
  EXPECT_EQ(varma_fit.fitted[1].first, "a1");

  // manifest: every requested method exactly once, all files exist
  std::size_t spectra = 0;
  for (const std::string& name : report.files) {
    EXPECT_TRUE(fs::exists(fs::path(config.output_dir) / name)) << name;
    spectra += name.rfind("spectra_", 0) == 0;
  }
  EXPECT_EQ(spectra, report.methods.size());
  for (const MethodSummary& m : report.methods) {
    EXPECT_EQ(std::count(report.files.begin(), report.files.end(), "spectra_" + m.name + ".csv"),
              1);
  }
  EXPECT_EQ(std::count(report.files.begin(), report.files.end(), "report.json"), 1);
  EXPECT_EQ(std::count(report.files.begin(), report.files.end(), "density_grid.csv"), 1);
  EXPECT_EQ(std::count(report.files.begin(), report.files.end(), "oracle_scatter.csv"), 1);
  EXPECT_TRUE(std::is_sorted(report.files.begin(), report.files.end()));
}

TEST(RunExperiment, CsvBundleIsWellFormed) {
  TempDir dir("csv");
  ExperimentConfig config =
      parse_text(std::string(kTinyBase) + "methods = lp, isotonic, mwcv\n");
  config.output_dir = (dir.path / "run").string();
  run_experiment(config);
  const fs::path out(config.output_dir);

  const std::string spectra = slurp(out / "spectra_lp.csv");
  EXPECT_EQ(spectra.substr(0, spectra.find('\n')), "rank,lambda,xi");
  const auto ranks = csv_column(spectra, 0);
  const auto lambdas = csv_column(spectra, 1);
  ASSERT_EQ(ranks.size(), 24u);
  EXPECT_DOUBLE_EQ(ranks.front(), 1.0);
  EXPECT_DOUBLE_EQ(ranks.back(), 24.0);
  EXPECT_TRUE(std::is_sorted(lambdas.begin(), lambdas.end()));

  // isotonic output is nondecreasing in rank
  const auto iso = csv_column(slurp(out / "spectra_isotonic.csv"), 2);
  EXPECT_TRUE(std::is_sorted(iso.begin(), iso.end()));

  const std::string density = slurp(out / "density_grid.csv");
  EXPECT_EQ(density.substr(0, density.find('\n')), "lambda,rho");
  const auto grid = csv_column(density, 0);
  const auto rho = csv_column(density, 1);
  ASSERT_EQ(grid.size(), 256u);
  EXPECT_TRUE(std::is_sorted(grid.begin(), grid.end()));
  EXPECT_GE(grid.front(), 0.0);
  for (double r : rho) {
    EXPECT_GE(r, 0.0);
  }

  const std::string scatter = slurp(out / "oracle_scatter.csv");
  EXPECT_EQ(scatter.substr(0, scatter.find('\n')), "rank,lambda,xi_mwcv");
  EXPECT_EQ(csv_column(scatter, 2).size(), 24u);
}

TEST(RunExperiment, OracleScatterOnlyWhenOracleIsComputed) {
  TempDir dir("noracle");
  ExperimentConfig config = parse_text(std::string(kTinyBase) + "methods = lp\n");
  config.output_dir = (dir.path / "run").string();
  const ExperimentReport report = run_experiment(config);
  EXPECT_EQ(std::count(report.files.begin(), report.files.end(), "oracle_scatter.csv"), 0);
  EXPECT_FALSE(fs::exists(fs::path(config.output_dir) / "oracle_scatter.csv"));
}

TEST(RunExperiment, ReportJsonIsDeterministic) {
  TempDir dir("det");
  ExperimentConfig config = parse_text(
      std::string(kTinyBase) + "methods = lp, isotonic, fit_effective(1, 3)\n");

  config.output_dir = (dir.path / "a").string();
  run_experiment(config);
  const std::string first = slurp(fs::path(config.output_dir) / "report.json");

  run_experiment(config);
  EXPECT_EQ(slurp(fs::path(config.output_dir) / "report.json"), first);

  // a different output directory must not leak into the report
  config.output_dir = (dir.path / "b").string();
  run_experiment(config);
  EXPECT_EQ(slurp(fs::path(config.output_dir) / "report.json"), first);
}

TEST(RunExperiment, RepeatedSeedGivesIdenticalRows) {
  TempDir dir("dup");
  ExperimentConfig config = parse_text(
      "n = 24\nt = 48\nk_folds = 3\nt_out = 6\ncross = two_peak(1, 3, 0.5)\n"
      "auto = exp_decay(3)\nseeds = 42, 42\nmethods = lp, linear(0.3)\n");
  config.output_dir = (dir.path / "run").string();
  const ExperimentReport report = run_experiment(config);
  for (const MethodSummary& m : report.methods) {
    ASSERT_EQ(m.ratio_per_seed.size(), 2u);
    EXPECT_DOUBLE_EQ(m.ratio_per_seed[0], m.ratio_per_seed[1]);
    EXPECT_DOUBLE_EQ(m.ratio_std, 0.0);
  }
}

TEST(RunExperiment, EmptyMethodListYieldsMetadataOnlyReport) {
  TempDir dir("meta");
  ExperimentConfig config = parse_text(kTinyBase);
  config.output_dir = (dir.path / "run").string();
  const ExperimentReport report = run_experiment(config);
  EXPECT_EQ(report.succeeded.size(), 2u);
  EXPECT_TRUE(report.methods.empty());
  EXPECT_EQ(report.files, (std::vector<std::string>{"density_grid.csv", "report.json"}));

  const auto doc = nlohmann::json::parse(slurp(fs::path(config.output_dir) / "report.json"));
  EXPECT_EQ(doc.at("schema_version"), 1);
  EXPECT_TRUE(doc.at("methods").empty());
  EXPECT_EQ(doc.at("experiment").at("t_total"), 48 + 3 * 6);
}

TEST(RunExperiment, FailingSeedIsRecordedAndSkipped) {
  TempDir dir("fail");
  ExperimentConfig config = parse_text(
      std::string(kTinyBase) + "methods = lp, fit_effective(1e12, 1e13)\n");
  config.output_dir = (dir.path / "run").string();
  const ExperimentReport report = run_experiment(config);

  EXPECT_TRUE(report.succeeded.empty());
  ASSERT_EQ(report.failures.size(), 2u);
  EXPECT_EQ(report.failures[0].first, 7u);
  EXPECT_NE(report.failures[0].second.find("grid point"), std::string::npos);
  for (const MethodSummary& m : report.methods) {
    EXPECT_TRUE(m.ratio_per_seed.empty());
  }
  // report.json still written; no per-seed artifacts
  EXPECT_EQ(report.files, (std::vector<std::string>{"report.json"}));
  const auto doc = nlohmann::json::parse(slurp(fs::path(config.output_dir) / "report.json"));
  EXPECT_EQ(doc.at("seeds").at("failed").size(), 2u);
  EXPECT_TRUE(doc.at("methods").at(0).at("frobenius_ratio").at("mean").is_null());
}

TEST(RunExperiment, RejectsInvalidConfig) {
  ExperimentConfig config;
  config.n = 24;
  config.t = 48;
  EXPECT_THROW(run_experiment(config), ConfigError);  // no seeds

  config.seeds = {1};
  config.n = 1;
  EXPECT_THROW(run_experiment(config), ConfigError);

  config.n = 24;
  config.methods = {MethodLp{}, MethodLp{}};
  EXPECT_THROW(run_experiment(config), ConfigError);
}

TEST(RunExperiment, RatiosRoundToFourDecimalsInJson) {
  TempDir dir("round");
  ExperimentConfig config = parse_text(std::string(kTinyBase) + "methods = lp\n");
  config.output_dir = (dir.path / "run").string();
  const ExperimentReport report = run_experiment(config);
  const auto doc = nlohmann::json::parse(slurp(fs::path(config.output_dir) / "report.json"));
  const double mean = doc.at("methods").at(0).at("frobenius_ratio").at("mean").get<double>();
  EXPECT_NEAR(mean, report.methods[0].ratio_mean, 5e-5);
  EXPECT_DOUBLE_EQ(mean * 1e4, std::round(mean * 1e4));
}

}  // namespace
