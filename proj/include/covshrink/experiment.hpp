#pragma once

// Synthetic-experiment driver: generates sandwich samples, runs every
// requested estimator against the known population matrix, averages the
// Frobenius ratios over seeds, and writes report.json plus the CSV bundle.
//
// Output is deterministic: no timestamps, fixed key order, fixed float
// formatting. Running the same config twice yields byte-identical files.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include <json.hpp>

#include "covshrink/config.hpp"
#include "covshrink/datagen.hpp"
#include "covshrink/errors.hpp"
#include "covshrink/fitting.hpp"
#include "covshrink/kde.hpp"
#include "covshrink/linalg.hpp"
#include "covshrink/metrics.hpp"
#include "covshrink/oracle.hpp"
#include "covshrink/shrinkage.hpp"
#include "covshrink/transforms.hpp"

namespace covshrink {

struct MethodSummary {
  std::string name;
  std::vector<double> ratio_per_seed;  // aligned with ExperimentReport::succeeded
  double ratio_mean = 0.0;
  double ratio_std = 0.0;  // population standard deviation over seeds
  double mse_estimator_mean = 0.0;
  double mse_sample_mean = 0.0;
  bool is_fit = false;
  // parameter name -> fitted value per successful seed
  std::vector<std::pair<std::string, std::vector<double>>> fitted;
};

struct ExperimentReport {
  std::vector<std::uint64_t> succeeded;
  std::vector<std::pair<std::uint64_t, std::string>> failures;
  std::vector<MethodSummary> methods;
  std::vector<std::string> files;  // bare names inside output_dir, sorted
};

namespace detail {

struct MethodOutcome {
  Vector xi;
  LabeledParams fitted;
};

// Applies one method to an eigendecomposed sample. Fits score the grid at
// the coarse quadrature resolution, then the winning parameters are
// re-applied at the default resolution.
struct MethodEvaluator {
  const SpectralEstimate& spec;
  double q;
  Index n;
  Index t;
  const OracleResult& oracle;

  MethodOutcome operator()(const MethodMwcv&) const { return {oracle.xi_raw, {}}; }

  MethodOutcome operator()(const MethodIsotonic&) const { return {oracle.xi_isotonic, {}}; }

  MethodOutcome operator()(const MethodLp&) const { return {shrink_lp(spec, q), {}}; }

  MethodOutcome operator()(const MethodLpEff& m) const {
    return {shrink_lp_effective(spec, n, t, m.tau_eff), {}};
  }

  MethodOutcome operator()(const MethodLinear& m) const {
    return {shrink_linear(spec.lambdas, m.alpha_s), {}};
  }

  MethodOutcome operator()(const MethodCorrExp& m) const {
    TransformContext ctx(ExpDecay{m.tau});
    return {shrink_correlated(spec, q, ctx), {}};
  }

  MethodOutcome operator()(const MethodCorrVarma& m) const {
    TransformContext ctx(m.model);
    return {shrink_correlated(spec, q, ctx), {}};
  }

  MethodOutcome operator()(const MethodFitExp& m) const {
    const FitResult res = run_fit(ExpDecayTau{m.grid});
    TransformContext ctx(ExpDecay{res.best_params.front().second});
    return {shrink_correlated(spec, q, ctx), res.best_params};
  }

  MethodOutcome operator()(const MethodFitEff& m) const {
    const FitResult res = run_fit(EffectiveTau{m.grid});
    return {shrink_lp_effective(spec, n, t, res.best_params.front().second), res.best_params};
  }

  MethodOutcome operator()(const MethodFitVarma& m) const {
    const FitResult res = run_fit(m.grid);
    Varma model;
    for (const auto& [label, value] : res.best_params) {
      (label[0] == 'a' ? model.ma : model.ar).push_back(value);
    }
    TransformContext ctx(model);
    return {shrink_correlated(spec, q, ctx), res.best_params};
  }

 private:
  FitResult run_fit(FitFamily family) const {
    FitSpec fit;
    fit.family = std::move(family);
    fit.objective_ref = oracle;
    return fit_shrinkage_params(spec, q, fit);
  }
};

inline bool method_needs_oracle(const MethodSpec& method) {
  return std::holds_alternative<MethodMwcv>(method) ||
         std::holds_alternative<MethodIsotonic>(method) ||
         std::holds_alternative<MethodFitExp>(method) ||
         std::holds_alternative<MethodFitEff>(method) ||
         std::holds_alternative<MethodFitVarma>(method);
}

inline bool method_is_fit(const MethodSpec& method) {
  return std::holds_alternative<MethodFitExp>(method) ||
         std::holds_alternative<MethodFitEff>(method) ||
         std::holds_alternative<MethodFitVarma>(method);
}

inline std::string format_real(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

inline std::string format_compact(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%g", v);
  return buf;
}

inline double round4(double v) { return std::round(v * 1e4) / 1e4; }

inline std::string describe_list(const std::vector<double>& values) {
  std::string out;
  for (std::size_t i = 0; i < values.size(); ++i) {
    out += (i == 0 ? "" : ", ") + format_compact(values[i]);
  }
  return out;
}

inline std::string describe_cross(const CrossModel& model) {
  struct V {
    std::string operator()(const TwoPeak& m) const {
      return "two_peak(" + format_compact(m.low) + ", " + format_compact(m.high) + ", " +
             format_compact(m.fraction_high) + ")";
    }
    std::string operator()(const InverseWishart& m) const {
      return "inverse_wishart(" + format_compact(m.kappa) + ")";
    }
    std::string operator()(const ExplicitCross&) const { return "explicit"; }
  };
  return std::visit(V{}, model);
}

inline std::string describe_auto(const AutoModel& model) {
  struct V {
    std::string operator()(const IdentityAuto&) const { return "identity"; }
    std::string operator()(const ExpDecay& m) const {
      return "exp_decay(" + format_compact(m.tau) + ")";
    }
    std::string operator()(const Varma& m) const {
      std::string out = "varma(";
      if (!m.ar.empty()) {
        out += "ar: " + describe_list(m.ar) + "; ";
      }
      out += "ma: " + describe_list(m.ma) + ")";
      return out;
    }
  };
  return std::visit(V{}, model);
}

inline std::string describe_noise(const NoiseDist& noise) {
  struct V {
    std::string operator()(const Gaussian&) const { return "gaussian"; }
    std::string operator()(const StudentT& m) const {
      return "student_t(" + format_compact(m.nu) + ")";
    }
  };
  return std::visit(V{}, noise);
}

inline void write_text_file(const std::filesystem::path& path, const std::string& body) {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw std::runtime_error("cannot open '" + path.string() + "' for writing");
  }
  out << body;
  if (!out) {
    throw std::runtime_error("write failed for '" + path.string() + "'");
  }
}

}  // namespace detail

/// Runs every requested method on every seed and writes the output bundle
/// into config.output_dir: report.json always; spectra_<method>.csv,
/// density_grid.csv, and oracle_scatter.csv from the first successful seed.
/// A failing module aborts only its seed; the failure is recorded in the
/// report. Callers decide how to treat zero successful seeds.
inline ExperimentReport run_experiment(const ExperimentConfig& config) {
  validate_config(config);
  namespace fs = std::filesystem;

  const Index n = config.n;
  const Index t = config.t;
  const double q = double(n) / double(t);
  CvConfig cv = config.cv;
  cv.t_train = t;
  const Index t_total = t + Index(cv.k_folds) * cv.t_out;
  const std::size_t n_methods = config.methods.size();

  bool needs_oracle = false;
  for (const MethodSpec& method : config.methods) {
    needs_oracle = needs_oracle || detail::method_needs_oracle(method);
  }

  ExperimentReport report;
  for (std::size_t i = 0; i < n_methods; ++i) {
    MethodSummary summary;
    summary.name = method_label(config.methods[i]);
    summary.is_fit = detail::method_is_fit(config.methods[i]);
    report.methods.push_back(std::move(summary));
  }

  // first-successful-seed artifacts for the CSV bundle
  Vector first_lambdas;
  SpectralEstimate first_spec;
  Vector first_xi_mwcv;
  std::vector<Vector> first_xis;
  bool have_first = false;
  bool first_has_oracle = false;

  for (const std::uint64_t seed : config.seeds) {
    try {
      const SandwichSample sample =
          generate_sandwich(config.cross, config.auto_true, config.noise, n, t, t_total, seed);
      const Matrix y_window = sample.y.leftCols(t);
      const Matrix e = (y_window * y_window.transpose()) / double(t);
      const SymEig eig = sym_eig(e);
      const SpectralEstimate spec = estimate_spectrum(eig.values, t);

      OracleResult oracle;
      if (needs_oracle) {
        oracle.lambdas_ref = eig.values;
        oracle.xi_raw = oracle_mwcv(sample.y, cv);
        oracle.xi_isotonic = isotonic_fit(oracle.xi_raw, eig.values);
      }

      const detail::MethodEvaluator eval{spec, q, n, t, oracle};
      std::vector<detail::MethodOutcome> outcomes;
      std::vector<MetricReport> metrics;
      outcomes.reserve(n_methods);
      for (const MethodSpec& method : config.methods) {
        detail::MethodOutcome out = std::visit(eval, method);
        const Matrix xi_matrix = reconstruct(eig.vectors, out.xi);
        metrics.push_back(frobenius_ratio(xi_matrix, e, sample.c_true));
        outcomes.push_back(std::move(out));
      }

      // seed succeeded as a whole; commit
      for (std::size_t i = 0; i < n_methods; ++i) {
        MethodSummary& summary = report.methods[i];
        summary.ratio_per_seed.push_back(metrics[i].frobenius_ratio);
        summary.mse_estimator_mean += metrics[i].mse_estimator;
        summary.mse_sample_mean += metrics[i].mse_sample;
        for (const auto& [label, value] : outcomes[i].fitted) {
          auto slot = std::find_if(summary.fitted.begin(), summary.fitted.end(),
                                   [&](const auto& p) { return p.first == label; });
          if (slot == summary.fitted.end()) {
            summary.fitted.emplace_back(label, std::vector<double>{});
            slot = std::prev(summary.fitted.end());
          }
          slot->second.push_back(value);
        }
      }
      if (!have_first) {
        have_first = true;
        first_lambdas = eig.values;
        first_spec = spec;
        first_has_oracle = needs_oracle;
        if (needs_oracle) {
          first_xi_mwcv = oracle.xi_raw;
        }
        first_xis.clear();
        for (std::size_t i = 0; i < n_methods; ++i) {
          first_xis.push_back(std::move(outcomes[i].xi));
        }
      }
      report.succeeded.push_back(seed);
    } catch (const std::exception& ex) {
      report.failures.emplace_back(seed, ex.what());
    }
  }

  const double n_ok = double(report.succeeded.size());
  for (MethodSummary& summary : report.methods) {
    if (n_ok > 0.0) {
      double mean = 0.0;
      for (double r : summary.ratio_per_seed) {
        mean += r;
      }
      mean /= n_ok;
      double var = 0.0;
      for (double r : summary.ratio_per_seed) {
        var += (r - mean) * (r - mean);
      }
      summary.ratio_mean = mean;
      summary.ratio_std = std::sqrt(var / n_ok);
      summary.mse_estimator_mean /= n_ok;
      summary.mse_sample_mean /= n_ok;
    }
  }

  // ---- output bundle ----
  fs::create_directories(config.output_dir);
  const fs::path dir(config.output_dir);

  report.files.push_back("report.json");
  if (have_first) {
    const Index nn = first_lambdas.size();
    for (std::size_t i = 0; i < n_methods; ++i) {
      std::string body = "rank,lambda,xi\n";
      for (Index r = 0; r < nn; ++r) {
        body += std::to_string(r + 1) + "," + detail::format_real(first_lambdas[r]) + "," +
                detail::format_real(first_xis[i][r]) + "\n";
      }
      const std::string name = "spectra_" + report.methods[i].name + ".csv";
      detail::write_text_file(dir / name, body);
      report.files.push_back(name);
    }

    const double spread = std::sqrt(5.0) * first_spec.bandwidth;
    const double lo = std::max(0.0, first_spec.lambdas[0] * (1.0 - spread));
    const double hi = first_spec.lambdas[nn - 1] * (1.0 + spread);
    std::string body = "lambda,rho\n";
    const int grid_points = 256;
    for (int g = 0; g < grid_points; ++g) {
      const double x = lo + (hi - lo) * double(g) / double(grid_points - 1);
      body += detail::format_real(x) + "," + detail::format_real(kde_density(first_spec, x)) + "\n";
    }
    detail::write_text_file(dir / "density_grid.csv", body);
    report.files.push_back("density_grid.csv");

    if (first_has_oracle) {
      body = "rank,lambda,xi_mwcv\n";
      for (Index r = 0; r < nn; ++r) {
        body += std::to_string(r + 1) + "," + detail::format_real(first_lambdas[r]) + "," +
                detail::format_real(first_xi_mwcv[r]) + "\n";
      }
      detail::write_text_file(dir / "oracle_scatter.csv", body);
      report.files.push_back("oracle_scatter.csv");
    }
  }
  std::sort(report.files.begin(), report.files.end());

  nlohmann::ordered_json doc;
  doc["schema_version"] = 1;
  doc["experiment"] = {{"n", n},
                       {"t", t},
                       {"t_total", t_total},
                       {"q", q},
                       {"k_folds", cv.k_folds},
                       {"t_out", cv.t_out},
                       {"cross", detail::describe_cross(config.cross)},
                       {"auto", detail::describe_auto(config.auto_true)},
                       {"noise", detail::describe_noise(config.noise)}};
  doc["seeds"]["requested"] = config.seeds;
  doc["seeds"]["succeeded"] = report.succeeded;
  doc["seeds"]["failed"] = nlohmann::ordered_json::array();
  for (const auto& [seed, message] : report.failures) {
    doc["seeds"]["failed"].push_back({{"seed", seed}, {"error", message}});
  }
  doc["methods"] = nlohmann::ordered_json::array();
  for (const MethodSummary& summary : report.methods) {
    nlohmann::ordered_json entry;
    entry["name"] = summary.name;
    nlohmann::ordered_json ratio;
    if (n_ok > 0.0) {
      ratio["mean"] = detail::round4(summary.ratio_mean);
      ratio["std"] = detail::round4(summary.ratio_std);
    } else {
      ratio["mean"] = nullptr;
      ratio["std"] = nullptr;
    }
    ratio["per_seed"] = nlohmann::ordered_json::array();
    for (double r : summary.ratio_per_seed) {
      ratio["per_seed"].push_back(detail::round4(r));
    }
    entry["frobenius_ratio"] = std::move(ratio);
    if (n_ok > 0.0) {
      entry["mse_estimator_mean"] = summary.mse_estimator_mean;
      entry["mse_sample_mean"] = summary.mse_sample_mean;
    }
    if (summary.is_fit) {
      nlohmann::ordered_json fitted = nlohmann::ordered_json::object();
      for (const auto& [label, values] : summary.fitted) {
        fitted[label] = values;
      }
      entry["fitted"] = std::move(fitted);
    }
    doc["methods"].push_back(std::move(entry));
  }
  doc["files"] = report.files;
  detail::write_text_file(dir / "report.json", doc.dump(2) + "\n");

  return report;
}

}  // namespace covshrink
