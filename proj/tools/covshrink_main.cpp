// covshrink: synthetic covariance-cleaning experiments and self-checks.
//
// Exit codes: 0 success, 2 configuration or usage error, 3 numerical or
// runtime failure (including a run where every seed failed).

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <exception>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "covshrink/config.hpp"
#include "covshrink/datagen.hpp"
#include "covshrink/errors.hpp"
#include "covshrink/experiment.hpp"
#include "covshrink/metrics.hpp"

namespace {

int cmd_run(const std::string& config_path, const std::vector<std::uint64_t>& seeds,
            const std::string& out_dir) {
  covshrink::ExperimentConfig config = covshrink::load_config(config_path);
  if (!seeds.empty()) {
    config.seeds = seeds;
  }
  if (!out_dir.empty()) {
    config.output_dir = out_dir;
  }
  covshrink::validate_config(config);

  const covshrink::ExperimentReport report = covshrink::run_experiment(config);

  std::printf("wrote %s/report.json (%zu of %zu seeds succeeded)\n", config.output_dir.c_str(),
              report.succeeded.size(), config.seeds.size());
  if (!report.methods.empty() && !report.succeeded.empty()) {
    std::printf("%-14s %9s %9s\n", "method", "ratio", "std");
    for (const covshrink::MethodSummary& m : report.methods) {
      std::printf("%-14s %9.4f %9.4f", m.name.c_str(), m.ratio_mean, m.ratio_std);
      for (const auto& [label, values] : m.fitted) {
        std::printf("  %s =", label.c_str());
        for (double v : values) {
          std::printf(" %g", v);
        }
      }
      std::printf("\n");
    }
  }
  for (const auto& [seed, message] : report.failures) {
    std::fprintf(stderr, "seed %llu failed: %s\n", static_cast<unsigned long long>(seed),
                 message.c_str());
  }
  return report.succeeded.empty() ? 3 : 0;
}

int cmd_verify_mp(double q, long long n, long long draws, double tau, std::uint64_t seed) {
  if (!(q > 0.0)) {
    throw covshrink::ConfigError("verify-mp: q must be positive");
  }
  const auto t = static_cast<covshrink::Index>(std::llround(double(n) / q));
  covshrink::AutoModel model = covshrink::IdentityAuto{};
  if (tau > 0.0) {
    model = covshrink::ExpDecay{tau};
  }
  const covshrink::CrossModel cross =
      covshrink::ExplicitCross{covshrink::Matrix::Identity(n, n)};
  const double residual = covshrink::verify_mp_scalar(cross, model, covshrink::Index(n), t,
                                                      int(draws), seed);
  std::printf("verify-mp: q = %g, n = %lld, t = %lld, draws = %lld, auto = %s\n", q, n,
              static_cast<long long>(t), draws,
              tau > 0.0 ? ("exp_decay(" + std::to_string(tau) + ")").c_str() : "identity");
  std::printf("max |m_E(z) - m_C(Z(z))| over test points: %.6f\n", residual);
  return 0;
}

int cmd_verify_srect(long long n, long long t, long long draws, std::uint64_t seed) {
  const covshrink::SRectReport report =
      covshrink::verify_s_rect(covshrink::Index(n), covshrink::Index(t), int(draws), seed);
  std::printf("verify-srect: n = %lld, t = %lld, draws = %lld\n", n, t, draws);
  std::printf("max rectangular S relation residual: %.6f\n", report.max_residual);
  std::printf("max Wishart S(z) vs 1/(1+qz) residual: %.6f\n", report.wishart_residual);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"covariance shrinkage for autocorrelated samples"};
  app.require_subcommand(1);

  std::string config_path;
  std::vector<std::uint64_t> seeds;
  std::string out_dir;
  CLI::App* run = app.add_subcommand("run", "run a synthetic experiment from a config file");
  run->add_option("--config", config_path, "path to the experiment config")->required();
  run->add_option("--seeds", seeds, "comma-separated seed list overriding the config")
      ->delimiter(',');
  run->add_option("--out", out_dir, "output directory overriding the config");

  double mp_q = 0.5;
  long long mp_n = 300;
  long long mp_draws = 50;
  double mp_tau = 0.0;
  std::uint64_t mp_seed = 1;
  CLI::App* vmp = app.add_subcommand(
      "verify-mp", "Monte Carlo check of the spectrum-mapping self-consistency");
  vmp->add_option("--q", mp_q, "aspect ratio n/t")->required();
  vmp->add_option("--n", mp_n, "matrix dimension")->required()->check(CLI::Range(2LL, 100000LL));
  vmp->add_option("--draws", mp_draws, "Monte Carlo draws")->required();
  vmp->add_option("--tau", mp_tau, "exp-decay autocorrelation time (0 = white)");
  vmp->add_option("--seed", mp_seed, "RNG seed");

  long long sr_n = 200;
  long long sr_t = 400;
  long long sr_draws = 100;
  std::uint64_t sr_seed = 1;
  CLI::App* vsr = app.add_subcommand(
      "verify-srect", "Monte Carlo check of the rectangular S-transform relation");
  vsr->add_option("--n", sr_n, "rows of the rectangle")->required();
  vsr->add_option("--t", sr_t, "columns of the rectangle")->required();
  vsr->add_option("--draws", sr_draws, "Monte Carlo draws")->required();
  vsr->add_option("--seed", sr_seed, "RNG seed");

  try {
    app.parse(argc, argv);
    if (run->parsed()) {
      return cmd_run(config_path, seeds, out_dir);
    }
    if (vmp->parsed()) {
      return cmd_verify_mp(mp_q, mp_n, mp_draws, mp_tau, mp_seed);
    }
    return cmd_verify_srect(sr_n, sr_t, sr_draws, sr_seed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  } catch (const covshrink::ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  } catch (const std::invalid_argument& e) {
    std::fprintf(stderr, "invalid argument: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 3;
  }
}
