// fdx_sim: Monte Carlo sweeps and analytic bounds for the full-duplex
// two-stage receiver.
//
//   fdx_sim --mode ber-sweep --snr 10 --snr 20 --trials 500 --out ber.csv
//   fdx_sim --mode bounds-only --profile large
//   fdx_sim --config run.json --seed 7
//
// Exit codes: 0 success, 1 runtime error, 2 config or usage error.

#include <cstdio>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "fdx/harness.hpp"
#include "fdx/serialize.hpp"

namespace {

void print_bounds(const std::vector<fdx::BoundsRow>& rows) {
  std::printf("%8s %8s %10s %12s %12s %12s %12s %14s\n", "snr_db", "inr_db", "delta_f", "lambda_i", "lambda_s",
              "gamma0_db", "gamma1_db", "ber_lb");
  for (const auto& r : rows) {
    const double ber = std::isnan(r.report.ber_lb_bpsk) ? r.report.ber_lb_general : r.report.ber_lb_bpsk;
    std::printf("%8.2f %8.2f %10.3g %12.5g %12.5g %12.4f %12.4f %14.6g\n", r.snr_db, r.inr_db, r.delta_f,
                r.report.lambda_i, r.report.lambda_s, fdx::linear_to_db(r.report.gamma0),
                fdx::linear_to_db(r.report.gamma1), ber);
  }
}

void print_summary(const fdx::SweepResult& res, std::size_t n_iters) {
  std::fprintf(stderr, "%8s %8s %10s %5s %12s %12s %12s %12s\n", "snr_db", "inr_db", "delta_f", "iter", "ber", "ber_lb",
              "mse_j", "c_lb");
  for (const auto& r : res.rows) {
    if (r.iteration != 1 && r.iteration != n_iters) continue;
    std::fprintf(stderr, "%8.2f %8.2f %10.3g %5zu %12.5g %12.5g %12.5g %12.5g\n", r.snr_db, r.inr_db, r.delta_f, r.iteration,
                r.ber, r.ber_lb, r.mse_j, r.c_lb_mean);
  }
  std::fprintf(stderr, "%zu trials per point, %.2f s\n", res.trials, res.wall_seconds);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Full-duplex OFDM phase-noise simulator and bounds engine"};
  std::string config_path, mode = "ber-sweep", profile = "desk", out_path;
  std::vector<double> snr, inr, delta_f;
  std::optional<std::size_t> trials, iters;
  std::optional<std::uint64_t> seed;
  bool oracle = false;

  app.add_option("--config", config_path, "JSON ExperimentConfig");
  app.add_option("--profile", profile, "Base profile when no config is given")
      ->check(CLI::IsMember({"desk", "large"}));
  app.add_option("--snr", snr, "SNR grid in dB (repeatable)");
  app.add_option("--inr", inr, "INR grid in dB (repeatable)");
  app.add_option("--delta-f", delta_f, "Relative 3 dB phase-noise bandwidth (repeatable)");
  app.add_option("--trials", trials, "Monte Carlo trials per grid point");
  app.add_option("--iters", iters, "Receiver iterations");
  app.add_option("--seed", seed, "Master seed");
  app.add_option("--out", out_path, "CSV output path");
  app.add_option("--mode", mode, "What to run")->check(CLI::IsMember({"ber-sweep", "mse-sweep", "bounds-only"}));
  app.add_flag("--oracle-si-csi", oracle, "Use the true SI channel instead of stage 1");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  fdx::ExperimentConfig cfg;
  try {
    if (!config_path.empty()) {
      cfg = fdx::load_config(config_path);
    } else {
      cfg = profile == "large" ? fdx::large_profile() : fdx::desk_profile();
    }
    if (!snr.empty()) cfg.snr_db_grid = snr;
    if (!inr.empty()) cfg.inr_db_grid = inr;
    if (!delta_f.empty()) cfg.delta_f = delta_f;
    if (trials) cfg.n_trials = *trials;
    if (iters) cfg.n_iters = *iters;
    if (seed) cfg.seed = *seed;
    if (!out_path.empty()) cfg.output_path = out_path;
    if (oracle) cfg.oracle_si_csi = true;
    fdx::validate_config(cfg);
  } catch (const fdx::Error& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  }

  try {
    if (mode == "bounds-only") {
      print_bounds(fdx::bounds_table(cfg));
      return 0;
    }
    const fdx::SweepResult res =
        mode == "mse-sweep" ? fdx::mse_vs_snr_report(cfg).sweep : fdx::run_sweep(cfg);
    if (!cfg.output_path.empty()) {
      fdx::emit_csv(res, cfg.output_path);
    } else {
      std::cout << fdx::format_csv(res);
    }
    print_summary(res, cfg.n_iters);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
