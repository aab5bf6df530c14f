#pragma once

// Monte Carlo sweeps over (SNR, INR, delta_f) grids: each trial draws a frame,
// optionally runs stage 1 on a pilot symbol, runs the stage-2 receiver on a
// data symbol, and the per-iteration BER / MSE are aggregated alongside the
// analytic bounds.

#include <algorithm>
#include <atomic>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <exception>
#include <fstream>
#include <mutex>
#include <string>
#include <system_error>
#include <thread>
#include <vector>

#include "fdx/air_interface.hpp"
#include "fdx/bounds.hpp"
#include "fdx/core_model.hpp"
#include "fdx/phase_noise.hpp"
#include "fdx/random.hpp"
#include "fdx/receiver.hpp"

namespace fdx {

struct ExperimentConfig {
  /// Link shape and the fixed powers (channel powers, sigma_w^2). Symbol
  /// powers are set per grid point from SNR and INR.
  SystemParams params = [] {
    SystemParams p;
    p.subcarriers = 256;
    p.pilots = 16;
    p.si_taps = 8;
    p.soi_taps = 8;
    return p;
  }();
  std::vector<double> delta_f{1e-4};
  std::vector<double> snr_db_grid{0.0, 5.0, 10.0, 15.0, 20.0, 25.0};
  std::vector<double> inr_db_grid{40.0};
  std::size_t n_iters = 6;
  std::size_t n_trials = 2000;
  std::uint64_t seed = 1;
  bool oracle_si_csi = false;
  OscillatorMode oscillator_mode = OscillatorMode::Separate;
  std::size_t si_delay = 0;
  std::string constellation = "BPSK";
  std::size_t stage1_iters = 4;
  std::string output_path;
  std::size_t threads = 0;  // 0: FDX_THREADS, then hardware concurrency
};

/// N=256, M=16, L_S=8, L_I=8, 2000 trials.
inline ExperimentConfig desk_profile() { return ExperimentConfig{}; }

/// N=1024, M=40, L_S=20.
inline ExperimentConfig large_profile() {
  ExperimentConfig cfg;
  cfg.params.subcarriers = 1024;
  cfg.params.pilots = 40;
  cfg.params.soi_taps = 20;
  cfg.params.si_taps = 20;
  cfg.n_trials = 500;
  return cfg;
}

/// Params for one grid point.
inline SystemParams point_params(const ExperimentConfig& cfg, double snr_db, double inr_db) {
  const SystemParams& b = cfg.params;
  return make_params(b.subcarriers, b.pilots, b.si_taps, b.soi_taps, snr_db, inr_db, b.noise_power,
                     b.si_channel_power, b.soi_channel_power);
}

inline void validate_config(const ExperimentConfig& cfg) {
  if (cfg.n_trials < 1) throw Error(ErrorCode::Config, "n_trials must be at least 1");
  if (cfg.n_iters < 1) throw Error(ErrorCode::Config, "n_iters must be at least 1");
  if (cfg.delta_f.empty() || cfg.snr_db_grid.empty() || cfg.inr_db_grid.empty()) {
    throw Error(ErrorCode::Config, "delta_f, snr_db_grid and inr_db_grid must be non-empty");
  }
  for (double d : cfg.delta_f)
    if (!(d >= 0.0)) throw Error(ErrorCode::Config, "delta_f values must be non-negative");
  if (!cfg.oracle_si_csi && cfg.stage1_iters < 1) throw Error(ErrorCode::Config, "stage1_iters must be at least 1");
  try {
    (void)point_params(cfg, cfg.snr_db_grid.front(), cfg.inr_db_grid.front());
    (void)make_constellation(cfg.constellation, 1.0, 1);
  } catch (const Error& e) {
    throw Error(ErrorCode::Config, e.what());
  }
}

struct SweepRecord {
  double snr_db = 0.0;
  double inr_db = 0.0;
  double delta_f = 0.0;
  std::size_t iteration = 0;  // 1-based
  double ber = 0.0;
  double ber_ci95 = 0.0;
  double mse_j = 0.0;
  double mse_hd = 0.0;
  double ber_lb = 0.0;
  double gamma0_db = 0.0;
  // Not part of the CSV schema.
  double mse_j_se = 0.0;  // standard error of mse_j across trials
  double mse_hd_se = 0.0;
  double mean_d = 0.0;     // mean squared detection error fed to the estimator
  double c_lb_mean = 0.0;  // mean over trials of C_lb(d)
  std::uint64_t bit_errors = 0;
  std::uint64_t total_bits = 0;
};

struct SweepResult {
  std::vector<SweepRecord> rows;
  std::size_t trials = 0;
  double wall_seconds = 0.0;
};

struct TrialIteration {
  std::size_t bit_errors = 0;
  double mse_j = 0.0;
  double mse_hd = 0.0;
  double d = 0.0;
};

/// Worker count: explicit request, then FDX_THREADS (0 = auto), then hardware.
inline std::size_t resolve_threads(std::size_t requested) {
  if (requested > 0) return requested;
  if (const char* env = std::getenv("FDX_THREADS")) {
    const long v = std::strtol(env, nullptr, 10);
    if (v > 0) return static_cast<std::size_t>(v);
  }
  return std::max<std::size_t>(1, std::thread::hardware_concurrency());
}

/// Calls fn(i) for i in [0, count) on `threads` workers. The first exception
/// stops the pool and is rethrown.
template <typename Fn>
void parallel_for(std::size_t count, std::size_t threads, Fn&& fn) {
  threads = std::min(threads, std::max<std::size_t>(count, 1));
  if (threads <= 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::atomic<bool> failed{false};
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  pool.reserve(threads);
  for (std::size_t w = 0; w < threads; ++w) {
    pool.emplace_back([&] {
      while (!failed.load()) {
        const std::size_t i = next.fetch_add(1);
        if (i >= count) break;
        try {
          fn(i);
        } catch (...) {
          std::lock_guard lock(error_mutex);
          if (!error) error = std::current_exception();
          failed.store(true);
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

/// One Monte Carlo trial: frame channels, SI channel estimate (oracle or
/// stage 1 on a pilot symbol), then the iterative receiver on a data symbol.
inline std::vector<TrialIteration> run_trial(const SystemParams& p, const PilotLayout& layout,
                                             const Constellation& constellation, const PhaseNoiseSpec& pn,
                                             bool oracle_si_csi, std::size_t stage1_iters, std::size_t n_iters,
                                             std::uint64_t seed) {
  Rng rng(seed);
  const FrameChannels channels = gen_frame_channels(p, rng);
  ComplexVec si_estimate;
  if (oracle_si_csi) {
    si_estimate = channels.h_si.taps;
  } else {
    const LinkRealization pilot_symbol =
        synthesize(p, full_pilot_layout(p.subcarriers), constellation, pn, channels, rng);
    si_estimate = stage1_estimate(pilot_symbol.y, pilot_symbol.x_si, pilot_symbol.x_soi, p, stage1_iters)
                      .state.si_channel;
  }
  const LinkRealization link = synthesize(p, layout, constellation, pn, channels, rng);
  const ReceiverTruth truth = make_truth(link, p, layout);
  const IterationTrace trace = run_receiver(link.y, link.x_si, si_estimate, p, layout, constellation, n_iters, &truth);
  std::vector<TrialIteration> out(trace.size());
  for (std::size_t i = 0; i < trace.size(); ++i) {
    out[i] = {trace[i].bit_errors, trace[i].mse_j, trace[i].mse_hd, trace[i].d};
  }
  return out;
}

inline SweepResult run_sweep(const ExperimentConfig& cfg) {
  validate_config(cfg);
  const auto t_start = std::chrono::steady_clock::now();
  const std::size_t threads = resolve_threads(cfg.threads);
  SweepResult result;
  result.trials = cfg.n_trials;

  std::uint64_t point_index = 0;
  for (double inr : cfg.inr_db_grid) {
    for (double df : cfg.delta_f) {
      const PhaseNoiseSpec pn =
          PhaseNoiseSpec::from_relative_bandwidth(df, cfg.params.subcarriers, cfg.oscillator_mode, cfg.si_delay);
      const double lam_i = lambda_si(cfg.params.pilots - cfg.params.soi_taps, pn);
      const double lam_s = lambda_soi(pn);
      for (double snr : cfg.snr_db_grid) {
        const SystemParams p = point_params(cfg, snr, inr);
        const PilotLayout layout = comb_layout(p.subcarriers, p.pilots);
        const Constellation constellation = make_constellation(cfg.constellation, p.soi_symbol_power, p.subcarriers);
        const BoundsInput bounds = make_bounds_input(p, lam_i, lam_s, constellation);
        const double ber_lb = constellation.size() == 2
                                  ? ber_lower_bound_bpsk(bounds)
                                  : solve_general_ber_bound(bounds, rayleigh_detection_model(constellation)).ber;
        const double g0_db = linear_to_db(gamma0(bounds));

        std::vector<std::vector<TrialIteration>> trials(cfg.n_trials);
        const std::uint64_t this_point = point_index++;
        try {
          parallel_for(cfg.n_trials, threads, [&](std::size_t t) {
            const std::uint64_t seed = derive_seed(cfg.seed, this_point, t);
            try {
              trials[t] = run_trial(p, layout, constellation, pn, cfg.oracle_si_csi, cfg.stage1_iters, cfg.n_iters, seed);
            } catch (const Error& e) {
              throw Error(e.code(), std::string(e.what()) + " [trial " + std::to_string(t) + ", seed " +
                                        std::to_string(seed) + "]");
            }
          });
        } catch (const Error& e) {
          throw Error(e.code(), std::string(e.what()) + " at snr_db=" + std::to_string(snr) +
                                    " inr_db=" + std::to_string(inr) + " delta_f=" + std::to_string(df));
        }

        // Serial, trial-ordered aggregation keeps the sums independent of
        // the worker schedule.
        const double bits_per_trial =
            static_cast<double>(p.data_carriers) * static_cast<double>(constellation.bits_per_symbol);
        const double nt = static_cast<double>(cfg.n_trials);
        for (std::size_t it = 0; it < cfg.n_iters; ++it) {
          SweepRecord rec;
          rec.snr_db = snr;
          rec.inr_db = inr;
          rec.delta_f = df;
          rec.iteration = it + 1;
          double sum_j = 0.0, sum_j2 = 0.0, sum_h = 0.0, sum_h2 = 0.0, sum_d = 0.0, sum_clb = 0.0;
          for (const auto& tr : trials) {
            const TrialIteration& x = tr[it];
            rec.bit_errors += x.bit_errors;
            sum_j += x.mse_j;
            sum_j2 += x.mse_j * x.mse_j;
            sum_h += x.mse_hd;
            sum_h2 += x.mse_hd * x.mse_hd;
            sum_d += x.d;
            sum_clb += mse_lower_bounds(bounds, x.d).pn;
          }
          rec.total_bits = static_cast<std::uint64_t>(bits_per_trial * nt);
          rec.ber = static_cast<double>(rec.bit_errors) / static_cast<double>(rec.total_bits);
          rec.ber_ci95 = 1.96 * std::sqrt(rec.ber * (1.0 - rec.ber) / static_cast<double>(rec.total_bits));
          rec.mse_j = sum_j / nt;
          rec.mse_hd = sum_h / nt;
          auto std_err = [nt](double s, double s2) {
            if (nt < 2) return 0.0;
            const double var = std::max(0.0, (s2 - s * s / nt) / (nt - 1.0));
            return std::sqrt(var / nt);
          };
          rec.mse_j_se = std_err(sum_j, sum_j2);
          rec.mse_hd_se = std_err(sum_h, sum_h2);
          rec.mean_d = sum_d / nt;
          rec.c_lb_mean = sum_clb / nt;
          rec.ber_lb = ber_lb;
          rec.gamma0_db = g0_db;
          result.rows.push_back(rec);
        }
      }
    }
  }
  result.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
  return result;
}

struct MseReport {
  SweepResult sweep;
  /// Final-iteration MSE at the highest SNR exceeds that at the lowest, per
  /// (INR, delta_f) pair.
  bool mse_increases_with_snr = true;
  /// Share of rows whose measured MSE is at least the mean C_lb(d).
  double fraction_above_bound = 0.0;
};

inline MseReport mse_vs_snr_report(const ExperimentConfig& cfg) {
  MseReport rep;
  rep.sweep = run_sweep(cfg);
  const auto& rows = rep.sweep.rows;
  std::size_t above = 0;
  for (const auto& r : rows) above += r.mse_j >= r.c_lb_mean ? 1 : 0;
  rep.fraction_above_bound = rows.empty() ? 0.0 : static_cast<double>(above) / static_cast<double>(rows.size());

  const double lo = *std::min_element(cfg.snr_db_grid.begin(), cfg.snr_db_grid.end());
  const double hi = *std::max_element(cfg.snr_db_grid.begin(), cfg.snr_db_grid.end());
  for (double inr : cfg.inr_db_grid)
    for (double df : cfg.delta_f) {
      double mse_lo = 0.0, mse_hi = 0.0;
      for (const auto& r : rows) {
        if (r.inr_db != inr || r.delta_f != df || r.iteration != cfg.n_iters) continue;
        if (r.snr_db == lo) mse_lo = r.mse_j;
        if (r.snr_db == hi) mse_hi = r.mse_j;
      }
      if (!(mse_hi > mse_lo)) rep.mse_increases_with_snr = false;
    }
  return rep;
}

/// Shortest decimal string that round-trips to the same double.
inline std::string shortest_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

inline constexpr const char* kCsvHeader = "snr_db,inr_db,delta_f,iteration,ber,ber_ci95,mse_j,mse_hd,ber_lb,gamma0_db";

inline std::string format_csv(const SweepResult& result) {
  if (result.rows.empty()) throw Error(ErrorCode::EmptyResult, "sweep produced no rows");
  std::string out = kCsvHeader;
  out += '\n';
  for (const auto& r : result.rows) {
    out += shortest_double(r.snr_db) + ',' + shortest_double(r.inr_db) + ',' + shortest_double(r.delta_f) + ',' +
           std::to_string(r.iteration) + ',' + shortest_double(r.ber) + ',' + shortest_double(r.ber_ci95) + ',' +
           shortest_double(r.mse_j) + ',' + shortest_double(r.mse_hd) + ',' + shortest_double(r.ber_lb) + ',' +
           shortest_double(r.gamma0_db) + '\n';
  }
  return out;
}

inline void emit_csv(const SweepResult& result, const std::string& path) {
  const std::string text = format_csv(result);
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw Error(ErrorCode::Io, "cannot open '" + path + "' for writing");
  f.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!f) throw Error(ErrorCode::Io, "write failed for '" + path + "'");
}

struct BoundsRow {
  double snr_db = 0.0;
  double inr_db = 0.0;
  double delta_f = 0.0;
  BoundsReport report;
};

/// Analytic bounds for every grid point; consumes no randomness.
inline std::vector<BoundsRow> bounds_table(const ExperimentConfig& cfg) {
  validate_config(cfg);
  std::vector<BoundsRow> rows;
  for (double inr : cfg.inr_db_grid)
    for (double df : cfg.delta_f) {
      const PhaseNoiseSpec pn =
          PhaseNoiseSpec::from_relative_bandwidth(df, cfg.params.subcarriers, cfg.oscillator_mode, cfg.si_delay);
      const double lam_i = lambda_si(cfg.params.pilots - cfg.params.soi_taps, pn);
      const double lam_s = lambda_soi(pn);
      for (double snr : cfg.snr_db_grid) {
        const SystemParams p = point_params(cfg, snr, inr);
        const Constellation c = make_constellation(cfg.constellation, p.soi_symbol_power, p.subcarriers);
        rows.push_back({snr, inr, df, compute_bounds_report(make_bounds_input(p, lam_i, lam_s, c))});
      }
    }
  return rows;
}

}  // namespace fdx
