#pragma once

// Shared domain types for the full-duplex OFDM link: system parameters,
// constellations, pilot layouts and the error type used across the library.

#include <Eigen/Dense>

#include <bit>
#include <cmath>
#include <complex>
#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace fdx {

using cplx = std::complex<double>;
using ComplexVec = Eigen::VectorXcd;
using ComplexMat = Eigen::MatrixXcd;

inline constexpr double kPi = 3.14159265358979323846;

enum class ErrorCode {
  InvalidParams,
  UnknownConstellation,
  LengthMismatch,
  DegenerateVariance,
  SingularSystem,
  NegativeSinr,
  NoConvergence,
  EmptyResult,
  Io,
  Config,
};

inline std::string_view to_string(ErrorCode c) {
  switch (c) {
    case ErrorCode::InvalidParams: return "InvalidParams";
    case ErrorCode::UnknownConstellation: return "UnknownConstellation";
    case ErrorCode::LengthMismatch: return "LengthMismatch";
    case ErrorCode::DegenerateVariance: return "DegenerateVariance";
    case ErrorCode::SingularSystem: return "SingularSystem";
    case ErrorCode::NegativeSinr: return "NegativeSINR";
    case ErrorCode::NoConvergence: return "NoConvergence";
    case ErrorCode::EmptyResult: return "EmptyResult";
    case ErrorCode::Io: return "Io";
    case ErrorCode::Config: return "Config";
  }
  return "Unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

inline double db_to_linear(double db) { return std::pow(10.0, db / 10.0); }
inline double linear_to_db(double lin) { return 10.0 * std::log10(lin); }

/// Deterministic scalars of one link. Powers are linear. `data_carriers` and
/// `pn_order` are derived by validate_params().
struct SystemParams {
  std::size_t subcarriers = 0;    // N
  std::size_t pilots = 0;         // M
  std::size_t data_carriers = 0;  // Q = N - M
  std::size_t si_taps = 0;        // L_I
  std::size_t soi_taps = 0;       // L_S
  std::size_t pn_order = 0;       // K = M - L_S

  double soi_symbol_power = 1.0;   // E_S = E||x_S||^2
  double si_symbol_power = 1.0;    // E_I = E||x_I||^2
  double si_channel_power = 1.0;   // E_hI
  double soi_channel_power = 1.0;  // E_hS
  double noise_power = 1.0;        // sigma_w^2 = E||w||^2

  double snr_db() const { return linear_to_db(soi_channel_power * soi_symbol_power / noise_power); }
  double inr_db() const { return linear_to_db(si_channel_power * si_symbol_power / noise_power); }
};

/// Checks every invariant and fills Q and K. Throws InvalidParams listing all
/// violations at once.
inline SystemParams validate_params(SystemParams p) {
  std::vector<std::string> problems;
  const auto n = static_cast<long long>(p.subcarriers);
  const auto m = static_cast<long long>(p.pilots);
  const auto li = static_cast<long long>(p.si_taps);
  const auto ls = static_cast<long long>(p.soi_taps);
  const long long k = m - ls;

  if (n <= 0) problems.emplace_back("N must be positive");
  if (m > n) problems.emplace_back("M exceeds N");
  if (li < 1) problems.emplace_back("L_I must be at least 1");
  if (ls < 1) problems.emplace_back("L_S must be at least 1");
  if (k <= 0) problems.emplace_back("K = M - L_S must be at least 1 (got " + std::to_string(k) + ")");
  if (li + ls + k > n) {
    problems.emplace_back("L_I + L_S + K = " + std::to_string(li + ls + k) + " exceeds N = " + std::to_string(n));
  }
  auto positive = [&](double v, const char* name) {
    if (!(v > 0.0) || !std::isfinite(v)) problems.emplace_back(std::string(name) + " must be positive");
  };
  positive(p.soi_symbol_power, "E_S");
  positive(p.si_symbol_power, "E_I");
  positive(p.si_channel_power, "E_hI");
  positive(p.soi_channel_power, "E_hS");
  positive(p.noise_power, "sigma_w^2");

  if (!problems.empty()) {
    std::string msg;
    for (std::size_t i = 0; i < problems.size(); ++i) {
      if (i) msg += "; ";
      msg += problems[i];
    }
    throw Error(ErrorCode::InvalidParams, msg);
  }
  p.data_carriers = p.subcarriers - p.pilots;
  p.pn_order = p.pilots - p.soi_taps;
  return p;
}

/// Builds validated params from ratios: sigma_w^2 and channel powers fixed,
/// symbol powers chosen so that E_hS E_S / sigma_w^2 = SNR and
/// E_hI E_I / sigma_w^2 = INR.
inline SystemParams make_params(std::size_t n, std::size_t m, std::size_t si_taps, std::size_t soi_taps,
                                double snr_db, double inr_db, double noise_power = 1.0,
                                double si_channel_power = 1.0, double soi_channel_power = 1.0) {
  SystemParams p;
  p.subcarriers = n;
  p.pilots = m;
  p.si_taps = si_taps;
  p.soi_taps = soi_taps;
  p.noise_power = noise_power;
  p.si_channel_power = si_channel_power;
  p.soi_channel_power = soi_channel_power;
  p.soi_symbol_power = db_to_linear(snr_db) * noise_power / soi_channel_power;
  p.si_symbol_power = db_to_linear(inr_db) * noise_power / si_channel_power;
  return validate_params(p);
}

/// Equiprobable symbol alphabet. Point i carries label i, so alpha(i,j) is the
/// Hamming distance between i and j.
struct Constellation {
  std::string label;
  std::vector<cplx> points;
  std::size_t bits_per_symbol = 0;
  std::vector<std::vector<int>> alpha;

  std::size_t size() const { return points.size(); }

  double mean_power() const {
    double s = 0.0;
    for (const auto& a : points) s += std::norm(a);
    return s / static_cast<double>(points.size());
  }

  /// Same labeling, every point scaled by `factor`.
  Constellation scaled(double factor) const {
    Constellation c = *this;
    for (auto& a : c.points) a *= factor;
    return c;
  }
};

/// BPSK or Gray-labeled QPSK with per-symbol power E_S / N.
inline Constellation make_constellation(std::string_view name, double soi_symbol_power, std::size_t n) {
  const double amp = std::sqrt(soi_symbol_power / static_cast<double>(n));
  Constellation c;
  c.label = std::string(name);
  if (name == "BPSK" || name == "bpsk") {
    c.label = "BPSK";
    c.points = {cplx(amp, 0.0), cplx(-amp, 0.0)};
    c.bits_per_symbol = 1;
  } else if (name == "QPSK" || name == "qpsk") {
    c.label = "QPSK";
    // label bits (b1 b0): b1 selects the real sign, b0 the imaginary sign
    const double a = amp / std::sqrt(2.0);
    for (unsigned i = 0; i < 4; ++i) {
      const double re = (i & 2u) ? -a : a;
      const double im = (i & 1u) ? -a : a;
      c.points.emplace_back(re, im);
    }
    c.bits_per_symbol = 2;
  } else {
    throw Error(ErrorCode::UnknownConstellation, std::string(name));
  }
  const std::size_t t = c.points.size();
  c.alpha.assign(t, std::vector<int>(t, 0));
  for (std::size_t i = 0; i < t; ++i)
    for (std::size_t j = 0; j < t; ++j)
      c.alpha[i][j] = std::popcount(static_cast<unsigned>(i ^ j));
  return c;
}

/// Pilot/data subcarrier partition. Stands in for the bearer matrices S_p and
/// S_d, which are never materialized.
struct PilotLayout {
  std::vector<std::size_t> pilot_indices;
  std::vector<std::size_t> data_indices;

  std::size_t subcarriers() const { return pilot_indices.size() + data_indices.size(); }
};

/// Comb placement: pilot m sits on subcarrier m * floor(N / M).
inline PilotLayout comb_layout(std::size_t n, std::size_t m) {
  if (m == 0 || m > n) throw Error(ErrorCode::InvalidParams, "pilot count must be in [1, N]");
  const std::size_t step = n / m;
  PilotLayout layout;
  std::vector<bool> is_pilot(n, false);
  for (std::size_t i = 0; i < m; ++i) is_pilot[i * step] = true;
  for (std::size_t k = 0; k < n; ++k) (is_pilot[k] ? layout.pilot_indices : layout.data_indices).push_back(k);
  return layout;
}

/// Layout for a symbol that carries only pilots (stage-1 symbol).
inline PilotLayout full_pilot_layout(std::size_t n) {
  PilotLayout layout;
  layout.pilot_indices.resize(n);
  for (std::size_t k = 0; k < n; ++k) layout.pilot_indices[k] = k;
  return layout;
}

}  // namespace fdx
