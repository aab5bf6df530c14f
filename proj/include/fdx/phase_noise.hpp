#pragma once

// Wiener phase noise: trajectory generation, the per-symbol frequency-domain
// coefficients J[k], and the expected residual powers lambda_I / lambda_S for
// separate and common oscillators.

#include <unsupported/Eigen/FFT>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "fdx/core_model.hpp"
#include "fdx/random.hpp"

namespace fdx {

enum class OscillatorMode { Separate, Common };

inline std::string_view to_string(OscillatorMode m) { return m == OscillatorMode::Common ? "common" : "separate"; }

inline OscillatorMode parse_oscillator_mode(std::string_view s) {
  if (s == "separate") return OscillatorMode::Separate;
  if (s == "common") return OscillatorMode::Common;
  throw Error(ErrorCode::Config, "unknown oscillator mode '" + std::string(s) + "'");
}

/// Oscillator model. `sigma_theta2` is the per-sample increment variance of a
/// single oscillator, so one oscillator has E[e^{j(theta_p - theta_q)}] =
/// e^{-sigma_theta2 |p-q| / 2} and a TX/RX pair of independent oscillators has
/// e^{-sigma_theta2 |p-q|}.
struct PhaseNoiseSpec {
  double delta_f = 0.0;
  std::size_t subcarriers = 0;
  double sigma_theta2 = 0.0;
  OscillatorMode mode = OscillatorMode::Separate;
  std::size_t si_delay = 0;  // alpha_I in samples; only meaningful for Common

  /// sigma_theta2 = 4 pi delta_f / N.
  static PhaseNoiseSpec from_relative_bandwidth(double delta_f, std::size_t n,
                                                OscillatorMode mode = OscillatorMode::Separate,
                                                std::size_t si_delay = 0) {
    if (delta_f < 0.0) throw Error(ErrorCode::InvalidParams, "delta_f must be non-negative");
    if (n == 0) throw Error(ErrorCode::InvalidParams, "N must be positive");
    return {delta_f, n, 4.0 * kPi * delta_f / static_cast<double>(n), mode, si_delay};
  }
};

/// Phase samples theta[0..len-1] in radians, theta[0] = 0.
using PhaseTrace = std::vector<double>;

inline PhaseTrace gen_wiener(double increment_variance, std::size_t length, Rng& rng) {
  PhaseTrace theta(length, 0.0);
  if (increment_variance <= 0.0) return theta;
  std::normal_distribution<double> step(0.0, std::sqrt(increment_variance));
  for (std::size_t n = 1; n < length; ++n) theta[n] = theta[n - 1] + step(rng);
  return theta;
}

inline PhaseTrace gen_wiener(const PhaseNoiseSpec& spec, std::size_t length, std::uint64_t seed) {
  Rng rng(seed);
  return gen_wiener(spec.sigma_theta2, length, rng);
}

/// J[0..N-1], the DFT of the unit-modulus combined phasor scaled by 1/N.
struct PhaseNoiseSpectrum {
  ComplexVec coeffs;

  std::size_t size() const { return static_cast<std::size_t>(coeffs.size()); }
  cplx operator[](std::size_t k) const { return coeffs(static_cast<Eigen::Index>(k)); }
  /// First K coefficients, j' = S_I^T j.
  ComplexVec truncated(std::size_t k) const { return coeffs.head(static_cast<Eigen::Index>(k)); }
};

/// Unnormalized forward DFT, X[k] = sum_n x[n] e^{-j 2 pi k n / N}.
inline ComplexVec fft_forward(const ComplexVec& x) {
  Eigen::FFT<double> fft;
  std::vector<cplx> in(x.data(), x.data() + x.size());
  std::vector<cplx> out;
  fft.fwd(out, in);
  return Eigen::Map<ComplexVec>(out.data(), static_cast<Eigen::Index>(out.size()));
}

/// Inverse DFT with 1/N scaling.
inline ComplexVec fft_inverse(const ComplexVec& x) {
  Eigen::FFT<double> fft;
  std::vector<cplx> in(x.data(), x.data() + x.size());
  std::vector<cplx> out;
  fft.inv(out, in);
  return Eigen::Map<ComplexVec>(out.data(), static_cast<Eigen::Index>(out.size()));
}

/// Coefficients of e^{j(theta_tx(n - delay) + theta_rx(n))}, n = 0..N-1.
///
/// Both traces are indexed from time -delay, i.e. trace[i] holds the phase at
/// sample i - delay, and must hold at least N + delay samples. Common-oscillator
/// SI passes the same trace twice.
inline PhaseNoiseSpectrum phase_to_spectrum(std::span<const double> theta_tx, std::span<const double> theta_rx,
                                            std::size_t delay, std::size_t n) {
  if (theta_tx.size() < n + delay || theta_rx.size() < n + delay) {
    throw Error(ErrorCode::LengthMismatch, "phase traces need N + delay = " + std::to_string(n + delay) +
                                               " samples (tx " + std::to_string(theta_tx.size()) + ", rx " +
                                               std::to_string(theta_rx.size()) + ")");
  }
  ComplexVec phasor(static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) {
    const double phi = theta_tx[i] + theta_rx[i + delay];
    phasor(static_cast<Eigen::Index>(i)) = cplx(std::cos(phi), std::sin(phi));
  }
  return {fft_forward(phasor) / static_cast<double>(n)};
}

/// N x N circulant matrix with (m, n) entry J[(m - n) mod N].
inline ComplexMat spectrum_to_matrix(const PhaseNoiseSpectrum& s) {
  const auto n = static_cast<Eigen::Index>(s.size());
  ComplexMat out(n, n);
  for (Eigen::Index r = 0; r < n; ++r)
    for (Eigen::Index c = 0; c < n; ++c) out(r, c) = s.coeffs(((r - c) % n + n) % n);
  return out;
}

/// Circular convolution (J v)[m] = sum_n J[m - n] v[n], computed in O(N log N).
inline ComplexVec apply_phase_noise(const PhaseNoiseSpectrum& s, const ComplexVec& v) {
  if (static_cast<std::size_t>(v.size()) != s.size()) throw Error(ErrorCode::LengthMismatch, "apply_phase_noise");
  const ComplexVec a = fft_forward(s.coeffs);
  const ComplexVec b = fft_forward(v);
  return fft_inverse(a.cwiseProduct(b));
}

/// Autocorrelation E[e^{j(phi_p - phi_q)}] of the combined SI or SoI phase as a
/// function of lag d = |p - q| >= 0.
struct PhaseCorrelation {
  double sigma_theta2 = 0.0;
  bool common = false;
  std::size_t delay = 0;

  double operator()(std::size_t d) const {
    // Common oscillator with SI delay alpha: the two increments overlap on
    // max(0, d - alpha) samples, which counts twice.
    const double dd = static_cast<double>(d);
    double lag = dd;
    if (common && d > delay) lag += dd - static_cast<double>(delay);
    return std::exp(-sigma_theta2 * lag);
  }
};

inline PhaseCorrelation si_correlation(const PhaseNoiseSpec& spec) {
  return {spec.sigma_theta2, spec.mode == OscillatorMode::Common, spec.si_delay};
}

/// SoI phase (remote TX + local RX) is a pair of independent oscillators in
/// both modes.
inline PhaseCorrelation soi_correlation(const PhaseNoiseSpec& spec) { return {spec.sigma_theta2, false, 0}; }

/// E|J[k]|^2 by the direct double sum, collapsed onto lags:
/// (1/N^2) [N R(0) + 2 sum_{d=1}^{N-1} (N - d) R(d) cos(2 pi k d / N)].
inline double expected_pn_power(std::size_t k, std::size_t n, const PhaseCorrelation& corr) {
  const double nn = static_cast<double>(n);
  double acc = nn * corr(0);
  for (std::size_t d = 1; d < n; ++d) {
    const std::size_t phase_idx = (k * d) % n;
    acc += 2.0 * (nn - static_cast<double>(d)) * corr(d) *
           std::cos(2.0 * kPi * static_cast<double>(phase_idx) / nn);
  }
  return acc / (nn * nn);
}

/// E|J[k]|^2 for every k.
inline std::vector<double> pn_power_profile(std::size_t n, const PhaseCorrelation& corr) {
  const double nn = static_cast<double>(n);
  std::vector<double> weights(n, 0.0);  // (N - d) R(d)
  for (std::size_t d = 1; d < n; ++d) weights[d] = (nn - static_cast<double>(d)) * corr(d);
  std::vector<double> cos_table(n);
  for (std::size_t i = 0; i < n; ++i) cos_table[i] = std::cos(2.0 * kPi * static_cast<double>(i) / nn);
  std::vector<double> out(n);
  for (std::size_t k = 0; k < n; ++k) {
    double acc = nn * corr(0);
    for (std::size_t d = 1; d < n; ++d) acc += 2.0 * weights[d] * cos_table[(k * d) % n];
    out[k] = acc / (nn * nn);
  }
  return out;
}

/// 1 - sum_{k<K} E|J[k]|^2 for a given correlation.
inline double residual_pn_power(std::size_t k_order, std::size_t n, const PhaseCorrelation& corr) {
  if (k_order < 1 || k_order > n) throw Error(ErrorCode::InvalidParams, "K must be in [1, N]");
  double kept = 0.0;
  for (std::size_t k = 0; k < k_order; ++k) kept += expected_pn_power(k, n, corr);
  return std::clamp(1.0 - kept, 0.0, 1.0);
}

/// Residual phase-noise power for a pair of independent oscillators.
/// K = 1 gives lambda_S, K = M - L_S gives lambda_I.
inline double lambda_separate(std::size_t k_order, const PhaseNoiseSpec& spec) {
  return residual_pn_power(k_order, spec.subcarriers, PhaseCorrelation{spec.sigma_theta2, false, 0});
}

/// Residual SI phase-noise power when the local TX and RX share one
/// oscillator and the SI arrives `spec.si_delay` samples late.
inline double lambda_common(std::size_t k_order, const PhaseNoiseSpec& spec) {
  return residual_pn_power(k_order, spec.subcarriers, PhaseCorrelation{spec.sigma_theta2, true, spec.si_delay});
}

/// lambda_I for whichever oscillator arrangement `spec` describes.
inline double lambda_si(std::size_t k_order, const PhaseNoiseSpec& spec) {
  return spec.mode == OscillatorMode::Common ? lambda_common(k_order, spec) : lambda_separate(k_order, spec);
}

inline double lambda_soi(const PhaseNoiseSpec& spec) { return lambda_separate(1, spec); }

struct LambdaSClosedForm {
  double raw = 0.0;       // closed-form value, equal to E|J[0]|^2
  double lambda_s = 0.0;  // 1 - raw
};

/// Closed-form E|J[0]|^2 for exponential correlation e^{-s |p-q|}:
/// (1/N^2) [ 2 (e^{-(N+1)s} - (N+1) e^{-s} + N) / (e^{-s} - 1)^2 - N ].
inline LambdaSClosedForm lambda_s_closed_form(std::size_t n, double sigma_theta2) {
  if (sigma_theta2 == 0.0) {
    throw Error(ErrorCode::DegenerateVariance, "closed form is 0/0 at sigma^2 = 0; lambda_S = 0 in the limit");
  }
  if (sigma_theta2 < 0.0) throw Error(ErrorCode::InvalidParams, "sigma^2 must be positive");
  const double nn = static_cast<double>(n);
  const double x = sigma_theta2;
  if (nn * x < 1e-2) {
    // Taylor series of the same function in x. The quotient form cancels to
    // roughly eps / (N x)^2 relative error in lambda_S here.
    double lambda = 0.0;
    double fact = 1.0;
    double xp = 1.0;
    for (int m = 1; m <= 8; ++m) {
      fact *= m;
      xp *= x;
      double s_m = 0.0;  // sum_{p,q} |p - q|^m
      for (std::size_t d = 1; d < n; ++d) s_m += 2.0 * (nn - static_cast<double>(d)) * std::pow(static_cast<double>(d), m);
      const double sign = (m % 2 == 1) ? 1.0 : -1.0;
      lambda += sign * xp * s_m / (fact * nn * nn);
    }
    return {1.0 - lambda, lambda};
  }
  const double a = std::expm1(-x);                                    // e^{-x} - 1
  const double g = std::expm1(-(nn + 1.0) * x) - (nn + 1.0) * a;    // e^{-(N+1)x} - (N+1)e^{-x} + N
  const double raw = (2.0 * g / (a * a) - nn) / (nn * nn);
  return {raw, 1.0 - raw};
}

}  // namespace fdx
