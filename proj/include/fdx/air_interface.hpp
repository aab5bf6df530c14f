#pragma once

// Channel and symbol generation and frequency-domain synthesis of the received
// OFDM symbol y = J_I H_I x_I + J_S H_S x_S + w, plus the structural matrices
// shared by the receiver and the bounds.
//
// Convention: a channel's frequency response is the unnormalized DFT of its
// taps, H[k] = sum_l h(l) e^{-j 2 pi k l / N} = sqrt(N) (F h)[k], so that
// E|H[k]|^2 = E_h and E||H x||^2 = E_h E_x.

#include <cmath>
#include <cstddef>
#include <optional>
#include <random>
#include <span>
#include <vector>

#include "fdx/core_model.hpp"
#include "fdx/phase_noise.hpp"
#include "fdx/random.hpp"

namespace fdx {

struct ChannelImpulse {
  ComplexVec taps;
  double total_power = 0.0;  // E_h, the generating power

  std::size_t size() const { return static_cast<std::size_t>(taps.size()); }
};

/// Rayleigh taps with uniform power-delay profile, each CN(0, E_h / L).
inline ChannelImpulse gen_channel(std::size_t taps, double power, Rng& rng) {
  if (taps < 1) throw Error(ErrorCode::InvalidParams, "channel needs at least one tap");
  if (!(power > 0.0)) throw Error(ErrorCode::InvalidParams, "channel power must be positive");
  ChannelImpulse h{ComplexVec(static_cast<Eigen::Index>(taps)), power};
  const double per_tap = power / static_cast<double>(taps);
  for (Eigen::Index l = 0; l < h.taps.size(); ++l) h.taps(l) = complex_gaussian(rng, per_tap);
  return h;
}

/// N x L matrix with entries e^{-j 2 pi n l / N} / sqrt(N); orthonormal columns.
inline ComplexMat dft_submatrix(std::size_t n, std::size_t l) {
  if (l > n) throw Error(ErrorCode::InvalidParams, "DFT submatrix needs L <= N");
  ComplexMat f(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(l));
  const double nn = static_cast<double>(n);
  const double scale = 1.0 / std::sqrt(nn);
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t c = 0; c < l; ++c) {
      const double ang = -2.0 * kPi * static_cast<double>((r * c) % n) / nn;
      f(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = scale * cplx(std::cos(ang), std::sin(ang));
    }
  return f;
}

/// sqrt(N) F: maps taps to the frequency response under the convention above.
inline ComplexMat frequency_basis(std::size_t n, std::size_t l) {
  return dft_submatrix(n, l) * std::sqrt(static_cast<double>(n));
}

inline ComplexVec frequency_response(const ComplexVec& taps, std::size_t n) {
  if (static_cast<std::size_t>(taps.size()) > n) throw Error(ErrorCode::InvalidParams, "more taps than subcarriers");
  ComplexVec padded = ComplexVec::Zero(static_cast<Eigen::Index>(n));
  padded.head(taps.size()) = taps;
  return fft_forward(padded);
}

/// Rows of `basis` restricted to `rows`.
inline ComplexMat gather_rows(const ComplexMat& basis, std::span<const std::size_t> rows) {
  ComplexMat out(static_cast<Eigen::Index>(rows.size()), basis.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = basis.row(static_cast<Eigen::Index>(rows[i]));
  return out;
}

inline ComplexVec gather(const ComplexVec& v, std::span<const std::size_t> idx) {
  ComplexVec out(static_cast<Eigen::Index>(idx.size()));
  for (std::size_t i = 0; i < idx.size(); ++i) out(static_cast<Eigen::Index>(i)) = v(static_cast<Eigen::Index>(idx[i]));
  return out;
}

/// T_I x: first column of the SI circulant, H_I[k] X_I[k].
inline ComplexVec si_column(const ComplexVec& si_taps, const ComplexVec& x_si) {
  return frequency_response(si_taps, static_cast<std::size_t>(x_si.size())).cwiseProduct(x_si);
}

/// T_I with (m, n) entry H_I[(m-n) mod N] X_I[(m-n) mod N], so T_I j_I = J_I H_I x_I.
inline ComplexMat build_T_I(const ChannelImpulse& h_si, const ComplexVec& x_si, std::size_t n) {
  if (static_cast<std::size_t>(x_si.size()) != n) throw Error(ErrorCode::LengthMismatch, "x_I must have N entries");
  return spectrum_to_matrix(PhaseNoiseSpectrum{si_column(h_si.taps, x_si)});
}

/// T_I S_I (N x K): column c is the SI column circularly delayed by c.
inline ComplexMat si_design(const ComplexVec& column, std::size_t k_order) {
  const Eigen::Index n = column.size();
  ComplexMat o(n, static_cast<Eigen::Index>(k_order));
  for (Eigen::Index c = 0; c < static_cast<Eigen::Index>(k_order); ++c)
    for (Eigen::Index m = 0; m < n; ++m) o(m, c) = column(((m - c) % n + n) % n);
  return o;
}

/// One drawn instance of everything random in a symbol; ground truth for a trial.
struct LinkRealization {
  ChannelImpulse h_si;
  ChannelImpulse h_soi;
  ComplexVec h_d;                         // J_S[0] h_S
  ComplexVec x_si;                        // N
  ComplexVec x_soi;                       // N, pilots and data per layout
  std::vector<std::size_t> data_symbols;  // constellation index per data carrier
  PhaseNoiseSpectrum j_si;
  PhaseNoiseSpectrum j_soi;
  ComplexVec noise;
  ComplexVec y;

  /// x_d, the data subvector of x_S.
  ComplexVec data_vector(const PilotLayout& layout) const { return gather(x_soi, layout.data_indices); }
};

/// Channels held fixed across the symbols of one frame.
struct FrameChannels {
  ChannelImpulse h_si;
  ChannelImpulse h_soi;
};

inline FrameChannels gen_frame_channels(const SystemParams& p, Rng& rng) {
  FrameChannels ch;
  ch.h_si = gen_channel(p.si_taps, p.si_channel_power, rng);
  ch.h_soi = gen_channel(p.soi_taps, p.soi_channel_power, rng);
  return ch;
}

inline double pilot_value(const SystemParams& p) {
  return std::sqrt(p.soi_symbol_power / static_cast<double>(p.subcarriers));
}

/// Draws phase noise, symbols and noise for one OFDM symbol over `channels`
/// and forms y. Pilots carry sqrt(E_S / N); data carriers draw uniformly from
/// `constellation`; the SI symbol draws from the same family scaled to E_I.
inline LinkRealization synthesize(const SystemParams& p, const PilotLayout& layout, const Constellation& constellation,
                                  const PhaseNoiseSpec& pn, const FrameChannels& channels, Rng& rng) {
  const std::size_t n = p.subcarriers;
  if (layout.subcarriers() != n) throw Error(ErrorCode::LengthMismatch, "layout does not cover N subcarriers");
  if (pn.subcarriers != n) throw Error(ErrorCode::LengthMismatch, "phase-noise spec built for a different N");
  const auto ni = static_cast<Eigen::Index>(n);

  LinkRealization link;
  link.h_si = channels.h_si;
  link.h_soi = channels.h_soi;

  const Constellation si_alphabet = constellation.scaled(std::sqrt(p.si_symbol_power / p.soi_symbol_power));
  std::uniform_int_distribution<std::size_t> pick(0, constellation.size() - 1);
  link.x_si.resize(ni);
  for (Eigen::Index k = 0; k < ni; ++k) link.x_si(k) = si_alphabet.points[pick(rng)];

  link.x_soi.resize(ni);
  const double pv = pilot_value(p);
  for (std::size_t k : layout.pilot_indices) link.x_soi(static_cast<Eigen::Index>(k)) = pv;
  link.data_symbols.reserve(layout.data_indices.size());
  for (std::size_t k : layout.data_indices) {
    const std::size_t s = pick(rng);
    link.data_symbols.push_back(s);
    link.x_soi(static_cast<Eigen::Index>(k)) = constellation.points[s];
  }

  // Local RX trace spans samples -alpha..N-1; the SI TX trace is either its own
  // process or (common oscillator) the RX trace itself.
  const std::size_t delay = pn.si_delay;
  const PhaseTrace theta_rx = gen_wiener(pn.sigma_theta2, n + delay, rng);
  const PhaseTrace theta_tx_si =
      pn.mode == OscillatorMode::Common ? theta_rx : gen_wiener(pn.sigma_theta2, n + delay, rng);
  const PhaseTrace theta_tx_soi = gen_wiener(pn.sigma_theta2, n, rng);
  link.j_si = phase_to_spectrum(theta_tx_si, theta_rx, delay, n);
  link.j_soi = phase_to_spectrum(theta_tx_soi, std::span<const double>(theta_rx).subspan(delay), 0, n);

  link.h_d = link.j_soi[0] * link.h_soi.taps;

  link.noise.resize(ni);
  const double per_carrier = p.noise_power / static_cast<double>(n);
  for (Eigen::Index k = 0; k < ni; ++k) link.noise(k) = complex_gaussian(rng, per_carrier);

  const ComplexVec v_si = si_column(link.h_si.taps, link.x_si);
  const ComplexVec v_soi = frequency_response(link.h_soi.taps, n).cwiseProduct(link.x_soi);
  link.y = apply_phase_noise(link.j_si, v_si) + apply_phase_noise(link.j_soi, v_soi) + link.noise;
  return link;
}

/// Convenience: fresh channels and one symbol.
inline LinkRealization synthesize(const SystemParams& p, const PilotLayout& layout, const Constellation& constellation,
                                  const PhaseNoiseSpec& pn, Rng& rng) {
  const FrameChannels ch = gen_frame_channels(p, rng);
  return synthesize(p, layout, constellation, pn, ch, rng);
}

/// e = T_I (j_I - S_I j_I') + (J_S H_S - H_D) x_S + w for a realization.
inline ComplexVec modeling_error(const LinkRealization& link, std::size_t k_order) {
  const std::size_t n = static_cast<std::size_t>(link.y.size());
  PhaseNoiseSpectrum si_tail = link.j_si;
  si_tail.coeffs.head(static_cast<Eigen::Index>(k_order)).setZero();
  PhaseNoiseSpectrum soi_ici = link.j_soi;
  soi_ici.coeffs(0) = 0.0;
  const ComplexVec v_si = si_column(link.h_si.taps, link.x_si);
  const ComplexVec v_soi = frequency_response(link.h_soi.taps, n).cwiseProduct(link.x_soi);
  return apply_phase_noise(si_tail, v_si) + apply_phase_noise(soi_ici, v_soi) + link.noise;
}

/// sigma_e^2 = lambda_I E_hI E_I + lambda_S E_hS E_S + sigma_w^2.
inline double sigma_e2(const SystemParams& p, double lambda_i, double lambda_s) {
  return lambda_i * p.si_channel_power * p.si_symbol_power + lambda_s * p.soi_channel_power * p.soi_symbol_power +
         p.noise_power;
}

}  // namespace fdx
