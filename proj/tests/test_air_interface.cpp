#include <gtest/gtest.h>

#include <cmath>

#include "fdx/air_interface.hpp"

using namespace fdx;

namespace {

ComplexVec random_vec(std::size_t n, Rng& rng, double var = 1.0) {
  ComplexVec v(static_cast<Eigen::Index>(n));
  for (Eigen::Index i = 0; i < v.size(); ++i) v(i) = complex_gaussian(rng, var);
  return v;
}

// Unitary DFT / IDFT by direct summation.
ComplexVec naive_dft(const ComplexVec& x, double sign) {
  const auto n = x.size();
  ComplexVec out(n);
  for (Eigen::Index k = 0; k < n; ++k) {
    cplx acc = 0.0;
    for (Eigen::Index t = 0; t < n; ++t)
      acc += x(t) * std::polar(1.0, sign * 2.0 * kPi * static_cast<double>(k * t) / static_cast<double>(n));
    out(k) = acc / std::sqrt(static_cast<double>(n));
  }
  return out;
}

}  // namespace

TEST(Channel, SingleTapPower) {
  Rng rng(1);
  double acc = 0.0;
  const int n = 100000;
  for (int i = 0; i < n; ++i) acc += gen_channel(1, 1.0, rng).taps.squaredNorm();
  EXPECT_NEAR(acc / n, 1.0, 0.02);
}

TEST(Channel, TwentyTapsPerTapVariance) {
  Rng rng(2);
  const int n = 20000;
  Eigen::VectorXd per(20);
  per.setZero();
  for (int i = 0; i < n; ++i) per += gen_channel(20, 1.0, rng).taps.cwiseAbs2();
  per /= n;
  for (Eigen::Index l = 0; l < 20; ++l) EXPECT_NEAR(per(l), 0.05, 0.05 * 0.05);
}

TEST(Channel, RejectsBadArguments) {
  Rng rng(3);
  EXPECT_THROW((void)gen_channel(4, 0.0, rng), Error);
  EXPECT_THROW((void)gen_channel(0, 1.0, rng), Error);
}

TEST(Dft, FirstColumnConstant) {
  const ComplexMat f = dft_submatrix(4, 1);
  for (Eigen::Index r = 0; r < 4; ++r) EXPECT_NEAR(std::abs(f(r, 0) - 0.5), 0.0, 1e-15);
}

TEST(Dft, OrthonormalColumns) {
  for (auto [n, l] : {std::pair{8, 3}, std::pair{64, 20}, std::pair{17, 17}}) {
    const ComplexMat f = dft_submatrix(static_cast<std::size_t>(n), static_cast<std::size_t>(l));
    EXPECT_LT((f.adjoint() * f - ComplexMat::Identity(l, l)).cwiseAbs().maxCoeff(), 1e-12);
  }
  EXPECT_THROW((void)dft_submatrix(4, 5), Error);
}

TEST(Dft, MatchesNaiveLoop) {
  const ComplexMat f = dft_submatrix(8, 3);
  for (int r = 0; r < 8; ++r)
    for (int c = 0; c < 3; ++c) {
      const cplx want = std::exp(cplx(0.0, -2.0 * kPi * r * c / 8.0)) / std::sqrt(8.0);
      EXPECT_NEAR(std::abs(f(r, c) - want), 0.0, 1e-15);
    }
}

TEST(Dft, FrequencyResponseMatchesBasis) {
  Rng rng(4);
  const ComplexVec h = random_vec(5, rng);
  EXPECT_LT((frequency_response(h, 32) - frequency_basis(32, 5) * h).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(TI, ZeroSymbolGivesZeroMatrix) {
  Rng rng(5);
  const ChannelImpulse h = gen_channel(3, 1.0, rng);
  EXPECT_EQ(build_T_I(h, ComplexVec::Zero(8), 8).cwiseAbs().maxCoeff(), 0.0);
}

TEST(TI, CommutesWithPhaseNoise) {
  // T_I j = J_I H_I x_I, both sides built independently.
  Rng rng(6);
  const std::size_t n = 8;
  const ChannelImpulse h = gen_channel(3, 1.0, rng);
  const ComplexVec x = random_vec(n, rng);
  const ComplexVec j = random_vec(n, rng);
  const ComplexMat t = build_T_I(h, x, n);
  const ComplexMat jm = spectrum_to_matrix(PhaseNoiseSpectrum{j});
  const ComplexVec hx = (frequency_basis(n, 3) * h.taps).cwiseProduct(x);
  EXPECT_LT((t * j - jm * hx).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(TI, DesignIsLeadingColumnsOfTI) {
  Rng rng(7);
  const std::size_t n = 16;
  const ChannelImpulse h = gen_channel(4, 1.0, rng);
  const ComplexVec x = random_vec(n, rng);
  const ComplexMat full = build_T_I(h, x, n);
  const ComplexMat o = si_design(si_column(h.taps, x), 5);
  EXPECT_LT((o - full.leftCols(5)).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Synthesize, FlatPhaseNoiselessIsPerCarrierProduct) {
  const SystemParams base = make_params(64, 8, 4, 2, 10.0, 30.0, 1.0);
  SystemParams p = base;
  p.noise_power = 1e-300;  // effectively zero
  const PilotLayout layout = comb_layout(p.subcarriers, p.pilots);
  const Constellation c = make_constellation("QPSK", p.soi_symbol_power, p.subcarriers);
  const PhaseNoiseSpec pn = PhaseNoiseSpec::from_relative_bandwidth(0.0, p.subcarriers);
  Rng rng(8);
  const LinkRealization link = synthesize(p, layout, c, pn, rng);
  const ComplexVec hi = frequency_response(link.h_si.taps, 64);
  const ComplexVec hs = frequency_response(link.h_soi.taps, 64);
  const ComplexVec want = hi.cwiseProduct(link.x_si) + hs.cwiseProduct(link.x_soi);
  EXPECT_LT((link.y - want).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_LT((link.h_d - link.h_soi.taps).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(Synthesize, PilotsAndDataFollowLayout) {
  const SystemParams p = make_params(64, 8, 4, 2, 10.0, 30.0);
  const PilotLayout layout = comb_layout(64, 8);
  const Constellation c = make_constellation("BPSK", p.soi_symbol_power, 64);
  Rng rng(9);
  const LinkRealization link = synthesize(p, layout, c, PhaseNoiseSpec::from_relative_bandwidth(1e-4, 64), rng);
  for (std::size_t k : layout.pilot_indices) EXPECT_NEAR(std::abs(link.x_soi(static_cast<Eigen::Index>(k)) - pilot_value(p)), 0.0, 1e-15);
  ASSERT_EQ(link.data_symbols.size(), 56u);
  for (std::size_t q = 0; q < 56; ++q) {
    EXPECT_EQ(link.x_soi(static_cast<Eigen::Index>(layout.data_indices[q])), c.points[link.data_symbols[q]]);
  }
  EXPECT_NEAR(link.x_si.squaredNorm(), p.si_symbol_power, 1e-9 * p.si_symbol_power);
}

TEST(Synthesize, TimeDomainOracle) {
  // Rebuild y through the time domain: per-path IDFT of H X, multiply by the
  // combined phasor sample by sample, DFT back.
  const std::size_t n = 8;
  const SystemParams p = make_params(n, 4, 2, 2, 10.0, 20.0);
  const PilotLayout layout = comb_layout(n, 4);
  const Constellation c = make_constellation("QPSK", p.soi_symbol_power, n);
  for (OscillatorMode mode : {OscillatorMode::Separate, OscillatorMode::Common}) {
    const PhaseNoiseSpec pn = PhaseNoiseSpec::from_relative_bandwidth(5e-2, n, mode, mode == OscillatorMode::Common ? 2 : 0);
    Rng rng(10);
    const LinkRealization link = synthesize(p, layout, c, pn, rng);
    // Recover the time-domain phasors from J by inverse DFT (J = (1/N) DFT(phasor)).
    const ComplexVec phasor_i = naive_dft(link.j_si.coeffs, +1.0) * std::sqrt(static_cast<double>(n));
    const ComplexVec phasor_s = naive_dft(link.j_soi.coeffs, +1.0) * std::sqrt(static_cast<double>(n));
    for (Eigen::Index t = 0; t < phasor_i.size(); ++t) {
      EXPECT_NEAR(std::abs(phasor_i(t)), 1.0, 1e-12);
      EXPECT_NEAR(std::abs(phasor_s(t)), 1.0, 1e-12);
    }
    const ComplexVec hi = frequency_basis(n, 2) * link.h_si.taps;
    const ComplexVec hs = frequency_basis(n, 2) * link.h_soi.taps;
    const ComplexVec si_t = naive_dft(hi.cwiseProduct(link.x_si), +1.0);
    const ComplexVec soi_t = naive_dft(hs.cwiseProduct(link.x_soi), +1.0);
    const ComplexVec y_t = phasor_i.cwiseProduct(si_t) + phasor_s.cwiseProduct(soi_t);
    const ComplexVec y = naive_dft(y_t, -1.0) + link.noise;
    EXPECT_LT((y - link.y).cwiseAbs().maxCoeff(), 1e-9);
  }
}

TEST(Synthesize, CommonModeSharesRxTrace) {
  // With delay 0 and a common oscillator the SI phase is 2 theta_R, so the
  // SI phasor is the square of the RX phasor; SoI phasor is tx_soi * rx.
  // Checked indirectly: Parseval on both spectra.
  const SystemParams p = make_params(16, 4, 2, 2, 10.0, 20.0);
  const PhaseNoiseSpec pn = PhaseNoiseSpec::from_relative_bandwidth(1e-2, 16, OscillatorMode::Common, 0);
  Rng rng(11);
  const LinkRealization link = synthesize(p, comb_layout(16, 4), make_constellation("BPSK", p.soi_symbol_power, 16), pn, rng);
  EXPECT_NEAR(link.j_si.coeffs.squaredNorm(), 1.0, 1e-12);
  EXPECT_NEAR(link.j_soi.coeffs.squaredNorm(), 1.0, 1e-12);
}

TEST(Synthesize, PowerBookkeeping) {
  const SystemParams p = make_params(64, 8, 4, 2, 10.0, 20.0);
  const PilotLayout layout = comb_layout(64, 8);
  const Constellation c = make_constellation("BPSK", p.soi_symbol_power, 64);
  const PhaseNoiseSpec pn = PhaseNoiseSpec::from_relative_bandwidth(1e-3, 64);
  Rng rng(12);
  const int trials = 20000;
  double acc = 0.0;
  for (int t = 0; t < trials; ++t) acc += synthesize(p, layout, c, pn, rng).y.squaredNorm();
  const double want = p.si_channel_power * p.si_symbol_power + p.soi_channel_power * p.soi_symbol_power + p.noise_power;
  EXPECT_NEAR(acc / trials / want, 1.0, 0.03);
}

TEST(Synthesize, RejectsMismatchedLayout) {
  const SystemParams p = make_params(64, 8, 4, 2, 10.0, 20.0);
  Rng rng(13);
  EXPECT_THROW((void)synthesize(p, comb_layout(32, 8), make_constellation("BPSK", 1.0, 64),
                                PhaseNoiseSpec::from_relative_bandwidth(0.0, 64), rng),
               Error);
}

TEST(SigmaE2, Identities) {
  SystemParams p = make_params(64, 8, 4, 2, 0.0, 0.0);
  EXPECT_DOUBLE_EQ(sigma_e2(p, 0.0, 0.0), p.noise_power);
  p.noise_power = 0.0;
  EXPECT_DOUBLE_EQ(sigma_e2(p, 1.0, 0.0), 1.0);
}

TEST(SigmaE2, ModelingErrorPowerLargeScale) {
  // Large-scale params, INR 40 dB, SNR 25 dB, delta_f = 1e-4.
  const SystemParams p = make_params(1024, 40, 20, 20, 25.0, 40.0);
  const PilotLayout layout = comb_layout(1024, 40);
  const Constellation c = make_constellation("BPSK", p.soi_symbol_power, 1024);
  const PhaseNoiseSpec pn = PhaseNoiseSpec::from_relative_bandwidth(1e-4, 1024);
  const double want = sigma_e2(p, lambda_si(p.pn_order, pn), lambda_soi(pn));
  Rng rng(14);
  const int trials = 2000;
  double acc = 0.0;
  for (int t = 0; t < trials; ++t) acc += modeling_error(synthesize(p, layout, c, pn, rng), p.pn_order).squaredNorm();
  EXPECT_NEAR(acc / trials / want, 1.0, 0.05);
}
