#pragma once

// Closed-form performance limits of the two-stage receiver: MSE lower bounds
// for j_I' and h_D, effective-SINR upper bounds, and BER lower bounds (BPSK
// closed form and the general T-ary fixed point).

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <string>

#include "fdx/air_interface.hpp"
#include "fdx/core_model.hpp"
#include "fdx/phase_noise.hpp"

namespace fdx {

struct BoundsInput {
  SystemParams params;
  double lambda_i = 0.0;
  double lambda_s = 0.0;
  double sigma_e2 = 0.0;
  Constellation constellation;
};

inline BoundsInput make_bounds_input(const SystemParams& p, double lambda_i, double lambda_s,
                                     const Constellation& constellation) {
  return {p, lambda_i, lambda_s, sigma_e2(p, lambda_i, lambda_s), constellation};
}

/// lambda_I with K = M - L_S and lambda_S with K = 1 from the oscillator model.
inline BoundsInput make_bounds_input(const SystemParams& p, const PhaseNoiseSpec& pn,
                                     const Constellation& constellation) {
  return make_bounds_input(p, lambda_si(p.pn_order, pn), lambda_soi(pn), constellation);
}

struct MseBounds {
  double pn = 0.0;           // C_n lower bound, MSE of j_I'
  double soi_channel = 0.0;  // D_n lower bound, MSE of h_D
};

/// C_n >= (M - L_S)(sigma_e^2 + (1 - lambda_S) E_hS d) / (N E_hI E_I)
/// D_n >= L_S (sigma_e^2 + (1 - lambda_S) E_hS d) / (N E_S)
/// where d is the squared detection error of the decisions fed back.
inline MseBounds mse_lower_bounds(const BoundsInput& in, double d) {
  const SystemParams& p = in.params;
  const double n = static_cast<double>(p.subcarriers);
  const double noise = in.sigma_e2 + (1.0 - in.lambda_s) * p.soi_channel_power * d;
  return {static_cast<double>(p.pilots - p.soi_taps) * noise / (n * p.si_channel_power * p.si_symbol_power),
          static_cast<double>(p.soi_taps) * noise / (n * p.soi_symbol_power)};
}

/// Effective SINR given measured or bounded MSEs:
/// (1 - lambda_S) E_hS E_S / (C E_hI E_I + D E_S + sigma_e^2).
inline double sinr_exact(const BoundsInput& in, double c_mse, double d_mse) {
  const SystemParams& p = in.params;
  return (1.0 - in.lambda_s) * p.soi_channel_power * p.soi_symbol_power /
         (c_mse * p.si_channel_power * p.si_symbol_power + d_mse * p.soi_symbol_power + in.sigma_e2);
}

/// Upper bound on the effective SINR after feeding back decisions with
/// per-carrier squared error d_bar:
/// (1 - lambda_S) E_hS E_S / ((1 + M/N) sigma_e^2 + (M Q / N)(1 - lambda_S) E_hS d_bar).
/// Equal to sinr_exact evaluated at the MSE bounds with d = Q d_bar.
inline double sinr_upper_bound(const BoundsInput& in, double d_bar) {
  const SystemParams& p = in.params;
  const double n = static_cast<double>(p.subcarriers);
  const double m = static_cast<double>(p.pilots);
  const double q = static_cast<double>(p.data_carriers);
  const double soi = (1.0 - in.lambda_s) * p.soi_channel_power;
  return soi * p.soi_symbol_power / ((1.0 + m / n) * in.sigma_e2 + (m * q / n) * soi * d_bar);
}

/// gamma_0: previous decision correct.
inline double gamma0(const BoundsInput& in) { return sinr_upper_bound(in, 0.0); }

/// gamma_1: previous BPSK decision wrong, d_bar = 4 E_S / N.
inline double gamma1(const BoundsInput& in) {
  return sinr_upper_bound(in, 4.0 * in.params.soi_symbol_power / static_cast<double>(in.params.subcarriers));
}

/// gamma_{i,j}: bound when a_i was sent and a_j decided in the previous iteration.
inline Eigen::MatrixXd gamma_matrix(const BoundsInput& in) {
  const auto& pts = in.constellation.points;
  const auto t = static_cast<Eigen::Index>(pts.size());
  Eigen::MatrixXd g(t, t);
  for (Eigen::Index i = 0; i < t; ++i)
    for (Eigen::Index j = 0; j < t; ++j)
      g(i, j) = sinr_upper_bound(in, std::norm(pts[static_cast<std::size_t>(i)] - pts[static_cast<std::size_t>(j)]));
  return g;
}

/// BPSK BER over Rayleigh fading at average SINR x: (1 - sqrt(x / (1 + x))) / 2.
inline double rayleigh_bpsk_ber(double x) {
  if (x < 0.0 || std::isnan(x)) throw Error(ErrorCode::NegativeSinr, "SINR must be non-negative");
  if (std::isinf(x)) return 0.0;
  // 1 - sqrt(x/(1+x)) = 1 / ((1+x) (1 + sqrt(x/(1+x)))), no cancellation at large x
  const double s = std::sqrt(x / (1.0 + x));
  return 0.5 / ((1.0 + x) * (1.0 + s));
}

/// f(gamma_0) / (1 + f(gamma_0) - f(gamma_1)).
inline double ber_lower_bound_bpsk(double g0, double g1) {
  const double f0 = rayleigh_bpsk_ber(g0);
  const double f1 = rayleigh_bpsk_ber(g1);
  return f0 / (1.0 + f0 - f1);
}

inline double ber_lower_bound_bpsk(const BoundsInput& in) { return ber_lower_bound_bpsk(gamma0(in), gamma1(in)); }

/// f_{i,j}(x): probability of deciding a_j when a_i was sent, at SINR x.
using DetectionModel = std::function<double(std::size_t i, std::size_t j, double sinr)>;

/// Rayleigh detection model built from independent per-bit decisions: each of
/// the b label bits errs with p = f(x / b), so f_{i,j} = p^h (1-p)^(b-h) with h
/// the Hamming distance. Exact for BPSK; an axis-independence approximation
/// for Gray QPSK.
inline DetectionModel rayleigh_detection_model(const Constellation& c) {
  const auto bits = static_cast<double>(c.bits_per_symbol);
  const auto alpha = c.alpha;
  const int b = static_cast<int>(c.bits_per_symbol);
  return [alpha, bits, b](std::size_t i, std::size_t j, double x) {
    const double pe = rayleigh_bpsk_ber(x / bits);
    const int h = alpha[i][j];
    return std::pow(pe, h) * std::pow(1.0 - pe, b - h);
  };
}

struct GeneralBerBound {
  Eigen::MatrixXd p;          // asymptotic P_{i,j}; rows sum to 1/T
  double ber = 0.0;           // (1/log2 T) sum_{i != j} alpha(i,j) P_{i,j}
  double max_residual = 0.0;  // max |P_{i,j} - sum_q f_{i,j}(gamma_{i,q}) P_{i,q}|
  std::size_t iterations = 0;
};

/// Solves P_{i,.} = F_i P_{i,.} with F_i[j,q] = f_{i,j}(gamma_{i,q}) and
/// sum_j P_{i,j} = 1/T for every row i, then forms the BER. The constraints
/// are taken at equality.
inline GeneralBerBound solve_general_ber_bound(const BoundsInput& in, const DetectionModel& f,
                                               std::size_t max_iters = 10000, double tol = 1e-12) {
  const Eigen::MatrixXd gamma = gamma_matrix(in);
  const Eigen::Index t = gamma.rows();
  const double row_mass = 1.0 / static_cast<double>(t);
  GeneralBerBound out;
  out.p.resize(t, t);

  for (Eigen::Index i = 0; i < t; ++i) {
    Eigen::MatrixXd fi(t, t);
    for (Eigen::Index j = 0; j < t; ++j)
      for (Eigen::Index q = 0; q < t; ++q)
        fi(j, q) = f(static_cast<std::size_t>(i), static_cast<std::size_t>(j), gamma(i, q));

    Eigen::VectorXd row = Eigen::VectorXd::Constant(t, row_mass / static_cast<double>(t));
    bool converged = false;
    std::size_t it = 0;
    while (it < max_iters) {
      ++it;
      Eigen::VectorXd next = fi * row;
      const double s = next.sum();
      if (!(s > 0.0)) throw Error(ErrorCode::NoConvergence, "fixed point collapsed to zero in row " + std::to_string(i));
      next *= row_mass / s;
      const double step = (next - row).cwiseAbs().maxCoeff();
      row = next;
      if (step < tol) {
        converged = true;
        break;
      }
    }
    if (!converged) {
      throw Error(ErrorCode::NoConvergence, "row " + std::to_string(i) + " did not contract within " +
                                                std::to_string(max_iters) + " iterations");
    }
    out.iterations = std::max(out.iterations, it);
    out.p.row(i) = row.transpose();
    out.max_residual = std::max(out.max_residual, (row - fi * row).cwiseAbs().maxCoeff());
  }

  double weighted = 0.0;
  for (Eigen::Index i = 0; i < t; ++i)
    for (Eigen::Index j = 0; j < t; ++j)
      if (i != j)
        weighted += in.constellation.alpha[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] * out.p(i, j);
  out.ber = weighted / static_cast<double>(in.constellation.bits_per_symbol);
  return out;
}

struct BoundsReport {
  double lambda_i = 0.0;
  double lambda_s = 0.0;
  double sigma_e2 = 0.0;
  double c_lb0 = 0.0;  // MSE bounds at d = 0
  double d_lb0 = 0.0;
  double gamma0 = 0.0;
  double gamma1 = 0.0;
  Eigen::MatrixXd gamma_ij;
  double ber_lb_bpsk = std::numeric_limits<double>::quiet_NaN();  // only for T = 2
  Eigen::MatrixXd p_ij;
  double ber_lb_general = 0.0;
};

inline BoundsReport compute_bounds_report(const BoundsInput& in) {
  BoundsReport r;
  r.lambda_i = in.lambda_i;
  r.lambda_s = in.lambda_s;
  r.sigma_e2 = in.sigma_e2;
  const MseBounds m0 = mse_lower_bounds(in, 0.0);
  r.c_lb0 = m0.pn;
  r.d_lb0 = m0.soi_channel;
  r.gamma0 = gamma0(in);
  r.gamma1 = gamma1(in);
  r.gamma_ij = gamma_matrix(in);
  if (in.constellation.size() == 2) r.ber_lb_bpsk = ber_lower_bound_bpsk(in);
  const GeneralBerBound g = solve_general_ber_bound(in, rayleigh_detection_model(in.constellation));
  r.p_ij = g.p;
  r.ber_lb_general = g.ber;
  return r;
}

}  // namespace fdx
