#pragma once

// Two-stage joint SI cancellation and data detection.
//
// Stage 1 runs on a full-pilot symbol and jointly fits the SI channel h_I, the
// truncated SI phase noise j_I' and the CPE-rotated SoI channel h_D by
// alternating least squares. Stage 2 runs on mixed pilot/data symbols with the
// stage-1 h_I held fixed: each iteration cancels the reconstructed SI, detects
// the data per subcarrier by ML, rebuilds x_S from pilots and decisions, then
// re-fits j_I' and h_D on all subcarriers.

#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <span>
#include <vector>

#include "fdx/air_interface.hpp"
#include "fdx/core_model.hpp"
#include "fdx/phase_noise.hpp"

namespace fdx {

inline constexpr double kRankTolerance = 1e-10;

/// argmin_x ||A x - b||^2 by column-pivoted QR. Throws SingularSystem when A
/// is rank-deficient at kRankTolerance relative to its largest pivot.
inline ComplexVec least_squares(const ComplexMat& a, const ComplexVec& b) {
  if (a.rows() != b.size()) throw Error(ErrorCode::LengthMismatch, "least_squares: row count mismatch");
  Eigen::ColPivHouseholderQR<ComplexMat> qr(a);
  qr.setThreshold(kRankTolerance);
  if (qr.rank() < a.cols()) {
    throw Error(ErrorCode::SingularSystem, "design matrix rank " + std::to_string(qr.rank()) + " < " +
                                               std::to_string(a.cols()) + " unknowns");
  }
  return qr.solve(b);
}

/// j' = (1, 0, ..., 0): no phase noise.
inline ComplexVec unit_pn(std::size_t k_order) {
  ComplexVec j = ComplexVec::Zero(static_cast<Eigen::Index>(k_order));
  j(0) = 1.0;
  return j;
}

/// j' zero-padded to a full length-N spectrum, S_I j'.
inline PhaseNoiseSpectrum expand_pn(const ComplexVec& pn, std::size_t n) {
  PhaseNoiseSpectrum s{ComplexVec::Zero(static_cast<Eigen::Index>(n))};
  s.coeffs.head(pn.size()) = pn;
  return s;
}

struct ReceiverState {
  ComplexVec si_channel;                 // h_I estimate, L_I taps
  ComplexVec pn;                         // j_I' estimate, K coefficients
  ComplexVec soi_channel;                // h_D estimate, L_S taps
  std::vector<std::size_t> detected;     // constellation index per data carrier
  ComplexVec x_d_hat;                    // detected data symbols
};

// ---------------------------------------------------------------------------
// Stage 1

struct Stage1Result {
  ReceiverState state;
  /// ||y - model||^2 before the first block and after every block update.
  std::vector<double> residuals;
};

inline Stage1Result stage1_estimate(const ComplexVec& y, const ComplexVec& x_si, const ComplexVec& x_pilot,
                                    const SystemParams& p, std::size_t iters) {
  const std::size_t n = p.subcarriers;
  if (static_cast<std::size_t>(y.size()) != n || static_cast<std::size_t>(x_si.size()) != n ||
      static_cast<std::size_t>(x_pilot.size()) != n) {
    throw Error(ErrorCode::LengthMismatch, "stage1_estimate: y, x_I, x_S must have N entries");
  }
  const auto li = static_cast<Eigen::Index>(p.si_taps);
  const auto ls = static_cast<Eigen::Index>(p.soi_taps);
  const ComplexMat g_si = frequency_basis(n, p.si_taps);
  const ComplexMat soi_design = x_pilot.asDiagonal() * frequency_basis(n, p.soi_taps);

  Stage1Result out;
  ReceiverState& st = out.state;
  st.pn = unit_pn(p.pn_order);
  st.si_channel = ComplexVec::Zero(li);
  st.soi_channel = ComplexVec::Zero(ls);

  auto model = [&]() -> ComplexVec {
    const ComplexVec v = si_column(st.si_channel, x_si);
    return apply_phase_noise(expand_pn(st.pn, n), v) + soi_design * st.soi_channel;
  };
  out.residuals.push_back((y - model()).squaredNorm());

  for (std::size_t it = 0; it < iters; ++it) {
    // (h_I, h_D) given j'
    const PhaseNoiseSpectrum j_full = expand_pn(st.pn, n);
    ComplexMat a(static_cast<Eigen::Index>(n), li + ls);
    for (Eigen::Index l = 0; l < li; ++l) a.col(l) = apply_phase_noise(j_full, x_si.cwiseProduct(g_si.col(l)));
    a.rightCols(ls) = soi_design;
    const ComplexVec joint = least_squares(a, y);
    st.si_channel = joint.head(li);
    st.soi_channel = joint.tail(ls);
    out.residuals.push_back((y - model()).squaredNorm());

    // j' given (h_I, h_D)
    const ComplexMat o = si_design(si_column(st.si_channel, x_si), p.pn_order);
    st.pn = least_squares(o, y - soi_design * st.soi_channel);
    out.residuals.push_back((y - model()).squaredNorm());
  }
  return out;
}

// ---------------------------------------------------------------------------
// Stage 2

/// r = S_d^T (y - T_I S_I j'), with `si_basis` = T_I S_I.
inline ComplexVec cancel_si(const ComplexVec& y, const ComplexMat& si_basis, const ComplexVec& pn,
                            const PilotLayout& layout) {
  return gather(y - si_basis * pn, layout.data_indices);
}

/// Same as above, building T_I S_I from an SI channel estimate.
inline ComplexVec cancel_si(const ComplexVec& y, const ComplexVec& si_channel, const ComplexVec& x_si,
                            const ComplexVec& pn, const PilotLayout& layout) {
  return cancel_si(y, si_design(si_column(si_channel, x_si), static_cast<std::size_t>(pn.size())), pn, layout);
}

struct Detection {
  std::vector<std::size_t> symbols;
  std::size_t zero_channel_carriers = 0;  // carriers where |H_D| < 1e-12; decision arbitrary
};

/// Per-carrier ML: argmin_a |r[q] - H[q] a|^2, ties to the lowest index.
/// `channel` holds the channel estimate on the data carriers only.
inline Detection detect_ml(const ComplexVec& r, const ComplexVec& channel, const Constellation& constellation) {
  if (r.size() != channel.size()) throw Error(ErrorCode::LengthMismatch, "detect_ml: r and channel differ in length");
  Detection out;
  out.symbols.resize(static_cast<std::size_t>(r.size()));
  for (Eigen::Index q = 0; q < r.size(); ++q) {
    const cplx h = channel(q);
    if (std::abs(h) < 1e-12) ++out.zero_channel_carriers;
    std::size_t best = 0;
    double best_metric = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < constellation.size(); ++i) {
      const double metric = std::norm(r(q) - h * constellation.points[i]);
      if (metric < best_metric) {
        best_metric = metric;
        best = i;
      }
    }
    out.symbols[static_cast<std::size_t>(q)] = best;
  }
  return out;
}

inline Detection detect_ml(const ComplexVec& r, const ComplexVec& soi_channel, const PilotLayout& layout,
                           const Constellation& constellation) {
  const ComplexVec h = frequency_response(soi_channel, layout.subcarriers());
  return detect_ml(r, gather(h, layout.data_indices), constellation);
}

/// Ground truth available in simulation, used only for the trace's error fields.
struct ReceiverTruth {
  ComplexVec pn;                          // j_I' = J_I[0..K-1]
  ComplexVec soi_channel;                 // h_D
  std::vector<std::size_t> data_symbols;  // transmitted constellation indices
  ComplexVec x_d;
  ComplexVec soi_on_data;                 // s = diag(S_d^T H_D) x_d
};

inline ReceiverTruth make_truth(const LinkRealization& link, const SystemParams& p, const PilotLayout& layout) {
  ReceiverTruth t;
  t.pn = link.j_si.truncated(p.pn_order);
  t.soi_channel = link.h_d;
  t.data_symbols = link.data_symbols;
  t.x_d = link.data_vector(layout);
  t.soi_on_data = gather(frequency_response(link.h_d, p.subcarriers), layout.data_indices).cwiseProduct(t.x_d);
  return t;
}

struct IterationRecord {
  ComplexVec pn;
  ComplexVec soi_channel;
  std::vector<std::size_t> detected;
  ComplexVec x_d_hat;
  std::size_t zero_channel_carriers = 0;
  // Ground-truth-aided; NaN / zero when no truth was supplied.
  std::size_t symbol_errors = 0;
  std::size_t bit_errors = 0;
  double d = std::numeric_limits<double>::quiet_NaN();               // ||x_d - x_d_hat||^2
  double mse_j = std::numeric_limits<double>::quiet_NaN();           // ||j' - j'_hat||^2
  double mse_hd = std::numeric_limits<double>::quiet_NaN();          // ||h_D - h_D_hat||^2
  double residual_power = std::numeric_limits<double>::quiet_NaN();  // ||r_n - s||^2
};

using IterationTrace = std::vector<IterationRecord>;

/// Stage-2 machinery for one received symbol with a fixed SI channel estimate.
class TwoStageReceiver {
 public:
  TwoStageReceiver(const SystemParams& p, const PilotLayout& layout, const Constellation& constellation,
                   const ComplexVec& si_channel, const ComplexVec& x_si)
      : p_(p),
        layout_(layout),
        constellation_(constellation),
        si_channel_(si_channel),
        si_basis_(si_design(si_column(si_channel, x_si), p.pn_order)),
        soi_basis_(frequency_basis(p.subcarriers, p.soi_taps)),
        pilot_symbols_(ComplexVec::Zero(static_cast<Eigen::Index>(p.subcarriers))) {
    if (layout.subcarriers() != p.subcarriers || layout.pilot_indices.size() != p.pilots) {
      throw Error(ErrorCode::LengthMismatch, "layout does not match N and M");
    }
    const double pv = pilot_value(p);
    for (std::size_t k : layout.pilot_indices) pilot_symbols_(static_cast<Eigen::Index>(k)) = pv;
  }

  const ComplexMat& si_basis() const { return si_basis_; }
  const ComplexMat& soi_basis() const { return soi_basis_; }

  /// Initial state: j' = e_0 and h_D fitted on the M pilot carriers only.
  ReceiverState initial_state(const ComplexVec& y) const {
    ReceiverState st;
    st.si_channel = si_channel_;
    st.pn = unit_pn(p_.pn_order);
    const ComplexVec cleaned = y - si_basis_ * st.pn;
    const ComplexMat a =
        gather(pilot_symbols_, layout_.pilot_indices).asDiagonal() * gather_rows(soi_basis_, layout_.pilot_indices);
    st.soi_channel = least_squares(a, gather(cleaned, layout_.pilot_indices));
    return st;
  }

  ComplexVec cancel(const ComplexVec& y, const ComplexVec& pn) const { return cancel_si(y, si_basis_, pn, layout_); }

  Detection detect(const ComplexVec& r, const ComplexVec& soi_channel) const {
    const ComplexVec h = soi_basis_ * soi_channel;
    return detect_ml(r, gather(h, layout_.data_indices), constellation_);
  }

  /// x_S_hat = S_p x_p + S_d x_d_hat.
  ComplexVec reconstruct(const std::vector<std::size_t>& detected) const {
    ComplexVec x = pilot_symbols_;
    for (std::size_t q = 0; q < detected.size(); ++q)
      x(static_cast<Eigen::Index>(layout_.data_indices[q])) = constellation_.points[detected[q]];
    return x;
  }

  /// One pass: cancel, detect, rebuild x_S, refit j' then h_D.
  ReceiverState iterate(const ComplexVec& y, const ReceiverState& st, Detection* detection = nullptr,
                        ComplexVec* cancelled = nullptr) const {
    ComplexVec r = cancel(y, st.pn);
    Detection det = detect(r, st.soi_channel);
    const ComplexVec x_hat = reconstruct(det.symbols);

    ReceiverState next;
    next.si_channel = st.si_channel;
    const ComplexVec h_prev = soi_basis_ * st.soi_channel;
    next.pn = least_squares(si_basis_, y - h_prev.cwiseProduct(x_hat));
    const ComplexMat soi_design = x_hat.asDiagonal() * soi_basis_;
    next.soi_channel = least_squares(soi_design, y - si_basis_ * next.pn);
    next.detected = det.symbols;
    next.x_d_hat = gather(x_hat, layout_.data_indices);

    if (detection) *detection = std::move(det);
    if (cancelled) *cancelled = std::move(r);
    return next;
  }

  IterationTrace run(const ComplexVec& y, std::size_t n_iters, const ReceiverTruth* truth = nullptr) const {
    if (n_iters < 1) throw Error(ErrorCode::InvalidParams, "receiver needs at least one iteration");
    IterationTrace trace;
    trace.reserve(n_iters);
    ReceiverState st = initial_state(y);
    for (std::size_t it = 0; it < n_iters; ++it) {
      Detection det;
      ComplexVec r;
      st = iterate(y, st, &det, &r);
      IterationRecord rec;
      rec.pn = st.pn;
      rec.soi_channel = st.soi_channel;
      rec.detected = st.detected;
      rec.x_d_hat = st.x_d_hat;
      rec.zero_channel_carriers = det.zero_channel_carriers;
      if (truth) {
        for (std::size_t q = 0; q < rec.detected.size(); ++q) {
          const std::size_t tx = truth->data_symbols[q];
          const std::size_t rx = rec.detected[q];
          if (tx != rx) {
            ++rec.symbol_errors;
            rec.bit_errors += static_cast<std::size_t>(constellation_.alpha[tx][rx]);
          }
        }
        rec.d = (truth->x_d - rec.x_d_hat).squaredNorm();
        rec.mse_j = (truth->pn - rec.pn).squaredNorm();
        rec.mse_hd = (truth->soi_channel - rec.soi_channel).squaredNorm();
        rec.residual_power = (r - truth->soi_on_data).squaredNorm();
      }
      trace.push_back(std::move(rec));
    }
    return trace;
  }

 private:
  SystemParams p_;
  PilotLayout layout_;
  Constellation constellation_;
  ComplexVec si_channel_;
  ComplexMat si_basis_;
  ComplexMat soi_basis_;
  ComplexVec pilot_symbols_;
};

inline ReceiverState stage2_iterate(const ComplexVec& y, const ReceiverState& state, const ComplexVec& x_si,
                                    const SystemParams& p, const PilotLayout& layout,
                                    const Constellation& constellation) {
  return TwoStageReceiver(p, layout, constellation, state.si_channel, x_si).iterate(y, state);
}

inline IterationTrace run_receiver(const ComplexVec& y, const ComplexVec& x_si, const ComplexVec& si_channel,
                                   const SystemParams& p, const PilotLayout& layout,
                                   const Constellation& constellation, std::size_t n_iters,
                                   const ReceiverTruth* truth = nullptr) {
  return TwoStageReceiver(p, layout, constellation, si_channel, x_si).run(y, n_iters, truth);
}

}  // namespace fdx
