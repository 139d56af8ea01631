#pragma once

#include "phn/common.hpp"

#include <limits>

namespace phn {

struct ChannelConfig {
  int num_tx = 2;
  int num_rx = 2;
  /// Rician factor in dB. -infinity gives pure Rayleigh (NLoS only).
  double rician_factor_db = 2.0;
  Complex channel_mean{0.0, 0.0};
  double channel_var = 1.0;

  void validate() const;
};

struct RicianSplit {
  double los_power;
  double nlos_power;
};

/// LoS/NLoS power split K/(K+1), 1/(K+1) of the per-entry variance.
RicianSplit rician_power_split(double rician_factor_db, double channel_var);

/// N_r x N_t complex gains H; entry (l, m) couples transmit m to receive l.
using ChannelMatrix = CMatrix;

struct PhnConfig {
  double innovation_var = 5e-5;
  int frame_len = 1;

  void validate() const;
};

/// Per-oscillator Wiener phase paths over one frame. Column k holds time k+1.
struct PhnTrajectories {
  RMatrix rx_phase;  // N_r x L_f
  RMatrix tx_phase;  // N_t x L_f
  RMatrix rx_innovations;
  RMatrix tx_innovations;
  double innovation_var = 0.0;

  int num_rx() const { return static_cast<int>(rx_phase.rows()); }
  int num_tx() const { return static_cast<int>(tx_phase.rows()); }
  int frame_len() const { return static_cast<int>(rx_phase.cols()); }

  static PhnTrajectories zeros(int num_tx, int num_rx, int frame_len);
};

/// Identifiable phase combinations referenced to the last transmit oscillator.
/// Rows 0..N_r-1 are receive phases plus the reference, rows N_r.. are the
/// other transmit phases minus the reference.
struct ReducedPhnTrajectory {
  RMatrix phi;  // (N_r + N_t - 1) x L_f
  double reduced_innovation_var = 0.0;

  int state_dim() const { return static_cast<int>(phi.rows()); }
  int frame_len() const { return static_cast<int>(phi.cols()); }
};

struct ReceivedFrame {
  CMatrix observations;  // N_r x L_f
  RVector noise_var;     // per receive antenna
  double eb_n0_db = 0.0;
};

ChannelMatrix generate_rician_channel(const ChannelConfig& cfg, Seed seed);

PhnTrajectories generate_phn(const PhnConfig& cfg, int num_tx, int num_rx, Seed seed);

ReducedPhnTrajectory reduce_ambiguity(const PhnTrajectories& phn);

/// y(k) = Gamma_r(k) H Gamma_t(k) s(k) + w(k), w ~ CN(0, noise_var[l]).
ReceivedFrame apply_channel(const CMatrix& symbols, const ChannelMatrix& h,
                            const PhnTrajectories& phn, const RVector& noise_var,
                            Seed seed);

ReceivedFrame apply_channel(const CMatrix& symbols, const ChannelMatrix& h,
                            const PhnTrajectories& phn, double noise_var, Seed seed);

// Model evaluation. Templated on the real scalar so that the same expressions
// serve double-precision simulation and extended-precision checks.

template <typename Scalar, typename Derived>
Eigen::Matrix<std::complex<Scalar>, Eigen::Dynamic, 1> unit_phasors(
    const Eigen::MatrixBase<Derived>& phases) {
  Eigen::Matrix<std::complex<Scalar>, Eigen::Dynamic, 1> out(phases.size());
  for (Eigen::Index i = 0; i < phases.size(); ++i) {
    out(i) = std::polar(Scalar(1), static_cast<Scalar>(phases(i)));
  }
  return out;
}

/// X = diag(e^{j theta_r}) H diag(e^{j theta_t}).
template <typename Scalar, typename DerivedH, typename DerivedR, typename DerivedT>
Eigen::Matrix<std::complex<Scalar>, Eigen::Dynamic, Eigen::Dynamic> full_channel(
    const Eigen::MatrixBase<DerivedH>& h, const Eigen::MatrixBase<DerivedR>& theta_rx,
    const Eigen::MatrixBase<DerivedT>& theta_tx) {
  const auto gr = unit_phasors<Scalar>(theta_rx);
  const auto gt = unit_phasors<Scalar>(theta_tx);
  return gr.asDiagonal() * h.template cast<std::complex<Scalar>>() * gt.asDiagonal();
}

/// X = diag(e^{j phi_1..N_r}) H diag(e^{j phi_{N_r+1}..}, 1).
template <typename Scalar, typename DerivedH, typename DerivedP>
Eigen::Matrix<std::complex<Scalar>, Eigen::Dynamic, Eigen::Dynamic> reduced_channel(
    const Eigen::MatrixBase<DerivedH>& h, const Eigen::MatrixBase<DerivedP>& phi) {
  const Eigen::Index nr = h.rows();
  const Eigen::Index nt = h.cols();
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> tx(nt);
  tx.head(nt - 1) = phi.segment(nr, nt - 1).template cast<Scalar>();
  tx(nt - 1) = Scalar(0);
  return full_channel<Scalar>(h, phi.head(nr).template cast<Scalar>(), tx);
}

inline CMatrix reduced_channel(const ChannelMatrix& h, const RVector& phi) {
  return reduced_channel<double>(h, phi);
}

}  // namespace phn
