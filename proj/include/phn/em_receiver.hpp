#pragma once

#include "phn/detector.hpp"
#include "phn/ekfs.hpp"

#include <optional>

namespace phn {

struct EmConfig {
  int em_iters = 3;
  DetectorConfig detector;
  /// Phase-noise increment variance and covariance structure used by the
  /// tracker; the observation noise is taken from each received frame.
  double innovation_var = 5e-5;
  bool exact_increment_cov = false;

  void validate() const;
  EkfsConfig ekfs_for(const ReceivedFrame& y, int num_tx) const;
};

struct MapOracleConfig {
  double grid_step = 1e-2;  // rad
  int ap_cycles = 4;

  void validate() const;
};

struct EmIterationRecord {
  int iteration = 0;
  double q_value = 0.0;
  std::size_t syndrome_weight = 0;
  BitVector hard_bits;                 // info bits after this iteration's detector pass
  std::optional<double> ber;           // against truth, when supplied
  std::vector<DetectorIterationRecord> detector_history;
};

struct EmResult {
  BitVector hard_bits;
  ReducedPhnTrajectory phi_hat;        // final estimate
  SoftSymbolStats soft;                // from the last detector pass
  std::vector<EmIterationRecord> history;
  EkfsTrajectory last_track;
};

/// Per-component linear interpolation of pilot-instant estimates onto every
/// instant of the frame; instants outside the pilot span hold the edge value.
RMatrix interpolate_pilot_phases(const RMatrix& pilot_estimates, const FrameLayout& layout);

/// Tracks phases over the pilot instants only (prediction covariance scaled
/// by the pilot gap), then interpolates. With fewer than two pilots the
/// single estimate (or zero) is held and `held` is set.
ReducedPhnTrajectory init_pilot_phn(const ReceivedFrame& y, const ChannelMatrix& h,
                                    const FrameLayout& layout, const EmConfig& cfg,
                                    bool* held = nullptr);

/// Expected complete-data log-likelihood plus the random-walk log-prior of
/// the reduced state (constants dropped). The likelihood is scaled by
/// 1 / (2 noise_var) per receive antenna, matching the detector metric.
double evaluate_q(const RMatrix& phi, const ReceivedFrame& y, const ChannelMatrix& h,
                  const SoftSymbolStats& soft, double innovation_var,
                  bool exact_increment_cov = false);

/// Likelihood part of the objective in the unreduced per-oscillator
/// parameterization (N_r + N_t phase rows).
double expected_loglik_full(const RMatrix& theta_rx, const RMatrix& theta_tx,
                            const ReceivedFrame& y, const ChannelMatrix& h,
                            const SoftSymbolStats& soft);

/// Per-instant likelihood term of the objective at instant k.
double instant_objective(const RVector& phi_k, const CVector& y_k, const RVector& noise_var,
                         const ChannelMatrix& h, const CVector& alpha_k, const CMatrix& b_k);

/// Point-mass soft statistics for known symbols.
SoftSymbolStats known_symbol_stats(const CMatrix& symbols);

/// Grid-search maximizer by cyclic coordinate ascent: for every component and
/// instant the coordinate is set to the best point of a uniform grid on
/// [-pi, pi) with everything else held. Deterministic; stops early once a
/// full cycle changes nothing.
RMatrix map_oracle(const ReceivedFrame& y, const ChannelMatrix& h, const SoftSymbolStats& soft,
                   const MapOracleConfig& cfg, double innovation_var);

/// Full EM receiver: pilot initialization, then em_iters rounds of detector
/// (E-step, warm-started) and EKFS (M-step).
EmResult run_em(const ReceivedFrame& y, const ChannelMatrix& h, const FrameLayout& layout,
                const LdpcCode& code, const Interleaver& il, const Constellation& cst,
                const EmConfig& cfg, const BitVector* truth = nullptr);

/// Pilot-only estimation followed by a single detector pass.
DetectorResult disjoint_receiver(const ReceivedFrame& y, const ChannelMatrix& h,
                                 const FrameLayout& layout, const LdpcCode& code,
                                 const Interleaver& il, const Constellation& cst,
                                 const EmConfig& cfg);

/// Detector passes against a fixed phase trajectory, each warm-started from
/// the previous one. Returns the info-bit decisions of every pass.
std::vector<BitVector> fixed_phase_receiver(const ReceivedFrame& y, const ChannelMatrix& h,
                                            const RMatrix& phi_hat, const FrameLayout& layout,
                                            const LdpcCode& code, const Interleaver& il,
                                            const Constellation& cst, const DetectorConfig& cfg,
                                            int passes);

std::size_t count_bit_errors(const BitVector& a, const BitVector& b);

}  // namespace phn
