#pragma once

#include "phn/bicm_tx.hpp"
#include "phn/channel_model.hpp"
#include "phn/ldpc.hpp"

namespace phn {

// Layout conventions shared by every stage:
//  * symbol distributions are M x (J * N_t) matrices, column j * N_t + m
//    holding antenna m at the j-th data instant;
//  * bit probabilities (of the bit being 1) are bps x (J * N_t) matrices whose
//    column-major storage is exactly the transmitted (interleaved) bit order;
//  * candidate symbol vectors are indexed in base M with antenna 0 as the most
//    significant digit.

/// Enumerates all M^N_t candidate transmit vectors.
class CandidateSet {
 public:
  CandidateSet(const Constellation& cst, int num_tx);

  int num_tx() const { return num_tx_; }
  int order() const { return order_; }
  int size() const { return static_cast<int>(vectors_.cols()); }
  int digit(int c, int m) const { return digits_(c, m); }
  const CMatrix& vectors() const { return vectors_; }

 private:
  int num_tx_;
  int order_;
  Eigen::MatrixXi digits_;  // size x N_t
  CMatrix vectors_;         // N_t x size
};

struct SymbolVectorLikelihoods {
  int num_tx = 0;
  int order = 0;
  /// candidates x J; every column is normalized to unit mass.
  RMatrix values;
};

struct SoftSymbolStats {
  CMatrix alpha;               // N_t x L_f
  std::vector<CMatrix> b;      // L_f matrices, N_t x N_t
};

struct DetectorConfig {
  int outer_iters = 1;    // equalizer <-> soft modem
  int inner_iters = 1;    // demapper <-> decoder
  int decoder_iters = 1;  // inside the LDPC decoder
  /// Stop decoding once the syndrome is zero.
  bool early_exit = true;

  void validate() const;
};

struct DetectorDiagnostics {
  /// Distributions that collapsed to zero mass and were reset to uniform.
  int clamp_events = 0;
};

SymbolVectorLikelihoods channel_likelihoods(const ReceivedFrame& y, const ChannelMatrix& h,
                                            const RMatrix& phi_hat, const Constellation& cst,
                                            const FrameLayout& layout);

RMatrix equalizer_extrinsic(const SymbolVectorLikelihoods& lik, const RMatrix& symbol_priors,
                            DetectorDiagnostics* diag = nullptr);

RMatrix demapper_extrinsic(const RMatrix& symbol_extrinsic, const RMatrix& bit_priors,
                           const Constellation& cst, DetectorDiagnostics* diag = nullptr);

RMatrix symbol_priors_from_bits(const RMatrix& bit_priors, const Constellation& cst);

struct PosteriorMapperResult {
  RMatrix vector_posterior;  // candidates x J
  SoftSymbolStats soft;
};

PosteriorMapperResult posterior_mapper(const SymbolVectorLikelihoods& lik, const RMatrix& bit_priors,
                                       const Constellation& cst, const FrameLayout& layout);

struct DetectorIterationRecord {
  int outer = 0;
  int inner = 0;
  /// Mean of 1 - H2(posterior) over code bits.
  double mi_proxy = 0.0;
  std::size_t syndrome_weight = 0;
};

struct DetectorResult {
  SoftSymbolStats soft;
  RMatrix vector_posterior;
  BitBeliefs bit_posteriors;   // code order, length n
  BitBeliefs decoder_priors;   // transmitted order; warm start for the next pass
  BitVector hard_bits;         // info bits
  std::size_t syndrome_weight = 0;
  std::vector<DetectorIterationRecord> history;
  DetectorDiagnostics diagnostics;
};

/// Iterative BICM detector: likelihoods, then the outer equalizer loop around
/// the inner demapper/decoder loop, then the posterior mapper.
DetectorResult run_detector(const ReceivedFrame& y, const ChannelMatrix& h, const RMatrix& phi_hat,
                            const LdpcCode& code, const Interleaver& il, const Constellation& cst,
                            const FrameLayout& layout, const DetectorConfig& cfg,
                            const BitBeliefs* warm_priors = nullptr);

/// Bit-probability matrix view helpers.
RMatrix bits_to_matrix(const std::vector<double>& flat, const Constellation& cst, int num_tx);
std::vector<double> matrix_to_bits(const RMatrix& m);

}  // namespace phn
