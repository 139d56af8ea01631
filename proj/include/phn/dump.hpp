#pragma once

#include "phn/bicm_tx.hpp"
#include "phn/em_receiver.hpp"

#include <iosfwd>

namespace phn {

// Plain-text dumps for plotting and regression fixtures. Numbers are written
// with 17 significant digits unless noted.

/// One JSON object per EM iteration: iteration, q, syndrome_weight, ber.
void write_em_jsonl(std::ostream& out, const std::vector<EmIterationRecord>& history);

/// outer,inner,mi_proxy,syndrome_weight
void write_detector_csv(std::ostream& out, const std::vector<DetectorIterationRecord>& history);

/// k, prior/posterior/smoothed state components, smoothed covariance diagonal.
/// k is 1-based.
void write_ekfs_csv(std::ostream& out, const EkfsTrajectory& t);

/// k, receive phases, transmit phases, reduced phases.
void write_phn_csv(std::ostream& out, const PhnTrajectories& phn);

/// k, pilot flag, real/imaginary part of every transmit antenna.
void write_txframe_csv(std::ostream& out, const TxFrame& frame);

}  // namespace phn
