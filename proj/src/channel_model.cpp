#include "phn/channel_model.hpp"

#include <cmath>

namespace phn {

void ChannelConfig::validate() const {
  if (num_tx < 1 || num_rx < 1) throw ConfigError("channel: antenna counts must be >= 1");
  if (!(channel_var > 0.0)) throw ConfigError("channel: channel_var must be positive");
  if (std::isnan(rician_factor_db)) throw ConfigError("channel: rician factor is NaN");
}

void PhnConfig::validate() const {
  if (!(innovation_var >= 0.0)) throw ConfigError("phn: innovation_var must be >= 0");
  if (frame_len < 1) throw ConfigError("phn: frame_len must be >= 1");
}

RicianSplit rician_power_split(double rician_factor_db, double channel_var) {
  if (std::isinf(rician_factor_db) && rician_factor_db < 0) return {0.0, channel_var};
  const double k = db_to_linear(rician_factor_db);
  return {channel_var * k / (k + 1.0), channel_var / (k + 1.0)};
}

ChannelMatrix generate_rician_channel(const ChannelConfig& cfg, Seed seed) {
  cfg.validate();
  const auto split = rician_power_split(cfg.rician_factor_db, cfg.channel_var);
  const double los_amp = std::sqrt(split.los_power);
  Rng rng(seed);
  ChannelMatrix h(cfg.num_rx, cfg.num_tx);
  // Column-major fill keeps the draw order independent of Eigen internals.
  for (int m = 0; m < cfg.num_tx; ++m) {
    for (int l = 0; l < cfg.num_rx; ++l) {
      h(l, m) = cfg.channel_mean + los_amp + complex_normal(rng, split.nlos_power);
    }
  }
  return h;
}

PhnTrajectories PhnTrajectories::zeros(int num_tx, int num_rx, int frame_len) {
  PhnTrajectories p;
  p.rx_phase = RMatrix::Zero(num_rx, frame_len);
  p.tx_phase = RMatrix::Zero(num_tx, frame_len);
  p.rx_innovations = RMatrix::Zero(num_rx, frame_len);
  p.tx_innovations = RMatrix::Zero(num_tx, frame_len);
  return p;
}

namespace {

void random_walk(Rng& rng, double var, RMatrix& phase, RMatrix& innov) {
  std::normal_distribution<double> n(0.0, std::sqrt(var));
  for (Eigen::Index i = 0; i < phase.rows(); ++i) {
    double theta = 0.0;
    for (Eigen::Index k = 0; k < phase.cols(); ++k) {
      const double d = var > 0.0 ? n(rng) : 0.0;
      innov(i, k) = d;
      theta += d;
      phase(i, k) = theta;
    }
  }
}

}  // namespace

PhnTrajectories generate_phn(const PhnConfig& cfg, int num_tx, int num_rx, Seed seed) {
  cfg.validate();
  if (num_tx < 1 || num_rx < 1) throw ConfigError("phn: antenna counts must be >= 1");
  auto p = PhnTrajectories::zeros(num_tx, num_rx, cfg.frame_len);
  p.innovation_var = cfg.innovation_var;
  Rng rng(seed);
  random_walk(rng, cfg.innovation_var, p.rx_phase, p.rx_innovations);
  random_walk(rng, cfg.innovation_var, p.tx_phase, p.tx_innovations);
  return p;
}

ReducedPhnTrajectory reduce_ambiguity(const PhnTrajectories& phn) {
  const int nr = phn.num_rx();
  const int nt = phn.num_tx();
  const int len = phn.frame_len();
  ReducedPhnTrajectory out;
  out.phi.resize(nr + nt - 1, len);
  const auto ref = phn.tx_phase.row(nt - 1);
  for (int f = 0; f < nr; ++f) out.phi.row(f) = phn.rx_phase.row(f) + ref;
  for (int m = 0; m + 1 < nt; ++m) out.phi.row(nr + m) = phn.tx_phase.row(m) - ref;
  out.reduced_innovation_var = 2.0 * phn.innovation_var;
  return out;
}

ReceivedFrame apply_channel(const CMatrix& symbols, const ChannelMatrix& h,
                            const PhnTrajectories& phn, const RVector& noise_var, Seed seed) {
  const Eigen::Index nr = h.rows();
  const Eigen::Index nt = h.cols();
  const Eigen::Index len = symbols.cols();
  if (symbols.rows() != nt) throw ModelError("apply_channel: symbol rows != N_t");
  if (phn.num_rx() != nr || phn.num_tx() != nt || phn.frame_len() != len)
    throw ModelError("apply_channel: phase trajectory dimensions mismatch");
  if (noise_var.size() != nr) throw ModelError("apply_channel: noise_var size != N_r");
  if ((noise_var.array() < 0.0).any()) throw ModelError("apply_channel: negative noise variance");

  ReceivedFrame rx;
  rx.noise_var = noise_var;
  rx.observations.resize(nr, len);
  Rng rng(seed);
  for (Eigen::Index k = 0; k < len; ++k) {
    const CMatrix x = full_channel<double>(h, phn.rx_phase.col(k), phn.tx_phase.col(k));
    rx.observations.col(k) = x * symbols.col(k);
    for (Eigen::Index l = 0; l < nr; ++l) {
      if (noise_var(l) > 0.0) rx.observations(l, k) += complex_normal(rng, noise_var(l));
    }
  }
  return rx;
}

ReceivedFrame apply_channel(const CMatrix& symbols, const ChannelMatrix& h,
                            const PhnTrajectories& phn, double noise_var, Seed seed) {
  return apply_channel(symbols, h, phn, RVector::Constant(h.rows(), noise_var), seed);
}

}  // namespace phn
