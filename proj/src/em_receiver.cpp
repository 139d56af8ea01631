#include "phn/em_receiver.hpp"

#include <cmath>
#include <limits>
#include <numbers>

namespace phn {

void EmConfig::validate() const {
  if (em_iters < 1) throw ConfigError("em: em_iters must be >= 1");
  if (!(innovation_var >= 0.0)) throw ConfigError("em: innovation_var must be >= 0");
  detector.validate();
}

EkfsConfig EmConfig::ekfs_for(const ReceivedFrame& y, int num_tx) const {
  EkfsConfig c;
  c.innovation_var = innovation_var;
  c.noise_var = y.noise_var;
  c.num_rx = static_cast<int>(y.observations.rows());
  c.num_tx = num_tx;
  c.exact_increment_cov = exact_increment_cov;
  return c;
}

void MapOracleConfig::validate() const {
  if (!(grid_step > 0.0)) throw ConfigError("map oracle: grid_step must be > 0");
  if (ap_cycles < 1) throw ConfigError("map oracle: ap_cycles must be >= 1");
}

RMatrix interpolate_pilot_phases(const RMatrix& est, const FrameLayout& layout) {
  const auto& pk = layout.pilot_instants;
  if (est.cols() != static_cast<Eigen::Index>(pk.size()))
    throw ModelError("interpolate: one estimate column per pilot required");
  RMatrix out = RMatrix::Zero(est.rows(), layout.frame_len);
  if (pk.empty()) return out;
  std::size_t p = 0;
  for (int k = 0; k < layout.frame_len; ++k) {
    while (p + 1 < pk.size() && pk[p + 1] <= k) ++p;
    if (k <= pk.front()) {
      out.col(k) = est.col(0);
    } else if (p + 1 >= pk.size()) {
      out.col(k) = est.col(static_cast<Eigen::Index>(pk.size()) - 1);
    } else {
      const double t = static_cast<double>(k - pk[p]) / (pk[p + 1] - pk[p]);
      out.col(k) = (1.0 - t) * est.col(p) + t * est.col(p + 1);
    }
  }
  return out;
}

ReducedPhnTrajectory init_pilot_phn(const ReceivedFrame& y, const ChannelMatrix& h,
                                    const FrameLayout& layout, const EmConfig& cfg, bool* held) {
  const int nt = static_cast<int>(h.cols());
  const int nr = static_cast<int>(h.rows());
  const auto& pk = layout.pilot_instants;
  const auto np = static_cast<Eigen::Index>(pk.size());
  if (held) *held = np < 2;

  ReducedPhnTrajectory out;
  out.reduced_innovation_var = 2.0 * cfg.innovation_var;
  if (np == 0) {
    out.phi = RMatrix::Zero(nr + nt - 1, layout.frame_len);
    return out;
  }
  CMatrix obs(nr, np), alpha(nt, np);
  std::vector<double> gaps(pk.size());
  for (Eigen::Index i = 0; i < np; ++i) {
    obs.col(i) = y.observations.col(pk[i]);
    alpha.col(i) = layout.pilots.col(pk[i]);
    gaps[i] = i == 0 ? pk[0] + 1.0 : static_cast<double>(pk[i] - pk[i - 1]);
  }
  const EkfsTrajectory track = run_ekfs(obs, h, alpha, cfg.ekfs_for(y, nt), gaps);
  out.phi = interpolate_pilot_phases(track.smoothed_matrix(), layout);
  return out;
}

double instant_objective(const RVector& phi_k, const CVector& y_k, const RVector& noise_var,
                         const ChannelMatrix& h, const CVector& alpha_k, const CMatrix& b_k) {
  const CMatrix x = reduced_channel(h, phi_k);
  const CVector xa = x * alpha_k;
  const RVector quad = (x * b_k * x.adjoint()).diagonal().real();
  double acc = 0.0;
  for (Eigen::Index l = 0; l < y_k.size(); ++l) {
    acc += (2.0 * std::real(std::conj(y_k(l)) * xa(l)) - quad(l)) / (2.0 * noise_var(l));
  }
  return acc;
}

namespace {

double log_prior(const RMatrix& phi, int num_rx, double innovation_var, bool exact) {
  if (std::isinf(innovation_var)) return 0.0;
  if (!(innovation_var > 0.0)) throw ConfigError("objective: innovation_var must be > 0");
  const auto n = phi.rows();
  if (!exact) {
    const double v = 2.0 * innovation_var;
    double acc = -phi.col(0).squaredNorm() / (2.0 * 2.0 * v);
    for (Eigen::Index k = 1; k < phi.cols(); ++k) acc -= (phi.col(k) - phi.col(k - 1)).squaredNorm() / (2.0 * v);
    return acc;
  }
  RVector sign(n);
  for (Eigen::Index f = 0; f < n; ++f) sign(f) = f < num_rx ? 1.0 : -1.0;
  const RMatrix q = innovation_var * (RMatrix::Identity(n, n) + sign * sign.transpose());
  const Eigen::LLT<RMatrix> llt(q);
  double acc = -0.5 * phi.col(0).dot(llt.solve(phi.col(0))) / 2.0;
  for (Eigen::Index k = 1; k < phi.cols(); ++k) {
    const RVector d = phi.col(k) - phi.col(k - 1);
    acc -= 0.5 * d.dot(llt.solve(d));
  }
  return acc;
}

void check_dims(const RMatrix& phi, const ReceivedFrame& y, const ChannelMatrix& h,
                const SoftSymbolStats& soft) {
  const auto len = y.observations.cols();
  if (phi.rows() != h.rows() + h.cols() - 1 || phi.cols() != len || soft.alpha.cols() != len ||
      static_cast<Eigen::Index>(soft.b.size()) != len || y.observations.rows() != h.rows())
    throw ModelError("objective: dimensions mismatch");
}

}  // namespace

double evaluate_q(const RMatrix& phi, const ReceivedFrame& y, const ChannelMatrix& h,
                  const SoftSymbolStats& soft, double innovation_var, bool exact_increment_cov) {
  check_dims(phi, y, h, soft);
  double acc = 0.0;
  for (Eigen::Index k = 0; k < phi.cols(); ++k) {
    acc += instant_objective(phi.col(k), y.observations.col(k), y.noise_var, h, soft.alpha.col(k),
                             soft.b[k]);
  }
  return acc + log_prior(phi, static_cast<int>(h.rows()), innovation_var, exact_increment_cov);
}

double expected_loglik_full(const RMatrix& theta_rx, const RMatrix& theta_tx,
                            const ReceivedFrame& y, const ChannelMatrix& h,
                            const SoftSymbolStats& soft) {
  const auto len = y.observations.cols();
  if (theta_rx.rows() != h.rows() || theta_tx.rows() != h.cols() || theta_rx.cols() != len ||
      theta_tx.cols() != len)
    throw ModelError("objective: dimensions mismatch");
  double acc = 0.0;
  for (Eigen::Index k = 0; k < len; ++k) {
    const CMatrix x = full_channel<double>(h, theta_rx.col(k), theta_tx.col(k));
    const CVector xa = x * soft.alpha.col(k);
    const RVector quad = (x * soft.b[k] * x.adjoint()).diagonal().real();
    for (Eigen::Index l = 0; l < h.rows(); ++l) {
      acc += (2.0 * std::real(std::conj(y.observations(l, k)) * xa(l)) - quad(l)) / (2.0 * y.noise_var(l));
    }
  }
  return acc;
}

SoftSymbolStats known_symbol_stats(const CMatrix& symbols) {
  SoftSymbolStats s;
  s.alpha = symbols;
  s.b.reserve(symbols.cols());
  for (Eigen::Index k = 0; k < symbols.cols(); ++k) s.b.push_back(symbols.col(k) * symbols.col(k).adjoint());
  return s;
}

RMatrix map_oracle(const ReceivedFrame& y, const ChannelMatrix& h, const SoftSymbolStats& soft,
                   const MapOracleConfig& cfg, double innovation_var) {
  cfg.validate();
  const auto n = h.rows() + h.cols() - 1;
  const auto len = y.observations.cols();
  RMatrix phi = RMatrix::Zero(n, len);
  check_dims(phi, y, h, soft);
  if (!(innovation_var > 0.0)) throw ConfigError("map oracle: innovation_var must be > 0");

  const auto grid_size = static_cast<int>(std::ceil(2.0 * std::numbers::pi / cfg.grid_step));
  const double v = 2.0 * innovation_var;
  auto local = [&](Eigen::Index f, Eigen::Index k, const RVector& col) {
    double acc = instant_objective(col, y.observations.col(k), y.noise_var, h, soft.alpha.col(k), soft.b[k]);
    const double prev = k == 0 ? 0.0 : phi(f, k - 1);
    const double prev_var = k == 0 ? 2.0 * v : v;
    acc -= (col(f) - prev) * (col(f) - prev) / (2.0 * prev_var);
    if (k + 1 < len) acc -= (phi(f, k + 1) - col(f)) * (phi(f, k + 1) - col(f)) / (2.0 * v);
    return acc;
  };

  for (int cycle = 0; cycle < cfg.ap_cycles; ++cycle) {
    bool changed = false;
    for (Eigen::Index f = 0; f < n; ++f) {
      for (Eigen::Index k = 0; k < len; ++k) {
        RVector col = phi.col(k);
        double best = local(f, k, col);
        double best_val = col(f);
        for (int g = 0; g < grid_size; ++g) {
          col(f) = -std::numbers::pi + g * cfg.grid_step;
          const double obj = local(f, k, col);
          if (obj > best) {
            best = obj;
            best_val = col(f);
          }
        }
        if (best_val != phi(f, k)) {
          phi(f, k) = best_val;
          changed = true;
        }
      }
    }
    if (!changed) break;
  }
  return phi;
}

std::size_t count_bit_errors(const BitVector& a, const BitVector& b) {
  if (a.size() != b.size()) throw FramingError("bit error count: length mismatch");
  std::size_t e = 0;
  for (std::size_t i = 0; i < a.size(); ++i) e += (a[i] != b[i]);
  return e;
}

EmResult run_em(const ReceivedFrame& y, const ChannelMatrix& h, const FrameLayout& layout,
                const LdpcCode& code, const Interleaver& il, const Constellation& cst,
                const EmConfig& cfg, const BitVector* truth) {
  cfg.validate();
  const int nt = static_cast<int>(h.cols());
  const EkfsConfig ekfs_cfg = cfg.ekfs_for(y, nt);
  EmResult res;
  res.phi_hat = init_pilot_phn(y, h, layout, cfg);
  std::optional<BitBeliefs> warm;
  for (int i = 1; i <= cfg.em_iters; ++i) {
    DetectorResult det = run_detector(y, h, res.phi_hat.phi, code, il, cst, layout, cfg.detector,
                                      warm ? &*warm : nullptr);
    warm = std::move(det.decoder_priors);
    res.last_track = run_ekfs(y.observations, h, det.soft.alpha, ekfs_cfg);
    res.phi_hat.phi = res.last_track.smoothed_matrix();

    EmIterationRecord rec;
    rec.iteration = i;
    rec.q_value = evaluate_q(res.phi_hat.phi, y, h, det.soft, cfg.innovation_var, cfg.exact_increment_cov);
    rec.syndrome_weight = det.syndrome_weight;
    rec.hard_bits = det.hard_bits;
    rec.detector_history = std::move(det.history);
    if (truth) {
      rec.ber = truth->empty() ? 0.0
                               : static_cast<double>(count_bit_errors(det.hard_bits, *truth)) /
                                     static_cast<double>(truth->size());
    }
    res.history.push_back(std::move(rec));
    res.hard_bits = std::move(det.hard_bits);
    res.soft = std::move(det.soft);
  }
  return res;
}

DetectorResult disjoint_receiver(const ReceivedFrame& y, const ChannelMatrix& h,
                                 const FrameLayout& layout, const LdpcCode& code,
                                 const Interleaver& il, const Constellation& cst,
                                 const EmConfig& cfg) {
  cfg.validate();
  const ReducedPhnTrajectory phi = init_pilot_phn(y, h, layout, cfg);
  return run_detector(y, h, phi.phi, code, il, cst, layout, cfg.detector);
}

std::vector<BitVector> fixed_phase_receiver(const ReceivedFrame& y, const ChannelMatrix& h,
                                            const RMatrix& phi_hat, const FrameLayout& layout,
                                            const LdpcCode& code, const Interleaver& il,
                                            const Constellation& cst, const DetectorConfig& cfg,
                                            int passes) {
  if (passes < 1) throw ConfigError("fixed-phase receiver: passes must be >= 1");
  std::vector<BitVector> out;
  std::optional<BitBeliefs> warm;
  for (int i = 0; i < passes; ++i) {
    DetectorResult det = run_detector(y, h, phi_hat, code, il, cst, layout, cfg, warm ? &*warm : nullptr);
    warm = std::move(det.decoder_priors);
    out.push_back(std::move(det.hard_bits));
  }
  return out;
}

}  // namespace phn
