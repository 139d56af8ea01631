#include "phn/detector.hpp"

#include <cmath>

namespace phn {

CandidateSet::CandidateSet(const Constellation& cst, int num_tx)
    : num_tx_(num_tx), order_(cst.size()) {
  if (num_tx < 1) throw ConfigError("candidates: num_tx must be >= 1");
  long count = 1;
  for (int m = 0; m < num_tx; ++m) count *= order_;
  digits_.resize(count, num_tx);
  vectors_.resize(num_tx, count);
  for (long c = 0; c < count; ++c) {
    long rest = c;
    for (int m = num_tx - 1; m >= 0; --m) {
      const int n = static_cast<int>(rest % order_);
      rest /= order_;
      digits_(c, m) = n;
      vectors_(m, c) = cst.point(n);
    }
  }
}

void DetectorConfig::validate() const {
  if (outer_iters < 1 || inner_iters < 1 || decoder_iters < 1)
    throw ConfigError("detector: iteration counts must be >= 1");
}

namespace {

template <typename Col>
bool normalize(Col&& col, DetectorDiagnostics* diag) {
  const double s = col.sum();
  if (!(s > 0.0) || !std::isfinite(s)) {
    col.setConstant(1.0 / static_cast<double>(col.size()));
    if (diag) ++diag->clamp_events;
    return false;
  }
  col /= s;
  return true;
}

}  // namespace

SymbolVectorLikelihoods channel_likelihoods(const ReceivedFrame& y, const ChannelMatrix& h,
                                            const RMatrix& phi_hat, const Constellation& cst,
                                            const FrameLayout& layout) {
  const int nr = static_cast<int>(h.rows());
  const int nt = static_cast<int>(h.cols());
  if (nt != layout.num_tx) throw ModelError("likelihoods: N_t mismatch");
  if (y.observations.rows() != nr || y.observations.cols() != layout.frame_len)
    throw ModelError("likelihoods: observation dimensions mismatch");
  if (phi_hat.rows() != nr + nt - 1 || phi_hat.cols() != layout.frame_len)
    throw ModelError("likelihoods: phase estimate dimensions mismatch");
  if (y.noise_var.size() != nr || (y.noise_var.array() <= 0.0).any())
    throw ModelError("likelihoods: noise variance must be positive");

  const CandidateSet cands(cst, nt);
  const RVector inv2var = (2.0 * y.noise_var).cwiseInverse();
  SymbolVectorLikelihoods out;
  out.num_tx = nt;
  out.order = cst.size();
  out.values.resize(cands.size(), layout.num_data());
  for (int j = 0; j < layout.num_data(); ++j) {
    const int k = layout.data_instants[j];
    const CMatrix x = reduced_channel(h, RVector(phi_hat.col(k)));
    const CMatrix err = (x * cands.vectors()).colwise() - y.observations.col(k);
    RVector loglik = -(inv2var.asDiagonal() * err.cwiseAbs2()).colwise().sum().transpose();
    loglik.array() -= loglik.maxCoeff();
    auto col = out.values.col(j);
    col = loglik.array().exp().matrix();
    col /= col.sum();
  }
  return out;
}

RMatrix equalizer_extrinsic(const SymbolVectorLikelihoods& lik, const RMatrix& symbol_priors,
                            DetectorDiagnostics* diag) {
  const int nt = lik.num_tx;
  const int order = lik.order;
  const int num_data = static_cast<int>(lik.values.cols());
  const int num_cand = static_cast<int>(lik.values.rows());
  if (symbol_priors.rows() != order || symbol_priors.cols() != static_cast<long>(num_data) * nt)
    throw ModelError("equalizer: prior dimensions mismatch");

  RMatrix ext = RMatrix::Zero(order, symbol_priors.cols());
  std::vector<int> digit(nt);
  std::vector<double> pre(nt + 1), suf(nt + 1);
  for (int j = 0; j < num_data; ++j) {
    for (int c = 0; c < num_cand; ++c) {
      const double l = lik.values(c, j);
      if (l == 0.0) continue;
      long rest = c;
      for (int m = nt - 1; m >= 0; --m) {
        digit[m] = static_cast<int>(rest % order);
        rest /= order;
      }
      pre[0] = 1.0;
      for (int m = 0; m < nt; ++m) pre[m + 1] = pre[m] * symbol_priors(digit[m], j * nt + m);
      suf[nt] = 1.0;
      for (int m = nt - 1; m >= 0; --m) suf[m] = suf[m + 1] * symbol_priors(digit[m], j * nt + m);
      for (int m = 0; m < nt; ++m) ext(digit[m], j * nt + m) += l * pre[m] * suf[m + 1];
    }
    for (int m = 0; m < nt; ++m) normalize(ext.col(j * nt + m), diag);
  }
  return ext;
}

RMatrix demapper_extrinsic(const RMatrix& symbol_extrinsic, const RMatrix& bit_priors,
                           const Constellation& cst, DetectorDiagnostics* diag) {
  const int order = cst.size();
  const int bps = cst.bits_per_symbol();
  if (symbol_extrinsic.rows() != order || bit_priors.rows() != bps ||
      bit_priors.cols() != symbol_extrinsic.cols())
    throw ModelError("demapper: dimensions mismatch");

  RMatrix out(bps, symbol_extrinsic.cols());
  std::vector<double> pa(bps);
  for (Eigen::Index col = 0; col < symbol_extrinsic.cols(); ++col) {
    for (int d = 0; d < bps; ++d) pa[d] = clamp_prob(bit_priors(d, col));
    for (int d = 0; d < bps; ++d) {
      double mass[2] = {0.0, 0.0};
      for (int n = 0; n < order; ++n) {
        double w = symbol_extrinsic(n, col);
        for (int d2 = 0; d2 < bps; ++d2) {
          if (d2 != d) w *= cst.bit(n, d2) ? pa[d2] : 1.0 - pa[d2];
        }
        mass[cst.bit(n, d)] += w;
      }
      const double s = mass[0] + mass[1];
      if (!(s > 0.0) || !std::isfinite(s)) {
        out(d, col) = 0.5;
        if (diag) ++diag->clamp_events;
      } else {
        out(d, col) = clamp_prob(mass[1] / s);
      }
    }
  }
  return out;
}

RMatrix symbol_priors_from_bits(const RMatrix& bit_priors, const Constellation& cst) {
  const int order = cst.size();
  const int bps = cst.bits_per_symbol();
  if (bit_priors.rows() != bps) throw ModelError("symbol mapper: dimensions mismatch");
  RMatrix out(order, bit_priors.cols());
  for (Eigen::Index col = 0; col < bit_priors.cols(); ++col) {
    for (int n = 0; n < order; ++n) {
      double p = 1.0;
      for (int d = 0; d < bps; ++d) {
        const double p1 = clamp_prob(bit_priors(d, col));
        p *= cst.bit(n, d) ? p1 : 1.0 - p1;
      }
      out(n, col) = p;
    }
    out.col(col) /= out.col(col).sum();
  }
  return out;
}

PosteriorMapperResult posterior_mapper(const SymbolVectorLikelihoods& lik, const RMatrix& bit_priors,
                                       const Constellation& cst, const FrameLayout& layout) {
  const int nt = lik.num_tx;
  const int num_data = static_cast<int>(lik.values.cols());
  if (num_data != layout.num_data() || nt != layout.num_tx)
    throw ModelError("posterior mapper: layout mismatch");
  const RMatrix sym_prior = symbol_priors_from_bits(bit_priors, cst);
  const CandidateSet cands(cst, nt);

  PosteriorMapperResult out;
  out.vector_posterior.resize(cands.size(), num_data);
  out.soft.alpha = CMatrix::Zero(nt, layout.frame_len);
  out.soft.b.assign(layout.frame_len, CMatrix::Zero(nt, nt));
  for (int k : layout.pilot_instants) {
    out.soft.alpha.col(k) = layout.pilots.col(k);
    out.soft.b[k] = layout.pilots.col(k) * layout.pilots.col(k).adjoint();
  }
  for (int j = 0; j < num_data; ++j) {
    auto post = out.vector_posterior.col(j);
    for (int c = 0; c < cands.size(); ++c) {
      double p = lik.values(c, j);
      for (int m = 0; m < nt; ++m) p *= sym_prior(cands.digit(c, m), j * nt + m);
      post(c) = p;
    }
    normalize(post, nullptr);
    const int k = layout.data_instants[j];
    const CVector pc = post.cast<Complex>();
    out.soft.alpha.col(k) = cands.vectors() * pc;
    CMatrix b = cands.vectors() * pc.asDiagonal() * cands.vectors().adjoint();
    out.soft.b[k] = 0.5 * (b + b.adjoint());
  }
  return out;
}

RMatrix bits_to_matrix(const std::vector<double>& flat, const Constellation& cst, int num_tx) {
  const int bps = cst.bits_per_symbol();
  if (flat.size() % (static_cast<std::size_t>(bps) * num_tx) != 0)
    throw FramingError("bit vector does not align with symbol slots");
  return Eigen::Map<const RMatrix>(flat.data(), bps, static_cast<Eigen::Index>(flat.size() / bps));
}

std::vector<double> matrix_to_bits(const RMatrix& m) {
  return std::vector<double>(m.data(), m.data() + m.size());
}

namespace {

double mi_proxy(const std::vector<double>& post) {
  double acc = 0.0;
  for (double p : post) {
    const double q = clamp_prob(p);
    acc += 1.0 + q * std::log2(q) + (1.0 - q) * std::log2(1.0 - q);
  }
  return post.empty() ? 0.0 : acc / static_cast<double>(post.size());
}

}  // namespace

DetectorResult run_detector(const ReceivedFrame& y, const ChannelMatrix& h, const RMatrix& phi_hat,
                            const LdpcCode& code, const Interleaver& il, const Constellation& cst,
                            const FrameLayout& layout, const DetectorConfig& cfg,
                            const BitBeliefs* warm_priors) {
  cfg.validate();
  const int nt = layout.num_tx;
  const auto total_bits = static_cast<std::size_t>(layout.transmitted_bits());
  if (layout.coded_len != code.block_len()) throw FramingError("detector: layout/code mismatch");
  if (il.size() != total_bits) throw FramingError("detector: interleaver length mismatch");

  DetectorResult res;
  const SymbolVectorLikelihoods lik = channel_likelihoods(y, h, phi_hat, cst, layout);

  std::vector<double> prior_flat =
      warm_priors ? warm_priors->prob_one : std::vector<double>(total_bits, 0.5);
  if (prior_flat.size() != total_bits) throw FramingError("detector: warm prior length mismatch");
  RMatrix bit_prior = bits_to_matrix(prior_flat, cst, nt);
  RMatrix sym_prior = symbol_priors_from_bits(bit_prior, cst);

  DecodeResult dec;
  for (int outer = 0; outer < cfg.outer_iters; ++outer) {
    const RMatrix sym_ext = equalizer_extrinsic(lik, sym_prior, &res.diagnostics);
    for (int inner = 0; inner < cfg.inner_iters; ++inner) {
      const RMatrix bit_ext = demapper_extrinsic(sym_ext, bit_prior, cst, &res.diagnostics);
      std::vector<double> stream = il.deinterleave(matrix_to_bits(bit_ext));
      BitBeliefs channel{std::vector<double>(stream.begin(), stream.begin() + code.block_len()),
                         BeliefRole::ChannelPrior};
      dec = decode_spa(code, channel, cfg.decoder_iters, cfg.early_exit);
      std::vector<double> fed(total_bits, 0.5);
      std::copy(dec.extrinsic.prob_one.begin(), dec.extrinsic.prob_one.end(), fed.begin());
      bit_prior = bits_to_matrix(il.interleave(fed), cst, nt);
      res.history.push_back({outer + 1, inner + 1, mi_proxy(dec.posterior.prob_one), dec.syndrome_weight});
    }
    sym_prior = symbol_priors_from_bits(bit_prior, cst);
  }

  auto mapped = posterior_mapper(lik, bit_prior, cst, layout);
  res.soft = std::move(mapped.soft);
  res.vector_posterior = std::move(mapped.vector_posterior);
  res.bit_posteriors = std::move(dec.posterior);
  res.decoder_priors = BitBeliefs{matrix_to_bits(bit_prior), BeliefRole::Extrinsic};
  res.syndrome_weight = dec.syndrome_weight;

  BitVector hard_cw(code.block_len());
  for (int v = 0; v < code.block_len(); ++v) hard_cw[v] = res.bit_posteriors.prob_one[v] > 0.5 ? 1 : 0;
  res.hard_bits = code.extract_info(hard_cw);
  return res;
}

}  // namespace phn
