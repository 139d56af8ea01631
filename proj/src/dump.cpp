#include "phn/dump.hpp"

#include <cstdio>
#include <ostream>
#include <string>

namespace phn {

namespace {

std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v + 0.0);  // no "-0"
  return buf;
}

void header_block(std::ostream& out, const char* prefix, Eigen::Index n) {
  for (Eigen::Index i = 1; i <= n; ++i) out << ',' << prefix << i;
}

void row_block(std::ostream& out, const Eigen::Ref<const RVector>& v) {
  for (Eigen::Index i = 0; i < v.size(); ++i) out << ',' << num(v(i));
}

}  // namespace

void write_em_jsonl(std::ostream& out, const std::vector<EmIterationRecord>& history) {
  for (const auto& r : history) {
    out << "{\"iteration\":" << r.iteration << ",\"q\":" << num(r.q_value)
        << ",\"syndrome_weight\":" << r.syndrome_weight << ",\"ber\":";
    if (r.ber) {
      out << num(*r.ber);
    } else {
      out << "null";
    }
    out << "}\n";
  }
}

void write_detector_csv(std::ostream& out, const std::vector<DetectorIterationRecord>& history) {
  out << "outer,inner,mi_proxy,syndrome_weight\n";
  for (const auto& r : history) {
    out << r.outer << ',' << r.inner << ',' << num(r.mi_proxy) << ',' << r.syndrome_weight << '\n';
  }
}

void write_ekfs_csv(std::ostream& out, const EkfsTrajectory& t) {
  const Eigen::Index n = t.frame_len() > 0 ? t.posterior_state.front().size() : 0;
  out << 'k';
  header_block(out, "phi_prior_", n);
  header_block(out, "phi_post_", n);
  header_block(out, "phi_smooth_", n);
  header_block(out, "m_smooth_", n);
  out << '\n';
  for (int k = 0; k < t.frame_len(); ++k) {
    out << k + 1;
    row_block(out, t.prior_state[k]);
    row_block(out, t.posterior_state[k]);
    row_block(out, t.smoothed_state[k]);
    row_block(out, t.smoothed_cov[k].diagonal());
    out << '\n';
  }
}

void write_phn_csv(std::ostream& out, const PhnTrajectories& phn) {
  const ReducedPhnTrajectory red = reduce_ambiguity(phn);
  out << 'k';
  header_block(out, "theta_rx_", phn.num_rx());
  header_block(out, "theta_tx_", phn.num_tx());
  header_block(out, "phi_", red.state_dim());
  out << '\n';
  for (int k = 0; k < phn.frame_len(); ++k) {
    out << k + 1;
    row_block(out, phn.rx_phase.col(k));
    row_block(out, phn.tx_phase.col(k));
    row_block(out, red.phi.col(k));
    out << '\n';
  }
}

void write_txframe_csv(std::ostream& out, const TxFrame& frame) {
  const auto& s = frame.symbols;
  out << "k,pilot";
  for (Eigen::Index m = 1; m <= s.rows(); ++m) out << ",re_" << m << ",im_" << m;
  out << '\n';
  for (Eigen::Index k = 0; k < s.cols(); ++k) {
    out << k + 1 << ',' << (frame.layout.is_pilot(static_cast<int>(k)) ? 1 : 0);
    for (Eigen::Index m = 0; m < s.rows(); ++m) out << ',' << num(s(m, k).real()) << ',' << num(s(m, k).imag());
    out << '\n';
  }
}

}  // namespace phn
