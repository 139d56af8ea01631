#pragma once

#include "phn/channel_model.hpp"

#include <span>

namespace phn {

/// Soft-decision-directed extended Kalman filter and fixed-interval smoother
/// over the reduced phase state phi(k) of dimension N = N_r + N_t - 1.
struct EkfsConfig {
  double innovation_var = 5e-5;  // per-oscillator increment variance
  RVector noise_var;             // complex observation noise variance per receive antenna
  int num_rx = 2;
  int num_tx = 2;
  /// Use the exact increment covariance of the reduced state (off-diagonal
  /// +-innovation_var terms) instead of 2 * innovation_var * I.
  bool exact_increment_cov = false;
  /// Variance of phi(0); negative selects 2 * innovation_var.
  double initial_var = -1.0;

  int state_dim() const { return num_rx + num_tx - 1; }
  void validate() const;

  static EkfsConfig make(double innovation_var, double noise_var, int num_tx, int num_rx) {
    EkfsConfig c;
    c.innovation_var = innovation_var;
    c.noise_var = RVector::Constant(num_rx, noise_var);
    c.num_rx = num_rx;
    c.num_tx = num_tx;
    return c;
  }
};

inline void EkfsConfig::validate() const {
  if (num_rx < 1 || num_tx < 1) throw ConfigError("ekfs: antenna counts must be >= 1");
  if (!(innovation_var >= 0.0)) throw ConfigError("ekfs: innovation_var must be >= 0");
  if (noise_var.size() != num_rx || !(noise_var.array() > 0.0).all())
    throw ConfigError("ekfs: noise variance must be positive per receive antenna");
}

template <typename Scalar>
struct EkfsTypes {
  using Vec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
  using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  using CVec = Eigen::Matrix<std::complex<Scalar>, Eigen::Dynamic, 1>;
  using CMat = Eigen::Matrix<std::complex<Scalar>, Eigen::Dynamic, Eigen::Dynamic>;
};

/// Covariance of the reduced-state increment per time step.
template <typename Scalar = double>
typename EkfsTypes<Scalar>::Mat increment_cov(const EkfsConfig& cfg) {
  using Mat = typename EkfsTypes<Scalar>::Mat;
  const int n = cfg.state_dim();
  const auto s = static_cast<Scalar>(cfg.innovation_var);
  if (!cfg.exact_increment_cov) return Mat::Identity(n, n) * (Scalar(2) * s);
  // Rows f < N_r share +Delta_ref, rows f >= N_r share -Delta_ref.
  typename EkfsTypes<Scalar>::Vec sign(n);
  for (int f = 0; f < n; ++f) sign(f) = f < cfg.num_rx ? Scalar(1) : Scalar(-1);
  return s * (Mat::Identity(n, n) + sign * sign.transpose());
}

/// z(phi) = diag(e^{j phi_rx}) H diag(e^{j phi_tx}, 1) alpha.
template <typename Scalar = double, typename DP, typename DH, typename DA>
typename EkfsTypes<Scalar>::CVec predicted_observation(const Eigen::MatrixBase<DP>& phi,
                                                       const Eigen::MatrixBase<DH>& h,
                                                       const Eigen::MatrixBase<DA>& alpha) {
  return reduced_channel<Scalar>(h, phi) * alpha.template cast<std::complex<Scalar>>();
}

/// dz/dphi at phi: [diag(j z), (j h_lm e^{j phi_l} alpha_m e^{j phi_{N_r+m}})_{m < N_t - 1}].
template <typename Scalar = double, typename DP, typename DH, typename DA>
typename EkfsTypes<Scalar>::CMat jacobian(const Eigen::MatrixBase<DP>& phi,
                                          const Eigen::MatrixBase<DH>& h,
                                          const Eigen::MatrixBase<DA>& alpha) {
  using C = std::complex<Scalar>;
  const Eigen::Index nr = h.rows();
  const Eigen::Index nt = h.cols();
  const C j(0, 1);
  const auto z = predicted_observation<Scalar>(phi, h, alpha);
  typename EkfsTypes<Scalar>::CMat jac = EkfsTypes<Scalar>::CMat::Zero(nr, nr + nt - 1);
  for (Eigen::Index l = 0; l < nr; ++l) {
    jac(l, l) = j * z(l);
    const C rx = std::polar(Scalar(1), static_cast<Scalar>(phi(l)));
    for (Eigen::Index m = 0; m + 1 < nt; ++m) {
      const C tx = std::polar(Scalar(1), static_cast<Scalar>(phi(nr + m)));
      jac(l, nr + m) = j * static_cast<C>(h(l, m)) * rx * static_cast<C>(alpha(m)) * tx;
    }
  }
  return jac;
}

template <typename Scalar = double>
struct KalmanWork {
  typename EkfsTypes<Scalar>::CVec predicted;  // z(phi^-)
  typename EkfsTypes<Scalar>::CMat jacobian;   // N_r x N
  typename EkfsTypes<Scalar>::CMat gain;       // N x N_r, filled by update()
  typename EkfsTypes<Scalar>::CMat obs_noise_cov;
};

template <typename Scalar = double, typename DP, typename DH, typename DA>
KalmanWork<Scalar> linearize(const Eigen::MatrixBase<DP>& phi_prior, const Eigen::MatrixBase<DH>& h,
                             const Eigen::MatrixBase<DA>& alpha) {
  KalmanWork<Scalar> w;
  w.predicted = predicted_observation<Scalar>(phi_prior, h, alpha);
  w.jacobian = jacobian<Scalar>(phi_prior, h, alpha);
  return w;
}

template <typename Scalar = double>
struct StateEstimate {
  typename EkfsTypes<Scalar>::Vec state;
  typename EkfsTypes<Scalar>::Mat cov;
};

template <typename Scalar = double>
StateEstimate<Scalar> initial_estimate(const EkfsConfig& cfg) {
  using T = EkfsTypes<Scalar>;
  const int n = cfg.state_dim();
  StateEstimate<Scalar> e{T::Vec::Zero(n), typename T::Mat()};
  if (cfg.initial_var >= 0.0) {
    e.cov = T::Mat::Identity(n, n) * static_cast<Scalar>(cfg.initial_var);
  } else {
    e.cov = increment_cov<Scalar>(cfg);
  }
  return e;
}

/// phi^-(k) = phi(k-1); M^-(k) = M(k-1) + steps * Q.
template <typename Scalar = double>
StateEstimate<Scalar> predict(const StateEstimate<Scalar>& prev, const EkfsConfig& cfg,
                              Scalar steps = Scalar(1)) {
  return {prev.state, prev.cov + steps * increment_cov<Scalar>(cfg)};
}

template <typename Mat>
void symmetrize(Mat& m) {
  m = (0.5 * (m + m.transpose())).eval();
}

/// Measurement update with the real-part reduction of the complex gain:
///   K = M^- Zd^H (C_w + Zd M^- Zd^H)^{-1}
///   phi^+ = phi^- + Re{K (y - z)},  M^+ = (I - Re{K Zd}) M^-.
/// `regularized` is incremented when the innovation covariance needed a
/// diagonal load to factor.
template <typename Scalar = double, typename DY>
StateEstimate<Scalar> update(const StateEstimate<Scalar>& prior, const Eigen::MatrixBase<DY>& y_k,
                             KalmanWork<Scalar>& work, const EkfsConfig& cfg,
                             int* regularized = nullptr) {
  using T = EkfsTypes<Scalar>;
  using C = std::complex<Scalar>;
  const Eigen::Index nr = work.jacobian.rows();
  const Eigen::Index n = work.jacobian.cols();
  work.obs_noise_cov = cfg.noise_var.template cast<C>().asDiagonal();
  const typename T::CMat mz = prior.cov.template cast<C>() * work.jacobian.adjoint();  // N x N_r
  typename T::CMat s = work.obs_noise_cov + work.jacobian * mz;
  s = (0.5 * (s + s.adjoint())).eval();
  Eigen::LDLT<typename T::CMat> ldlt(s);
  if (ldlt.info() != Eigen::Success || !(ldlt.vectorD().real().array() > Scalar(0)).all()) {
    s += T::CMat::Identity(nr, nr) * C(Scalar(1e-12));
    ldlt.compute(s);
    if (regularized) ++*regularized;
  }
  // K = mz S^{-1}  <=>  K^H = S^{-1} mz^H (S Hermitian).
  work.gain = ldlt.solve(typename T::CMat(mz.adjoint())).adjoint();
  const typename T::CVec innov = y_k.template cast<C>() - work.predicted;
  StateEstimate<Scalar> post;
  post.state = prior.state + (work.gain * innov).real();
  post.cov = (T::Mat::Identity(n, n) - (work.gain * work.jacobian).real()) * prior.cov;
  symmetrize(post.cov);
  return post;
}

template <typename Scalar = double>
struct BasicEkfsTrajectory {
  using Vec = typename EkfsTypes<Scalar>::Vec;
  using Mat = typename EkfsTypes<Scalar>::Mat;

  std::vector<Vec> prior_state, posterior_state, smoothed_state;
  std::vector<Mat> prior_cov, posterior_cov, smoothed_cov;
  /// Count of diagonal loads applied to singular matrices.
  int regularizations = 0;

  int frame_len() const { return static_cast<int>(posterior_state.size()); }

  /// Smoothed states as an N x L matrix.
  Mat smoothed_matrix() const {
    if (smoothed_state.empty()) return Mat();
    Mat out(smoothed_state.front().size(), static_cast<Eigen::Index>(smoothed_state.size()));
    for (std::size_t k = 0; k < smoothed_state.size(); ++k) out.col(k) = smoothed_state[k];
    return out;
  }
};

using EkfsTrajectory = BasicEkfsTrajectory<double>;

/// Backward fixed-interval recursion with gain G = M^+(k) (M^-(k+1))^{-1}:
///   phi(k) = phi^+(k) + G (phi(k+1) - phi^-(k+1))
///   M(k)   = M^+(k) + G (M(k+1) - M^-(k+1)) G^T.
template <typename Scalar>
void smooth(BasicEkfsTrajectory<Scalar>& t) {
  using Mat = typename EkfsTypes<Scalar>::Mat;
  const int len = t.frame_len();
  t.smoothed_state.assign(len, {});
  t.smoothed_cov.assign(len, {});
  if (len == 0) return;
  t.smoothed_state[len - 1] = t.posterior_state[len - 1];
  t.smoothed_cov[len - 1] = t.posterior_cov[len - 1];
  for (int k = len - 2; k >= 0; --k) {
    Mat prior_next = t.prior_cov[k + 1];
    Eigen::LDLT<Mat> ldlt(prior_next);
    if (ldlt.info() != Eigen::Success || !(ldlt.vectorD().array() > Scalar(0)).all()) {
      prior_next += Mat::Identity(prior_next.rows(), prior_next.cols()) * Scalar(1e-12);
      ldlt.compute(prior_next);
      ++t.regularizations;
    }
    const Mat gain = ldlt.solve(t.posterior_cov[k]).transpose();
    t.smoothed_state[k] =
        t.posterior_state[k] + gain * (t.smoothed_state[k + 1] - t.prior_state[k + 1]);
    Mat cov = t.posterior_cov[k] + gain * (t.smoothed_cov[k + 1] - t.prior_cov[k + 1]) * gain.transpose();
    symmetrize(cov);
    t.smoothed_cov[k] = std::move(cov);
  }
}

/// Forward filter over every column of `observations` followed by smoothing.
/// `alpha` holds the soft symbol decisions (N_t x L). `step_gaps`, if given,
/// scales the prediction covariance per step (used when filtering a
/// decimated subsequence such as the pilots).
template <typename Scalar = double>
BasicEkfsTrajectory<Scalar> run_ekfs(const CMatrix& observations, const ChannelMatrix& h,
                                     const CMatrix& alpha, const EkfsConfig& cfg,
                                     std::span<const double> step_gaps = {}) {
  cfg.validate();
  if (h.rows() != cfg.num_rx || h.cols() != cfg.num_tx) throw ModelError("ekfs: channel dimensions mismatch");
  if (observations.rows() != cfg.num_rx || alpha.rows() != cfg.num_tx ||
      alpha.cols() != observations.cols())
    throw ModelError("ekfs: observation/soft-decision dimensions mismatch");
  if (!step_gaps.empty() && step_gaps.size() != static_cast<std::size_t>(observations.cols()))
    throw ModelError("ekfs: step gap count mismatch");

  const auto len = static_cast<int>(observations.cols());
  BasicEkfsTrajectory<Scalar> t;
  t.prior_state.reserve(len);
  t.prior_cov.reserve(len);
  t.posterior_state.reserve(len);
  t.posterior_cov.reserve(len);
  StateEstimate<Scalar> est = initial_estimate<Scalar>(cfg);
  for (int k = 0; k < len; ++k) {
    const Scalar gap = step_gaps.empty() ? Scalar(1) : static_cast<Scalar>(step_gaps[k]);
    const StateEstimate<Scalar> prior = predict<Scalar>(est, cfg, gap);
    KalmanWork<Scalar> work = linearize<Scalar>(prior.state, h, alpha.col(k));
    est = update<Scalar>(prior, observations.col(k), work, cfg, &t.regularizations);
    t.prior_state.push_back(prior.state);
    t.prior_cov.push_back(prior.cov);
    t.posterior_state.push_back(est.state);
    t.posterior_cov.push_back(est.cov);
  }
  smooth(t);
  return t;
}

}  // namespace phn
