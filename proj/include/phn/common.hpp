#pragma once

#include <Eigen/Dense>

#include <complex>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace phn {

using Real = double;
using Complex = std::complex<double>;

using RVector = Eigen::VectorXd;
using RMatrix = Eigen::MatrixXd;
using CVector = Eigen::VectorXcd;
using CMatrix = Eigen::MatrixXcd;

using BitVector = std::vector<std::uint8_t>;
using Seed = std::uint64_t;
using Rng = std::mt19937_64;

/// Probability clamp shared by every message-passing stage.
inline constexpr double kProbEps = 1e-12;

struct ConfigError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct ModelError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct FramingError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ConstructionError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// SplitMix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Derives an independent stream seed from a base seed and a path of indices.
template <typename... Ix>
constexpr Seed derive_seed(Seed base, Ix... path) {
  Seed s = mix64(base);
  ((s = mix64(s ^ mix64(static_cast<std::uint64_t>(path) + 0x632be59bd9b4e019ULL))), ...);
  return s;
}

inline Complex complex_normal(Rng& rng, double variance) {
  std::normal_distribution<double> n(0.0, std::sqrt(variance / 2.0));
  const double re = n(rng);
  const double im = n(rng);
  return {re, im};
}

inline double clamp_prob(double p) {
  return p < kProbEps ? kProbEps : (p > 1.0 - kProbEps ? 1.0 - kProbEps : p);
}

inline double db_to_linear(double db) { return std::pow(10.0, db / 10.0); }

}  // namespace phn
