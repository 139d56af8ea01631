#pragma once

#include "phn/common.hpp"

#include <iosfwd>

namespace phn {

/// Binary LDPC code held as a sparse parity-check matrix plus a systematic
/// encoder derived by Gaussian elimination over GF(2).
class LdpcCode {
 public:
  /// Builds a code from explicit check rows (variable indices per check).
  static LdpcCode from_checks(int block_len, std::vector<std::vector<int>> checks);

  int block_len() const { return block_len_; }
  int num_checks() const { return static_cast<int>(checks_.size()); }
  int info_len() const { return block_len_ - rank_; }
  int rank() const { return rank_; }
  double rate() const { return static_cast<double>(info_len()) / block_len_; }
  /// (n - m) / n, before any rank correction.
  double nominal_rate() const { return static_cast<double>(block_len_ - num_checks()) / block_len_; }

  /// Column degree if every column has the same weight, else 0.
  int var_degree() const { return var_deg_; }
  /// Row degree if every row has the same weight, else 0.
  int check_degree() const { return check_deg_; }
  /// Number of length-4 cycles left by construction (0 means girth >= 6).
  long four_cycles() const { return four_cycles_; }

  const std::vector<std::vector<int>>& checks() const { return checks_; }
  const std::vector<std::vector<int>>& var_checks() const { return var_checks_; }
  /// Codeword positions that carry information bits, in info-bit order.
  const std::vector<int>& info_positions() const { return info_pos_; }

  BitVector encode(const BitVector& info_bits) const;
  BitVector extract_info(const BitVector& codeword) const;
  std::vector<int> syndrome(const BitVector& word) const;
  std::size_t syndrome_weight(const BitVector& word) const;

 private:
  void derive_encoder();
  void count_four_cycles();

  int block_len_ = 0;
  int var_deg_ = 0;
  int check_deg_ = 0;
  int rank_ = 0;
  long four_cycles_ = 0;
  std::vector<std::vector<int>> checks_;
  std::vector<std::vector<int>> var_checks_;
  std::vector<int> info_pos_;
  std::vector<int> parity_pos_;  // pivot column of each reduced row
  // Row r of the reduced system: parity_pos_[r] = XOR of info bits flagged here.
  std::vector<std::vector<std::uint64_t>> parity_rows_;
};

/// Seeded progressive-edge-growth style construction of a (var_deg, check_deg)
/// regular code. Edges avoid length-4 cycles whenever a candidate exists.
LdpcCode construct_regular(int block_len, int var_deg, int check_deg, Seed seed);

enum class BeliefRole { ChannelPrior, APosteriori, Extrinsic };

struct BitBeliefs {
  std::vector<double> prob_one;
  BeliefRole role = BeliefRole::ChannelPrior;

  static BitBeliefs uniform(std::size_t n, BeliefRole role = BeliefRole::ChannelPrior) {
    return {std::vector<double>(n, 0.5), role};
  }
  std::size_t size() const { return prob_one.size(); }
};

struct DecodeResult {
  BitBeliefs posterior;
  /// Decoder output excluding the channel prior; fed back as a-priori input.
  BitBeliefs extrinsic;
  bool syndrome_ok = false;
  std::size_t syndrome_weight = 0;
  int iterations_run = 0;
};

/// Flooding sum-product decoding. Messages are kept as log-likelihood ratios
/// internally; inputs and outputs are bit probabilities.
DecodeResult decode_spa(const LdpcCode& code, const BitBeliefs& priors, int iterations,
                        bool early_exit = true);

/// MacKay alist interchange format.
LdpcCode read_alist(std::istream& in);
void write_alist(const LdpcCode& code, std::ostream& out);

}  // namespace phn
