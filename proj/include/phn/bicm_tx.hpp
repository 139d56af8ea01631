#pragma once

#include "phn/common.hpp"
#include "phn/ldpc.hpp"

#include <algorithm>
#include <span>

namespace phn {

/// Unit-energy constellation. Point n carries the label n, most significant
/// bit first, so bit d of point n is (n >> (bits_per_symbol - 1 - d)) & 1.
class Constellation {
 public:
  Constellation(std::vector<Complex> points, int bits_per_symbol);

  int size() const { return static_cast<int>(points_.size()); }
  int bits_per_symbol() const { return bps_; }
  const std::vector<Complex>& points() const { return points_; }
  Complex point(int n) const { return points_[n]; }
  int bit(int n, int d) const { return (n >> (bps_ - 1 - d)) & 1; }
  double max_energy() const;

  int map(std::span<const std::uint8_t> bits) const;
  /// Nearest point (ties broken toward the lower index).
  int slice(Complex y) const;

 private:
  std::vector<Complex> points_;
  int bps_;
};

/// Square M-QAM with per-axis reflected Gray labeling. M must be a power of 4.
Constellation make_constellation(int m);

/// Antipodal two-point constellation, used by small test systems.
Constellation make_bpsk();

class Interleaver {
 public:
  Interleaver() = default;
  explicit Interleaver(std::vector<std::size_t> permutation);

  static Interleaver identity(std::size_t n);
  static Interleaver random(std::size_t n, Seed seed);

  std::size_t size() const { return perm_.size(); }
  const std::vector<std::size_t>& permutation() const { return perm_; }

  /// out[i] = in[perm[i]].
  template <typename T>
  std::vector<T> interleave(const std::vector<T>& in) const {
    check(in.size());
    std::vector<T> out(in.size());
    for (std::size_t i = 0; i < perm_.size(); ++i) out[i] = in[perm_[i]];
    return out;
  }

  template <typename T>
  std::vector<T> deinterleave(const std::vector<T>& in) const {
    check(in.size());
    std::vector<T> out(in.size());
    for (std::size_t i = 0; i < perm_.size(); ++i) out[perm_[i]] = in[i];
    return out;
  }

 private:
  void check(std::size_t n) const;
  std::vector<std::size_t> perm_;
};

/// Known pilot vectors: unit-modulus columns of the N_t-point DFT matrix.
CMatrix pilot_book(int num_tx);

/// Time-slot accounting for one frame. Instants k with k % pilot_spacing == 0
/// (0-based) carry pilots; pilot_spacing == 0 means no pilots.
struct FrameLayout {
  int frame_len = 0;
  int num_tx = 0;
  int bits_per_symbol = 0;
  int pilot_spacing = 0;
  int coded_len = 0;   // codeword bits
  int padding = 0;     // filler bits appended after the codeword
  std::vector<char> pilot_mask;
  std::vector<int> data_instants;
  std::vector<int> pilot_instants;
  CMatrix pilots;  // N_t x L_f, zero at data instants

  int num_data() const { return static_cast<int>(data_instants.size()); }
  int bits_per_instant() const { return num_tx * bits_per_symbol; }
  int transmitted_bits() const { return coded_len + padding; }
  bool is_pilot(int k) const { return pilot_mask[k] != 0; }
};

int pilot_count(int frame_len, int pilot_spacing);

/// Smallest frame holding coded_len bits at the given pilot spacing.
FrameLayout make_layout(int coded_len, int num_tx, int bits_per_symbol, int pilot_spacing);

/// Layout for an explicit frame length; throws FramingError when the data
/// slots cannot hold the codeword.
FrameLayout make_layout_fixed(int frame_len, int coded_len, int num_tx, int bits_per_symbol,
                              int pilot_spacing);

struct TxFrame {
  FrameLayout layout;
  BitVector info_bits;
  BitVector coded_bits;        // codeword, code order
  BitVector transmitted_bits;  // codeword plus padding, interleaved order
  CMatrix symbols;             // N_t x L_f
  std::vector<int> labels;     // constellation index per (data slot, antenna)
};

/// Encode, pad, interleave, Gray-map and multiplex one codeword; insert pilots.
TxFrame build_frame(const BitVector& info_bits, const LdpcCode& code, const Interleaver& il,
                    const Constellation& cst, const FrameLayout& layout, Seed seed);

/// Map already-interleaved bits onto the data slots of a layout.
CMatrix map_bits(const BitVector& interleaved_bits, const Constellation& cst,
                 const FrameLayout& layout);

/// Per-antenna nearest-point slicing of the data instants, returning bits in
/// transmitted (interleaved) order.
BitVector demap_hard(const CMatrix& symbols, const Constellation& cst, const FrameLayout& layout);

}  // namespace phn
