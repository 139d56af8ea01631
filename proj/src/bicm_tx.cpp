#include "phn/bicm_tx.hpp"

#include <cmath>
#include <numbers>
#include <numeric>

namespace phn {

Constellation::Constellation(std::vector<Complex> points, int bits_per_symbol)
    : points_(std::move(points)), bps_(bits_per_symbol) {
  if (bps_ < 1 || points_.size() != (std::size_t{1} << bps_))
    throw ConfigError("constellation: size must be 2^bits_per_symbol");
}

double Constellation::max_energy() const {
  double e = 0.0;
  for (const auto& p : points_) e = std::max(e, std::norm(p));
  return e;
}

int Constellation::map(std::span<const std::uint8_t> bits) const {
  int n = 0;
  for (int d = 0; d < bps_; ++d) n = (n << 1) | (bits[d] & 1);
  return n;
}

int Constellation::slice(Complex y) const {
  int best = 0;
  double best_d = std::norm(y - points_[0]);
  for (int n = 1; n < size(); ++n) {
    const double d = std::norm(y - points_[n]);
    if (d < best_d) {
      best_d = d;
      best = n;
    }
  }
  return best;
}

Constellation make_constellation(int m) {
  int bps = 0;
  while ((1 << bps) < m) ++bps;
  if (m < 4 || (1 << bps) != m || bps % 2 != 0)
    throw ConfigError("constellation: M must be a power of 4 (square QAM)");
  const int half = bps / 2;
  const int side = 1 << half;
  const double scale = 1.0 / std::sqrt(2.0 * (m - 1) / 3.0);
  std::vector<Complex> pts(m);
  for (int i = 0; i < side; ++i) {
    for (int q = 0; q < side; ++q) {
      const int gi = i ^ (i >> 1);
      const int gq = q ^ (q >> 1);
      const int label = (gi << half) | gq;
      pts[label] = Complex(2.0 * i - (side - 1), 2.0 * q - (side - 1)) * scale;
    }
  }
  return Constellation(std::move(pts), bps);
}

Constellation make_bpsk() { return Constellation({Complex(1.0, 0.0), Complex(-1.0, 0.0)}, 1); }

Interleaver::Interleaver(std::vector<std::size_t> permutation) : perm_(std::move(permutation)) {
  std::vector<char> seen(perm_.size(), 0);
  for (auto p : perm_) {
    if (p >= perm_.size() || seen[p]) throw ConfigError("interleaver: not a permutation");
    seen[p] = 1;
  }
}

Interleaver Interleaver::identity(std::size_t n) {
  std::vector<std::size_t> p(n);
  std::iota(p.begin(), p.end(), std::size_t{0});
  return Interleaver(std::move(p));
}

Interleaver Interleaver::random(std::size_t n, Seed seed) {
  std::vector<std::size_t> p(n);
  std::iota(p.begin(), p.end(), std::size_t{0});
  Rng rng(seed);
  // Explicit Fisher-Yates: std::shuffle's draw pattern is library-specific.
  for (std::size_t i = n; i > 1; --i) {
    std::uniform_int_distribution<std::size_t> pick(0, i - 1);
    std::swap(p[i - 1], p[pick(rng)]);
  }
  return Interleaver(std::move(p));
}

void Interleaver::check(std::size_t n) const {
  if (n != perm_.size()) throw FramingError("interleaver: length mismatch");
}

CMatrix pilot_book(int num_tx) {
  CMatrix p(num_tx, num_tx);
  for (int m = 0; m < num_tx; ++m) {
    for (int j = 0; j < num_tx; ++j) {
      p(m, j) = std::polar(1.0, -2.0 * std::numbers::pi * m * j / num_tx);
    }
  }
  return p;
}

int pilot_count(int frame_len, int pilot_spacing) {
  if (pilot_spacing <= 0) return 0;
  return (frame_len + pilot_spacing - 1) / pilot_spacing;
}

FrameLayout make_layout_fixed(int frame_len, int coded_len, int num_tx, int bits_per_symbol,
                              int pilot_spacing) {
  if (frame_len < 1 || num_tx < 1 || bits_per_symbol < 1 || coded_len < 0 || pilot_spacing < 0)
    throw FramingError("layout: invalid sizes");
  FrameLayout l;
  l.frame_len = frame_len;
  l.num_tx = num_tx;
  l.bits_per_symbol = bits_per_symbol;
  l.pilot_spacing = pilot_spacing;
  l.coded_len = coded_len;
  l.pilot_mask.assign(frame_len, 0);
  l.pilots = CMatrix::Zero(num_tx, frame_len);
  const CMatrix book = pilot_book(num_tx);
  for (int k = 0; k < frame_len; ++k) {
    if (pilot_spacing > 0 && k % pilot_spacing == 0) {
      l.pilot_mask[k] = 1;
      l.pilots.col(k) = book.col(static_cast<int>(l.pilot_instants.size()) % num_tx);
      l.pilot_instants.push_back(k);
    } else {
      l.data_instants.push_back(k);
    }
  }
  const long capacity = static_cast<long>(l.num_data()) * l.bits_per_instant();
  if (capacity < coded_len) throw FramingError("layout: frame too short for codeword");
  l.padding = static_cast<int>(capacity - coded_len);
  return l;
}

FrameLayout make_layout(int coded_len, int num_tx, int bits_per_symbol, int pilot_spacing) {
  if (num_tx < 1 || bits_per_symbol < 1) throw FramingError("layout: invalid sizes");
  const int per = num_tx * bits_per_symbol;
  const int data = (coded_len + per - 1) / per;
  int len = std::max(data, 1);
  while (len - pilot_count(len, pilot_spacing) < data) ++len;
  return make_layout_fixed(len, coded_len, num_tx, bits_per_symbol, pilot_spacing);
}

CMatrix map_bits(const BitVector& bits, const Constellation& cst, const FrameLayout& layout) {
  if (static_cast<int>(bits.size()) != layout.transmitted_bits())
    throw FramingError("map_bits: bit count does not fill the data slots");
  if (cst.bits_per_symbol() != layout.bits_per_symbol)
    throw FramingError("map_bits: constellation/layout mismatch");
  CMatrix s = layout.pilots;
  const int bps = cst.bits_per_symbol();
  for (int j = 0; j < layout.num_data(); ++j) {
    const int k = layout.data_instants[j];
    for (int m = 0; m < layout.num_tx; ++m) {
      const std::size_t off = (static_cast<std::size_t>(j) * layout.num_tx + m) * bps;
      s(m, k) = cst.point(cst.map(std::span(bits).subspan(off, bps)));
    }
  }
  return s;
}

TxFrame build_frame(const BitVector& info_bits, const LdpcCode& code, const Interleaver& il,
                    const Constellation& cst, const FrameLayout& layout, Seed seed) {
  if (layout.coded_len != code.block_len()) throw FramingError("build_frame: layout/code mismatch");
  if (il.size() != static_cast<std::size_t>(layout.transmitted_bits()))
    throw FramingError("build_frame: interleaver length mismatch");
  TxFrame f;
  f.layout = layout;
  f.info_bits = info_bits;
  f.coded_bits = code.encode(info_bits);
  BitVector stream = f.coded_bits;
  Rng rng(seed);
  std::bernoulli_distribution coin(0.5);
  for (int i = 0; i < layout.padding; ++i) stream.push_back(coin(rng) ? 1 : 0);
  f.transmitted_bits = il.interleave(stream);
  f.symbols = map_bits(f.transmitted_bits, cst, layout);
  const int bps = cst.bits_per_symbol();
  f.labels.resize(static_cast<std::size_t>(layout.num_data()) * layout.num_tx);
  for (std::size_t i = 0; i < f.labels.size(); ++i) {
    f.labels[i] = cst.map(std::span(f.transmitted_bits).subspan(i * bps, bps));
  }
  return f;
}

BitVector demap_hard(const CMatrix& symbols, const Constellation& cst, const FrameLayout& layout) {
  const int bps = cst.bits_per_symbol();
  BitVector bits(static_cast<std::size_t>(layout.num_data()) * layout.num_tx * bps);
  for (int j = 0; j < layout.num_data(); ++j) {
    for (int m = 0; m < layout.num_tx; ++m) {
      const int n = cst.slice(symbols(m, layout.data_instants[j]));
      const std::size_t off = (static_cast<std::size_t>(j) * layout.num_tx + m) * bps;
      for (int d = 0; d < bps; ++d) bits[off + d] = static_cast<std::uint8_t>(cst.bit(n, d));
    }
  }
  return bits;
}

}  // namespace phn
