#include "phn/ldpc.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <istream>
#include <limits>
#include <map>
#include <numeric>
#include <ostream>
#include <sstream>
#include <string>

namespace phn {

namespace {

using Words = std::vector<std::uint64_t>;

inline bool get_bit(const Words& w, int i) { return (w[i >> 6] >> (i & 63)) & 1ULL; }
inline void flip_bit(Words& w, int i) { w[i >> 6] ^= 1ULL << (i & 63); }
inline void set_bit(Words& w, int i) { w[i >> 6] |= 1ULL << (i & 63); }

/// 4-cycles through variable v: sum over other variables u of C(shared, 2),
/// where shared counts checks holding both.
long cycles_at(int v, const std::vector<std::vector<int>>& checks, const std::vector<std::vector<int>>& vchecks,
               std::vector<int>& count) {
  long total = 0;
  for (int c : vchecks[v])
    for (int u : checks[c])
      if (u != v) total += count[u]++;
  for (int c : vchecks[v])
    for (int u : checks[c]) count[u] = 0;
  return total;
}

void move_edge(std::vector<std::vector<int>>& checks, std::vector<std::vector<int>>& vchecks, int v, int from,
               int to) {
  std::replace(vchecks[v].begin(), vchecks[v].end(), from, to);
  checks[from].erase(std::find(checks[from].begin(), checks[from].end(), v));
  checks[to].push_back(v);
}

/// Degree-preserving edge swaps (v,c),(u,d) -> (v,d),(u,c). For a variable
/// v on a 4-cycle, d is drawn from the checks that would close no cycle at
/// v, and the partner u in d that least increases the count is taken; the
/// swap is kept unless the count at v and u grows. Returns the remaining count.
long repair_four_cycles(std::vector<std::vector<int>>& checks, std::vector<std::vector<int>>& vchecks, Rng& rng) {
  const int n = static_cast<int>(vchecks.size());
  const int m = static_cast<int>(checks.size());
  std::vector<int> count(n, 0), mark(m, 0);
  auto total = [&] {
    long t = 0;
    for (int v = 0; v < n; ++v) t += cycles_at(v, checks, vchecks, count);
    return t / 2;
  };
  long remaining = total();
  std::vector<int> free_checks;
  std::uniform_int_distribution<int> pick_var(0, n - 1);
  const long budget = 2000L * n;
  for (long trial = 0; trial < budget && remaining > 0; ++trial) {
    const int v = pick_var(rng);
    if (cycles_at(v, checks, vchecks, count) == 0) continue;
    const int c = vchecks[v][std::uniform_int_distribution<std::size_t>(0, vchecks[v].size() - 1)(rng)];

    std::fill(mark.begin(), mark.end(), 0);
    for (int c1 : vchecks[v]) {
      mark[c1] = 1;
      if (c1 == c) continue;
      for (int w : checks[c1])
        if (w != v)
          for (int c2 : vchecks[w]) mark[c2] = 1;
    }
    free_checks.clear();
    for (int d = 0; d < m; ++d)
      if (!mark[d]) free_checks.push_back(d);
    if (free_checks.empty()) continue;
    const int d = free_checks[std::uniform_int_distribution<std::size_t>(0, free_checks.size() - 1)(rng)];

    long best_delta = 0;
    int best_u = -1;
    const std::vector<int> members = checks[d];
    for (int u : members) {
      if (std::find(vchecks[u].begin(), vchecks[u].end(), c) != vchecks[u].end()) continue;
      const long before = cycles_at(v, checks, vchecks, count) + cycles_at(u, checks, vchecks, count);
      move_edge(checks, vchecks, v, c, d);
      move_edge(checks, vchecks, u, d, c);
      const long delta = cycles_at(v, checks, vchecks, count) + cycles_at(u, checks, vchecks, count) - before;
      move_edge(checks, vchecks, v, d, c);
      move_edge(checks, vchecks, u, c, d);
      if (best_u < 0 || delta < best_delta) {
        best_delta = delta;
        best_u = u;
      }
    }
    if (best_u < 0 || best_delta > 0) continue;
    move_edge(checks, vchecks, v, c, d);
    move_edge(checks, vchecks, best_u, d, c);
    if (best_delta < 0) remaining = total();
  }
  return remaining;
}

}  // namespace

LdpcCode LdpcCode::from_checks(int block_len, std::vector<std::vector<int>> checks) {
  if (block_len < 1) throw ConfigError("ldpc: block_len must be >= 1");
  LdpcCode code;
  code.block_len_ = block_len;
  code.var_checks_.assign(block_len, {});
  for (auto& row : checks) {
    std::sort(row.begin(), row.end());
    if (std::adjacent_find(row.begin(), row.end()) != row.end())
      throw ConfigError("ldpc: repeated variable in a check");
    for (int v : row) {
      if (v < 0 || v >= block_len) throw ConfigError("ldpc: variable index out of range");
    }
  }
  code.checks_ = std::move(checks);
  for (int c = 0; c < code.num_checks(); ++c) {
    for (int v : code.checks_[c]) code.var_checks_[v].push_back(c);
  }

  const auto uniform = [](const auto& lists) {
    if (lists.empty()) return 0;
    const auto d = lists.front().size();
    for (const auto& l : lists) {
      if (l.size() != d) return 0;
    }
    return static_cast<int>(d);
  };
  code.var_deg_ = uniform(code.var_checks_);
  code.check_deg_ = uniform(code.checks_);
  code.count_four_cycles();
  code.derive_encoder();
  return code;
}

void LdpcCode::count_four_cycles() {
  four_cycles_ = 0;
  const int m = num_checks();
  std::vector<int> shared(m, 0);
  for (int c = 0; c < m; ++c) {
    std::fill(shared.begin(), shared.end(), 0);
    for (int v : checks_[c]) {
      for (int c2 : var_checks_[v]) {
        if (c2 > c) ++shared[c2];
      }
    }
    for (int c2 = c + 1; c2 < m; ++c2) {
      four_cycles_ += static_cast<long>(shared[c2]) * (shared[c2] - 1) / 2;
    }
  }
}

void LdpcCode::derive_encoder() {
  const int m = num_checks();
  const int n = block_len_;
  const int words = (n + 63) / 64;
  std::vector<Words> rows(m, Words(words, 0));
  for (int c = 0; c < m; ++c) {
    for (int v : checks_[c]) set_bit(rows[c], v);
  }

  // Reduced row echelon form; pivots taken from the right so that parity
  // positions gather at the end of the codeword for the usual layouts.
  parity_pos_.clear();
  int r = 0;
  for (int col = n - 1; col >= 0 && r < m; --col) {
    int pivot = -1;
    for (int i = r; i < m; ++i) {
      if (get_bit(rows[i], col)) {
        pivot = i;
        break;
      }
    }
    if (pivot < 0) continue;
    std::swap(rows[r], rows[pivot]);
    for (int i = 0; i < m; ++i) {
      if (i != r && get_bit(rows[i], col)) {
        for (int w = 0; w < words; ++w) rows[i][w] ^= rows[r][w];
      }
    }
    parity_pos_.push_back(col);
    ++r;
  }
  rank_ = r;

  std::vector<char> is_parity(n, 0);
  for (int p : parity_pos_) is_parity[p] = 1;
  info_pos_.clear();
  for (int v = 0; v < n; ++v) {
    if (!is_parity[v]) info_pos_.push_back(v);
  }

  const int k = static_cast<int>(info_pos_.size());
  const int info_words = (k + 63) / 64;
  parity_rows_.assign(rank_, Words(info_words, 0));
  for (int i = 0; i < rank_; ++i) {
    for (int j = 0; j < k; ++j) {
      if (get_bit(rows[i], info_pos_[j])) set_bit(parity_rows_[i], j);
    }
  }
}

BitVector LdpcCode::encode(const BitVector& info_bits) const {
  const int k = info_len();
  if (static_cast<int>(info_bits.size()) != k)
    throw FramingError("ldpc encode: info length mismatch");
  Words packed((k + 63) / 64, 0);
  for (int j = 0; j < k; ++j) {
    if (info_bits[j] & 1) set_bit(packed, j);
  }
  BitVector cw(block_len_, 0);
  for (int j = 0; j < k; ++j) cw[info_pos_[j]] = info_bits[j] & 1;
  for (int i = 0; i < rank_; ++i) {
    int ones = 0;
    for (std::size_t w = 0; w < packed.size(); ++w) {
      ones += std::popcount(parity_rows_[i][w] & packed[w]);
    }
    cw[parity_pos_[i]] = static_cast<std::uint8_t>(ones & 1);
  }
  return cw;
}

BitVector LdpcCode::extract_info(const BitVector& codeword) const {
  if (static_cast<int>(codeword.size()) != block_len_)
    throw FramingError("ldpc: codeword length mismatch");
  BitVector info(info_pos_.size());
  for (std::size_t j = 0; j < info_pos_.size(); ++j) info[j] = codeword[info_pos_[j]];
  return info;
}

std::vector<int> LdpcCode::syndrome(const BitVector& word) const {
  if (static_cast<int>(word.size()) != block_len_)
    throw FramingError("ldpc: word length mismatch");
  std::vector<int> s(checks_.size(), 0);
  for (std::size_t c = 0; c < checks_.size(); ++c) {
    int acc = 0;
    for (int v : checks_[c]) acc ^= word[v] & 1;
    s[c] = acc;
  }
  return s;
}

std::size_t LdpcCode::syndrome_weight(const BitVector& word) const {
  const auto s = syndrome(word);
  return static_cast<std::size_t>(std::count(s.begin(), s.end(), 1));
}

LdpcCode construct_regular(int block_len, int var_deg, int check_deg, Seed seed) {
  if (block_len < 1 || var_deg < 1 || check_deg < 1)
    throw ConstructionError("ldpc: degrees and length must be positive");
  if ((static_cast<long>(block_len) * var_deg) % check_deg != 0)
    throw ConstructionError("ldpc: block_len * var_deg not divisible by check_deg");
  const int m = static_cast<int>(static_cast<long>(block_len) * var_deg / check_deg);
  if (var_deg > m) throw ConstructionError("ldpc: var_deg exceeds number of checks");
  if (check_deg > block_len) throw ConstructionError("ldpc: check_deg exceeds block_len");

  // Greedy progressive edge placement preferring checks that close no
  // 4-cycle, then degree-preserving edge swaps to remove any left over.
  // The graph with the fewest 4-cycles over the attempts is kept.
  // Girth 6 needs every pair of checks to share at most one variable.
  const bool girth6_possible =
      static_cast<long>(m) * (m - 1) / 2 >= static_cast<long>(block_len) * var_deg * (var_deg - 1) / 2;
  const int kAttempts = girth6_possible ? 8 : 1;
  std::vector<std::vector<int>> best;
  long best_cycles = -1;
  for (int attempt = 0; attempt < kAttempts && best_cycles != 0; ++attempt) {
    Rng rng(derive_seed(seed, attempt));
    std::vector<std::vector<int>> checks(m);
    std::vector<std::vector<int>> vchecks(block_len);
    std::vector<int> conflict(m, 0);
    std::vector<int> candidates;
    candidates.reserve(m);
    bool ok = true;

    std::vector<int> order(block_len);
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);

    for (int v : order) {
      for (int e = 0; e < var_deg && ok; ++e) {
        // conflict[c] = number of 4-cycles created by adding edge (v, c).
        std::fill(conflict.begin(), conflict.end(), 0);
        for (int c : vchecks[v]) {
          for (int u : checks[c]) {
            if (u == v) continue;
            for (int c2 : vchecks[u]) ++conflict[c2];
          }
        }
        int best_cost = 0;
        int best_deg = 0;
        candidates.clear();
        for (int c = 0; c < m; ++c) {
          const int deg = static_cast<int>(checks[c].size());
          if (deg >= check_deg) continue;
          if (std::find(vchecks[v].begin(), vchecks[v].end(), c) != vchecks[v].end()) continue;
          const int cost = conflict[c];
          if (candidates.empty() || cost < best_cost || (cost == best_cost && deg < best_deg)) {
            candidates.assign(1, c);
            best_cost = cost;
            best_deg = deg;
          } else if (cost == best_cost && deg == best_deg) {
            candidates.push_back(c);
          }
        }
        if (candidates.empty()) {
          ok = false;
          break;
        }
        std::uniform_int_distribution<std::size_t> pick(0, candidates.size() - 1);
        const int c = candidates[pick(rng)];
        checks[c].push_back(v);
        vchecks[v].push_back(c);
      }
      if (!ok) break;
    }
    if (!ok) continue;
    long cycles = girth6_possible ? repair_four_cycles(checks, vchecks, rng) : -1;
    if (cycles < 0) cycles = std::numeric_limits<long>::max();
    if (best_cycles < 0 || cycles < best_cycles) {
      best_cycles = cycles;
      best = std::move(checks);
    }
  }
  if (best_cycles < 0) throw ConstructionError("ldpc: regular construction failed after retries");
  return LdpcCode::from_checks(block_len, std::move(best));
}

DecodeResult decode_spa(const LdpcCode& code, const BitBeliefs& priors, int iterations,
                        bool early_exit) {
  const int n = code.block_len();
  if (static_cast<int>(priors.size()) != n) throw FramingError("decode_spa: prior length mismatch");
  if (iterations < 1) throw ConfigError("decode_spa: iterations must be >= 1");

  const auto& checks = code.checks();
  std::vector<double> prior(n), llr_ch(n);
  for (int v = 0; v < n; ++v) {
    prior[v] = clamp_prob(priors.prob_one[v]);
    llr_ch[v] = std::log((1.0 - prior[v]) / prior[v]);
  }

  // Edge e enumerates (check, slot) pairs check-major.
  std::vector<int> edge_offset(checks.size() + 1, 0);
  for (std::size_t c = 0; c < checks.size(); ++c)
    edge_offset[c + 1] = edge_offset[c] + static_cast<int>(checks[c].size());
  const int num_edges = edge_offset.back();
  std::vector<double> v2c(num_edges), c2v(num_edges, 0.0);
  for (std::size_t c = 0; c < checks.size(); ++c) {
    for (std::size_t j = 0; j < checks[c].size(); ++j) v2c[edge_offset[c] + j] = llr_ch[checks[c][j]];
  }

  std::vector<double> total(n), fwd, bwd;
  BitVector hard(n);
  DecodeResult res;
  constexpr double kTanhMax = 1.0 - 1e-15;

  for (int it = 0; it < iterations; ++it) {
    for (std::size_t c = 0; c < checks.size(); ++c) {
      const int d = static_cast<int>(checks[c].size());
      const int off = edge_offset[c];
      fwd.assign(d + 1, 1.0);
      bwd.assign(d + 1, 1.0);
      for (int j = 0; j < d; ++j) fwd[j + 1] = fwd[j] * std::tanh(0.5 * v2c[off + j]);
      for (int j = d - 1; j >= 0; --j) bwd[j] = bwd[j + 1] * std::tanh(0.5 * v2c[off + j]);
      for (int j = 0; j < d; ++j) {
        const double t = std::clamp(fwd[j] * bwd[j + 1], -kTanhMax, kTanhMax);
        c2v[off + j] = 2.0 * std::atanh(t);
      }
    }
    std::copy(llr_ch.begin(), llr_ch.end(), total.begin());
    for (std::size_t c = 0; c < checks.size(); ++c) {
      for (std::size_t j = 0; j < checks[c].size(); ++j) total[checks[c][j]] += c2v[edge_offset[c] + j];
    }
    for (std::size_t c = 0; c < checks.size(); ++c) {
      for (std::size_t j = 0; j < checks[c].size(); ++j) {
        const int e = edge_offset[c] + static_cast<int>(j);
        v2c[e] = total[checks[c][j]] - c2v[e];
      }
    }
    res.iterations_run = it + 1;
    for (int v = 0; v < n; ++v) hard[v] = total[v] < 0.0 ? 1 : 0;
    res.syndrome_weight = code.syndrome_weight(hard);
    res.syndrome_ok = res.syndrome_weight == 0;
    if (early_exit && res.syndrome_ok) break;
  }

  res.extrinsic = BitBeliefs{std::vector<double>(n), BeliefRole::Extrinsic};
  res.posterior = BitBeliefs{std::vector<double>(n), BeliefRole::APosteriori};
  for (int v = 0; v < n; ++v) {
    const double ext_llr = total[v] - llr_ch[v];
    const double pe = clamp_prob(1.0 / (1.0 + std::exp(ext_llr)));
    res.extrinsic.prob_one[v] = pe;
    const double one = prior[v] * pe;
    const double zero = (1.0 - prior[v]) * (1.0 - pe);
    res.posterior.prob_one[v] = one / (one + zero);
  }
  return res;
}

LdpcCode read_alist(std::istream& in) {
  std::vector<std::vector<int>> lines;
  std::string line;
  while (std::getline(in, line)) {
    std::istringstream ls(line);
    std::vector<int> vals;
    int x;
    while (ls >> x) vals.push_back(x);
    if (!vals.empty()) lines.push_back(std::move(vals));
  }
  if (lines.size() < 4 || lines[0].size() < 2)
    throw ConfigError("alist: truncated header");
  const int n = lines[0][0];
  const int m = lines[0][1];
  if (n < 1 || m < 1) throw ConfigError("alist: bad dimensions");
  if (static_cast<int>(lines.size()) < 4 + n + m) throw ConfigError("alist: truncated body");
  const auto& col_w = lines[2];
  const auto& row_w = lines[3];
  if (static_cast<int>(col_w.size()) != n || static_cast<int>(row_w.size()) != m)
    throw ConfigError("alist: weight list length mismatch");

  std::vector<std::vector<int>> checks(m);
  for (int c = 0; c < m; ++c) {
    for (int idx : lines[4 + n + c]) {
      if (idx == 0) continue;
      if (idx < 1 || idx > n) throw ConfigError("alist: column index out of range");
      checks[c].push_back(idx - 1);
    }
    if (static_cast<int>(checks[c].size()) != row_w[c]) throw ConfigError("alist: row weight mismatch");
  }
  std::vector<int> col_count(n, 0);
  for (int v = 0; v < n; ++v) {
    for (int idx : lines[4 + v]) {
      if (idx == 0) continue;
      if (idx < 1 || idx > m) throw ConfigError("alist: row index out of range");
      const auto& row = checks[idx - 1];
      if (!std::binary_search(row.begin(), row.end(), v) &&
          std::find(row.begin(), row.end(), v) == row.end())
        throw ConfigError("alist: column and row sections disagree");
      ++col_count[v];
    }
    if (col_count[v] != col_w[v]) throw ConfigError("alist: column weight mismatch");
  }
  return LdpcCode::from_checks(n, std::move(checks));
}

void write_alist(const LdpcCode& code, std::ostream& out) {
  const int n = code.block_len();
  const int m = code.num_checks();
  std::size_t max_col = 0, max_row = 0;
  for (const auto& c : code.var_checks()) max_col = std::max(max_col, c.size());
  for (const auto& r : code.checks()) max_row = std::max(max_row, r.size());
  out << n << ' ' << m << '\n' << max_col << ' ' << max_row << '\n';
  for (int v = 0; v < n; ++v) out << code.var_checks()[v].size() << (v + 1 < n ? ' ' : '\n');
  for (int c = 0; c < m; ++c) out << code.checks()[c].size() << (c + 1 < m ? ' ' : '\n');
  const auto emit = [&out](const std::vector<int>& idx, std::size_t width) {
    for (std::size_t i = 0; i < width; ++i) {
      out << (i < idx.size() ? idx[i] + 1 : 0) << (i + 1 < width ? ' ' : '\n');
    }
  };
  for (int v = 0; v < n; ++v) emit(code.var_checks()[v], max_col);
  for (int c = 0; c < m; ++c) emit(code.checks()[c], max_row);
}

}  // namespace phn
