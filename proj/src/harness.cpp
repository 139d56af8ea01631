#include "phn/harness.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <exception>
#include <fstream>
#include <mutex>
#include <numbers>
#include <sstream>
#include <thread>

namespace phn {

using nlohmann::json;

std::string to_string(Scenario s) {
  switch (s) {
    case Scenario::ProposedEm: return "proposed_em";
    case Scenario::NoTracking: return "no_tracking";
    case Scenario::Disjoint: return "disjoint";
    case Scenario::NoPhn: return "no_phn";
  }
  return "unknown";
}

Scenario parse_scenario(const std::string& s) {
  for (Scenario c : {Scenario::ProposedEm, Scenario::NoTracking, Scenario::Disjoint, Scenario::NoPhn}) {
    if (to_string(c) == s) return c;
  }
  throw ConfigError("unknown scenario '" + s + "'");
}

void ScenarioConfig::validate() const {
  if (ebn0_grid_db.empty()) throw ConfigError("scenario: E_b/N_0 grid is empty");
  if (frames_per_point < 1) throw ConfigError("scenario: frames_per_point must be >= 1");
  if (em_iters < 1) throw ConfigError("scenario: em_iters must be >= 1");
  if (!(phn_var >= 0.0)) throw ConfigError("scenario: phn_var must be >= 0");
  if (pilot_spacing < 0) throw ConfigError("scenario: pilot_spacing must be >= 0");
  if (min_errors < 0 || max_frames < frames_per_point)
    throw ConfigError("scenario: need min_errors >= 0 and max_frames >= frames_per_point");
  if (threads < 0) throw ConfigError("scenario: threads must be >= 0");
  if (modulation_order < 4 || (modulation_order & (modulation_order - 1)) != 0 ||
      std::countr_zero(static_cast<unsigned>(modulation_order)) % 2 != 0)
    throw ConfigError("scenario: modulation_order must be a power of 4");
  if (num_tx < 1 || num_rx < 1) throw ConfigError("scenario: antenna counts must be >= 1");
  DetectorConfig{eq_sm_iters, dm_dc_iters, dec_iters}.validate();
}

int ScenarioConfig::rounds() const { return scenario == Scenario::Disjoint ? 1 : em_iters; }

SimContext make_context(const ScenarioConfig& cfg) {
  cfg.validate();
  LdpcCode code = [&] {
    if (cfg.alist_path.empty()) return construct_regular(cfg.block_len, cfg.var_degree, cfg.check_degree, cfg.code_seed);
    std::ifstream in(cfg.alist_path);
    if (!in) throw ConfigError("cannot open alist file '" + cfg.alist_path + "'");
    return read_alist(in);
  }();
  Constellation cst = make_constellation(cfg.modulation_order);
  FrameLayout layout = make_layout(code.block_len(), cfg.num_tx, cst.bits_per_symbol(), cfg.pilot_spacing);
  Interleaver il = Interleaver::random(static_cast<std::size_t>(layout.transmitted_bits()),
                                       derive_seed(cfg.code_seed, 0x1e7));
  return {std::move(code), std::move(cst), std::move(layout), std::move(il)};
}

double noise_var_for(double ebn0_db, const FrameLayout& layout, int info_bits) {
  if (info_bits < 1) throw ConfigError("noise mapping: info_bits must be >= 1");
  const double energy = static_cast<double>(layout.frame_len) * layout.num_tx;
  return energy / (static_cast<double>(info_bits) * db_to_linear(ebn0_db));
}

namespace {

enum Stream : std::uint64_t { kInfo = 1, kPadding, kChannel, kPhase, kNoise };

std::vector<std::uint32_t> errors_per_round(const std::vector<BitVector>& decisions, const BitVector& truth) {
  std::vector<std::uint32_t> out;
  out.reserve(decisions.size());
  for (const auto& d : decisions) out.push_back(static_cast<std::uint32_t>(count_bit_errors(d, truth)));
  return out;
}

}  // namespace

FrameData generate_frame(const SimContext& ctx, const ScenarioConfig& cfg, int point_index, double ebn0_db,
                         int frame_index) {
  const Seed fs = derive_seed(cfg.base_seed, point_index, frame_index);
  const int info_len = ctx.code.info_len();

  FrameData d;
  BitVector info(static_cast<std::size_t>(info_len));
  {
    Rng rng(derive_seed(fs, kInfo));
    std::bernoulli_distribution coin(0.5);
    for (auto& b : info) b = coin(rng) ? 1 : 0;
  }
  d.tx = build_frame(info, ctx.code, ctx.il, ctx.cst, ctx.layout, derive_seed(fs, kPadding));

  ChannelConfig ch;
  ch.num_tx = cfg.num_tx;
  ch.num_rx = cfg.num_rx;
  ch.rician_factor_db = cfg.rician_factor_db;
  ch.channel_var = cfg.channel_var;
  d.h = generate_rician_channel(ch, derive_seed(fs, kChannel));

  const int len = ctx.layout.frame_len;
  d.phn = cfg.scenario == Scenario::NoPhn
              ? PhnTrajectories::zeros(cfg.num_tx, cfg.num_rx, len)
              : generate_phn(PhnConfig{cfg.phn_var, len}, cfg.num_tx, cfg.num_rx, derive_seed(fs, kPhase));
  d.y = apply_channel(d.tx.symbols, d.h, d.phn, noise_var_for(ebn0_db, ctx.layout, info_len),
                      derive_seed(fs, kNoise));
  d.y.eb_n0_db = ebn0_db;
  return d;
}

EmConfig em_config_for(const ScenarioConfig& cfg) {
  EmConfig em;
  em.em_iters = cfg.em_iters;
  em.detector = DetectorConfig{cfg.eq_sm_iters, cfg.dm_dc_iters, cfg.dec_iters};
  em.innovation_var = cfg.phn_var;
  em.exact_increment_cov = cfg.exact_increment_cov;
  return em;
}

FrameOutcome simulate_frame(const SimContext& ctx, const ScenarioConfig& cfg, int point_index,
                            double ebn0_db, int frame_index) {
  const FrameData d = generate_frame(ctx, cfg, point_index, ebn0_db, frame_index);
  const BitVector& info = d.tx.info_bits;
  const ReceivedFrame& y = d.y;
  const ChannelMatrix& h = d.h;
  const int len = ctx.layout.frame_len;
  const EmConfig em = em_config_for(cfg);

  FrameOutcome out;
  switch (cfg.scenario) {
    case Scenario::ProposedEm: {
      const EmResult r = run_em(y, h, ctx.layout, ctx.code, ctx.il, ctx.cst, em);
      std::vector<BitVector> decisions;
      for (const auto& rec : r.history) decisions.push_back(rec.hard_bits);
      out.bit_errors = errors_per_round(decisions, info);
      break;
    }
    case Scenario::Disjoint: {
      const DetectorResult r = disjoint_receiver(y, h, ctx.layout, ctx.code, ctx.il, ctx.cst, em);
      out.bit_errors = errors_per_round({r.hard_bits}, info);
      break;
    }
    case Scenario::NoTracking:
    case Scenario::NoPhn: {
      const RMatrix zero = RMatrix::Zero(cfg.num_rx + cfg.num_tx - 1, len);
      out.bit_errors = errors_per_round(
          fixed_phase_receiver(y, h, zero, ctx.layout, ctx.code, ctx.il, ctx.cst, em.detector, cfg.em_iters),
          info);
      break;
    }
  }
  return out;
}

ErrorStats ErrorStats::from_frames(std::span<const std::uint32_t> bit_errors, std::uint64_t bits_per_frame) {
  ErrorStats s;
  s.frames_counted = bit_errors.size();
  s.bits_counted = s.frames_counted * bits_per_frame;
  for (auto e : bit_errors) {
    s.bit_errors += e;
    s.frame_errors += e > 0;
  }
  if (s.frames_counted == 0 || bits_per_frame == 0) return s;
  s.ber = static_cast<double>(s.bit_errors) / static_cast<double>(s.bits_counted);
  s.fer = static_cast<double>(s.frame_errors) / static_cast<double>(s.frames_counted);
  if (s.frames_counted > 1) {
    double ss = 0.0;
    for (auto e : bit_errors) {
      const double d = static_cast<double>(e) / static_cast<double>(bits_per_frame) - s.ber;
      ss += d * d;
    }
    const double sd = std::sqrt(ss / static_cast<double>(s.frames_counted - 1));
    s.ci95_ber = 1.96 * sd / std::sqrt(static_cast<double>(s.frames_counted));
  }
  return s;
}

std::atomic<bool>& interrupt_flag() {
  static std::atomic<bool> flag{false};
  return flag;
}

namespace {

constexpr int kChunk = 64;

/// Runs frames [first, last) on `threads` workers; results land by index.
void run_chunk(const SimContext& ctx, const ScenarioConfig& cfg, int point, double ebn0, int first,
               int last, int threads, std::vector<std::vector<std::uint32_t>>& out) {
  out.resize(static_cast<std::size_t>(last));
  std::atomic<int> next{first};
  std::exception_ptr err;
  std::mutex err_mu;
  auto work = [&] {
    for (int f = next++; f < last; f = next++) {
      try {
        out[f] = simulate_frame(ctx, cfg, point, ebn0, f).bit_errors;
      } catch (...) {
        const std::lock_guard lock(err_mu);
        if (!err) err = std::current_exception();
      }
    }
  };
  const int n = std::max(1, std::min(threads, last - first));
  std::vector<std::jthread> pool;
  for (int t = 1; t < n; ++t) pool.emplace_back(work);
  work();
  pool.clear();
  if (err) std::rethrow_exception(err);
}

}  // namespace

MonteCarloResult run_monte_carlo(const ScenarioConfig& cfg) { return run_monte_carlo(cfg, make_context(cfg)); }

MonteCarloResult run_monte_carlo(const ScenarioConfig& cfg, const SimContext& ctx) {
  cfg.validate();
  const int threads = cfg.threads > 0 ? cfg.threads : std::max(1u, std::thread::hardware_concurrency());
  const int rounds = cfg.rounds();
  MonteCarloResult res;
  res.config = cfg;
  res.info_bits = ctx.code.info_len();

  for (std::size_t p = 0; p < cfg.ebn0_grid_db.size() && !res.interrupted; ++p) {
    const double ebn0 = cfg.ebn0_grid_db[p];
    PointFrames pf{ebn0, {}};
    int done = 0;
    long final_errors = 0;
    for (;;) {
      const bool base_done = done >= cfg.frames_per_point;
      if (base_done && (cfg.min_errors == 0 || final_errors >= cfg.min_errors || done >= cfg.max_frames)) break;
      if (interrupt_flag().load()) {
        res.interrupted = true;
        break;
      }
      const int cap = base_done ? cfg.max_frames : cfg.frames_per_point;
      const int last = std::min(done + kChunk, cap);
      run_chunk(ctx, cfg, static_cast<int>(p), ebn0, done, last, threads, pf.bit_errors);
      for (int f = done; f < last; ++f) final_errors += pf.bit_errors[f].back();
      done = last;
    }
    pf.bit_errors.resize(static_cast<std::size_t>(done));
    if (done == 0) break;
    for (int r = 0; r < rounds; ++r) {
      std::vector<std::uint32_t> col;
      col.reserve(pf.bit_errors.size());
      for (const auto& fr : pf.bit_errors) col.push_back(fr[r]);
      PointResult row;
      row.scenario = cfg.scenario;
      row.ebn0_db = ebn0;
      row.phn_var = cfg.phn_var;
      row.em_iter = r + 1;
      row.stats = ErrorStats::from_frames(col, static_cast<std::uint64_t>(res.info_bits));
      row.seed = cfg.base_seed;
      res.rows.push_back(row);
    }
    res.frames.push_back(std::move(pf));
  }
  return res;
}

namespace {

std::string fmt6(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

std::uint64_t fnv1a(std::uint64_t h, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) {
    h ^= (v >> (8 * i)) & 0xff;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex64(std::uint64_t v) {
  char buf[20];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

json config_json(const ScenarioConfig& c) {
  return json{{"scenario", to_string(c.scenario)},
              {"ebn0_grid_db", c.ebn0_grid_db},
              {"phn_var", c.phn_var},
              {"em_iters", c.em_iters},
              {"pilot_spacing", c.pilot_spacing},
              {"exact_increment_cov", c.exact_increment_cov},
              {"block_len", c.block_len},
              {"var_degree", c.var_degree},
              {"check_degree", c.check_degree},
              {"code_seed", c.code_seed},
              {"alist_path", c.alist_path},
              {"modulation_order", c.modulation_order},
              {"num_tx", c.num_tx},
              {"num_rx", c.num_rx},
              {"rician_factor_db", c.rician_factor_db},
              {"channel_var", c.channel_var},
              {"eq_sm_iters", c.eq_sm_iters},
              {"dm_dc_iters", c.dm_dc_iters},
              {"dec_iters", c.dec_iters},
              {"frames_per_point", c.frames_per_point},
              {"min_errors", c.min_errors},
              {"max_frames", c.max_frames},
              {"base_seed", c.base_seed},
              {"threads", c.threads}};
}

}  // namespace

std::string results_csv(const MonteCarloResult& r) {
  std::ostringstream os;
  os << "scenario,ebn0_db,phn_var,em_iter,ber,fer,ci95,frames,seed\n";
  for (const auto& row : r.rows) {
    os << to_string(row.scenario) << ',' << fmt6(row.ebn0_db) << ',' << fmt6(row.phn_var) << ','
       << row.em_iter << ',' << fmt6(row.stats.ber) << ',' << fmt6(row.stats.fer) << ','
       << fmt6(row.stats.ci95_ber) << ',' << row.stats.frames_counted << ',' << row.seed << '\n';
  }
  return os.str();
}

std::string manifest_json(const MonteCarloResult& r, const SimContext& ctx) {
  std::uint64_t code_fp = 0xcbf29ce484222325ULL;
  for (const auto& row : ctx.code.checks()) {
    for (int v : row) code_fp = fnv1a(code_fp, static_cast<std::uint64_t>(v));
    code_fp = fnv1a(code_fp, ~0ULL);
  }
  std::uint64_t il_fp = 0xcbf29ce484222325ULL;
  for (auto p : ctx.il.permutation()) il_fp = fnv1a(il_fp, p);

  json m;
  m["tool"] = "phnsim";
  m["version"] = kVersion;
  m["config"] = config_json(r.config);
  m["code"] = {{"block_len", ctx.code.block_len()},
               {"info_len", ctx.code.info_len()},
               {"num_checks", ctx.code.num_checks()},
               {"rank", ctx.code.rank()},
               {"var_degree", ctx.code.var_degree()},
               {"check_degree", ctx.code.check_degree()},
               {"four_cycles", ctx.code.four_cycles()},
               {"fingerprint", hex64(code_fp)}};
  m["layout"] = {{"frame_len", ctx.layout.frame_len},
                 {"pilots", ctx.layout.pilot_instants.size()},
                 {"data_instants", ctx.layout.num_data()},
                 {"padding", ctx.layout.padding}};
  m["interleaver_fingerprint"] = hex64(il_fp);
  m["rows"] = r.rows.size();
  m["interrupted"] = r.interrupted;
  return m.dump(2) + "\n";
}

void emit_results(const MonteCarloResult& r, const SimContext& ctx, const std::filesystem::path& stem) {
  if (r.rows.empty()) throw std::runtime_error("emit_results: no rows to write");
  auto write = [](const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open '" + path.string() + "' for writing");
    out << text;
    if (!out) throw std::runtime_error("write failed for '" + path.string() + "'");
  };
  write(std::filesystem::path(stem).concat(".csv"), results_csv(r));
  write(std::filesystem::path(stem).concat(".manifest.json"), manifest_json(r, ctx));
}

std::string scenario_to_json(const ScenarioConfig& cfg) { return config_json(cfg).dump(2) + "\n"; }

ScenarioConfig scenario_from_json(const std::string& text, ScenarioConfig c) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  if (!j.is_object()) throw ConfigError("config: top level must be an object");
  const json defaults = config_json(c);
  for (const auto& [key, value] : j.items()) {
    if (!defaults.contains(key)) throw ConfigError("config: unknown field '" + key + "'");
  }
  try {
    if (j.contains("scenario")) c.scenario = parse_scenario(j["scenario"].get<std::string>());
    if (j.contains("ebn0_grid_db")) c.ebn0_grid_db = j["ebn0_grid_db"].get<std::vector<double>>();
    c.phn_var = j.value("phn_var", c.phn_var);
    c.em_iters = j.value("em_iters", c.em_iters);
    c.pilot_spacing = j.value("pilot_spacing", c.pilot_spacing);
    c.exact_increment_cov = j.value("exact_increment_cov", c.exact_increment_cov);
    c.block_len = j.value("block_len", c.block_len);
    c.var_degree = j.value("var_degree", c.var_degree);
    c.check_degree = j.value("check_degree", c.check_degree);
    c.code_seed = j.value("code_seed", c.code_seed);
    c.alist_path = j.value("alist_path", c.alist_path);
    c.modulation_order = j.value("modulation_order", c.modulation_order);
    c.num_tx = j.value("num_tx", c.num_tx);
    c.num_rx = j.value("num_rx", c.num_rx);
    c.rician_factor_db = j.value("rician_factor_db", c.rician_factor_db);
    c.channel_var = j.value("channel_var", c.channel_var);
    c.eq_sm_iters = j.value("eq_sm_iters", c.eq_sm_iters);
    c.dm_dc_iters = j.value("dm_dc_iters", c.dm_dc_iters);
    c.dec_iters = j.value("dec_iters", c.dec_iters);
    c.frames_per_point = j.value("frames_per_point", c.frames_per_point);
    c.min_errors = j.value("min_errors", c.min_errors);
    c.max_frames = j.value("max_frames", c.max_frames);
    c.base_seed = j.value("base_seed", c.base_seed);
    c.threads = j.value("threads", c.threads);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  c.validate();
  return c;
}

OracleCheckResult run_oracle_check(const OracleCheckConfig& cfg) {
  if (cfg.trials < 1 || cfg.frame_len < 1) throw ConfigError("oracle check: trials and frame_len must be >= 1");
  const Constellation cst = make_constellation(cfg.modulation_order);
  // Uncoded known symbols: every transmitted bit counts as an information bit.
  const double noise = 1.0 / (cst.bits_per_symbol() * db_to_linear(cfg.ebn0_db));
  ChannelConfig ch;
  ch.num_tx = cfg.num_tx;
  ch.num_rx = cfg.num_rx;
  ch.rician_factor_db = cfg.rician_factor_db;

  OracleCheckResult out;
  for (int t = 0; t < cfg.trials; ++t) {
    const Seed ts = derive_seed(cfg.seed, t);
    Rng rng(derive_seed(ts, 1));
    std::uniform_int_distribution<int> pick(0, cst.size() - 1);
    CMatrix s(cfg.num_tx, cfg.frame_len);
    for (Eigen::Index k = 0; k < s.cols(); ++k)
      for (Eigen::Index m = 0; m < s.rows(); ++m) s(m, k) = cst.point(pick(rng));
    const ChannelMatrix h = generate_rician_channel(ch, derive_seed(ts, 2));
    const PhnTrajectories phn =
        generate_phn(PhnConfig{cfg.phn_var, cfg.frame_len}, cfg.num_tx, cfg.num_rx, derive_seed(ts, 3));
    const ReceivedFrame y = apply_channel(s, h, phn, noise, derive_seed(ts, 4));

    const EkfsTrajectory track =
        run_ekfs(y.observations, h, s, EkfsConfig::make(cfg.phn_var, noise, cfg.num_tx, cfg.num_rx));
    const RMatrix map = map_oracle(y, h, known_symbol_stats(s), cfg.oracle, cfg.phn_var);
    const RMatrix diff = track.smoothed_matrix() - map;
    const double worst = diff.unaryExpr([](double d) { return std::abs(std::remainder(d, 2.0 * std::numbers::pi)); })
                             .maxCoeff();
    out.max_abs_diff.push_back(worst);
    out.agreeing += worst <= cfg.tolerance;
  }
  return out;
}

}  // namespace phn
