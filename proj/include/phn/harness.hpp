#pragma once

#include "phn/em_receiver.hpp"

#include <atomic>
#include <filesystem>
#include <span>
#include <string>

namespace phn {

enum class Scenario { ProposedEm, NoTracking, Disjoint, NoPhn };

std::string to_string(Scenario s);
Scenario parse_scenario(const std::string& s);

struct ScenarioConfig {
  Scenario scenario = Scenario::ProposedEm;
  std::vector<double> ebn0_grid_db{20.0};
  double phn_var = 5e-5;
  int em_iters = 3;
  int pilot_spacing = 14;
  bool exact_increment_cov = false;

  // Code: built from (block_len, var_degree, check_degree, code_seed) unless
  // alist_path names a parity-check matrix to import.
  int block_len = 1024;
  int var_degree = 4;
  int check_degree = 32;
  Seed code_seed = 1;
  std::string alist_path;

  int modulation_order = 16;
  int num_tx = 2;
  int num_rx = 2;
  double rician_factor_db = 2.0;
  double channel_var = 1.0;

  int eq_sm_iters = 1;   // equalizer <-> soft modem
  int dm_dc_iters = 1;   // demapper <-> decoder
  int dec_iters = 1;     // inside the LDPC decoder

  int frames_per_point = 500;
  /// Keep drawing frames past frames_per_point until this many bit errors
  /// (final iteration) are seen; 0 disables.
  long min_errors = 0;
  /// Hard cap on frames per point when min_errors is active.
  int max_frames = 5000;
  Seed base_seed = 1;
  /// Worker threads; 0 picks the hardware concurrency.
  int threads = 0;

  void validate() const;
  /// Receiver rounds reported per point (EM iterations or detector passes).
  int rounds() const;
};

/// Everything fixed across frames of a run.
struct SimContext {
  LdpcCode code;
  Constellation cst;
  FrameLayout layout;
  Interleaver il;
};

SimContext make_context(const ScenarioConfig& cfg);

/// Noise variance per receive antenna for a given E_b/N_0. Bit energy is the
/// whole frame's transmitted energy (pilots included) over the info bits.
double noise_var_for(double ebn0_db, const FrameLayout& layout, int info_bits);

/// Everything drawn for one frame before reception.
struct FrameData {
  TxFrame tx;
  ChannelMatrix h;
  PhnTrajectories phn;
  ReceivedFrame y;
};

/// Seeds derive from (base_seed, point_index, frame_index) only, so different
/// scenarios see the same bits, channel, phase noise, and thermal noise.
/// The no_phn scenario replaces the phase paths with zeros.
FrameData generate_frame(const SimContext& ctx, const ScenarioConfig& cfg, int point_index, double ebn0_db,
                         int frame_index);

/// Receiver settings implied by a scenario configuration.
EmConfig em_config_for(const ScenarioConfig& cfg);

struct FrameOutcome {
  std::vector<std::uint32_t> bit_errors;  // per round
};

/// One frame of the configured scenario, received and scored per round.
FrameOutcome simulate_frame(const SimContext& ctx, const ScenarioConfig& cfg, int point_index,
                            double ebn0_db, int frame_index);

struct ErrorStats {
  std::uint64_t bit_errors = 0;
  std::uint64_t frame_errors = 0;
  std::uint64_t bits_counted = 0;
  std::uint64_t frames_counted = 0;
  double ber = 0.0;
  double fer = 0.0;
  /// Half-width of the normal-approximation 95% interval on the BER, using
  /// the frame as the sampling unit.
  double ci95_ber = 0.0;

  static ErrorStats from_frames(std::span<const std::uint32_t> bit_errors, std::uint64_t bits_per_frame);
};

struct PointResult {
  Scenario scenario = Scenario::ProposedEm;
  double ebn0_db = 0.0;
  double phn_var = 0.0;
  int em_iter = 1;
  ErrorStats stats;
  Seed seed = 0;
};

struct PointFrames {
  double ebn0_db = 0.0;
  /// bit_errors[frame][round]
  std::vector<std::vector<std::uint32_t>> bit_errors;
};

struct MonteCarloResult {
  ScenarioConfig config;
  int info_bits = 0;
  std::vector<PointResult> rows;   // one per (point, round)
  std::vector<PointFrames> frames; // one per point
  bool interrupted = false;
};

/// Set by a signal handler to stop a run; finished frames are still reported.
std::atomic<bool>& interrupt_flag();

MonteCarloResult run_monte_carlo(const ScenarioConfig& cfg);
MonteCarloResult run_monte_carlo(const ScenarioConfig& cfg, const SimContext& ctx);

/// Results table text (header plus one row per (point, round)).
std::string results_csv(const MonteCarloResult& r);
std::string manifest_json(const MonteCarloResult& r, const SimContext& ctx);

/// Writes `<stem>.csv` and `<stem>.manifest.json`.
void emit_results(const MonteCarloResult& r, const SimContext& ctx, const std::filesystem::path& stem);

std::string scenario_to_json(const ScenarioConfig& cfg);
/// Fields absent from the text keep their current values in `base`.
ScenarioConfig scenario_from_json(const std::string& text, ScenarioConfig base = {});

/// EKFS against the grid-search MAP oracle on short known-symbol frames.
struct OracleCheckConfig {
  int trials = 100;
  int frame_len = 8;
  int num_tx = 2;
  int num_rx = 2;
  int modulation_order = 16;
  double ebn0_db = 25.0;
  double phn_var = 5e-5;
  double rician_factor_db = 2.0;
  MapOracleConfig oracle{1e-2, 16};
  double tolerance = 0.05;
  Seed seed = 7;
};

struct OracleCheckResult {
  std::vector<double> max_abs_diff;  // per trial, over components and instants
  int agreeing = 0;
  double fraction() const {
    return max_abs_diff.empty() ? 0.0 : static_cast<double>(agreeing) / max_abs_diff.size();
  }
};

OracleCheckResult run_oracle_check(const OracleCheckConfig& cfg);

inline constexpr const char* kVersion = "0.1.0";

}  // namespace phn
