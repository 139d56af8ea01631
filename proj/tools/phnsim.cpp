#include "phn/complexity.hpp"
#include "phn/dump.hpp"
#include "phn/harness.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <csignal>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

using namespace phn;
namespace fs = std::filesystem;

namespace {

extern "C" void on_interrupt(int) { interrupt_flag().store(true); }

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw ConfigError("cannot read " + p.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::ofstream open_out(const fs::path& p) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + p.string());
  return out;
}

int env_threads() {
  const char* v = std::getenv("PHN_THREADS");
  if (!v || !*v) return 0;
  char* end = nullptr;
  const long n = std::strtol(v, &end, 10);
  if (*end != '\0' || n < 0) throw ConfigError("PHN_THREADS must be a non-negative integer");
  return static_cast<int>(n);
}

/// Regenerates one frame of the first grid point and writes every trace.
void dump_frame(const SimContext& ctx, const ScenarioConfig& cfg, int frame, const fs::path& dir) {
  fs::create_directories(dir);
  const FrameData d = generate_frame(ctx, cfg, 0, cfg.ebn0_grid_db.front(), frame);
  const EmConfig em = em_config_for(cfg);
  {
    auto out = open_out(dir / "phn.csv");
    write_phn_csv(out, d.phn);
  }
  {
    auto out = open_out(dir / "txframe.csv");
    write_txframe_csv(out, d.tx);
  }
  const EmResult r = run_em(d.y, d.h, ctx.layout, ctx.code, ctx.il, ctx.cst, em, &d.tx.info_bits);
  {
    auto out = open_out(dir / "em.jsonl");
    write_em_jsonl(out, r.history);
  }
  {
    auto out = open_out(dir / "ekfs.csv");
    write_ekfs_csv(out, r.last_track);
  }
  {
    std::vector<DetectorIterationRecord> all;
    for (const auto& rec : r.history) all.insert(all.end(), rec.detector_history.begin(), rec.detector_history.end());
    auto out = open_out(dir / "detector.csv");
    write_detector_csv(out, all);
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Iterative MIMO receiver with phase-noise tracking: Monte-Carlo simulation and tools"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kVersion);

  // simulate
  auto* sim = app.add_subcommand("simulate", "Run a Monte-Carlo BER/FER sweep");
  ScenarioConfig cfg;
  std::string config_path, out_stem = "results", scenario_name, dump_dir, export_alist;
  std::vector<double> ebn0;
  int dump_index = 0;
  bool print_config = false;
  sim->add_option("--config", config_path, "JSON configuration; command-line flags override it")
      ->check(CLI::ExistingFile);
  sim->add_option("--scenario", scenario_name, "proposed_em | no_tracking | disjoint | no_phn");
  sim->add_option("--ebn0", ebn0, "E_b/N_0 grid in dB (repeat or comma-separate)")->delimiter(',');
  sim->add_option("--phn-var", cfg.phn_var, "Per-oscillator Wiener increment variance");
  sim->add_option("--em-iters", cfg.em_iters, "EM iterations (detector passes for fixed-phase scenarios)");
  sim->add_option("--pilot-spacing", cfg.pilot_spacing, "Pilot every p-th instant; 0 disables pilots");
  sim->add_flag("--exact-increment-cov", cfg.exact_increment_cov, "Structured increment covariance in the tracker");
  sim->add_option("--block-len", cfg.block_len, "LDPC block length");
  sim->add_option("--var-degree", cfg.var_degree, "LDPC column weight");
  sim->add_option("--check-degree", cfg.check_degree, "LDPC row weight");
  sim->add_option("--code-seed", cfg.code_seed, "LDPC construction and interleaver seed");
  sim->add_option("--alist", cfg.alist_path, "Import the parity-check matrix from an alist file")
      ->check(CLI::ExistingFile);
  sim->add_option("--export-alist", export_alist, "Write the parity-check matrix in alist format");
  sim->add_option("--modulation-order", cfg.modulation_order, "Square QAM order M");
  sim->add_option("--num-tx", cfg.num_tx, "Transmit antennas");
  sim->add_option("--num-rx", cfg.num_rx, "Receive antennas");
  sim->add_option("--rician-db", cfg.rician_factor_db, "Rician factor in dB");
  sim->add_option("--channel-var", cfg.channel_var, "Per-entry channel variance");
  sim->add_option("--eq-sm-iters", cfg.eq_sm_iters, "Equalizer/soft-modem iterations");
  sim->add_option("--dm-dc-iters", cfg.dm_dc_iters, "Demapper/decoder iterations");
  sim->add_option("--dec-iters", cfg.dec_iters, "Sum-product iterations");
  sim->add_option("--frames", cfg.frames_per_point, "Frames per E_b/N_0 point");
  sim->add_option("--min-errors", cfg.min_errors, "Continue until this many bit errors (0 disables)");
  sim->add_option("--max-frames", cfg.max_frames, "Frame cap when --min-errors is active");
  sim->add_option("--seed", cfg.base_seed, "Base seed");
  sim->add_option("--threads", cfg.threads, "Worker threads (default: PHN_THREADS, else all cores)");
  sim->add_option("--out", out_stem, "Output stem: writes <stem>.csv and <stem>.manifest.json");
  sim->add_option("--dump-frame", dump_dir, "Write per-frame traces of one EM run into this directory");
  sim->add_option("--dump-index", dump_index, "Frame index for --dump-frame");
  sim->add_flag("--print-config", print_config, "Print the effective configuration as JSON and exit");

  // complexity
  auto* cx = app.add_subcommand("complexity", "Operation counts of the MAP grid search and the EKFS");
  ComplexityParams cp;
  std::string reading = "as-printed";
  bool cx_json = false;
  cx->add_option("--num-tx", cp.num_tx, "Transmit antennas");
  cx->add_option("--num-rx", cp.num_rx, "Receive antennas");
  cx->add_option("--order", cp.order, "Constellation size M");
  cx->add_option("--frame-len", cp.frame_len, "Frame length L_f");
  cx->add_option("--grid-step", cp.grid_step, "MAP grid step in rad");
  cx->add_option("--ap-cycles", cp.ap_cycles, "Alternating-projection cycles");
  cx->add_option("--eq-sm-iters", cp.eq_sm_iters, "Equalizer/soft-modem iterations");
  cx->add_option("--dm-dc-iters", cp.dm_dc_iters, "Demapper/decoder iterations");
  cx->add_option("--dec-iters", cp.dec_iters, "Sum-product iterations");
  cx->add_option("--var-degree", cp.var_degree, "LDPC column weight");
  cx->add_option("--check-degree", cp.check_degree, "LDPC row weight");
  cx->add_option("--reading", reading, "as-printed | table-consistent");
  cx->add_flag("--json", cx_json, "Emit JSON instead of text");

  // oracle-check
  auto* oc = app.add_subcommand("oracle-check", "Compare EKFS phases with the grid-search MAP oracle");
  OracleCheckConfig occ;
  double min_fraction = 0.0;
  oc->add_option("--trials", occ.trials, "Number of random trials");
  oc->add_option("--frame-len", occ.frame_len, "Known-symbol frame length");
  oc->add_option("--num-tx", occ.num_tx, "Transmit antennas");
  oc->add_option("--num-rx", occ.num_rx, "Receive antennas");
  oc->add_option("--modulation-order", occ.modulation_order, "Square QAM order M");
  oc->add_option("--ebn0", occ.ebn0_db, "E_b/N_0 in dB");
  oc->add_option("--phn-var", occ.phn_var, "Per-oscillator Wiener increment variance");
  oc->add_option("--rician-db", occ.rician_factor_db, "Rician factor in dB");
  oc->add_option("--grid-step", occ.oracle.grid_step, "Oracle grid step in rad");
  oc->add_option("--ap-cycles", occ.oracle.ap_cycles, "Oracle coordinate-ascent cycles");
  oc->add_option("--tolerance", occ.tolerance, "Agreement tolerance in rad");
  oc->add_option("--seed", occ.seed, "Seed");
  oc->add_option("--min-fraction", min_fraction, "Exit non-zero when the agreeing fraction is below this");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*sim) {
      ScenarioConfig eff;
      if (!config_path.empty()) eff = scenario_from_json(read_file(config_path));
      // Flags given on the command line override the file.
      auto given = [&](const char* name) { return sim->count(name) > 0; };
      if (!scenario_name.empty()) eff.scenario = parse_scenario(scenario_name);
      if (!ebn0.empty()) eff.ebn0_grid_db = ebn0;
      if (given("--phn-var")) eff.phn_var = cfg.phn_var;
      if (given("--em-iters")) eff.em_iters = cfg.em_iters;
      if (given("--pilot-spacing")) eff.pilot_spacing = cfg.pilot_spacing;
      if (given("--exact-increment-cov")) eff.exact_increment_cov = cfg.exact_increment_cov;
      if (given("--block-len")) eff.block_len = cfg.block_len;
      if (given("--var-degree")) eff.var_degree = cfg.var_degree;
      if (given("--check-degree")) eff.check_degree = cfg.check_degree;
      if (given("--code-seed")) eff.code_seed = cfg.code_seed;
      if (given("--alist")) eff.alist_path = cfg.alist_path;
      if (given("--modulation-order")) eff.modulation_order = cfg.modulation_order;
      if (given("--num-tx")) eff.num_tx = cfg.num_tx;
      if (given("--num-rx")) eff.num_rx = cfg.num_rx;
      if (given("--rician-db")) eff.rician_factor_db = cfg.rician_factor_db;
      if (given("--channel-var")) eff.channel_var = cfg.channel_var;
      if (given("--eq-sm-iters")) eff.eq_sm_iters = cfg.eq_sm_iters;
      if (given("--dm-dc-iters")) eff.dm_dc_iters = cfg.dm_dc_iters;
      if (given("--dec-iters")) eff.dec_iters = cfg.dec_iters;
      if (given("--frames")) eff.frames_per_point = cfg.frames_per_point;
      if (given("--min-errors")) eff.min_errors = cfg.min_errors;
      if (given("--max-frames")) eff.max_frames = cfg.max_frames;
      if (given("--seed")) eff.base_seed = cfg.base_seed;
      if (given("--threads")) {
        eff.threads = cfg.threads;
      } else if (const int t = env_threads(); t > 0) {
        eff.threads = t;
      }
      eff.validate();

      if (print_config) {
        std::cout << scenario_to_json(eff) << '\n';
        return 0;
      }

      const SimContext ctx = make_context(eff);
      if (!export_alist.empty()) {
        auto out = open_out(export_alist);
        write_alist(ctx.code, out);
      }
      if (!dump_dir.empty()) dump_frame(ctx, eff, dump_index, dump_dir);

      std::signal(SIGINT, on_interrupt);
      std::signal(SIGTERM, on_interrupt);
      const MonteCarloResult r = run_monte_carlo(eff, ctx);
      if (const fs::path parent = fs::path(out_stem).parent_path(); !parent.empty()) fs::create_directories(parent);
      emit_results(r, ctx, out_stem);
      std::cout << results_csv(r);
      if (r.interrupted) {
        std::cerr << "interrupted: partial results written\n";
        return 130;
      }
      return 0;
    }

    if (*cx) {
      cp.reading = parse_formula_reading(reading);
      const ComplexityReport r = complexity(cp);
      if (cx_json) {
        const nlohmann::json j = {{"reading", to_string(cp.reading)},
                                  {"num_tx", cp.num_tx},
                                  {"num_rx", cp.num_rx},
                                  {"c_alpha_mult", static_cast<double>(r.c_alpha_mult)},
                                  {"c_alpha_add", static_cast<double>(r.c_alpha_add)},
                                  {"c_map_mult", static_cast<double>(r.c_map_mult)},
                                  {"c_map_add", static_cast<double>(r.c_map_add)},
                                  {"c_map", static_cast<double>(r.c_map())},
                                  {"c_ekfs_mult", static_cast<double>(r.c_ekfs_mult)},
                                  {"c_ekfs_add", static_cast<double>(r.c_ekfs_add)},
                                  {"c_ekfs", static_cast<double>(r.c_ekfs())},
                                  {"ratio", static_cast<double>(r.c_map() / r.c_ekfs())}};
        std::cout << j.dump(2) << '\n';
      } else {
        std::printf("reading       %s\n", to_string(cp.reading).c_str());
        std::printf("antennas      %d x %d, M = %d, L_f = %ld\n", cp.num_rx, cp.num_tx, cp.order, cp.frame_len);
        std::printf("C_alpha       %.4Le mult + %.4Le add\n", r.c_alpha_mult, r.c_alpha_add);
        std::printf("C_MAP         %.4Le (%.4Le mult + %.4Le add)\n", r.c_map(), r.c_map_mult, r.c_map_add);
        std::printf("C_EKFS        %.4Le (%.4Le mult + %.4Le add)\n", r.c_ekfs(), r.c_ekfs_mult, r.c_ekfs_add);
        std::printf("C_MAP/C_EKFS  %.4Le\n", r.c_map() / r.c_ekfs());
      }
      return 0;
    }

    if (*oc) {
      const OracleCheckResult r = run_oracle_check(occ);
      double worst = 0.0;
      for (double d : r.max_abs_diff) worst = std::max(worst, d);
      std::printf("trials %d, agreeing %d (%.3f) within %.3g rad, worst %.4g rad\n", occ.trials, r.agreeing,
                  r.fraction(), occ.tolerance, worst);
      return r.fraction() >= min_fraction ? 0 : 1;
    }
  } catch (const ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
