#include "phn/dump.hpp"
#include "phn/harness.hpp"

#include <doctest.h>
#include <json.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

using namespace phn;

namespace {

ScenarioConfig small(Scenario s) {
  ScenarioConfig c;
  c.scenario = s;
  c.ebn0_grid_db = {16.0, 30.0};
  c.frames_per_point = 6;
  c.em_iters = 2;
  c.threads = 2;
  return c;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("scenario names") {
  for (Scenario s : {Scenario::ProposedEm, Scenario::NoTracking, Scenario::Disjoint, Scenario::NoPhn}) {
    CHECK(parse_scenario(to_string(s)) == s);
  }
  CHECK_THROWS_AS(parse_scenario("oracle"), ConfigError);
}

TEST_CASE("configuration validation") {
  ScenarioConfig c;
  CHECK_NOTHROW(c.validate());
  c.ebn0_grid_db.clear();
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = {};
  c.frames_per_point = 0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = {};
  c.modulation_order = 8;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = {};
  c.scenario = Scenario::Disjoint;
  CHECK(c.rounds() == 1);
  c.scenario = Scenario::NoTracking;
  CHECK(c.rounds() == 3);
}

TEST_CASE("desk context") {
  const SimContext ctx = make_context(ScenarioConfig{});
  CHECK(ctx.code.block_len() == 1024);
  CHECK(ctx.code.info_len() == 897);
  CHECK(ctx.layout.frame_len == 138);
  CHECK(ctx.il.size() == 1024);
}

TEST_CASE("E_b/N_0 mapping measured on generated frames") {
  const ScenarioConfig cfg;
  const SimContext ctx = make_context(cfg);
  const int info = ctx.code.info_len();
  for (double ebn0 : {10.0, 20.0}) {
    const double nv = noise_var_for(ebn0, ctx.layout, info);
    double sig = 0.0, noise = 0.0;
    long samples = 0;
    int frames = 0;
    for (int f = 0; f < 400; ++f) {
      Rng rng(derive_seed(5, f));
      std::bernoulli_distribution coin(0.5);
      BitVector bits(static_cast<std::size_t>(info));
      for (auto& b : bits) b = coin(rng);
      const TxFrame tx = build_frame(bits, ctx.code, ctx.il, ctx.cst, ctx.layout, 1);
      const ChannelMatrix h = ChannelMatrix::Identity(2, 2);
      const ReceivedFrame y =
          apply_channel(tx.symbols, h, PhnTrajectories::zeros(2, 2, ctx.layout.frame_len), nv, derive_seed(6, f));
      sig += tx.symbols.squaredNorm();
      noise += (y.observations - tx.symbols).squaredNorm();
      samples += y.observations.size();
      ++frames;
    }
    // E_b = transmitted energy per info bit, N_0 = measured noise power per sample.
    const double eb = sig / (static_cast<double>(frames) * info);
    const double n0 = noise / static_cast<double>(samples);
    CHECK(std::abs(eb / n0 / db_to_linear(ebn0) - 1.0) < 0.01);
  }
  CHECK_THROWS_AS(noise_var_for(10.0, ctx.layout, 0), ConfigError);
}

TEST_CASE("frame simulation is paired across scenarios") {
  const ScenarioConfig base = small(Scenario::NoPhn);
  const SimContext ctx = make_context(base);
  const FrameOutcome a = simulate_frame(ctx, base, 1, 30.0, 0);
  const FrameOutcome b = simulate_frame(ctx, base, 1, 30.0, 0);
  CHECK(a.bit_errors == b.bit_errors);
  CHECK(a.bit_errors.size() == 2);
  CHECK(a.bit_errors[0] == 0);
  ScenarioConfig em = base;
  em.scenario = Scenario::ProposedEm;
  CHECK(simulate_frame(ctx, em, 1, 30.0, 0).bit_errors.size() == 2);
  em.scenario = Scenario::Disjoint;
  CHECK(simulate_frame(ctx, em, 1, 30.0, 0).bit_errors.size() == 1);
}

TEST_CASE("error statistics") {
  const std::vector<std::uint32_t> e{0, 4, 0, 2};
  const ErrorStats s = ErrorStats::from_frames(e, 100);
  CHECK(s.bit_errors == 6);
  CHECK(s.frame_errors == 2);
  CHECK(s.frames_counted == 4);
  CHECK(s.bits_counted == 400);
  CHECK(s.ber == doctest::Approx(0.015));
  CHECK(s.fer == doctest::Approx(0.5));
  // Frame BERs 0, .04, 0, .02: sample sd = sqrt(((.015)^2*2 + .025^2 + .005^2)/3).
  const double sd = std::sqrt((2 * 0.015 * 0.015 + 0.025 * 0.025 + 0.005 * 0.005) / 3.0);
  CHECK(s.ci95_ber == doctest::Approx(1.96 * sd / 2.0));
  const ErrorStats z = ErrorStats::from_frames({}, 100);
  CHECK(z.ber == 0.0);
  CHECK(z.frames_counted == 0);
}

TEST_CASE("monte carlo runs") {
  const ScenarioConfig cfg = small(Scenario::NoPhn);
  const SimContext ctx = make_context(cfg);
  const MonteCarloResult a = run_monte_carlo(cfg, ctx);
  REQUIRE(a.rows.size() == 4);  // 2 points x 2 rounds
  CHECK(a.frames.size() == 2);
  CHECK(a.frames[0].bit_errors.size() == 6);
  CHECK_FALSE(a.interrupted);
  CHECK(a.info_bits == 897);
  for (const auto& row : a.rows) {
    CHECK(row.stats.frames_counted == 6);
    CHECK(row.stats.ber >= 0.0);
    CHECK(row.stats.ber <= 1.0);
  }
  CHECK(a.rows[2].ebn0_db == 30.0);
  CHECK(a.rows[3].em_iter == 2);
  CHECK(a.rows[3].stats.ber == 0.0);
  CHECK(a.rows[3].stats.fer == 0.0);

  SUBCASE("determinism across thread counts") {
    ScenarioConfig one = cfg;
    one.threads = 1;
    const MonteCarloResult b = run_monte_carlo(one, ctx);
    CHECK(results_csv(b) == results_csv(a));
    for (std::size_t p = 0; p < a.frames.size(); ++p) CHECK(a.frames[p].bit_errors == b.frames[p].bit_errors);
  }
  SUBCASE("results table") {
    const std::string csv = results_csv(a);
    CHECK(csv.rfind("scenario,ebn0_db,phn_var,em_iter,ber,fer,ci95,frames,seed\n", 0) == 0);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 5);
    CHECK(csv.find("no_phn,30,5e-05,2,0,0,0,6,1\n") != std::string::npos);
  }
  SUBCASE("emission is byte-identical") {
    const auto dir = std::filesystem::temp_directory_path() / "phn_harness_test";
    std::filesystem::create_directories(dir);
    emit_results(a, ctx, dir / "first");
    emit_results(a, ctx, dir / "second");
    CHECK(slurp(dir / "first.csv") == slurp(dir / "second.csv"));
    CHECK(slurp(dir / "first.manifest.json") == slurp(dir / "second.manifest.json"));
    const auto m = nlohmann::json::parse(slurp(dir / "first.manifest.json"));
    CHECK(m["version"] == kVersion);
    CHECK(m["code"]["info_len"] == 897);
    CHECK(m["rows"] == 4);
    CHECK(scenario_from_json(m["config"].dump()).frames_per_point == 6);
    std::filesystem::remove_all(dir);
    CHECK_THROWS(emit_results(a, ctx, dir / "missing" / "x"));
  }
}

TEST_CASE("min_errors extends a point up to max_frames") {
  ScenarioConfig cfg = small(Scenario::NoTracking);
  cfg.ebn0_grid_db = {8.0};
  cfg.frames_per_point = 2;
  cfg.min_errors = 1000000;
  cfg.max_frames = 70;
  const MonteCarloResult r = run_monte_carlo(cfg);
  CHECK(r.rows[0].stats.frames_counted == 70);
}

TEST_CASE("configuration JSON") {
  ScenarioConfig c = small(Scenario::Disjoint);
  c.alist_path = "codes/x.alist";
  c.exact_increment_cov = true;
  c.base_seed = 1234567890123ULL;
  const ScenarioConfig back = scenario_from_json(scenario_to_json(c));
  CHECK(scenario_to_json(back) == scenario_to_json(c));
  CHECK(back.scenario == Scenario::Disjoint);
  CHECK(back.ebn0_grid_db == c.ebn0_grid_db);
  CHECK(back.base_seed == c.base_seed);

  const ScenarioConfig partial = scenario_from_json(R"({"em_iters": 5})", c);
  CHECK(partial.em_iters == 5);
  CHECK(partial.scenario == Scenario::Disjoint);
  CHECK_THROWS_AS(scenario_from_json(R"({"em_iter": 5})"), ConfigError);
  CHECK_THROWS_AS(scenario_from_json("{not json"), ConfigError);
  CHECK_THROWS_AS(scenario_from_json(R"({"em_iters": "three"})"), ConfigError);
}

TEST_CASE("diagnostic dumps") {
  SUBCASE("EM lines") {
    EmIterationRecord r;
    r.iteration = 2;
    r.q_value = -12.5;
    r.syndrome_weight = 3;
    r.ber = 0.25;
    std::ostringstream os;
    write_em_jsonl(os, {r, r});
    std::istringstream in(os.str());
    std::string line;
    int n = 0;
    while (std::getline(in, line)) {
      const auto j = nlohmann::json::parse(line);
      CHECK(j["iteration"] == 2);
      CHECK(j["q"] == -12.5);
      CHECK(j["syndrome_weight"] == 3);
      CHECK(j["ber"] == 0.25);
      ++n;
    }
    CHECK(n == 2);
  }
  SUBCASE("detector and tracker tables") {
    std::ostringstream d;
    write_detector_csv(d, {{1, 1, 0.5, 7}});
    CHECK(d.str() == "outer,inner,mi_proxy,syndrome_weight\n1,1,0.5,7\n");

    const ChannelMatrix h = ChannelMatrix::Identity(2, 2);
    const EkfsTrajectory t = run_ekfs(CMatrix::Ones(2, 3), h, CMatrix::Ones(2, 3), EkfsConfig::make(1e-3, 0.1, 2, 2));
    std::ostringstream e;
    write_ekfs_csv(e, t);
    std::istringstream in(e.str());
    std::string header, row;
    std::getline(in, header);
    CHECK(header.rfind("k,", 0) == 0);
    int rows = 0;
    while (std::getline(in, row)) ++rows;
    CHECK(rows == 3);
  }
  SUBCASE("phase and frame tables") {
    const auto phn = generate_phn({1e-3, 4}, 2, 2, 1);
    std::ostringstream p;
    write_phn_csv(p, phn);
    const std::string ps = p.str();
    CHECK(std::count(ps.begin(), ps.end(), '\n') == 5);

    const SimContext ctx = make_context(ScenarioConfig{});
    const TxFrame tx = build_frame(BitVector(897, 0), ctx.code, ctx.il, ctx.cst, ctx.layout, 1);
    std::ostringstream f;
    write_txframe_csv(f, tx);
    const std::string s = f.str();
    CHECK(std::count(s.begin(), s.end(), '\n') == 139);
    CHECK(s.find("1,1,1,0,1,0\n") != std::string::npos);  // first instant is a pilot
  }
}

TEST_CASE("oracle check smoke run") {
  OracleCheckConfig cfg;
  cfg.trials = 3;
  const OracleCheckResult r = run_oracle_check(cfg);
  CHECK(r.max_abs_diff.size() == 3);
  CHECK(r.fraction() >= 0.0);
  cfg.trials = 0;
  CHECK_THROWS_AS(run_oracle_check(cfg), ConfigError);
}
