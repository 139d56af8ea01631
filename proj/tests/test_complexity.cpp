#include "phn/complexity.hpp"

#include "phn/common.hpp"

#include <doctest.h>

#include <cmath>

using namespace phn;

namespace {

ComplexityParams reference(int antennas, FormulaReading reading) {
  ComplexityParams p;
  p.num_tx = p.num_rx = antennas;
  p.reading = reading;
  return p;
}

bool within(long double value, double target, double rel) {
  return std::abs(static_cast<double>(value) / target - 1.0) <= rel;
}

}  // namespace

TEST_CASE("reference table under the table-consistent reading") {
  struct Row {
    int antennas;
    double map, ekfs;
  };
  for (const Row& row : {Row{2, 2.81e17, 3.44e8}, Row{4, 7.36e21, 4.47e12}, Row{8, 6.20e31, 1.89e22}}) {
    CAPTURE(row.antennas);
    const auto r = complexity(reference(row.antennas, FormulaReading::TableConsistent));
    CHECK(within(r.c_map(), row.map, 0.01));
    CHECK(within(r.c_ekfs(), row.ekfs, 0.01));
  }
}

TEST_CASE("ratio for 4x4") {
  const auto r = complexity(reference(4, FormulaReading::TableConsistent));
  CHECK(within(r.c_map() / r.c_ekfs(), 1.6e9, 0.05));
}

TEST_CASE("as-printed reading differs only in the documented alpha terms") {
  for (int a : {2, 3, 4}) {
    const ComplexityParams p = reference(a, FormulaReading::AsPrinted);
    const ComplexityParams q = reference(a, FormulaReading::TableConsistent);
    const AlphaCost ap = complexity_alpha(p);
    const AlphaCost tc = complexity_alpha(q);
    const long double cands = std::pow(16.0L, a);
    const long double per = std::pow(16.0L, a - 1);
    // Extra equalizer products (N_t - 1) M^(N_t-1) and decoder products L_dec N_var.
    CHECK(ap.mult - tc.mult == doctest::Approx(static_cast<double>(cands * ((a - 1) * per + 4))));
    CHECK(ap.add == tc.add);
    CHECK(complexity_map(p).c_map() > complexity_map(q).c_map());
  }
}

TEST_CASE("2x2 alpha cost by hand") {
  // Table-consistent, N_t = N_r = 2, M = 16: 256 candidates.
  //  mult: 2*256 + 256*((4+2+3) + (2*4+2) + (16 + 2 + (8*4)))
  //  add:  2*255 + 256*((4+2-1) + (15 + (7 + 63)))
  const AlphaCost c = complexity_alpha(reference(2, FormulaReading::TableConsistent));
  CHECK(c.mult == doctest::Approx(512.0 + 256.0 * (9 + 10 + 50)));
  CHECK(c.add == doctest::Approx(510.0 + 256.0 * (5 + 85)));
}

TEST_CASE("scaling with frame length") {
  ComplexityParams p = reference(2, FormulaReading::TableConsistent);
  const auto a = complexity(p);
  p.frame_len *= 2;
  const auto b = complexity(p);
  CHECK(static_cast<double>(b.c_ekfs() / a.c_ekfs()) == doctest::Approx(2.0));
  // MAP cost grows as L_f^2 to leading order.
  CHECK(static_cast<double>(b.c_map() / a.c_map()) == doctest::Approx(4.0).epsilon(1e-3));
  CHECK(a.c_map() == a.c_map_mult + a.c_map_add);
  CHECK(a.c_ekfs() == a.c_ekfs_mult + a.c_ekfs_add);
}

TEST_CASE("parameter validation and parsing") {
  ComplexityParams p;
  p.frame_len = 0;
  CHECK_THROWS_AS(complexity(p), ConfigError);
  p = {};
  p.grid_step = 0.0;
  CHECK_THROWS_AS(complexity_map(p), ConfigError);
  CHECK(parse_formula_reading("as-printed") == FormulaReading::AsPrinted);
  CHECK(parse_formula_reading(to_string(FormulaReading::TableConsistent)) == FormulaReading::TableConsistent);
  CHECK_THROWS_AS(parse_formula_reading("strict"), ConfigError);
}
