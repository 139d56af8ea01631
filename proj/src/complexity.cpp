#include "phn/complexity.hpp"

#include "phn/common.hpp"

#include <cmath>
#include <numbers>

namespace phn {

void ComplexityParams::validate() const {
  if (num_tx < 1 || num_rx < 1 || order < 2 || frame_len < 1 || !(grid_step > 0.0) ||
      ap_cycles < 1 || eq_sm_iters < 1 || dm_dc_iters < 1 || dec_iters < 1 || var_degree < 1 ||
      check_degree < 1)
    throw ConfigError("complexity: all parameters must be positive");
}

AlphaCost complexity_alpha(const ComplexityParams& p) {
  p.validate();
  using LD = long double;
  const LD nt = p.num_tx, nr = p.num_rx, m = p.order;
  const LD lg = std::log2(m);
  const LD cands = std::pow(m, nt);
  const LD per_antenna = std::pow(m, nt - 1);
  const LD leq = p.eq_sm_iters, ldm = p.dm_dc_iters, ldec = p.dec_iters;
  const bool table = p.reading == FormulaReading::TableConsistent;

  const LD eq_mult = table ? per_antenna : nt * per_antenna;
  const LD dec_mult = table ? 0.0L : ldec * p.var_degree;
  const LD mult = nt * cands +
                  cands * ((nr * nt + nr + 3) + (nt * lg + 2) +
                           leq * (eq_mult + nt + ldm * (m / 2 * lg + dec_mult)));
  const LD add = nt * (cands - 1) +
                 cands * ((nr * nt + nr - 1) +
                          leq * ((per_antenna - 1) +
                                 ldm * ((m / 2 - 1) + ldec * (2.0L * p.check_degree - 1))));
  return {mult, add};
}

ComplexityReport complexity_map(const ComplexityParams& p) {
  using LD = long double;
  const AlphaCost a = complexity_alpha(p);
  const LD nt = p.num_tx, nr = p.num_rx, lf = static_cast<LD>(p.frame_len);
  const LD sweep = static_cast<LD>(p.ap_cycles) * (nr + nt) * lf *
                   (2.0L * std::numbers::pi_v<long double> / static_cast<LD>(p.grid_step));
  const LD first_m = nr * nt + nr * nr * nt;
  const LD second_m = 2 * nr * nt + nr * nr * nt;
  const LD x_m = nr * nr * nt + nr * nt * nt;
  const LD first_a = nr * nr * (nt - 1) + nr;
  const LD second_a = nr * nr * (nt - 1) + nr * nt;
  const LD x_a = nr * nt * (nr + nt - 2);

  ComplexityReport r;
  r.params = p;
  r.c_alpha_mult = a.mult;
  r.c_alpha_add = a.add;
  r.c_map_mult = sweep * (1 + lf * (first_m + second_m + x_m + a.mult));
  r.c_map_add = sweep * (2 + lf * (first_a + second_a + x_a + a.add));
  return r;
}

ComplexityReport complexity_ekfs(const ComplexityParams& p) {
  using LD = long double;
  const AlphaCost a = complexity_alpha(p);
  const LD nt = p.num_tx, nr = p.num_rx, lf = static_cast<LD>(p.frame_len);
  const LD n = nr + nt - 1;

  const LD gain_m = 2 * n * n * nr + 2 * nr * nr * n + nr * nr * nr;
  const LD jac_m = nr + 5 * nr * (nt - 1);
  const LD state_m = n * (nr + 1);
  const LD cov_m = n * (n * nr + n * n + 1);
  const LD z_m = nr * nr * nt + nr * nt * nt + nr * nt;
  const LD smooth_state_m = n * n + n * n * n;
  const LD smooth_cov_m = 2 * n * n * n;

  const LD predict_a = n;
  const LD gain_a = n * nr * (2 * n + nr - 3) + nr * nr * n + nr * nr * nr;
  const LD state_a = nr * (n + 1);
  const LD cov_a = n * n * (n + nr - 1);
  const LD z_a = nr * nt * (nr + nt - 1) - nr;
  const LD smooth_state_a = n * (n * n + 1);
  const LD smooth_cov_a = n * n * (2 * n + 1);

  ComplexityReport r;
  r.params = p;
  r.c_alpha_mult = a.mult;
  r.c_alpha_add = a.add;
  r.c_ekfs_mult = lf * (gain_m + jac_m + state_m + cov_m + z_m + a.mult + smooth_state_m + smooth_cov_m);
  r.c_ekfs_add = lf * (predict_a + gain_a + state_a + cov_a + z_a + a.add + smooth_state_a + smooth_cov_a);
  return r;
}

ComplexityReport complexity(const ComplexityParams& p) {
  ComplexityReport r = complexity_map(p);
  const ComplexityReport e = complexity_ekfs(p);
  r.c_ekfs_mult = e.c_ekfs_mult;
  r.c_ekfs_add = e.c_ekfs_add;
  return r;
}

std::string to_string(FormulaReading r) {
  return r == FormulaReading::AsPrinted ? "as-printed" : "table-consistent";
}

FormulaReading parse_formula_reading(const std::string& s) {
  if (s == "as-printed") return FormulaReading::AsPrinted;
  if (s == "table-consistent") return FormulaReading::TableConsistent;
  throw ConfigError("complexity: unknown formula reading '" + s + "'");
}

}  // namespace phn
