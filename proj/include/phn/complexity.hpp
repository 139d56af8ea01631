#pragma once

#include <string>

namespace phn {

/// Which reading of the operation-count formulas to evaluate.
///  * AsPrinted: every term exactly as written.
///  * TableConsistent: the equalizer contributes M^(N_t-1) multiplications
///    per candidate (not N_t M^(N_t-1)) and the LDPC decoder is counted in
///    additions only. This is the reading that reproduces the published
///    reference table.
enum class FormulaReading { AsPrinted, TableConsistent };

struct ComplexityParams {
  int num_tx = 2;
  int num_rx = 2;
  int order = 16;             // M
  long frame_len = 8176;      // L_f
  double grid_step = 1e-3;    // kappa, rad
  int ap_cycles = 4;          // alternating-projection cycles
  int eq_sm_iters = 1;        // L_eq-sm
  int dm_dc_iters = 1;        // L_dm-dc
  int dec_iters = 1;          // L_dec
  int var_degree = 4;         // N_var
  int check_degree = 32;      // N_check
  FormulaReading reading = FormulaReading::AsPrinted;

  void validate() const;
};

struct ComplexityReport {
  ComplexityParams params;
  long double c_alpha_mult = 0, c_alpha_add = 0;
  long double c_map_mult = 0, c_map_add = 0;
  long double c_ekfs_mult = 0, c_ekfs_add = 0;

  long double c_map() const { return c_map_mult + c_map_add; }
  long double c_ekfs() const { return c_ekfs_mult + c_ekfs_add; }
};

struct AlphaCost {
  long double mult;
  long double add;
};

/// Per-instant cost of producing the soft decision alpha(k).
AlphaCost complexity_alpha(const ComplexityParams& p);

/// Grid-search MAP estimator with alternating projection.
ComplexityReport complexity_map(const ComplexityParams& p);

/// Extended Kalman filter-smoother.
ComplexityReport complexity_ekfs(const ComplexityParams& p);

/// Both estimators in one report.
ComplexityReport complexity(const ComplexityParams& p);

std::string to_string(FormulaReading r);
FormulaReading parse_formula_reading(const std::string& s);

}  // namespace phn
