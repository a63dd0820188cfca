#pragma once

#include "ccgas/network.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace ccgas {

/// 64-bit FNV-1a hash.
std::uint64_t fnv1a(std::string_view data);
std::string hex64(std::uint64_t v);

/// Comment line carried by every output file.
std::string provenance_line(std::string_view config_hash, std::uint64_t seed);

/// Number formatting shared by all CSV files (10 significant digits, −0 folded to 0).
std::string fmt_num(double v);

/// One row of the run summary, one column per headline metric.
struct SummaryRow {
  std::string label;
  double expected_cost = 0.0;
  double pressure_variance = 0.0;  // Σ Var[√π̃_n]
  double flow_variance = 0.0;      // Σ Var[φ̃_ℓ]
  double compressor_regulation = 0.0;  // Σ √κ over compressors
  double valve_regulation = 0.0;       // Σ √|κ| over valves
  double infeasibility_pct = -1.0;     // joint violation frequency in %, −1 when not evaluated
  double p_inj = -1.0;
  double p_act = -1.0;
};

std::string summary_csv(const std::vector<SummaryRow>& rows, std::string_view config_hash, std::uint64_t seed);

/// Σ √κ over compressors and Σ √|κ| over valves.
std::pair<double, double> regulation_totals(const GasNetwork& net, const VectorXd& regulation);

/// Generic numeric table: header names and equal-length columns.
std::string table_csv(const std::vector<std::string>& header, const std::vector<std::vector<std::string>>& rows,
                      std::string_view config_hash, std::uint64_t seed);

void write_text(const std::filesystem::path& path, std::string_view text);

}  // namespace ccgas
