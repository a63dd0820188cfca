#include "ccgas/report.hpp"

#include "ccgas/error.hpp"

#include <fmt/format.h>

#include <cmath>
#include <fstream>

namespace ccgas {

std::uint64_t fnv1a(std::string_view data) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : data) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex64(std::uint64_t v) { return fmt::format("{:016x}", v); }

std::string provenance_line(std::string_view config_hash, std::uint64_t seed) {
  return fmt::format("# config_hash={} seed={}\n", config_hash, seed);
}

std::string fmt_num(double v) {
  if (std::isnan(v)) return "nan";
  if (v == 0.0) return "0";  // folds −0
  return fmt::format("{:.10g}", v);
}

std::string summary_csv(const std::vector<SummaryRow>& rows, std::string_view config_hash, std::uint64_t seed) {
  std::vector<std::vector<std::string>> body;
  for (const SummaryRow& r : rows)
    body.push_back({r.label, fmt_num(r.expected_cost), fmt_num(r.pressure_variance), fmt_num(r.flow_variance),
                    fmt_num(r.compressor_regulation), fmt_num(r.valve_regulation),
                    r.infeasibility_pct < 0.0 ? "" : fmt_num(r.infeasibility_pct),
                    r.p_inj < 0.0 ? "" : fmt_num(r.p_inj), r.p_act < 0.0 ? "" : fmt_num(r.p_act)});
  return table_csv({"configuration", "expected_cost", "sum_var_pressure", "sum_var_flow", "sum_sqrt_kappa_compressors",
                    "sum_sqrt_kappa_valves", "constraint_infeasibility_pct", "avg_p_inj", "avg_p_act"},
                   body, config_hash, seed);
}

std::pair<double, double> regulation_totals(const GasNetwork& net, const VectorXd& regulation) {
  double c = 0.0, v = 0.0;
  for (Index l : net.compressors()) c += std::sqrt(std::max(regulation(l), 0.0));
  for (Index l : net.valves()) v += std::sqrt(std::abs(std::min(regulation(l), 0.0)));
  return {c, v};
}

std::string table_csv(const std::vector<std::string>& header, const std::vector<std::vector<std::string>>& rows,
                      std::string_view config_hash, std::uint64_t seed) {
  std::string out = provenance_line(config_hash, seed);
  for (size_t i = 0; i < header.size(); ++i) out += (i ? "," : "") + header[i];
  out += '\n';
  for (const auto& row : rows) {
    if (row.size() != header.size()) throw DimensionError("report", "table row has the wrong number of fields");
    for (size_t i = 0; i < row.size(); ++i) out += (i ? "," : "") + row[i];
    out += '\n';
  }
  return out;
}

void write_text(const std::filesystem::path& path, std::string_view text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error("report", "cannot open '" + path.string() + "' for writing");
  f.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!f) throw Error("report", "failed writing '" + path.string() + "'");
}

}  // namespace ccgas
