// Batch front end: solve, price and validate chance-constrained gas network
// policies, writing JSON and CSV reports.

#include "ccgas/error.hpp"
#include "ccgas/linearization.hpp"
#include "ccgas/network.hpp"
#include "ccgas/policy.hpp"
#include "ccgas/pricing.hpp"
#include "ccgas/report.hpp"
#include "ccgas/steady_state.hpp"
#include "ccgas/uncertainty.hpp"
#include "ccgas/validation.hpp"

#include <CLI11.hpp>
#include <fmt/format.h>
#include <json.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>
#include <sstream>

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace ccgas;

namespace {

enum ExitCode { kOptimal = 0, kInfeasible = 2, kUnbounded = 3, kNonConvergent = 4, kConfigError = 5 };

struct RunConfig {
  std::string network;
  std::string mode = "cc";
  double eps = 0.05;
  double psi_pi = 0.0;
  double psi_phi = 0.0;
  std::string mask = "all";
  std::string dist = "gaussian";
  Index samples = 1000;
  std::uint64_t seed = 1;
  double p = 0.0, v = 0.0;  // error bound probability/confidence, both zero = skip
  bool projection = true;
  std::vector<double> sweep_psi_pi, sweep_psi_phi;
  unsigned threads = 0;
  double perturb_duals = 0.0;
  std::string out;
};

std::string read_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw ParseError("cli", "cannot read '" + path + "'");
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

std::string config_hash(const RunConfig& c, std::string_view command) {
  std::string key = fmt::format("{}|{}|{:.17g}|{:.17g}|{:.17g}|{}|{}|{}|{:.17g}|{:.17g}|{}|{:.17g}|", command, c.mode,
                                c.eps, c.psi_pi, c.psi_phi, c.mask, c.dist, c.samples, c.p, c.v, c.projection,
                                c.perturb_duals);
  for (double s : c.sweep_psi_pi) key += fmt::format("{:.17g},", s);
  key += '|';
  for (double s : c.sweep_psi_phi) key += fmt::format("{:.17g},", s);
  key += '|' + hex64(fnv1a(read_file(c.network)));
  return hex64(fnv1a(key));
}

// Everything one configuration produces before validation.
struct Solved {
  StationaryPoint point;
  LinearizedModel lin;
  UncertaintyModel unc;
  PolicyOptions options;
  PolicySolution sol;
};

Solved solve_config(const GasNetwork& net, const RunConfig& c, double psi_pi, double psi_phi) {
  if (c.mode != "det" && c.mode != "cc") throw ValidationError("cli", "mode must be 'det' or 'cc'");
  Solved s;
  s.point = solve_deterministic(net);
  s.lin = linearize(s.point, net);
  s.options.mask = policy_mask_from_string(c.mask);
  s.options.psi_pressure = VectorXd::Constant(net.num_nodes(), psi_pi);
  s.options.psi_flow = VectorXd::Constant(net.num_edges(), psi_phi);
  s.unc = budgeted_uncertainty(net, s.lin, c.eps, distribution_from_string(c.dist), s.options.mask,
                               c.mode == "det" ? 0.0 : -1.0);
  s.sol = optimize_policies(net, s.lin, s.unc, s.options);
  return s;
}

int exit_code(const PolicySolution& sol) {
  switch (sol.status) {
    case SolveStatus::optimal: return kOptimal;
    case SolveStatus::infeasible: return kInfeasible;
    case SolveStatus::unbounded: return kUnbounded;
    case SolveStatus::iteration_limit: return kNonConvergent;
  }
  return kNonConvergent;
}

SummaryRow summary_row(const std::string& label, const GasNetwork& net, const Solved& s) {
  SummaryRow r;
  r.label = label;
  r.expected_cost = expected_cost(s.sol, s.unc, net.cost_linear(), net.cost_quadratic());
  const StateStddev sd = state_stddev(s.sol, s.lin, s.unc);
  r.pressure_variance = natural_pressure_variance(s.sol.pressure, sd.pressure).sum();
  r.flow_variance = sd.flow.squaredNorm();
  std::tie(r.compressor_regulation, r.valve_regulation) = regulation_totals(net, s.sol.regulation);
  return r;
}

std::string label_of(const RunConfig& c, double psi_pi, double psi_phi) {
  return fmt::format("{}_eps{}_psipi{}_psiphi{}", c.mode, fmt_num(c.eps), fmt_num(psi_pi), fmt_num(psi_phi));
}

std::string wrap_json(std::string_view hash, std::uint64_t seed, const std::string& key, const std::string& body) {
  json j;
  j["config_hash"] = hash;
  j["seed"] = seed;
  j[key] = json::parse(body);
  return j.dump(2) + "\n";
}

fs::path output_dir(const RunConfig& c) {
  if (!c.out.empty()) return c.out;
  if (const char* env = std::getenv("CCGAS_OUTPUT_DIR"); env && *env) return env;
  return "ccgas_out";
}

std::string stddev_csv(const GasNetwork& net, const Solved& s, std::string_view hash, std::uint64_t seed) {
  const StateStddev sd = state_stddev(s.sol, s.lin, s.unc);
  const VectorXd nat = natural_pressure_variance(s.sol.pressure, sd.pressure);
  std::vector<std::vector<std::string>> rows;
  for (Index n = 0; n < net.num_nodes(); ++n)
    rows.push_back({"node", std::to_string(net.node(n).id), fmt_num(s.sol.pressure(n)), fmt_num(sd.pressure(n)),
                    fmt_num(nat(n))});
  for (Index l = 0; l < net.num_edges(); ++l)
    rows.push_back({"edge", fmt::format("{}-{}", net.edge(l).from, net.edge(l).to), fmt_num(s.sol.flow(l)),
                    fmt_num(sd.flow(l)), fmt_num(sd.flow(l) * sd.flow(l))});
  return table_csv({"element", "id", "nominal", "stddev", "variance"}, rows, hash, seed);
}

int cmd_solve(const RunConfig& c) {
  const GasNetwork net = load_network(c.network);
  const std::string hash = config_hash(c, "solve");
  const Solved s = solve_config(net, c, c.psi_pi, c.psi_phi);
  const fs::path dir = output_dir(c);
  write_text(dir / "point.json", wrap_json(hash, c.seed, "point", serialize_point(s.point)));
  write_text(dir / "policy.json", wrap_json(hash, c.seed, "policy", serialize_policy(s.sol)));
  const int code = exit_code(s.sol);
  if (code != kOptimal) {
    std::cerr << "policy-opt: " << s.sol.message << "\n";
    return code;
  }
  write_text(dir / "summary.csv", summary_csv({summary_row(label_of(c, c.psi_pi, c.psi_phi), net, s)}, hash, c.seed));
  write_text(dir / "stddev.csv", stddev_csv(net, s, hash, c.seed));
  std::cout << fmt::format("status optimal  expected cost {}  (stationary point cost {})\n",
                           fmt_num(expected_cost(s.sol, s.unc, net.cost_linear(), net.cost_quadratic())),
                           fmt_num(s.point.objective));
  return kOptimal;
}

// Seeded noise on the balance prices, used to exercise the dual audit.
void perturb(PolicySolution& sol, double scale, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, scale);
  for (Index i = 0; i < sol.lambda_c.size(); ++i) sol.lambda_c(i) += g(rng);
}

int cmd_price(const RunConfig& c) {
  const GasNetwork net = load_network(c.network);
  const std::string hash = config_hash(c, "price");
  Solved s = solve_config(net, c, c.psi_pi, c.psi_phi);
  if (const int code = exit_code(s.sol); code != kOptimal) {
    std::cerr << "policy-opt: " << s.sol.message << "\n";
    return code;
  }
  if (c.perturb_duals > 0.0) perturb(s.sol, c.perturb_duals, c.seed);
  const RevenueReport rep = revenues(s.sol, s.lin, net, s.unc);
  const AdequacyCheck adequacy = check_revenue_adequacy(rep, s.lin, net);
  const CostRecovery recovery = check_cost_recovery(rep, s.sol, net);
  const StationarityReport kkt = check_stationarity(s.sol, s.lin, net, s.unc, s.options);
  const double identity_tol = 1e-6 * rep.scale();

  const fs::path dir = output_dir(c);
  write_text(dir / "revenue.csv", provenance_line(hash, c.seed) + revenue_csv(rep, net));
  write_text(dir / "revenue.json", wrap_json(hash, c.seed, "revenue", serialize_revenue(rep, net)));

  json audit;
  audit["config_hash"] = hash;
  audit["seed"] = c.seed;
  audit["adequacy_gap"] = rep.adequacy_gap();
  audit["identity_residual"] = rep.identity_residual();
  audit["identity_ok"] = std::abs(rep.identity_residual()) <= identity_tol;
  audit["adequacy_holds"] = adequacy.holds;
  audit["adequacy_conditions_met"] = adequacy.conditions_met;
  audit["profits_nonnegative"] = recovery.all_nonnegative;
  audit["violated_conditions"] = recovery.violated_conditions;
  json blocks = json::object();
  for (const auto& [name, r] : kkt.blocks) blocks[name] = r;
  audit["stationarity"] = blocks;
  audit["stationarity_ok"] = kkt.max() <= 1e-6;
  json agents = json::array();
  for (const AgentProfit& a : recovery.agents)
    agents.push_back({{"agent", a.supplier ? "supplier" : "active_edge"},
                      {"id", a.supplier ? std::to_string(net.node(a.index).id)
                                        : fmt::format("{}-{}", net.edge(a.index).from, net.edge(a.index).to)},
                      {"revenue", a.revenue},
                      {"cost", a.cost},
                      {"profit", a.profit}});
  audit["agents"] = agents;
  write_text(dir / "audit.json", audit.dump(2) + "\n");

  for (const std::string& cond : recovery.violated_conditions) std::cerr << "pricing: condition not met: " << cond << "\n";
  if (kkt.max() > 1e-6 || std::abs(rep.identity_residual()) > identity_tol) {
    std::cerr << fmt::format("pricing: dual audit failed (stationarity {:.3e}, identity residual {:.3e})\n",
                             kkt.max(), rep.identity_residual());
    return kNonConvergent;
  }
  std::cout << fmt::format("adequacy gap {}  operator rent {}  linearization surplus {}\n", fmt_num(rep.adequacy_gap()),
                           fmt_num(rep.operator_rent()), fmt_num(rep.linearization_surplus));
  return kOptimal;
}

struct Validated {
  SummaryRow row;
  int code = kOptimal;
};

Validated validate_one(const GasNetwork& net, const RunConfig& c, double psi_pi, double psi_phi, bool projection,
                       Solved* keep = nullptr, ViolationReport* violations = nullptr) {
  Solved s = solve_config(net, c, psi_pi, psi_phi);
  Validated out;
  out.code = exit_code(s.sol);
  out.row.label = label_of(c, psi_pi, psi_phi);
  if (out.code != kOptimal) return out;
  out.row = summary_row(out.row.label, net, s);
  const MatrixXd xi = sample_errors(s.unc, c.samples, c.seed);
  ViolationReport rep = evaluate_policies(s.sol, s.lin, net, xi);
  out.row.infeasibility_pct = 100.0 * rep.joint_frequency;
  if (projection) {
    const ProjectionMetrics pm = projection_metrics(s.sol, net, xi, s.point, {}, c.threads);
    out.row.p_inj = pm.p_inj;
    out.row.p_act = pm.p_act;
  }
  if (violations) *violations = std::move(rep);
  if (keep) *keep = std::move(s);
  return out;
}

int cmd_validate(const RunConfig& c) {
  if (c.samples < 1) throw ValidationError("cli", "-S must be positive");
  const GasNetwork net = load_network(c.network);
  const std::string hash = config_hash(c, "validate");
  const fs::path dir = output_dir(c);

  Solved s;
  ViolationReport viol;
  const Validated base = validate_one(net, c, c.psi_pi, c.psi_phi, c.projection, &s, &viol);
  if (base.code != kOptimal) {
    std::cerr << "policy-opt: " << s.sol.message << "\n";
    return base.code;
  }
  write_text(dir / "summary.csv", summary_csv({base.row}, hash, c.seed));

  std::vector<std::vector<std::string>> rows;
  for (const ConstraintFrequency& f : viol.constraints) {
    const bool on_node = f.kind.rfind("pressure", 0) == 0 || f.kind.rfind("injection", 0) == 0;
    const std::string id = on_node ? std::to_string(net.node(f.index).id)
                                   : fmt::format("{}-{}", net.edge(f.index).from, net.edge(f.index).to);
    rows.push_back({f.kind, id, std::to_string(f.violations), fmt_num(f.frequency)});
  }
  rows.push_back({"joint", "", std::to_string(viol.joint_violations), fmt_num(viol.joint_frequency)});
  write_text(dir / "violations.csv", table_csv({"constraint", "id", "violations", "frequency"}, rows, hash, c.seed));

  const MatrixXd xi = sample_errors(s.unc, c.samples, c.seed);
  const EmpiricalVariance ev = empirical_variances(s.sol, s.lin, xi);
  const StateStddev sd = state_stddev(s.sol, s.lin, s.unc);
  const VectorXd nat = natural_pressure_variance(s.sol.pressure, sd.pressure);
  rows.clear();
  for (Index n = 0; n < net.num_nodes(); ++n)
    rows.push_back({std::to_string(net.node(n).id), fmt_num(nat(n)), fmt_num(ev.natural_pressure(n)),
                    fmt_num(sd.pressure(n) * sd.pressure(n)), fmt_num(ev.pressure(n))});
  write_text(dir / "node_variance.csv",
             table_csv({"node", "var_pressure", "empirical_var_pressure", "var_squared_pressure",
                        "empirical_var_squared_pressure"},
                       rows, hash, c.seed));

  const VectorXd rev = flow_reversal_stats(s.sol, s.lin, xi);
  rows.clear();
  for (Index l = 0; l < net.num_edges(); ++l)
    rows.push_back({fmt::format("{}-{}", net.edge(l).from, net.edge(l).to), std::string(to_string(net.edge(l).kind)),
                    fmt_num(s.sol.flow(l)), fmt_num(sd.flow(l)), fmt_num(rev(l))});
  write_text(dir / "edge_reversal.csv",
             table_csv({"edge", "kind", "flow", "stddev", "reversal_frequency"}, rows, hash, c.seed));

  if (c.p > 0.0 || c.v > 0.0) {
    const std::vector<ErrorBound> bounds =
        error_bounds(s.sol, s.lin, net, s.unc, c.p, c.v, c.seed, s.point, {}, c.threads);
    rows.clear();
    for (const ErrorBound& b : bounds)
      rows.push_back({std::to_string(net.node(b.node).id), std::to_string(b.samples_used), fmt_num(b.t_star),
                      fmt_num(b.t_star_natural), b.certificate_valid ? "1" : "0"});
    write_text(dir / "error_bounds.csv",
               table_csv({"node", "samples", "t_star_squared", "t_star_relative", "certificate_valid"}, rows, hash,
                         c.seed));
  }

  // Sweeps: every configuration is independent, results are written in input order.
  std::vector<std::pair<double, double>> grid;
  for (double a : c.sweep_psi_pi) grid.emplace_back(a, c.psi_phi);
  for (double b : c.sweep_psi_phi) grid.emplace_back(c.psi_pi, b);
  if (!grid.empty()) {
    std::vector<Validated> res(grid.size());
    parallel_for(static_cast<Index>(grid.size()), c.threads, [&](Index i) {
      const auto [a, b] = grid[static_cast<size_t>(i)];
      res[static_cast<size_t>(i)] = validate_one(net, c, a, b, c.projection);
    });
    std::vector<SummaryRow> srows;
    for (const Validated& v : res) srows.push_back(v.row);
    write_text(dir / "sweep.csv", summary_csv(srows, hash, c.seed));
  }

  std::cout << fmt::format("joint violation frequency {}  ({} of {} samples)\n", fmt_num(viol.joint_frequency),
                           viol.joint_violations, viol.samples);
  return kOptimal;
}

void add_common(CLI::App* cmd, RunConfig& c) {
  cmd->add_option("network", c.network, "Network file (JSON)")->required()->check(CLI::ExistingFile);
  cmd->add_option("--mode", c.mode, "det or cc")->check(CLI::IsMember({"det", "cc"}));
  cmd->add_option("--eps", c.eps, "Joint violation probability")->check(CLI::Range(1e-12, 1.0 - 1e-12));
  cmd->add_option("--psi-pi", c.psi_pi, "Pressure variance penalty")->check(CLI::NonNegativeNumber);
  cmd->add_option("--psi-phi", c.psi_phi, "Flow variance penalty")->check(CLI::NonNegativeNumber);
  cmd->add_option("--mask", c.mask, "Recourse assets: injections, injections+compressors, all");
  cmd->add_option("--dist", c.dist, "gaussian or distribution_free");
  cmd->add_option("--seed", c.seed, "Sampling seed");
  cmd->add_option("--threads", c.threads, "Worker threads (0: all cores)");
  cmd->add_option("--out", c.out, "Output directory (default $CCGAS_OUTPUT_DIR or ./ccgas_out)");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Chance-constrained gas network policies"};
  app.require_subcommand(1);
  RunConfig cfg;

  CLI::App* solve_cmd = app.add_subcommand("solve", "Optimize recourse policies");
  add_common(solve_cmd, cfg);

  CLI::App* price_cmd = app.add_subcommand("price", "Revenue decomposition and dual audit");
  add_common(price_cmd, cfg);
  price_cmd->add_option("--perturb-duals", cfg.perturb_duals, "Add seeded noise of this size to balance prices")
      ->check(CLI::NonNegativeNumber);

  CLI::App* validate_cmd = app.add_subcommand("validate", "Out-of-sample evaluation");
  add_common(validate_cmd, cfg);
  validate_cmd->add_option("-S,--samples", cfg.samples, "Number of realizations");
  validate_cmd->add_option("--p", cfg.p, "Error bound violation probability");
  validate_cmd->add_option("--v", cfg.v, "Error bound confidence parameter");
  validate_cmd->add_flag("!--no-projection", cfg.projection, "Skip the non-convex projection metrics");
  validate_cmd->add_option("--sweep-psi-pi", cfg.sweep_psi_pi, "Pressure penalties to sweep")->delimiter(',');
  validate_cmd->add_option("--sweep-psi-phi", cfg.sweep_psi_phi, "Flow penalties to sweep")->delimiter(',');

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kConfigError;
  }

  try {
    if (*solve_cmd) return cmd_solve(cfg);
    if (*price_cmd) return cmd_price(cfg);
    return cmd_validate(cfg);
  } catch (const InfeasibleError& e) {
    std::cerr << e.what() << "\n";
    return kInfeasible;
  } catch (const UnboundedError& e) {
    std::cerr << e.what() << "\n";
    return kUnbounded;
  } catch (const ConvergenceError& e) {
    std::cerr << e.what() << "\n";
    return kNonConvergent;
  } catch (const DegenerateError& e) {
    std::cerr << e.what() << "\n";
    return kNonConvergent;
  } catch (const Error& e) {
    std::cerr << e.what() << "\n";
    return kConfigError;
  } catch (const std::exception& e) {
    std::cerr << "cli: " << e.what() << "\n";
    return kConfigError;
  }
}
