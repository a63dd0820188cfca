#include "ccgas/validation.hpp"

#include "ccgas/error.hpp"

#include <boost/math/distributions/beta.hpp>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <mutex>
#include <thread>

namespace ccgas {

namespace {

const char* kModule = "validation";

bool exceeds(double value, double limit, double tol) { return value > limit + tol * (1.0 + std::abs(limit)); }

}  // namespace

void parallel_for(Index count, unsigned threads, const std::function<void(Index)>& f) {
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = static_cast<unsigned>(std::min<Index>(threads, std::max<Index>(count, 1)));
  if (threads <= 1) {
    for (Index i = 0; i < count; ++i) f(i);
    return;
  }
  std::atomic<Index> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  for (unsigned t = 0; t < threads; ++t)
    pool.emplace_back([&] {
      for (Index i = next++; i < count; i = next++) {
        try {
          f(i);
        } catch (...) {
          std::lock_guard lock(error_mutex);
          if (!error) error = std::current_exception();
        }
      }
    });
  for (auto& th : pool) th.join();
  if (error) std::rethrow_exception(error);
}

std::pair<double, double> binomial_interval(Index k, Index n, double confidence) {
  if (n <= 0 || k < 0 || k > n) throw ValidationError(kModule, "binomial interval needs 0 <= k <= n, n > 0");
  const double a = 1.0 - confidence;
  const double lo = k == 0 ? 0.0
                           : boost::math::quantile(boost::math::beta_distribution<>(static_cast<double>(k),
                                                                                     static_cast<double>(n - k + 1)),
                                                   a / 2.0);
  const double hi = k == n ? 1.0
                           : boost::math::quantile(boost::math::beta_distribution<>(static_cast<double>(k + 1),
                                                                                     static_cast<double>(n - k)),
                                                   1.0 - a / 2.0);
  return {lo, hi};
}

VectorXd policy_injection(const PolicySolution& sol, const VectorXd& xi) { return sol.injection + sol.alpha * xi; }
VectorXd policy_regulation(const PolicySolution& sol, const VectorXd& xi) { return sol.regulation + sol.beta * xi; }

ViolationReport evaluate_policies(const PolicySolution& sol, const LinearizedModel& lin, const GasNetwork& net,
                                  const MatrixXd& samples, double tol, double confidence) {
  const Index N = net.num_nodes();
  if (samples.rows() != N) throw DimensionError(kModule, "samples must have one row per node");
  if (samples.cols() < 1) throw ValidationError(kModule, "at least one sample is needed");
  const Index S = samples.cols();
  const MatrixXd Mp = pressure_response(lin, sol.alpha, sol.beta) * samples;
  const MatrixXd Mf = flow_response(lin, sol.alpha, sol.beta) * samples;
  const MatrixXd Ta = sol.alpha * samples;
  const MatrixXd Kb = sol.beta * samples;

  ViolationReport rep;
  rep.samples = S;
  rep.violated_per_sample.assign(static_cast<size_t>(S), 0);
  auto track = [&](std::string kind, Index idx, auto violated) {
    ConstraintFrequency c{std::move(kind), idx, 0, 0.0};
    for (Index s = 0; s < S; ++s)
      if (violated(s)) {
        ++c.violations;
        ++rep.violated_per_sample[static_cast<size_t>(s)];
      }
    c.frequency = static_cast<double>(c.violations) / static_cast<double>(S);
    rep.constraints.push_back(std::move(c));
  };
  for (Index n = 0; n < N; ++n) {
    const Node& nd = net.node(n);
    track("pressure_max", n, [&](Index s) { return exceeds(sol.pressure(n) + Mp(n, s), nd.pressure_max, tol); });
    track("pressure_min", n, [&](Index s) { return exceeds(nd.pressure_min, sol.pressure(n) + Mp(n, s), tol); });
  }
  for (Index l : net.active_edges())
    track("flow_min", l, [&](Index s) { return exceeds(0.0, sol.flow(l) + Mf(l, s), tol); });
  for (Index n : net.suppliers()) {
    const Node& nd = net.node(n);
    track("injection_max", n, [&](Index s) { return exceeds(sol.injection(n) + Ta(n, s), nd.injection_max, tol); });
    track("injection_min", n, [&](Index s) { return exceeds(nd.injection_min, sol.injection(n) + Ta(n, s), tol); });
  }
  for (Index l : net.active_edges()) {
    const Edge& e = net.edge(l);
    track("regulation_max", l, [&](Index s) { return exceeds(sol.regulation(l) + Kb(l, s), e.kappa_max, tol); });
    track("regulation_min", l, [&](Index s) { return exceeds(e.kappa_min, sol.regulation(l) + Kb(l, s), tol); });
  }
  for (Index v : rep.violated_per_sample) rep.joint_violations += v > 0 ? 1 : 0;
  rep.joint_frequency = static_cast<double>(rep.joint_violations) / static_cast<double>(S);
  std::tie(rep.joint_ci_low, rep.joint_ci_high) = binomial_interval(rep.joint_violations, S, confidence);
  return rep;
}

ProjectionSample project_realization(const GasNetwork& net, const VectorXd& injection, const VectorXd& regulation,
                                     const VectorXd& xi, const std::optional<StationaryPoint>& fallback,
                                     const SlpOptions& options) {
  if (xi.size() != net.num_nodes()) throw DimensionError(kModule, "error realisation has the wrong size");
  ProjectionSample out;
  try {
    const ProjectionResult r =
        project_controls(net, net.extraction_mean() + xi, injection, regulation, fallback, options);
    out.converged = r.converged;
    out.used_fallback = r.used_fallback;
    out.point = r.point;
    out.distance = r.distance;
    if (r.converged) {
      out.injection_gap = (injection - r.point.injection).norm();
      out.regulation_gap = (regulation - r.point.regulation).norm();
    }
  } catch (const Error&) {
    out.converged = false;
  }
  return out;
}

ProjectionMetrics projection_metrics(const PolicySolution& sol, const GasNetwork& net, const MatrixXd& samples,
                                     const std::optional<StationaryPoint>& fallback, const SlpOptions& options,
                                     unsigned threads) {
  if (samples.rows() != net.num_nodes()) throw DimensionError(kModule, "samples must have one row per node");
  const Index S = samples.cols();
  std::vector<ProjectionSample> res(static_cast<size_t>(S));
  parallel_for(S, threads, [&](Index s) {
    const VectorXd xi = samples.col(s);
    res[static_cast<size_t>(s)] =
        project_realization(net, policy_injection(sol, xi), policy_regulation(sol, xi), xi, fallback, options);
  });
  ProjectionMetrics m;
  m.samples = S;
  Index ok = 0;
  for (const ProjectionSample& r : res) {
    if (!r.converged) {
      ++m.failures;
      m.distances.push_back(std::numeric_limits<double>::quiet_NaN());
      continue;
    }
    ++ok;
    m.distances.push_back(r.distance);
    m.p_inj += r.injection_gap;
    m.p_act += r.regulation_gap;
    if (r.distance == 0.0) ++m.feasible;
  }
  if (ok > 0) {
    m.p_inj /= static_cast<double>(ok);
    m.p_act /= static_cast<double>(ok);
  }
  const double ti = sol.injection.norm(), ka = sol.regulation.norm();
  m.p_inj_relative = ti > 0.0 ? m.p_inj / ti : 0.0;
  m.p_act_relative = ka > 0.0 ? m.p_act / ka : 0.0;
  return m;
}

Index sample_complexity(double p, double v) {
  if (!(p > 0.0 && p < 1.0 && v > 0.0 && v < 1.0)) throw ValidationError(kModule, "p and v must lie in (0,1)");
  const double bound = 1.0 / (p * v) - 1.0;
  Index S = static_cast<Index>(std::ceil(bound - 1e-9));
  if (static_cast<double>(S) < bound - 1e-9) ++S;
  return std::max<Index>(S, 1);
}

std::vector<ErrorBound> error_bounds(const PolicySolution& sol, const LinearizedModel& lin, const GasNetwork& net,
                                     const UncertaintyModel& unc, double p, double v, std::uint64_t seed,
                                     const std::optional<StationaryPoint>& fallback, const SlpOptions& options,
                                     unsigned threads) {
  const Index N = net.num_nodes();
  const Index S = sample_complexity(p, v);
  const MatrixXd xi = sample_errors(unc, S, seed);
  const MatrixXd predicted =
      (pressure_response(lin, sol.alpha, sol.beta) * xi).colwise() + sol.pressure;

  std::vector<ProjectionSample> res(static_cast<size_t>(S));
  parallel_for(S, threads, [&](Index s) {
    const VectorXd e = xi.col(s);
    res[static_cast<size_t>(s)] =
        project_realization(net, policy_injection(sol, e), policy_regulation(sol, e), e, fallback, options);
  });

  std::vector<ErrorBound> out(static_cast<size_t>(N));
  Index failures = 0;
  for (const ProjectionSample& r : res) failures += r.converged ? 0 : 1;
  for (Index n = 0; n < N; ++n) {
    ErrorBound& b = out[static_cast<size_t>(n)];
    b.node = n;
    b.samples_used = S;
    b.failures = failures;
    b.certificate_valid = failures == 0;
    if (failures > 0) {
      b.message = std::to_string(failures) + " projection(s) failed; no certificate";
      continue;
    }
    const double nominal = std::sqrt(std::max(sol.pressure(n), 0.0));
    for (Index s = 0; s < S; ++s) {
      const double actual = res[static_cast<size_t>(s)].point.pressure(n);
      const double lin_p = predicted(n, s);
      b.t_star = std::max(b.t_star, std::abs(lin_p - actual));
      if (nominal > 0.0)
        b.t_star_natural = std::max(
            b.t_star_natural,
            std::abs(std::sqrt(std::max(lin_p, 0.0)) - std::sqrt(std::max(actual, 0.0))) / nominal);
    }
  }
  return out;
}

ErrorBound error_bound(Index node, const PolicySolution& sol, const LinearizedModel& lin, const GasNetwork& net,
                       const UncertaintyModel& unc, double p, double v, std::uint64_t seed,
                       const std::optional<StationaryPoint>& fallback, const SlpOptions& options, unsigned threads) {
  if (node < 0 || node >= net.num_nodes()) throw DimensionError(kModule, "node index out of range");
  return error_bounds(sol, lin, net, unc, p, v, seed, fallback, options, threads)[static_cast<size_t>(node)];
}

VectorXd flow_reversal_stats(const PolicySolution& sol, const LinearizedModel& lin, const MatrixXd& samples) {
  const MatrixXd Mf = flow_response(lin, sol.alpha, sol.beta) * samples;
  const Index E = Mf.rows(), S = samples.cols();
  if (S < 1) throw ValidationError(kModule, "at least one sample is needed");
  VectorXd out = VectorXd::Zero(E);
  auto sign = [](double x) { return (x > 0.0) - (x < 0.0); };
  for (Index l = 0; l < E; ++l) {
    const int s0 = sign(sol.flow(l));
    Index k = 0;
    for (Index s = 0; s < S; ++s) k += sign(sol.flow(l) + Mf(l, s)) != s0 ? 1 : 0;
    out(l) = static_cast<double>(k) / static_cast<double>(S);
  }
  return out;
}

EmpiricalVariance empirical_variances(const PolicySolution& sol, const LinearizedModel& lin,
                                      const MatrixXd& samples) {
  const Index S = samples.cols();
  if (S < 2) throw ValidationError(kModule, "variance needs at least two samples");
  auto var_rows = [S](const MatrixXd& X) {
    const VectorXd mean = X.rowwise().mean();
    return VectorXd(((X.colwise() - mean).rowwise().squaredNorm()) / static_cast<double>(S - 1));
  };
  const MatrixXd P = (pressure_response(lin, sol.alpha, sol.beta) * samples).colwise() + sol.pressure;
  const MatrixXd F = (flow_response(lin, sol.alpha, sol.beta) * samples).colwise() + sol.flow;
  EmpiricalVariance v;
  v.pressure = var_rows(P);
  v.natural_pressure = var_rows(P.cwiseMax(0.0).cwiseSqrt());
  v.flow = var_rows(F);
  return v;
}

VectorXd natural_pressure_variance(const VectorXd& pressure, const VectorXd& std_pressure) {
  if (pressure.size() != std_pressure.size()) throw DimensionError(kModule, "pressure and stddev sizes differ");
  VectorXd out(pressure.size());
  for (Index n = 0; n < pressure.size(); ++n)
    out(n) = pressure(n) > 0.0 ? std_pressure(n) * std_pressure(n) / (4.0 * pressure(n)) : 0.0;
  return out;
}

}  // namespace ccgas
