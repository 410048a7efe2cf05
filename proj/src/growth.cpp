#include "mfg/growth.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace mfg::growth {

void ParetoState::validate() const {
  if (!(k > 0.0 && q > 0.0)) {
    throw DomainError("ParetoState: k and q must be positive");
  }
}

double pareto_tail(const ParetoState& state, double x) {
  state.validate();
  if (!(x > state.q)) return 1.0;
  return std::pow(state.q / x, state.k);
}

double pareto_density(const ParetoState& state, double x) {
  state.validate();
  if (x < state.q) return 0.0;
  return state.k * std::pow(state.q / x, state.k) / x;
}

std::vector<double> propagate_pareto(const ParetoState& state0,
                                     const TimeGrid& grid,
                                     const std::vector<double>& gamma_path,
                                     double sigma,
                                     const std::vector<double>& w0_path) {
  state0.validate();
  const auto nodes = static_cast<std::size_t>(grid.nodes());
  if (gamma_path.size() != nodes || w0_path.size() != nodes) {
    throw DomainError("propagate_pareto: paths must have one value per node");
  }
  for (double g : gamma_path) {
    if (!(g >= 0.0)) throw DomainError("propagate_pareto: gamma must be >= 0");
  }
  const double h = grid.step();
  std::vector<double> q(nodes);
  double integral = 0.0;
  q[0] = state0.q * std::exp(sigma * (w0_path[0]));
  for (std::size_t k = 1; k < nodes; ++k) {
    integral += 0.5 * h * (gamma_path[k - 1] + gamma_path[k]);
    const double t = grid.time(static_cast<int>(k)) - grid.t0();
    q[k] = state0.q *
           std::exp(integral - 0.5 * sigma * sigma * t + sigma * w0_path[k]);
  }
  return q;
}

std::vector<double> simulate_pareto_particles(const ParetoState& state0,
                                              const TimeGrid& grid,
                                              const std::vector<double>& gamma_path,
                                              double sigma,
                                              const std::vector<double>& w0_path,
                                              int n_particles, std::uint64_t seed) {
  state0.validate();
  const auto nodes = static_cast<std::size_t>(grid.nodes());
  if (gamma_path.size() != nodes || w0_path.size() != nodes) {
    throw DomainError("simulate_pareto_particles: one value per node required");
  }
  if (n_particles <= 0) throw DomainError("n_particles must be positive");
  const CounterRng rng(seed);
  const double h = grid.step();
  std::vector<double> out(n_particles);
  for (int i = 0; i < n_particles; ++i) {
    double x = state0.q * std::pow(rng.uniforms(i, 0)[0], -1.0 / state0.k);
    for (int k = 0; k < grid.steps(); ++k) {
      const double dw = w0_path[k + 1] - w0_path[k];
      x += gamma_path[k] * x * h + sigma * x * dw;
    }
    out[i] = x;
  }
  return out;
}

double pareto_ks_distance(std::vector<double> samples, const ParetoState& state) {
  state.validate();
  if (samples.empty()) throw DomainError("pareto_ks_distance: no samples");
  std::sort(samples.begin(), samples.end());
  const double n = samples.size();
  double d = 0.0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const double f = 1.0 - pareto_tail(state, samples[i]);
    d = std::max({d, std::abs((i + 1) / n - f), std::abs(f - i / n)});
  }
  return d;
}

double ks_critical_1pct(int n) { return 1.62762 / std::sqrt(static_cast<double>(n)); }

void GrowthCostParams::validate() const {
  if (!(p_exp > 1.0)) throw DomainError("GrowthCostParams: p must exceed 1");
  if (!(a_exp > 0.0 && b_exp > 0.0 && c_coef > 0.0 && E_coef > 0.0)) {
    throw DomainError("GrowthCostParams: a, b, c and E must be positive");
  }
  if (!(sigma > 0.0)) throw DomainError("GrowthCostParams: sigma must be positive");
}

double growth_running_cost(double x, const ParetoState& state, double alpha,
                           const GrowthCostParams& cost) {
  cost.validate();
  const double density = pareto_density(state, x);
  const double crowding =
      density > 0.0 ? cost.c_coef * std::pow(x, cost.a_exp) /
                          std::pow(density, cost.b_exp)
                    : 0.0;
  return crowding - (cost.E_coef / cost.p_exp) * std::pow(alpha, cost.p_exp) /
                        std::pow(pareto_tail(state, x), cost.b_exp);
}

double growth_best_response(double x, const ParetoState& state, double y,
                            const GrowthCostParams& cost) {
  cost.validate();
  const double ratio = y / cost.E_coef;
  if (ratio < 0.0) {
    throw DomainError("growth_best_response: y/E must be non-negative (y = " +
                      std::to_string(y) + ")");
  }
  const double base = ratio * std::pow(pareto_tail(state, x), cost.b_exp);
  return std::pow(base, 1.0 / (cost.p_exp - 1.0));
}

// ---------------------------------------------------------------------------

void AiyagariParams::validate() const {
  if (!(alpha_cd > 0.0 && alpha_cd < 1.0)) {
    throw DomainError("AiyagariParams: alpha must lie in (0, 1)");
  }
  if (!(gamma_crra > 0.0 && gamma_crra < 1.0)) {
    throw DomainError("AiyagariParams: gamma must lie in (0, 1)");
  }
  if (!(A_tfp > 0.0)) throw DomainError("AiyagariParams: A must be positive");
  if (!(delta >= 0.0)) throw DomainError("AiyagariParams: delta must be >= 0");
  if (!(horizon > 0.0)) throw DomainError("AiyagariParams: horizon must be positive");
}

Rates cobb_douglas_rates(double K, const AiyagariParams& params) {
  params.validate();
  if (!(K > 0.0)) {
    throw DomainError("cobb_douglas_rates: capital must be positive");
  }
  const double a = params.alpha_cd;
  return {a * params.A_tfp * std::pow(K, a - 1.0) - params.delta,
          (1.0 - a) * params.A_tfp * std::pow(K, a)};
}

void MeanWealthFlow::validate() const {
  if (static_cast<int>(mu_bar.size()) != grid.nodes()) {
    throw DomainError("MeanWealthFlow: one value per grid node required");
  }
  for (double m : mu_bar) {
    if (!(m > 0.0) || !std::isfinite(m)) {
      throw DomainError("MeanWealthFlow: mean wealth must be positive");
    }
  }
}

namespace {

std::vector<double> net_rates(const MeanWealthFlow& flow,
                              const AiyagariParams& params) {
  std::vector<double> r(flow.mu_bar.size());
  for (std::size_t k = 0; k < r.size(); ++k) {
    r[k] = cobb_douglas_rates(flow.mu_bar[k], params).r;
  }
  return r;
}

}  // namespace

std::vector<double> solve_adjoint_backward(const MeanWealthFlow& flow,
                                           const AiyagariParams& params) {
  flow.validate();
  const std::vector<double> r = net_rates(flow, params);
  const double h = flow.grid.step();
  const int n = flow.grid.steps();
  std::vector<double> Y(flow.grid.nodes());
  double integral = 0.0;
  Y[n] = -1.0;
  for (int k = n - 1; k >= 0; --k) {
    integral += 0.5 * h * (r[k] + r[k + 1]);
    Y[k] = -std::exp(integral);
  }
  return Y;
}

std::pair<double, double> adjoint_bounds(const MeanWealthFlow& flow,
                                         const AiyagariParams& params) {
  flow.validate();
  double c = 0.0;
  for (double r : net_rates(flow, params)) c = std::max(c, std::abs(r));
  const double span = flow.grid.t1() - flow.grid.t0();
  return {-std::exp(c * span), -std::exp(-c * span)};
}

double WealthDistribution::mean() const {
  if (atoms.empty()) throw DomainError("WealthDistribution: no atoms");
  double s = 0.0;
  for (double a : atoms) s += a;
  return s / atoms.size();
}

std::vector<double> consumption_path(const std::vector<double>& Y,
                                     const AiyagariParams& params) {
  params.validate();
  std::vector<double> c(Y.size());
  for (std::size_t k = 0; k < Y.size(); ++k) {
    if (!(Y[k] < 0.0)) {
      throw DomainError("adjoint must be negative at every node (Y = " +
                        std::to_string(Y[k]) + " at node " + std::to_string(k) +
                        ")");
    }
    c[k] = std::pow(-Y[k], -1.0 / params.gamma_crra);
  }
  return c;
}

namespace {

// Drives the Euler scheme and hands every (path, node, Z, A) to `sink`.
template <typename Sink>
void forward_kernel(const std::vector<double>& Y, const MeanWealthFlow& flow,
                    const AiyagariParams& params, const WealthDistribution& a0,
                    int n_paths, std::uint64_t seed,
                    const ForwardOptions& options, Sink&& sink) {
  const TimeGrid& grid = flow.grid;
  if (static_cast<int>(Y.size()) != grid.nodes()) {
    throw DomainError("simulate_forward_state: adjoint/grid size mismatch");
  }
  if (n_paths <= 0) throw DomainError("n_paths must be positive");
  const std::vector<double> cons = consumption_path(Y, params);
  const int nodes = grid.nodes();
  std::vector<double> wage(nodes);
  std::vector<double> rate(nodes);
  for (int k = 0; k < nodes; ++k) {
    const Rates rw = cobb_douglas_rates(flow.mu_bar[k], params);
    wage[k] = rw.w;
    rate[k] = rw.r;
  }
  const double h = grid.step();
  const double sqrt_h = std::sqrt(h);
  const CounterRng rng(seed);
  for (int p = 0; p < n_paths; ++p) {
    double z = options.z0;
    double a = a0.at(p);
    sink(p, 0, z, a);
    for (int k = 0; k < grid.steps(); ++k) {
      const double dw = options.z_vol == 0.0 ? 0.0 : sqrt_h * rng.normal(p, k);
      const double a_next = a + (wage[k] * z + rate[k] * a - cons[k]) * h;
      z = z - (z - 1.0) * h + options.z_vol * dw;
      a = a_next;
      sink(p, k + 1, z, a);
    }
  }
}

}  // namespace

PathEnsemble simulate_forward_state(const std::vector<double>& Y,
                                    const MeanWealthFlow& flow,
                                    const AiyagariParams& params,
                                    const WealthDistribution& a0, int n_paths,
                                    std::uint64_t seed,
                                    const ForwardOptions& options) {
  flow.validate();
  PathEnsemble out(flow.grid, n_paths, 2, seed);
  forward_kernel(Y, flow, params, a0, n_paths, seed, options,
                 [&](int p, int k, double z, double a) {
                   out.at(p, k, 0) = z;
                   out.at(p, k, 1) = a;
                 });
  return out;
}

AiyagariSolution solve_aiyagari_mfg(const AiyagariParams& params,
                                    const WealthDistribution& a0,
                                    const FixedPointConfig& cfg, int steps,
                                    int n_paths, std::uint64_t seed) {
  params.validate();
  cfg.validate();
  const double m0 = a0.mean();
  if (!(m0 > 0.0)) {
    throw DomainError("solve_aiyagari_mfg: initial mean wealth must be positive");
  }
  const TimeGrid grid(0.0, params.horizon, steps);
  const int nodes = grid.nodes();
  bool floored = false;

  auto mean_wealth = [&](const Eigen::VectorXd& mu, std::vector<double>* se) {
    MeanWealthFlow flow{grid, std::vector<double>(nodes)};
    for (int k = 0; k < nodes; ++k) {
      if (!(mu(k) > kMuFloor)) floored = true;
      flow.mu_bar[k] = std::max(mu(k), kMuFloor);
    }
    const std::vector<double> Y = solve_adjoint_backward(flow, params);
    std::vector<double> sum(nodes, 0.0);
    std::vector<double> sum_sq(nodes, 0.0);
    forward_kernel(Y, flow, params, a0, n_paths, seed, {},
                   [&](int, int k, double, double a) {
                     sum[k] += a;
                     sum_sq[k] += a * a;
                   });
    Eigen::VectorXd out(nodes);
    for (int k = 0; k < nodes; ++k) out(k) = sum[k] / n_paths;
    if (se != nullptr) {
      se->resize(nodes);
      for (int k = 0; k < nodes; ++k) {
        const double var =
            n_paths > 1 ? std::max(0.0, (sum_sq[k] - n_paths * out(k) * out(k)) /
                                            (n_paths - 1))
                        : 0.0;
        (*se)[k] = std::sqrt(var / n_paths);
      }
    }
    return out;
  };

  const FixedPointResult fp = solve_fixed_point(
      [&](const Eigen::VectorXd& mu) { return mean_wealth(mu, nullptr); },
      Eigen::VectorXd::Constant(nodes, m0), cfg);

  AiyagariSolution sol{MeanWealthFlow{grid, std::vector<double>(nodes)}, {},
                       fp.residuals, {}, false};
  for (int k = 0; k < nodes; ++k) {
    sol.flow.mu_bar[k] = std::max(fp.value(k), kMuFloor);
    if (!(fp.value(k) > kMuFloor)) floored = true;
  }
  mean_wealth(fp.value, &sol.mu_stderr);
  sol.Y = solve_adjoint_backward(sol.flow, params);
  sol.floored = floored;
  return sol;
}

}  // namespace mfg::growth
