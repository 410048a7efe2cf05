#include "mfg/growth.hpp"

#include <gsl/gsl_integration.h>
#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>

namespace mfg::growth {
namespace {

// Equilibrium mean wealth for alpha=0.36, A=1, delta=0.05, gamma=0.5, T=1,
// A_0=1, Z_0=1 at t = 0.1, 0.2, ..., 1.0. Since E[Z_t] = 1 and the wealth
// dynamics are linear, the mean solves m' = m^α − δm − c_t with
// c_t = exp(−(1/γ)∫_t^T (αm^{α−1} − δ)); values from a DOP853 Picard
// solve at rtol 1e-12 on 20001 nodes.
constexpr double kGoldenMu[] = {
    1.036835459698, 1.071090148300, 1.102527317413, 1.130900327323,
    1.155950455038, 1.177404399986, 1.194971398491, 1.208339833534,
    1.217173191638, 1.221105169345};

AiyagariParams GoldenParams() {
  AiyagariParams p;
  p.alpha_cd = 0.36;
  p.A_tfp = 1.0;
  p.delta = 0.05;
  p.gamma_crra = 0.5;
  p.horizon = 1.0;
  return p;
}

TEST(ParetoTest, TailValues) {
  EXPECT_EQ(pareto_tail({2.0, 1.5}, 1.5), 1.0);
  EXPECT_EQ(pareto_tail({2.0, 1.5}, 0.3), 1.0);
  EXPECT_DOUBLE_EQ(pareto_tail({1.0, 1.0}, 2.0), 0.5);
}

struct DensityArgs {
  ParetoState state;
};

double DensityForGsl(double x, void* params) {
  return pareto_density(static_cast<DensityArgs*>(params)->state, x);
}

TEST(ParetoTest, TailMatchesDensityQuadrature) {
  std::mt19937_64 gen(3);
  std::uniform_real_distribution<double> k_dist(0.5, 4.0);
  std::uniform_real_distribution<double> q_dist(0.2, 3.0);
  std::uniform_real_distribution<double> x_dist(1.0, 5.0);
  gsl_integration_workspace* ws = gsl_integration_workspace_alloc(1000);
  for (int i = 0; i < 100; ++i) {
    DensityArgs args{{k_dist(gen), q_dist(gen)}};
    const double x = args.state.q * x_dist(gen);
    gsl_function f{&DensityForGsl, &args};
    double value = 0.0;
    double err = 0.0;
    gsl_integration_qagiu(&f, x, 1e-13, 1e-11, 1000, ws, &value, &err);
    EXPECT_NEAR(pareto_tail(args.state, x), value, 1e-8);
  }
  gsl_integration_workspace_free(ws);
}

TEST(PropagateParetoTest, FrozenDynamics) {
  const TimeGrid grid(0.0, 1.0, 100);
  const std::vector<double> zero(grid.nodes(), 0.0);
  for (double q : propagate_pareto({2.0, 1.3}, grid, zero, 0.0, zero)) {
    EXPECT_DOUBLE_EQ(q, 1.3);
  }
}

TEST(PropagateParetoTest, ConstantGrowthIsExponential) {
  const TimeGrid grid(0.0, 2.0, 100);
  const std::vector<double> gamma(grid.nodes(), 0.3);
  const std::vector<double> zero(grid.nodes(), 0.0);
  const auto q = propagate_pareto({2.0, 1.3}, grid, gamma, 0.0, zero);
  for (int k = 0; k < grid.nodes(); ++k) {
    EXPECT_NEAR(q[k], 1.3 * std::exp(0.3 * grid.time(k)), 1e-12);
  }
}

TEST(PropagateParetoTest, ParticlesStayPareto) {
  const TimeGrid grid(0.0, 1.0, 2000);
  std::vector<double> gamma(grid.nodes());
  for (int k = 0; k < grid.nodes(); ++k) gamma[k] = 0.2 + 0.1 * grid.time(k);
  const double sigma = 0.3;
  const ParetoState state0{1.5, 1.0};
  const auto w0 = brownian_path(grid, 5);
  const auto q = propagate_pareto(state0, grid, gamma, sigma, w0);
  const int n = 10000;
  const auto particles =
      simulate_pareto_particles(state0, grid, gamma, sigma, w0, n, 6);
  const double d = pareto_ks_distance(particles, {state0.k, q.back()});
  EXPECT_LT(d, ks_critical_1pct(n));
  // Quantile check at the quartiles: order statistics against μ^(q_T).
  std::vector<double> sorted = particles;
  std::sort(sorted.begin(), sorted.end());
  for (double u : {0.25, 0.5, 0.75}) {
    const double exact = q.back() * std::pow(1.0 - u, -1.0 / state0.k);
    const double empirical = sorted[static_cast<int>(u * n)];
    // Asymptotic standard error of a sample quantile: sqrt(u(1−u)/n)/f.
    const double f = pareto_density({state0.k, q.back()}, exact);
    EXPECT_LT(std::abs(empirical - exact), 3.0 * std::sqrt(u * (1 - u) / n) / f);
  }
}

TEST(GrowthBestResponseTest, UnitBase) {
  GrowthCostParams cost;
  cost.E_coef = 2.5;
  for (double p : {1.5, 2.0, 3.0}) {
    cost.p_exp = p;
    EXPECT_DOUBLE_EQ(growth_best_response(0.5, {2.0, 1.0}, 2.5, cost), 1.0);
  }
}

TEST(GrowthBestResponseTest, ZeroAdjoint) {
  EXPECT_EQ(growth_best_response(2.0, {2.0, 1.0}, 0.0, {}), 0.0);
}

TEST(GrowthBestResponseTest, NegativeRatioRejected) {
  EXPECT_THROW(growth_best_response(2.0, {2.0, 1.0}, -1.0, {}), DomainError);
}

TEST(GrowthBestResponseTest, MatchesBruteForce) {
  std::mt19937_64 gen(11);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int trial = 0; trial < 50; ++trial) {
    GrowthCostParams cost;
    cost.b_exp = 0.2 + 2.0 * unit(gen);
    cost.p_exp = 1.3 + 2.5 * unit(gen);
    cost.E_coef = 0.5 + 2.0 * unit(gen);
    const ParetoState state{0.5 + 3.0 * unit(gen), 0.5 + unit(gen)};
    const double x = state.q * (0.5 + 3.0 * unit(gen));
    const double y = 3.0 * unit(gen);
    const double hat = growth_best_response(x, state, y, cost);
    const double tail = pareto_tail(state, x);
    // α-dependent part of the Hamiltonian with the sign that makes it convex.
    auto objective = [&](double a) {
      return (cost.E_coef / cost.p_exp) * std::pow(a, cost.p_exp) /
                 std::pow(tail, cost.b_exp) -
             y * a;
    };
    const double upper = 2.0 * hat + 1.0;
    const int n = 100000;
    const double step = upper / n;
    double best = 0.0;
    double best_val = objective(0.0);
    for (int i = 1; i <= n; ++i) {
      const double v = objective(i * step);
      if (v < best_val) {
        best_val = v;
        best = i * step;
      }
    }
    EXPECT_LE(std::abs(best - hat), step) << "trial " << trial;
  }
}

TEST(GrowthRunningCostTest, LeftOfSupportHasNoCrowding) {
  GrowthCostParams cost;
  const ParetoState state{2.0, 1.0};
  EXPECT_DOUBLE_EQ(growth_running_cost(0.5, state, 1.0, cost),
                   -(cost.E_coef / cost.p_exp));
}

TEST(CobbDouglasTest, ClosedForm) {
  AiyagariParams p = GoldenParams();
  p.alpha_cd = 0.5;
  p.delta = 0.0;
  const Rates rw = cobb_douglas_rates(1.0, p);
  EXPECT_DOUBLE_EQ(rw.r, 0.5);
  EXPECT_DOUBLE_EQ(rw.w, 0.5);
  EXPECT_THROW(cobb_douglas_rates(0.0, p), DomainError);
}

TEST(CobbDouglasTest, RootOfRent) {
  const AiyagariParams p = GoldenParams();
  const double k = std::pow(p.delta / (p.alpha_cd * p.A_tfp), 1.0 / (p.alpha_cd - 1.0));
  EXPECT_NEAR(cobb_douglas_rates(k, p).r, 0.0, 1e-15);
}

TEST(CobbDouglasTest, EulerTheorem) {
  std::mt19937_64 gen(1);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int i = 0; i < 200; ++i) {
    AiyagariParams p;
    p.alpha_cd = 0.05 + 0.9 * unit(gen);
    p.A_tfp = 0.1 + 3.0 * unit(gen);
    p.delta = 0.2 * unit(gen);
    const double k = 0.1 + 5.0 * unit(gen);
    const Rates rw = cobb_douglas_rates(k, p);
    const double output = p.A_tfp * std::pow(k, p.alpha_cd);
    EXPECT_NEAR(rw.r * k + rw.w + p.delta * k, output, 1e-12 * (1.0 + output));
  }
}

MeanWealthFlow WavyFlow(const TimeGrid& grid) {
  MeanWealthFlow flow{grid, std::vector<double>(grid.nodes())};
  for (int k = 0; k < grid.nodes(); ++k) {
    flow.mu_bar[k] = 1.0 + 0.3 * std::sin(3.0 * grid.time(k));
  }
  return flow;
}

TEST(AdjointTest, ZeroExponentGivesMinusOne) {
  const AiyagariParams p = GoldenParams();
  const double k = std::pow(p.delta / (p.alpha_cd * p.A_tfp), 1.0 / (p.alpha_cd - 1.0));
  const TimeGrid grid(0.0, 1.0, 50);
  const MeanWealthFlow flow{grid, std::vector<double>(grid.nodes(), k)};
  for (double y : solve_adjoint_backward(flow, p)) EXPECT_NEAR(y, -1.0, 1e-14);
}

TEST(AdjointTest, TerminalValueAndRk4Agreement) {
  const AiyagariParams p = GoldenParams();
  const TimeGrid grid(0.0, 1.0, 4000);
  const MeanWealthFlow flow = WavyFlow(grid);
  const auto Y = solve_adjoint_backward(flow, p);
  EXPECT_EQ(Y.back(), -1.0);
  auto rate = [&](double t) {
    return cobb_douglas_rates(1.0 + 0.3 * std::sin(3.0 * t), p).r;
  };
  const auto ode = integrate_ode([&](double t, double y) { return -y * rate(t); },
                                 -1.0, grid, Direction::Backward);
  for (int k = 0; k < grid.nodes(); ++k) EXPECT_NEAR(Y[k], ode[k], 1e-8);
}

TEST(AdjointTest, ConfinedToCompactInterval) {
  const AiyagariParams p = GoldenParams();
  const TimeGrid grid(0.0, 1.0, 400);
  const MeanWealthFlow flow = WavyFlow(grid);
  const auto [lo, hi] = adjoint_bounds(flow, p);
  EXPECT_LT(hi, 0.0);
  for (double y : solve_adjoint_backward(flow, p)) {
    EXPECT_GE(y, lo);
    EXPECT_LE(y, hi);
  }
}

TEST(ForwardStateTest, ProductivityMeanStaysOne) {
  const AiyagariParams p = GoldenParams();
  const TimeGrid grid(0.0, 1.0, 100);
  const MeanWealthFlow flow = WavyFlow(grid);
  const auto Y = solve_adjoint_backward(flow, p);
  const auto ens = simulate_forward_state(Y, flow, p, {}, 20000, 8);
  for (int k = 1; k < grid.nodes(); ++k) {
    const auto [mean, se] = ens.mean_and_stderr(k, 0);
    EXPECT_LE(std::abs(mean - 1.0), 3.0 * se) << "node " << k;
  }
}

TEST(ForwardStateTest, ZeroNoiseReducesToLinearOde) {
  const AiyagariParams p = GoldenParams();
  const TimeGrid grid(0.0, 1.0, 2000);
  const MeanWealthFlow flow = WavyFlow(grid);
  const auto Y = solve_adjoint_backward(flow, p);
  const auto cons = consumption_path(Y, p);
  const auto ens = simulate_forward_state(Y, flow, p, {}, 2, 1, {1.0, 0.0});
  auto field = [&](double t, double a) {
    const Rates rw = cobb_douglas_rates(grid.interpolate(flow.mu_bar, t), p);
    return rw.w + rw.r * a - grid.interpolate(cons, t);
  };
  const auto ode = integrate_ode(field, 1.0, grid, Direction::Forward);
  for (int k = 0; k < grid.nodes(); ++k) {
    EXPECT_EQ(ens.at(0, k, 0), 1.0);
    EXPECT_NEAR(ens.at(1, k, 1), ode[k], 5.0 * grid.step());
  }
}

TEST(ForwardStateTest, RejectsNonNegativeAdjoint) {
  const AiyagariParams p = GoldenParams();
  const TimeGrid grid(0.0, 1.0, 10);
  const MeanWealthFlow flow = WavyFlow(grid);
  std::vector<double> Y(grid.nodes(), -1.0);
  Y[3] = 0.0;
  EXPECT_THROW(simulate_forward_state(Y, flow, p, {}, 2, 1), DomainError);
}

TEST(AiyagariMfgTest, GoldenFlow) {
  const AiyagariParams p = GoldenParams();
  const FixedPointConfig cfg{1.0, 1e-7, 100};
  const auto sol = solve_aiyagari_mfg(p, {}, cfg, 200, 10000, 42);
  EXPECT_LT(sol.residuals.back(), cfg.tol);
  EXPECT_FALSE(sol.floored);
  const double h = sol.flow.grid.step();
  for (int j = 1; j <= 10; ++j) {
    const int k = 20 * j;
    // Monte Carlo error plus the O(h) Euler bias of the wealth scheme.
    EXPECT_LE(std::abs(sol.flow.mu_bar[k] - kGoldenMu[j - 1]),
              3.0 * sol.mu_stderr[k] + h)
        << "t = " << sol.flow.grid.time(k);
  }
  // Residuals decrease monotonically after the third iteration.
  for (std::size_t i = 4; i < sol.residuals.size(); ++i) {
    EXPECT_LT(sol.residuals[i], sol.residuals[i - 1]);
  }
  const auto [lo, hi] = adjoint_bounds(sol.flow, p);
  for (double y : sol.Y) {
    EXPECT_GE(y, lo);
    EXPECT_LE(y, hi);
  }
}

TEST(AiyagariMfgTest, DoublingPathsIsStable) {
  const AiyagariParams p = GoldenParams();
  const FixedPointConfig cfg{1.0, 1e-7, 100};
  const auto a = solve_aiyagari_mfg(p, {}, cfg, 100, 5000, 42);
  const auto b = solve_aiyagari_mfg(p, {}, cfg, 100, 10000, 43);
  // Early nodes have almost no own variance but inherit the whole flow
  // through the adjoint, so the comparison is made on the flow as a whole.
  double change = 0.0;
  double pooled = 0.0;
  for (int k = 0; k < a.flow.grid.nodes(); ++k) {
    change = std::max(change, std::abs(a.flow.mu_bar[k] - b.flow.mu_bar[k]));
    pooled = std::max(pooled, std::hypot(a.mu_stderr[k], b.mu_stderr[k]));
  }
  EXPECT_LE(change, 3.0 * pooled);
}

}  // namespace
}  // namespace mfg::growth
