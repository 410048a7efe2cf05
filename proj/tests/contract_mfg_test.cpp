#include <gtest/gtest.h>

#include <unsupported/Eigen/MatrixFunctions>

#include <cmath>
#include <limits>
#include <random>

#include "mfg/contract_mfg.hpp"

using namespace mfg;
using namespace mfg::contract;

namespace {

// Constant-rate model: q̄ = base, cost c1 per state.
FiniteStateModel constant_model(const Mat& base, const Mat& lambda, const Vec& c1,
                                const Vec& gamma, const Vec& p0, double lo = 0.0,
                                double hi = 2.0) {
  FiniteStateModel m;
  m.m = static_cast<int>(p0.size());
  m.base_rates = [base](double, int i, int j, const Vec&) { return base(i, j); };
  m.lambda = lambda;
  m.c1 = [c1](double, int i, const Vec&) { return c1(i); };
  m.gamma = gamma;
  m.p0 = p0;
  m.alpha_lo = lo;
  m.alpha_hi = hi;
  return m;
}

FiniteStateModel two_state_toy() {
  Mat base(2, 2), lambda(2, 2);
  base << 0, 0.5, 0.5, 0;
  lambda << 0, 1, 1, 0;
  Vec c1(2), gamma(2), p0(2);
  c1 << 1.0, 0.0;
  gamma << 1.0, 1.0;
  p0 << 0.5, 0.5;
  return constant_model(base, lambda, c1, gamma, p0);
}

PrincipalSpec toy_principal(double kappa) {
  PrincipalSpec s;
  s.c0 = [](double, const Vec& p) { return 2.0 * p(0); };
  s.C0 = [](const Vec&) { return 0.0; };
  s.kappa = kappa;
  return s;
}

PrincipalSpec zero_principal(double kappa = 0.0) {
  PrincipalSpec s;
  s.c0 = [](double, const Vec&) { return 0.0; };
  s.C0 = [](const Vec&) { return 0.0; };
  s.kappa = kappa;
  return s;
}

// Random 3-state model with flow-dependent base rates.
FiniteStateModel random_three_state(unsigned seed) {
  std::mt19937_64 gen(seed);
  std::uniform_real_distribution<double> U(0.2, 1.0);
  Mat a(3, 3), b(3, 3), lambda(3, 3);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) {
      a(i, j) = U(gen);
      b(i, j) = U(gen);
      lambda(i, j) = i == j ? 0.0 : U(gen);
    }
  Vec c(3), gamma(3), p0(3);
  for (int i = 0; i < 3; ++i) {
    c(i) = U(gen);
    gamma(i) = U(gen) + 0.5;
    p0(i) = U(gen);
  }
  p0 /= p0.sum();
  FiniteStateModel m;
  m.m = 3;
  m.base_rates = [a, b](double, int i, int j, const Vec& p) { return a(i, j) + b(i, j) * p(j); };
  m.lambda = lambda;
  m.c1 = [c](double, int i, const Vec& p) { return c(i) * (1.0 + p(i)); };
  m.gamma = gamma;
  m.p0 = p0;
  m.alpha_lo = 0.0;
  m.alpha_hi = 1.5;
  return m;
}

Contract sample_contract(int m) {
  Contract c = Contract::zero(m);
  for (int k = 0; k < 8; ++k) c.r_knots(k) = 0.1 * (k % 3);
  for (int i = 0; i < m; ++i) c.xi(i) = 0.3 * std::sin(1.0 + i);
  return c;
}

}  // namespace

// ---------------------------------------------------------------------------
// Generator and Hamiltonian
// ---------------------------------------------------------------------------

TEST(QMatrix, LowerActionsGiveBaseRates) {
  const auto m = random_three_state(1);
  const Vec p = m.p0;
  const Mat q = build_q_matrix(m, 0.0, Vec::Constant(3, m.alpha_lo), p);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      if (i != j) EXPECT_DOUBLE_EQ(q(i, j), m.base_rates(0.0, i, j, p));
}

TEST(QMatrix, RowsSumToZero) {
  std::mt19937_64 gen(3);
  std::uniform_real_distribution<double> U(0.0, 1.5);
  const auto m = random_three_state(2);
  for (int trial = 0; trial < 100; ++trial) {
    Vec a(3), p(3);
    for (int i = 0; i < 3; ++i) {
      a(i) = U(gen);
      p(i) = U(gen) + 1e-3;
    }
    p /= p.sum();
    const Mat q = build_q_matrix(m, 0.3, a, p);
    for (int i = 0; i < 3; ++i) {
      EXPECT_LT(std::abs(q.row(i).sum()), 1e-14);
      for (int j = 0; j < 3; ++j)
        if (i != j) EXPECT_GE(q(i, j), 0.0);
    }
  }
}

TEST(QMatrix, SymmetricTwoStateHasUniformStationaryLaw) {
  Mat base(2, 2);
  base << 0, 1, 1, 0;
  const auto m = constant_model(base, Mat::Zero(2, 2), Vec::Zero(2), Vec::Ones(2),
                                Vec::Constant(2, 0.5));
  const Vec half = Vec::Constant(2, 0.5);
  const Mat q = build_q_matrix(m, 0.0, Vec::Zero(2), half);
  EXPECT_LT((q.transpose() * half).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(QMatrix, OutOfBoundsActionRejected) {
  const auto m = two_state_toy();
  Vec a(2);
  a << 0.0, 3.0;
  EXPECT_THROW(build_q_matrix(m, 0.0, a, m.p0), DomainError);
}

TEST(Hamiltonian, ClampExamples) {
  Mat lambda(2, 2);
  lambda << 0, 1, 1, 0;
  const auto m = constant_model(Mat::Zero(2, 2), lambda, Vec::Zero(2), Vec::Ones(2),
                                Vec::Constant(2, 0.5), 0.0, 5.0);
  Vec z(2);
  z << 0.0, 2.0;
  EXPECT_DOUBLE_EQ(minimize_hamiltonian(m, 0.0, 0, z, m.p0).alpha, 0.0);
  z << 2.0, 0.0;
  EXPECT_DOUBLE_EQ(minimize_hamiltonian(m, 0.0, 0, z, m.p0).alpha, 2.0);
}

TEST(Hamiltonian, MatchesBruteForceOnRandomInstances) {
  std::mt19937_64 gen(2024);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  for (int trial = 0; trial < 1000; ++trial) {
    const int m = 2 + trial % 4;
    Mat base(m, m), lambda(m, m);
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < m; ++j) {
        base(i, j) = U(gen);
        lambda(i, j) = i == j ? 0.0 : 2.0 * U(gen);
      }
    Vec c1(m), gamma(m), z(m), p = Vec::Constant(m, 1.0 / m);
    for (int i = 0; i < m; ++i) {
      c1(i) = U(gen);
      gamma(i) = 0.2 + 3.0 * U(gen);
      z(i) = 4.0 * U(gen) - 2.0;
    }
    const double lo = U(gen), hi = lo + 0.5 + 2.0 * U(gen);
    const auto model = constant_model(base, lambda, c1, gamma, p, lo, hi);
    const int i = trial % m;
    const auto best = minimize_hamiltonian(model, 0.0, i, z, p);
    double grid_alpha = lo, grid_value = std::numeric_limits<double>::infinity();
    const int n = static_cast<int>(std::floor((hi - lo) / 1e-3));
    for (int k = 0; k <= n + 1; ++k) {
      const double a = std::min(lo + k * 1e-3, hi);
      const double v = hamiltonian(model, 0.0, i, z, a, p);
      if (v < grid_value) {
        grid_value = v;
        grid_alpha = a;
      }
    }
    ASSERT_LE(std::abs(best.alpha - grid_alpha), 1e-3 + 1e-12) << "trial " << trial;
    ASSERT_LE(best.value, grid_value + 1e-12) << "trial " << trial;
    ASSERT_LE(grid_value - best.value, 1e-6) << "trial " << trial;
  }
}

TEST(Hamiltonian, CommonShiftOfZIsIrrelevant) {
  const auto m = random_three_state(5);
  Vec z(3);
  z << 0.3, -0.7, 1.1;
  for (int i = 0; i < 3; ++i) {
    const auto a = minimize_hamiltonian(m, 0.0, i, z, m.p0);
    const auto b = minimize_hamiltonian(m, 0.0, i, (z.array() + 4.2).matrix(), m.p0);
    EXPECT_DOUBLE_EQ(a.alpha, b.alpha);
    EXPECT_NEAR(a.value, b.value, 1e-12);
  }
}

// ---------------------------------------------------------------------------
// Nash equilibrium
// ---------------------------------------------------------------------------

TEST(SolveNash, UncontrolledChainMatchesMatrixExponential) {
  Mat base(3, 3);
  base << 0, 0.7, 0.2, 0.4, 0, 0.9, 0.3, 0.5, 0;
  Vec p0(3);
  p0 << 0.6, 0.3, 0.1;
  const auto m = constant_model(base, Mat::Zero(3, 3), Vec::Zero(3), Vec::Ones(3), p0);
  const auto eq = solve_nash(m, Contract::zero(3));
  Mat q = base;
  for (int i = 0; i < 3; ++i) q(i, i) = -base.row(i).sum();
  for (int k = 0; k < eq.grid.nodes(); k += 20) {
    const Vec exact = (q.transpose() * eq.grid.time(k)).exp() * p0;
    EXPECT_LT((eq.p.row(k).transpose() - exact).cwiseAbs().maxCoeff(), 1e-8);
  }
  EXPECT_LT(eq.u.cwiseAbs().maxCoeff(), 1e-15);
  EXPECT_FALSE(m.controllable());
}

TEST(SolveNash, SymmetricTwoStateStaysUniform) {
  Mat base(2, 2), lambda(2, 2);
  base << 0, 0.8, 0.8, 0;
  lambda << 0, 1, 1, 0;
  const auto m = constant_model(base, lambda, Vec::Constant(2, 0.4), Vec::Ones(2),
                                Vec::Constant(2, 0.5));
  const auto eq = solve_nash(m, Contract::zero(2));
  for (int k = 0; k < eq.grid.nodes(); ++k) {
    EXPECT_NEAR(eq.p(k, 0), 0.5, 1e-14);
    EXPECT_DOUBLE_EQ(eq.alpha(k, 0), eq.alpha(k, 1));
  }
}

TEST(SolveNash, SimplexConservedAndActionsInBounds) {
  for (unsigned seed : {11u, 12u}) {
    const auto m = random_three_state(seed);
    const auto eq = solve_nash(m, sample_contract(3));
    EXPECT_LT(eq.residual, 1e-8);
    for (int k = 0; k < eq.grid.nodes(); ++k) {
      EXPECT_LT(std::abs(eq.p.row(k).sum() - 1.0), 1e-10);
      EXPECT_GE(eq.p.row(k).minCoeff(), 0.0);
      EXPECT_GE(eq.alpha.row(k).minCoeff(), m.alpha_lo);
      EXPECT_LE(eq.alpha.row(k).maxCoeff(), m.alpha_hi);
    }
  }
}

TEST(SolveNash, IsAFixedPointOfBestResponse) {
  // Re-solving the value equation on the returned flow reproduces α̂, and the
  // forward equation under α̂ reproduces p (discretization-consistent).
  const auto m = random_three_state(21);
  const auto eq = solve_nash(m, sample_contract(3));
  SolverConfig again;
  again.initial_flow = eq.p;
  const auto eq2 = solve_nash(m, sample_contract(3), again);
  EXPECT_LT((eq2.p - eq.p).cwiseAbs().maxCoeff(), 1e-8);
  EXPECT_LE(eq2.residuals.size(), 2u);
}

TEST(SolveNash, NonConvergenceReportsResiduals) {
  const auto m = random_three_state(4);
  SolverConfig cfg;
  cfg.fixed_point.max_iter = 2;
  cfg.fixed_point.tol = 1e-14;
  try {
    solve_nash(m, sample_contract(3), cfg);
    FAIL() << "expected NonConvergence";
  } catch (const NonConvergence& e) {
    EXPECT_EQ(e.residuals().size(), 2u);
  }
}

TEST(SolveNash, RateBoundViolationsReported) {
  auto m = two_state_toy();
  m.bounds = RateBounds{0.6, 10.0};
  const auto eq = solve_nash(m, Contract::zero(2));
  EXPECT_GT(eq.rate_violations, 0);  // base rate 0.5 < C₁ at α = α̲
  m.bounds = RateBounds{0.1, 10.0};
  EXPECT_EQ(solve_nash(m, Contract::zero(2)).rate_violations, 0);
}

TEST(SolveNash, KnotCountMustDivideSteps) {
  Contract c = Contract::zero(2, 7);
  EXPECT_THROW(solve_nash(two_state_toy(), c), DomainError);
}

// ---------------------------------------------------------------------------
// Chains
// ---------------------------------------------------------------------------

TEST(Chains, UnitRateTwoStateOccupancy) {
  Mat base(2, 2);
  base << 0, 1, 1, 0;
  Vec p0(2);
  p0 << 1.0, 0.0;
  const auto m = constant_model(base, Mat::Zero(2, 2), Vec::Zero(2), Vec::Ones(2), p0);
  const auto eq = solve_nash(m, Contract::zero(2));
  const int n = 20000;
  const auto occ = occupancy(simulate_chain(m, eq, n, 42), 2);
  for (int k = 0; k < eq.grid.nodes(); k += 25) {
    const double t = eq.grid.time(k);
    const double exact = 0.5 * (1.0 + std::exp(-2.0 * t));
    const double se = std::sqrt(exact * (1 - exact) / n);
    EXPECT_LE(std::abs(occ(k, 0) - exact), 3.0 * se + 1e-12) << "t=" << t;
  }
}

TEST(Chains, ZeroRatesFreezePaths) {
  Vec p0(2);
  p0 << 0.3, 0.7;
  const auto m = constant_model(Mat::Zero(2, 2), Mat::Zero(2, 2), Vec::Zero(2),
                                Vec::Ones(2), p0);
  const auto eq = solve_nash(m, Contract::zero(2));
  const auto ens = simulate_chain(m, eq, 200, 1);
  for (int p = 0; p < 200; ++p)
    for (int k = 0; k < eq.grid.nodes(); ++k) EXPECT_EQ(ens.at(p, k), ens.at(p, 0));
}

TEST(Chains, EquilibriumFeedbackReproducesFlow) {
  const auto m = random_three_state(31);
  const auto eq = solve_nash(m, sample_contract(3));
  const int n = 20000;
  const auto occ = occupancy(simulate_chain(m, eq, n, 7), 3);
  for (int k = 0; k < eq.grid.nodes(); k += 20)
    for (int i = 0; i < 3; ++i) {
      const double p = eq.p(k, i);
      EXPECT_LE(std::abs(occ(k, i) - p), 3.0 * std::sqrt(p * (1 - p) / n) + 1e-12);
    }
}

TEST(Chains, DeterministicForSeed) {
  const auto m = random_three_state(8);
  const auto eq = solve_nash(m, Contract::zero(3));
  EXPECT_EQ(simulate_chain(m, eq, 50, 5).values, simulate_chain(m, eq, 50, 5).values);
}

// ---------------------------------------------------------------------------
// Contract evaluation
// ---------------------------------------------------------------------------

TEST(Evaluate, ZeroCostsGiveZero) {
  const auto m = two_state_toy();
  const auto eq = solve_nash(m, Contract::zero(2));
  EXPECT_DOUBLE_EQ(evaluate_contract(m, zero_principal(), Contract::zero(2), eq).principal_cost,
                   0.0);
}

TEST(Evaluate, UniformTerminalShift) {
  const auto m = random_three_state(9);
  const Contract c = sample_contract(3);
  Contract d = c;
  d.xi.array() += 0.37;
  const auto pr = toy_principal(10.0);
  const auto a = evaluate_contract(m, pr, c, solve_nash(m, c));
  const auto b = evaluate_contract(m, pr, d, solve_nash(m, d));
  EXPECT_NEAR(b.agent_cost - a.agent_cost, -0.37, 1e-9);
  EXPECT_NEAR(b.principal_cost - a.principal_cost, 0.37, 1e-9);
}

TEST(Evaluate, MonteCarloMatchesQuadrature) {
  const auto m = random_three_state(13);
  const Contract c = sample_contract(3);
  const auto eq = solve_nash(m, c);
  const auto pr = toy_principal(10.0);
  const auto v = evaluate_contract(m, pr, c, eq);
  const int n = 20000;
  const auto ens = simulate_chain(m, eq, n, 99);
  // Only the terminal payment is path-dependent in J₀.
  double s = 0.0, s2 = 0.0;
  for (int p = 0; p < n; ++p) {
    const double x = c.xi(static_cast<int>(ens.at(p, eq.grid.steps())));
    s += x;
    s2 += x * x;
  }
  const double mean = s / n, se = std::sqrt((s2 / n - mean * mean) / n);
  const double deterministic = v.principal_cost - eq.p.row(eq.grid.steps()).dot(c.xi);
  EXPECT_LE(std::abs(deterministic + mean - v.principal_cost), 3.0 * se);
}

TEST(Evaluate, AgentCostMatchesSimulatedCost) {
  const auto m = random_three_state(17);
  const Contract c = sample_contract(3);
  const auto eq = solve_nash(m, c);
  const int n = 20000;
  const auto ens = simulate_chain(m, eq, n, 3);
  const double h = eq.grid.step();
  double s = 0.0, s2 = 0.0;
  for (int p = 0; p < n; ++p) {
    std::vector<double> run(eq.grid.nodes());
    for (int k = 0; k < eq.grid.nodes(); ++k) {
      const int i = static_cast<int>(ens.at(p, k));
      const double a = eq.alpha(k, i);
      run[k] = m.c1(eq.grid.time(k), i, eq.p.row(k).transpose()) + 0.5 * m.gamma(i) * a * a;
    }
    const double x = trapezoid(run, h) - c.r_knots.mean() * m.horizon -
                     c.xi(static_cast<int>(ens.at(p, eq.grid.steps())));
    s += x;
    s2 += x * x;
  }
  const double mean = s / n, se = std::sqrt((s2 / n - mean * mean) / n);
  // Trapezoid over piecewise-constant paths adds O(h) bias per jump.
  EXPECT_LE(std::abs(mean - eq.agent_cost), 3.0 * se + 5e-3);
}

// ---------------------------------------------------------------------------
// Principal problem
// ---------------------------------------------------------------------------

TEST(Optimize, PaymentsMinimizedWhenUnconstrained) {
  const auto m = two_state_toy();
  const auto pr = toy_principal(std::numeric_limits<double>::infinity());
  SearchConfig sc;
  sc.restarts = 2;
  sc.max_evals = 800;
  ContractParameterization param;
  param.xi_lo = -1.0;
  const auto o = optimize_contract(m, zero_principal(std::numeric_limits<double>::infinity()),
                                   param, sc);
  EXPECT_LT(o.contract.r_knots.maxCoeff(), 1e-6);
  EXPECT_NEAR(o.contract.xi.minCoeff(), -1.0, 1e-9);
  EXPECT_NEAR(o.contract.xi.maxCoeff(), -1.0, 1e-6);
  (void)pr;
}

TEST(Optimize, ValueNonIncreasingInKappa) {
  const auto m = two_state_toy();
  SearchConfig sc;
  sc.restarts = 2;
  sc.max_evals = 600;
  double prev = std::numeric_limits<double>::infinity();
  for (double kappa : {0.1, 0.3, 0.6}) {
    const auto o = optimize_contract(m, toy_principal(kappa), {}, sc);
    EXPECT_LE(o.agent_cost, kappa + 1e-6);
    EXPECT_LE(o.value, prev + 1e-9);
    prev = o.value;
  }
}

TEST(Optimize, InfeasibleWhenBoundsForbidParticipation) {
  const auto m = two_state_toy();
  ContractParameterization param;
  param.r_max = 0.0;
  param.xi_lo = param.xi_hi = 0.0;
  SearchConfig sc;
  sc.restarts = 1;
  sc.max_evals = 50;
  EXPECT_THROW(optimize_contract(m, toy_principal(-5.0), param, sc), Infeasible);
}

TEST(ForwardControl, DegenerateModelHasZeroValue) {
  Vec p0(2);
  p0 << 0.5, 0.5;
  const auto m = constant_model(Mat::Zero(2, 2), Mat::Zero(2, 2), Vec::Zero(2), Vec::Ones(2), p0);
  const Mat z = Mat::Zero(201, 2);
  const auto ev = evaluate_forward_free(m, zero_principal(), z, Vec::Zero(8), 0.0, 200);
  EXPECT_DOUBLE_EQ(ev.principal_cost, 0.0);
  SearchConfig sc;
  sc.restarts = 1;
  sc.max_evals = 200;
  const auto o = optimize_contract(m, zero_principal(), {}, sc);
  EXPECT_NEAR(o.value, 0.0, 1e-12);
}

TEST(ForwardControl, RoundTripReproducesDirectCost) {
  const auto m = random_three_state(41);
  const Contract c = sample_contract(3);
  const auto eq = solve_nash(m, c);
  const auto pr = toy_principal(10.0);
  const auto v = evaluate_contract(m, pr, c, eq);
  const auto free = evaluate_forward_free(m, pr, eq.u, c.r_knots, eq.agent_cost, 200);
  EXPECT_NEAR(free.principal_cost, v.principal_cost, 1e-6);
  const auto markov = evaluate_forward_markov(m, pr, eq.u.row(0).transpose(), c.r_knots, 200);
  EXPECT_NEAR(markov.principal_cost, v.principal_cost, 1e-6);
  EXPECT_LT((markov.p - eq.p).cwiseAbs().maxCoeff(), 1e-6);
}

TEST(ForwardControl, AgreesWithDirectSearchOnToyModel) {
  const auto m = two_state_toy();
  const auto pr = toy_principal(0.3);
  SearchConfig sc;
  sc.restarts = 3;
  sc.max_evals = 1500;
  const auto direct = optimize_contract(m, pr, {}, sc);
  ForwardControlConfig fc;
  const auto fwd = principal_forward_control(m, pr, fc, sc);
  const double slack = 1e-4;
  EXPECT_LE(fwd.value, direct.value + slack);
  EXPECT_LE(direct.value, fwd.value + slack);
  fc.mode = ForwardMode::FreeKnots;
  const auto freeknots = principal_forward_control(m, pr, fc, sc);
  EXPECT_LE(freeknots.value, direct.value + slack);
}

// ---------------------------------------------------------------------------
// Epidemic
// ---------------------------------------------------------------------------

TEST(Epidemic, NoMigrationConservesCityMass) {
  auto P = EpidemicParams::defaults();
  P.nuI = P.nuH = 0.0;
  const auto em = build_epidemic_model(P);
  const auto eq = solve_nash(em.model, sample_contract(4));
  const double a0 = P.pi0(AI) + P.pi0(AH);
  for (int k = 0; k < eq.grid.nodes(); ++k) EXPECT_NEAR(eq.p(k, AI) + eq.p(k, AH), a0, 1e-10);
}

TEST(Epidemic, SymmetricCitiesGiveSymmetricFlow) {
  auto P = EpidemicParams::defaults();
  P.thetaB_minus = P.thetaA_minus;
  P.thetaB_plus = P.thetaA_plus;
  P.phiB = P.phiA;
  P.pi0 << 0.1, 0.4, 0.1, 0.4;
  const auto em = build_epidemic_model(P);
  Contract c = Contract::zero(4);
  c.xi << 0.2, -0.1, 0.2, -0.1;
  const auto eq = solve_nash(em.model, c);
  for (int k = 0; k < eq.grid.nodes(); ++k) {
    EXPECT_NEAR(eq.p(k, AI), eq.p(k, BI), 1e-12);
    EXPECT_NEAR(eq.p(k, AH), eq.p(k, BH), 1e-12);
  }
}

TEST(Epidemic, InfectionRateIsDirect) {
  const auto P = EpidemicParams::defaults();
  const auto em = build_epidemic_model(P);
  Vec p(4);
  p << 0.1, 0.3, 0.2, 0.4;
  const Mat q = build_q_matrix(em.model, 0.0, Vec::Zero(4), p);
  EXPECT_DOUBLE_EQ(q(AH, AI), P.thetaA_minus(0.25));
  EXPECT_DOUBLE_EQ(q(BH, BI), P.thetaB_minus(p(BI) / (p(BI) + p(BH))));
  EXPECT_DOUBLE_EQ(q(AI, AH), P.thetaA_plus(0.75));
  EXPECT_DOUBLE_EQ(q(AI, BH), 0.0);
  const Mat q2 = build_q_matrix(em.model, 0.0, Vec::Constant(4, 1.5), p);
  EXPECT_DOUBLE_EQ(q2(AI, BI), P.nuI * 1.5);
  EXPECT_DOUBLE_EQ(q2(AH, BH), P.nuH * 1.5);
}

TEST(Epidemic, OffSimplexRejected) {
  auto P = EpidemicParams::defaults();
  P.pi0 << 0.5, 0.5, 0.5, 0.0;
  EXPECT_THROW(build_epidemic_model(P), DomainError);
}

TEST(Epidemic, PrincipalCosts) {
  const auto P = EpidemicParams::defaults();
  const auto em = build_epidemic_model(P);
  Vec p(4);
  p << 0.1, 0.3, 0.2, 0.4;
  EXPECT_DOUBLE_EQ(em.principal.c0(0.0, p), std::exp(P.sigmaA * 0.1 + P.sigmaB * 0.2));
  const double d = 0.4 - (P.pi0(AI) + P.pi0(AH));
  EXPECT_DOUBLE_EQ(em.principal.C0(p), P.sigmaP * d * d);
}

TEST(PlainNash, DegenerateModelRegimesCoincide) {
  Vec p0(2);
  p0 << 0.5, 0.5;
  const auto m = constant_model(Mat::Zero(2, 2), Mat::Zero(2, 2), Vec::Zero(2), Vec::Ones(2), p0);
  const auto cmp = compare_plain_nash(m, zero_principal(), Contract::zero(2));
  EXPECT_DOUBLE_EQ(cmp.with_contract.principal_cost, cmp.without_contract.principal_cost);
  EXPECT_DOUBLE_EQ(cmp.with_contract.agent_cost, cmp.without_contract.agent_cost);
}

TEST(PlainNash, AgentCostIsValueWithoutPayments) {
  const auto em = build_epidemic_model(EpidemicParams::defaults());
  Contract c = sample_contract(4);
  const auto cmp = compare_plain_nash(em.model, em.principal, c);
  EXPECT_DOUBLE_EQ(cmp.without_contract.agent_cost,
                   em.model.p0.dot(cmp.plain.u.row(0).transpose()));
  const auto direct = solve_nash(em.model, Contract::zero(4));
  EXPECT_NEAR(cmp.without_contract.agent_cost, direct.agent_cost, 1e-12);
  EXPECT_NEAR(cmp.with_contract.agent_cost, solve_nash(em.model, c).agent_cost, 1e-12);
}
