#pragma once

#include <cstdint>
#include <vector>

#include "mfg/numerics.hpp"

namespace mfg::growth {

// ---------------------------------------------------------------------------
// Pareto growth model
// ---------------------------------------------------------------------------

/// One-sided Pareto law μ^(q)(dx) = k q^k / x^{k+1} on [q, ∞).
struct ParetoState {
  double k = 1.0;
  double q = 1.0;

  void validate() const;
};

/// μ([x, ∞)): 1 for x ≤ q, (q/x)^k beyond.
double pareto_tail(const ParetoState& state, double x);

/// Density k q^k / x^{k+1} on [q, ∞), zero to the left of q.
double pareto_density(const ParetoState& state, double x);

/// Left endpoint q_t = q_0 exp(∫γ ds − σ²t/2 + σW⁰_t) on the nodes of
/// `grid`, with the γ integral by the trapezoid rule. `gamma_path` and
/// `w0_path` are node values.
std::vector<double> propagate_pareto(const ParetoState& state0,
                                     const TimeGrid& grid,
                                     const std::vector<double>& gamma_path,
                                     double sigma,
                                     const std::vector<double>& w0_path);

/// Particles X_T of dX = γ_t X dt + σ X dW⁰ (Euler, one common W⁰ given by
/// its node values) started from μ^(q_0): X_0 = q_0 U^{−1/k} with U uniform
/// from CounterRng(seed).
std::vector<double> simulate_pareto_particles(const ParetoState& state0,
                                              const TimeGrid& grid,
                                              const std::vector<double>& gamma_path,
                                              double sigma,
                                              const std::vector<double>& w0_path,
                                              int n_particles, std::uint64_t seed);

/// Kolmogorov-Smirnov distance sup_x |F_n(x) − F(x)| between the empirical
/// law of `samples` and μ^(q).
double pareto_ks_distance(std::vector<double> samples, const ParetoState& state);

/// Asymptotic 1% critical value 1.62762/√n of the one-sample KS statistic.
double ks_critical_1pct(int n);

/// Coefficients of f(x, μ, α) = c x^a / (dμ/dx)^b − (E/p) α^p / μ([x,∞))^b.
struct GrowthCostParams {
  double a_exp = 1.0;
  double b_exp = 1.0;
  double c_coef = 1.0;
  double E_coef = 1.0;
  double p_exp = 2.0;
  double sigma = 0.1;

  void validate() const;
};

/// Running cost f for a Pareto law. The density term is 0 left of q, where
/// the law has no density.
double growth_running_cost(double x, const ParetoState& state, double alpha,
                           const GrowthCostParams& cost);

/// α̂ = ((y/E) μ([x,∞))^b)^{1/(p−1)}, the stationary point in α of the
/// Hamiltonian y α + f. Throws DomainError if y/E < 0.
double growth_best_response(double x, const ParetoState& state, double y,
                            const GrowthCostParams& cost);

// ---------------------------------------------------------------------------
// Aiyagari diffusion model
// ---------------------------------------------------------------------------

struct AiyagariParams {
  double alpha_cd = 0.36;
  double A_tfp = 1.0;
  double delta = 0.05;
  double gamma_crra = 0.5;
  double horizon = 1.0;

  void validate() const;
};

struct Rates {
  double r;
  double w;
};

/// Competitive rent and wage for Cobb-Douglas output A K^α with unit labor:
/// r = αA K^{α−1} − δ, w = (1−α)A K^α. Throws DomainError for K ≤ 0.
Rates cobb_douglas_rates(double K, const AiyagariParams& params);

/// Average wealth μ̄_t on the grid nodes.
struct MeanWealthFlow {
  TimeGrid grid;
  std::vector<double> mu_bar;

  void validate() const;
};

/// Y_t = −exp(∫_t^T (αA μ̄_s^{α−1} − δ) ds) by the trapezoid rule.
std::vector<double> solve_adjoint_backward(const MeanWealthFlow& flow,
                                           const AiyagariParams& params);

/// The interval [−e^{cT}, −e^{−cT}], c = sup_t |αA μ̄_t^{α−1} − δ|, that
/// contains every adjoint path driven by `flow`.
std::pair<double, double> adjoint_bounds(const MeanWealthFlow& flow,
                                         const AiyagariParams& params);

/// Initial wealth law as a list of equally weighted atoms; path p starts
/// from atoms[p mod size].
struct WealthDistribution {
  std::vector<double> atoms{1.0};

  double mean() const;
  double at(int path) const { return atoms[path % atoms.size()]; }
};

struct ForwardOptions {
  double z0 = 1.0;
  /// Volatility of the productivity process; 0 gives the deterministic
  /// reduction Z ≡ z0 when z0 = 1.
  double z_vol = 1.0;
};

/// Euler paths of dZ = −(Z−1)dt + z_vol dW and
/// dA = [(1−α)A μ̄^α Z + (αA μ̄^{α−1}−δ)A − (−Y)^{−1/γ}]dt.
/// Component 0 of the ensemble is Z, component 1 is A.
/// Throws DomainError if Y ≥ 0 at some node.
PathEnsemble simulate_forward_state(const std::vector<double>& Y,
                                    const MeanWealthFlow& flow,
                                    const AiyagariParams& params,
                                    const WealthDistribution& a0, int n_paths,
                                    std::uint64_t seed,
                                    const ForwardOptions& options = {});

/// Consumption (−Y_t)^{−1/γ}, common to all paths.
std::vector<double> consumption_path(const std::vector<double>& Y,
                                     const AiyagariParams& params);

struct AiyagariSolution {
  MeanWealthFlow flow;
  std::vector<double> Y;
  std::vector<double> residuals;
  /// Standard error of the Monte Carlo mean wealth at each node, evaluated
  /// at the returned flow.
  std::vector<double> mu_stderr;
  /// True when some iterate had μ̄ ≤ 1e−8 and was floored.
  bool floored = false;
};

/// Damped fixed point μ̄ ← E[A_t] with frozen common random numbers, so the
/// Monte Carlo map is deterministic. Initial guess μ̄ ≡ E[A_0].
/// Throws NonConvergence carrying the residual history.
AiyagariSolution solve_aiyagari_mfg(const AiyagariParams& params,
                                    const WealthDistribution& a0,
                                    const FixedPointConfig& cfg, int steps,
                                    int n_paths, std::uint64_t seed);

/// Lower bound applied to μ̄ before it enters the rates.
inline constexpr double kMuFloor = 1e-8;

}  // namespace mfg::growth
