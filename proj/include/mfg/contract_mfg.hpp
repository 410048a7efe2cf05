#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "mfg/numerics.hpp"

namespace mfg::contract {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

/// q̄_ij(t, p) for i ≠ j.
using BaseRate = std::function<double(double t, int i, int j, const Vec& p)>;
/// c₁(t, i, p).
using StateCost = std::function<double(double t, int i, const Vec& p)>;

enum class RunningUtility { Linear, SqrtShift };

/// u(r) = r, or √(1+r) − 1.
double running_utility(RunningUtility kind, double r);

struct RateBounds {
  double c1;
  double c2;
};

/// Finite-state model of the solvable class: rates
/// q_ij = q̄_ij(t, p) + λ_ij(α − α̲) and running cost c₁ + γ_i α²/2.
struct FiniteStateModel {
  int m = 2;
  BaseRate base_rates;
  Mat lambda;
  double alpha_lo = 0.0;
  double alpha_hi = 1.0;
  StateCost c1;
  Vec gamma;
  RunningUtility u_run = RunningUtility::Linear;
  double horizon = 1.0;
  Vec p0;
  /// Declared bounds on the allowed off-diagonal rates, if any.
  std::optional<RateBounds> bounds;
  /// allowed(i, j) = 0 marks transitions that are structurally absent; an
  /// empty matrix allows every pair.
  Eigen::MatrixXi allowed;

  void validate() const;
  /// Whether every row has Σ_{j≠i} λ_ij > 0.
  bool controllable() const;
  bool is_allowed(int i, int j) const;
};

/// Generator with off-diagonals q̄_ij + λ_ij(α_i − α̲) and diagonals equal
/// to minus the row sums. Throws DomainError for actions out of bounds.
Mat build_q_matrix(const FiniteStateModel& model, double t, const Vec& alpha,
                   const Vec& p);

struct HamiltonianMin {
  double alpha;
  /// c₁ + γ_i α̂²/2 + Σ_j (Q − Q⁰)_ij z_j with Q⁰ the unit-rate generator;
  /// the payment term is left to the caller.
  double value;
};

/// α̂ = clamp(−(1/γ_i) Σ_{j≠i} λ_ij (z_j − z_i)) and the Hamiltonian there.
HamiltonianMin minimize_hamiltonian(const FiniteStateModel& model, double t,
                                    int i, const Vec& z, const Vec& p);

/// Hamiltonian at an arbitrary action (same convention as above).
double hamiltonian(const FiniteStateModel& model, double t, int i, const Vec& z,
                   double alpha, const Vec& p);

/// Piecewise-constant payment stream on uniform knots plus a per-state
/// terminal payment.
struct Contract {
  Vec r_knots;
  Vec xi;

  /// r on the knot interval that contains t ∈ [0, horizon].
  double r_at(double t, double horizon) const;
  static Contract zero(int m, int n_knots = 8);
};

struct SolverConfig {
  int steps = 200;
  FixedPointConfig fixed_point{0.5, 1e-8, 500};
  /// Starting flow (nodes × m); the constant p° when absent or misshapen.
  std::optional<Mat> initial_flow;
};

/// Nodes × states arrays on `grid`.
struct MFGEquilibrium {
  TimeGrid grid;
  Mat p;
  /// Expected remaining cost given the current state; u(T) = −ξ.
  Mat u;
  Mat alpha;
  double agent_cost = 0.0;
  double residual = 0.0;
  std::vector<double> residuals;
  /// Largest total mass moved by the simplex projection in a forward step.
  double max_projection = 0.0;
  /// Number of allowed off-diagonal rates outside the declared bounds.
  int rate_violations = 0;
};

/// Damped forward-backward iteration on the flow p.
/// Backward: u̇_i = −[c₁ + γ_i α̂_i²/2 − u(r_t) + Σ_j q_ij (u_j − u_i)],
/// u(T) = −ξ. Forward: ṗ = Qᵀp (RK4, then projection onto the simplex).
/// Throws NonConvergence carrying the residual history.
MFGEquilibrium solve_nash(const FiniteStateModel& model, const Contract& contract,
                          const SolverConfig& cfg = {});

/// Chain paths by thinning against `rate_bound` (default: C₂(m−1) if the
/// model declares bounds, otherwise 1.25 × the largest exit rate on the
/// grid). Feedback and flow are linearly interpolated between nodes. Node
/// values are state indices. Throws Error if a rate exceeds the bound.
PathEnsemble simulate_chain(const FiniteStateModel& model, const MFGEquilibrium& eq,
                            int n_paths, std::uint64_t seed,
                            std::optional<double> rate_bound = std::nullopt);

/// Fraction of paths in each state at each node (nodes × m).
Mat occupancy(const PathEnsemble& chains, int m);

struct PrincipalSpec {
  std::function<double(double t, const Vec& p)> c0;
  std::function<double(const Vec& p)> C0;
  double kappa = 0.0;
};

struct ContractValue {
  double agent_cost;
  double principal_cost;
  bool feasible;
};

/// J = Σ p°_i u_i(0) and J₀ = ∫(c₀ + r) dt + C₀(p_T) + Σ p_i(T) ξ_i
/// (trapezoid rule).
ContractValue evaluate_contract(const FiniteStateModel& model,
                                const PrincipalSpec& principal,
                                const Contract& contract, const MFGEquilibrium& eq);

struct ContractParameterization {
  int n_knots = 8;
  double r_max = 2.0;
  double xi_lo = -2.0;
  double xi_hi = 2.0;
};

struct SearchConfig {
  int restarts = 4;
  int max_evals = 2000;
  double initial_step = 0.5;
  double size_tol = 1e-7;
  double penalty0 = 10.0;
  SolverConfig solver;
};

struct SearchTraceEntry {
  int restart;
  int evaluations;
  double penalty_weight;
  double objective;
  double value;
  double violation;
};

struct ContractOptimum {
  Contract contract;
  double value = 0.0;
  double agent_cost = 0.0;
  int evaluations = 0;
  std::vector<SearchTraceEntry> trace;
};

/// Nelder-Mead search with restarts over (r knots, ξ) minimizing
/// J₀ + w·max(0, J − κ)², w ×10 per restart while the violation is ≥ 1e−6.
/// Each candidate is first shifted by a uniform ξ offset toward J = κ,
/// which leaves the equilibrium flow unchanged. Throws Infeasible when no
/// evaluated contract satisfies J ≤ κ + 1e−6.
ContractOptimum optimize_contract(const FiniteStateModel& model,
                                  const PrincipalSpec& principal,
                                  const ContractParameterization& param,
                                  const SearchConfig& search,
                                  const std::optional<Contract>& start = std::nullopt);

enum class ForwardMode {
  /// Z is the state-wise value u(t), run forward from u(0); the terminal
  /// payment −u(T) is state-dependent and bounded like ξ.
  MarkovValue,
  /// Z is a free piecewise-constant per-state path; the terminal payment
  /// −Y_T is path-dependent.
  FreeKnots,
};

struct ForwardControlConfig {
  ForwardMode mode = ForwardMode::MarkovValue;
  ContractParameterization contract;
  /// Bounds on free Z knot values.
  double z_lo = -5.0;
  double z_hi = 5.0;
  int steps = 200;
};

/// Principal cost of a forward candidate: p and Z are integrated forward,
/// and E[−Y_T] = −Y₀ + ∫ Σ p_i (c₁ + γ_i α̂_i²/2 − u(r)) dt.
struct ForwardEvaluation {
  double principal_cost;
  double agent_cost;
  Mat p;
  Mat z;
};

/// Free mode with an explicit Z path on the nodes of a `steps` grid.
ForwardEvaluation evaluate_forward_free(const FiniteStateModel& model,
                                        const PrincipalSpec& principal,
                                        const Mat& z_path, const Vec& r_knots,
                                        double y0, int steps);

/// Markov mode started from u(0) = u0.
ForwardEvaluation evaluate_forward_markov(const FiniteStateModel& model,
                                          const PrincipalSpec& principal,
                                          const Vec& u0, const Vec& r_knots,
                                          int steps);

struct ForwardControlResult {
  double value = 0.0;
  double agent_cost = 0.0;
  Vec r_knots;
  /// MarkovValue: u(0). FreeKnots: Z knots, state-major (m × n_knots).
  Vec parameters;
  int evaluations = 0;
  std::vector<SearchTraceEntry> trace;
};

/// Outer Nelder-Mead search for the forward reformulation. In FreeKnots
/// mode Y₀ = κ.
ForwardControlResult principal_forward_control(const FiniteStateModel& model,
                                               const PrincipalSpec& principal,
                                               const ForwardControlConfig& cfg,
                                               const SearchConfig& search);

// ---------------------------------------------------------------------------
// Epidemic containment
// ---------------------------------------------------------------------------

/// States in order AI, AH, BI, BH.
enum EpidemicState { AI = 0, AH = 1, BI = 2, BH = 3 };

using ShareFunction = std::function<double(double)>;

struct EpidemicParams {
  ShareFunction thetaA_minus;
  ShareFunction thetaA_plus;
  ShareFunction thetaB_minus;
  ShareFunction thetaB_plus;
  double nuI = 1.0;
  double nuH = 1.0;
  ShareFunction phiA;
  ShareFunction phiB;
  double gammaI = 2.0;
  double gammaH = 1.0;
  double sigmaA = 1.0;
  double sigmaB = 1.0;
  double sigmaP = 2.0;
  Vec pi0;
  double alpha_lo = 0.0;
  double alpha_hi = 2.0;
  double horizon = 1.0;
  double kappa = 0.0;
  RunningUtility u_run = RunningUtility::Linear;

  /// Affine rates and costs with distinct cities.
  static EpidemicParams defaults();
};

/// Infected share π_I/(π_I + π_H) in one city, 0 for an empty city.
double infected_share(double infected, double healthy);

struct EpidemicModel {
  FiniteStateModel model;
  PrincipalSpec principal;
};

EpidemicModel build_epidemic_model(const EpidemicParams& params);

struct PlainNashComparison {
  MFGEquilibrium contracted;
  MFGEquilibrium plain;
  ContractValue with_contract;
  ContractValue without_contract;
};

/// Solves the game without payments and evaluates the principal's cost
/// functional at both equilibria.
PlainNashComparison compare_plain_nash(const FiniteStateModel& model,
                                       const PrincipalSpec& principal,
                                       const Contract& optimized,
                                       const SolverConfig& cfg = {});

}  // namespace mfg::contract
