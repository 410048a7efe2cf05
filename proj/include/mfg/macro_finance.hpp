#pragma once

#include <cstdint>
#include <functional>

#include "mfg/numerics.hpp"

namespace mfg::macro {

// ---------------------------------------------------------------------------
// One population of households with money
// ---------------------------------------------------------------------------

struct OnePopParams {
  double a = 0.15;
  double rho = 0.05;
  double kappa = 2.0;
  double delta = 0.03;
  double sigma = 0.3;
  double sigma0 = 0.0;
  double muM = 0.02;
  double sigmaM = 0.1;

  /// Sign and positivity constraints; existence is checked by the solver.
  void validate() const;
};

struct OnePopEquilibrium {
  double vartheta;
  /// 1 − ϑ, computed directly to avoid cancellation.
  double one_minus_vartheta;
  double p;
  double q;
  double p_plus_q;
  double iota;
  double r;
  double theta;
  /// The alternative value ϑ(1−κa)/(1−ϑ+κρ), which is inconsistent with
  /// ϑ = p/(p+q); reported for comparison only.
  double p_printed;
};

/// Stationary equilibrium in closed form:
///   1−ϑ = sqrt((ρ+μᴹ−(σᴹ)²)/σ²),  p+q = (1+κa)/(1−ϑ+κρ),
///   q = (1−ϑ)(p+q),  p = ϑ(p+q),  ι̂ = ((1−ϑ)a−ρ)/(1−ϑ+κρ),
///   r = κ⁻¹log(1+κι̂) − δ − [μᴹ+σᴹ(σ⁰−σᴹ)] − (σ⁰−σᴹ)(σ⁰−σᴹ+σᴹX),
///   1−θ̂ = X(1−ϑ),  X = (((a−ι̂)/q)(1−ϑ)+μᴹ)/((σᴹ)²+σ²(1−ϑ)²).
/// Throws Infeasible naming the violated inequality when
/// ρ+μᴹ−(σᴹ)² ≤ 0, σ ≤ sqrt(ρ+μᴹ−(σᴹ)²) or 1+κa ≤ 0.
OnePopEquilibrium one_pop_stationary_equilibrium(const OnePopParams& params);

// ---------------------------------------------------------------------------
// Experts and households
// ---------------------------------------------------------------------------

struct TwoPopParams {
  double a = 0.5;
  double rho = 0.25;
  double kappa = 1.0;
  double delta = 0.05;
  double sigma = 0.1;

  void validate() const;
};

struct TwoPopConstants {
  double q;
  double iota;
};

/// q = (1+κa)/(1+κρ), ι = (a−ρ)/(1+κρ).
TwoPopConstants two_pop_constants(const TwoPopParams& params);

/// r = ρ + κ⁻¹log((1+κa)/(1+κρ)) − δ − σ²/η. Throws DomainError for η ∉ (0,1).
double two_pop_interest_rate(double eta, const TwoPopParams& params);

/// Drift σ²(1−η)²/η and volatility σ(1−η) of the expert wealth share.
double eta_drift(double eta, const TwoPopParams& params);
double eta_volatility(double eta, const TwoPopParams& params);

/// Called once per step with the share before and after the step and the
/// Brownian increment accumulated over the step.
using EtaObserver = std::function<void(int path, int step, double eta_before,
                                       double eta_after, double dW)>;

struct EtaOptions {
  /// Store every record_stride-th node; grid.steps() must be a multiple.
  int record_stride = 1;
  /// Upper bound on the relative variance σ²(1−η)²h_sub/η² of one substep.
  double max_substep_variance = 1e-3;
  int max_substeps = 4096;
  EtaObserver observer;
};

/// Paths of dη = σ²(1−η)²/η dt + σ(1−η) dW⁰ advanced in log-odds
/// λ = log(η/(1−η)), where dλ = σ²/(2η²) dt + (σ/η) dW⁰ (Euler). Each
/// step of `grid` is split into substeps, their number set by η at the step
/// start so that the relative variance σ²(1−η)²h_sub/η² of a substep stays
/// below max_substep_variance. Every stored η lies strictly inside (0, 1): when
/// the logistic map of λ rounds to 0 or 1, the nearest interior double is
/// stored instead.
PathEnsemble simulate_eta(const TwoPopParams& params, double eta0,
                          const TimeGrid& grid, int n_paths, std::uint64_t seed,
                          const EtaOptions& options = {});

struct FellerDiagnostics {
  double scale;
  double speed_density;
};

/// Scale ½(1 − 1/(2x)) and speed density (8/σ²) x²/(1−x)².
FellerDiagnostics feller_diagnostics(const TwoPopParams& params, double x);

}  // namespace mfg::macro
