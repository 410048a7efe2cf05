#pragma once

#include <optional>
#include <vector>

#include "mfg/numerics.hpp"

namespace mfg::mining {

/// Coefficients of 0 = −(r+δ)U + (−δK + λU) U' + (K+ε)^{−1} − c.
struct MiningParams {
  double r = 0.05;
  double delta = 0.1;
  double lambda = 0.5;
  double eps = 0.1;
  double c = 0.2;

  void validate() const;
  /// Net flow payoff (K+ε)^{−1} − c.
  double payoff(double k) const { return 1.0 / (k + eps) - c; }
};

/// Values of U on the uniform nodes of [0, k_max].
struct GridFunction {
  double k_max = 5.0;
  int n_cells = 2000;
  std::vector<double> values;

  double step() const { return k_max / n_cells; }
  double node(int i) const { return i == n_cells ? k_max : i * step(); }
  /// Linear interpolation, clamped to the end values outside [0, k_max].
  double at(double k) const;
};

struct MiningGridConfig {
  double k_max = 5.0;
  int n_cells = 2000;
  double tol = 1e-10;
  int max_iter = 200;
};

struct MasterSolution {
  GridFunction U;
  /// Sup-norm residual of the discrete stationary equation at U.
  double residual;
  std::vector<double> residuals;
};

/// Upwind scheme keyed to the sign of the drift −δK + λU (forward
/// difference when positive, backward otherwise; one-sided at both ends),
/// solved by implicit pseudo-time steps whose size grows toward Newton.
/// Throws NonConvergence with the residual history.
MasterSolution solve_stationary_master(const MiningParams& params,
                                       const MiningGridConfig& cfg = {});

/// Sup-norm residual of the discrete equation for arbitrary node values.
double master_residual(const MiningParams& params, const GridFunction& U);

/// Node-wise residual of the discrete equation.
std::vector<double> master_residual_profile(const MiningParams& params,
                                            const GridFunction& U);

struct CharacteristicsReport {
  double value;
  double final_k;
  /// The path left [0, k_max] and U was extrapolated by its end values.
  bool extrapolated;
};

/// ∫₀^H e^{−(r+δ)t} ((K_t+ε)^{−1} − c) dt along dK = (−δK + λU(K)) dt, by
/// RK4 with U linearly interpolated. Requires e^{−(r+δ)H} < 1e−8.
CharacteristicsReport verify_by_characteristics(const GridFunction& U,
                                                const MiningParams& params, double k0,
                                                double horizon, double dt);

/// Smallest horizon with e^{−(r+δ)H} ≤ 1e−8 (rounded up to a whole number).
double oracle_horizon(const MiningParams& params);

struct HashrateTrajectory {
  TimeGrid grid;
  std::vector<double> k;
  /// Some step left [0, k_max] and was clamped back.
  bool clamped = false;
};

/// RK4 path of dK = (−δK + λU(K)) dt from k0 ∈ [0, k_max].
HashrateTrajectory hashrate_trajectory(const GridFunction& U, const MiningParams& params,
                                       double k0, double horizon, int steps);

/// Root K* of −δK + λU(K) with U linearly interpolated, if a sign change
/// is bracketed on the grid (the first one from the left).
std::optional<double> stationary_hashrate(const GridFunction& U,
                                          const MiningParams& params);

}  // namespace mfg::mining
