#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <limits>
#include <vector>

#include "mfg/numerics.hpp"

namespace mfg::lq {

/// Number of banks N, or the mean-field limit marker.
class PlayerCount {
 public:
  static PlayerCount finite(int n);
  static PlayerCount infinite() { return PlayerCount(0); }

  bool is_infinite() const noexcept { return n_ == 0; }
  /// N; throws DomainError for the limit marker.
  int value() const;
  /// 1/N, with 1/N := 0 at the limit marker.
  double inverse() const noexcept { return n_ == 0 ? 0.0 : 1.0 / n_; }

 private:
  explicit PlayerCount(int n) : n_(n) {}
  int n_;
};

/// Inter-bank borrowing and lending game. Player i pays
/// ½α² − qα(X̄−Xⁱ) + (ε/2)(X̄−Xⁱ)² per unit time and (c/2)(X̄−Xⁱ)² at T.
struct LqParams {
  double a = 0.0;
  double q = 0.0;
  double eps = 0.0;
  double c = 0.0;
  double sigma = 1.0;
  double rho_corr = 0.0;
  PlayerCount n_players = PlayerCount::finite(10);
  double horizon = 1.0;

  /// Throws DomainError when eps < q², sigma < 0 or rho_corr ∉ [0, 1].
  /// sigma = 0 is accepted as the deterministic reduction.
  void validate() const;
};

enum class LoopKind { Open, Closed, Limit };

const char* to_string(LoopKind kind);

/// Solution η of one of the three Riccati equations on the grid nodes.
struct RiccatiPath {
  TimeGrid grid;
  std::vector<double> eta;
  LoopKind kind;

  /// Linear interpolation of η at time t; throws DomainError off the grid.
  double at(double t) const { return grid.interpolate(eta, t); }
};

/// Backward RK4 solution of the open-loop, closed-loop or mean-field limit
/// Riccati equation with terminal value η_T = c. The finite kinds need a
/// finite player count unless N is the limit marker, in which case all three
/// equations coincide.
RiccatiPath solve_riccati(const LqParams& params, const TimeGrid& grid,
                          LoopKind kind);

/// Equilibrium feedback gain g_t = q + (1 − 1/N) η_t; player i plays
/// g_t (X̄ − Xⁱ).
double feedback_gain(double t, const RiccatiPath& riccati,
                     const LqParams& params);

/// A single player scaling its equilibrium gain while all others keep theirs.
struct Deviation {
  int player = -1;
  double gain_scale = 1.0;

  bool active() const noexcept { return player >= 0 && gain_scale != 1.0; }
};

/// Euler paths of all N bank states under the feedback equilibrium built on
/// `riccati` (one shared W⁰ per sample, independent Wⁱ). The ensemble has
/// dim = N components; time steps are those of riccati.grid.
PathEnsemble simulate_equilibrium(const LqParams& params,
                                  const RiccatiPath& riccati,
                                  const Eigen::VectorXd& x0, int n_samples,
                                  std::uint64_t seed,
                                  const Deviation& deviation = {});

struct CostEstimate {
  /// Realized cost of every (sample, player).
  Eigen::MatrixXd samples;
  /// Per-player sample mean and standard error.
  Eigen::VectorXd mean;
  Eigen::VectorXd stderr_;
};

/// Trapezoid-in-time realized costs on the ensemble, with each player's
/// control taken from the same feedback (and deviation) used to simulate it.
CostEstimate estimate_cost(const LqParams& params, const PathEnsemble& ensemble,
                           const RiccatiPath& riccati,
                           const Deviation& deviation = {});

/// Cross-sectional mean and standard deviation of the states of one sample
/// at every node.
struct CrossSection {
  std::vector<double> mean;
  std::vector<double> std;
};
CrossSection cross_section(const PathEnsemble& ensemble, int sample);

}  // namespace mfg::lq
