#pragma once

#include <Eigen/Dense>

#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "mfg/errors.hpp"

namespace mfg {

/// Uniform discretization of [t0, t1] into `steps` intervals.
class TimeGrid {
 public:
  TimeGrid(double t0, double t1, int steps);

  double t0() const noexcept { return t0_; }
  double t1() const noexcept { return t1_; }
  int steps() const noexcept { return steps_; }
  int nodes() const noexcept { return steps_ + 1; }
  double step() const noexcept { return (t1_ - t0_) / steps_; }
  double time(int k) const noexcept {
    return k == steps_ ? t1_ : t0_ + k * step();
  }
  std::vector<double> times() const;

  /// Index k of the interval [t_k, t_{k+1}] containing t, and the
  /// fractional position inside it. Throws DomainError outside [t0, t1].
  std::pair<int, double> locate(double t) const;

  /// Linear interpolation of node values at time t.
  double interpolate(std::span<const double> values, double t) const;

 private:
  double t0_;
  double t1_;
  int steps_;
};

enum class Direction { Forward, Backward };

using State = Eigen::VectorXd;
using VectorField = std::function<State(double, const State&)>;
using ScalarField = std::function<double(double, double)>;

/// One classical RK4 step of size h (h < 0 integrates backward).
template <typename Y, typename F>
Y rk4_step(const F& field, double t, const Y& y, double h) {
  const Y k1 = field(t, y);
  const Y k2 = field(t + 0.5 * h, Y(y + (0.5 * h) * k1));
  const Y k3 = field(t + 0.5 * h, Y(y + (0.5 * h) * k2));
  const Y k4 = field(t + h, Y(y + h * k3));
  return y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

inline bool all_finite(double y) { return std::isfinite(y); }
inline bool all_finite(const State& y) { return y.allFinite(); }

/// Fixed-step RK4 solution sampled on every node of `grid`. Element k of
/// the result is the state at grid.time(k) in both directions; a backward
/// integration treats y0 as the terminal value at t1.
std::vector<State> integrate_ode(const VectorField& field, const State& y0,
                                 const TimeGrid& grid, Direction direction);
std::vector<double> integrate_ode(const ScalarField& field, double y0,
                                  const TimeGrid& grid, Direction direction);

/// Sup norm over all components.
double sup_norm(const Eigen::Ref<const Eigen::VectorXd>& v);

struct FixedPointConfig {
  double damping = 1.0;
  double tol = 1e-8;
  int max_iter = 500;

  void validate() const;
};

struct FixedPointResult {
  /// The map evaluated at the first certified iterate.
  Eigen::VectorXd value;
  /// The certified iterate itself (residual < tol).
  Eigen::VectorXd iterate;
  /// Sup-norm residual |map(x_k) - x_k| for every iteration, in order.
  std::vector<double> residuals;
};

using FlowMap = std::function<Eigen::VectorXd(const Eigen::VectorXd&)>;

/// Damped Picard iteration x <- (1 - d) x + d map(x).
/// Throws NonConvergence carrying the residual history.
FixedPointResult solve_fixed_point(const FlowMap& map, Eigen::VectorXd x0,
                                   const FixedPointConfig& cfg);

// ---------------------------------------------------------------------------
// Counter-based random numbers
// ---------------------------------------------------------------------------

/// Philox-4x32-10 block cipher. Stateless: the same (key, counter) always
/// yields the same 128 output bits.
std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> counter,
                                        std::array<std::uint32_t, 2> key);

/// Random draws addressed by (seed, stream, step, lane). `stream` is
/// typically a path index and `step` a time index; `lane` distinguishes
/// several draws needed at the same (stream, step).
class CounterRng {
 public:
  explicit CounterRng(std::uint64_t seed) : seed_(seed) {}

  std::uint64_t seed() const noexcept { return seed_; }

  /// Two independent uniforms in (0, 1).
  std::array<double, 2> uniforms(std::uint64_t stream, std::uint32_t step,
                                 std::uint32_t lane = 0) const;
  /// Two independent standard normals (Box-Muller).
  std::array<double, 2> normals(std::uint64_t stream, std::uint32_t step,
                                std::uint32_t lane = 0) const;
  /// Single standard normal; lanes 2j and 2j+1 share one Philox block.
  double normal(std::uint64_t stream, std::uint32_t step,
                std::uint32_t lane = 0) const;

 private:
  std::uint64_t seed_;
};

// ---------------------------------------------------------------------------
// Path ensembles
// ---------------------------------------------------------------------------

/// `n_paths` sample paths of a `dim`-component state on the nodes of `grid`.
/// Storage is path-major: values[(path * nodes + node) * dim + component].
struct PathEnsemble {
  TimeGrid grid;
  int n_paths = 0;
  int dim = 1;
  std::uint64_t seed = 0;
  std::vector<double> values;
  /// Paths that produced a non-finite state (their later nodes are NaN).
  std::vector<int> flagged;

  PathEnsemble(TimeGrid g, int paths, int components, std::uint64_t s);

  double& at(int path, int node, int component = 0) {
    return values[(static_cast<std::size_t>(path) * grid.nodes() + node) * dim +
                  component];
  }
  double at(int path, int node, int component = 0) const {
    return values[(static_cast<std::size_t>(path) * grid.nodes() + node) * dim +
                  component];
  }
  int flagged_count() const noexcept { return static_cast<int>(flagged.size()); }

  /// Sample mean and standard error of one component at one node, over
  /// unflagged paths.
  std::pair<double, double> mean_and_stderr(int node, int component = 0) const;
};

using Coefficient = std::function<double(double t, double x)>;

/// Euler-Maruyama paths of dX = drift(t, X) dt + diffusion(t, X) dW with the
/// Gaussian increment of (path, step) drawn from CounterRng(seed).
PathEnsemble simulate_sde(const Coefficient& drift, const Coefficient& diffusion,
                          double x0, const TimeGrid& grid, int n_paths,
                          std::uint64_t seed);

/// One Brownian path on the grid nodes (W_0 = 0), drawn from stream
/// `stream` of CounterRng(seed).
std::vector<double> brownian_path(const TimeGrid& grid, std::uint64_t seed,
                                  std::uint64_t stream = 0);

/// Composite trapezoid rule over grid nodes.
double trapezoid(std::span<const double> values, double h);

}  // namespace mfg
