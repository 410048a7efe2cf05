#include "mfg/numerics.hpp"

#include <algorithm>
#include <limits>
#include <numbers>
#include <string>

namespace mfg {

TimeGrid::TimeGrid(double t0, double t1, int steps)
    : t0_(t0), t1_(t1), steps_(steps) {
  if (!(std::isfinite(t0) && std::isfinite(t1)) || !(t1 > t0)) {
    throw DomainError("TimeGrid: require finite t1 > t0");
  }
  if (steps <= 0) {
    throw DomainError("TimeGrid: steps must be positive");
  }
}

std::vector<double> TimeGrid::times() const {
  std::vector<double> out(nodes());
  for (int k = 0; k < nodes(); ++k) out[k] = time(k);
  return out;
}

std::pair<int, double> TimeGrid::locate(double t) const {
  const double h = step();
  const double slack = 1e-12 * (t1_ - t0_);
  if (!(t >= t0_ - slack && t <= t1_ + slack)) {
    throw DomainError("time " + std::to_string(t) + " outside grid [" +
                      std::to_string(t0_) + ", " + std::to_string(t1_) + "]");
  }
  double s = (t - t0_) / h;
  int k = static_cast<int>(std::floor(s));
  k = std::clamp(k, 0, steps_ - 1);
  return {k, std::clamp(s - k, 0.0, 1.0)};
}

double TimeGrid::interpolate(std::span<const double> values, double t) const {
  if (static_cast<int>(values.size()) != nodes()) {
    throw DomainError("interpolate: value count does not match grid nodes");
  }
  auto [k, w] = locate(t);
  return (1.0 - w) * values[k] + w * values[k + 1];
}

namespace {

template <typename Y, typename F>
std::vector<Y> rk4_path(const F& field, const Y& y0, const TimeGrid& grid,
                        Direction direction) {
  const int n = grid.steps();
  const double h = grid.step();
  std::vector<Y> path(grid.nodes(), y0);
  if (direction == Direction::Forward) {
    for (int k = 0; k < n; ++k) {
      path[k + 1] = rk4_step(field, grid.time(k), path[k], h);
      if (!all_finite(path[k + 1])) throw IntegrationBlowup(grid.time(k + 1));
    }
  } else {
    for (int k = n; k > 0; --k) {
      path[k - 1] = rk4_step(field, grid.time(k), path[k], -h);
      if (!all_finite(path[k - 1])) throw IntegrationBlowup(grid.time(k - 1));
    }
  }
  return path;
}

}  // namespace

std::vector<State> integrate_ode(const VectorField& field, const State& y0,
                                 const TimeGrid& grid, Direction direction) {
  if (!y0.allFinite()) throw IntegrationBlowup(
      direction == Direction::Forward ? grid.t0() : grid.t1());
  return rk4_path<State>(field, y0, grid, direction);
}

std::vector<double> integrate_ode(const ScalarField& field, double y0,
                                  const TimeGrid& grid, Direction direction) {
  if (!std::isfinite(y0)) throw IntegrationBlowup(
      direction == Direction::Forward ? grid.t0() : grid.t1());
  return rk4_path<double>(field, y0, grid, direction);
}

double sup_norm(const Eigen::Ref<const Eigen::VectorXd>& v) {
  return v.size() == 0 ? 0.0 : v.cwiseAbs().maxCoeff();
}

void FixedPointConfig::validate() const {
  if (!(damping > 0.0 && damping <= 1.0)) {
    throw DomainError("FixedPointConfig: damping must lie in (0, 1]");
  }
  if (!(tol > 0.0)) throw DomainError("FixedPointConfig: tol must be positive");
  if (max_iter <= 0) {
    throw DomainError("FixedPointConfig: max_iter must be positive");
  }
}

FixedPointResult solve_fixed_point(const FlowMap& map, Eigen::VectorXd x0,
                                   const FixedPointConfig& cfg) {
  cfg.validate();
  FixedPointResult result;
  Eigen::VectorXd x = std::move(x0);
  for (int it = 0; it < cfg.max_iter; ++it) {
    Eigen::VectorXd y = map(x);
    if (y.size() != x.size()) {
      throw DomainError("solve_fixed_point: map changed the flow dimension");
    }
    const double res = sup_norm(y - x);
    result.residuals.push_back(res);
    if (!std::isfinite(res)) {
      throw NonConvergence("fixed point iteration diverged", result.residuals);
    }
    if (res < cfg.tol) {
      result.iterate = std::move(x);
      result.value = std::move(y);
      return result;
    }
    x = (1.0 - cfg.damping) * x + cfg.damping * y;
  }
  throw NonConvergence("fixed point iteration did not reach tol " +
                           std::to_string(cfg.tol) + " in " +
                           std::to_string(cfg.max_iter) + " iterations",
                       result.residuals);
}

// ---------------------------------------------------------------------------

std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> ctr,
                                        std::array<std::uint32_t, 2> key) {
  constexpr std::uint32_t kM0 = 0xD2511F53u;
  constexpr std::uint32_t kM1 = 0xCD9E8D57u;
  constexpr std::uint32_t kW0 = 0x9E3779B9u;
  constexpr std::uint32_t kW1 = 0xBB67AE85u;
  for (int round = 0; round < 10; ++round) {
    const std::uint64_t p0 = static_cast<std::uint64_t>(kM0) * ctr[0];
    const std::uint64_t p1 = static_cast<std::uint64_t>(kM1) * ctr[2];
    const auto hi0 = static_cast<std::uint32_t>(p0 >> 32);
    const auto lo0 = static_cast<std::uint32_t>(p0);
    const auto hi1 = static_cast<std::uint32_t>(p1 >> 32);
    const auto lo1 = static_cast<std::uint32_t>(p1);
    ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
    key[0] += kW0;
    key[1] += kW1;
  }
  return ctr;
}

namespace {

// 53-bit uniform in (0, 1) from two 32-bit words.
double to_open_unit(std::uint32_t hi, std::uint32_t lo) {
  const std::uint64_t bits =
      ((static_cast<std::uint64_t>(hi) << 32) | lo) >> 11;
  return (static_cast<double>(bits) + 0.5) * 0x1.0p-53;
}

}  // namespace

std::array<double, 2> CounterRng::uniforms(std::uint64_t stream,
                                           std::uint32_t step,
                                           std::uint32_t lane) const {
  const auto out = philox4x32(
      {step, lane, static_cast<std::uint32_t>(stream),
       static_cast<std::uint32_t>(stream >> 32)},
      {static_cast<std::uint32_t>(seed_), static_cast<std::uint32_t>(seed_ >> 32)});
  return {to_open_unit(out[0], out[1]), to_open_unit(out[2], out[3])};
}

std::array<double, 2> CounterRng::normals(std::uint64_t stream,
                                          std::uint32_t step,
                                          std::uint32_t lane) const {
  const auto u = uniforms(stream, step, lane);
  const double radius = std::sqrt(-2.0 * std::log(u[0]));
  const double angle = 2.0 * std::numbers::pi * u[1];
  return {radius * std::cos(angle), radius * std::sin(angle)};
}

double CounterRng::normal(std::uint64_t stream, std::uint32_t step,
                          std::uint32_t lane) const {
  return normals(stream, step, lane / 2)[lane % 2];
}

// ---------------------------------------------------------------------------

PathEnsemble::PathEnsemble(TimeGrid g, int paths, int components,
                           std::uint64_t s)
    : grid(g), n_paths(paths), dim(components), seed(s) {
  if (paths <= 0) throw DomainError("PathEnsemble: n_paths must be positive");
  if (components <= 0) throw DomainError("PathEnsemble: dim must be positive");
  values.assign(static_cast<std::size_t>(paths) * grid.nodes() * components,
                0.0);
}

std::pair<double, double> PathEnsemble::mean_and_stderr(int node,
                                                        int component) const {
  double sum = 0.0;
  double sum_sq = 0.0;
  int count = 0;
  for (int p = 0; p < n_paths; ++p) {
    const double v = at(p, node, component);
    if (!std::isfinite(v)) continue;
    sum += v;
    sum_sq += v * v;
    ++count;
  }
  if (count < 2) return {count ? sum : std::numeric_limits<double>::quiet_NaN(),
                         std::numeric_limits<double>::infinity()};
  const double mean = sum / count;
  const double var = std::max(0.0, (sum_sq - count * mean * mean) / (count - 1));
  return {mean, std::sqrt(var / count)};
}

PathEnsemble simulate_sde(const Coefficient& drift, const Coefficient& diffusion,
                          double x0, const TimeGrid& grid, int n_paths,
                          std::uint64_t seed) {
  PathEnsemble out(grid, n_paths, 1, seed);
  const CounterRng rng(seed);
  const double h = grid.step();
  const double sqrt_h = std::sqrt(h);
  for (int p = 0; p < n_paths; ++p) {
    double x = x0;
    out.at(p, 0) = x;
    bool bad = !std::isfinite(x);
    for (int k = 0; k < grid.steps(); ++k) {
      if (!bad) {
        const double t = grid.time(k);
        const double dw = sqrt_h * rng.normal(p, k);
        x = x + drift(t, x) * h + diffusion(t, x) * dw;
        if (!std::isfinite(x)) bad = true;
      }
      out.at(p, k + 1) = bad ? std::numeric_limits<double>::quiet_NaN() : x;
    }
    if (bad) out.flagged.push_back(p);
  }
  return out;
}

std::vector<double> brownian_path(const TimeGrid& grid, std::uint64_t seed,
                                  std::uint64_t stream) {
  const CounterRng rng(seed);
  const double sqrt_h = std::sqrt(grid.step());
  std::vector<double> w(grid.nodes(), 0.0);
  for (int k = 0; k < grid.steps(); ++k) {
    w[k + 1] = w[k] + sqrt_h * rng.normal(stream, k);
  }
  return w;
}

double trapezoid(std::span<const double> values, double h) {
  if (values.size() < 2) return 0.0;
  double s = 0.5 * (values.front() + values.back());
  for (std::size_t i = 1; i + 1 < values.size(); ++i) s += values[i];
  return s * h;
}

}  // namespace mfg
