#include "mfg/mining.hpp"

#include <algorithm>
#include <cmath>

namespace mfg::mining {

namespace {

void require(bool ok, const std::string& what) {
  if (!ok) throw DomainError(what);
}

// Upwind difference at node i: forward when the drift is positive, backward
// otherwise; one-sided at the ends.
bool use_forward(int i, int n, double drift) {
  if (i == 0) return true;
  if (i == n) return false;
  return drift > 0.0;
}

// Residual vector F(U) of the discrete equation.
std::vector<double> residual_vector(const MiningParams& P, const GridFunction& G,
                                    const std::vector<double>& u) {
  const int n = G.n_cells;
  const double h = G.step();
  std::vector<double> F(n + 1);
  for (int i = 0; i <= n; ++i) {
    const double k = G.node(i);
    const double b = -P.delta * k + P.lambda * u[i];
    const double d = use_forward(i, n, b) ? (u[i + 1] - u[i]) / h : (u[i] - u[i - 1]) / h;
    F[i] = -(P.r + P.delta) * u[i] + b * d + P.payoff(k);
  }
  return F;
}

double sup_abs(const std::vector<double>& v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}

// Thomas algorithm for a tridiagonal system; sub[0] and sup[n−1] unused.
std::vector<double> thomas(std::vector<double> sub, std::vector<double> diag,
                           std::vector<double> sup, std::vector<double> rhs) {
  const std::size_t n = diag.size();
  for (std::size_t i = 1; i < n; ++i) {
    const double w = sub[i] / diag[i - 1];
    diag[i] -= w * sup[i - 1];
    rhs[i] -= w * rhs[i - 1];
  }
  std::vector<double> x(n);
  x[n - 1] = rhs[n - 1] / diag[n - 1];
  for (std::size_t i = n - 1; i-- > 0;) x[i] = (rhs[i] - sup[i] * x[i + 1]) / diag[i];
  return x;
}

}  // namespace

void MiningParams::validate() const {
  require(std::isfinite(r) && std::isfinite(delta) && std::isfinite(lambda) &&
              std::isfinite(eps) && std::isfinite(c),
          "mining parameters must be finite");
  require(r > 0.0, "r must be positive");
  require(delta >= 0.0, "delta must be non-negative");
  require(lambda >= 0.0, "lambda must be non-negative");
  require(eps > 0.0, "eps must be positive");
  require(c >= 0.0, "c must be non-negative");
}

double GridFunction::at(double k) const {
  if (k <= 0.0) return values.front();
  if (k >= k_max) return values.back();
  const double x = k / step();
  const int i = std::min(static_cast<int>(x), n_cells - 1);
  const double f = x - i;
  return (1.0 - f) * values[i] + f * values[i + 1];
}

double master_residual(const MiningParams& params, const GridFunction& U) {
  return sup_abs(residual_vector(params, U, U.values));
}

std::vector<double> master_residual_profile(const MiningParams& params,
                                            const GridFunction& U) {
  return residual_vector(params, U, U.values);
}

MasterSolution solve_stationary_master(const MiningParams& P, const MiningGridConfig& cfg) {
  P.validate();
  require(cfg.k_max > 0.0, "k_max must be positive");
  require(cfg.n_cells >= 2, "n_cells must be at least 2");
  require(cfg.tol > 0.0 && cfg.max_iter >= 1, "invalid tolerance or iteration budget");

  GridFunction G{cfg.k_max, cfg.n_cells, std::vector<double>(cfg.n_cells + 1)};
  const int n = cfg.n_cells;
  const double h = G.step();
  for (int i = 0; i <= n; ++i) G.values[i] = P.payoff(G.node(i)) / (P.r + P.delta);

  std::vector<double> F = residual_vector(P, G, G.values);
  double res = sup_abs(F);
  std::vector<double> history{res};
  double dtau = 1.0;
  for (int it = 0; it < cfg.max_iter && res >= cfg.tol; ++it) {
    // (I/Δτ − J) ΔU = F with the Jacobian of the current upwind pattern.
    std::vector<double> sub(n + 1, 0.0), diag(n + 1), sup(n + 1, 0.0);
    const auto& u = G.values;
    for (int i = 0; i <= n; ++i) {
      const double b = -P.delta * G.node(i) + P.lambda * u[i];
      double jd;
      if (use_forward(i, n, b)) {
        const double d = (u[i + 1] - u[i]) / h;
        jd = -(P.r + P.delta) + P.lambda * d - b / h;
        sup[i] = -b / h;
      } else {
        const double d = (u[i] - u[i - 1]) / h;
        jd = -(P.r + P.delta) + P.lambda * d + b / h;
        sub[i] = b / h;
      }
      diag[i] = 1.0 / dtau - jd;
    }
    const std::vector<double> du = thomas(sub, diag, sup, F);
    std::vector<double> trial(n + 1);
    for (int i = 0; i <= n; ++i) trial[i] = u[i] + du[i];
    const std::vector<double> Ft = residual_vector(P, G, trial);
    const double rt = sup_abs(Ft);
    if (std::isfinite(rt) && rt < res) {
      G.values = trial;
      F = Ft;
      res = rt;
      dtau = std::min(dtau * 10.0, 1e12);
    } else {
      dtau /= 10.0;
      if (dtau < 1e-12) break;
    }
    history.push_back(res);
  }
  if (!(res < cfg.tol))
    throw NonConvergence("stationary master equation: residual stalled above tolerance",
                         history);
  return {G, res, history};
}

double oracle_horizon(const MiningParams& params) {
  return std::ceil(std::log(1e8) / (params.r + params.delta));
}

CharacteristicsReport verify_by_characteristics(const GridFunction& U,
                                                const MiningParams& P, double k0,
                                                double horizon, double dt) {
  P.validate();
  require(dt > 0.0 && horizon > 0.0, "horizon and dt must be positive");
  require(std::exp(-(P.r + P.delta) * horizon) < 1e-8 * (1.0 + 1e-12),
          "horizon too short for the discount");
  const int steps = static_cast<int>(std::ceil(horizon / dt));
  const double h = horizon / steps;
  bool outside = false;
  using Y = Eigen::Vector2d;  // (K, accumulated value)
  auto field = [&](double t, const Y& y) -> Y {
    const double k = y(0);
    if (k < 0.0 || k > U.k_max) outside = true;
    return Y(-P.delta * k + P.lambda * U.at(k),
             std::exp(-(P.r + P.delta) * t) * P.payoff(k));
  };
  Y y(k0, 0.0);
  for (int s = 0; s < steps; ++s) y = rk4_step(field, s * h, y, h);
  return {y(1), y(0), outside};
}

HashrateTrajectory hashrate_trajectory(const GridFunction& U, const MiningParams& P,
                                       double k0, double horizon, int steps) {
  P.validate();
  require(k0 >= 0.0 && k0 <= U.k_max, "k0 must lie in [0, k_max]");
  HashrateTrajectory out{TimeGrid(0.0, horizon, steps), {}, false};
  auto field = [&](double, double k) { return -P.delta * k + P.lambda * U.at(k); };
  out.k.resize(out.grid.nodes());
  out.k[0] = k0;
  const double h = out.grid.step();
  for (int s = 0; s < steps; ++s) {
    double next = rk4_step(field, out.grid.time(s), out.k[s], h);
    if (next < 0.0 || next > U.k_max) {
      out.clamped = true;
      next = std::clamp(next, 0.0, U.k_max);
    }
    out.k[s + 1] = next;
  }
  return out;
}

std::optional<double> stationary_hashrate(const GridFunction& U, const MiningParams& P) {
  auto drift = [&](int i) { return -P.delta * U.node(i) + P.lambda * U.values[i]; };
  for (int i = 0; i < U.n_cells; ++i) {
    const double a = drift(i), b = drift(i + 1);
    if (a == 0.0) return U.node(i);
    if ((a > 0.0) != (b > 0.0)) {
      const double f = a / (a - b);
      return U.node(i) + f * U.step();
    }
  }
  if (drift(U.n_cells) == 0.0) return U.k_max;
  return std::nullopt;
}

}  // namespace mfg::mining
