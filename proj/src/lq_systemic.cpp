#include "mfg/lq_systemic.hpp"

#include <cmath>
#include <string>

namespace mfg::lq {

PlayerCount PlayerCount::finite(int n) {
  if (n < 2) throw DomainError("n_players must be at least 2");
  return PlayerCount(n);
}

int PlayerCount::value() const {
  if (is_infinite()) throw DomainError("player count is the limit marker");
  return n_;
}

void LqParams::validate() const {
  if (!(a >= 0.0 && q >= 0.0 && c >= 0.0)) {
    throw DomainError("LqParams: a, q and c must be non-negative");
  }
  if (!(eps >= q * q)) {
    throw DomainError("LqParams: eps must be at least q^2 (eps = " +
                      std::to_string(eps) + ", q^2 = " + std::to_string(q * q) +
                      ")");
  }
  if (!(sigma >= 0.0)) throw DomainError("LqParams: sigma must be non-negative");
  if (!(rho_corr >= 0.0 && rho_corr <= 1.0)) {
    throw DomainError("LqParams: rho must lie in [0, 1]");
  }
  if (!(horizon > 0.0)) throw DomainError("LqParams: horizon must be positive");
}

const char* to_string(LoopKind kind) {
  switch (kind) {
    case LoopKind::Open: return "open";
    case LoopKind::Closed: return "closed";
    case LoopKind::Limit: return "limit";
  }
  return "?";
}

RiccatiPath solve_riccati(const LqParams& params, const TimeGrid& grid,
                          LoopKind kind) {
  params.validate();
  if (std::abs(grid.t1() - params.horizon) > 1e-12 * params.horizon) {
    throw DomainError("solve_riccati: grid must end at the horizon T");
  }
  const double inv_n = kind == LoopKind::Limit ? 0.0 : params.n_players.inverse();
  double linear = 2.0 * (params.a + params.q);
  double quadratic = 1.0;
  switch (kind) {
    case LoopKind::Open:
      linear = 2.0 * (params.a + params.q - params.q * inv_n);
      quadratic = 1.0 - inv_n;
      break;
    case LoopKind::Closed:
      quadratic = 1.0 - inv_n * inv_n;
      break;
    case LoopKind::Limit:
      break;
  }
  const double constant = params.q * params.q - params.eps;
  auto field = [=](double, double eta) {
    return linear * eta + quadratic * eta * eta + constant;
  };
  return {grid, integrate_ode(field, params.c, grid, Direction::Backward), kind};
}

double feedback_gain(double t, const RiccatiPath& riccati,
                     const LqParams& params) {
  return params.q + (1.0 - params.n_players.inverse()) * riccati.at(t);
}

namespace {

std::vector<double> node_gains(const RiccatiPath& riccati,
                               const LqParams& params) {
  std::vector<double> g(riccati.eta.size());
  const double w = 1.0 - params.n_players.inverse();
  for (std::size_t k = 0; k < g.size(); ++k) g[k] = params.q + w * riccati.eta[k];
  return g;
}

}  // namespace

PathEnsemble simulate_equilibrium(const LqParams& params,
                                  const RiccatiPath& riccati,
                                  const Eigen::VectorXd& x0, int n_samples,
                                  std::uint64_t seed,
                                  const Deviation& deviation) {
  params.validate();
  const int n = params.n_players.value();
  if (x0.size() != n) {
    throw DomainError("simulate_equilibrium: x0 has " +
                      std::to_string(x0.size()) + " entries, expected " +
                      std::to_string(n));
  }
  if (deviation.player >= n) {
    throw DomainError("simulate_equilibrium: deviating player out of range");
  }
  const TimeGrid& grid = riccati.grid;
  const std::vector<double> gain = node_gains(riccati, params);
  const double h = grid.step();
  const double sqrt_h = std::sqrt(h);
  const double common = params.sigma * params.rho_corr;
  const double idio =
      params.sigma * std::sqrt(1.0 - params.rho_corr * params.rho_corr);
  const CounterRng rng(seed);

  PathEnsemble out(grid, n_samples, n, seed);
  Eigen::VectorXd x(n);
  Eigen::VectorXd scale = Eigen::VectorXd::Ones(n);
  if (deviation.player >= 0) scale(deviation.player) = deviation.gain_scale;
  for (int s = 0; s < n_samples; ++s) {
    x = x0;
    for (int i = 0; i < n; ++i) out.at(s, 0, i) = x(i);
    for (int k = 0; k < grid.steps(); ++k) {
      const double xbar = x.mean();
      const double dw0 = sqrt_h * rng.normal(s, k, 0);
      Eigen::VectorXd next(n);
      for (int i = 0; i < n; ++i) {
        const double dev = xbar - x(i);
        const double drift = (params.a + scale(i) * gain[k]) * dev;
        next(i) = x(i) + drift * h + common * dw0 +
                  idio * sqrt_h * rng.normal(s, k, i + 1);
      }
      x = next;
      for (int i = 0; i < n; ++i) out.at(s, k + 1, i) = x(i);
    }
  }
  return out;
}

CostEstimate estimate_cost(const LqParams& params, const PathEnsemble& ensemble,
                           const RiccatiPath& riccati,
                           const Deviation& deviation) {
  params.validate();
  const int n = ensemble.dim;
  if (n != params.n_players.value()) {
    throw DomainError("estimate_cost: ensemble dimension does not match N");
  }
  if (ensemble.grid.steps() != riccati.grid.steps()) {
    throw DomainError("estimate_cost: ensemble and Riccati grids differ");
  }
  const std::vector<double> gain = node_gains(riccati, params);
  const TimeGrid& grid = ensemble.grid;
  const int nodes = grid.nodes();
  const double h = grid.step();

  CostEstimate est;
  est.samples.resize(ensemble.n_paths, n);
  std::vector<double> running(nodes);
  std::vector<double> xbar(nodes);
  for (int s = 0; s < ensemble.n_paths; ++s) {
    for (int k = 0; k < nodes; ++k) {
      double sum = 0.0;
      for (int j = 0; j < n; ++j) sum += ensemble.at(s, k, j);
      xbar[k] = sum / n;
    }
    for (int i = 0; i < n; ++i) {
      const double scale = i == deviation.player ? deviation.gain_scale : 1.0;
      for (int k = 0; k < nodes; ++k) {
        const double dev = xbar[k] - ensemble.at(s, k, i);
        const double alpha = scale * gain[k] * dev;
        running[k] = 0.5 * alpha * alpha - params.q * alpha * dev +
                     0.5 * params.eps * dev * dev;
      }
      const double dev_t = xbar[nodes - 1] - ensemble.at(s, nodes - 1, i);
      est.samples(s, i) = trapezoid(running, h) + 0.5 * params.c * dev_t * dev_t;
    }
  }
  const double m = ensemble.n_paths;
  est.mean = est.samples.colwise().mean().transpose();
  est.stderr_.resize(n);
  for (int i = 0; i < n; ++i) {
    const double var =
        m > 1 ? (est.samples.col(i).array() - est.mean(i)).square().sum() / (m - 1)
              : 0.0;
    est.stderr_(i) = std::sqrt(var / m);
  }
  return est;
}

CrossSection cross_section(const PathEnsemble& ensemble, int sample) {
  if (sample < 0 || sample >= ensemble.n_paths) {
    throw DomainError("cross_section: sample index out of range");
  }
  const int nodes = ensemble.grid.nodes();
  const int n = ensemble.dim;
  CrossSection cs{std::vector<double>(nodes), std::vector<double>(nodes)};
  for (int k = 0; k < nodes; ++k) {
    double sum = 0.0;
    for (int i = 0; i < n; ++i) sum += ensemble.at(sample, k, i);
    const double mean = sum / n;
    double ss = 0.0;
    for (int i = 0; i < n; ++i) {
      const double d = ensemble.at(sample, k, i) - mean;
      ss += d * d;
    }
    cs.mean[k] = mean;
    cs.std[k] = std::sqrt(ss / n);
  }
  return cs;
}

}  // namespace mfg::lq
