#include "mfg/macro_finance.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <string>

namespace mfg::macro {

namespace {

void require(bool ok, const std::string& what) {
  if (!ok) throw DomainError(what);
}

std::string fmt(double x) {
  std::ostringstream os;
  os.precision(17);
  os << x;
  return os.str();
}

// Logistic map kept strictly inside (0, 1).
double logistic_interior(double lambda) {
  double eta;
  if (lambda >= 0.0) {
    eta = 1.0 / (1.0 + std::exp(-lambda));
  } else {
    const double e = std::exp(lambda);
    eta = e / (1.0 + e);
  }
  if (eta >= 1.0) return std::nextafter(1.0, 0.0);
  if (eta <= 0.0) return std::numeric_limits<double>::denorm_min();
  return eta;
}

}  // namespace

void OnePopParams::validate() const {
  require(std::isfinite(a) && std::isfinite(rho) && std::isfinite(kappa) &&
              std::isfinite(delta) && std::isfinite(sigma) &&
              std::isfinite(sigma0) && std::isfinite(muM) &&
              std::isfinite(sigmaM),
          "one-population parameters must be finite");
  require(rho > 0.0, "rho must be positive");
  require(kappa > 0.0, "kappa must be positive");
  require(sigma > 0.0, "sigma must be positive");
  require(sigma0 >= 0.0, "sigma0 must be non-negative");
  require(sigmaM >= 0.0, "sigmaM must be non-negative");
  require(delta >= 0.0, "delta must be non-negative");
}

OnePopEquilibrium one_pop_stationary_equilibrium(const OnePopParams& params) {
  params.validate();
  const double a = params.a, rho = params.rho, kappa = params.kappa;
  const double s2M = params.sigmaM * params.sigmaM;

  const double slack = rho + params.muM - s2M;
  if (!(slack > 0.0)) {
    throw Infeasible("rho + muM - sigmaM^2 > 0",
                     "rho + muM - sigmaM^2 = " + fmt(slack));
  }
  const double root = std::sqrt(slack);
  if (!(params.sigma > root)) {
    throw Infeasible("sigma > sqrt(rho + muM - sigmaM^2)",
                     "sigma = " + fmt(params.sigma) + ", bound = " + fmt(root));
  }
  if (!(1.0 + kappa * a > 0.0)) {
    throw Infeasible("1 + kappa*a > 0", "1 + kappa*a = " + fmt(1.0 + kappa * a));
  }

  OnePopEquilibrium eq{};
  eq.one_minus_vartheta = root / params.sigma;
  eq.vartheta = 1.0 - eq.one_minus_vartheta;
  const double denom = eq.one_minus_vartheta + kappa * rho;
  eq.p_plus_q = (1.0 + kappa * a) / denom;
  eq.q = eq.one_minus_vartheta * eq.p_plus_q;
  eq.p = eq.vartheta * eq.p_plus_q;
  eq.iota = (eq.one_minus_vartheta * a - rho) / denom;
  eq.p_printed = eq.vartheta * (1.0 - kappa * a) / denom;

  const double omv = eq.one_minus_vartheta;
  const double x = ((a - eq.iota) / eq.q * omv + params.muM) /
                   (s2M + params.sigma * params.sigma * omv * omv);
  const double dvol = params.sigma0 - params.sigmaM;
  const double phi = std::log1p(kappa * eq.iota) / kappa;
  eq.r = phi - params.delta - (params.muM + params.sigmaM * dvol) -
         dvol * (dvol + params.sigmaM * x);
  eq.theta = 1.0 - x * omv;
  return eq;
}

void TwoPopParams::validate() const {
  require(std::isfinite(a) && std::isfinite(rho) && std::isfinite(kappa) &&
              std::isfinite(delta) && std::isfinite(sigma),
          "two-population parameters must be finite");
  require(rho > 0.0, "rho must be positive");
  require(kappa > 0.0, "kappa must be positive");
  require(sigma >= 0.0, "sigma must be non-negative");
  require(1.0 + kappa * a > 0.0, "1 + kappa*a must be positive");
}

TwoPopConstants two_pop_constants(const TwoPopParams& params) {
  params.validate();
  const double d = 1.0 + params.kappa * params.rho;
  return {(1.0 + params.kappa * params.a) / d, (params.a - params.rho) / d};
}

double two_pop_interest_rate(double eta, const TwoPopParams& params) {
  require(eta > 0.0 && eta < 1.0, "eta must lie in (0, 1)");
  const auto c = two_pop_constants(params);
  return params.rho + std::log(c.q) / params.kappa - params.delta -
         params.sigma * params.sigma / eta;
}

double eta_drift(double eta, const TwoPopParams& params) {
  const double s = params.sigma * (1.0 - eta);
  return s * s / eta;
}

double eta_volatility(double eta, const TwoPopParams& params) {
  return params.sigma * (1.0 - eta);
}

PathEnsemble simulate_eta(const TwoPopParams& params, double eta0,
                          const TimeGrid& grid, int n_paths, std::uint64_t seed,
                          const EtaOptions& options) {
  params.validate();
  require(eta0 > 0.0 && eta0 < 1.0, "eta0 must lie in (0, 1)");
  require(n_paths > 0, "n_paths must be positive");
  require(options.record_stride > 0 && grid.steps() % options.record_stride == 0,
          "record_stride must divide the number of steps");
  require(options.max_substep_variance > 0.0, "max_substep_variance must be positive");
  require(options.max_substeps >= 1, "max_substeps must be at least 1");

  const int stride = options.record_stride;
  const TimeGrid stored(grid.t0(), grid.t1(), grid.steps() / stride);
  PathEnsemble ens(stored, n_paths, 1, seed);
  const CounterRng rng(seed);
  const double h = grid.step();
  const double s2 = params.sigma * params.sigma;
  const double lambda0 = std::log(eta0) - std::log1p(-eta0);

  for (int p = 0; p < n_paths; ++p) {
    double lambda = lambda0;
    double eta = eta0;
    ens.at(p, 0) = eta;
    for (int k = 0; k < grid.steps(); ++k) {
      const double rel = (1.0 - eta) / eta;
      const double target = s2 * h * rel * rel / options.max_substep_variance;
      const int n_sub = static_cast<int>(
          std::clamp(std::ceil(target), 1.0, static_cast<double>(options.max_substeps)));
      const double hs = h / n_sub;
      const double sqrt_hs = std::sqrt(hs);
      const double eta_before = eta;
      double dw_total = 0.0;
      std::array<double, 2> z{};
      for (int j = 0; j < n_sub; ++j) {
        if (j % 2 == 0) z = rng.normals(static_cast<std::uint64_t>(p), k, j / 2);
        const double dw = sqrt_hs * z[j % 2];
        const double inv = 1.0 / eta;
        lambda += 0.5 * s2 * inv * inv * hs + params.sigma * inv * dw;
        eta = logistic_interior(lambda);
        dw_total += dw;
      }
      if (options.observer) options.observer(p, k, eta_before, eta, dw_total);
      if ((k + 1) % stride == 0) ens.at(p, (k + 1) / stride) = eta;
    }
  }
  return ens;
}

FellerDiagnostics feller_diagnostics(const TwoPopParams& params, double x) {
  require(x > 0.0 && x < 1.0, "x must lie in (0, 1)");
  require(params.sigma > 0.0, "sigma must be positive");
  return {0.5 * (1.0 - 1.0 / (2.0 * x)),
          8.0 / (params.sigma * params.sigma) * x * x / ((1.0 - x) * (1.0 - x))};
}

}  // namespace mfg::macro
