#include "mfg/contract_mfg.hpp"

#include <gsl/gsl_errno.h>
#include <gsl/gsl_multimin.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace mfg::contract {

namespace {

void require(bool ok, const std::string& what) {
  if (!ok) throw DomainError(what);
}

double clamp_action(const FiniteStateModel& model, double a) {
  return std::min(std::max(a, model.alpha_lo), model.alpha_hi);
}

// Unclamped minimizer argument −(1/γ_i) Σ_{j≠i} λ_ij (z_j − z_i).
double raw_action(const FiniteStateModel& model, int i, const Vec& z) {
  double s = 0.0;
  for (int j = 0; j < model.m; ++j)
    if (j != i) s += model.lambda(i, j) * (z(j) - z(i));
  return -s / model.gamma(i);
}

Vec best_actions(const FiniteStateModel& model, const Vec& z) {
  Vec a(model.m);
  for (int i = 0; i < model.m; ++i) a(i) = clamp_action(model, raw_action(model, i, z));
  return a;
}

// Generator without the bounds check, for actions already clamped.
Mat assemble(const FiniteStateModel& model, double t, const Vec& alpha, const Vec& p) {
  Mat q = Mat::Zero(model.m, model.m);
  for (int i = 0; i < model.m; ++i) {
    double row = 0.0;
    for (int j = 0; j < model.m; ++j) {
      if (j == i || !model.is_allowed(i, j)) continue;
      const double v =
          model.base_rates(t, i, j, p) + model.lambda(i, j) * (alpha(i) - model.alpha_lo);
      q(i, j) = v;
      row += v;
    }
    q(i, i) = -row;
  }
  return q;
}

// Clip negatives and renormalize; returns the total mass moved.
double project_simplex(Vec& p) {
  double moved = 0.0;
  for (int i = 0; i < p.size(); ++i) {
    if (p(i) < 0.0) {
      moved += -p(i);
      p(i) = 0.0;
    }
  }
  const double s = p.sum();
  moved += std::abs(s - 1.0);
  if (s > 0.0) p /= s;
  return moved;
}

int knot_index(double t, double horizon, int n_knots) {
  const int k = static_cast<int>(std::floor(t / horizon * n_knots));
  return std::clamp(k, 0, n_knots - 1);
}

double running_payment_utility_integral(const FiniteStateModel& model,
                                        const Vec& r_knots) {
  double s = 0.0;
  for (int k = 0; k < r_knots.size(); ++k) s += running_utility(model.u_run, r_knots(k));
  return s * model.horizon / static_cast<double>(r_knots.size());
}

// Values of a node path and cubic midpoints through four neighbouring nodes.
struct NodePath {
  Mat nodes;
  Mat mids;

  Vec at(int k, int stage) const {
    // stage 0: t_k, 1: midpoint, 2: t_{k+1}
    if (stage == 0) return nodes.row(k).transpose();
    if (stage == 1) return mids.row(k).transpose();
    return nodes.row(k + 1).transpose();
  }
};

NodePath with_midpoints(const Mat& nodes) {
  const int n = static_cast<int>(nodes.rows()) - 1;
  NodePath path{nodes, Mat(n, nodes.cols())};
  if (n < 3) {
    for (int k = 0; k < n; ++k) path.mids.row(k) = 0.5 * (nodes.row(k) + nodes.row(k + 1));
    return path;
  }
  for (int k = 0; k < n; ++k) {
    if (k == 0) {
      path.mids.row(k) = (5.0 * nodes.row(0) + 15.0 * nodes.row(1) - 5.0 * nodes.row(2) +
                          nodes.row(3)) / 16.0;
    } else if (k == n - 1) {
      path.mids.row(k) = (5.0 * nodes.row(n) + 15.0 * nodes.row(n - 1) -
                          5.0 * nodes.row(n - 2) + nodes.row(n - 3)) / 16.0;
    } else {
      path.mids.row(k) = (-nodes.row(k - 1) + 9.0 * nodes.row(k) + 9.0 * nodes.row(k + 1) -
                          nodes.row(k + 2)) / 16.0;
    }
  }
  return path;
}

double stage_time(const TimeGrid& grid, int k, int stage) {
  return grid.time(k) + 0.5 * stage * grid.step();
}

// Right-hand side of the value equation.
Vec value_rhs(const FiniteStateModel& model, double t, const Vec& u, const Vec& p,
              double utility) {
  const Vec a = best_actions(model, u);
  const Mat q = assemble(model, t, a, p);
  Vec du(model.m);
  for (int i = 0; i < model.m; ++i) {
    double jump = 0.0;
    for (int j = 0; j < model.m; ++j)
      if (j != i) jump += q(i, j) * (u(j) - u(i));
    du(i) = -(model.c1(t, i, p) + 0.5 * model.gamma(i) * a(i) * a(i) - utility + jump);
  }
  return du;
}

Vec flow_rhs(const FiniteStateModel& model, double t, const Vec& z, const Vec& p) {
  const Vec a = best_actions(model, z);
  return assemble(model, t, a, p).transpose() * p;
}

Mat backward_sweep(const FiniteStateModel& model, const Contract& contract,
                   const TimeGrid& grid, const NodePath& flow) {
  const int n = grid.steps();
  const double h = grid.step();
  const int n_knots = static_cast<int>(contract.r_knots.size());
  Mat u(grid.nodes(), model.m);
  Vec y = -contract.xi;
  u.row(n) = y.transpose();
  for (int k = n - 1; k >= 0; --k) {
    const double t1 = grid.time(k + 1);
    const double rk = contract.r_knots(knot_index(stage_time(grid, k, 1), model.horizon, n_knots));
    const double ur = running_utility(model.u_run, rk);
    const Vec k1 = value_rhs(model, t1, y, flow.at(k, 2), ur);
    const Vec k2 = value_rhs(model, t1 - 0.5 * h, y - 0.5 * h * k1, flow.at(k, 1), ur);
    const Vec k3 = value_rhs(model, t1 - 0.5 * h, y - 0.5 * h * k2, flow.at(k, 1), ur);
    const Vec k4 = value_rhs(model, grid.time(k), y - h * k3, flow.at(k, 0), ur);
    y -= (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    if (!y.allFinite()) throw IntegrationBlowup(grid.time(k));
    u.row(k) = y.transpose();
  }
  return u;
}

Mat forward_sweep(const FiniteStateModel& model, const TimeGrid& grid,
                  const NodePath& values, double* max_projection) {
  const double h = grid.step();
  Mat p(grid.nodes(), model.m);
  Vec y = model.p0;
  p.row(0) = y.transpose();
  for (int k = 0; k < grid.steps(); ++k) {
    const double t = grid.time(k);
    const Vec k1 = flow_rhs(model, t, values.at(k, 0), y);
    const Vec k2 = flow_rhs(model, t + 0.5 * h, values.at(k, 1), y + 0.5 * h * k1);
    const Vec k3 = flow_rhs(model, t + 0.5 * h, values.at(k, 1), y + 0.5 * h * k2);
    const Vec k4 = flow_rhs(model, t + h, values.at(k, 2), y + h * k3);
    y += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    if (!y.allFinite()) throw IntegrationBlowup(grid.time(k + 1));
    const double moved = project_simplex(y);
    if (max_projection) *max_projection = std::max(*max_projection, moved);
    p.row(k + 1) = y.transpose();
  }
  return p;
}

Mat to_mat(const Vec& flat, int rows, int cols) {
  return Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic,
                                        Eigen::RowMajor>>(flat.data(), rows, cols);
}

Vec to_flat(const Mat& m) {
  Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> r = m;
  return Eigen::Map<const Vec>(r.data(), r.size());
}

void validate_contract(const FiniteStateModel& model, const Contract& contract,
                       int steps) {
  require(contract.xi.size() == model.m, "xi must have one entry per state");
  require(contract.r_knots.size() >= 1, "contract needs at least one knot");
  require((contract.r_knots.array() >= 0.0).all() && contract.r_knots.allFinite(),
          "payment stream must be finite and non-negative");
  require(contract.xi.allFinite(), "terminal payment must be finite");
  require(steps % contract.r_knots.size() == 0,
          "steps must be a multiple of the knot count");
}

int count_rate_violations(const FiniteStateModel& model, const TimeGrid& grid,
                          const Mat& p, const Mat& alpha) {
  if (!model.bounds) return 0;
  int bad = 0;
  for (int k = 0; k < grid.nodes(); ++k) {
    const Mat q = assemble(model, grid.time(k), alpha.row(k).transpose(),
                           p.row(k).transpose());
    for (int i = 0; i < model.m; ++i)
      for (int j = 0; j < model.m; ++j)
        if (i != j && model.is_allowed(i, j) &&
            (q(i, j) < model.bounds->c1 || q(i, j) > model.bounds->c2))
          ++bad;
  }
  return bad;
}

// ---------------------------------------------------------------------------
// Nelder-Mead with restarts and penalty escalation
// ---------------------------------------------------------------------------

struct Candidate {
  double value;
  double violation;
};

using CandidateFn = std::function<Candidate(const Vec&)>;

struct NmResult {
  Vec best_x;
  Candidate best{std::numeric_limits<double>::infinity(),
                 std::numeric_limits<double>::infinity()};
  bool found_feasible = false;
  double best_objective = std::numeric_limits<double>::infinity();
  int evaluations = 0;
  std::vector<SearchTraceEntry> trace;
};

constexpr double kFeasTol = 1e-6;

struct NmState {
  const CandidateFn* fn;
  const Vec* lo;
  const Vec* hi;
  double weight;
  NmResult* result;
};

double nm_objective(const gsl_vector* v, void* params) {
  auto* st = static_cast<NmState*>(params);
  const int n = static_cast<int>(v->size);
  Vec x(n);
  double box = 0.0;
  for (int i = 0; i < n; ++i) {
    const double raw = gsl_vector_get(v, i);
    x(i) = std::clamp(raw, (*st->lo)(i), (*st->hi)(i));
    box += (raw - x(i)) * (raw - x(i));
  }
  const Candidate c = (*st->fn)(x);
  ++st->result->evaluations;
  const double obj = c.value + st->weight * c.violation * c.violation + box;
  if (!std::isfinite(obj)) return 1e30;
  if (c.violation < kFeasTol) {
    if (!st->result->found_feasible || c.value < st->result->best.value) {
      st->result->found_feasible = true;
      st->result->best = c;
      st->result->best_x = x;
    }
  } else if (!st->result->found_feasible && obj < st->result->best_objective) {
    st->result->best = c;
    st->result->best_x = x;
  }
  st->result->best_objective = std::min(st->result->best_objective, obj);
  return obj;
}

NmResult nelder_mead_search(const CandidateFn& fn, const Vec& x0, const Vec& lo,
                            const Vec& hi, const SearchConfig& search) {
  require(search.restarts >= 1 && search.max_evals >= 1, "search budget must be positive");
  const int n = static_cast<int>(x0.size());
  NmResult result;
  result.best_x = x0;
  Vec start = x0.cwiseMax(lo).cwiseMin(hi);
  double weight = search.penalty0;

  gsl_set_error_handler_off();
  gsl_multimin_fminimizer* s =
      gsl_multimin_fminimizer_alloc(gsl_multimin_fminimizer_nmsimplex2, n);
  gsl_vector* x = gsl_vector_alloc(n);
  gsl_vector* step = gsl_vector_alloc(n);

  for (int restart = 0; restart < search.restarts; ++restart) {
    NmState st{&fn, &lo, &hi, weight, &result};
    gsl_multimin_function f{&nm_objective, static_cast<std::size_t>(n), &st};
    for (int i = 0; i < n; ++i) {
      gsl_vector_set(x, i, start(i));
      const double range = hi(i) - lo(i);
      gsl_vector_set(step, i, search.initial_step * (range > 0 ? range : 1.0));
    }
    const int evals_before = result.evaluations;
    gsl_multimin_fminimizer_set(s, &f, x, step);
    while (result.evaluations - evals_before < search.max_evals) {
      if (gsl_multimin_fminimizer_iterate(s) != GSL_SUCCESS) break;
      if (gsl_multimin_fminimizer_size(s) < search.size_tol) break;
    }
    result.trace.push_back({restart, result.evaluations - evals_before, weight,
                            gsl_multimin_fminimizer_minimum(s), result.best.value,
                            result.best.violation});
    start = result.best_x;
    if (!result.found_feasible) weight *= 10.0;
  }
  gsl_vector_free(step);
  gsl_vector_free(x);
  gsl_multimin_fminimizer_free(s);
  return result;
}

std::string fmt(double x) {
  std::ostringstream os;
  os.precision(10);
  os << x;
  return os.str();
}

// Uniform terminal shift Δ moving J toward κ within the ξ box; J decreases
// and J₀ increases by Δ.
double feasibility_shift(double agent_cost, double kappa, const Vec& xi, double lo,
                         double hi) {
  const double lo_shift = lo - xi.minCoeff();
  const double hi_shift = hi - xi.maxCoeff();
  if (lo_shift > hi_shift) return 0.0;
  return std::clamp(agent_cost - kappa, lo_shift, hi_shift);
}

double box_excess(const Vec& v, double lo, double hi) {
  double e = 0.0;
  for (int i = 0; i < v.size(); ++i) e += std::max(0.0, lo - v(i)) + std::max(0.0, v(i) - hi);
  return e;
}

}  // namespace

double running_utility(RunningUtility kind, double r) {
  switch (kind) {
    case RunningUtility::Linear:
      return r;
    case RunningUtility::SqrtShift:
      return std::sqrt(1.0 + r) - 1.0;
  }
  return r;
}

bool FiniteStateModel::is_allowed(int i, int j) const {
  return allowed.size() == 0 || allowed(i, j) != 0;
}

void FiniteStateModel::validate() const {
  require(m >= 2, "model needs at least two states");
  require(static_cast<bool>(base_rates) && static_cast<bool>(c1),
          "base rates and running cost must be set");
  require(lambda.rows() == m && lambda.cols() == m, "lambda must be m x m");
  require((lambda.array() >= 0.0).all(), "lambda must be non-negative");
  require(gamma.size() == m && (gamma.array() > 0.0).all(), "gamma must be positive");
  require(std::isfinite(alpha_lo) && std::isfinite(alpha_hi) && 0.0 <= alpha_lo &&
              alpha_lo <= alpha_hi,
          "action bounds must satisfy 0 <= alpha_lo <= alpha_hi");
  require(horizon > 0.0, "horizon must be positive");
  require(p0.size() == m && (p0.array() >= 0.0).all() && std::abs(p0.sum() - 1.0) < 1e-12,
          "p0 must lie on the simplex");
  require(allowed.size() == 0 || (allowed.rows() == m && allowed.cols() == m),
          "allowed mask must be m x m");
  if (bounds) require(0.0 <= bounds->c1 && bounds->c1 <= bounds->c2, "invalid rate bounds");
}

bool FiniteStateModel::controllable() const {
  for (int i = 0; i < m; ++i) {
    double s = 0.0;
    for (int j = 0; j < m; ++j)
      if (j != i) s += lambda(i, j);
    if (!(s > 0.0)) return false;
  }
  return true;
}

Mat build_q_matrix(const FiniteStateModel& model, double t, const Vec& alpha,
                   const Vec& p) {
  require(alpha.size() == model.m && p.size() == model.m, "dimension mismatch");
  for (int i = 0; i < model.m; ++i)
    require(alpha(i) >= model.alpha_lo && alpha(i) <= model.alpha_hi,
            "action out of bounds");
  return assemble(model, t, alpha, p);
}

double hamiltonian(const FiniteStateModel& model, double t, int i, const Vec& z,
                   double alpha, const Vec& p) {
  double h = model.c1(t, i, p) + 0.5 * model.gamma(i) * alpha * alpha;
  for (int j = 0; j < model.m; ++j) {
    if (j == i) continue;
    const double q = model.is_allowed(i, j)
                         ? model.base_rates(t, i, j, p) +
                               model.lambda(i, j) * (alpha - model.alpha_lo)
                         : 0.0;
    // (Q − Q⁰)_ij z_j summed over j, with Q⁰ off-diagonals 1 and diagonal −(m−1).
    h += (q - 1.0) * (z(j) - z(i));
  }
  return h;
}

HamiltonianMin minimize_hamiltonian(const FiniteStateModel& model, double t, int i,
                                    const Vec& z, const Vec& p) {
  const double a = clamp_action(model, raw_action(model, i, z));
  return {a, hamiltonian(model, t, i, z, a, p)};
}

double Contract::r_at(double t, double horizon) const {
  return r_knots(knot_index(t, horizon, static_cast<int>(r_knots.size())));
}

Contract Contract::zero(int m, int n_knots) {
  return {Vec::Zero(n_knots), Vec::Zero(m)};
}

MFGEquilibrium solve_nash(const FiniteStateModel& model, const Contract& contract,
                          const SolverConfig& cfg) {
  model.validate();
  validate_contract(model, contract, cfg.steps);
  const TimeGrid grid(0.0, model.horizon, cfg.steps);
  const int nodes = grid.nodes();
  double max_projection = 0.0;

  auto sweep = [&](const Mat& p) {
    return backward_sweep(model, contract, grid, with_midpoints(p));
  };

  const FlowMap map = [&](const Vec& flat) -> Vec {
    const Mat p = to_mat(flat, nodes, model.m);
    return to_flat(forward_sweep(model, grid, with_midpoints(sweep(p)), &max_projection));
  };

  Mat guess(nodes, model.m);
  if (cfg.initial_flow && cfg.initial_flow->rows() == nodes &&
      cfg.initial_flow->cols() == model.m) {
    guess = *cfg.initial_flow;
  } else {
    for (int k = 0; k < nodes; ++k) guess.row(k) = model.p0.transpose();
  }
  const FixedPointResult fp = solve_fixed_point(map, to_flat(guess), cfg.fixed_point);

  MFGEquilibrium eq{grid, to_mat(fp.value, nodes, model.m), Mat(), Mat(), 0.0,
                    fp.residuals.empty() ? 0.0 : fp.residuals.back(), fp.residuals,
                    max_projection, 0};
  eq.u = sweep(eq.p);
  eq.alpha.resize(nodes, model.m);
  for (int k = 0; k < nodes; ++k)
    eq.alpha.row(k) = best_actions(model, eq.u.row(k).transpose()).transpose();
  eq.agent_cost = model.p0.dot(eq.u.row(0).transpose());
  eq.rate_violations = count_rate_violations(model, grid, eq.p, eq.alpha);
  return eq;
}

PathEnsemble simulate_chain(const FiniteStateModel& model, const MFGEquilibrium& eq,
                            int n_paths, std::uint64_t seed,
                            std::optional<double> rate_bound) {
  model.validate();
  require(n_paths > 0, "n_paths must be positive");
  const TimeGrid& grid = eq.grid;
  const int m = model.m;

  auto rates_at = [&](double t) {
    const auto [k, frac] = grid.locate(t);
    const int k1 = std::min(k + 1, grid.steps());
    const Vec p = ((1.0 - frac) * eq.p.row(k) + frac * eq.p.row(k1)).transpose();
    const Vec a = ((1.0 - frac) * eq.alpha.row(k) + frac * eq.alpha.row(k1)).transpose();
    return assemble(model, t, a, p);
  };

  double bound;
  if (rate_bound) {
    bound = *rate_bound;
  } else if (model.bounds) {
    bound = model.bounds->c2 * (m - 1);
  } else {
    double mx = 0.0;
    for (int k = 0; k < grid.nodes(); ++k)
      mx = std::max(mx, (-rates_at(grid.time(k)).diagonal()).maxCoeff());
    bound = 1.25 * mx;
  }

  PathEnsemble ens(grid, n_paths, 1, seed);
  const CounterRng rng(seed);
  const double T = grid.t1();
  for (int path = 0; path < n_paths; ++path) {
    const auto sp = static_cast<std::uint64_t>(path);
    double u0 = rng.uniforms(sp, 0xFFFFFFFFu, 0)[0];
    int state = m - 1;
    double acc = 0.0;
    for (int i = 0; i < m; ++i) {
      acc += model.p0(i);
      if (u0 < acc) {
        state = i;
        break;
      }
    }
    double t = 0.0;
    int node = 0;
    std::uint32_t event = 0;
    while (true) {
      double next = T + 1.0;
      std::array<double, 2> u{};
      if (bound > 0.0) {
        u = rng.uniforms(sp, event, 0);
        next = t - std::log(u[0]) / bound;
      }
      while (node < grid.nodes() && grid.time(node) < next) {
        ens.at(path, node) = state;
        ++node;
      }
      if (next > T) break;
      const Mat q = rates_at(next);
      const double exit = -q(state, state);
      if (exit > bound * (1.0 + 1e-12))
        throw Error("chain exit rate " + fmt(exit) + " exceeds thinning bound " + fmt(bound));
      if (u[1] * bound < exit) {
        const double target = rng.uniforms(sp, event, 1)[0] * exit;
        double cum = 0.0;
        int to = state;
        for (int j = 0; j < m; ++j) {
          if (j == state) continue;
          cum += q(state, j);
          to = j;
          if (target < cum) break;
        }
        state = to;
      }
      t = next;
      ++event;
    }
    while (node < grid.nodes()) {
      ens.at(path, node) = state;
      ++node;
    }
  }
  return ens;
}

Mat occupancy(const PathEnsemble& chains, int m) {
  Mat occ = Mat::Zero(chains.grid.nodes(), m);
  for (int p = 0; p < chains.n_paths; ++p)
    for (int k = 0; k < chains.grid.nodes(); ++k)
      occ(k, static_cast<int>(chains.at(p, k))) += 1.0;
  return occ / static_cast<double>(chains.n_paths);
}

ContractValue evaluate_contract(const FiniteStateModel& model,
                                const PrincipalSpec& principal,
                                const Contract& contract, const MFGEquilibrium& eq) {
  const TimeGrid& grid = eq.grid;
  std::vector<double> c0(grid.nodes());
  for (int k = 0; k < grid.nodes(); ++k)
    c0[k] = principal.c0(grid.time(k), eq.p.row(k).transpose());
  const double pay = contract.r_knots.sum() * model.horizon /
                     static_cast<double>(contract.r_knots.size());
  const Vec pT = eq.p.row(grid.steps()).transpose();
  const double j0 = trapezoid(c0, grid.step()) + pay + principal.C0(pT) + pT.dot(contract.xi);
  const double j = model.p0.dot(eq.u.row(0).transpose());
  return {j, j0, j <= principal.kappa + kFeasTol};
}

ContractOptimum optimize_contract(const FiniteStateModel& model,
                                  const PrincipalSpec& principal,
                                  const ContractParameterization& param,
                                  const SearchConfig& search,
                                  const std::optional<Contract>& start) {
  model.validate();
  require(param.n_knots >= 1 && param.r_max >= 0.0 && param.xi_lo <= param.xi_hi,
          "invalid contract parameterization");
  const int nk = param.n_knots, m = model.m;
  Vec lo(nk + m), hi(nk + m);
  lo << Vec::Zero(nk), Vec::Constant(m, param.xi_lo);
  hi << Vec::Constant(nk, param.r_max), Vec::Constant(m, param.xi_hi);
  Vec x0(nk + m);
  if (start) {
    require(start->r_knots.size() == nk && start->xi.size() == m, "start contract shape");
    x0 << start->r_knots, start->xi;
  } else {
    x0 << Vec::Zero(nk), Vec::Constant(m, std::clamp(0.0, param.xi_lo, param.xi_hi));
  }

  // Warm start each solve from the previous equilibrium flow.
  SolverConfig solver = search.solver;
  auto shifted = [&](const Vec& x, Contract* out, double* agent) -> Candidate {
    Contract c{x.head(nk), x.tail(m)};
    MFGEquilibrium eq = [&] {
      try {
        MFGEquilibrium e = solve_nash(model, c, solver);
        solver.initial_flow = e.p;
        return e;
      } catch (const Error&) {
        return MFGEquilibrium{TimeGrid(0, 1, 1), Mat(), Mat(), Mat(), 0, 0, {}, 0, 0};
      }
    }();
    if (eq.p.size() == 0) return {1e30, 1e30};
    const ContractValue v = evaluate_contract(model, principal, c, eq);
    const double d =
        feasibility_shift(v.agent_cost, principal.kappa, c.xi, param.xi_lo, param.xi_hi);
    c.xi.array() += d;
    if (out) *out = c;
    if (agent) *agent = v.agent_cost - d;
    return {v.principal_cost + d, std::max(0.0, v.agent_cost - d - principal.kappa)};
  };

  const CandidateFn fn = [&](const Vec& x) { return shifted(x, nullptr, nullptr); };
  const NmResult res = nelder_mead_search(fn, x0, lo, hi, search);
  if (!res.found_feasible)
    throw Infeasible("J <= kappa", "best violation " + fmt(res.best.violation) +
                                       ", best penalized objective " +
                                       fmt(res.best_objective));
  ContractOptimum out;
  shifted(res.best_x, &out.contract, &out.agent_cost);
  out.value = res.best.value;
  out.evaluations = res.evaluations;
  out.trace = res.trace;
  return out;
}

namespace {

// Joint forward integration of p, the Z path and the agent-cost integral
// Σ p_i (c₁ + γ_i α̂²/2). `z_of` gives Z for (step, stage) and may itself be
// integrated (Markov mode), signalled by `z_rhs`.
struct ForwardRun {
  Mat p;
  Mat z;
  double agent_running = 0.0;
};

ForwardRun run_forward(const FiniteStateModel& model, const TimeGrid& grid,
                       const Vec& r_knots, const Vec& z_start,
                       const std::function<Vec(int, int)>& z_given) {
  const int m = model.m;
  const double h = grid.step();
  const int nk = static_cast<int>(r_knots.size());
  const bool markov = !z_given;
  // State layout: p (m), z (m), running agent cost (1).
  auto rhs = [&](double t, const Vec& y, const Vec& z, double ur) {
    const Vec p = y.head(m);
    const Vec a = best_actions(model, z);
    const Mat q = assemble(model, t, a, p);
    Vec dy = Vec::Zero(2 * m + 1);
    dy.head(m) = q.transpose() * p;
    if (markov) dy.segment(m, m) = value_rhs(model, t, z, p, ur);
    double run = 0.0;
    for (int i = 0; i < m; ++i)
      run += p(i) * (model.c1(t, i, p) + 0.5 * model.gamma(i) * a(i) * a(i));
    dy(2 * m) = run;
    return dy;
  };
  ForwardRun out{Mat(grid.nodes(), m), Mat(grid.nodes(), m), 0.0};
  Vec y(2 * m + 1);
  y << model.p0, z_start, 0.0;
  out.p.row(0) = model.p0.transpose();
  out.z.row(0) = (markov ? z_start : z_given(0, 0)).transpose();
  for (int k = 0; k < grid.steps(); ++k) {
    const double t = grid.time(k);
    const double ur = running_utility(
        model.u_run, r_knots(knot_index(stage_time(grid, k, 1), model.horizon, nk)));
    auto zz = [&](const Vec& yy, int stage) -> Vec {
      return markov ? Vec(yy.segment(m, m)) : z_given(k, stage);
    };
    const Vec k1 = rhs(t, y, zz(y, 0), ur);
    const Vec y2 = y + 0.5 * h * k1;
    const Vec k2 = rhs(t + 0.5 * h, y2, zz(y2, 1), ur);
    const Vec y3 = y + 0.5 * h * k2;
    const Vec k3 = rhs(t + 0.5 * h, y3, zz(y3, 1), ur);
    const Vec y4 = y + h * k3;
    const Vec k4 = rhs(t + h, y4, zz(y4, 2), ur);
    y += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    if (!y.allFinite()) throw IntegrationBlowup(grid.time(k + 1));
    Vec p = y.head(m);
    project_simplex(p);
    y.head(m) = p;
    out.p.row(k + 1) = p.transpose();
    out.z.row(k + 1) = (markov ? Vec(y.segment(m, m)) : z_given(k, 2)).transpose();
  }
  out.agent_running = y(2 * m);
  return out;
}

double principal_running(const PrincipalSpec& principal, const TimeGrid& grid,
                         const Mat& p) {
  std::vector<double> c0(grid.nodes());
  for (int k = 0; k < grid.nodes(); ++k) c0[k] = principal.c0(grid.time(k), p.row(k).transpose());
  return trapezoid(c0, grid.step());
}

}  // namespace

ForwardEvaluation evaluate_forward_free(const FiniteStateModel& model,
                                        const PrincipalSpec& principal,
                                        const Mat& z_path, const Vec& r_knots,
                                        double y0, int steps) {
  model.validate();
  const TimeGrid grid(0.0, model.horizon, steps);
  require(z_path.rows() == grid.nodes() && z_path.cols() == model.m, "z path shape");
  require(steps % r_knots.size() == 0, "steps must be a multiple of the knot count");
  const NodePath zp = with_midpoints(z_path);
  const auto z_of = [&](int k, int stage) -> Vec { return zp.at(k, stage); };
  const ForwardRun run = run_forward(model, grid, r_knots, z_path.row(0).transpose(), z_of);
  const double pay = r_knots.sum() * model.horizon / static_cast<double>(r_knots.size());
  const double value = principal_running(principal, grid, run.p) + pay +
                       principal.C0(run.p.row(steps).transpose()) - y0 + run.agent_running -
                       running_payment_utility_integral(model, r_knots);
  return {value, y0, run.p, run.z};
}

ForwardEvaluation evaluate_forward_markov(const FiniteStateModel& model,
                                          const PrincipalSpec& principal,
                                          const Vec& u0, const Vec& r_knots, int steps) {
  model.validate();
  require(u0.size() == model.m, "u0 must have one entry per state");
  require(steps % r_knots.size() == 0, "steps must be a multiple of the knot count");
  const TimeGrid grid(0.0, model.horizon, steps);
  const ForwardRun run = run_forward(model, grid, r_knots, u0, {});
  const double pay = r_knots.sum() * model.horizon / static_cast<double>(r_knots.size());
  const Vec pT = run.p.row(steps).transpose();
  const Vec xi = -run.z.row(steps).transpose();
  const double value =
      principal_running(principal, grid, run.p) + pay + principal.C0(pT) + pT.dot(xi);
  return {value, model.p0.dot(u0), run.p, run.z};
}

ForwardControlResult principal_forward_control(const FiniteStateModel& model,
                                               const PrincipalSpec& principal,
                                               const ForwardControlConfig& cfg,
                                               const SearchConfig& search) {
  model.validate();
  const auto& param = cfg.contract;
  require(param.n_knots >= 1 && cfg.steps % param.n_knots == 0,
          "steps must be a multiple of the knot count");
  const int nk = param.n_knots, m = model.m;
  ForwardControlResult out;

  if (cfg.mode == ForwardMode::MarkovValue) {
    // Parameters: r knots, then u(0).
    Vec lo(nk + m), hi(nk + m), x0(nk + m);
    lo << Vec::Zero(nk), Vec::Constant(m, -param.xi_hi - 10.0);
    hi << Vec::Constant(nk, param.r_max), Vec::Constant(m, -param.xi_lo + 10.0);
    x0 << Vec::Zero(nk), Vec::Zero(m);
    auto eval = [&](const Vec& x, Vec* u_used, double* agent) -> Candidate {
      Vec u0 = x.tail(m);
      ForwardEvaluation ev;
      try {
        ev = evaluate_forward_markov(model, principal, u0, x.head(nk), cfg.steps);
      } catch (const Error&) {
        return {1e30, 1e30};
      }
      const Vec xi = -ev.z.row(cfg.steps).transpose();
      const double d =
          feasibility_shift(ev.agent_cost, principal.kappa, xi, param.xi_lo, param.xi_hi);
      u0.array() -= d;
      if (u_used) *u_used = u0;
      if (agent) *agent = ev.agent_cost - d;
      const double excess = box_excess(xi.array() + d, param.xi_lo, param.xi_hi);
      return {ev.principal_cost + d,
              std::max(0.0, ev.agent_cost - d - principal.kappa) + excess};
    };
    const CandidateFn fn = [&](const Vec& x) { return eval(x, nullptr, nullptr); };
    const NmResult res = nelder_mead_search(fn, x0, lo, hi, search);
    if (!res.found_feasible)
      throw Infeasible("J <= kappa", "best violation " + fmt(res.best.violation));
    Vec u0;
    eval(res.best_x, &u0, &out.agent_cost);
    out.value = res.best.value;
    out.r_knots = res.best_x.head(nk);
    out.parameters = u0;
    out.evaluations = res.evaluations;
    out.trace = res.trace;
    return out;
  }

  // Free Z knots: parameters r knots, then Z state-major.
  Vec lo(nk + m * nk), hi(nk + m * nk), x0 = Vec::Zero(nk + m * nk);
  lo << Vec::Zero(nk), Vec::Constant(m * nk, cfg.z_lo);
  hi << Vec::Constant(nk, param.r_max), Vec::Constant(m * nk, cfg.z_hi);
  const TimeGrid grid(0.0, model.horizon, cfg.steps);
  auto eval = [&](const Vec& x) -> Candidate {
    const Vec r = x.head(nk);
    const Vec zk = x.tail(m * nk);
    const auto z_of = [&](int k, int) -> Vec {
      const int knot = knot_index(stage_time(grid, k, 1), model.horizon, nk);
      Vec z(m);
      for (int i = 0; i < m; ++i) z(i) = zk(i * nk + knot);
      return z;
    };
    try {
      const ForwardRun run = run_forward(model, grid, r, z_of(0, 0), z_of);
      const double pay = r.sum() * model.horizon / static_cast<double>(nk);
      const double v = principal_running(principal, grid, run.p) + pay +
                       principal.C0(run.p.row(cfg.steps).transpose()) - principal.kappa +
                       run.agent_running - running_payment_utility_integral(model, r);
      return {v, 0.0};
    } catch (const Error&) {
      return {1e30, 1e30};
    }
  };
  const NmResult res = nelder_mead_search(eval, x0, lo, hi, search);
  out.value = res.best.value;
  out.agent_cost = principal.kappa;
  out.r_knots = res.best_x.head(nk);
  out.parameters = res.best_x.tail(m * nk);
  out.evaluations = res.evaluations;
  out.trace = res.trace;
  return out;
}

// ---------------------------------------------------------------------------
// Epidemic containment
// ---------------------------------------------------------------------------

EpidemicParams EpidemicParams::defaults() {
  EpidemicParams p;
  p.thetaA_minus = [](double s) { return 0.2 + 1.5 * s; };
  p.thetaA_plus = [](double s) { return 0.1 + 0.4 * s; };
  p.thetaB_minus = [](double s) { return 0.2 + 0.8 * s; };
  p.thetaB_plus = [](double s) { return 0.2 + 0.8 * s; };
  p.phiA = [](double s) { return 2.0 * s; };
  p.phiB = [](double s) { return 1.0 * s; };
  p.pi0 = Vec(4);
  p.pi0 << 0.15, 0.45, 0.05, 0.35;
  p.kappa = 0.3;
  return p;
}

double infected_share(double infected, double healthy) {
  const double total = infected + healthy;
  return total > 0.0 ? infected / total : 0.0;
}

EpidemicModel build_epidemic_model(const EpidemicParams& params) {
  require(params.pi0.size() == 4 && (params.pi0.array() >= 0.0).all() &&
              std::abs(params.pi0.sum() - 1.0) < 1e-12,
          "pi0 must lie on the 4-state simplex");
  require(params.nuI >= 0.0 && params.nuH >= 0.0, "migration multipliers must be >= 0");
  require(params.gammaI > 0.0 && params.gammaH > 0.0, "effort weights must be positive");
  require(params.thetaA_minus && params.thetaA_plus && params.thetaB_minus &&
              params.thetaB_plus && params.phiA && params.phiB,
          "rate and cost functions must be set");
  for (double s = 0.0; s <= 1.0 + 1e-12; s += 0.125) {
    require(params.thetaA_minus(s) >= 0.0 && params.thetaA_plus(s) >= 0.0 &&
                params.thetaB_minus(s) >= 0.0 && params.thetaB_plus(s) >= 0.0,
            "rate functions must be non-negative on [0, 1]");
  }

  FiniteStateModel model;
  model.m = 4;
  model.alpha_lo = params.alpha_lo;
  model.alpha_hi = params.alpha_hi;
  model.horizon = params.horizon;
  model.p0 = params.pi0;
  model.u_run = params.u_run;
  model.gamma = Vec(4);
  model.gamma << params.gammaI, params.gammaH, params.gammaI, params.gammaH;
  model.lambda = Mat::Zero(4, 4);
  model.lambda(AI, BI) = model.lambda(BI, AI) = params.nuI;
  model.lambda(AH, BH) = model.lambda(BH, AH) = params.nuH;
  model.allowed = Eigen::MatrixXi::Zero(4, 4);
  for (auto [i, j] : {std::pair{AI, AH}, {AH, AI}, {BI, BH}, {BH, BI}, {AI, BI}, {BI, AI},
                      {AH, BH}, {BH, AH}})
    model.allowed(i, j) = 1;

  const EpidemicParams P = params;
  model.base_rates = [P](double, int i, int j, const Vec& p) -> double {
    const double sA = infected_share(p(AI), p(AH));
    const double sB = infected_share(p(BI), p(BH));
    if (i == AI && j == AH) return P.thetaA_plus(infected_share(p(AH), p(AI)));
    if (i == AH && j == AI) return P.thetaA_minus(sA);
    if (i == BI && j == BH) return P.thetaB_plus(infected_share(p(BH), p(BI)));
    if (i == BH && j == BI) return P.thetaB_minus(sB);
    if ((i == AI && j == BI) || (i == BI && j == AI)) return P.nuI * P.alpha_lo;
    if ((i == AH && j == BH) || (i == BH && j == AH)) return P.nuH * P.alpha_lo;
    return 0.0;
  };
  model.c1 = [P](double, int i, const Vec& p) -> double {
    if (i == AI || i == AH) return P.phiA(infected_share(p(AI), p(AH)));
    return P.phiB(infected_share(p(BI), p(BH)));
  };

  PrincipalSpec principal;
  const double piA0 = P.pi0(AI) + P.pi0(AH);
  principal.c0 = [P](double, const Vec& p) {
    return std::exp(P.sigmaA * p(AI) + P.sigmaB * p(BI));
  };
  principal.C0 = [P, piA0](const Vec& p) {
    const double d = p(AI) + p(AH) - piA0;
    return P.sigmaP * d * d;
  };
  principal.kappa = P.kappa;
  return {model, principal};
}

PlainNashComparison compare_plain_nash(const FiniteStateModel& model,
                                       const PrincipalSpec& principal,
                                       const Contract& optimized, const SolverConfig& cfg) {
  FiniteStateModel plain_model = model;
  plain_model.u_run = RunningUtility::Linear;
  const Contract none = Contract::zero(model.m, static_cast<int>(optimized.r_knots.size()));
  PlainNashComparison out{solve_nash(model, optimized, cfg),
                          solve_nash(plain_model, none, cfg),
                          {},
                          {}};
  out.with_contract = evaluate_contract(model, principal, optimized, out.contracted);
  out.without_contract = evaluate_contract(plain_model, principal, none, out.plain);
  return out;
}

}  // namespace mfg::contract
