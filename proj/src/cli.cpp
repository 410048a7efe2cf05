#include "mfg/cli.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <set>
#include <sstream>

#include "CLI11.hpp"
#include "mfg/contract_mfg.hpp"
#include "mfg/growth.hpp"
#include "mfg/lq_systemic.hpp"
#include "mfg/macro_finance.hpp"
#include "mfg/mining.hpp"

namespace mfg::cli {

namespace fs = std::filesystem;

namespace {

// ---------------------------------------------------------------------------
// Schema reading
// ---------------------------------------------------------------------------

/// Typed access to one JSON object; remembers the keys it has read so that
/// finish() can reject the rest.
class Reader {
 public:
  Reader(const json& obj, std::string prefix) : obj_(obj), prefix_(std::move(prefix)) {
    if (!obj_.is_object()) throw SchemaError(prefix_, "expected an object");
  }

  bool has(const std::string& key) const { return obj_.contains(key); }

  double number(const std::string& key, double def) {
    seen_.insert(key);
    if (!obj_.contains(key)) return def;
    return as_number(obj_.at(key), field(key));
  }

  int integer(const std::string& key, int def) {
    seen_.insert(key);
    if (!obj_.contains(key)) return def;
    return as_integer(obj_.at(key), field(key));
  }

  std::string text(const std::string& key, const std::string& def,
                   const std::vector<std::string>& allowed) {
    seen_.insert(key);
    if (!obj_.contains(key)) return def;
    const json& v = obj_.at(key);
    if (!v.is_string()) throw SchemaError(field(key), "expected a string");
    const std::string s = v.get<std::string>();
    if (std::find(allowed.begin(), allowed.end(), s) == allowed.end()) {
      std::string list;
      for (const auto& a : allowed) list += (list.empty() ? "" : ", ") + a;
      throw SchemaError(field(key), "must be one of {" + list + "}, got \"" + s + "\"");
    }
    return s;
  }

  /// Array of numbers; `size` < 0 accepts any non-empty length.
  std::vector<double> numbers(const std::string& key, std::vector<double> def,
                              int size = -1) {
    seen_.insert(key);
    if (!obj_.contains(key)) return def;
    const json& v = obj_.at(key);
    if (!v.is_array() || v.empty()) throw SchemaError(field(key), "expected a non-empty array");
    if (size >= 0 && static_cast<int>(v.size()) != size)
      throw SchemaError(field(key), "expected " + std::to_string(size) + " entries");
    std::vector<double> out;
    for (std::size_t i = 0; i < v.size(); ++i)
      out.push_back(as_number(v[i], field(key) + "[" + std::to_string(i) + "]"));
    return out;
  }

  /// Required square matrix of size n.
  Eigen::MatrixXd matrix(const std::string& key, int n) {
    seen_.insert(key);
    if (!obj_.contains(key)) throw SchemaError(field(key), "required key is missing");
    const json& v = obj_.at(key);
    if (!v.is_array() || static_cast<int>(v.size()) != n)
      throw SchemaError(field(key), "expected " + std::to_string(n) + " rows");
    Eigen::MatrixXd M(n, n);
    for (int i = 0; i < n; ++i) {
      if (!v[i].is_array() || static_cast<int>(v[i].size()) != n)
        throw SchemaError(field(key), "row " + std::to_string(i) + " must have " +
                                          std::to_string(n) + " entries");
      for (int j = 0; j < n; ++j)
        M(i, j) = as_number(v[i][j], field(key) + "[" + std::to_string(i) + "][" +
                                         std::to_string(j) + "]");
    }
    return M;
  }

  void mark(const std::string& key) { seen_.insert(key); }

  void finish() const {
    for (const auto& item : obj_.items())
      if (!seen_.count(item.key())) throw SchemaError(field(item.key()), "unknown key");
  }

  std::string field(const std::string& key) const {
    return prefix_.empty() ? key : prefix_ + "." + key;
  }

  static double as_number(const json& v, const std::string& where) {
    if (!v.is_number()) throw SchemaError(where, "expected a number");
    const double x = v.get<double>();
    if (!std::isfinite(x)) throw SchemaError(where, "must be finite");
    return x;
  }

  static int as_integer(const json& v, const std::string& where) {
    if (v.is_number_integer()) {
      const auto x = v.get<std::int64_t>();
      if (x < INT32_MIN || x > INT32_MAX) throw SchemaError(where, "integer out of range");
      return static_cast<int>(x);
    }
    if (v.is_number_float()) {
      const double x = v.get<double>();
      if (std::floor(x) == x && std::abs(x) < 2e9) return static_cast<int>(x);
    }
    throw SchemaError(where, "expected an integer");
  }

 private:
  const json& obj_;
  std::string prefix_;
  std::set<std::string> seen_;
};

void check(bool ok, const std::string& field, const std::string& what) {
  if (!ok) throw SchemaError(field, what);
}

// ---------------------------------------------------------------------------
// Output
// ---------------------------------------------------------------------------

class Table {
 public:
  explicit Table(std::vector<std::string> header) : header_(std::move(header)) {}

  void add(const std::vector<double>& row) { rows_.push_back(row); }

  std::string render() const {
    std::string s;
    for (std::size_t j = 0; j < header_.size(); ++j) s += (j ? "," : "") + quote(header_[j]);
    s += "\r\n";
    for (const auto& row : rows_) {
      for (std::size_t j = 0; j < row.size(); ++j) s += (j ? "," : "") + format_double(row[j]);
      s += "\r\n";
    }
    return s;
  }

 private:
  static std::string quote(const std::string& f) {
    if (f.find_first_of(",\"\r\n") == std::string::npos) return f;
    std::string q = "\"";
    for (char c : f) q += (c == '"') ? std::string("\"\"") : std::string(1, c);
    return q + "\"";
  }

  std::vector<std::string> header_;
  std::vector<std::vector<double>> rows_;
};

/// Everything a scenario writes goes through here, inside `dir`.
struct Context {
  fs::path dir;
  std::vector<std::string> artifacts;
  json summary = json::object();
  json diagnostics = json::object();

  void write_file(const std::string& name, const std::string& bytes) {
    const fs::path file = dir / name;
    std::ofstream os(file, std::ios::binary | std::ios::trunc);
    if (!os) throw IoError("cannot open " + file.string() + " for writing");
    os.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    os.close();
    if (!os) throw IoError("failed writing " + file.string());
    if (std::find(artifacts.begin(), artifacts.end(), name) == artifacts.end())
      artifacts.push_back(name);
  }
  void write_csv(const std::string& name, const Table& table) {
    write_file(name, table.render());
  }
};

using Job = std::function<void(Context&)>;

/// Reads the scenario keys into a ready-to-run job; throws SchemaError.
using Preparer = Job (*)(const ScenarioConfig&);

json vec_json(const Eigen::VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

// ---------------------------------------------------------------------------
// Scenarios
// ---------------------------------------------------------------------------

Job prepare_systemic_risk(const ScenarioConfig& cfg) {
  Reader r(cfg.params, "params");
  lq::LqParams P;
  P.a = r.number("a", 0.1);
  P.q = r.number("q", 0.5);
  P.eps = r.number("eps", 0.5);
  P.c = r.number("c", 0.0);
  P.sigma = r.number("sigma", 1.0);
  P.rho_corr = r.number("rho", 0.5);
  const int n = r.integer("n_players", 10);
  check(n >= 1 && n <= 100000, r.field("n_players"), "must be in [1, 100000]");
  P.n_players = lq::PlayerCount::finite(n);
  P.horizon = r.number("horizon", 1.0);
  check(P.horizon > 0.0, r.field("horizon"), "must be positive");
  Eigen::VectorXd x0 = Eigen::VectorXd::Zero(n);
  if (r.has("x0") && cfg.params.at("x0").is_array()) {
    const auto v = r.numbers("x0", {}, n);
    for (int i = 0; i < n; ++i) x0(i) = v[i];
  } else {
    x0.setConstant(r.number("x0", 0.0));
  }
  r.finish();
  try {
    P.validate();
  } catch (const DomainError& e) {
    throw SchemaError("params", e.what());
  }
  const int steps = cfg.steps.value_or(1000);
  const int samples = cfg.paths.value_or(10);
  const std::uint64_t seed = cfg.seed;
  return [=](Context& ctx) {
    const TimeGrid grid(0.0, P.horizon, steps);
    const auto open = lq::solve_riccati(P, grid, lq::LoopKind::Open);
    const auto closed = lq::solve_riccati(P, grid, lq::LoopKind::Closed);
    const auto limit = lq::solve_riccati(P, grid, lq::LoopKind::Limit);
    Table riccati({"t", "eta_open", "eta_closed", "eta_limit"});
    double gap_oc = 0.0, gap_cl = 0.0, gap_ol = 0.0;
    for (int k = 0; k < grid.nodes(); ++k) {
      riccati.add({grid.time(k), open.eta[k], closed.eta[k], limit.eta[k]});
      gap_oc = std::max(gap_oc, std::abs(open.eta[k] - closed.eta[k]));
      gap_cl = std::max(gap_cl, std::abs(closed.eta[k] - limit.eta[k]));
      gap_ol = std::max(gap_ol, std::abs(open.eta[k] - limit.eta[k]));
    }
    ctx.write_csv("riccati.csv", riccati);

    const auto ens = lq::simulate_equilibrium(P, closed, x0, samples, seed);
    Table xs({"t", "sample", "mean", "std"});
    for (int s = 0; s < samples; ++s) {
      const auto c = lq::cross_section(ens, s);
      for (int k = 0; k < grid.nodes(); ++k) xs.add({grid.time(k), double(s), c.mean[k], c.std[k]});
    }
    ctx.write_csv("cross_section.csv", xs);
    ctx.summary = {{"eta0_open", open.eta[0]},
                   {"eta0_closed", closed.eta[0]},
                   {"eta0_limit", limit.eta[0]},
                   {"sup_gap_open_closed", gap_oc},
                   {"sup_gap_closed_limit", gap_cl},
                   {"sup_gap_open_limit", gap_ol},
                   {"flagged_paths", ens.flagged_count()}};
  };
}

Job prepare_growth_pareto(const ScenarioConfig& cfg) {
  Reader r(cfg.params, "params");
  growth::ParetoState s0{r.number("k", 1.5), r.number("q0", 1.0)};
  const double sigma = r.number("sigma", 0.3);
  const double gamma0 = r.number("gamma", 0.2);
  const double gamma1 = r.number("gamma_slope", 0.1);
  const double horizon = r.number("horizon", 1.0);
  r.finish();
  try {
    s0.validate();
  } catch (const DomainError& e) {
    throw SchemaError("params", e.what());
  }
  check(sigma >= 0.0, "params.sigma", "must be non-negative");
  check(horizon > 0.0, "params.horizon", "must be positive");
  const int steps = cfg.steps.value_or(1000);
  const int n = cfg.paths.value_or(10000);
  const std::uint64_t seed = cfg.seed;
  return [=](Context& ctx) {
    const TimeGrid grid(0.0, horizon, steps);
    std::vector<double> gamma(grid.nodes());
    for (int k = 0; k < grid.nodes(); ++k) gamma[k] = gamma0 + gamma1 * grid.time(k);
    const auto w0 = brownian_path(grid, seed, std::uint64_t(1) << 63);
    const auto q = growth::propagate_pareto(s0, grid, gamma, sigma, w0);
    Table t({"t", "q"});
    for (int k = 0; k < grid.nodes(); ++k) t.add({grid.time(k), q[k]});
    ctx.write_csv("pareto.csv", t);
    const auto particles = growth::simulate_pareto_particles(s0, grid, gamma, sigma, w0, n, seed);
    const double ks = growth::pareto_ks_distance(particles, {s0.k, q.back()});
    ctx.summary = {{"q_T", q.back()},
                   {"particles", n},
                   {"ks_distance", ks},
                   {"ks_critical_1pct", growth::ks_critical_1pct(n)}};
  };
}

Job prepare_aiyagari(const ScenarioConfig& cfg) {
  Reader r(cfg.params, "params");
  growth::AiyagariParams P;
  P.alpha_cd = r.number("alpha", P.alpha_cd);
  P.A_tfp = r.number("A", P.A_tfp);
  P.delta = r.number("delta", P.delta);
  P.gamma_crra = r.number("gamma", P.gamma_crra);
  P.horizon = r.number("horizon", P.horizon);
  growth::WealthDistribution a0;
  if (r.has("a0") && cfg.params.at("a0").is_array())
    a0.atoms = r.numbers("a0", {1.0});
  else
    a0.atoms = {r.number("a0", 1.0)};
  const int max_iter = r.integer("max_iter", 100);
  r.finish();
  try {
    P.validate();
  } catch (const DomainError& e) {
    throw SchemaError("params", e.what());
  }
  for (double a : a0.atoms) check(a > 0.0, "params.a0", "initial wealth atoms must be positive");
  FixedPointConfig fp{cfg.damping.value_or(1.0), cfg.tol.value_or(1e-6), max_iter};
  try {
    fp.validate();
  } catch (const DomainError& e) {
    throw SchemaError("damping/tol/params.max_iter", e.what());
  }
  const int steps = cfg.steps.value_or(100);
  const int paths = cfg.paths.value_or(2000);
  const std::uint64_t seed = cfg.seed;
  return [=](Context& ctx) {
    const auto sol = growth::solve_aiyagari_mfg(P, a0, fp, steps, paths, seed);
    Table t({"t", "mu_bar", "Y", "mu_stderr"});
    const auto& g = sol.flow.grid;
    for (int k = 0; k < g.nodes(); ++k)
      t.add({g.time(k), sol.flow.mu_bar[k], sol.Y[k], sol.mu_stderr[k]});
    ctx.write_csv("aiyagari.csv", t);
    Table res({"iteration", "residual"});
    for (std::size_t i = 0; i < sol.residuals.size(); ++i) res.add({double(i), sol.residuals[i]});
    ctx.write_csv("residuals.csv", res);
    const auto [lo, hi] = growth::adjoint_bounds(sol.flow, P);
    const auto [ymin, ymax] = std::minmax_element(sol.Y.begin(), sol.Y.end());
    ctx.summary = {{"iterations", sol.residuals.size()},
                   {"final_residual", sol.residuals.back()},
                   {"floored", sol.floored},
                   {"Y_bounds", {lo, hi}},
                   {"Y_range", {*ymin, *ymax}}};
    ctx.diagnostics["residual_history"] = sol.residuals;
  };
}

Job prepare_macro_one_pop(const ScenarioConfig& cfg) {
  Reader r(cfg.params, "params");
  macro::OnePopParams P;
  P.a = r.number("a", P.a);
  P.rho = r.number("rho", P.rho);
  P.kappa = r.number("kappa", P.kappa);
  P.delta = r.number("delta", P.delta);
  P.sigma = r.number("sigma", P.sigma);
  P.sigma0 = r.number("sigma0", P.sigma0);
  P.muM = r.number("muM", P.muM);
  P.sigmaM = r.number("sigmaM", P.sigmaM);
  r.finish();
  try {
    (void)macro::one_pop_stationary_equilibrium(P);
  } catch (const Infeasible& e) {
    throw SchemaError("params", e.what());
  } catch (const DomainError& e) {
    throw SchemaError("params", e.what());
  }
  return [=](Context& ctx) {
    const auto e = macro::one_pop_stationary_equilibrium(P);
    Table t({"one_minus_vartheta", "vartheta", "q", "p", "p_plus_q", "iota", "r", "theta"});
    t.add({e.one_minus_vartheta, e.vartheta, e.q, e.p, e.p_plus_q, e.iota, e.r, e.theta});
    ctx.write_csv("equilibrium.csv", t);
    ctx.summary = {{"one_minus_vartheta", e.one_minus_vartheta},
                   {"vartheta", e.vartheta},
                   {"q", e.q},
                   {"p", e.p},
                   {"p_plus_q", e.p_plus_q},
                   {"iota", e.iota},
                   {"r", e.r},
                   {"theta", e.theta},
                   {"p_printed_formula", e.p_printed}};
  };
}

double quantile_sorted(const std::vector<double>& s, double u) {
  const double x = u * (s.size() - 1);
  const auto i = static_cast<std::size_t>(x);
  if (i + 1 >= s.size()) return s.back();
  return s[i] + (x - i) * (s[i + 1] - s[i]);
}

Job prepare_macro_two_pop(const ScenarioConfig& cfg) {
  Reader r(cfg.params, "params");
  macro::TwoPopParams P;
  P.a = r.number("a", P.a);
  P.rho = r.number("rho", P.rho);
  P.kappa = r.number("kappa", P.kappa);
  P.delta = r.number("delta", P.delta);
  P.sigma = r.number("sigma", P.sigma);
  const double eta0 = r.number("eta0", 0.1);
  const double horizon = r.number("horizon", 50.0);
  const double reach = r.number("reach_level", 0.95);
  macro::EtaOptions opt;
  opt.record_stride = r.integer("record_stride", 100);
  opt.max_substep_variance = r.number("max_substep_variance", opt.max_substep_variance);
  r.finish();
  try {
    P.validate();
  } catch (const DomainError& e) {
    throw SchemaError("params", e.what());
  }
  check(eta0 > 0.0 && eta0 < 1.0, "params.eta0", "must lie in (0, 1)");
  check(horizon > 0.0, "params.horizon", "must be positive");
  check(opt.max_substep_variance > 0.0, "params.max_substep_variance", "must be positive");
  const int steps = cfg.steps.value_or(50000);
  check(opt.record_stride >= 1 && steps % opt.record_stride == 0, "params.record_stride",
        "must be positive and divide steps");
  const int paths = cfg.paths.value_or(1000);
  const std::uint64_t seed = cfg.seed;
  return [=](Context& ctx) mutable {
    std::vector<char> reached(paths, 0);
    opt.observer = [&](int p, int, double, double after, double) {
      if (after >= reach) reached[p] = 1;
    };
    const TimeGrid grid(0.0, horizon, steps);
    const auto ens = macro::simulate_eta(P, eta0, grid, paths, seed, opt);
    Table t({"t", "mean_eta", "q05", "q50", "q95", "mean_r"});
    double lo = 1.0, hi = 0.0;
    std::vector<double> col(paths);
    for (int k = 0; k < ens.grid.nodes(); ++k) {
      double sum_r = 0.0;
      for (int p = 0; p < paths; ++p) {
        col[p] = ens.at(p, k);
        sum_r += macro::two_pop_interest_rate(col[p], P);
        lo = std::min(lo, col[p]);
        hi = std::max(hi, col[p]);
      }
      double mean = 0.0;
      for (double x : col) mean += x;
      mean /= paths;
      std::sort(col.begin(), col.end());
      t.add({ens.grid.time(k), mean, quantile_sorted(col, 0.05), quantile_sorted(col, 0.5),
             quantile_sorted(col, 0.95), sum_r / paths});
    }
    ctx.write_csv("two_pop.csv", t);
    const auto c = macro::two_pop_constants(P);
    int n_reached = 0, n_final = 0;
    for (char x : reached) n_reached += x;
    for (int p = 0; p < paths; ++p) n_final += ens.at(p, ens.grid.steps()) >= reach;
    ctx.summary = {{"q", c.q},
                   {"iota", c.iota},
                   {"clearing_gap", P.rho * c.q - (P.a - c.iota)},
                   {"min_eta", lo},
                   {"max_eta", hi},
                   {"reach_level", reach},
                   {"fraction_reached", double(n_reached) / paths},
                   {"fraction_final_above", double(n_final) / paths}};
  };
}

contract::RunningUtility utility_from(const std::string& s) {
  return s == "sqrt-shift" ? contract::RunningUtility::SqrtShift
                           : contract::RunningUtility::Linear;
}

contract::ShareFunction affine(const std::vector<double>& c) {
  const double c0 = c[0], c1 = c[1];
  return [c0, c1](double s) { return c0 + c1 * s; };
}

Job prepare_epidemic_contract(const ScenarioConfig& cfg) {
  using namespace contract;
  Reader r(cfg.params, "params");
  const std::string kind = r.text("model", "epidemic", {"epidemic", "custom-matrix"});
  const std::vector<std::string> utilities{"linear", "sqrt-shift"};
  FiniteStateModel model;
  PrincipalSpec principal;
  std::vector<std::string> names;
  if (kind == "epidemic") {
    auto E = EpidemicParams::defaults();
    E.thetaA_minus = affine(r.numbers("theta_a_minus", {0.2, 1.5}, 2));
    E.thetaA_plus = affine(r.numbers("theta_a_plus", {0.1, 0.4}, 2));
    E.thetaB_minus = affine(r.numbers("theta_b_minus", {0.2, 0.8}, 2));
    E.thetaB_plus = affine(r.numbers("theta_b_plus", {0.2, 0.8}, 2));
    E.phiA = affine(r.numbers("phi_a", {0.0, 2.0}, 2));
    E.phiB = affine(r.numbers("phi_b", {0.0, 1.0}, 2));
    E.nuI = r.number("nu_i", E.nuI);
    E.nuH = r.number("nu_h", E.nuH);
    E.gammaI = r.number("gamma_i", E.gammaI);
    E.gammaH = r.number("gamma_h", E.gammaH);
    E.sigmaA = r.number("sigma_a", E.sigmaA);
    E.sigmaB = r.number("sigma_b", E.sigmaB);
    E.sigmaP = r.number("sigma_p", E.sigmaP);
    const auto pi0 = r.numbers("pi0", {0.15, 0.45, 0.05, 0.35}, 4);
    E.pi0 = Eigen::Map<const Vec>(pi0.data(), 4);
    E.alpha_lo = r.number("alpha_lo", E.alpha_lo);
    E.alpha_hi = r.number("alpha_hi", E.alpha_hi);
    E.horizon = r.number("horizon", E.horizon);
    E.kappa = r.number("kappa", E.kappa);
    E.u_run = utility_from(r.text("u_run", "linear", utilities));
    try {
      auto built = build_epidemic_model(E);
      model = std::move(built.model);
      principal = std::move(built.principal);
    } catch (const DomainError& e) {
      throw SchemaError("params", e.what());
    }
    names = {"AI", "AH", "BI", "BH"};
  } else {
    const auto p0 = r.numbers("p0", {});
    check(!p0.empty(), r.field("p0"), "required key is missing");
    const int m = static_cast<int>(p0.size());
    const Mat base = r.matrix("base_rates", m);
    model.m = m;
    model.p0 = Eigen::Map<const Vec>(p0.data(), m);
    model.base_rates = [base](double, int i, int j, const Vec&) { return base(i, j); };
    model.lambda = r.matrix("lambda", m);
    const auto gamma = r.numbers("gamma", std::vector<double>(m, 1.0), m);
    model.gamma = Eigen::Map<const Vec>(gamma.data(), m);
    const auto c1 = r.numbers("state_cost", std::vector<double>(m, 0.0), m);
    const Vec c1v = Eigen::Map<const Vec>(c1.data(), m);
    model.c1 = [c1v](double, int i, const Vec&) { return c1v(i); };
    model.alpha_lo = r.number("alpha_lo", 0.0);
    model.alpha_hi = r.number("alpha_hi", 1.0);
    model.horizon = r.number("horizon", 1.0);
    model.u_run = utility_from(r.text("u_run", "linear", utilities));
    const auto w = r.numbers("principal_running", std::vector<double>(m, 0.0), m);
    const auto W = r.numbers("principal_terminal", std::vector<double>(m, 0.0), m);
    const Vec wv = Eigen::Map<const Vec>(w.data(), m), Wv = Eigen::Map<const Vec>(W.data(), m);
    principal.c0 = [wv](double, const Vec& p) { return wv.dot(p); };
    principal.C0 = [Wv](const Vec& p) { return Wv.dot(p); };
    principal.kappa = r.number("kappa", 0.0);
    try {
      model.validate();
    } catch (const DomainError& e) {
      throw SchemaError("params", e.what());
    }
    for (int i = 0; i < m; ++i) names.push_back(std::to_string(i));
  }
  ContractParameterization param;
  param.n_knots = r.integer("n_knots", param.n_knots);
  param.r_max = r.number("r_max", param.r_max);
  param.xi_lo = r.number("xi_lo", param.xi_lo);
  param.xi_hi = r.number("xi_hi", param.xi_hi);
  SearchConfig search;
  search.restarts = r.integer("restarts", search.restarts);
  search.max_evals = r.integer("max_evals", search.max_evals);
  search.solver.fixed_point.max_iter = r.integer("max_iter", search.solver.fixed_point.max_iter);
  r.finish();
  search.solver.steps = cfg.steps.value_or(200);
  search.solver.fixed_point.tol = cfg.tol.value_or(1e-8);
  search.solver.fixed_point.damping = cfg.damping.value_or(0.5);
  check(param.n_knots >= 1 && search.solver.steps % param.n_knots == 0, "params.n_knots",
        "must be positive and divide steps");
  check(param.r_max >= 0.0, "params.r_max", "must be non-negative");
  check(param.xi_lo <= param.xi_hi, "params.xi_lo", "must not exceed xi_hi");
  check(search.restarts >= 1, "params.restarts", "must be positive");
  check(search.max_evals >= 1, "params.max_evals", "must be positive");
  try {
    search.solver.fixed_point.validate();
  } catch (const DomainError& e) {
    throw SchemaError("damping/tol/params.max_iter", e.what());
  }
  const int chains = cfg.paths.value_or(10000);
  const std::uint64_t seed = cfg.seed;
  return [=](Context& ctx) {
    const auto opt = optimize_contract(model, principal, param, search);
    const auto cmp = compare_plain_nash(model, principal, opt.contract, search.solver);
    auto write_eq = [&](const std::string& file, const MFGEquilibrium& eq) {
      std::vector<std::string> header{"t"};
      for (const char* pre : {"p_", "u_", "alpha_"})
        for (const auto& n : names) header.push_back(pre + n);
      Table t(header);
      for (int k = 0; k < eq.grid.nodes(); ++k) {
        std::vector<double> row{eq.grid.time(k)};
        for (const Mat* M : {&eq.p, &eq.u, &eq.alpha})
          for (int i = 0; i < model.m; ++i) row.push_back((*M)(k, i));
        t.add(row);
      }
      ctx.write_csv(file, t);
    };
    write_eq("contracted.csv", cmp.contracted);
    write_eq("plain.csv", cmp.plain);
    Table knots({"t_start", "t_end", "r"});
    const int nk = static_cast<int>(opt.contract.r_knots.size());
    for (int j = 0; j < nk; ++j)
      knots.add({model.horizon * j / nk, model.horizon * (j + 1) / nk, opt.contract.r_knots(j)});
    ctx.write_csv("contract.csv", knots);

    json cert = nullptr;
    if (chains > 0) {
      const auto ens = simulate_chain(model, cmp.contracted, chains, seed);
      const Mat occ = occupancy(ens, model.m);
      double worst = 0.0;
      for (int k = 0; k < occ.rows(); ++k)
        for (int i = 0; i < model.m; ++i) {
          const double p = cmp.contracted.p(k, i);
          const double se = std::sqrt(std::max(p * (1.0 - p), 1e-300) / chains);
          worst = std::max(worst, std::abs(occ(k, i) - p) / se);
        }
      cert = {{"chains", chains}, {"max_standard_errors", worst}};
    }
    json trace = json::array();
    for (const auto& e : opt.trace)
      trace.push_back({{"restart", e.restart},
                       {"evaluations", e.evaluations},
                       {"penalty_weight", e.penalty_weight},
                       {"objective", e.objective},
                       {"value", e.value},
                       {"violation", e.violation}});
    ctx.summary = {
        {"model", kind},
        {"kappa", principal.kappa},
        {"V_kappa", opt.value},
        {"J", cmp.with_contract.agent_cost},
        {"J0", cmp.with_contract.principal_cost},
        {"feasible", cmp.with_contract.feasible},
        {"xi", vec_json(opt.contract.xi)},
        {"evaluations", opt.evaluations},
        {"comparison",
         {{"contract", {{"J", cmp.with_contract.agent_cost}, {"J0", cmp.with_contract.principal_cost}}},
          {"plain_nash",
           {{"J", cmp.without_contract.agent_cost}, {"J0", cmp.without_contract.principal_cost}}}}},
        {"chain_certificate", cert}};
    ctx.diagnostics["search_trace"] = trace;
    ctx.diagnostics["nash_residual"] = cmp.contracted.residual;
  };
}

Job prepare_mining(const ScenarioConfig& cfg) {
  Reader r(cfg.params, "params");
  mining::MiningParams P;
  P.r = r.number("r", P.r);
  P.delta = r.number("delta", P.delta);
  P.lambda = r.number("lambda", P.lambda);
  P.eps = r.number("eps", P.eps);
  P.c = r.number("c", P.c);
  mining::MiningGridConfig g;
  g.k_max = r.number("k_max", g.k_max);
  g.max_iter = r.integer("max_iter", g.max_iter);
  const double k0 = r.number("k0", 0.5);
  const double horizon = r.number("horizon", 100.0);
  const int traj_steps = r.integer("trajectory_steps", 10000);
  r.finish();
  try {
    P.validate();
  } catch (const DomainError& e) {
    throw SchemaError("params", e.what());
  }
  g.n_cells = cfg.steps.value_or(g.n_cells);
  g.tol = cfg.tol.value_or(g.tol);
  check(g.k_max > 0.0, "params.k_max", "must be positive");
  check(g.n_cells >= 2, "steps", "must be at least 2");
  check(g.max_iter >= 1, "params.max_iter", "must be positive");
  check(k0 >= 0.0 && k0 <= g.k_max, "params.k0", "must lie in [0, k_max]");
  check(horizon > 0.0, "params.horizon", "must be positive");
  check(traj_steps >= 1, "params.trajectory_steps", "must be positive");
  return [=](Context& ctx) {
    const auto sol = mining::solve_stationary_master(P, g);
    const auto res = mining::master_residual_profile(P, sol.U);
    Table t({"K", "U", "residual"});
    for (int i = 0; i <= sol.U.n_cells; ++i) t.add({sol.U.node(i), sol.U.values[i], res[i]});
    ctx.write_csv("master.csv", t);
    const auto tr = mining::hashrate_trajectory(sol.U, P, k0, horizon, traj_steps);
    Table tt({"t", "K"});
    for (int k = 0; k < tr.grid.nodes(); ++k) tt.add({tr.grid.time(k), tr.k[k]});
    ctx.write_csv("trajectory.csv", tt);
    json oracle = json::array();
    for (int j = 1; j <= 5; ++j) {
      const double k = g.k_max * j / 6.0;
      const auto o = mining::verify_by_characteristics(sol.U, P, k, mining::oracle_horizon(P), 1e-3);
      oracle.push_back({{"K", k}, {"U", sol.U.at(k)}, {"oracle", o.value},
                        {"gap", std::abs(o.value - sol.U.at(k))}, {"extrapolated", o.extrapolated}});
    }
    const auto ks = mining::stationary_hashrate(sol.U, P);
    ctx.summary = {{"residual", sol.residual},
                   {"iterations", sol.residuals.size() - 1},
                   {"stationary_K", ks ? json(*ks) : json(nullptr)},
                   {"trajectory_clamped", tr.clamped},
                   {"oracle", oracle}};
    ctx.diagnostics["residual_history"] = sol.residuals;
  };
}

struct Entry {
  ScenarioInfo info;
  Preparer prepare;
};

const std::vector<Entry>& registry() {
  static const std::vector<Entry> r{
      {{"systemic-risk", "LQ inter-bank game: three Riccati paths and simulated states"},
       &prepare_systemic_risk},
      {{"growth-pareto", "Pareto law propagation under common noise with a KS check"},
       &prepare_growth_pareto},
      {{"aiyagari", "Aiyagari diffusion MFG: mean wealth and adjoint fixed point"},
       &prepare_aiyagari},
      {{"macro-one-pop", "One-population stationary monetary equilibrium"},
       &prepare_macro_one_pop},
      {{"macro-two-pop", "Two-population wealth share paths and interest rate"},
       &prepare_macro_two_pop},
      {{"epidemic-contract", "Optimal contract for a finite-state MFG (epidemic or custom)"},
       &prepare_epidemic_contract},
      {{"mining", "Stationary master equation for aggregate hash rate"}, &prepare_mining},
  };
  return r;
}

const Entry& find_entry(const std::string& name) {
  for (const auto& e : registry())
    if (e.info.name == name) return e;
  throw SchemaError("scenario", "unknown scenario \"" + name + "\"");
}

Job prepare(const ScenarioConfig& config) {
  const Entry& e = find_entry(config.scenario);
  if (config.steps) check(*config.steps >= 1, "steps", "must be positive");
  if (config.paths) check(*config.paths >= 0, "paths", "must be non-negative");
  if (config.tol) check(*config.tol > 0.0, "tol", "must be positive");
  if (config.damping)
    check(*config.damping > 0.0 && *config.damping <= 1.0, "damping", "must lie in (0, 1]");
  return e.prepare(config);
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

}  // namespace

// ---------------------------------------------------------------------------
// Public API
// ---------------------------------------------------------------------------

std::string format_double(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

std::string sha256_file(const fs::path& file) {
  std::ifstream is(file, std::ios::binary);
  if (!is) throw IoError("cannot open " + file.string());
  EVP_MD_CTX* md = EVP_MD_CTX_new();
  EVP_DigestInit_ex(md, EVP_sha256(), nullptr);
  char buf[1 << 16];
  while (is) {
    is.read(buf, sizeof buf);
    EVP_DigestUpdate(md, buf, static_cast<std::size_t>(is.gcount()));
  }
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_DigestFinal_ex(md, digest, &len);
  EVP_MD_CTX_free(md);
  std::ostringstream os;
  for (unsigned int i = 0; i < len; ++i)
    os << std::hex << std::setw(2) << std::setfill('0') << int(digest[i]);
  return os.str();
}

const std::vector<ScenarioInfo>& scenarios() {
  static const std::vector<ScenarioInfo> list = [] {
    std::vector<ScenarioInfo> v;
    for (const auto& e : registry()) v.push_back(e.info);
    return v;
  }();
  return list;
}

json ScenarioConfig::to_json() const {
  json j = {{"scenario", scenario},
            {"params", params},
            {"seed", seed},
            {"out_dir", out_dir.string()}};
  if (steps) j["steps"] = *steps;
  if (paths) j["paths"] = *paths;
  if (tol) j["tol"] = *tol;
  if (damping) j["damping"] = *damping;
  return j;
}

ScenarioConfig parse_config(const json& doc) {
  Reader r(doc, "");
  ScenarioConfig c;
  r.mark("scenario");
  if (!doc.contains("scenario")) throw SchemaError("scenario", "required key is missing");
  if (!doc.at("scenario").is_string()) throw SchemaError("scenario", "expected a string");
  c.scenario = doc.at("scenario").get<std::string>();
  (void)find_entry(c.scenario);
  r.mark("params");
  if (doc.contains("params")) {
    if (!doc.at("params").is_object()) throw SchemaError("params", "expected an object");
    c.params = doc.at("params");
  }
  r.mark("seed");
  if (doc.contains("seed")) {
    const json& s = doc.at("seed");
    if (!s.is_number_unsigned() && !(s.is_number_integer() && s.get<std::int64_t>() >= 0))
      throw SchemaError("seed", "expected a non-negative integer");
    c.seed = s.get<std::uint64_t>();
  }
  r.mark("out_dir");
  if (doc.contains("out_dir")) {
    if (!doc.at("out_dir").is_string()) throw SchemaError("out_dir", "expected a string");
    c.out_dir = doc.at("out_dir").get<std::string>();
  }
  if (doc.contains("steps")) c.steps = r.integer("steps", 0);
  if (doc.contains("paths")) c.paths = r.integer("paths", 0);
  if (doc.contains("tol")) c.tol = r.number("tol", 0.0);
  if (doc.contains("damping")) c.damping = r.number("damping", 0.0);
  r.mark("steps");
  r.mark("paths");
  r.mark("tol");
  r.mark("damping");
  r.finish();
  return c;
}

ScenarioConfig load_config(const fs::path& file) {
  std::ifstream is(file, std::ios::binary);
  if (!is) throw IoError("cannot read config " + file.string());
  json doc;
  try {
    doc = json::parse(is);
  } catch (const json::parse_error& e) {
    throw SchemaError("<document>", std::string("invalid JSON: ") + e.what());
  }
  return parse_config(doc);
}

ScenarioConfig apply_overrides(ScenarioConfig c, const Overrides& o) {
  if (o.seed) c.seed = *o.seed;
  if (o.out_dir) c.out_dir = *o.out_dir;
  if (o.paths) c.paths = *o.paths;
  if (o.steps) c.steps = *o.steps;
  if (o.tol) c.tol = *o.tol;
  return c;
}

void validate_config(const ScenarioConfig& config) { (void)prepare(config); }

RunResult run_scenario(const ScenarioConfig& config) {
  const auto t0 = std::chrono::steady_clock::now();
  RunResult out;
  Job job;
  try {
    job = prepare(config);
  } catch (const SchemaError& e) {
    return {kSchema, {}, e.what()};
  } catch (const std::exception& e) {
    return {kSchema, {}, std::string("params: ") + e.what()};
  }
  const double t_validate = seconds_since(t0);

  Context ctx;
  ctx.dir = config.out_dir;
  try {
    fs::create_directories(ctx.dir);
  } catch (const std::exception& e) {
    return {kIo, {}, std::string("cannot create output directory: ") + e.what()};
  }

  std::string status = "ok";
  const auto t1 = std::chrono::steady_clock::now();
  try {
    job(ctx);
    ctx.write_file("summary.json", ctx.summary.dump(2) + "\n");
    out.exit_code = kOk;
    out.message = "ok";
  } catch (const IoError& e) {
    out.exit_code = kIo;
    out.message = e.what();
    status = "io-error";
  } catch (const NonConvergence& e) {
    out.exit_code = kNonConvergence;
    out.message = e.what();
    status = "non-convergence";
    ctx.diagnostics["residual_history"] = e.residuals();
  } catch (const Infeasible& e) {
    out.exit_code = kNonConvergence;
    out.message = e.what();
    status = "infeasible";
    ctx.diagnostics["failed_condition"] = e.condition();
  } catch (const std::exception& e) {
    out.exit_code = kNonConvergence;
    out.message = e.what();
    status = "solver-error";
  }
  const double t_run = seconds_since(t1);

  json artifacts = json::array();
  for (const auto& name : ctx.artifacts) {
    json a = {{"file", name}};
    try {
      a["bytes"] = fs::file_size(ctx.dir / name);
      a["sha256"] = sha256_file(ctx.dir / name);
    } catch (const std::exception&) {
    }
    artifacts.push_back(a);
  }
  out.manifest = {{"version", kVersion},
                  {"config", config.to_json()},
                  {"status", status},
                  {"exit_code", out.exit_code},
                  {"message", out.message},
                  {"artifacts", artifacts},
                  {"timings",
                   {{"validate_seconds", t_validate},
                    {"run_seconds", t_run},
                    {"total_seconds", seconds_since(t0)}}},
                  {"diagnostics", ctx.diagnostics}};
  try {
    std::ofstream os(ctx.dir / "manifest.json", std::ios::binary | std::ios::trunc);
    os << out.manifest.dump(2) << "\n";
    os.close();
    if (!os) throw IoError("failed writing manifest.json");
  } catch (const std::exception& e) {
    out.exit_code = kIo;
    out.message = e.what();
  }
  return out;
}

int cli_main(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Mean field game scenarios", "mfg"};
  app.require_subcommand(1);

  std::string run_config;
  std::uint64_t seed = 0;
  std::string out_dir;
  int paths = 0, steps = 0;
  double tol = 0.0;
  auto* run = app.add_subcommand("run", "Run a scenario and write its artifacts");
  run->add_option("config", run_config, "Scenario config (JSON)")->required();
  auto* o_seed = run->add_option("--seed", seed, "Random seed");
  auto* o_out = run->add_option("--out-dir", out_dir, "Output directory");
  auto* o_paths = run->add_option("--paths", paths, "Number of Monte Carlo paths");
  auto* o_steps = run->add_option("--steps", steps, "Number of time steps or grid cells");
  auto* o_tol = run->add_option("--tol", tol, "Solver tolerance");

  std::string validate_path;
  auto* validate = app.add_subcommand("validate", "Check a config against its scenario schema");
  validate->add_option("config", validate_path, "Scenario config (JSON)")->required();

  auto* list = app.add_subcommand("list-scenarios", "List scenario names");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kSchema;
  }

  if (list->parsed()) {
    for (const auto& s : scenarios()) out << s.name << "\t" << s.summary << "\n";
    return kOk;
  }
  try {
    if (validate->parsed()) {
      const auto c = load_config(validate_path);
      validate_config(c);
      out << "valid: " << c.scenario << "\n";
      return kOk;
    }
    Overrides ov;
    if (o_seed->count()) ov.seed = seed;
    if (o_out->count()) ov.out_dir = out_dir;
    if (o_paths->count()) ov.paths = paths;
    if (o_steps->count()) ov.steps = steps;
    if (o_tol->count()) ov.tol = tol;
    const auto c = apply_overrides(load_config(run_config), ov);
    const RunResult r = run_scenario(c);
    if (r.exit_code == kOk)
      out << "wrote " << (c.out_dir / "manifest.json").string() << "\n";
    else
      err << "error: " << r.message << "\n";
    return r.exit_code;
  } catch (const IoError& e) {
    err << "error: " << e.what() << "\n";
    return kIo;
  } catch (const SchemaError& e) {
    err << "error: " << e.what() << "\n";
    return kSchema;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kSchema;
  }
}

}  // namespace mfg::cli
