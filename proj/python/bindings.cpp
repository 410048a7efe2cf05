#include <pybind11/eigen.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "mfg/cli.hpp"
#include "mfg/contract_mfg.hpp"
#include "mfg/growth.hpp"
#include "mfg/lq_systemic.hpp"
#include "mfg/macro_finance.hpp"
#include "mfg/mining.hpp"

namespace py = pybind11;
using namespace pybind11::literals;

namespace {

/// Path ensemble of one component as a (paths, nodes) array.
py::array_t<double> ensemble_array(const mfg::PathEnsemble& e, int component = 0) {
  py::array_t<double> out({e.n_paths, e.grid.nodes()});
  auto a = out.mutable_unchecked<2>();
  for (int p = 0; p < e.n_paths; ++p)
    for (int k = 0; k < e.grid.nodes(); ++k) a(p, k) = e.at(p, k, component);
  return out;
}

py::dict equilibrium_dict(const mfg::contract::MFGEquilibrium& eq) {
  return py::dict("t"_a = eq.grid.times(), "p"_a = eq.p, "u"_a = eq.u, "alpha"_a = eq.alpha,
                  "agent_cost"_a = eq.agent_cost, "residual"_a = eq.residual,
                  "residuals"_a = eq.residuals);
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Mean field game solvers";
  m.attr("__version__") = mfg::cli::kVersion;

  // Errors
  auto error = py::register_exception<mfg::Error>(m, "Error", PyExc_RuntimeError);
  py::register_exception<mfg::DomainError>(m, "DomainError", error.ptr());
  py::register_exception<mfg::NonConvergence>(m, "NonConvergence", error.ptr());
  py::register_exception<mfg::Infeasible>(m, "Infeasible", error.ptr());
  py::register_exception<mfg::IntegrationBlowup>(m, "IntegrationBlowup", error.ptr());

  // Linear-quadratic systemic risk
  py::enum_<mfg::lq::LoopKind>(m, "LoopKind")
      .value("Open", mfg::lq::LoopKind::Open)
      .value("Closed", mfg::lq::LoopKind::Closed)
      .value("Limit", mfg::lq::LoopKind::Limit);

  m.def(
      "solve_riccati",
      [](double a, double q, double eps, double c, int n_players, double horizon, int steps,
         mfg::lq::LoopKind kind) {
        mfg::lq::LqParams p;
        p.a = a;
        p.q = q;
        p.eps = eps;
        p.c = c;
        p.n_players = n_players > 0 ? mfg::lq::PlayerCount::finite(n_players)
                                    : mfg::lq::PlayerCount::infinite();
        p.horizon = horizon;
        const auto r = mfg::lq::solve_riccati(p, mfg::TimeGrid(0.0, horizon, steps), kind);
        return py::make_tuple(r.grid.times(), r.eta);
      },
      "a"_a, "q"_a, "eps"_a, "c"_a, "n_players"_a, "horizon"_a = 1.0, "steps"_a = 1000,
      "kind"_a = mfg::lq::LoopKind::Closed,
      "Riccati coefficient eta on a uniform grid; n_players <= 0 selects the limit. "
      "Returns (t, eta).");

  // Macro-finance
  py::class_<mfg::macro::OnePopParams>(m, "OnePopParams")
      .def(py::init<>())
      .def_readwrite("a", &mfg::macro::OnePopParams::a)
      .def_readwrite("rho", &mfg::macro::OnePopParams::rho)
      .def_readwrite("kappa", &mfg::macro::OnePopParams::kappa)
      .def_readwrite("delta", &mfg::macro::OnePopParams::delta)
      .def_readwrite("sigma", &mfg::macro::OnePopParams::sigma)
      .def_readwrite("sigma0", &mfg::macro::OnePopParams::sigma0)
      .def_readwrite("muM", &mfg::macro::OnePopParams::muM)
      .def_readwrite("sigmaM", &mfg::macro::OnePopParams::sigmaM);

  m.def(
      "one_pop_equilibrium",
      [](const mfg::macro::OnePopParams& p) {
        const auto e = mfg::macro::one_pop_stationary_equilibrium(p);
        return py::dict("vartheta"_a = e.vartheta, "one_minus_vartheta"_a = e.one_minus_vartheta,
                        "p"_a = e.p, "q"_a = e.q, "p_plus_q"_a = e.p_plus_q, "iota"_a = e.iota,
                        "r"_a = e.r, "theta"_a = e.theta);
      },
      "params"_a, "Stationary one-population equilibrium; raises Infeasible.");

  py::class_<mfg::macro::TwoPopParams>(m, "TwoPopParams")
      .def(py::init<>())
      .def_readwrite("a", &mfg::macro::TwoPopParams::a)
      .def_readwrite("rho", &mfg::macro::TwoPopParams::rho)
      .def_readwrite("kappa", &mfg::macro::TwoPopParams::kappa)
      .def_readwrite("delta", &mfg::macro::TwoPopParams::delta)
      .def_readwrite("sigma", &mfg::macro::TwoPopParams::sigma);

  m.def("two_pop_interest_rate", &mfg::macro::two_pop_interest_rate, "eta"_a, "params"_a);
  m.def(
      "simulate_eta",
      [](const mfg::macro::TwoPopParams& p, double eta0, double horizon, int steps, int n_paths,
         std::uint64_t seed, int record_stride) {
        mfg::macro::EtaOptions opt;
        opt.record_stride = record_stride;
        const auto e =
            mfg::macro::simulate_eta(p, eta0, mfg::TimeGrid(0.0, horizon, steps), n_paths, seed, opt);
        return py::make_tuple(e.grid.times(), ensemble_array(e));
      },
      "params"_a, "eta0"_a, "horizon"_a, "steps"_a, "n_paths"_a, "seed"_a = 0,
      "record_stride"_a = 1, "Wealth-share paths. Returns (t, eta[paths, nodes]).");

  // Growth
  m.def(
      "solve_aiyagari",
      [](double alpha, double A, double delta, double gamma, double horizon, int steps,
         int n_paths, std::uint64_t seed, double tol, double damping, int max_iter) {
        mfg::growth::AiyagariParams p;
        p.alpha_cd = alpha;
        p.A_tfp = A;
        p.delta = delta;
        p.gamma_crra = gamma;
        p.horizon = horizon;
        const auto s = mfg::growth::solve_aiyagari_mfg(p, {}, {damping, tol, max_iter}, steps,
                                                       n_paths, seed);
        return py::dict("t"_a = s.flow.grid.times(), "mu_bar"_a = s.flow.mu_bar, "Y"_a = s.Y,
                        "residuals"_a = s.residuals, "mu_stderr"_a = s.mu_stderr);
      },
      "alpha"_a = 0.36, "A"_a = 1.0, "delta"_a = 0.05, "gamma"_a = 0.5, "horizon"_a = 1.0,
      "steps"_a = 100, "n_paths"_a = 2000, "seed"_a = 0, "tol"_a = 1e-6, "damping"_a = 1.0,
      "max_iter"_a = 100);

  // Finite-state contracts
  m.def(
      "epidemic_plain_nash",
      [](double kappa, int steps) {
        auto P = mfg::contract::EpidemicParams::defaults();
        P.kappa = kappa;
        const auto em = mfg::contract::build_epidemic_model(P);
        mfg::contract::SolverConfig cfg;
        cfg.steps = steps;
        const auto eq = mfg::contract::solve_nash(em.model, mfg::contract::Contract::zero(4), cfg);
        const auto v = mfg::contract::evaluate_contract(em.model, em.principal,
                                                        mfg::contract::Contract::zero(4), eq);
        py::dict d = equilibrium_dict(eq);
        d["principal_cost"] = v.principal_cost;
        return d;
      },
      "kappa"_a = 0.3, "steps"_a = 200,
      "Default epidemic game without payments (states AI, AH, BI, BH).");

  // Mining
  py::class_<mfg::mining::MiningParams>(m, "MiningParams")
      .def(py::init<>())
      .def_readwrite("r", &mfg::mining::MiningParams::r)
      .def_readwrite("delta", &mfg::mining::MiningParams::delta)
      .def_readwrite("lam", &mfg::mining::MiningParams::lambda)
      .def_readwrite("eps", &mfg::mining::MiningParams::eps)
      .def_readwrite("c", &mfg::mining::MiningParams::c);

  m.def(
      "solve_mining",
      [](const mfg::mining::MiningParams& p, double k_max, int n_cells, double tol) {
        mfg::mining::MiningGridConfig g;
        g.k_max = k_max;
        g.n_cells = n_cells;
        g.tol = tol;
        const auto s = mfg::mining::solve_stationary_master(p, g);
        std::vector<double> k(s.U.values.size());
        for (std::size_t i = 0; i < k.size(); ++i) k[i] = s.U.node(static_cast<int>(i));
        const auto ks = mfg::mining::stationary_hashrate(s.U, p);
        return py::dict("K"_a = k, "U"_a = s.U.values, "residual"_a = s.residual,
                        "stationary_K"_a = ks ? py::object(py::float_(*ks)) : py::object(py::none()));
      },
      "params"_a, "k_max"_a = 5.0, "n_cells"_a = 2000, "tol"_a = 1e-10,
      "Stationary master equation on [0, k_max].");

  // Scenario runner
  m.def("list_scenarios", [] {
    std::vector<std::string> names;
    for (const auto& s : mfg::cli::scenarios()) names.push_back(s.name);
    return names;
  });
  m.def(
      "_run_scenario_json",
      [](const std::string& config_json) {
        const auto cfg = mfg::cli::parse_config(mfg::cli::json::parse(config_json));
        const auto r = mfg::cli::run_scenario(cfg);
        return py::make_tuple(r.exit_code, r.manifest.is_null() ? std::string("null") : r.manifest.dump(),
                              r.message);
      },
      "config_json"_a);
  py::register_exception<mfg::cli::SchemaError>(m, "SchemaError", error.ptr());
  m.def("format_double", &mfg::cli::format_double, "x"_a);
}
