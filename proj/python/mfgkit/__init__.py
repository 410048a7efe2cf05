"""Mean field game solvers and scenario runner."""

import json

from ._core import (
    DomainError,
    Error,
    Infeasible,
    IntegrationBlowup,
    LoopKind,
    MiningParams,
    NonConvergence,
    OnePopParams,
    SchemaError,
    TwoPopParams,
    __version__,
    epidemic_plain_nash,
    format_double,
    list_scenarios,
    one_pop_equilibrium,
    simulate_eta,
    solve_aiyagari,
    solve_mining,
    solve_riccati,
    two_pop_interest_rate,
)
from ._core import _run_scenario_json


def run_scenario(config):
    """Run a scenario config (dict) and return (exit_code, manifest, message).

    The manifest is None when nothing was written (exit codes 2 and 4).
    """
    code, manifest, message = _run_scenario_json(json.dumps(config))
    return code, json.loads(manifest), message


__all__ = [
    "DomainError",
    "Error",
    "Infeasible",
    "IntegrationBlowup",
    "LoopKind",
    "MiningParams",
    "NonConvergence",
    "OnePopParams",
    "SchemaError",
    "TwoPopParams",
    "__version__",
    "epidemic_plain_nash",
    "format_double",
    "list_scenarios",
    "one_pop_equilibrium",
    "run_scenario",
    "simulate_eta",
    "solve_aiyagari",
    "solve_mining",
    "solve_riccati",
    "two_pop_interest_rate",
]
