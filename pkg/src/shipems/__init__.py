"""Shipboard DC microgrid energy management.

Predictive storage control, proportional generator dispatch, a
discrete plant model, a scripted mission harness, and a live telemetry
service.
"""

from .mission import (
    MissionEngine,
    MissionMetrics,
    compute_metrics,
    read_trace,
    run_mission,
    write_trace,
)
from .qp import (
    DualProblem,
    InfeasibleProblemError,
    QpSolution,
    QuadraticProgram,
    SingularMatrixError,
    hildreth_iterate,
    qp_solve,
    solve_unconstrained,
)
from .scenario import (
    Scenario,
    ScenarioError,
    default_scenario,
    load_scenario,
    parse_scenario,
)

__version__ = "0.1.0"

__all__ = [
    "DualProblem",
    "InfeasibleProblemError",
    "MissionEngine",
    "MissionMetrics",
    "QpSolution",
    "QuadraticProgram",
    "Scenario",
    "ScenarioError",
    "SingularMatrixError",
    "compute_metrics",
    "default_scenario",
    "hildreth_iterate",
    "load_scenario",
    "parse_scenario",
    "qp_solve",
    "read_trace",
    "run_mission",
    "solve_unconstrained",
    "write_trace",
    "__version__",
]
