"""Deterministic 2D swarm simulation of triangular/square lattice formation.

Virtual-force control (saturated Lennard-Jones radial term plus an
angular-correction normal term), an optional per-agent adaptive normal
gain, a gravitational virtual-force baseline, pattern-quality metrics,
and a seeded, reproducible experiment harness.
"""

from .baseline import BaselineParams, assign_spins, baseline_input, gravitational_force, saturate
from .control import (
    ControlParams,
    adapt_normal_gain,
    angular_error,
    control_input,
    control_inputs,
    local_angular_error,
    normal_input,
    normal_interaction,
    radial_input,
    radial_interaction,
)
from .engine import (
    RemoveAgents,
    ScenarioError,
    ScenarioSpec,
    SetLattice,
    SimulationError,
    Snapshot,
    TrialRun,
    apply_event,
    run_trial,
    sample_initial_positions,
    step,
)
from .geometry import (
    DegenerateGeometryError,
    GeometryParams,
    LinkSet,
    SwarmState,
    adjacency_set,
    build_links,
    link_angle,
    neighbourhood,
    pair_angle,
    relative_position,
    square_grid,
    triangular_grid,
)
from .metrics import (
    MetricsConfig,
    MetricsTrace,
    compactness,
    convergence_times,
    regularity,
    steady_state_scan,
    success,
    tuning_cost,
)

__version__ = "0.1.0"

__all__ = [
    "BaselineParams",
    "ControlParams",
    "DegenerateGeometryError",
    "GeometryParams",
    "LinkSet",
    "MetricsConfig",
    "MetricsTrace",
    "RemoveAgents",
    "ScenarioError",
    "ScenarioSpec",
    "SetLattice",
    "SimulationError",
    "Snapshot",
    "SwarmState",
    "TrialRun",
    "adapt_normal_gain",
    "adjacency_set",
    "angular_error",
    "apply_event",
    "assign_spins",
    "baseline_input",
    "build_links",
    "compactness",
    "control_input",
    "control_inputs",
    "convergence_times",
    "gravitational_force",
    "link_angle",
    "local_angular_error",
    "neighbourhood",
    "normal_input",
    "normal_interaction",
    "pair_angle",
    "radial_input",
    "radial_interaction",
    "regularity",
    "relative_position",
    "run_trial",
    "sample_initial_positions",
    "saturate",
    "square_grid",
    "steady_state_scan",
    "step",
    "success",
    "triangular_grid",
    "tuning_cost",
    "__version__",
]
