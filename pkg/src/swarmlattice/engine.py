"""Deterministic forward-Euler swarm integrator with a timed event system.

One trial = one scenario + one 64-bit seed. The master seed is split into
four named, independent streams (initial positions, process noise, event
randomness, baseline spins), so e.g. switching the controller never
perturbs the initial conditions of a paired comparison. The generator is
numpy's PCG64 seeded through ``SeedSequence``; this choice is fixed for
reproducibility.

Dynamics: synchronous first-order Euler. Per step every live agent gets a
velocity command from the configured controller (computed from the
pre-step snapshot), the command is clamped to ``V_max``, and

    x <- x + u * dt + sigma * sqrt(dt) * xi,   xi ~ N(0, I_2)

The ``sqrt(dt)`` diffusion scaling makes ``sigma`` a continuous-time
noise intensity independent of the step size.

Events fire when the integration clock reaches their timestamp (within
dt/2): random removal of a fraction of the agents, or switching the
target lattice (optionally resetting all adaptive gains). Metrics are
recorded every step, immediately after any event at that step.

A trial integrates until steady state is established (both metric traces
flat over one trailing window) or ``t_max`` is reached; while events are
still pending the trial keeps running so post-convergence events can be
observed. Reruns with the same spec and seed are bit-identical.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field, replace

import numpy as np

from .baseline import BaselineParams, assign_spins, baseline_inputs
from .control import (
    ControlParams,
    adapt_normal_gains,
    clamp_speed,
    control_inputs,
    local_angular_errors,
)
from .geometry import GeometryParams, SwarmState, links_from_pairs, pair_geometry
from .metrics import (
    MetricsConfig,
    MetricsTrace,
    compactness_from_degrees,
    finalize_trace,
    regularity,
    steps_in,
    window_stable,
)

CONTROLLERS = ("main-static", "main-adaptive", "baseline")


class ScenarioError(ValueError):
    """Raised for scenario-level inconsistencies (e.g. removing every agent)."""


class SimulationError(RuntimeError):
    """Raised when integration produces a non-finite state."""


@dataclass(frozen=True)
class RemoveAgents:
    """Delete a random fraction of the swarm (or explicitly listed ids)."""

    time: float
    fraction: float | None = None
    ids: tuple[int, ...] | None = None

    def __post_init__(self):
        if (self.fraction is None) == (self.ids is None):
            raise ValueError("give exactly one of fraction or ids")
        if self.fraction is not None and not 0 < self.fraction <= 1:
            raise ValueError("fraction must lie in (0, 1]")


@dataclass(frozen=True)
class SetLattice:
    """Switch the target lattice, optionally restarting the adaptive gains."""

    time: float
    new_L: int = 4
    reset_adaptive_gains: bool = False

    def __post_init__(self):
        if self.new_L not in (4, 6):
            raise ValueError("new_L must be 4 or 6")


Event = RemoveAgents | SetLattice


@dataclass(frozen=True)
class ScenarioSpec:
    """Everything a trial needs: sampler, dynamics, controller, schedule."""

    N: int = 100
    disk_radius: float = 2.0
    seed: int = 0
    dt: float = 0.01
    t_max: float = 200.0
    noise_sigma: float = 0.0
    controller: str = "main-static"
    control: ControlParams = field(default_factory=ControlParams)
    baseline: BaselineParams | None = None
    geometry: GeometryParams = field(default_factory=GeometryParams)
    e_theta_star: float = 0.2
    e_L_star: float = 0.3
    T_w: float = 10.0
    events: tuple[Event, ...] = ()
    snapshot_times: tuple[float, ...] = (0.0, 1.0, 2.5)
    snapshot_at_steady_state: bool = True
    stop_at_steady_state: bool = True

    def __post_init__(self):
        if self.N < 1:
            raise ValueError("N must be >= 1")
        if self.disk_radius <= 0:
            raise ValueError("disk_radius must be > 0")
        if self.seed < 0 or self.seed >= 2**64:
            raise ValueError("seed must be a 64-bit non-negative integer")
        if self.dt <= 0:
            raise ValueError("dt must be > 0")
        if self.t_max < 0:
            raise ValueError("t_max must be >= 0")
        if self.noise_sigma < 0:
            raise ValueError("noise_sigma must be >= 0")
        if self.controller not in CONTROLLERS:
            raise ValueError(f"controller must be one of {CONTROLLERS}")
        if self.controller == "baseline" and self.baseline is None:
            raise ValueError("baseline controller needs baseline parameters")
        if self.control.adaptive != (self.controller == "main-adaptive"):
            raise ValueError("control.adaptive must match the controller choice")
        times = [e.time for e in self.events]
        if times != sorted(times):
            raise ValueError("events must be sorted by time")
        if times and (times[0] < 0 or times[-1] > self.t_max):
            raise ValueError("event times must lie in [0, t_max]")

    def metrics_config(self) -> MetricsConfig:
        # t_max here only documents the horizon; clamping keeps degenerate
        # short scenarios (t_max < T_w, which simply never settle) runnable
        return MetricsConfig(
            e_theta_star=self.e_theta_star,
            e_L_star=self.e_L_star,
            T_w=self.T_w,
            dt=self.dt,
            t_max=max(self.t_max, self.T_w),
        )


@dataclass
class Snapshot:
    """Positions (and per-agent gains) captured at one instant of a trial."""

    time: float
    positions: np.ndarray
    normal_gains: np.ndarray


@dataclass
class TrialRun:
    """Everything a single trial produced."""

    spec: ScenarioSpec
    trace: MetricsTrace
    final_state: SwarmState
    snapshots: list[Snapshot]


def trial_rngs(seed: int) -> dict[str, np.random.Generator]:
    """Independent named streams derived from one master seed."""
    streams = np.random.SeedSequence(seed).spawn(4)
    names = ("init", "noise", "events", "spins")
    return {name: np.random.default_rng(s) for name, s in zip(names, streams)}


def sample_initial_positions(n: int, radius: float, rng: np.random.Generator) -> np.ndarray:
    """Uniform-by-area positions in a disk of the given radius.

    Polar sampling with the radius drawn as ``radius * sqrt(U)`` (the
    inverse CDF of the linear radial density), angle uniform.
    """
    if radius <= 0:
        raise ValueError("radius must be > 0")
    phi = rng.uniform(0.0, 2.0 * math.pi, size=n)
    d = radius * np.sqrt(rng.random(n))
    return np.column_stack([d * np.cos(phi), d * np.sin(phi)])


def _velocity_commands(state: SwarmState, spec: ScenarioSpec, pg, links) -> np.ndarray:
    if spec.controller == "baseline":
        u = baseline_inputs(state, spec.baseline, spec.control.L, pg)
    else:
        u = control_inputs(state, spec.control, spec.geometry, pg, links)
    return clamp_speed(u, spec.control.V_max)


def step(state: SwarmState, spec: ScenarioSpec, rng: np.random.Generator) -> SwarmState:
    """One synchronous Euler step; all commands read the pre-step snapshot.

    When ``noise_sigma`` is zero the generator is never drawn from, so
    noise-free paths are RNG-independent.
    """
    pg = pair_geometry(state.positions, spec.geometry)
    links = links_from_pairs(pg)
    u = _velocity_commands(state, spec, pg, links)
    new_pos = state.positions + u * spec.dt
    if spec.noise_sigma > 0:
        new_pos = new_pos + spec.noise_sigma * math.sqrt(spec.dt) * rng.standard_normal(
            state.positions.shape
        )
    bad = ~np.isfinite(new_pos)
    if bad.any():
        agent = int(np.nonzero(bad.any(axis=1))[0][0])
        raise SimulationError(f"non-finite position for agent {agent} at t={state.time:g}")
    gains = state.normal_gains
    if spec.controller == "main-adaptive":
        errors = local_angular_errors(state, spec.control, links)
        gains = adapt_normal_gains(gains, errors, spec.control, spec.dt)
    return SwarmState(positions=new_pos, normal_gains=gains, time=state.time + spec.dt)


def apply_event(
    state: SwarmState, spec: ScenarioSpec, event: Event, rng: np.random.Generator
) -> tuple[SwarmState, ScenarioSpec]:
    """Apply one event, returning the updated state and live spec."""
    if isinstance(event, RemoveAgents):
        n = state.n_agents
        if event.ids is not None:
            removed = np.unique(np.asarray(event.ids, dtype=int))
            if removed.size and (removed.min() < 0 or removed.max() >= n):
                raise ScenarioError("removal ids out of range")
        else:
            k = max(1, round(event.fraction * n))
            if k >= n:
                raise ScenarioError("cannot remove every agent")
            removed = rng.choice(n, size=k, replace=False)
        keep = np.setdiff1d(np.arange(n), removed)
        if keep.size == 0:
            raise ScenarioError("cannot remove every agent")
        new_state = SwarmState(
            positions=state.positions[keep],
            normal_gains=state.normal_gains[keep],
            time=state.time,
        )
        new_spec = spec
        if spec.baseline is not None and spec.baseline.spins is not None:
            spins = tuple(spec.baseline.spins[int(i)] for i in keep)
            new_spec = replace(spec, baseline=replace(spec.baseline, spins=spins))
        return new_state, new_spec
    if isinstance(event, SetLattice):
        new_spec = replace(spec, control=replace(spec.control, L=event.new_L))
        gains = state.normal_gains
        if event.reset_adaptive_gains:
            gains = np.zeros_like(gains)
        new_state = SwarmState(positions=state.positions, normal_gains=gains, time=state.time)
        return new_state, new_spec
    raise TypeError(f"unknown event {event!r}")


def _applied_gains(state: SwarmState, spec: ScenarioSpec) -> np.ndarray:
    """The normal gains actually in force, for the trace columns."""
    if spec.controller == "main-adaptive":
        return state.normal_gains
    if spec.controller == "main-static":
        return np.full(state.n_agents, spec.control.G_n)
    return np.zeros(state.n_agents)


def run_trial(spec: ScenarioSpec) -> TrialRun:
    """Integrate one scenario to steady state or ``t_max``.

    Fully reproducible from ``(spec, spec.seed)``: reruns produce
    bit-identical traces and snapshots.
    """
    rngs = trial_rngs(spec.seed)
    live = spec
    if spec.controller == "baseline" and spec.baseline.spins is None:
        spins = assign_spins(spec.N, rngs["spins"])
        live = replace(spec, baseline=replace(spec.baseline, spins=spins))
    state = SwarmState(
        positions=sample_initial_positions(spec.N, spec.disk_radius, rngs["init"]),
        time=0.0,
    )

    n_steps = steps_in(spec.t_max, spec.dt)
    if n_steps == 0:
        return TrialRun(spec=spec, trace=MetricsTrace(), final_state=state, snapshots=[])

    config = spec.metrics_config()
    w = config.window_steps
    tol_theta = 0.1 * config.e_theta_star
    tol_L = 0.1 * config.e_L_star

    cap = n_steps + 1
    t_arr = np.empty(cap)
    e_theta_arr = np.empty(cap)
    e_L_arr = np.empty(cap)
    gn_mean = np.empty(cap)
    gn_min = np.empty(cap)
    gn_max = np.empty(cap)
    n_links = np.empty(cap, dtype=int)
    n_agents = np.empty(cap, dtype=int)

    pending = deque(spec.events)
    snap_times = deque(sorted(spec.snapshot_times))
    snapshots: list[Snapshot] = []
    first_steady: int | None = None

    def take_snapshot(t: float) -> None:
        snapshots.append(
            Snapshot(time=t, positions=state.positions.copy(), normal_gains=state.normal_gains.copy())
        )

    k = 0
    while True:
        t = k * spec.dt
        while pending and pending[0].time <= t + spec.dt / 2:
            state, live = apply_event(state, live, pending.popleft(), rngs["events"])

        pg = pair_geometry(state.positions, live.geometry)
        links = links_from_pairs(pg)
        gains = _applied_gains(state, live)

        t_arr[k] = t
        e_theta_arr[k] = regularity(links, live.control.L, live.control.orientation_offset)
        e_L_arr[k] = compactness_from_degrees(pg.degrees, live.control.L)
        gn_mean[k] = gains.mean()
        gn_min[k] = gains.min()
        gn_max[k] = gains.max()
        n_links[k] = len(links)
        n_agents[k] = state.n_agents

        while snap_times and snap_times[0] <= t + spec.dt / 2:
            take_snapshot(t)
            snap_times.popleft()

        steady_now = (
            k >= w
            and window_stable(e_theta_arr, k, w, tol_theta)
            and window_stable(e_L_arr, k, w, tol_L)
        )
        if steady_now and first_steady is None:
            first_steady = k
            if spec.snapshot_at_steady_state:
                take_snapshot(t)

        if k == n_steps:
            break
        if steady_now and spec.stop_at_steady_state and not pending:
            break

        u = _velocity_commands(state, live, pg, links)
        new_pos = state.positions + u * spec.dt
        if spec.noise_sigma > 0:
            new_pos = new_pos + spec.noise_sigma * math.sqrt(spec.dt) * rngs[
                "noise"
            ].standard_normal(state.positions.shape)
        bad = ~np.isfinite(new_pos)
        if bad.any():
            agent = int(np.nonzero(bad.any(axis=1))[0][0])
            raise SimulationError(f"non-finite position for agent {agent} at t={t:g}")
        new_gains = state.normal_gains
        if live.controller == "main-adaptive":
            errors = local_angular_errors(state, live.control, links)
            new_gains = adapt_normal_gains(new_gains, errors, live.control, spec.dt)
        k += 1
        state = SwarmState(positions=new_pos, normal_gains=new_gains, time=k * spec.dt)

    n = k + 1
    trace = MetricsTrace(
        t=t_arr[:n].copy(),
        e_theta=e_theta_arr[:n].copy(),
        e_L=e_L_arr[:n].copy(),
        g_n_mean=gn_mean[:n].copy(),
        g_n_min=gn_min[:n].copy(),
        g_n_max=gn_max[:n].copy(),
        num_links=n_links[:n].copy(),
        num_agents=n_agents[:n].copy(),
    )
    finalize_trace(trace, config, first_steady_index=first_steady)
    return TrialRun(spec=spec, trace=trace, final_state=state, snapshots=snapshots)
