"""Reproducible experiment recipes: gain sweeps and robustness suites.

Every suite is a pure function of a base scenario and a master seed. The
seed of cell ``ci``, trial ``ti`` is derived as
``SeedSequence((master_seed, ci, ti))``, so results are independent of
execution order and of how many workers run the trials. Aggregation is a
deterministic reduction in (cell, trial) order; rerunning a suite with a
different ``jobs`` count yields byte-identical outputs.

Suites:

* :func:`gain_sweep` -- grid search of control gains, mean quadratic cost
  per cell, argmin cell and the region where the mean cost is <= 1;
* :func:`fault_suite` -- random removal of a fraction of the agents after
  convergence, with a post-removal recovery verdict per trial;
* :func:`noise_suite` -- steady-state metrics versus noise intensity;
* :func:`flexibility_suite` -- scheduled lattice switches with per-phase
  re-convergence times;
* :func:`scalability_suite` / :func:`sensing_radius_suite` -- swarm size
  and sensing-radius sweeps (the spawn disk grows as sqrt(N/25) so the
  initial density is size-independent);
* :func:`baseline_comparison` -- tunes the gravitational baseline on its
  own grid, then runs the same paired-seed scalability test for both
  controllers.
"""

from __future__ import annotations

import itertools
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from functools import partial
from typing import Callable, Sequence

import numpy as np

from .baseline import BaselineParams
from .engine import RemoveAgents, ScenarioSpec, SetLattice, TrialRun, run_trial
from .metrics import MetricsConfig, _settling_time, steps_in, tuning_cost


def derive_trial_seed(master_seed: int, cell_index: int, trial_index: int) -> int:
    """Order-independent 64-bit seed for one trial of one cell."""
    ss = np.random.SeedSequence((master_seed, cell_index, trial_index))
    return int(ss.generate_state(1, np.uint64)[0])


def with_params(spec: ScenarioSpec, **params) -> ScenarioSpec:
    """Return ``spec`` with sweep-axis values applied to the right fields."""
    control = spec.control
    geometry = spec.geometry
    baseline = spec.baseline
    top: dict = {}
    for key, value in params.items():
        if key in ("G_r", "G_n", "L", "alpha", "orientation_offset"):
            control = replace(control, **{key: int(value) if key == "L" else float(value)})
        elif key in ("G", "F_max"):
            if baseline is None:
                baseline = BaselineParams(R=spec.control.R)
            baseline = replace(baseline, **{key: float(value)})
        elif key == "sigma":
            top["noise_sigma"] = float(value)
        elif key == "N":
            top["N"] = int(value)
        elif key == "disk_radius":
            top["disk_radius"] = float(value)
        elif key == "R_s":
            geometry = replace(geometry, R_s=float(value))
        else:
            raise ValueError(f"unknown sweep parameter {key!r}")
    return replace(spec, control=control, geometry=geometry, baseline=baseline, **top)


@dataclass(frozen=True)
class SweepSpec:
    """A grid of parameter cells evaluated with ``trials`` seeds each."""

    base: ScenarioSpec
    axes: tuple[tuple[str, tuple[float, ...]], ...]
    trials: int = 30
    master_seed: int = 0

    def __post_init__(self):
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        if not self.axes or any(not values for _, values in self.axes):
            raise ValueError("sweep grid must be non-empty")

    def cells(self) -> list[dict[str, float]]:
        names = [name for name, _ in self.axes]
        grids = [values for _, values in self.axes]
        return [dict(zip(names, combo)) for combo in itertools.product(*grids)]


@dataclass
class TrialSummary:
    """Steady-state statistics of one trial (no full trace retained)."""

    cell_index: int
    trial_index: int
    seed: int
    params: dict[str, float]
    e_theta_ss: float
    e_L_ss: float
    t_ss: float | None
    T_theta: float | None
    T_L: float | None
    success: bool
    cost: float
    g_n_ss: float
    config: dict = field(default_factory=dict)
    extra: dict[str, float] = field(default_factory=dict)


def summarize_trial(
    run: TrialRun, cell_index: int, trial_index: int, params: dict[str, float]
) -> TrialSummary:
    from .config import spec_to_config  # deferred: config imports engine types

    spec = run.spec
    trace = run.trace
    config = spec.metrics_config()
    cost = tuning_cost(trace.e_theta_ss, trace.e_L_ss, config)
    if trace.t_ss is not None:
        idx = steps_in(trace.t_ss, spec.dt)
        g_n_ss = float(trace.g_n_mean[idx])
    else:
        g_n_ss = float(trace.g_n_mean[-1]) if len(trace) else math.nan
    return TrialSummary(
        cell_index=cell_index,
        trial_index=trial_index,
        seed=spec.seed,
        params=dict(params),
        e_theta_ss=trace.e_theta_ss,
        e_L_ss=trace.e_L_ss,
        t_ss=trace.t_ss,
        T_theta=trace.T_theta,
        T_L=trace.T_L,
        success=trace.success,
        cost=cost,
        g_n_ss=g_n_ss,
        config=spec_to_config(spec),
    )


def _run_one(task) -> TrialSummary:
    spec, cell_index, trial_index, params, extra_fn = task
    run = run_trial(spec)
    summary = summarize_trial(run, cell_index, trial_index, params)
    if extra_fn is not None:
        summary.extra = extra_fn(run)
    return summary


def _mean(values: Sequence[float]) -> float:
    vals = [v for v in values if v is not None and not math.isnan(v)]
    return float(np.mean(vals)) if vals else math.nan


@dataclass
class CellResult:
    """Aggregates over exactly ``trials`` runs of one parameter cell."""

    index: int
    params: dict[str, float]
    trials: list[TrialSummary]
    mean_e_theta_ss: float = math.nan
    min_e_theta_ss: float = math.nan
    max_e_theta_ss: float = math.nan
    mean_e_L_ss: float = math.nan
    min_e_L_ss: float = math.nan
    max_e_L_ss: float = math.nan
    success_rate: float = math.nan
    mean_cost: float = math.nan
    mean_T_theta: float = math.nan
    mean_T_L: float = math.nan
    mean_g_n_ss: float = math.nan

    def __post_init__(self):
        if not self.trials:
            return
        e_t = [s.e_theta_ss for s in self.trials]
        e_l = [s.e_L_ss for s in self.trials]
        self.mean_e_theta_ss = float(np.mean(e_t))
        self.min_e_theta_ss = float(np.min(e_t))
        self.max_e_theta_ss = float(np.max(e_t))
        self.mean_e_L_ss = float(np.mean(e_l))
        self.min_e_L_ss = float(np.min(e_l))
        self.max_e_L_ss = float(np.max(e_l))
        self.success_rate = float(np.mean([s.success for s in self.trials]))
        self.mean_cost = float(np.mean([s.cost for s in self.trials]))
        self.mean_T_theta = _mean([s.T_theta for s in self.trials])
        self.mean_T_L = _mean([s.T_L for s in self.trials])
        self.mean_g_n_ss = _mean([s.g_n_ss for s in self.trials])


@dataclass
class SuiteResult:
    kind: str
    master_seed: int
    trials_per_cell: int
    cells: list[CellResult]

    def argmin_cell(self) -> CellResult:
        """Cell with the smallest mean cost (first on ties)."""
        return min(self.cells, key=lambda c: (c.mean_cost, c.index))

    def region_cells(self, cost_threshold: float = 1.0) -> list[CellResult]:
        return [c for c in self.cells if c.mean_cost <= cost_threshold]

    def all_trials(self) -> list[TrialSummary]:
        return [s for c in self.cells for s in c.trials]


def run_cells(
    kind: str,
    base: ScenarioSpec,
    cell_params: Sequence[dict[str, float]],
    trials: int,
    master_seed: int,
    jobs: int = 1,
    spec_builder: Callable[[ScenarioSpec, dict], ScenarioSpec] | None = None,
    extra_fn: Callable[[TrialRun], dict] | None = None,
) -> SuiteResult:
    """Run ``trials`` seeds for every cell and aggregate in fixed order."""
    build = spec_builder or (lambda spec, params: with_params(spec, **params))
    tasks = []
    for ci, params in enumerate(cell_params):
        cell_spec = build(base, params)
        for ti in range(trials):
            spec = replace(cell_spec, seed=derive_trial_seed(master_seed, ci, ti))
            tasks.append((spec, ci, ti, params, extra_fn))
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            summaries = list(pool.map(_run_one, tasks, chunksize=1))
    else:
        summaries = [_run_one(t) for t in tasks]
    cells = []
    for ci, params in enumerate(cell_params):
        cell_trials = [s for s in summaries if s.cell_index == ci]
        cells.append(CellResult(index=ci, params=dict(params), trials=cell_trials))
    return SuiteResult(kind=kind, master_seed=master_seed, trials_per_cell=trials, cells=cells)


def gain_sweep(sweep: SweepSpec, jobs: int = 1) -> SuiteResult:
    """Mean tuning cost over a gain grid (main law or baseline axes)."""
    return run_cells(
        "tune",
        sweep.base,
        sweep.cells(),
        sweep.trials,
        sweep.master_seed,
        jobs=jobs,
    )


def _fault_extras(run: TrialRun, t_remove: float) -> dict[str, float]:
    """Post-removal recovery: both metrics settle below threshold again."""
    trace = run.trace
    config = run.spec.metrics_config()
    post = trace.t >= t_remove
    t_post = trace.t[post]
    rec_theta = _settling_time(t_post, trace.e_theta[post], config.e_theta_star)
    rec_L = _settling_time(t_post, trace.e_L[post], config.e_L_star)
    recovered = rec_theta is not None and rec_L is not None
    recovery_time = max(rec_theta, rec_L) - t_remove if recovered else math.nan
    return {"recovered": float(recovered), "recovery_time": recovery_time}


def fault_suite(
    base: ScenarioSpec,
    fraction: float,
    t_remove: float,
    trials: int = 30,
    master_seed: int = 0,
    jobs: int = 1,
) -> SuiteResult:
    """Remove a random fraction of the agents mid-run and assess recovery."""
    withdrawn = replace(
        base, events=tuple(base.events) + (RemoveAgents(time=t_remove, fraction=fraction),)
    )
    result = run_cells(
        "faults",
        withdrawn,
        [{"fraction": fraction, "t_remove": t_remove}],
        trials,
        master_seed,
        jobs=jobs,
        spec_builder=lambda spec, params: spec,
        extra_fn=partial(_fault_extras, t_remove=t_remove),
    )
    return result


def noise_suite(
    base: ScenarioSpec,
    sigma_values: Sequence[float],
    trials: int = 30,
    master_seed: int = 0,
    jobs: int = 1,
) -> SuiteResult:
    """Steady-state metrics as a function of the noise intensity."""
    return run_cells(
        "noise",
        base,
        [{"sigma": s} for s in sigma_values],
        trials,
        master_seed,
        jobs=jobs,
    )


def _flexibility_extras(run: TrialRun, boundaries: tuple[float, ...]) -> dict[str, float]:
    """Per-phase re-convergence times and end-of-phase values."""
    trace = run.trace
    config = run.spec.metrics_config()
    edges = [0.0, *boundaries, math.inf]
    out: dict[str, float] = {}
    for p in range(len(edges) - 1):
        lo, hi = edges[p], edges[p + 1]
        sel = (trace.t >= lo) & (trace.t < hi)
        if not sel.any():
            out[f"phase{p}_reconv"] = math.nan
            continue
        t_p = trace.t[sel]
        rc_theta = _settling_time(t_p, trace.e_theta[sel], config.e_theta_star)
        rc_L = _settling_time(t_p, trace.e_L[sel], config.e_L_star)
        if rc_theta is None or rc_L is None:
            out[f"phase{p}_reconv"] = math.nan
        else:
            out[f"phase{p}_reconv"] = max(rc_theta, rc_L) - lo
        out[f"phase{p}_e_theta_end"] = float(trace.e_theta[sel][-1])
        out[f"phase{p}_e_L_end"] = float(trace.e_L[sel][-1])
        out[f"phase{p}_g_n_end"] = float(trace.g_n_mean[sel][-1])
    return out


def flexibility_suite(
    base: ScenarioSpec,
    schedule: Sequence[SetLattice],
    trials: int = 30,
    master_seed: int = 0,
    jobs: int = 1,
) -> SuiteResult:
    """Scheduled lattice switches; reports per-phase re-convergence."""
    spec = replace(base, events=tuple(base.events) + tuple(schedule))
    boundaries = tuple(e.time for e in schedule)
    return run_cells(
        "flexibility",
        spec,
        [{"switches": float(len(schedule))}],
        trials,
        master_seed,
        jobs=jobs,
        spec_builder=lambda s, params: s,
        extra_fn=partial(_flexibility_extras, boundaries=boundaries),
    )


def _scaled_spec(base: ScenarioSpec, params: dict, R_s: float, agents_per_area: float) -> ScenarioSpec:
    n = int(params["N"])
    return with_params(
        base, N=n, disk_radius=math.sqrt(n / agents_per_area), R_s=R_s
    )


def scalability_suite(
    base: ScenarioSpec,
    N_values: Sequence[int],
    R_s: float = 3.0,
    trials: int = 30,
    master_seed: int = 0,
    jobs: int = 1,
    agents_per_area: float = 25.0,
) -> SuiteResult:
    """Swarm-size sweep at fixed sensing radius and fixed initial density."""
    return run_cells(
        "scalability",
        base,
        [{"N": float(n)} for n in N_values],
        trials,
        master_seed,
        jobs=jobs,
        spec_builder=partial(_scaled_spec, R_s=R_s, agents_per_area=agents_per_area),
    )


def sensing_radius_suite(
    base: ScenarioSpec,
    R_s_values: Sequence[float],
    trials: int = 30,
    master_seed: int = 0,
    jobs: int = 1,
) -> SuiteResult:
    """Sensing-radius sweep at fixed swarm size."""
    return run_cells(
        "sensing",
        base,
        [{"R_s": float(r)} for r in R_s_values],
        trials,
        master_seed,
        jobs=jobs,
    )


@dataclass
class ComparisonResult:
    """Baseline tuning plus the paired scalability test of both controllers."""

    baseline_sweep: SuiteResult
    baseline_optimum: dict[str, float]
    main_scalability: SuiteResult
    baseline_scalability: SuiteResult

    def table_rows(self) -> list[dict[str, float]]:
        rows = []
        for main_cell, base_cell in zip(
            self.main_scalability.cells, self.baseline_scalability.cells
        ):
            rows.append(
                {
                    "N": main_cell.params["N"],
                    "e_theta_ss_main": main_cell.mean_e_theta_ss,
                    "e_theta_ss_baseline": base_cell.mean_e_theta_ss,
                    "e_L_ss_main": main_cell.mean_e_L_ss,
                    "e_L_ss_baseline": base_cell.mean_e_L_ss,
                    "success_main": main_cell.success_rate,
                    "success_baseline": base_cell.success_rate,
                }
            )
        return rows


def as_baseline_spec(base: ScenarioSpec) -> ScenarioSpec:
    """The baseline-controller twin of a main-law scenario."""
    baseline = base.baseline or BaselineParams(R=base.control.R)
    return replace(
        base,
        controller="baseline",
        baseline=baseline,
        control=replace(base.control, adaptive=False),
    )


def baseline_comparison(
    base: ScenarioSpec,
    grid_G: Sequence[float],
    grid_F_max: Sequence[float],
    N_values: Sequence[int] = (50, 100, 200),
    R_s: float = 3.0,
    sweep_trials: int = 30,
    trials: int = 30,
    master_seed: int = 0,
    jobs: int = 1,
) -> ComparisonResult:
    """Tune the baseline, then run the paired-seed scalability comparison.

    Both controllers see identical per-trial seeds, hence identical
    initial conditions (position sampling draws from its own stream).
    """
    baseline_base = as_baseline_spec(base)
    sweep = SweepSpec(
        base=baseline_base,
        axes=(("G", tuple(grid_G)), ("F_max", tuple(grid_F_max))),
        trials=sweep_trials,
        master_seed=master_seed,
    )
    sweep_result = gain_sweep(sweep, jobs=jobs)
    best = sweep_result.argmin_cell().params
    tuned_baseline = with_params(baseline_base, **best)
    main_scal = scalability_suite(
        base, N_values, R_s=R_s, trials=trials, master_seed=master_seed, jobs=jobs
    )
    base_scal = scalability_suite(
        tuned_baseline, N_values, R_s=R_s, trials=trials, master_seed=master_seed, jobs=jobs
    )
    return ComparisonResult(
        baseline_sweep=sweep_result,
        baseline_optimum=dict(best),
        main_scalability=main_scal,
        baseline_scalability=base_scal,
    )
