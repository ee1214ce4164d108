"""Command-line entry points.

Three subcommands:

* ``simulate`` -- run one trial from a TOML scenario; writes ``trace.csv``,
  ``snapshots.csv`` and ``manifest.json``. Exit code 0 when the trial was
  successful, 2 when it ran but did not succeed, 1 on errors.
* ``suite`` -- run an experiment suite (``tune``, ``faults``, ``noise``,
  ``flexibility``, ``scalability``, ``compare-baseline``); writes per-trial
  and per-cell CSVs, plot-ready figure data, and a manifest.
* ``metrics`` -- compute the regularity/compactness metrics offline for a
  snapshot CSV (one line per snapshot time).

``--set KEY=VALUE`` overrides win over config-file values. The default
worker count comes from ``SWARMLATTICE_JOBS`` (1 if unset).
"""

from __future__ import annotations

import argparse
import math
import os
import sys
from dataclasses import replace
from datetime import datetime, timezone
from pathlib import Path

from . import experiments, output
from .config import ConfigError, apply_overrides, build_spec, load_config, spec_to_config
from .engine import ScenarioError, SetLattice, SimulationError, run_trial
from .geometry import GeometryParams, LinkSet, SwarmState, build_links
from .metrics import compactness, regularity

SUITE_KINDS = ("tune", "faults", "noise", "flexibility", "scalability", "compare-baseline")

AXIS_ALIASES = {"Gr": "G_r", "Gn": "G_n", "Fmax": "F_max", "Rs": "R_s"}


def _now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


def _default_jobs() -> int:
    try:
        return max(1, int(os.environ.get("SWARMLATTICE_JOBS", "1")))
    except ValueError:
        return 1


def parse_grid_axis(text: str) -> tuple[str, tuple[float, ...]]:
    """Parse ``NAME=start:step:stop`` (inclusive) or ``NAME=v1,v2,...``."""
    if "=" not in text:
        raise ConfigError(f"grid axis {text!r} is not of the form NAME=START:STEP:STOP")
    name, raw = text.split("=", 1)
    name = AXIS_ALIASES.get(name.strip(), name.strip())
    raw = raw.strip()
    try:
        if ":" in raw:
            start_s, step_s, stop_s = raw.split(":")
            start, step, stop = float(start_s), float(step_s), float(stop_s)
            if step <= 0 or stop < start:
                raise ValueError("need step > 0 and stop >= start")
            count = int(math.floor((stop - start) / step + 1e-9)) + 1
            values = tuple(start + k * step for k in range(count))
        elif "," in raw:
            values = tuple(float(v) for v in raw.split(","))
        else:
            values = (float(raw),)
    except ValueError as exc:
        raise ConfigError(f"cannot parse grid axis {text!r}: {exc}") from exc
    return name, values


def _load_spec(args) -> tuple[dict, "object"]:
    cfg = load_config(args.config)
    cfg = apply_overrides(cfg, args.set)
    if getattr(args, "seed", None) is not None:
        cfg["seed"] = args.seed
    spec = build_spec(cfg)
    return spec_to_config(spec), spec


def cmd_simulate(args) -> int:
    started = _now()
    resolved, spec = _load_spec(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    run = run_trial(spec)
    trace_path = out / "trace.csv"
    snaps_path = out / "snapshots.csv"
    output.write_trace_csv(trace_path, run.trace)
    output.write_snapshots_csv(snaps_path, run.snapshots, trial_id=spec.seed)
    output.write_manifest(
        out / "manifest.json",
        config=resolved,
        master_seed=spec.seed,
        started=started,
        finished=_now(),
        outputs=[trace_path, snaps_path],
        extra={
            "result": {
                "success": run.trace.success,
                "t_ss": run.trace.t_ss,
                "e_theta_ss": run.trace.e_theta_ss,
                "e_L_ss": run.trace.e_L_ss,
                "T_theta": run.trace.T_theta,
                "T_L": run.trace.T_L,
            }
        },
    )
    status = "success" if run.trace.success else "no-success"
    print(
        f"trial seed={spec.seed}: {status}"
        f" t_ss={run.trace.t_ss} e_theta_ss={run.trace.e_theta_ss:.4f}"
        f" e_L_ss={run.trace.e_L_ss:.4f}"
    )
    return 0 if run.trace.success else 2


def _figure_id(kind: str, controller: str, L: int) -> str | None:
    if kind == "tune":
        if controller == "baseline":
            return "fig10"
        return "fig4a" if L == 6 else "fig4b"
    if kind == "noise":
        return "fig7"
    if kind == "sensing":
        return "fig9a"
    if kind == "scalability":
        return {"main-static": "fig9b", "main-adaptive": "fig15", "baseline": "fig11"}[controller]
    return None


def _grid_axes(args, defaults: dict[str, tuple[float, ...]]) -> dict[str, tuple[float, ...]]:
    axes = dict(defaults)
    for text in args.grid or ():
        name, values = parse_grid_axis(text)
        axes[name] = values
    return axes


def cmd_suite(args) -> int:
    started = _now()
    resolved, spec = _load_spec(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    jobs = args.jobs
    trials = args.trials
    master_seed = spec.seed
    kind = args.kind
    figure = []
    comparison_rows = None

    if kind == "tune":
        axes = _grid_axes(args, {"G_r": tuple(range(0, 31)), "G_n": tuple(range(0, 31))})
        names = sorted(axes)  # fixed axis order: F_max/G or G_n/G_r alphabetical
        sweep = experiments.SweepSpec(
            base=spec,
            axes=tuple((n, tuple(axes[n])) for n in names),
            trials=trials,
            master_seed=master_seed,
        )
        result = experiments.gain_sweep(sweep, jobs=jobs)
        best = result.argmin_cell()
        print(f"argmin cell: {best.params} mean_cost={best.mean_cost:.4f}")
        fid = _figure_id(kind, spec.controller, spec.control.L)
        figure = output.figure_rows(result, fid, names[-1], series_label=names[0])
    elif kind == "faults":
        result = experiments.fault_suite(
            spec, args.fraction, args.remove_at, trials=trials, master_seed=master_seed, jobs=jobs
        )
        rate = sum(s.extra.get("recovered", 0.0) for s in result.all_trials()) / max(
            1, len(result.all_trials())
        )
        print(f"recovery rate: {rate:.2f}")
    elif kind == "noise":
        axes = _grid_axes(args, {"sigma": tuple(k * 0.05 for k in range(21))})
        result = experiments.noise_suite(
            spec, axes["sigma"], trials=trials, master_seed=master_seed, jobs=jobs
        )
        figure = output.figure_rows(result, _figure_id(kind, spec.controller, spec.control.L), "sigma")
    elif kind == "flexibility":
        schedule = []
        for item in args.switch or ("30:6", "60:4"):
            time_s, L_s = item.split(":")
            schedule.append(
                SetLattice(
                    time=float(time_s), new_L=int(L_s), reset_adaptive_gains=args.reset_gains
                )
            )
        result = experiments.flexibility_suite(
            spec, tuple(schedule), trials=trials, master_seed=master_seed, jobs=jobs
        )
    elif kind == "scalability":
        axes = _grid_axes(args, {"N": (50.0, 100.0, 200.0, 400.0)})
        if "R_s" in axes and "N" not in (args.grid or ()):  # sensing-radius variant
            pass
        if args.vary == "R_s" or ("R_s" in axes and len(axes.get("R_s", ())) > 1):
            result = experiments.sensing_radius_suite(
                spec, axes["R_s"], trials=trials, master_seed=master_seed, jobs=jobs
            )
            figure = output.figure_rows(result, _figure_id("sensing", spec.controller, 4), "R_s")
        else:
            result = experiments.scalability_suite(
                spec,
                [int(n) for n in axes["N"]],
                R_s=args.sensing_radius,
                trials=trials,
                master_seed=master_seed,
                jobs=jobs,
            )
            figure = output.figure_rows(
                result, _figure_id(kind, spec.controller, spec.control.L), "N"
            )
    elif kind == "compare-baseline":
        axes = _grid_axes(
            args,
            {
                "G": tuple(float(g) for g in range(0, 41)),
                "F_max": tuple(k * 0.5 for k in range(21)),
                "N": (50.0, 100.0, 200.0),
            },
        )
        comparison = experiments.baseline_comparison(
            spec,
            grid_G=axes["G"],
            grid_F_max=axes["F_max"],
            N_values=[int(n) for n in axes["N"]],
            R_s=args.sensing_radius,
            sweep_trials=args.sweep_trials or trials,
            trials=trials,
            master_seed=master_seed,
            jobs=jobs,
        )
        print(f"baseline optimum: {comparison.baseline_optimum}")
        result = comparison.baseline_scalability
        comparison_rows = comparison.table_rows()
        figure = (
            output.figure_rows(comparison.baseline_sweep, "fig10", "G", series_label="F_max")
            + output.figure_rows(comparison.main_scalability, "fig9b", "N")
            + output.figure_rows(comparison.baseline_scalability, "fig11", "N")
        )
    else:  # unreachable: argparse restricts choices
        raise ConfigError(f"unknown suite kind {kind!r}")

    trials_path = out / "trials.csv"
    cells_path = out / "cells.csv"
    outputs = [trials_path, cells_path]
    output.write_trials_csv(trials_path, result)
    output.write_cells_csv(cells_path, result)
    if figure:
        figure_path = out / "figure.csv"
        output.write_figure_csv(figure_path, figure)
        outputs.append(figure_path)
    if comparison_rows is not None:
        comp_path = out / "comparison.csv"
        output.write_comparison_csv(comp_path, comparison_rows)
        outputs.append(comp_path)
    output.write_manifest(
        out / "manifest.json",
        config=resolved,
        master_seed=master_seed,
        started=started,
        finished=_now(),
        outputs=outputs,
        extra={"suite": {"kind": kind, "trials": trials, "jobs": jobs}},
    )
    return 0


def cmd_metrics(args) -> int:
    groups = output.read_snapshots_csv(args.snapshots)
    geometry = GeometryParams(R_s=math.inf, R_min=args.R_min, R_max=args.R_max)
    for t, positions in groups:
        state = SwarmState(positions=positions)
        links = build_links(state, geometry)
        e_theta = regularity(links, args.L, args.offset)
        e_L = compactness(state, geometry, args.L)
        print(f"t={format(t, 'g')} e_theta={e_theta!r} e_L={e_L!r}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="swarmlattice",
        description="Deterministic swarm lattice-formation simulator and experiment harness",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="run one trial from a scenario config")
    sim.add_argument("--config", required=True, help="TOML scenario file")
    sim.add_argument("--seed", type=int, default=None, help="override the master seed")
    sim.add_argument("--set", action="append", metavar="KEY=VALUE", help="override a config key")
    sim.add_argument("--out", default="out", help="output directory")
    sim.set_defaults(func=cmd_simulate)

    suite = sub.add_parser("suite", help="run an experiment suite")
    suite.add_argument("kind", choices=SUITE_KINDS)
    suite.add_argument("--config", required=True)
    suite.add_argument("--seed", type=int, default=None)
    suite.add_argument("--set", action="append", metavar="KEY=VALUE")
    suite.add_argument("--out", default="out")
    suite.add_argument("--trials", type=int, default=30, help="trials per grid cell")
    suite.add_argument("--jobs", type=int, default=_default_jobs(), help="parallel workers")
    suite.add_argument(
        "--grid",
        action="append",
        metavar="AXIS=START:STEP:STOP",
        help="sweep axis (also AXIS=v1,v2,...); repeatable",
    )
    suite.add_argument("--fraction", type=float, default=0.3, help="faults: fraction removed")
    suite.add_argument("--remove-at", type=float, default=30.0, help="faults: removal time [s]")
    suite.add_argument(
        "--switch", action="append", metavar="TIME:L", help="flexibility: lattice switch"
    )
    suite.add_argument(
        "--reset-gains", action="store_true", help="flexibility: reset adaptive gains on switch"
    )
    suite.add_argument("--sensing-radius", type=float, default=3.0, help="scalability: R_s [m]")
    suite.add_argument(
        "--vary", choices=("N", "R_s"), default="N", help="scalability: sweep axis"
    )
    suite.add_argument(
        "--sweep-trials", type=int, default=None, help="compare-baseline: trials per tuning cell"
    )
    suite.set_defaults(func=cmd_suite)

    met = sub.add_parser("metrics", help="offline metrics for a snapshot CSV")
    met.add_argument("snapshots", help="CSV with x,y columns (t column groups snapshots)")
    met.add_argument("--L", type=int, default=4, choices=(4, 6))
    met.add_argument("--R-min", dest="R_min", type=float, default=0.6)
    met.add_argument("--R-max", dest="R_max", type=float, default=1.1)
    met.add_argument("--offset", type=float, default=0.0, help="lattice orientation offset [rad]")
    met.set_defaults(func=cmd_metrics)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, ScenarioError, SimulationError, output.SnapshotReadError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
