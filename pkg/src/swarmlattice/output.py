"""CSV and manifest writers.

All numeric CSV output uses Python's shortest round-trip float
representation, so re-reading a file loses nothing. Missing values
(e.g. a convergence time that never occurred) are empty cells.

Every command writes a JSON run manifest recording the tool version, the
fully resolved configuration, the master seed, wall-clock timestamps, and
a SHA-256 digest of every output file.
"""

from __future__ import annotations

import csv
import hashlib
import json
import math
from pathlib import Path
from typing import Iterable

from .engine import Snapshot, TrialRun
from .experiments import SuiteResult
from .metrics import MetricsTrace

TRACE_COLUMNS = ("t", "e_theta", "e_L", "G_n_mean", "G_n_min", "G_n_max", "num_links", "num_agents")
SNAPSHOT_COLUMNS = ("trial_id", "t", "agent_id", "x", "y", "G_n_i")
FIGURE_COLUMNS = ("figure_id", "x_label", "x", "series", "metric", "mean", "min", "max")


def format_value(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float) and math.isnan(value):
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (list, tuple, dict)):
        return json.dumps(value)
    return str(value)


def _write_rows(path, header: Iterable[str], rows: Iterable[Iterable]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(list(header))
        for row in rows:
            writer.writerow([format_value(v) for v in row])


def write_trace_csv(path, trace: MetricsTrace) -> None:
    rows = zip(
        trace.t,
        trace.e_theta,
        trace.e_L,
        trace.g_n_mean,
        trace.g_n_min,
        trace.g_n_max,
        trace.num_links,
        trace.num_agents,
    )
    _write_rows(path, TRACE_COLUMNS, rows)


def write_snapshots_csv(path, snapshots: list[Snapshot], trial_id: int = 0) -> None:
    def rows():
        for snap in snapshots:
            for agent, (pos, gain) in enumerate(zip(snap.positions, snap.normal_gains)):
                yield (trial_id, snap.time, agent, pos[0], pos[1], gain)

    _write_rows(path, SNAPSHOT_COLUMNS, rows())


def write_trials_csv(path, result: SuiteResult) -> None:
    """One row per trial: the resolved scenario plus steady-state stats."""
    trials = result.all_trials()
    config_keys = sorted({k for s in trials for k in s.config})
    param_keys = sorted({k for s in trials for k in s.params})
    extra_keys = sorted({k for s in trials for k in s.extra})
    header = (
        ["cell_index", "trial_index", "seed"]
        + [f"param_{k}" for k in param_keys]
        + config_keys
        + ["e_theta_ss", "e_L_ss", "t_ss", "T_theta", "T_L", "success", "cost", "G_n_ss"]
        + extra_keys
    )

    def rows():
        for s in trials:
            yield (
                [s.cell_index, s.trial_index, s.seed]
                + [s.params.get(k) for k in param_keys]
                + [s.config.get(k) for k in config_keys]
                + [s.e_theta_ss, s.e_L_ss, s.t_ss, s.T_theta, s.T_L, s.success, s.cost, s.g_n_ss]
                + [s.extra.get(k) for k in extra_keys]
            )

    _write_rows(path, header, rows())


def write_cells_csv(path, result: SuiteResult) -> None:
    """Per-cell aggregates in cell order."""
    param_keys = sorted({k for c in result.cells for k in c.params})
    header = (
        ["cell_index"]
        + [f"param_{k}" for k in param_keys]
        + [
            "trials",
            "mean_e_theta_ss",
            "min_e_theta_ss",
            "max_e_theta_ss",
            "mean_e_L_ss",
            "min_e_L_ss",
            "max_e_L_ss",
            "success_rate",
            "mean_cost",
            "mean_T_theta",
            "mean_T_L",
            "mean_G_n_ss",
        ]
    )

    def rows():
        for c in result.cells:
            yield (
                [c.index]
                + [c.params.get(k) for k in param_keys]
                + [
                    len(c.trials),
                    c.mean_e_theta_ss,
                    c.min_e_theta_ss,
                    c.max_e_theta_ss,
                    c.mean_e_L_ss,
                    c.min_e_L_ss,
                    c.max_e_L_ss,
                    c.success_rate,
                    c.mean_cost,
                    c.mean_T_theta,
                    c.mean_T_L,
                    c.mean_g_n_ss,
                ]
            )

    _write_rows(path, header, rows())


def figure_rows(result: SuiteResult, figure_id: str, x_label: str, series_label: str | None = None):
    """Long-format plot rows: one per (cell, metric), with min/max envelopes."""
    rows = []
    for cell in result.cells:
        x = cell.params.get(x_label)
        series = f"{series_label}={cell.params.get(series_label)}" if series_label else ""
        rows.append(
            (figure_id, x_label, x, series, "e_theta_ss", cell.mean_e_theta_ss, cell.min_e_theta_ss, cell.max_e_theta_ss)
        )
        rows.append(
            (figure_id, x_label, x, series, "e_L_ss", cell.mean_e_L_ss, cell.min_e_L_ss, cell.max_e_L_ss)
        )
        rows.append((figure_id, x_label, x, series, "cost", cell.mean_cost, None, None))
        rows.append((figure_id, x_label, x, series, "success_rate", cell.success_rate, None, None))
        if not math.isnan(cell.mean_g_n_ss):
            rows.append((figure_id, x_label, x, series, "G_n_ss", cell.mean_g_n_ss, None, None))
    return rows


def write_figure_csv(path, rows) -> None:
    _write_rows(path, FIGURE_COLUMNS, rows)


def write_comparison_csv(path, rows: list[dict]) -> None:
    if not rows:
        _write_rows(path, ["N"], [])
        return
    header = list(rows[0].keys())
    _write_rows(path, header, ([row[k] for k in header] for row in rows))


def sha256_of(path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            digest.update(chunk)
    return digest.hexdigest()


def write_manifest(path, *, config: dict, master_seed: int, started: str, finished: str, outputs: list, extra: dict | None = None) -> None:
    from . import __version__

    manifest = {
        "tool": "swarmlattice",
        "version": __version__,
        "master_seed": master_seed,
        "started": started,
        "finished": finished,
        "config": config,
        "outputs": [
            {
                "path": str(Path(p).name),
                "bytes": Path(p).stat().st_size,
                "sha256": sha256_of(p),
            }
            for p in outputs
        ],
    }
    if extra:
        manifest.update(extra)
    with open(path, "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=False)
        fh.write("\n")


class SnapshotReadError(ValueError):
    """Malformed snapshot CSV; message names the offending line."""


def read_snapshots_csv(path) -> list[tuple[float, "object"]]:
    """Parse a snapshot CSV into (time, positions-array) groups.

    Needs at least ``x`` and ``y`` columns; a ``t`` column groups rows
    into snapshot instants (one group at t=0 if absent). Raises
    :class:`SnapshotReadError` with the 1-based line number on bad rows.
    """
    import numpy as np

    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise SnapshotReadError(f"{path}: file is empty") from None
        cols = {name: idx for idx, name in enumerate(header)}
        if "x" not in cols or "y" not in cols:
            raise SnapshotReadError(f"{path}: header must contain x and y columns")
        groups: dict[float, list[tuple[float, float]]] = {}
        order: list[float] = []
        count = 0
        for line_no, row in enumerate(reader, start=2):
            if not row:
                continue
            try:
                t = float(row[cols["t"]]) if "t" in cols else 0.0
                x = float(row[cols["x"]])
                y = float(row[cols["y"]])
            except (ValueError, IndexError) as exc:
                raise SnapshotReadError(f"{path}: line {line_no}: {exc}") from exc
            if t not in groups:
                groups[t] = []
                order.append(t)
            groups[t].append((x, y))
            count += 1
        if count == 0:
            raise SnapshotReadError(f"{path}: no data rows")
    return [(t, np.asarray(groups[t])) for t in order]
