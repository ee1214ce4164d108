"""Planar swarm geometry: states, sensing sets, and the link graph.

Agents are points in the plane. Two geometric relations drive everything
else: the *neighbourhood* of an agent (every other agent within sensing
range ``R_s``) and its *adjacency set* (agents at a distance compatible
with a lattice edge, i.e. in the closed interval ``[R_min, R_max]``).
Adjacent pairs form directed links; the link graph is what the normal
control action and the regularity metric operate on.

All functions here are pure. The vectorised pair computations are plain
dense O(N^2) numpy -- no spatial index -- which is exact and fast enough
for swarms of a few thousand agents.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

TWO_PI = 2.0 * math.pi

# Pairs closer than this have no usable direction and are skipped by the
# force laws (the interaction magnitudes saturate, the direction does not).
MIN_DISTANCE = 1e-9

# A single planar vector is a plain float ndarray of shape (2,).
Vec2 = np.ndarray


class DegenerateGeometryError(ValueError):
    """Raised when an operation needs a direction that does not exist."""


@dataclass
class SwarmState:
    """Snapshot of the swarm at one time instant.

    ``positions`` has shape (N, 2); agent ids are row indices.
    ``normal_gains`` has shape (N,) and is only consumed by the adaptive
    controller (one gain integrator per agent); it tags along in every
    state so that removal events keep positions and gains aligned.
    States are treated as immutable between integration steps.
    """

    positions: np.ndarray
    normal_gains: np.ndarray | None = None
    time: float = 0.0

    def __post_init__(self):
        self.positions = np.asarray(self.positions, dtype=float)
        if self.positions.ndim != 2 or self.positions.shape[1] != 2:
            raise ValueError("positions must have shape (N, 2)")
        n = self.positions.shape[0]
        if n < 1:
            raise ValueError("a swarm needs at least one agent")
        if not np.isfinite(self.positions).all():
            raise ValueError("positions must be finite")
        if self.normal_gains is None:
            self.normal_gains = np.zeros(n)
        else:
            self.normal_gains = np.asarray(self.normal_gains, dtype=float)
        if self.normal_gains.shape != (n,):
            raise ValueError("normal_gains must have shape (N,)")
        if (self.normal_gains < 0).any() or not np.isfinite(self.normal_gains).all():
            raise ValueError("normal_gains must be finite and >= 0")

    @property
    def n_agents(self) -> int:
        return self.positions.shape[0]


@dataclass(frozen=True)
class GeometryParams:
    """Sensing radius and the link-length interval.

    ``R_s = inf`` is the all-seeing case (every agent senses every other).
    """

    R_s: float = math.inf
    R_min: float = 0.6
    R_max: float = 1.1

    def __post_init__(self):
        if not self.R_s > 0:
            raise ValueError("R_s must be > 0 (use inf for unlimited sensing)")
        if not (0 < self.R_min <= self.R_max):
            raise ValueError("need 0 < R_min <= R_max")


@dataclass
class PairGeometry:
    """Dense pairwise geometry shared by the control laws and the metrics.

    ``diff[i, j]`` is ``x_i - x_j``; ``dist`` carries +inf on the diagonal
    so self-pairs drop out of every mask and force sum.
    """

    diff: np.ndarray        # (N, N, 2)
    dist: np.ndarray        # (N, N), +inf diagonal
    neighbour: np.ndarray   # (N, N) bool, dist <= R_s, self excluded
    adjacency: np.ndarray   # (N, N) bool, R_min <= dist <= R_max

    @property
    def degrees(self) -> np.ndarray:
        return self.adjacency.sum(axis=1)


@dataclass
class LinkSet:
    """Directed link set with cached relative-position geometry.

    Both orientations of every link are stored: (i, j) is present exactly
    when (j, i) is. ``angle`` is the bearing of ``rel`` measured
    counterclockwise from the +x axis, in [0, 2*pi).
    """

    edges: np.ndarray = field(default_factory=lambda: np.empty((0, 2), dtype=np.intp))
    rel: np.ndarray = field(default_factory=lambda: np.empty((0, 2)))
    dist: np.ndarray = field(default_factory=lambda: np.empty(0))
    angle: np.ndarray = field(default_factory=lambda: np.empty(0))

    def __len__(self) -> int:
        return self.edges.shape[0]


def _check_agent_id(state: SwarmState, i: int) -> None:
    if not 0 <= i < state.n_agents:
        raise ValueError(f"invalid agent id {i} for swarm of {state.n_agents}")


def relative_position(state: SwarmState, i: int, j: int) -> Vec2:
    """Position of agent ``i`` relative to agent ``j`` (``x_i - x_j``)."""
    _check_agent_id(state, i)
    _check_agent_id(state, j)
    if i == j:
        raise ValueError("relative position needs two distinct agents")
    return state.positions[i] - state.positions[j]


def neighbourhood(state: SwarmState, i: int, params: GeometryParams) -> set[int]:
    """Ids of all agents within sensing range of agent ``i``."""
    _check_agent_id(state, i)
    d = np.linalg.norm(state.positions - state.positions[i], axis=1)
    mask = d <= params.R_s
    mask[i] = False
    return set(np.nonzero(mask)[0].tolist())


def adjacency_set(state: SwarmState, i: int, params: GeometryParams) -> set[int]:
    """Ids of agents at link distance from agent ``i`` (closed interval)."""
    _check_agent_id(state, i)
    d = np.linalg.norm(state.positions - state.positions[i], axis=1)
    mask = (d >= params.R_min) & (d <= params.R_max)
    mask[i] = False
    return set(np.nonzero(mask)[0].tolist())


def pair_geometry(positions: np.ndarray, params: GeometryParams) -> PairGeometry:
    """All-pairs relative geometry (brute force, row-major pair order)."""
    positions = np.asarray(positions, dtype=float)
    diff = positions[:, None, :] - positions[None, :, :]
    dist = np.sqrt(diff[..., 0] ** 2 + diff[..., 1] ** 2)
    np.fill_diagonal(dist, np.inf)
    neighbour = dist <= params.R_s
    np.fill_diagonal(neighbour, False)  # R_s = inf would keep the diagonal
    adjacency = (dist >= params.R_min) & (dist <= params.R_max)
    return PairGeometry(diff=diff, dist=dist, neighbour=neighbour, adjacency=adjacency)


def links_from_pairs(pg: PairGeometry) -> LinkSet:
    ii, jj = np.nonzero(pg.adjacency)
    rel = pg.diff[ii, jj]
    dist = pg.dist[ii, jj]
    angle = np.arctan2(rel[:, 1], rel[:, 0])
    angle[angle < 0] += TWO_PI
    angle[angle >= TWO_PI] = 0.0  # ulp guard: keep the half-open range
    return LinkSet(edges=np.column_stack([ii, jj]), rel=rel, dist=dist, angle=angle)


def build_links(state: SwarmState, params: GeometryParams) -> LinkSet:
    """Directed link set of the swarm, both orientations of every link."""
    return links_from_pairs(pair_geometry(state.positions, params))


def link_angle(r: Vec2) -> float:
    """Bearing of ``r`` from the +x axis, counterclockwise, in [0, 2*pi)."""
    x, y = float(r[0]), float(r[1])
    if x == 0.0 and y == 0.0:
        raise DegenerateGeometryError("zero vector has no bearing")
    theta = math.atan2(y, x)
    if theta < 0.0:
        theta += TWO_PI
    if theta >= TWO_PI:
        theta = 0.0
    return theta


def pair_angle(theta1: float, theta2: float) -> float:
    """Unsigned angle in [0, pi] between two directions given as bearings."""
    d = (theta1 - theta2) % TWO_PI
    if d > math.pi:
        d -= TWO_PI
    return abs(d)


def square_grid(nx: int, ny: int, spacing: float = 1.0) -> np.ndarray:
    """Axis-aligned square-lattice patch, row-major agent order."""
    xs, ys = np.meshgrid(np.arange(nx) * spacing, np.arange(ny) * spacing)
    return np.column_stack([xs.ravel(), ys.ravel()]).astype(float)


def triangular_grid(nx: int, ny: int, spacing: float = 1.0) -> np.ndarray:
    """Triangular-lattice patch: rows offset by half a step, row step sqrt(3)/2."""
    pts = []
    row_step = spacing * math.sqrt(3.0) / 2.0
    for j in range(ny):
        x0 = 0.5 * spacing if j % 2 else 0.0
        for i in range(nx):
            pts.append((x0 + i * spacing, j * row_step))
    return np.asarray(pts, dtype=float)
