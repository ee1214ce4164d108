"""Displacement-based lattice-formation control law.

Each agent's velocity command is the sum of two virtual-force fields:

* a *radial* input -- a saturated Lennard-Jones attraction/repulsion
  ``min(a/d^(2c) - b/d^c, 1)`` along the line to every sensed agent,
  which aggregates the swarm and enforces the desired link length;
* a *normal* input -- for every adjacent agent, a push along the
  perpendicular of the relative position, proportional to the bearing's
  deviation from the nearest multiple of ``2*pi/L``, which rotates links
  onto the lattice directions (L = 4 square, L = 6 triangular).

The summed command is clamped to the speed limit ``V_max``.

In adaptive mode the normal gain is a per-agent integrator: it grows at
rate ``alpha * (e_i - e*)`` while the agent's mean absolute angular error
``e_i`` exceeds the dead-zone threshold ``e*``, and never decreases.

Scalar, per-agent entry points mirror the definitions one to one and are
the reference semantics; ``control_inputs`` is the vectorised whole-swarm
path used by the integrator (tested to agree with the scalar path).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .geometry import (
    MIN_DISTANCE,
    GeometryParams,
    LinkSet,
    PairGeometry,
    SwarmState,
    adjacency_set,
    link_angle,
    links_from_pairs,
    neighbourhood,
    pair_geometry,
)


@dataclass(frozen=True)
class ControlParams:
    """Constants of the lattice-formation law.

    ``L`` selects the target lattice (4 square, 6 triangular), ``R`` the
    desired link length. ``G_r``/``G_n`` are the radial and normal gains;
    ``a``, ``b``, ``c`` shape the radial interaction. In adaptive mode the
    shared ``G_n`` is ignored and per-agent gains grow from zero with
    adaptation gain ``alpha`` above the dead-zone ``e_theta_star``.
    """

    L: int = 4
    R: float = 1.0
    G_r: float = 15.0
    G_n: float = 8.0
    a: float = 0.15
    b: float = 0.15
    c: int = 5
    V_max: float = 5.0
    orientation_offset: float = 0.0
    adaptive: bool = False
    alpha: float = 3.0
    e_theta_star: float = 0.2

    def __post_init__(self):
        if self.L not in (4, 6):
            raise ValueError("L must be 4 (square) or 6 (triangular)")
        if self.R <= 0:
            raise ValueError("R must be > 0")
        if self.G_r < 0 or self.G_n < 0:
            raise ValueError("gains must be >= 0")
        if self.a <= 0 or self.b <= 0:
            raise ValueError("a and b must be > 0")
        if int(self.c) != self.c or self.c < 1:
            raise ValueError("c must be a positive integer")
        if self.V_max <= 0:
            raise ValueError("V_max must be > 0")
        if self.alpha <= 0:
            raise ValueError("alpha must be > 0")
        if not 0 < self.e_theta_star < 1:
            raise ValueError("e_theta_star must be in (0, 1)")

    @property
    def lattice_angle(self) -> float:
        return 2.0 * math.pi / self.L


def _int_power(x, c: int):
    """x**c for integer c >= 1 via binary exponentiation (works on arrays)."""
    out = None
    base = x
    k = c
    while k:
        if k & 1:
            out = base if out is None else out * base
        k >>= 1
        if k:
            base = base * base
    return out


def radial_interaction(dist: float, params: ControlParams) -> float:
    """Saturated Lennard-Jones value at distance ``dist`` (> 0)."""
    if dist <= 0:
        raise ValueError("radial interaction needs dist > 0")
    inv = 1.0 / _int_power(float(dist), params.c)
    return min(params.a * inv * inv - params.b * inv, 1.0)


def radial_input(state: SwarmState, i: int, neighbours, params: ControlParams) -> np.ndarray:
    """Radial virtual-force sum for agent ``i`` over its neighbourhood."""
    u = np.zeros(2)
    xi = state.positions[i]
    for j in sorted(neighbours):
        r = xi - state.positions[j]
        d = math.hypot(r[0], r[1])
        if d < MIN_DISTANCE:
            continue  # no usable direction; saturation bounds magnitude only
        u += radial_interaction(d, params) * r / d
    return params.G_r * u


def angular_error(theta: float, L: int, orientation_offset: float = 0.0) -> float:
    """Deviation of bearing ``theta`` from the nearest lattice direction.

    Result lies in ``(-pi/L, pi/L]``; an exact tie resolves to the upper
    endpoint.
    """
    period = 2.0 * math.pi / L
    r = (theta - orientation_offset) % period
    if r > 0.5 * period:
        r -= period
    return r


def angular_errors(theta: np.ndarray, L: int, orientation_offset: float = 0.0) -> np.ndarray:
    """Vectorised :func:`angular_error`."""
    period = 2.0 * math.pi / L
    r = np.mod(theta - orientation_offset, period)
    return np.where(r > 0.5 * period, r - period, r)


def normal_interaction(theta_err: float, L: int) -> float:
    """Linear restoring weight, -(L/pi) * theta_err, in [-1, 1)."""
    return -(L / math.pi) * theta_err


def normal_input(state: SwarmState, i: int, adjacency, params: ControlParams) -> np.ndarray:
    """Normal (perpendicular) virtual-force sum for agent ``i``.

    Per adjacent agent j the push acts along ``rel`` rotated by +pi/2 and
    scaled by 1/dist, so the induced motion is a rotation of the link
    towards the nearest lattice direction.
    """
    gain = float(state.normal_gains[i]) if params.adaptive else params.G_n
    u = np.zeros(2)
    xi = state.positions[i]
    for j in sorted(adjacency):
        r = xi - state.positions[j]
        d = math.hypot(r[0], r[1])
        err = angular_error(link_angle(r), params.L, params.orientation_offset)
        f = normal_interaction(err, params.L)
        u += f * np.array([-r[1], r[0]]) / d
    return gain * u


def clamp_speed(u: np.ndarray, v_max: float) -> np.ndarray:
    """Rescale ``u`` (shape (2,) or (N, 2)) so no row exceeds ``v_max``."""
    u = np.asarray(u, dtype=float)
    if u.ndim == 1:
        speed = math.hypot(u[0], u[1])
        return u * (v_max / speed) if speed > v_max else u
    speed = np.hypot(u[:, 0], u[:, 1])  # hypot avoids overflow in the squares
    scale = np.where(speed > v_max, v_max / np.where(speed > 0, speed, 1.0), 1.0)
    return u * scale[:, None]


def control_input(
    state: SwarmState, i: int, params: ControlParams, geometry: GeometryParams
) -> np.ndarray:
    """Full velocity command for agent ``i``: radial + normal, speed-clamped."""
    u_r = radial_input(state, i, neighbourhood(state, i, geometry), params)
    u_n = normal_input(state, i, adjacency_set(state, i, geometry), params)
    return clamp_speed(u_r + u_n, params.V_max)


def local_angular_error(state: SwarmState, i: int, adjacency, params: ControlParams) -> float:
    """Mean absolute angular error of agent ``i``'s links, scaled to [0, 1].

    An isolated agent has no angular information and scores 0, which keeps
    its adaptive gain frozen.
    """
    adjacency = sorted(adjacency)
    if not adjacency:
        return 0.0
    xi = state.positions[i]
    total = 0.0
    for j in adjacency:
        r = xi - state.positions[j]
        err = angular_error(link_angle(r), params.L, params.orientation_offset)
        total += abs(err)
    return (params.L / math.pi) * total / len(adjacency)


def adapt_normal_gain(g: float, e_theta_i: float, params: ControlParams, dt: float) -> float:
    """One forward-Euler step of the per-agent gain integrator.

    The gain grows only while the local error strictly exceeds the
    dead-zone threshold; it never decreases.
    """
    if dt <= 0:
        raise ValueError("dt must be > 0")
    if e_theta_i > params.e_theta_star:
        return g + params.alpha * (e_theta_i - params.e_theta_star) * dt
    return g


# --- vectorised whole-swarm path (used by the integrator) -------------------


def control_inputs(
    state: SwarmState,
    params: ControlParams,
    geometry: GeometryParams,
    pg: PairGeometry | None = None,
    links: LinkSet | None = None,
) -> np.ndarray:
    """Speed-clamped velocity commands for all agents at once."""
    if pg is None:
        pg = pair_geometry(state.positions, geometry)
    if links is None:
        links = links_from_pairs(pg)
    n = state.n_agents

    # Radial part: masked pairs are pushed to +inf where the LJ value is 0.
    d = np.where(pg.neighbour & (pg.dist >= MIN_DISTANCE), pg.dist, np.inf)
    inv = 1.0 / _int_power(d, params.c)
    fr = np.minimum(params.a * inv * inv - params.b * inv, 1.0)
    w = fr / d
    u = params.G_r * np.einsum("ij,ijk->ik", w, pg.diff)

    # Normal part accumulates per directed link onto its source agent.
    if len(links):
        ii = links.edges[:, 0]
        err = angular_errors(links.angle, params.L, params.orientation_offset)
        coef = -(params.L / np.pi) * err / links.dist
        gains = state.normal_gains if params.adaptive else params.G_n
        u[:, 0] += gains * np.bincount(ii, weights=-links.rel[:, 1] * coef, minlength=n)
        u[:, 1] += gains * np.bincount(ii, weights=links.rel[:, 0] * coef, minlength=n)

    return clamp_speed(u, params.V_max)


def local_angular_errors(state: SwarmState, params: ControlParams, links: LinkSet) -> np.ndarray:
    """Vectorised :func:`local_angular_error` for all agents."""
    n = state.n_agents
    if not len(links):
        return np.zeros(n)
    ii = links.edges[:, 0]
    err = np.abs(angular_errors(links.angle, params.L, params.orientation_offset))
    total = np.bincount(ii, weights=err, minlength=n)
    count = np.bincount(ii, minlength=n)
    out = np.zeros(n)
    np.divide(total, count, out=out, where=count > 0)
    return (params.L / math.pi) * out


def adapt_normal_gains(
    gains: np.ndarray, errors: np.ndarray, params: ControlParams, dt: float
) -> np.ndarray:
    """Vectorised :func:`adapt_normal_gain`."""
    if dt <= 0:
        raise ValueError("dt must be > 0")
    step = params.alpha * (errors - params.e_theta_star) * dt
    return np.where(errors > params.e_theta_star, gains + step, gains)
