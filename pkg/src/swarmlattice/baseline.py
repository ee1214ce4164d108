"""Gravitational virtual-force baseline controller.

The comparison algorithm: every pair of agents interacts through a
saturated inverse-square force that is repulsive below the target spacing
``R``, attractive between ``R`` and ``1.5 R``, and zero beyond (compact
support). The second-order damped dynamics it was designed for reduce to
the same first-order model integrated here when friction dominates
inertia and ``m = mu = 1``.

Square lattices need an extra device: each agent carries a static binary
*spin*. Same-spin pairs evaluate the force at ``dist / sqrt(2)``, which
moves their equilibrium to ``sqrt(2) * R`` -- the diagonal of the target
square -- while different-spin pairs equilibrate at ``R``.

The force is discontinuous at ``dist = R``; we define ``f(R) = 0`` so the
target spacing is an exact equilibrium of the discrete-time dynamics.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .geometry import (
    MIN_DISTANCE,
    DegenerateGeometryError,
    PairGeometry,
    SwarmState,
    pair_geometry,
)

SQRT2 = math.sqrt(2.0)


@dataclass(frozen=True)
class BaselineParams:
    """Gains and constants of the gravitational baseline.

    ``m`` and ``mu`` document the first-order reduction of the original
    second-order model (both 1 by default); only ``m`` enters the force.
    ``spins`` is assigned once per trial and static thereafter.
    """

    G: float = 35.0
    F_max: float = 2.0
    R: float = 1.0
    m: float = 1.0
    mu: float = 1.0
    spins: tuple[int, ...] | None = field(default=None, compare=False)

    def __post_init__(self):
        if self.G < 0 or self.F_max < 0:
            raise ValueError("G and F_max must be >= 0")
        if self.R <= 0:
            raise ValueError("R must be > 0")
        if self.m <= 0 or self.mu <= 0:
            raise ValueError("m and mu must be > 0")
        if self.spins is not None and any(s not in (0, 1) for s in self.spins):
            raise ValueError("spins must be binary")


def saturate(x: float, lo: float, hi: float) -> float:
    """Clamp ``x`` into ``[lo, hi]``."""
    if lo >= hi:
        raise ValueError("saturation needs lo < hi")
    return min(max(x, lo), hi)


def gravitational_force(dist: float, params: BaselineParams) -> float:
    """Signed force magnitude at ``dist``; positive pushes the pair apart."""
    if dist <= 0:
        raise DegenerateGeometryError("gravitational force needs dist > 0")
    if dist == params.R:
        return 0.0  # exact equilibrium at the target spacing
    if dist > 1.5 * params.R:
        return 0.0
    mag = saturate(params.G * params.m**2 / dist**2, 0.0, params.F_max)
    return mag if dist < params.R else -mag


def assign_spins(n: int, rng: np.random.Generator) -> tuple[int, ...]:
    """Independent fair binary spin per agent, reproducible from ``rng``."""
    if n < 1:
        raise ValueError("need at least one agent")
    return tuple(int(s) for s in rng.integers(0, 2, size=n))


def baseline_input(state: SwarmState, i: int, params: BaselineParams, L: int) -> np.ndarray:
    """Velocity command for agent ``i``: force sum over all other agents."""
    if L == 4 and params.spins is None:
        raise ValueError("square-lattice baseline needs spins assigned")
    u = np.zeros(2)
    xi = state.positions[i]
    for j in range(state.n_agents):
        if j == i:
            continue
        r = xi - state.positions[j]
        d = math.hypot(r[0], r[1])
        if d < MIN_DISTANCE:
            continue
        d_eff = d / SQRT2 if (L == 4 and params.spins[i] == params.spins[j]) else d
        f = gravitational_force(d_eff, params)
        u += f * r / d
    return u


def baseline_inputs(
    state: SwarmState, params: BaselineParams, L: int, pg: PairGeometry | None = None
) -> np.ndarray:
    """Vectorised :func:`baseline_input` for the whole swarm."""
    if pg is None:
        # Only diff/dist are used; the sensing masks do not apply here.
        from .geometry import GeometryParams

        pg = pair_geometry(state.positions, GeometryParams())
    n = state.n_agents
    d = pg.dist  # +inf diagonal
    if L == 4:
        if params.spins is None:
            raise ValueError("square-lattice baseline needs spins assigned")
        spins = np.asarray(params.spins)
        if spins.shape != (n,):
            raise ValueError("spins length must match the number of agents")
        same = spins[:, None] == spins[None, :]
        d_eff = np.where(same, d / SQRT2, d)
    else:
        d_eff = d
    valid = d >= MIN_DISTANCE
    d_safe = np.where(valid, d_eff, np.inf)
    mag = np.clip(params.G * params.m**2 / (d_safe * d_safe), 0.0, params.F_max)
    f = np.where(d_safe < params.R, mag, np.where(d_safe <= 1.5 * params.R, -mag, 0.0))
    f = np.where(d_safe == params.R, 0.0, f)
    w = f / np.where(valid, d, np.inf)
    return np.einsum("ij,ijk->ik", w, pg.diff)
