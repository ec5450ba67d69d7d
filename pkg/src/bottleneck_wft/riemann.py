"""Classical and constrained Riemann solvers.

``classical_solve`` and ``constrained_solve`` return exact self-similar fans
(continuous rarefactions).  ``discrete_classical`` and ``discrete_constrained``
are the mesh-discretized versions used by the front-tracking engine, where a
rarefaction is replaced by a staircase of mesh-adjacent fronts.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

from .fundamental import ModelParams, constraint_level, flux, front_speed
from .rational import Q, fmt

SHOCK = "shock"
RAREFACTION = "rarefaction"
NONCLASSICAL = "nonclassical"


@dataclass(frozen=True)
class Wave:
    lo: Fraction  # slowest speed of the wave
    hi: Fraction  # fastest speed (equal to lo for discontinuities)
    left: Fraction
    right: Fraction
    kind: str

    def __str__(self):
        if self.kind == RAREFACTION:
            where = f"speeds [{fmt(self.lo)}, {fmt(self.hi)}]"
        else:
            where = f"speed {fmt(self.lo)}"
        return f"{self.kind} {fmt(self.left)} -> {fmt(self.right)} at {where}"


@dataclass(frozen=True)
class WaveFan:
    left: Fraction
    right: Fraction
    waves: tuple = ()
    sv_speed: Fraction | None = None
    case: int | None = None

    def __str__(self):
        head = f"fan {fmt(self.left)} | {fmt(self.right)}"
        if self.case is not None:
            head += f" (case {self.case}, SV speed {fmt(self.sv_speed)})"
        body = [f"  {w}" for w in self.waves] or ["  (no waves)"]
        return "\n".join([head] + body)


def _classical_waves(rho_l, rho_r):
    if rho_l == rho_r:
        return ()
    if rho_l < rho_r:
        s = front_speed(rho_l, rho_r)
        return (Wave(s, s, rho_l, rho_r, SHOCK),)
    return (Wave(1 - 2 * rho_l, 1 - 2 * rho_r, rho_l, rho_r, RAREFACTION),)


def classical_solve(rho_l, rho_r) -> WaveFan:
    rho_l, rho_r = Q(rho_l), Q(rho_r)
    for r in (rho_l, rho_r):
        if not 0 <= r <= 1:
            raise ValueError(f"density {r} outside [0, 1]")
    return WaveFan(rho_l, rho_r, _classical_waves(rho_l, rho_r))


def evaluate(fan: WaveFan, xi) -> Fraction:
    """State on the ray x/t = xi; discontinuities take their right state."""
    xi = Q(xi)
    state = fan.left
    for w in fan.waves:
        if xi < w.lo:
            return state
        if w.kind == RAREFACTION and xi < w.hi:
            return (1 - xi) / 2
        state = w.right
    return state


def evaluate_left(fan: WaveFan, xi) -> Fraction:
    """Left limit of the fan on the ray x/t = xi."""
    xi = Q(xi)
    state = fan.left
    for w in fan.waves:
        if xi <= w.lo:
            return state
        if w.kind == RAREFACTION and xi <= w.hi:
            return (1 - xi) / 2
        state = w.right
    return state


def classify(rho_v, params: ModelParams) -> int:
    """Constrained Riemann case from the classical trace at speed vb."""
    f = flux(rho_v)
    vb = params.vb
    if f > constraint_level(vb, params) + vb * rho_v:
        return 1
    if f >= vb * rho_v:
        return 2
    return 3


def constrained_solve(rho_l, rho_r, params: ModelParams) -> WaveFan:
    classical = classical_solve(rho_l, rho_r)
    rho_l, rho_r = classical.left, classical.right
    case = classify(evaluate(classical, params.vb), params)
    if case == 1:
        vb = params.vb
        ns = Wave(vb, vb, params.rho_hat, params.rho_check, NONCLASSICAL)
        waves = _classical_waves(rho_l, params.rho_hat) + (ns,) + _classical_waves(params.rho_check, rho_r)
        return WaveFan(rho_l, rho_r, waves, vb, 1)
    speed = params.vb if case == 2 else 1 - rho_r
    return WaveFan(rho_l, rho_r, classical.waves, speed, case)


# ---------------------------------------------------------------------------
# mesh-discretized solvers used by the engine


@dataclass
class DiscreteFan:
    """Fronts (left, right, speed) ordered left to right; ``ns`` splits them at the SV."""

    left_fronts: list = field(default_factory=list)
    right_fronts: list = field(default_factory=list)
    ns: bool = False
    sv_speed: Fraction | None = None
    case: int | None = None

    @property
    def fronts(self):
        return self.left_fronts + self.right_fronts


def discrete_classical(rho_l, rho_r, mesh) -> list:
    """Classical solution with the rarefaction broken at every mesh point."""
    if rho_l == rho_r:
        return []
    if rho_l < rho_r:
        return [(rho_l, rho_r, front_speed(rho_l, rho_r))]
    i, j = mesh.index(rho_l), mesh.index(rho_r)
    pts = mesh.points[j : i + 1][::-1]
    return [(a, b, front_speed(a, b)) for a, b in zip(pts, pts[1:])]


def discrete_trace(fronts, state, xi):
    """Right-continuous state at ray xi of a list of fronts emanating from one point."""
    for left, right, speed in fronts:
        if xi < speed:
            return state
        state = right
    return state


def discrete_constrained(rho_l, rho_r, mesh, params: ModelParams) -> DiscreteFan:
    """Constrained solver on the mesh; fronts at most as fast as the SV sit on its left."""
    classical = discrete_classical(rho_l, rho_r, mesh)
    rho_v = discrete_trace(classical, rho_l, params.vb)
    case = classify(rho_v, params)
    if case == 1:
        return DiscreteFan(
            discrete_classical(rho_l, params.rho_hat, mesh),
            discrete_classical(params.rho_check, rho_r, mesh),
            True,
            params.vb,
            1,
        )
    speed = params.vb if case == 2 else 1 - rho_r
    left = [fr for fr in classical if fr[2] <= speed]
    right = [fr for fr in classical if fr[2] > speed]
    return DiscreteFan(left, right, False, speed, case)
