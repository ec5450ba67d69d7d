"""Reusable initial data: random regression data, canonical Riemann data and
the four-interaction worked example for the ancestor and weight formulas."""

from __future__ import annotations

import random
from dataclasses import dataclass
from fractions import Fraction

from .fundamental import ModelParams
from .mesh import DensityMesh, PiecewiseConstant, build_mesh

DESK = ModelParams(Fraction(1, 5), Fraction(9, 25))


@dataclass
class Scenario:
    name: str
    rho0: PiecewiseConstant
    y0: Fraction
    mesh: DensityMesh
    params: ModelParams
    T: Fraction


def random_datum(rng: random.Random, mesh: DensityMesh, n_jumps: int, span=10, grid=20):
    """Step function with ``n_jumps`` jumps on (0, span) and mesh values, plus an
    SV position strictly inside the support and off every breakpoint."""
    slots = rng.sample(range(1, span * grid), n_jumps)
    xs = sorted(Fraction(s, grid) for s in slots)
    values = [rng.choice(mesh.points) for _ in range(n_jumps + 1)]
    for i in range(1, len(values)):
        while values[i] == values[i - 1]:
            values[i] = rng.choice(mesh.points)
    rho0 = PiecewiseConstant(xs, values)
    lo, hi = xs[0], xs[-1]
    while True:
        y0 = lo + (hi - lo) * Fraction(rng.randint(1, 999), 1000)
        if y0 not in xs:
            return rho0, y0


def regression_suite(count=50, seed=0, params: ModelParams = DESK, levels=(4, 6, 8)):
    """Randomized data for the taxonomy and tangent checks (3 to 10 jumps)."""
    rng = random.Random(seed)
    meshes = {n: build_mesh(n, params) for n in levels}
    out = []
    for i in range(count):
        n = levels[i % len(levels)]
        rho0, y0 = random_datum(rng, meshes[n], rng.randint(3, 10))
        T = Fraction(rng.choice([2, 4, 8]))
        out.append(Scenario(f"random-{seed}-{i}", rho0, y0, meshes[n], params, T))
    return out


def canonical_data(n=10, params: ModelParams = DESK):
    """Five Riemann-type data around an SV at the origin, horizon 1."""
    mesh = build_mesh(n, params)
    F = Fraction
    T = F(1)
    cases = [
        ("case-1 constant", PiecewiseConstant.constant(F(1, 2))),
        ("case-2 constant", PiecewiseConstant.constant(F(1, 16))),
        ("case-3 constant", PiecewiseConstant.constant(F(29, 32))),
        ("shock through SV", PiecewiseConstant([F(1, 10)], [F(1, 16), F(29, 32)])),
        ("rarefaction through SV", PiecewiseConstant([F(-1, 10)], [F(7, 8), F(1, 16)])),
    ]
    return [Scenario(name, rho0, F(0), mesh, params, T) for name, rho0 in cases]


# Worked example: a rarefaction fan left of the SV, a front creating an NS from
# the right, a merge that cancels it, and a late shock crossing the SV.
WORKED_LABELS = {
    # textbook label -> engine front id for the datum below (n = 6, desk parameters)
    "fan": (0, 1, 2, 3, 4),
    7: 5,
    8: 6,
    15: 7,
    16: 8,
    18: 9,
    9: 11,
    17: 14,
    19: 16,
    14: 18,
}


def worked_example() -> Scenario:
    F = Fraction
    params = DESK
    mesh = build_mesh(6, params)
    xs = [F(-1, 1000), F(1, 100), F(3, 100), F(1), F(101, 100), F(207, 200)]
    values = [F(4, 5), F(18, 25), F(45, 64), F(7, 8), F(57, 64), F(29, 32), F(15, 16)]
    return Scenario("worked example", PiecewiseConstant(xs, values), F(0), mesh, params, F(3, 2))
