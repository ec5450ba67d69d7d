"""Modified density mesh and piecewise-constant profiles.

The uniform grid 2^-n N in [0, 1] is augmented with the three critical
densities so that the non-classical shock and the SV speed switch are
representable.  Piecewise-constant data are rounded onto the mesh before a
wave-front tracking run.
"""

from __future__ import annotations

import bisect
import io
from dataclasses import dataclass, field
from fractions import Fraction

from .fundamental import ModelParams
from .rational import Q, fmt


class MeshError(ValueError):
    """The modified mesh violates the gap invariant."""


class OffMeshError(ValueError):
    """A density that should be a mesh point is not."""


@dataclass(frozen=True)
class DensityMesh:
    n: int
    points: tuple
    log: tuple = field(default=(), compare=False)

    @property
    def half_step(self) -> Fraction:
        return Fraction(1, 2 ** (self.n + 1))

    def __contains__(self, rho) -> bool:
        rho = Q(rho)
        i = bisect.bisect_left(self.points, rho)
        return i < len(self.points) and self.points[i] == rho

    def index(self, rho) -> int:
        rho = Q(rho)
        i = bisect.bisect_left(self.points, rho)
        if i == len(self.points) or self.points[i] != rho:
            raise OffMeshError(f"{rho} is not a point of the level-{self.n} mesh")
        return i

    def nearest(self, rho) -> Fraction:
        """Closest mesh point, ties resolved toward the smaller value."""
        rho = Q(rho)
        pts = self.points
        i = bisect.bisect_left(pts, rho)
        if i == 0:
            return pts[0]
        if i == len(pts):
            return pts[-1]
        lo, hi = pts[i - 1], pts[i]
        return lo if rho - lo <= hi - rho else hi

    def gaps(self):
        return [b - a for a, b in zip(self.points, self.points[1:])]


def build_mesh(n: int, params: ModelParams) -> DensityMesh:
    """Uniform grid of step 2^-n with rho_check, rho_hat, rho_star merged in.

    Each special point is handled against the current mesh: at distance
    exactly 2^-n-1 it is inserted, closer than that it replaces the nearest
    point, farther away it is inserted.  Endpoints and specials already placed
    are never replaced; the next-nearest point is taken instead.
    """
    if int(n) != n or n < 1:
        raise MeshError(f"mesh level must be a positive integer, got {n}")
    n = int(n)
    h = Fraction(1, 2**n)
    half = h / 2
    pts = [k * h for k in range(2**n + 1)]
    protected = {Fraction(0), Fraction(1)}
    log = []
    for s in (params.rho_check, params.rho_hat, params.rho_star):
        if s in protected:
            continue
        i = bisect.bisect_left(pts, s)
        if i < len(pts) and pts[i] == s:
            protected.add(s)
            log.append(f"{fmt(s)} already on the grid")
            continue
        near = pts[max(0, i - 3) : i + 3]
        ranked = sorted(near, key=lambda p: (abs(p - s), p))
        dist = abs(ranked[0] - s)
        if dist >= half:
            bisect.insort(pts, s)
            log.append(f"insert {fmt(s)}")
        else:
            victim = next((p for p in ranked if p not in protected), None)
            if victim is None:
                raise MeshError(f"n={n}: no replaceable point near {fmt(s)}")
            if victim != ranked[0]:
                log.append(f"nearest point {fmt(ranked[0])} is protected")
            pts.remove(victim)
            bisect.insort(pts, s)
            log.append(f"replace {fmt(victim)} by {fmt(s)}")
        protected.add(s)
    for a, b in zip(pts, pts[1:]):
        gap = b - a
        if gap < half or gap > 3 * half:
            raise MeshError(
                f"n={n}: gap {fmt(gap)} between {fmt(a)} and {fmt(b)} outside "
                f"[{fmt(half)}, {fmt(3 * half)}]"
            )
    return DensityMesh(n=n, points=tuple(pts), log=tuple(log))


class PiecewiseConstant:
    """Right-continuous step function on the real line.

    ``values[i]`` holds on ``[breakpoints[i-1], breakpoints[i])``, with
    ``values[0]`` extending to -inf and ``values[-1]`` to +inf.  Works with
    Fractions and also with floats (for the finite-volume oracle).
    """

    def __init__(self, breakpoints, values, exact: bool = True):
        conv = Q if exact else float
        self.breakpoints = [conv(b) for b in breakpoints]
        self.values = [conv(v) for v in values]
        if len(self.values) != len(self.breakpoints) + 1:
            raise ValueError("need exactly one more value than breakpoints")
        for a, b in zip(self.breakpoints, self.breakpoints[1:]):
            if not a < b:
                raise ValueError("breakpoints must be strictly increasing")
        for v in self.values:
            if v < 0 or v > 1:
                raise ValueError(f"value {v} outside [0, 1]")

    @classmethod
    def constant(cls, value, exact: bool = True):
        return cls([], [value], exact=exact)

    def __repr__(self):
        return f"PiecewiseConstant({self.breakpoints!r}, {self.values!r})"

    def __eq__(self, other):
        if not isinstance(other, PiecewiseConstant):
            return NotImplemented
        a, b = self.merged(), other.merged()
        return a.breakpoints == b.breakpoints and a.values == b.values

    def __call__(self, x):
        return self.values[bisect.bisect_right(self.breakpoints, x)]

    def left_limit(self, x):
        return self.values[bisect.bisect_left(self.breakpoints, x)]

    def jumps(self):
        """(position, left, right) for every breakpoint."""
        return [(x, self.values[i], self.values[i + 1]) for i, x in enumerate(self.breakpoints)]

    def merged(self) -> "PiecewiseConstant":
        bps, vals = [], [self.values[0]]
        for x, _, r in self.jumps():
            if r != vals[-1]:
                bps.append(x)
                vals.append(r)
        out = PiecewiseConstant.__new__(PiecewiseConstant)
        out.breakpoints, out.values = bps, vals
        return out

    def total_variation(self):
        return sum((abs(b - a) for a, b in zip(self.values, self.values[1:])), type(self.values[0])(0))

    def translate(self, dx) -> "PiecewiseConstant":
        out = PiecewiseConstant.__new__(PiecewiseConstant)
        out.breakpoints = [b + dx for b in self.breakpoints]
        out.values = list(self.values)
        return out

    def map_values(self, fn) -> "PiecewiseConstant":
        out = PiecewiseConstant.__new__(PiecewiseConstant)
        out.breakpoints = list(self.breakpoints)
        out.values = [fn(v) for v in self.values]
        return out

    def integral(self, a, b):
        """Exact integral over [a, b]."""
        if b < a:
            raise ValueError("integral bounds reversed")
        total = 0 * a
        cur = a
        i = bisect.bisect_right(self.breakpoints, a)
        while cur < b:
            nxt = self.breakpoints[i] if i < len(self.breakpoints) else b
            nxt = min(nxt, b)
            total += self.values[i] * (nxt - cur)
            cur = nxt
            i += 1
        return total

    def to_text(self) -> str:
        buf = io.StringIO()
        buf.write("x_break value\n")
        buf.write(f"-inf {_render(self.values[0])}\n")
        for x, v in zip(self.breakpoints, self.values[1:]):
            buf.write(f"{_render(x)} {_render(v)}\n")
        return buf.getvalue()

    @classmethod
    def from_text(cls, text: str) -> "PiecewiseConstant":
        rows = [ln.split() for ln in text.splitlines() if ln.strip() and not ln.lstrip().startswith("#")]
        if rows and rows[0] == ["x_break", "value"]:
            rows = rows[1:]
        if not rows or rows[0][0] != "-inf":
            raise ValueError("first row must start with -inf")
        values = [rows[0][1]] + [r[1] for r in rows[1:]]
        return cls([r[0] for r in rows[1:]], values)


def _render(q) -> str:
    return fmt(q) if isinstance(q, Fraction) else repr(q)


def l1_distance(u: PiecewiseConstant, v: PiecewiseConstant, window=None):
    """Exact L1 distance of two step functions, optionally restricted to a window.

    Without a window, both functions must agree at +-inf (otherwise the
    distance is infinite and ``float('inf')`` is returned).
    """
    bps = sorted(set(u.breakpoints) | set(v.breakpoints))
    if window is not None:
        lo, hi = window
        bps = [b for b in bps if lo < b < hi]
        bps = [lo] + bps + [hi]
    else:
        if u.values[0] != v.values[0] or u.values[-1] != v.values[-1]:
            return float("inf")
        if not bps:
            return 0 * u.values[0]
    total = 0 * (u.values[0] - v.values[0])
    for a, b in zip(bps, bps[1:]):
        total += abs(u(a) - v(a)) * (b - a)
    return total


def _cell(mesh: DensityMesh, v):
    """(lower mesh point, upper mesh point, relative position of v in between)."""
    pts = mesh.points
    i = bisect.bisect_right(pts, v) - 1
    if pts[i] == v:
        return v, v, Fraction(0)
    lo, hi = pts[i], pts[i + 1]
    return lo, hi, (v - lo) / (hi - lo)


def quantize(rho0: PiecewiseConstant, mesh: DensityMesh) -> PiecewiseConstant:
    """Round the values onto the mesh without increasing the total variation.

    Values are rounded up when their relative position inside their mesh cell
    exceeds a common threshold theta.  theta = 1/2 is nearest rounding (ties
    downward) and is used whenever it does not increase the variation.  Every
    such rounding is monotone and on average over theta reproduces each jump
    exactly, so some theta never increases it; the smallest one is taken.
    Each value moves by at most one mesh gap.
    """
    cells = [_cell(mesh, Q(v)) for v in rho0.values]

    def rounded(theta):
        return [hi if rel > theta else lo for lo, hi, rel in cells]

    def tv(vals):
        return sum((abs(b - a) for a, b in zip(vals, vals[1:])), Fraction(0))

    limit = rho0.total_variation()
    best = rounded(Fraction(1, 2))
    if tv(best) > limit:
        thetas = sorted({Fraction(0)} | {rel for _, _, rel in cells})
        best = min((rounded(th) for th in thetas), key=tv)
    return rho0.map_values(dict(zip(rho0.values, best)).__getitem__).merged()
