"""First-order Godunov scheme with a moving flux constraint, used as an oracle.

The grid is attached to the SV: cell interfaces sit at y(t) + k dx and the
SV is always on interface ``ks``.  During one step the SV speed w is frozen,
so the equation in the moving frame reads rho_t + (f(rho) - w rho)_x = 0.
That flux is concave with its maximum at (1 - w)/2, so the Godunov flux is the
usual demand/supply minimum.  At the SV interface it is additionally capped by
F_alpha(w).  Because the grid translates with the SV no remapping is needed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .fundamental import ModelParams
from .mesh import PiecewiseConstant


class CflError(ValueError):
    pass


def _antiderivative(rho0: PiecewiseConstant, x):
    """Integral of rho0 from the first breakpoint (or 0) to each x, vectorized."""
    bps = np.array([float(b) for b in rho0.breakpoints])
    vals = np.array([float(v) for v in rho0.values])
    x = np.asarray(x, dtype=float)
    if bps.size == 0:
        return vals[0] * x
    # cumulative integral at breakpoints, relative to bps[0]
    cum = np.concatenate([[0.0], np.cumsum(vals[1:-1] * np.diff(bps))])
    idx = np.searchsorted(bps, x, side="right")  # value index at x
    base_idx = np.clip(idx - 1, 0, bps.size - 1)
    return cum[base_idx] + vals[idx] * (x - bps[base_idx])


def cell_averages(rho0: PiecewiseConstant, edges):
    a = _antiderivative(rho0, edges)
    return np.diff(a) / np.diff(edges)


@dataclass
class GodunovResult:
    profile: PiecewiseConstant
    y: float
    sv_speed: float
    steps: int
    mass_defect: float  # largest |mass change - boundary flux| over all steps


def godunov_reference(rho0: PiecewiseConstant, y0, params: ModelParams, T, window, cells: int, cfl: float = 0.5):
    """Cell averages at time T on ``cells`` cells covering ``window`` around the SV.

    ``window`` is the lab-frame interval the answer must cover; the moving
    grid is widened by T on each side so that it does so at every time.
    """
    if cells < 16:
        raise ValueError("need at least 16 cells")
    if not 0 < cfl <= 0.5:
        raise CflError(f"cfl={cfl} outside (0, 1/2]")
    T = float(T)
    y0 = float(y0)
    lo = float(window[0]) - y0 - T
    hi = float(window[1]) - y0 + T
    dx = (hi - lo) / cells
    ks = int(round(-lo / dx))  # SV interface index
    lo = -ks * dx
    edges_rel = lo + dx * np.arange(cells + 1)
    rho = cell_averages(rho0, edges_rel + y0)

    vb = float(params.vb)
    rs = float(params.rho_star)
    alpha = float(params.alpha)
    left_bc, right_bc = float(rho0.values[0]), float(rho0.values[-1])
    dt_max = cfl * dx
    y, t, steps = y0, 0.0, 0
    worst = 0.0
    w = vb
    while t < T - 1e-15:
        dt = min(dt_max, T - t)
        down = rho[ks] if ks < cells else right_bc
        w = vb if down <= rs else 1.0 - down
        theta = 0.5 * (1.0 - w)
        ext = np.concatenate([[left_bc], rho, [right_bc]])
        a, b = ext[:-1], ext[1:]
        g = lambda r: r * (1.0 - w - r)
        flux = np.minimum(g(np.minimum(a, theta)), g(np.maximum(b, theta)))
        cap = 0.25 * alpha * (1.0 - w) ** 2
        flux[ks] = min(flux[ks], cap)
        new = rho - dt / dx * (flux[1:] - flux[:-1])
        defect = abs(dx * (new.sum() - rho.sum()) + dt * (flux[-1] - flux[0]))
        worst = max(worst, defect)
        rho = new
        y += w * dt
        t += dt
        steps += 1
    edges = edges_rel + y
    prof = PiecewiseConstant.__new__(PiecewiseConstant)
    prof.breakpoints = [float(e) for e in edges]
    prof.values = [left_bc] + [float(v) for v in rho] + [right_bc]
    return GodunovResult(prof, y, w, steps, worst)
