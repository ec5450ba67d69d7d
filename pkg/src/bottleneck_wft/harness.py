"""Experiment drivers: Lipschitz stability of pairs of solutions, the
first-order tangent oracle and convergence against the Godunov oracle."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

from .engine import RunResult, simulate
from .fundamental import ModelParams
from .godunov import godunov_reference
from .mesh import PiecewiseConstant, build_mesh, l1_distance, quantize
from .rational import Q, fmt
from .tangent import (
    attach_shifts,
    classify_nc,
    propagate_all,
    verify_weight_bound,
    weighted_norm,
)


class ConfigError(ValueError):
    """Malformed or inconsistent experiment configuration."""


class UniquenessViolation(RuntimeError):
    pass


# ---------------------------------------------------------------------------
# configuration


def parse_profile(obj) -> PiecewiseConstant:
    if isinstance(obj, (int, float, str)):
        return PiecewiseConstant.constant(Q(obj))
    try:
        return PiecewiseConstant(obj.get("breakpoints", []), obj["values"])
    except (KeyError, TypeError, ValueError, ZeroDivisionError) as exc:
        raise ConfigError(f"bad profile {obj!r}: {exc}") from exc


@dataclass
class ExperimentConfig:
    params: ModelParams
    n: int
    rho0_a: PiecewiseConstant
    rho0_b: PiecewiseConstant
    y0_a: Fraction
    y0_b: Fraction
    T: Fraction
    window: tuple | None = None
    output: Path | None = None
    n_times: int = 40
    extra: dict = field(default_factory=dict)

    @classmethod
    def from_dict(cls, d: dict, base: Path | None = None) -> "ExperimentConfig":
        try:
            params = ModelParams(Q(d["vb"]), Q(d["alpha"]))
            n = int(d["n"])
            rho_a = parse_profile(d["rho0"] if "rho0" in d else d["rho0_a"])
            rho_b = parse_profile(d["rho0_b"]) if "rho0_b" in d else rho_a
            y0_a = Q(d.get("y0", d.get("y0_a", 0)))
            y0_b = Q(d.get("y0_b", y0_a))
            T = Q(d["T"])
            window = tuple(Q(w) for w in d["window"]) if "window" in d else None
        except ConfigError:
            raise
        except (KeyError, TypeError, ValueError, ZeroDivisionError) as exc:
            raise ConfigError(f"invalid configuration: {exc!r}") from exc
        if T <= 0:
            raise ConfigError("T must be positive")
        if window is not None and (len(window) != 2 or window[0] >= window[1]):
            raise ConfigError("window must be [x_min, x_max] with x_min < x_max")
        out = d.get("output")
        output = (Path(base or ".") / out) if out else None
        return cls(params, n, rho_a, rho_b, y0_a, y0_b, T, window, output, int(d.get("n_times", 40)), d)

    def mesh(self):
        from .mesh import MeshError

        try:
            return build_mesh(self.n, self.params)
        except MeshError as exc:
            raise ConfigError(str(exc)) from exc

    def check_window(self, window):
        """The window must hold every breakpoint and both SVs with margin T."""
        xs = list(self.rho0_a.breakpoints) + list(self.rho0_b.breakpoints) + [self.y0_a, self.y0_b]
        if min(xs) - self.T < window[0] or max(xs) + self.T > window[1]:
            raise ConfigError("window does not contain the data with margin T")


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    try:
        data = json.loads(path.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError("config must be a JSON object")
    return ExperimentConfig.from_dict(data, base=path.parent)


# ---------------------------------------------------------------------------
# stability of pairs


def composite_constant(params: ModelParams, tv, labels) -> float:
    """Restricted-regime weight constant, enlarged for special creation/cancellation patterns.

    Each unpaired creation or cancellation (at most two count) multiplies by
    1 + rho_hat - rho_check; any NC1-a, NC2-a or NC4 pattern multiplies by
    1 + (1 + 2/rho*)^2.
    """
    c = params.weight_bound_constant(tv)
    unpaired = sum(1 for lab in labels if lab in ("A", "B"))
    c *= float(1 + params.rho_hat - params.rho_check) ** min(unpaired, 2)
    if any(lab in ("NC1-a", "NC2-a", "NC4") for lab in labels):
        c *= 1 + (1 + 2 / float(params.rho_star)) ** 2
    return c


def distance(ra: RunResult, rb: RunResult, t, window):
    """d(t) = L1 distance of the profiles over the window plus SV gap, exact."""
    pa = _profile_at(ra, t)
    pb = _profile_at(rb, t)
    return l1_distance(pa, pb, window) + abs(_y_at(ra, t) - _y_at(rb, t))


def _profile_at(r: RunResult, t):
    for s in r.snapshots:
        if s.t == t:
            return s.profile
    raise KeyError(f"no snapshot at t={fmt(t)}")


def _y_at(r: RunResult, t):
    seg = r.sv_path[0]
    for s in r.sv_path:
        if s.t <= t:
            seg = s
    return seg.y + seg.speed * (t - seg.t)


@dataclass
class StabilityReport:
    times: list
    d: list
    d0: Fraction
    ratio: float
    constant: float
    labels: list  # NC pattern labels of each of the two runs
    restricted: bool
    events: tuple
    within_constant: bool

    def to_json(self):
        return {
            "d0": fmt(self.d0),
            "ratio": self.ratio,
            "constant": self.constant,
            "within_constant": self.within_constant,
            "restricted_regime": self.restricted,
            "nc_patterns": self.labels,
            "events": list(self.events),
            "series": [{"t": fmt(t), "d": fmt(v)} for t, v in zip(self.times, self.d)],
        }


def run_pair(config: ExperimentConfig, mesh=None) -> StabilityReport:
    """Run both data and report d(t), d(0) and max_t d(t)/d(0)."""
    mesh = mesh or config.mesh()
    ra_rho, rb_rho = quantize(config.rho0_a, mesh), quantize(config.rho0_b, mesh)
    T = config.T
    window = config.window
    if window is None:
        xs = list(ra_rho.breakpoints) + list(rb_rho.breakpoints) + [config.y0_a, config.y0_b]
        window = (min(xs) - T - 1, max(xs) + T + 1)
    else:
        config.check_window(window)
    grid = [T * k / config.n_times for k in range(config.n_times + 1)]
    first = simulate(ra_rho, config.y0_a, mesh, config.params, T, window=window)
    second = simulate(rb_rho, config.y0_b, mesh, config.params, T, window=window)
    times = sorted(set(grid) | {e.t for e in first.events} | {e.t for e in second.events})
    first = simulate(ra_rho, config.y0_a, mesh, config.params, T, snapshot_times=times, window=window)
    second = simulate(rb_rho, config.y0_b, mesh, config.params, T, snapshot_times=times, window=window)
    d = [distance(first, second, t, window) for t in times]
    d0 = d[0]
    peak = max(d)
    if d0 == 0:
        if peak > 0:
            raise UniquenessViolation("identical data produced different solutions")
        ratio = 0.0
    else:
        ratio = float(peak / d0)
    labels = []
    restricted = True
    constant = 0.0
    for r, rho in ((first, ra_rho), (second, rb_rho)):
        rep = verify_weight_bound(None, rho, config.params, r)
        restricted = restricted and rep.restricted
        run_labels = [p.label for p in classify_nc(r)]
        labels.append(run_labels)
        constant = max(constant, composite_constant(config.params, rho.total_variation(), run_labels))
    return StabilityReport(
        times,
        d,
        d0,
        ratio,
        constant,
        labels,
        restricted,
        (len(first.events), len(second.events)),
        ratio <= constant,
    )


# ---------------------------------------------------------------------------
# first-order tangent oracle


@dataclass
class TangentOracleReport:
    eps: Fraction
    stable: bool
    d_T: Fraction
    norm_T: Fraction
    d_0: Fraction
    norm_0: Fraction
    ns_at_T: bool
    ns_term_T: Fraction = Fraction(0)

    @property
    def profile_norm_T(self):
        """Weighted norm plus the displacement of an NS still riding the SV at T."""
        return self.norm_T + self.ns_term_T

    @property
    def rel_error(self):
        if self.norm_T == 0:
            return 0.0 if self.d_T == 0 else float("inf")
        return float(abs(self.d_T - self.eps * self.norm_T) / (self.eps * self.norm_T))


def min_gap(rho0: PiecewiseConstant, y0):
    xs = sorted(set(rho0.breakpoints) | {Q(y0)})
    return min(b - a for a, b in zip(xs, xs[1:]))


def tangent_oracle(rho0, y0, mesh, params, T, xi, xi_b, eps=None) -> TangentOracleReport:
    """Compare the distance between a run and its eps-shifted copy with eps times
    the weighted norm of the propagated shifts, at t=0 and at T."""
    rho0 = rho0.merged()
    if eps is None:
        eps = Fraction(1, 2**20) * min_gap(rho0, y0)
    base = simulate(rho0, y0, mesh, params, T)
    moved = PiecewiseConstant([x + eps * s for x, s in zip(rho0.breakpoints, xi)], rho0.values)
    other = simulate(moved, y0 + eps * xi_b, mesh, params, T)
    stable = base.class_sequence() == other.class_sequence()
    s0 = attach_shifts(base, xi, xi_b)
    sT = propagate_all(s0, base.events)
    window = base.window
    d_T = l1_distance(base.final_profile, other.final_profile, window) + abs(base.y_final - other.y_final)
    d_0 = l1_distance(rho0, moved, window) + abs(eps * xi_b)
    ns_term = abs(params.ns_jump * sT.xi_b) if base.ns_final else Fraction(0)
    return TangentOracleReport(eps, stable, d_T, weighted_norm(sT), d_0, weighted_norm(s0), base.ns_final, ns_term)


# ---------------------------------------------------------------------------
# convergence


@dataclass
class ConvergenceRow:
    n: int
    events: int
    to_oracle: float
    to_next: float | None


def convergence_study(rho0, y0, params, T, levels, cells=4096, window=None):
    """Engine at each mesh level versus a fine Godunov solution, plus the
    distance between consecutive levels."""
    levels = sorted(levels)
    if len(levels) < 2:
        raise ConfigError("need at least two mesh levels")
    if window is None:
        xs = list(rho0.breakpoints) + [Q(y0)]
        window = (min(xs) - 1, max(xs) + 1)
    oracle = godunov_reference(rho0, y0, params, T, window, cells)
    runs = []
    for n in levels:
        mesh = build_mesh(n, params)
        runs.append(simulate(quantize(rho0, mesh), y0, mesh, params, T))
    rows = []
    for i, (n, r) in enumerate(zip(levels, runs)):
        to_oracle = float(l1_distance(r.final_profile, oracle.profile, window))
        to_next = None
        if i + 1 < len(runs):
            to_next = float(l1_distance(r.final_profile, runs[i + 1].final_profile, window))
        rows.append(ConvergenceRow(n, len(r.events), to_oracle, to_next))
    return rows
