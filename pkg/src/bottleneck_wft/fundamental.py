"""Closed-form algebra of the LWR model with a slow moving vehicle (SV).

Flux f(rho) = rho (1 - rho), SV velocity law omega, the constraint level
F_alpha, critical densities and the interaction coefficient psi used when a
wave crosses the SV trajectory.  Everything here is exact over Fractions.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property

import numpy as np

from .rational import Q, sqrt_rational

ZERO = Fraction(0)
ONE = Fraction(1)


class DomainError(ValueError):
    """A density or speed outside its admissible range."""


def _density(rho) -> Fraction:
    rho = Q(rho)
    if rho < 0 or rho > 1:
        raise DomainError(f"density {rho} outside [0, 1]")
    return rho


@dataclass(frozen=True)
class ModelParams:
    """SV maximal speed ``vb`` in (0, 1) and capacity reduction ``alpha`` in (0, 1].

    When ``1 - alpha`` is not the square of a rational the critical densities
    use a 60-digit rational approximation of the square root; their sum is
    still exactly ``rho_star``.  Use :attr:`exact` to tell the two apart.
    """

    vb: Fraction
    alpha: Fraction
    _sqrt: tuple = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        vb, alpha = Q(self.vb), Q(self.alpha)
        if not 0 < vb < 1:
            raise DomainError(f"vb={vb} must lie in (0, 1)")
        if not 0 < alpha <= 1:
            raise DomainError(f"alpha={alpha} must lie in (0, 1]")
        object.__setattr__(self, "vb", vb)
        object.__setattr__(self, "alpha", alpha)
        object.__setattr__(self, "_sqrt", sqrt_rational(1 - alpha))

    @property
    def exact(self) -> bool:
        return self._sqrt[1]

    @property
    def rho_star(self) -> Fraction:
        return 1 - self.vb

    @cached_property
    def rho_check(self) -> Fraction:
        return self.rho_star * (1 - self._sqrt[0]) / 2

    @cached_property
    def rho_hat(self) -> Fraction:
        # rho_star - rho_check rather than the symmetric formula keeps the sum exact
        return self.rho_star - self.rho_check

    @property
    def ns_jump(self) -> Fraction:
        """Signed strength rho_check - rho_hat of the non-classical shock."""
        return self.rho_check - self.rho_hat

    def weight_bound_constant(self, tv) -> float:
        """2 exp(3 TV / rho_star) / rho_star."""
        rs = float(self.rho_star)
        return 2.0 * float(np.exp(3.0 * float(tv) / rs)) / rs


def flux(rho) -> Fraction:
    rho = _density(rho)
    return rho * (1 - rho)


def velocity(rho) -> Fraction:
    return 1 - _density(rho)


def sv_speed(rho, params: ModelParams) -> Fraction:
    """omega(rho): vb up to rho_star, the car speed 1 - rho beyond."""
    rho = _density(rho)
    if rho <= params.rho_star:
        return params.vb
    return 1 - rho


def critical_densities(params: ModelParams) -> tuple[Fraction, Fraction, Fraction]:
    """(rho_check, rho_hat, rho_star): roots of f(rho) = F_alpha(vb) + vb rho, and 1 - vb."""
    return params.rho_check, params.rho_hat, params.rho_star


def constraint_level(sv_dot, params: ModelParams) -> Fraction:
    sv_dot = Q(sv_dot)
    if sv_dot < 0 or sv_dot > 1:
        raise DomainError(f"SV speed {sv_dot} outside [0, 1]")
    return params.alpha / 4 * (1 - sv_dot) ** 2


def front_speed(rho_l, rho_r) -> Fraction:
    """Rankine-Hugoniot speed; for this flux it is 1 - rho_l - rho_r."""
    rho_l, rho_r = _density(rho_l), _density(rho_r)
    if rho_l == rho_r:
        raise DomainError("front speed undefined for equal states")
    return 1 - rho_l - rho_r


def psi(rho_l, rho_r, params: ModelParams) -> Fraction:
    """Weight of the wave shift in the SV shift after a wave crosses the SV.

    Arguments are the left and right states of the crossing wave.
    """
    rho_l, rho_r = _density(rho_l), _density(rho_r)
    rs = params.rho_star
    if rho_r > rs and (rho_l <= params.rho_check or params.rho_hat <= rho_l <= rs):
        return (rho_r - rs) / (rho_l + rho_r - rs)
    if (rho_r > rs and rs <= rho_l <= rho_r) or (rs <= rho_r < rho_l):
        return (rho_r - rho_l) / rho_r
    return ZERO


@dataclass
class PsiBoundReport:
    ok: bool
    n_pairs: int
    min_slack_a: float
    min_slack_b: float
    min_slack_c: float
    violations: list = field(default_factory=list)

    def __str__(self):
        status = "ok" if self.ok else f"{len(self.violations)} violations"
        return (
            f"psi bounds over {self.n_pairs} pairs: {status}; "
            f"slack A={self.min_slack_a:.4g} B={self.min_slack_b:.4g} C={self.min_slack_c:.4g}"
        )


def _psi_array(rl, rr, rs, rc, rh):
    b1 = (rr > rs) & ((rl <= rc) | ((rl >= rh) & (rl <= rs)))
    b2 = ~b1 & (((rr > rs) & (rl >= rs) & (rl <= rr)) | ((rr >= rs) & (rr < rl)))
    out = np.zeros_like(rl)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.where(b1, (rr - rs) / (rl + rr - rs), out)
        out = np.where(b2, (rr - rl) / rr, out)
    return out


def verify_psi_bounds(params: ModelParams, grid_step, tol: float = 1e-12) -> PsiBoundReport:
    """Sweep the admissible (rho_L, rho_R) grid and check the three psi estimates.

    A: |1 - psi| <= 1 + 2/rho*;  B: |psi / (rho_R - rho_L)| <= 2/rho*;
    C (rho_L <= rho_check only): |psi/(rho_R - rho_L)| + |1 - psi| 2/rho* <= 2/rho*.
    The sweep runs in float64; ``tol`` absorbs rounding only.
    """
    step = float(grid_step)
    if step <= 0:
        raise DomainError("grid_step must be positive")
    rs, rc, rh = float(params.rho_star), float(params.rho_check), float(params.rho_hat)
    base = np.arange(0.0, 1.0 + step / 2, step)
    base = np.unique(np.concatenate([base, [rc, rh, rs, 1.0]]))
    rho_r = base[(base > rs) & (base < 1.0)]
    rho_l = base[(base <= rc) | (base >= rh)]
    rl, rr = np.meshgrid(rho_l, rho_r, indexing="ij")
    rl, rr = rl.ravel(), rr.ravel()
    keep = rl != rr
    rl, rr = rl[keep], rr[keep]

    p = _psi_array(rl, rr, rs, rc, rh)
    one_minus = np.abs(1.0 - p)
    ratio = np.abs(p / (rr - rl))
    bound = 2.0 / rs
    slack_a = (1.0 + bound) - one_minus
    slack_b = bound - ratio
    low = rl <= rc
    slack_c = bound - (ratio[low] + one_minus[low] * bound)

    violations = []
    for name, slack, lpool, rpool in (
        ("A", slack_a, rl, rr),
        ("B", slack_b, rl, rr),
        ("C", slack_c, rl[low], rr[low]),
    ):
        for i in np.flatnonzero(slack < -tol)[:20]:
            violations.append((name, float(lpool[i]), float(rpool[i]), float(slack[i])))
    return PsiBoundReport(
        ok=not violations,
        n_pairs=int(rl.size),
        min_slack_a=float(slack_a.min()),
        min_slack_b=float(slack_b.min()),
        min_slack_c=float(slack_c.min()) if slack_c.size else float("inf"),
        violations=violations,
    )
