"""Parsing and formatting helpers for exact rationals."""

from decimal import Decimal, localcontext
from fractions import Fraction
from math import isqrt

SQRT_DIGITS = 60


def Q(value) -> Fraction:
    """Coerce ints, decimal strings, "p/q" strings and floats to a Fraction.

    Floats go through their shortest repr, so ``Q(0.2) == Fraction(1, 5)``.
    """
    if isinstance(value, Fraction):
        return value
    if isinstance(value, bool):
        raise TypeError("booleans are not densities")
    if isinstance(value, int):
        return Fraction(value)
    if isinstance(value, float):
        return Fraction(repr(value))
    if isinstance(value, str):
        return Fraction(value.strip())
    if isinstance(value, Decimal):
        return Fraction(value)
    raise TypeError(f"cannot interpret {value!r} as a rational")


def fmt(q: Fraction) -> str:
    """Render as "p/q" (or "p" for integers)."""
    q = Fraction(q)
    if q.denominator == 1:
        return str(q.numerator)
    return f"{q.numerator}/{q.denominator}"


def exact_sqrt(q: Fraction):
    """Return sqrt(q) as a Fraction when q is a perfect rational square, else None."""
    if q < 0:
        raise ValueError("negative argument")
    p, d = q.numerator, q.denominator
    rp, rd = isqrt(p), isqrt(d)
    if rp * rp == p and rd * rd == d:
        return Fraction(rp, rd)
    return None


def sqrt_rational(q: Fraction) -> tuple[Fraction, bool]:
    """sqrt(q) as (value, exact). Inexact values carry ~60 significant digits."""
    r = exact_sqrt(q)
    if r is not None:
        return r, True
    with localcontext() as ctx:
        ctx.prec = SQRT_DIGITS
        s = (Decimal(q.numerator) / Decimal(q.denominator)).sqrt()
    return Fraction(s), False
