"""Fractional parts, nearest-integer distance and continued fractions.

Floating-point inputs are converted to their exact binary rational value with
:class:`fractions.Fraction` before any continued-fraction work, so convergents
never drift no matter how large the denominators get.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from numbers import Rational, Real

import numpy as np

from .errors import RationalError

#: Rationals with a denominator up to this bound are refused by spectral code.
RATIONAL_GUARD_DENOMINATOR = 10**6

# A float within this many ulps of p/q (q <= guard) is treated as that rational.
_GUARD_ULPS = 64


def frac(t):
    """Fractional part <t> in [0, 1). Works on scalars and arrays."""
    t = np.asarray(t, dtype=float)
    r = t - np.floor(t)
    # tiny negative t rounds t - floor(t) up to exactly 1.0
    r = np.where(r >= 1.0, 0.0, r)
    return r[()] if r.ndim == 0 else r


def frac0(t):
    """Centered fractional part <t>_0 = <t + 1/2> - 1/2, in [-1/2, 1/2).

    ``t - frac0(t)`` is an exact integer in floating point for |t| < 2**52.
    """
    t = np.asarray(t, dtype=float)
    k = np.round(t)
    r = t - k
    r = np.where(r >= 0.5, r - 1.0, r)
    return r[()] if r.ndim == 0 else r


def nearest_int_distance(t):
    """Distance ||t|| from t to the nearest integer, in [0, 1/2]."""
    return np.abs(frac0(t))


def frac_exact(t: Fraction) -> Fraction:
    return t - math.floor(t)


def nearest_int_distance_exact(t: Fraction) -> Fraction:
    f = frac_exact(Fraction(t))
    return min(f, 1 - f)


def as_fraction(x) -> Fraction:
    """Exact rational value of ``x`` (floats map to their binary expansion)."""
    if isinstance(x, Fraction):
        return x
    if isinstance(x, (int, np.integer)):
        return Fraction(int(x))
    return Fraction(float(x))


@dataclass(frozen=True)
class ContinuedFraction:
    """Partial quotients ``a_0; a_1, a_2, ...`` and convergents ``p_k/q_k``."""

    quotients: tuple[int, ...]
    convergents: tuple[tuple[int, int], ...]
    value: Fraction
    terminated: bool

    @property
    def denominators(self) -> tuple[int, ...]:
        return tuple(q for _, q in self.convergents)


def continued_fraction(x, max_terms: int | None = None, max_denominator: int | None = None) -> ContinuedFraction:
    """Expand ``x`` exactly.

    Expansion stops when the value is exhausted (``terminated=True``), after
    ``max_terms`` quotients, or before the first convergent whose denominator
    exceeds ``max_denominator``.
    """
    value = as_fraction(x)
    quotients: list[int] = []
    convergents: list[tuple[int, int]] = []
    p_prev, q_prev, p, q = 0, 1, 1, 0
    y = value
    terminated = False
    while max_terms is None or len(quotients) < max_terms:
        a = math.floor(y)
        p_next, q_next = a * p + p_prev, a * q + q_prev
        if max_denominator is not None and q_next > max_denominator:
            break
        quotients.append(a)
        convergents.append((p_next, q_next))
        p_prev, q_prev, p, q = p, q, p_next, q_next
        rem = y - a
        if rem == 0:
            terminated = True
            break
        y = 1 / rem
    return ContinuedFraction(tuple(quotients), tuple(convergents), value, terminated)


def rational_approximation(x, max_denominator: int = RATIONAL_GUARD_DENOMINATOR) -> Fraction | None:
    """Return p/q (q <= max_denominator) that ``x`` is numerically equal to, if any.

    Exact rationals (``Fraction``/``int``) must match exactly; floats may sit
    within a few dozen ulps of p/q, which is how rationals look once rounded.
    """
    value = as_fraction(x)
    exact = isinstance(x, (Rational, int, np.integer)) and not isinstance(x, (float, np.floating))
    tol = Fraction(0) if exact else Fraction(_GUARD_ULPS * math.ulp(max(1.0, abs(float(x)))))
    cf = continued_fraction(value, max_denominator=max_denominator)
    for p, q in cf.convergents:
        if abs(value - Fraction(p, q)) <= tol:
            return Fraction(p, q)
    return None


def is_irrational_like(x, max_denominator: int = RATIONAL_GUARD_DENOMINATOR) -> bool:
    return rational_approximation(x, max_denominator) is None


def require_irrational(x, max_denominator: int = RATIONAL_GUARD_DENOMINATOR) -> None:
    """Raise :class:`RationalError` if ``x`` is (numerically) a rational with small denominator."""
    r = rational_approximation(x, max_denominator)
    if r is not None:
        raise RationalError(f"x={x!r} equals the rational {r} (denominator <= {max_denominator})")


def diophantine_type_estimate(x, n_max: int) -> float:
    """Finite-data lower estimate of the Diophantine type of ``x``.

    Uses the convergent denominators ``2 <= q_k <= n_max``. For each
    k from the fifth on, a line ``log(1/||q x||) ~ eta log q + c`` is fitted
    to the convergents up to q_k and the normalized excess
    ``(log(1/||q_k x||) - c) / log q_k`` of the newest one is recorded. The
    intercept absorbs the constant in ``||q x|| ~ c/q`` that otherwise
    inflates the estimate at small q. The running maximum makes the estimate
    non-decreasing in ``n_max``. With fewer than five convergents the plain
    ratio ``log(1/||q_k x||) / log q_k`` is used.

    This is an estimate from finite data: no finite computation certifies a
    type, and large early partial quotients inflate the value.
    """
    require_irrational(x)
    value = as_fraction(x)
    cf = continued_fraction(value, max_denominator=int(n_max))
    logs_q, logs_inv = [], []
    for _, q in cf.convergents:
        if q < 2:
            continue
        d = nearest_int_distance_exact(value * q)
        if d == 0:
            break
        logs_q.append(math.log(q))
        # log of a Fraction that may underflow a float
        logs_inv.append(math.log(d.denominator) - math.log(d.numerator))
    if not logs_q:
        raise ValueError(f"no convergent denominators in [2, {n_max}]")
    xs, ys = np.array(logs_q), np.array(logs_inv)
    if len(xs) < _MIN_FIT:
        return float(np.max(ys / xs))
    best = -np.inf
    for j in range(_MIN_FIT, len(xs) + 1):
        _, intercept = np.polyfit(xs[:j], ys[:j], 1)
        best = max(best, float((ys[j - 1] - intercept) / xs[j - 1]))
    return best


_MIN_FIT = 5


def reciprocal_distance_sum(x, n: int) -> float:
    """S(n) = sum_{k=1}^{n} 1/||k x||, whose growth exponent tracks the type of x."""
    k = np.arange(1, n + 1, dtype=float)
    return float(np.sum(1.0 / nearest_int_distance(k * float(x))))


GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0
SQRT2_MINUS_1 = math.sqrt(2.0) - 1.0
