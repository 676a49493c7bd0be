"""Averaging filters (rectangular, sinc^p / discrete B-spline, ideal low-pass).

FIR filters keep their taps as exact integer numerators over a common
denominator (``M**p`` for sinc^p), so sum(taps) == 1 holds exactly and the
l1 norms of their finite differences are computed without rounding.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Sequence

import numpy as np


@dataclass(frozen=True)
class FiniteSequence:
    """A finitely supported sequence ``values[i] = v[start + i]``.

    ``numerators``/``denominator`` hold the exact rational form when known.
    """

    values: np.ndarray
    start: int = 0
    numerators: tuple[int, ...] | None = None
    denominator: int | None = None

    @property
    def stop(self) -> int:
        return self.start + len(self.values)

    @property
    def exact(self) -> bool:
        return self.numerators is not None

    def l1_norm(self) -> float:
        if self.exact:
            return float(Fraction(sum(abs(a) for a in self.numerators), self.denominator))
        return float(np.sum(np.abs(self.values)))

    def l1_norm_exact(self) -> Fraction:
        if not self.exact:
            raise ValueError("sequence has no exact form")
        return Fraction(sum(abs(a) for a in self.numerators), self.denominator)

    def to_csv(self, path, comment: str | None = None) -> None:
        with open(path, "w", newline="") as fh:
            if comment:
                fh.write(f"# {comment}\n")
            w = csv.writer(fh)
            w.writerow(["n", "phi"])
            for i, v in enumerate(self.values):
                w.writerow([self.start + i, repr(float(v))])


@dataclass(frozen=True)
class Filter(FiniteSequence):
    """Averaging kernel with sum(taps) == 1."""

    label: str = ""
    M: int | None = None
    p: int | None = None

    def __post_init__(self):
        total = sum(self.numerators) if self.exact else None
        if total is not None and total != self.denominator:
            raise ValueError(f"filter {self.label!r} is not normalized: {total}/{self.denominator}")
        if total is None and abs(float(np.sum(self.values)) - 1.0) > 1e-12:
            raise ValueError(f"filter {self.label!r} is not normalized")

    @property
    def taps(self) -> np.ndarray:
        return self.values


def _from_numerators(nums: Sequence[int], den: int, start: int = 0, **kw) -> Filter:
    nums = tuple(int(a) for a in nums)
    values = np.array([a / den for a in nums])
    return Filter(values, start, nums, den, **kw)


def rect(M: int) -> Filter:
    """r_M[n] = 1/M for 0 <= n < M."""
    if int(M) != M or M < 1:
        raise ValueError(f"M must be a positive integer, got {M!r}")
    M = int(M)
    return _from_numerators([1] * M, M, label=f"rect_{M}", M=M, p=1)


def _int_convolve(a: Sequence[int], b: Sequence[int]) -> list[int]:
    out = [0] * (len(a) + len(b) - 1)
    for i, ai in enumerate(a):
        if ai:
            for j, bj in enumerate(b):
                out[i + j] += ai * bj
    return out


def sinc_p(M: int, p: int) -> Filter:
    """p-fold self-convolution of ``rect(M)``: a discrete B-spline of degree p-1."""
    if int(p) != p or p < 1:
        raise ValueError(f"p must be a positive integer, got {p!r}")
    r = rect(M)
    nums = [1] * r.M
    for _ in range(int(p) - 1):
        # convolving with a run of ones is a sliding-window sum
        c = np.concatenate(([0], np.cumsum(np.array(nums, dtype=object))))
        L = len(nums) + r.M - 1
        nums = [int(c[min(i + 1, len(nums))] - c[max(i + 1 - r.M, 0)]) for i in range(L)]
    return _from_numerators(nums, r.M ** int(p), label=f"sinc{p}_{M}", M=r.M, p=int(p))


def convolve(a: FiniteSequence, b: FiniteSequence) -> FiniteSequence:
    if a.exact and b.exact:
        nums = _int_convolve(a.numerators, b.numerators)
        den = a.denominator * b.denominator
        return FiniteSequence(np.array([n / den for n in nums]), a.start + b.start, tuple(nums), den)
    return FiniteSequence(np.convolve(a.values, b.values), a.start + b.start)


def as_sequence(seq) -> FiniteSequence:
    if isinstance(seq, FiniteSequence):
        return seq
    return FiniteSequence(np.asarray(seq, dtype=float), 0)


def difference(seq, j: int) -> FiniteSequence:
    """Delta^j, with (Delta v)[n] = v[n] - v[n-1]. Support grows by j on the right."""
    if j < 0:
        raise ValueError("j must be >= 0")
    s = as_sequence(seq)
    if s.exact:
        nums = list(s.numerators)
        for _ in range(j):
            nums = [a - b for a, b in zip(nums + [0], [0] + nums)]
        return FiniteSequence(np.array([n / s.denominator for n in nums]), s.start, tuple(nums), s.denominator)
    vals = s.values
    for _ in range(j):
        vals = np.concatenate((vals, [0.0])) - np.concatenate(([0.0], vals))
    return FiniteSequence(vals, s.start)


def transfer(filt: FiniteSequence, xi) -> np.ndarray:
    """Phi(xi) = sum_n phi[n] exp(2 pi i n xi), evaluated at every xi (mod 1)."""
    xi = np.asarray(xi, dtype=float)
    flat = xi.reshape(-1)
    n = np.arange(filt.start, filt.stop)
    out = np.empty(flat.shape, dtype=complex)
    block = max(1, (1 << 22) // max(1, len(n)))
    for i in range(0, len(flat), block):
        ph = np.exp(2j * np.pi * np.outer(flat[i : i + block], n))
        out[i : i + block] = ph @ filt.values
    return out.reshape(xi.shape)


def sinc_transfer(M: int, p: int, xi) -> np.ndarray:
    """Closed form Sinc^p_M(xi) = (sin(pi M xi) / (M sin(pi xi)) e^{i pi (M-1) xi})^p."""
    xi = np.asarray(xi, dtype=float)
    s = np.sin(np.pi * xi)
    with np.errstate(invalid="ignore", divide="ignore"):
        ratio = np.where(np.abs(s) < 1e-300, 1.0, np.sin(np.pi * M * xi) / (M * s))
    # at integer xi the limit is (+-1)^{M-1}; keep sign consistent with the phase factor
    ratio = np.where(np.abs(s) < 1e-300, np.cos(np.pi * (M - 1) * xi), ratio)
    return (ratio * np.exp(1j * np.pi * (M - 1) * xi)) ** p


def sinc_abs(M: int, p: int, xi) -> np.ndarray:
    """|Sinc^p_M(xi)|, with value 1 at integer xi."""
    xi = np.asarray(xi, dtype=float)
    s = np.sin(np.pi * xi)
    with np.errstate(invalid="ignore", divide="ignore"):
        r = np.abs(np.sin(np.pi * M * xi) / (M * s))
    return np.where(np.abs(s) < 1e-300, 1.0, r) ** p


@dataclass(frozen=True)
class TransferFunction:
    """Frequency response xi -> Phi(xi): from an FIR filter, or the ideal low-pass."""

    kind: str
    M: int
    evaluate: Callable[[np.ndarray], np.ndarray] = field(repr=False)
    filter: Filter | None = field(default=None, repr=False)
    p: int | None = None

    def __call__(self, xi):
        return self.evaluate(np.asarray(xi, dtype=float))

    @property
    def cutoff(self) -> float | None:
        """Half-width of the pass band for the ideal low-pass, else None."""
        return 1.0 / self.M if self.kind == "ideal" else None


def fir_transfer(filt: Filter) -> TransferFunction:
    if filt.p is not None and filt.M is not None and filt.start == 0:
        M, p = filt.M, filt.p
        return TransferFunction("fir", M, lambda xi: sinc_transfer(M, p, xi), filt, p)
    return TransferFunction("fir", filt.M or len(filt.values), lambda xi: transfer(filt, xi), filt)


def ideal_lowpass(M: int) -> TransferFunction:
    """Phi(xi) = 1 for |xi| <= 1/M (xi taken mod 1 in [-1/2, 1/2)), else 0."""
    if M < 2:
        raise ValueError("ideal low-pass needs M >= 2")

    def ev(xi):
        t = xi - np.floor(xi + 0.5)
        return np.where(np.abs(t) <= 1.0 / M, 1.0, 0.0).astype(complex)

    return TransferFunction("ideal", int(M), ev)


def lowpass_majorant_constant(M: int, p: int, samples: int = 4097) -> float:
    """Smallest C with |Phi^id_M| <= C |Sinc^p_{M/2}| on the torus.

    Outside the pass band the left side vanishes, so C is the largest value
    of 1/|Sinc^p_{M/2}| on [-1/M, 1/M]. M must be even.
    """
    if M % 2:
        raise ValueError("M must be even")
    xi = np.linspace(-1.0 / M, 1.0 / M, samples)
    return float(np.max(1.0 / sinc_abs(M // 2, p, xi)))


def difference_norm_constant(m: int, M: int) -> float:
    """||Delta^m sinc^{m+1}_M||_1 * M^m (exact arithmetic, then rounded)."""
    d = difference(sinc_p(M, m + 1), m)
    return float(d.l1_norm_exact() * M**m)
