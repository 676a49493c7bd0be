"""Quantization rules, the modulator map and the skew translation on the torus.

A modulator of order m with constant input x iterates

    u[n] = L u[n-1] + (x - q[n]) 1,     q[n] = Q(x, u[n-1]),

where L is the m x m lower-triangular matrix of ones. Reducing mod 1 removes
the (integer) quantizer output, which leaves the skew translation
v -> L v + x 1 (mod 1).
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Any, Mapping, Sequence

import numpy as np

from .arith import frac


class RuleKind(str, enum.Enum):
    LINEAR = "linear"
    IDEAL = "ideal"
    CLAMPED_LINEAR = "clamped_linear"


@dataclass(frozen=True)
class QuantizerRule:
    """Q(x, v) = floor(alpha_0 x + alpha_1 v_1 + ... + alpha_m v_m + beta_0) + beta_1.

    ``ClampedLinear`` additionally clips the result onto ``levels`` (overload).
    ``Ideal`` ignores the coefficients and picks the integer that leaves the
    last state coordinate in [-1/2, 1/2).
    """

    kind: RuleKind
    alpha: tuple[float, ...] = ()
    beta: tuple[float, float] = (0.0, 0.0)
    levels: tuple[int, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "kind", RuleKind(self.kind))
        object.__setattr__(self, "alpha", tuple(float(a) for a in self.alpha))
        object.__setattr__(self, "beta", tuple(float(b) for b in self.beta))
        object.__setattr__(self, "levels", tuple(int(d) for d in self.levels))
        if len(self.beta) != 2:
            raise ValueError("beta must be a pair (beta_0, beta_1)")
        if self.kind is RuleKind.IDEAL:
            return
        if len(self.alpha) < 2:
            raise ValueError("alpha needs alpha_0 and at least one state coefficient")
        if self.kind is RuleKind.CLAMPED_LINEAR:
            if len(self.levels) < 2:
                raise ValueError("clamped rule needs at least two levels")
            if any(b <= a for a, b in zip(self.levels, self.levels[1:])):
                raise ValueError("levels must be strictly increasing integers")
        elif self.levels:
            raise ValueError("only clamped_linear rules carry levels")

    @classmethod
    def ideal(cls) -> "QuantizerRule":
        return cls(RuleKind.IDEAL)

    @classmethod
    def linear(cls, alpha: Sequence[float], beta=(0.0, 0.0)) -> "QuantizerRule":
        return cls(RuleKind.LINEAR, tuple(alpha), tuple(beta))

    @classmethod
    def clamped(cls, alpha: Sequence[float], beta, levels: Sequence[int]) -> "QuantizerRule":
        return cls(RuleKind.CLAMPED_LINEAR, tuple(alpha), tuple(beta), tuple(levels))

    @property
    def order(self) -> int | None:
        """Order implied by alpha, or None for the ideal rule (any order)."""
        return None if self.kind is RuleKind.IDEAL else len(self.alpha) - 1

    def linear_form(self, m: int) -> tuple[np.ndarray, float, float]:
        """Return (alpha, beta_0, beta_1) with alpha of length m+1.

        The ideal rule is the linear rule floor(x + v_1 + ... + v_m + 1/2).
        """
        if self.kind is RuleKind.IDEAL:
            return np.ones(m + 1), 0.5, 0.0
        if len(self.alpha) != m + 1:
            raise ValueError(f"rule has {len(self.alpha) - 1} state coefficients, modulator order is {m}")
        return np.asarray(self.alpha, dtype=float), self.beta[0], self.beta[1]

    def to_dict(self) -> dict[str, Any]:
        d: dict[str, Any] = {"kind": self.kind.value}
        if self.kind is not RuleKind.IDEAL:
            d["alpha"] = list(self.alpha)
            d["beta"] = list(self.beta)
        if self.levels:
            d["levels"] = list(self.levels)
        return d

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "QuantizerRule":
        unknown = set(d) - {"kind", "alpha", "beta", "levels"}
        if unknown:
            raise ValueError(f"unknown rule fields: {sorted(unknown)}")
        if "kind" not in d:
            raise ValueError("rule needs a 'kind'")
        kind = RuleKind(d["kind"])
        if kind is RuleKind.IDEAL:
            return cls.ideal()
        return cls(kind, tuple(d.get("alpha", ())), tuple(d.get("beta", (0.0, 0.0))), tuple(d.get("levels", ())))

    def to_toml(self) -> str:
        import tomli_w

        return tomli_w.dumps(self.to_dict())

    @classmethod
    def from_toml(cls, text: str) -> "QuantizerRule":
        import tomli

        return cls.from_dict(tomli.loads(text))


@dataclass(frozen=True)
class Modulator:
    order: int
    rule: QuantizerRule
    x: float

    def __post_init__(self):
        if int(self.order) != self.order or self.order < 1:
            raise ValueError("order must be a positive integer")
        object.__setattr__(self, "order", int(self.order))
        object.__setattr__(self, "x", float(self.x))
        self.rule.linear_form(self.order)  # validates coefficient count
        if self.rule.kind is RuleKind.CLAMPED_LINEAR:
            lo, hi = self.rule.levels[0], self.rule.levels[-1]
            if not lo <= self.x <= hi:
                raise ValueError(f"x={self.x} outside the level range [{lo}, {hi}]")


def lower_ones(m: int) -> np.ndarray:
    """The m x m lower-triangular matrix of ones (unit diagonal, det 1)."""
    return np.tril(np.ones((m, m)))


def _clamp_to_levels(q: int, levels: Sequence[int]) -> int:
    if q <= levels[0]:
        return levels[0]
    if q >= levels[-1]:
        return levels[-1]
    # inside the range but between two levels: fall to the lower one
    i = int(np.searchsorted(levels, q, side="right")) - 1
    return int(levels[i])


def eval_quantizer(rule: QuantizerRule, x: float, v) -> int:
    v = np.asarray(v, dtype=float)
    if rule.kind is RuleKind.IDEAL:
        # same float expression the state update uses, so u_m lands in [-1/2, 1/2) bitwise
        c = float(np.cumsum(v)[-1])
        q = math.floor(c + x + 0.5)
        while c + (x - q) >= 0.5:
            q += 1
        while c + (x - q) < -0.5:
            q -= 1
        return int(q)
    alpha, b0, b1 = rule.linear_form(v.shape[-1])
    q = math.floor(alpha[0] * x + float(np.dot(alpha[1:], v)) + b0) + b1
    if q != int(q):
        raise ValueError("beta_1 must be an integer so that outputs are integers")
    q = int(q)
    if rule.kind is RuleKind.CLAMPED_LINEAR:
        q = _clamp_to_levels(q, rule.levels)
    return q


def modulator_map(mod: Modulator, v) -> np.ndarray:
    """One step v -> L v + (x - Q(x, v)) 1."""
    v = np.asarray(v, dtype=float)
    if v.shape != (mod.order,):
        raise ValueError(f"state must have shape ({mod.order},)")
    q = eval_quantizer(mod.rule, mod.x, v)
    return np.cumsum(v) + (mod.x - q)


def skew_map(m: int, x: float, v) -> np.ndarray:
    """One step of the skew translation v -> L v + x 1 (mod 1) on the m-torus."""
    v = np.asarray(v, dtype=float)
    if v.shape[-1] != m:
        raise ValueError(f"torus point must have {m} coordinates")
    return frac(np.cumsum(v, axis=-1) + x)


def binomial_shift_vector(m: int, n: int) -> tuple[int, ...]:
    """s[n] = (sum_{k<n} L^k) 1, whose j-th entry is C(j+n-1, j).

    Entries are exact Python integers; use :func:`shift_vector_float` when a
    float64 copy is needed, which refuses values that would lose precision.
    """
    if n < 0:
        raise ValueError("n must be non-negative")
    return tuple(math.comb(j + n - 1, j) for j in range(1, m + 1))


def shift_vector_float(m: int, n: int) -> np.ndarray:
    s = binomial_shift_vector(m, n)
    if max(s, default=0) > 2**53:
        raise OverflowError(f"s[{n}] has entries beyond 2**53; float64 would lose precision")
    return np.array(s, dtype=float)


def lower_ones_power(m: int, n: int) -> list[list[int]]:
    """Exact integer L^n. Entry (i, j), i >= j, equals C(n + i - j - 1, i - j)."""
    if n == 0:
        return [[int(i == j) for j in range(m)] for i in range(m)]
    return [[math.comb(n + i - j - 1, i - j) if i >= j else 0 for j in range(m)] for i in range(m)]


def rule_bank() -> dict[str, QuantizerRule]:
    """Named second-order rules for experiments.

    The clamped entries are 1-bit rules (levels 0 and 1) with
    Q = floor(x + a v_1 + b v_2 + 1/2). For irrational x away from the ends
    of (0, 1) they stay bounded and their grid multiplicity-1 fraction rises
    towards 1 as the grid is refined (e.g. a=1, b=1/2 at x = golden ratio:
    0.967, 0.984, 0.992 at G = 64, 128, 256 with 4e6 steps), i.e. they look
    like single tiles. Near x = 0 or 1 the same rules need far longer runs.
    ``demos/rule_bank_survey.py`` regenerates the table.
    """
    bank = {"ideal": QuantizerRule.ideal()}
    for a, b in ((1.0, 0.5), (1.5, 0.5), (2.0, 0.5), (2.0, 1.0), (1.5, 1.0)):
        bank[f"onebit_a{a:g}_b{b:g}"] = QuantizerRule.clamped((1.0, a, b), (0.5, 0.0), (0, 1))
    return bank
