"""Running the recursion, trajectory containers and the telescoping checks."""

from __future__ import annotations

import csv
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterator, Sequence

import numba
import numpy as np

from .arith import frac_exact
from .core import Modulator, RuleKind, binomial_shift_vector, lower_ones_power
from .errors import DivergenceError, LengthError

DEFAULT_BLOWUP = 1e6
DEFAULT_BURN_IN = 1000
DEFAULT_CHUNK = 1 << 21


@numba.njit(cache=True, nogil=True)
def _kernel(alpha, b0, b1, levels, mode, x, u0, steps, bound, states, symbols):
    # mode: 0 linear, 1 clamped, 2 ideal. Returns failing step or -1.
    m = u0.shape[0]
    v = u0.copy()
    c = np.empty(m)
    for i in range(m):
        states[0, i] = v[i]
    for n in range(steps):
        acc = 0.0
        for i in range(m):
            acc += v[i]
            c[i] = acc
        if mode == 2:
            q = math.floor(acc + x + 0.5)
            # settle q on the float expression actually stored as u_m
            while c[m - 1] + (x - q) >= 0.5:
                q += 1.0
            while c[m - 1] + (x - q) < -0.5:
                q -= 1.0
        else:
            s = alpha[0] * x + b0
            for i in range(m):
                s += alpha[i + 1] * v[i]
            q = math.floor(s) + b1
            if mode == 1:
                if q <= levels[0]:
                    q = levels[0]
                elif q >= levels[levels.shape[0] - 1]:
                    q = levels[levels.shape[0] - 1]
                else:
                    j = levels.shape[0] - 1
                    while levels[j] > q:
                        j -= 1
                    q = levels[j]
        d = x - q
        norm = 0.0
        for i in range(m):
            v[i] = c[i] + d
            states[n + 1, i] = v[i]
            a = abs(v[i])
            if a > norm:
                norm = a
        symbols[n] = np.int64(q)
        if not norm <= bound:
            return n + 1
    return -1


def _rule_arrays(mod: Modulator):
    alpha, b0, b1 = mod.rule.linear_form(mod.order)
    mode = {RuleKind.LINEAR: 0, RuleKind.CLAMPED_LINEAR: 1, RuleKind.IDEAL: 2}[mod.rule.kind]
    levels = np.asarray(mod.rule.levels or (0,), dtype=float)
    return np.ascontiguousarray(alpha), float(b0), float(b1), levels, mode


def _simulate_block(mod: Modulator, u0: np.ndarray, steps: int, bound: float, offset: int = 0):
    states = np.empty((steps + 1, mod.order))
    symbols = np.empty(steps, dtype=np.int64)
    alpha, b0, b1, levels, mode = _rule_arrays(mod)
    fail = _kernel(alpha, b0, b1, levels, mode, mod.x, u0, steps, bound, states, symbols)
    if fail >= 0:
        raise DivergenceError(offset + fail, float(np.max(np.abs(states[fail]))), bound)
    return states, symbols


def _initial_state(mod: Modulator, u0) -> np.ndarray:
    if u0 is None:
        return np.zeros(mod.order)
    u0 = np.array(u0, dtype=float).reshape(-1)
    if u0.shape != (mod.order,):
        raise ValueError(f"u0 must have {mod.order} entries")
    return u0


@dataclass(frozen=True)
class Trajectory:
    """States u[0..N] (shape (N+1, m)) and symbols q[1..N] (``symbols[n-1] = q[n]``)."""

    modulator: Modulator
    states: np.ndarray
    symbols: np.ndarray

    @property
    def steps(self) -> int:
        return len(self.symbols)

    @property
    def order(self) -> int:
        return self.modulator.order

    def coordinate(self, j: int) -> np.ndarray:
        """u_j[0..N] for 1 <= j <= m."""
        return self.states[:, j - 1]

    def to_csv(self, path, comment: str | None = None) -> None:
        m = self.order
        with open(path, "w", newline="") as fh:
            if comment:
                fh.write(f"# {comment}\n")
            w = csv.writer(fh)
            w.writerow(["n", *(f"u_{j}" for j in range(1, m + 1)), "q"])
            for n in range(1, self.steps + 1):
                w.writerow([n, *(repr(float(u)) for u in self.states[n]), int(self.symbols[n - 1])])


def run(mod: Modulator, u0=None, steps: int = 0, blowup: float = DEFAULT_BLOWUP) -> Trajectory:
    """Iterate the modulator ``steps`` times from ``u0`` (default: the origin).

    Raises :class:`DivergenceError` as soon as the sup-norm of the state
    exceeds ``blowup``. A run that finishes only shows that no divergence
    happened within ``steps``; it says nothing definitive about stability.
    """
    if steps < 0:
        raise ValueError("steps must be >= 0")
    states, symbols = _simulate_block(mod, _initial_state(mod, u0), int(steps), blowup)
    return Trajectory(mod, states, symbols)


def iter_states(
    mod: Modulator,
    u0=None,
    steps: int = 0,
    burn_in: int = 0,
    chunk: int = DEFAULT_CHUNK,
    blowup: float = DEFAULT_BLOWUP,
) -> Iterator[np.ndarray]:
    """Yield u[burn_in..steps] in chunks without holding the whole run in memory."""
    u = _initial_state(mod, u0)
    done = 0
    if burn_in == 0:
        yield u[None, :].copy()
    while done < steps:
        n = min(chunk, steps - done)
        states, _ = _simulate_block(mod, u, n, blowup, offset=done)
        lo = max(0, burn_in - done)  # states[i] is u[done + i]
        if lo <= n:
            yield states[max(lo, 1):]
        u = states[-1].copy()
        done += n


def run_many(mods: Sequence[Modulator], u0s=None, steps: int = 0, threads: int = 1, blowup: float = DEFAULT_BLOWUP):
    """Run independent trajectories; output order follows input order."""
    u0s = [None] * len(mods) if u0s is None else list(u0s)
    if threads <= 1:
        return [run(m, u, steps, blowup) for m, u in zip(mods, u0s)]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(lambda a: run(a[0], a[1], steps, blowup), zip(mods, u0s)))


def check_difference_identity(traj: Trajectory, j: int) -> float:
    """max_n |(x - q[n]) - (Delta^j u_j)[n]| over n = j..N."""
    if not 1 <= j <= traj.order:
        raise ValueError(f"j must be in 1..{traj.order}")
    if traj.steps < j:
        raise IndexError(f"trajectory of {traj.steps} steps is too short for Delta^{j}")
    du = np.diff(traj.coordinate(j), n=j)  # indices n = j..N
    lhs = traj.modulator.x - traj.symbols[j - 1 :].astype(float)
    return float(np.max(np.abs(lhs - du)))


def closed_form_state(mod: Modulator, u0, tile, n: int) -> np.ndarray:
    """u[n] from <L^n u[0] + x s[n]>_Gamma, projected through a certified tile.

    The torus point is computed in exact rational arithmetic (float inputs are
    exact binary rationals), so nothing but the final rounding enters.
    """
    u0 = _initial_state(mod, u0)
    if n == 0:
        return u0.copy()
    tile.require_single()
    m = mod.order
    Ln = lower_ones_power(m, n)
    s = binomial_shift_vector(m, n)
    xf = Fraction(mod.x)
    uf = [Fraction(float(c)) for c in u0]
    w = [frac_exact(sum(Ln[i][k] * uf[k] for k in range(m)) + xf * s[i]) for i in range(m)]
    return tile.project(np.array([float(c) for c in w]))


def discard_burn_in(states: np.ndarray, burn_in: int = DEFAULT_BURN_IN) -> np.ndarray:
    if burn_in >= len(states):
        raise LengthError(f"burn-in {burn_in} leaves no samples out of {len(states)}")
    return states[burn_in:]
