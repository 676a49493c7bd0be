"""Autocorrelation of the state sequence and its spectral measure.

The autocorrelation rho_u is the Fourier sequence of a non-negative measure
mu = mu_pp + mu_ac. The pure-point part sits at the points n x (mod 1) with
masses |c_n|^2, c_n the Fourier coefficients of G-bar. For second-order
schemes with a v_2-connected tile the continuous part has coefficients

    rho_ac[k] = int_T A(k v - lam(v - x/2 + k x/2) + lam(v - x/2 - k x/2)) dv,

with A(t) = (<t>^2 - <t> + 1/6)/2 the autocorrelation of the centred sawtooth.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.linalg import eigvalsh, toeplitz

from .arith import frac, require_irrational
from .errors import OrderError, QuadratureError, UnderSampledError
from .simulate import DEFAULT_BURN_IN, Trajectory
from .tiling import MidpointFunction

MASS_THRESHOLD = 1e-12


def sawtooth_autocorr(t) -> np.ndarray:
    """A(t) = (<t>^2 - <t> + 1/6)/2, the autocorrelation of <.>_0 at lag t."""
    f = frac(np.asarray(t, dtype=float))
    return 0.5 * (f * f - f + 1.0 / 6.0)


@dataclass
class AutocorrEstimate:
    """rho[k] for k = 0..K_max (rho[-k] = rho[k]); pp/ac parts when computed."""

    rho: np.ndarray
    N: int
    K_max: int
    rho_pp: np.ndarray | None = None
    rho_ac: np.ndarray | None = None

    def symmetric(self, which: str = "rho") -> np.ndarray:
        """Values for k = -K_max..K_max."""
        r = getattr(self, which)
        return np.concatenate((r[:0:-1], r))

    def stat_error(self) -> float:
        """Rough one-sigma error of each lag, rho[0] / sqrt(N)."""
        return float(abs(self.rho[0]) / np.sqrt(self.N))

    def decomposition_residual(self) -> float:
        if self.rho_pp is None or self.rho_ac is None:
            raise ValueError("pp and ac parts not attached")
        return float(np.max(np.abs(self.rho - self.rho_pp - self.rho_ac)))


def autocorrelation(source, K_max: int, burn_in: int = DEFAULT_BURN_IN, coordinate: int | None = None) -> AutocorrEstimate:
    """rho[k] = (1/N) sum_n u[n] u[n+k] over the post-burn-in samples.

    ``source`` is a Trajectory (x must pass the irrationality guard; the last
    state coordinate is used unless ``coordinate`` says otherwise) or a 1-d
    array taken as-is. The 1/N normalization keeps the Toeplitz matrix
    positive semidefinite. The statistical error is O(N^-1/2).
    """
    if isinstance(source, Trajectory):
        require_irrational(source.modulator.x)
        j = source.order if coordinate is None else coordinate
        u = source.coordinate(j)[burn_in:]
    else:
        u = np.asarray(source, dtype=float).reshape(-1)
    N = len(u)
    if K_max < 0:
        raise ValueError("K_max must be >= 0")
    if N < 100 * max(K_max, 1):
        raise UnderSampledError(f"{N} samples is fewer than 100 * K_max = {100 * K_max}")
    rho = np.array([np.dot(u[k:], u[: N - k]) for k in range(K_max + 1)]) / N
    return AutocorrEstimate(rho, N, K_max)


@dataclass(frozen=True)
class Atom:
    n: int
    location: float
    mass: float


@dataclass
class PurePointPart:
    rho_pp: np.ndarray
    atoms: list[Atom]
    x: float

    def total_mass(self) -> float:
        return float(sum(a.mass for a in self.atoms))


def pure_point_part(mid: MidpointFunction, x: float, K_max: int, threshold: float = MASS_THRESHOLD) -> PurePointPart:
    """Atoms at <n x> with mass |c_n|^2 and rho_pp[k] = sum mass * exp(2 pi i k n x)."""
    require_irrational(x)
    n = np.arange(-mid.n_fourier, mid.n_fourier + 1)
    mass = np.abs(mid.fourier) ** 2
    keep = mass >= threshold
    atoms = [Atom(int(j), float(frac(j * x)), float(w)) for j, w in zip(n[keep], mass[keep])]
    k = np.arange(K_max + 1)
    rho = np.cos(2 * np.pi * np.outer(k, n[keep] * x)) @ mass[keep] if keep.any() else np.zeros(K_max + 1)
    return PurePointPart(rho, atoms, float(x))


def ac_part_order2(mid: MidpointFunction, x: float, K_max: int, Q: int = 1 << 16, tol: float = 1e-6) -> np.ndarray:
    """rho_ac[k], k = 0..K_max, by the midpoint rule on Q nodes (checked against Q/2).

    The integrand has kinks, so the rule is O((k / Q)^2) accurate; a
    disagreement above ``tol`` between Q/2 and Q raises QuadratureError.
    """
    if mid.order != 2:
        raise OrderError("the continuous-part integral formula needs m = 2")
    require_irrational(x)

    def rule(q):
        v = (np.arange(q) + 0.5) / q
        out = np.empty(K_max + 1)
        for k in range(K_max + 1):
            arg = k * v - mid.lam_at(v - x / 2 + k * x / 2) + mid.lam_at(v - x / 2 - k * x / 2)
            out[k] = sawtooth_autocorr(arg).mean()
        return out

    fine = rule(Q)
    coarse = rule(Q // 2)
    if np.max(np.abs(fine - coarse)) > tol:
        raise QuadratureError(f"midpoint rule not settled at Q={Q}: {np.max(np.abs(fine - coarse)):.2e}")
    return fine


def fejer_weights(K_max: int) -> np.ndarray:
    k = np.arange(K_max + 1)
    return 1.0 - k / K_max if K_max > 0 else np.ones(1)


@dataclass
class DensityEstimate:
    xi: np.ndarray
    s: np.ndarray
    s0_windowed: float
    s0_raw: float
    coefficients: np.ndarray
    weights: np.ndarray

    def __call__(self, xi) -> np.ndarray:
        k = np.arange(1, len(self.coefficients))
        xi = np.asarray(xi, dtype=float)
        c = self.weights[1:] * self.coefficients[1:]
        return self.coefficients[0] * self.weights[0] + 2 * np.cos(2 * np.pi * np.multiply.outer(xi, k)) @ c


def density_estimate(rho_ac, n_grid: int = 1024, window: str = "fejer") -> DensityEstimate:
    """s(xi) = sum_{|k|<=K} w_k rho_ac[k] e^{2 pi i k xi} on a uniform grid of [-1/2, 1/2).

    Fejer weights w_k = 1 - |k|/K by default (``window="none"`` for the raw
    partial sum). s(0) is reported both windowed and as the raw coefficient sum.
    """
    c = np.asarray(rho_ac, dtype=float)
    K = len(c) - 1
    if window == "fejer":
        w = fejer_weights(K)
    elif window == "none":
        w = np.ones(K + 1)
    else:
        raise ValueError(f"unknown window {window!r}")
    est = DensityEstimate(np.array([]), np.array([]), 0.0, float(c[0] + 2 * c[1:].sum()), c, w)
    xi = np.arange(n_grid) / n_grid - 0.5
    est.xi, est.s = xi, est(xi)
    est.s0_windowed = float(est(0.0))
    return est


@dataclass
class SpectralMeasure:
    """mu = sum of atoms + s(xi) d xi for a modulator of order m."""

    atoms: list[Atom]
    density: DensityEstimate | None
    m: int

    def atom_arrays(self) -> tuple[np.ndarray, np.ndarray]:
        return (np.array([a.location for a in self.atoms]), np.array([a.mass for a in self.atoms]))

    def total_mass(self) -> float:
        ac = 0.0 if self.density is None else float(self.density.coefficients[0])
        return float(sum(a.mass for a in self.atoms)) + ac

    def export_atoms_csv(self, path, comment: str | None = None) -> None:
        with open(path, "w", newline="") as fh:
            if comment:
                fh.write(f"# {comment}\n")
            w = csv.writer(fh)
            w.writerow(["n", "location", "mass"])
            for a in self.atoms:
                w.writerow([a.n, repr(a.location), repr(a.mass)])

    def export_density_csv(self, path, comment: str | None = None) -> None:
        with open(path, "w", newline="") as fh:
            if comment:
                fh.write(f"# {comment}\n")
            w = csv.writer(fh)
            w.writerow(["xi", "s"])
            if self.density is not None:
                for a, b in zip(self.density.xi, self.density.s):
                    w.writerow([repr(float(a)), repr(float(b))])


def spectral_measure(mid: MidpointFunction, x: float, K_max: int, n_grid: int = 1024, window: str = "fejer") -> tuple[SpectralMeasure, AutocorrEstimate]:
    """Assemble mu from a midpoint function: atoms always, density for m = 2.

    For m = 1, G-bar is all of G_Gamma and mu has no continuous part. Other
    orders are not covered by the integral formula and get OrderError.
    """
    pp = pure_point_part(mid, x, K_max)
    if mid.order == 1:
        rho_ac = np.zeros(K_max + 1)
        dens = None
    elif mid.order == 2:
        rho_ac = ac_part_order2(mid, x, K_max)
        dens = density_estimate(rho_ac, n_grid, window)
    else:
        raise OrderError("spectral measure assembly is implemented for m = 1 and m = 2")
    est = AutocorrEstimate(pp.rho_pp + rho_ac, 0, K_max, pp.rho_pp, rho_ac)
    return SpectralMeasure(pp.atoms, dens, mid.order), est


def toeplitz_min_eigenvalue(rho) -> float:
    """Smallest eigenvalue of the Toeplitz matrix [rho[|i-j|]]; >= 0 for a true autocorrelation."""
    return float(eigvalsh(toeplitz(np.asarray(rho, dtype=float)))[0])


def total_variation(samples) -> float:
    """Total variation over one period of periodic samples."""
    s = np.asarray(samples, dtype=float)
    return float(np.sum(np.abs(np.diff(np.concatenate((s, s[:1]))))))


def corollary_bound_tv(mid: MidpointFunction, k) -> np.ndarray:
    """|rho_ac[k]| <= ||lam||_TV / (6 |k|) for m = 2 (k != 0)."""
    return total_variation(mid.lam) / (6.0 * np.abs(np.asarray(k, dtype=float)))


# decay lemma --------------------------------------------------------------


@dataclass(frozen=True)
class ZeroMeanFunction:
    """A zero-mean function on the torus together with its A, sup and L2 norms."""

    evaluate: Callable[[np.ndarray], np.ndarray] = field(repr=False)
    a_norm: float
    sup_norm: float
    l2_norm: float
    label: str = ""

    @classmethod
    def sawtooth_autocorrelation(cls) -> "ZeroMeanFunction":
        # A(t) = sum_{n != 0} e^{2 pi i n t} / (4 pi^2 n^2): all norms in closed form
        return cls(sawtooth_autocorr, 1.0 / 12, 1.0 / 12, 1.0 / (12 * np.sqrt(5.0)), "A")

    @classmethod
    def from_fourier(cls, coeffs: dict[int, complex], label: str = "") -> "ZeroMeanFunction":
        """Real trigonometric polynomial sum_n c_n e^{2 pi i n t}; needs c_{-n} = conj(c_n), c_0 = 0."""
        if abs(coeffs.get(0, 0)) > 0:
            raise ValueError("f must have zero mean")
        for n, c in coeffs.items():
            if abs(coeffs.get(-n, 0) - np.conj(c)) > 1e-14:
                raise ValueError("coefficients are not those of a real function")
        ns = np.array(list(coeffs), dtype=float)
        cs = np.array(list(coeffs.values()), dtype=complex)

        def ev(t):
            t = np.asarray(t, dtype=float)
            return np.real(np.exp(2j * np.pi * np.multiply.outer(t, ns)) @ cs)

        grid = np.arange(1 << 14) / (1 << 14)
        sup = float(np.max(np.abs(ev(grid))))
        return cls(ev, float(np.sum(np.abs(cs))), sup, float(np.sqrt(np.sum(np.abs(cs) ** 2))), label)


@dataclass(frozen=True)
class PhaseFunction:
    """phi on the torus (phi(v+1) - phi(v) an integer), with the norms the bounds need."""

    evaluate: Callable[[np.ndarray], np.ndarray] = field(repr=False)
    tv: float
    deriv_tv: float | None = None
    deriv_l2_sq: float | None = None
    label: str = ""

    @classmethod
    def trig(cls, a: Sequence[float], b: Sequence[float], c0: float = 0.0, n_grid: int = 1 << 16) -> "PhaseFunction":
        """phi(v) = c0 + sum_j a_j cos(2 pi j v) + b_j sin(2 pi j v), j = 1..J."""
        a, b = np.asarray(a, float), np.asarray(b, float)
        j = np.arange(1, len(a) + 1)
        w = 2 * np.pi * j

        def ev(v):
            th = np.multiply.outer(np.asarray(v, float), w)
            return c0 + np.cos(th) @ a + np.sin(th) @ b

        v = (np.arange(n_grid) + 0.5) / n_grid
        th = np.multiply.outer(v, w)
        d1 = (-np.sin(th) * w) @ a + (np.cos(th) * w) @ b
        d2 = (-np.cos(th) * w**2) @ a + (-np.sin(th) * w**2) @ b
        l2 = float(np.sum(w**2 * (a**2 + b**2)) / 2)
        return cls(ev, float(np.mean(np.abs(d1))), float(np.mean(np.abs(d2))), l2, "trig")

    @classmethod
    def constant(cls, c: float) -> "PhaseFunction":
        return cls(lambda v: np.full(np.shape(v), float(c)), 0.0, 0.0, 0.0, "const")

    @classmethod
    def sawtooth(cls) -> "PhaseFunction":
        """phi(v) = <v>: rises by 1 and drops by 1 per period, so TV = 2."""
        return cls(lambda v: frac(np.asarray(v, float)), 2.0, None, None, "sawtooth")

    @classmethod
    def from_midpoint(cls, mid: MidpointFunction) -> "PhaseFunction":
        lam = np.asarray(mid.lam, float)
        return cls(mid.lam_at, total_variation(lam), None, None, "lambda")


@dataclass
class DecayLemmaReport:
    k: np.ndarray
    c: np.ndarray
    bound1: np.ndarray
    bound2: np.ndarray | None
    quad_error: float

    @property
    def holds1(self) -> bool:
        return bool(np.all(np.abs(self.c) <= self.bound1 + self.quad_error))

    @property
    def holds2(self) -> bool:
        return self.bound2 is None or bool(np.all(np.abs(self.c) <= self.bound2 + self.quad_error))

    @property
    def holds(self) -> bool:
        return self.holds1 and self.holds2

    def worst_ratio(self) -> float:
        b = self.bound1 if self.bound2 is None else np.minimum(self.bound1, self.bound2)
        with np.errstate(divide="ignore", invalid="ignore"):
            r = np.where(b > 0, np.abs(self.c) / b, 0.0)
        return float(np.max(r))


def lemma_integrals(f: ZeroMeanFunction, phi: PhaseFunction, K_max: int, Q0: int = 1 << 12,
                    Q_max: int = 1 << 20, tol: float = 1e-8) -> tuple[np.ndarray, np.ndarray, float]:
    """c[k] = int_T f(k v + phi(v)) dv for k = 1..K_max, refined until two grids agree."""
    k = np.arange(1, K_max + 1)

    def rule(q):
        v = (np.arange(q) + 0.5) / q
        p = phi.evaluate(v)
        return np.array([f.evaluate(kk * v + p).mean() for kk in k])

    q = max(Q0, 64 * K_max)
    prev = rule(q)
    while True:
        q *= 2
        cur = rule(q)
        err = float(np.max(np.abs(cur - prev)))
        if err <= tol:
            return k, cur, err
        if q >= Q_max:
            raise QuadratureError(f"c[k] not settled at Q={q}: successive difference {err:.2e}")
        prev = cur


def verify_decay_lemma(f: ZeroMeanFunction, phi: PhaseFunction, K_max: int, **quad) -> DecayLemmaReport:
    """Evaluate c[k] and both decay bounds for 1 <= k <= K_max.

    Bound 1: ||f||_A ||phi||_TV / |k|. Bound 2, when phi' has finite
    variation: (||f||_2 ||phi'||_TV / sqrt(12) + ||f||_inf ||phi'||_2^2) / k^2.
    """
    k, c, err = lemma_integrals(f, phi, K_max, **quad)
    b1 = f.a_norm * phi.tv / k
    b2 = None
    if phi.deriv_tv is not None and phi.deriv_l2_sq is not None:
        b2 = (f.l2_norm * phi.deriv_tv / np.sqrt(12.0) + f.sup_norm * phi.deriv_l2_sq) / k.astype(float) ** 2
    return DecayLemmaReport(k, c, b1, b2, err)


def random_smooth_phase(rng, degree: int = 4, amplitude: float = 0.3) -> PhaseFunction:
    """Random trigonometric polynomial with coefficients decaying like 1/j^2."""
    j = np.arange(1, degree + 1)
    a = rng.standard_normal(degree) / j**2
    b = rng.standard_normal(degree) / j**2
    scale = amplitude / max(np.sum(np.abs(a) + np.abs(b)), 1e-12)
    return PhaseFunction.trig(a * scale, b * scale, c0=float(rng.uniform()))
