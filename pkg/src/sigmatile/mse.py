"""Mean square reconstruction error, in the time domain and from the spectral measure.

The reconstruction error of an averaging filter phi is e = x - q * phi. Since
x - q = Delta^m u_m and phi sums to one, e = u_m * Delta^m phi, and the MSE is

    E(x, phi) = int_T |2 sin(pi xi)|^{2m} |Phi(xi)|^2 d mu(xi),

which splits into a pure-point and an absolutely continuous contribution.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from fractions import Fraction

import mpmath
import numpy as np
from scipy.signal import fftconvolve

from .errors import DegenerateError, LengthError, QuadratureError
from .filters import Filter, TransferFunction, difference, sinc_abs
from .simulate import DEFAULT_BURN_IN, Trajectory
from .spectral import SpectralMeasure
from .tiling import MidpointFunction

ROUTE_TOLERANCE = 1e-9


def error_signals(traj: Trajectory, filt: Filter, burn_in: int = DEFAULT_BURN_IN) -> tuple[np.ndarray, np.ndarray]:
    """e[n] by both routes, x - (q * phi)[n] and (u_m * Delta^m phi)[n].

    Only indices n >= burn_in where both convolutions see their full support
    are returned.
    """
    m = traj.order
    L = len(filt.values)
    first = max(burn_in, L + m - 1)
    if traj.steps - first + 1 < L + m:
        raise LengthError(f"trajectory of {traj.steps} steps too short for a {L}-tap filter after burn-in {burn_in}")
    d = difference(filt, m).values  # support 0..L+m-1
    u = traj.coordinate(m)
    q = traj.symbols.astype(float)  # q[n] = symbols[n-1]
    # valid convolution output i corresponds to n = i + (kernel length - 1) + (index of array start)
    via_u = fftconvolve(u, d, mode="valid")  # n = L+m-1 .. N
    via_q = traj.modulator.x - fftconvolve(q, filt.values, mode="valid")  # n = L .. N
    via_u = via_u[first - (L + m - 1) :]
    via_q = via_q[first - L :]
    return via_q, via_u


def mse_time_domain(traj: Trajectory, filt: Filter, burn_in: int = DEFAULT_BURN_IN, check: bool = True) -> float:
    """Time average of e^2.

    Both routes are computed and must agree to 1e-9 pointwise; the average
    uses the u_m route, which does not suffer cancellation against x.
    """
    via_q, via_u = error_signals(traj, filt, burn_in)
    if check:
        gap = float(np.max(np.abs(via_q - via_u)))
        if gap > ROUTE_TOLERANCE:
            raise AssertionError(f"error routes disagree by {gap:.3e}")
    return float(np.mean(via_u**2))


def max_abs_error(traj: Trajectory, filt: Filter, burn_in: int = DEFAULT_BURN_IN) -> float:
    return float(np.max(np.abs(error_signals(traj, filt, burn_in)[1])))


def uniform_error_bound(traj: Trajectory, filt: Filter, burn_in: int = DEFAULT_BURN_IN) -> float:
    """||u_m||_inf * ||Delta^m phi||_1 with the sup taken over the used states."""
    m = traj.order
    return float(np.max(np.abs(traj.coordinate(m)[burn_in:])) * difference(filt, m).l1_norm())


def block_bootstrap_sigma(samples, blocks: int = 8, resamples: int = 200, rng=None) -> float:
    """Standard error of the mean of ``samples`` from a block bootstrap."""
    s = np.asarray(samples, dtype=float)
    n = len(s) // blocks
    if n < 1:
        raise LengthError("fewer samples than blocks")
    means = s[: n * blocks].reshape(blocks, n).mean(axis=1)
    rng = np.random.default_rng(rng)
    boot = means[rng.integers(0, blocks, size=(resamples, blocks))].mean(axis=1)
    return float(np.std(boot, ddof=1))


def _weight(m: int, transfer: TransferFunction, xi) -> np.ndarray:
    xi = np.asarray(xi, dtype=float)
    return np.abs(2 * np.sin(np.pi * xi)) ** (2 * m) * np.abs(transfer(xi)) ** 2


def _fir_degree(transfer: TransferFunction) -> int:
    f = transfer.filter
    return (len(f.values) - 1) if f is not None else 0


def mse_spectral(measure: SpectralMeasure, transfer: TransferFunction, m: int, Q: int | None = None) -> tuple[float, float]:
    """(E_pp, E_ac) from atoms and density.

    For an FIR filter the weight |2 sin|^{2m} |Phi|^2 is a trigonometric
    polynomial, and with a windowed-cosine density the whole integrand is
    one too, so a midpoint rule with enough nodes is exact. The ideal
    low-pass is integrated by Gauss-Legendre on its pass band.
    """
    loc, mass = measure.atom_arrays()
    e_pp = float(np.sum(_weight(m, transfer, loc) * mass)) if len(loc) else 0.0
    dens = measure.density
    if dens is None:
        return e_pp, 0.0
    if transfer.kind == "ideal":
        nodes, w = np.polynomial.legendre.leggauss(256)
        c = transfer.cutoff
        xi = c * nodes
        e_ac = float(c * np.sum(w * _weight(m, transfer, xi) * dens(xi)))
        return e_pp, e_ac
    deg = m + _fir_degree(transfer) + len(dens.coefficients)
    if Q is None:
        Q = max(32 * transfer.M, 2 * deg + 2)
    xi = (np.arange(Q) + 0.5) / Q - 0.5
    e_ac = float(np.mean(_weight(m, transfer, xi) * dens(xi)))
    return e_pp, e_ac


def coefficient_decay(mid: MidpointFunction, floor: float | None = None) -> tuple[float, float]:
    """Fit |c_n| ~ C |n|^{-beta} to the G-bar coefficients above ``floor``; returns (beta, C).

    Coefficients at or below the floor (default 1/G^2, below the grid's own
    accuracy) are estimation noise and are left out. Needs at least three
    usable coefficients.
    """
    if floor is None:
        floor = 1.0 / mid.resolution**2
    n = np.arange(1, mid.n_fourier + 1)
    c = np.abs(mid.fourier[mid.n_fourier + 1 :])
    keep = c > floor
    if keep.sum() < 3:
        raise DegenerateError("fewer than three coefficients above the noise floor")
    slope, intercept = np.polyfit(np.log(n[keep]), np.log(c[keep]), 1)
    return float(-slope), float(np.exp(intercept))


def pp_tail_bound(beta: float, C: float, n_fourier: int, m: int) -> float:
    """Bound on the E_pp atoms beyond |n| > n_fourier, given |c_n| <= C |n|^{-beta}.

    Uses |2 sin|^{2m} |Phi|^2 <= 4^m and sum_{n>N} n^{-2 beta} <= N^{1-2 beta}/(2 beta - 1).
    """
    if beta <= 0.5:
        return math.inf
    return 2 * 4**m * C**2 * n_fourier ** (1 - 2 * beta) / (2 * beta - 1)


def sin_power_sinc_identity(m: int, M: int) -> float:
    """Ratio of int_T |2 sin(pi xi)|^{2m} |Sinc^{m+1}_M(xi)|^2 d xi to C(2m, m) M^{-2m-1}.

    The integrand is a trigonometric polynomial of degree (m+1)(M-1) + m, so
    the midpoint rule with more nodes than twice that is exact up to rounding;
    the doubled rule must agree to 1e-12 relative.
    """
    if m < 1 or M < 1:
        raise ValueError("need m >= 1 and M >= 1")
    deg = (m + 1) * (M - 1) + m

    def rule(Q):
        xi = (np.arange(Q) + 0.5) / Q - 0.5
        return float(np.mean(np.abs(2 * np.sin(np.pi * xi)) ** (2 * m) * sinc_abs(M, m + 1, xi) ** 2))

    Q = 2 * deg + 2
    a, b = rule(Q), rule(2 * Q)
    if abs(a - b) > 1e-12 * abs(b):
        raise QuadratureError(f"identity quadrature unsettled: {a!r} vs {b!r}")
    return b / (math.comb(2 * m, m) * float(M) ** (-2 * m - 1))


def ideal_lowpass_constant(m: int) -> float:
    """C with E_ac(x, Phi^id_M) ~ C s(0) M^{-2m-1} for a density continuous at 0.

    Integrating s(0) (2 pi xi)^{2m} over |xi| <= 1/M gives (2 pi)^{2m} / (m + 1/2).
    """
    return (2 * math.pi) ** (2 * m) / (m + 0.5)


@dataclass
class MseCurve:
    """Points (M, E_total, E_pp, E_ac); any of the last three may be NaN when not computed."""

    filter_family: str
    points: list[tuple[int, float, float, float]] = field(default_factory=list)
    fitted_slope: float | None = None
    fitted_constant: float | None = None

    def add(self, M: int, total: float, pp: float = math.nan, ac: float = math.nan) -> None:
        self.points.append((int(M), float(total), float(pp), float(ac)))

    @property
    def M(self) -> np.ndarray:
        return np.array([p[0] for p in self.points], dtype=float)

    @property
    def total(self) -> np.ndarray:
        return np.array([p[1] for p in self.points])

    def to_csv(self, path, comment: str | None = None) -> None:
        with open(path, "w", newline="") as fh:
            if comment:
                fh.write(f"# {comment}\n")
            w = csv.writer(fh)
            w.writerow(["M", "E_total", "E_pp", "E_ac", "slope_so_far"])
            for i, (M, t, pp, ac) in enumerate(self.points):
                slope = ""
                if i >= 1:
                    slope = repr(float(np.polyfit(np.log(self.M[: i + 1]), np.log(self.total[: i + 1]), 1)[0]))
                w.writerow([M, repr(t), repr(pp), repr(ac), slope])


def fit_decay(curve, values=None) -> tuple[float, float, float]:
    """Least-squares line through (log M, log E): returns (slope, constant, residual).

    Accepts an :class:`MseCurve` or two arrays (M, E). ``residual`` is the
    largest absolute deviation in log E. Needs at least five points spanning
    two octaves of M, and no zero errors.
    """
    if isinstance(curve, MseCurve):
        M, E = curve.M, curve.total
    else:
        M, E = np.asarray(curve, dtype=float), np.asarray(values, dtype=float)
    if np.any(E <= 0):
        raise DegenerateError("cannot fit a power law through zero or negative errors")
    if len(M) < 5 or M.max() < 4 * M.min():
        raise DegenerateError("need at least 5 points spanning 2 octaves of M")
    lm, le = np.log(M), np.log(E)
    slope, intercept = np.polyfit(lm, le, 1)
    resid = float(np.max(np.abs(le - (slope * lm + intercept))))
    if isinstance(curve, MseCurve):
        curve.fitted_slope, curve.fitted_constant = float(slope), float(np.exp(intercept))
    return float(slope), float(np.exp(intercept)), resid


# Liouville inputs ----------------------------------------------------------

DOUBLE_BITS = 60


@dataclass(frozen=True)
class ResonantPair:
    """n_q = 2^{q!} and M_q = floor(2^{q q! - 1} c2), with the exact distance ||n_q x||."""

    q: int
    n: int
    M: int
    distance: Fraction
    lower: Fraction  # c2 / (4 M_q)
    upper: Fraction  # c2 / M_q

    @property
    def in_window(self) -> bool:
        return self.lower < self.distance < self.upper

    def chain_holds(self) -> bool:
        """c2/4M < 2^{-q q!} < ||n x|| < 2^{-q q! + 1} < c2/M."""
        t = Fraction(1, 2 ** (self.q * math.factorial(self.q)))
        return self.lower < t < self.distance < 2 * t < self.upper


@dataclass(frozen=True)
class LiouvilleInput:
    value: float
    x0: Fraction
    l: int
    terms: tuple[int, ...]  # exponents k! included in ``value``
    precision_loss: bool
    resonances: tuple[ResonantPair, ...]

    def exact(self, k_max: int) -> Fraction:
        """x0 + sum_{l <= k <= k_max} 2^{-k!}."""
        return self.x0 + sum((Fraction(1, 2 ** math.factorial(k)) for k in range(self.l, k_max + 1)), Fraction(0))


def _liouville_distance(x0: Fraction, l: int, q: int) -> Fraction:
    # 2^{q!} x0 and the terms k <= q are integers, so <2^{q!} x> = sum_{k > q} 2^{q! - k!}.
    # Terms past k = q+3 are below 2^{q! - (q+4)!}, far under every gap in the chain.
    qf = math.factorial(q)
    if (x0 * 2**qf).denominator != 1:
        raise ValueError("x0 has more binary digits than the chain allows for this q")
    f = sum((Fraction(1, 2 ** (math.factorial(k) - qf)) for k in range(q + 1, q + 4)), Fraction(0)) % 1
    return min(f, 1 - f)


def liouville_input(x0, l: int, c2: float = 0.4, q_max: int = 5) -> LiouvilleInput:
    """x = x0 + sum_{k >= l} 2^{-k!}, plus the resonant pairs q = l..q_max.

    ``value`` keeps the terms with k! <= 60 (what a double can carry next to
    a short dyadic x0); ``precision_loss`` is set when even the first
    Liouville term falls outside that range. The resonance data are exact.
    """
    if l < 2:
        raise ValueError("l must be >= 2")
    x0 = Fraction(x0)
    if x0.denominator & (x0.denominator - 1):
        raise ValueError("x0 must be a dyadic rational")
    bits = x0.denominator.bit_length() - 1
    if bits > 52:
        raise ValueError("x0 needs more than 52 bits")
    if bits > math.factorial(l) - 1:
        raise ValueError(f"x0 has {bits} binary digits; l must satisfy l! - 1 >= {bits}")
    # via the decimal repr, so 0.4 means 2/5 and not its binary neighbour
    c2f = Fraction(repr(c2)) if isinstance(c2, float) else Fraction(c2)
    terms = []
    k = l
    while math.factorial(k) <= DOUBLE_BITS:
        terms.append(math.factorial(k))
        k += 1
    value = float(x0) + sum(2.0 ** -t for t in terms)
    pairs = []
    for q in range(l, q_max + 1):
        qf = math.factorial(q)
        M = math.floor(Fraction(2 ** (q * qf - 1)) * c2f)
        if M < 1:
            continue
        pairs.append(ResonantPair(q, 2**qf, M, _liouville_distance(x0, l, q), c2f / (4 * M), c2f / M))
    return LiouvilleInput(value, x0, l, tuple(terms), not terms, tuple(pairs))


def sinc_lower_constant(p: int, c2: float = 0.4) -> float:
    """c1 with |Sinc^p_M(xi)| >= c1 for |xi| <= c2/M and all M (c2 <= 1/2)."""
    if not 0 < c2 <= 0.5:
        raise ValueError("c2 must lie in (0, 1/2]")
    # sin(pi M xi)/(M sin(pi xi)) >= sin(pi c2)/(pi c2) on |xi| <= c2/M
    return (math.sin(math.pi * c2) / (math.pi * c2)) ** p


def resonant_pp_lower_bound(pair: ResonantPair, x: Fraction, m: int, p: int, coeff_sq, n_terms: int = 64,
                            dps: int | None = None) -> tuple[mpmath.mpf, mpmath.mpf]:
    """Lower estimate of E_pp(x, sinc^p_{M_q}) and the single resonant term.

    E_pp is a sum of non-negative terms |2 sin(pi n x)|^{2m} |Sinc^p_M(n x)|^2 |c_n|^2;
    this adds the terms n = +-1..n_terms and n = +-n_q, which bounds it from
    below. ``coeff_sq(n)`` returns |c_n|^2 as an mpmath number; ``x`` is an
    exact rational approximation of the input accurate far beyond 1/(n_q M_q).
    """
    if dps is None:
        dps = 30 + int(pair.M.bit_length() * 0.31) + int(pair.n.bit_length() * 0.31)
    with mpmath.workdps(dps):
        xm = mpmath.mpf(x.numerator) / x.denominator
        M = mpmath.mpf(pair.M)

        def term(n):
            t = n * xm
            t = t - mpmath.nint(t)
            if t == 0:
                return mpmath.mpf(0)
            s = mpmath.sin(mpmath.pi * t)
            sinc = mpmath.sin(mpmath.pi * M * t) / (M * s)
            return (2 * abs(s)) ** (2 * m) * sinc ** (2 * p) * coeff_sq(n)

        resonant = 2 * term(pair.n)
        rest = 2 * mpmath.fsum(term(n) for n in range(1, n_terms + 1) if n != pair.n)
        return resonant + rest, resonant
