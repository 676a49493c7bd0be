"""Empirical invariant tiles on a torus grid.

Every state u[n] splits as u[n] = <u[n]> + k with <u[n]> in [0,1)^m and k an
integer vector. The grid cell of <u[n]> together with k says which lattice
translate of the unit cube Gamma covers at that spot; a single tile has
exactly one k per cell, up to cells that straddle Gamma's boundary.
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

from .arith import frac0
from .core import Modulator, modulator_map
from .errors import ConnectivityError, MultiplicityError, UnderSampledError
from .simulate import DEFAULT_BURN_IN, Trajectory

log = logging.getLogger(__name__)

DEFAULT_EPS_COVER = 0.02
_OFFSET_BITS = 10
_OFFSET_BIAS = 1 << (_OFFSET_BITS - 1)
_SAMPLES_PER_PAIR = 16


def _encode_offsets(k: np.ndarray) -> np.ndarray:
    if k.size and (k.min() < -_OFFSET_BIAS or k.max() >= _OFFSET_BIAS):
        raise ValueError("lattice offsets too large for the tile encoding; is the scheme stable?")
    code = np.zeros(len(k), dtype=np.int64)
    for i in range(k.shape[1]):
        code = (code << _OFFSET_BITS) | (k[:, i] + _OFFSET_BIAS)
    return code


def _decode_offsets(code: np.ndarray, m: int) -> np.ndarray:
    k = np.empty((len(code), m), dtype=np.int64)
    mask = (1 << _OFFSET_BITS) - 1
    c = code.copy()
    for i in range(m - 1, -1, -1):
        k[:, i] = (c & mask) - _OFFSET_BIAS
        c >>= _OFFSET_BITS
    return k


@dataclass
class TorusTile:
    """Grid picture of an invariant set: per cell, the lattice offsets seen there.

    Pairs (cell, offset) are stored sorted by ``keys``; ``cells``/``offsets``
    decode them. Columns are cells of the first m-1 coordinates; for each
    column the extreme observed values of the lifted last coordinate are kept.
    """

    order: int
    resolution: int
    keys: np.ndarray
    counts: np.ndarray
    sample_size: int
    col_min: np.ndarray
    col_max: np.ndarray
    cell_sum_last: np.ndarray
    samples: dict = field(default_factory=dict, repr=False)

    @property
    def n_cells(self) -> int:
        return self.resolution**self.order

    @property
    def cells(self) -> np.ndarray:
        return self.keys >> (_OFFSET_BITS * self.order)

    @property
    def offsets(self) -> np.ndarray:
        return _decode_offsets(self.keys & ((1 << (_OFFSET_BITS * self.order)) - 1), self.order)

    def cell_visits(self) -> np.ndarray:
        return np.bincount(self.cells, weights=self.counts, minlength=self.n_cells).astype(np.int64)

    def multiplicity(self) -> np.ndarray:
        """Number of distinct lattice offsets observed in each cell."""
        return np.bincount(self.cells, minlength=self.n_cells)

    def cell_offsets(self, cell: int) -> np.ndarray:
        lo, hi = np.searchsorted(self.cells, [cell, cell + 1])
        return self.offsets[lo:hi]

    def require_single(self, eps_cover: float = DEFAULT_EPS_COVER) -> None:
        rep = multiplicity_report(self, eps_cover)
        if not rep.certified:
            raise MultiplicityError(
                f"tile not certified single: multiplicity-1 fraction {rep.single_fraction:.4f}, "
                f"covered {rep.covered_fraction:.4f}"
            )

    def merge(self, other: "TorusTile") -> "TorusTile":
        """Associative union of two partial tiles over the same grid."""
        if (self.order, self.resolution) != (other.order, other.resolution):
            raise ValueError("cannot merge tiles on different grids")
        keys, inv = np.unique(np.concatenate((self.keys, other.keys)), return_inverse=True)
        counts = np.bincount(inv, weights=np.concatenate((self.counts, other.counts)), minlength=len(keys))
        samples = dict(self.samples)
        for key, pts in other.samples.items():
            mine = samples.get(key)
            samples[key] = pts if mine is None else np.concatenate((mine, pts))[:_SAMPLES_PER_PAIR]
        return TorusTile(
            self.order,
            self.resolution,
            keys,
            counts.astype(np.int64),
            self.sample_size + other.sample_size,
            np.fmin(self.col_min, other.col_min),
            np.fmax(self.col_max, other.col_max),
            self.cell_sum_last + other.cell_sum_last,
            samples,
        )

    def cell_index(self, frac_points: np.ndarray) -> np.ndarray:
        G = self.resolution
        j = np.minimum((frac_points * G).astype(np.int64), G - 1)
        return np.ravel_multi_index(tuple(j.T), (G,) * self.order)

    def project(self, w) -> np.ndarray:
        """Lift torus point(s) w in [0,1)^m to the tile: <w>_Gamma."""
        w = np.asarray(w, dtype=float)
        single = w.ndim == 1
        w = np.atleast_2d(w)
        cells = self.cell_index(w)
        out = np.empty_like(w)
        mult = self.multiplicity()
        for i, (pt, c) in enumerate(zip(w, cells)):
            if mult[c] == 1:
                out[i] = pt + self.cell_offsets(c)[0]
            else:
                out[i] = pt + self._resolve_offset(pt, c)
        return out[0] if single else out

    def _resolve_offset(self, pt: np.ndarray, cell: int) -> np.ndarray:
        # boundary or empty cell: pick the lift closest to an observed orbit point nearby
        # samples are absolute lifted states, so torus wrap-around needs no special case
        G, m = self.resolution, self.order
        j = np.array(np.unravel_index(cell, (G,) * m))
        near = []
        for shift in np.ndindex(*(3,) * m):
            nb = int(np.ravel_multi_index(tuple((j + np.array(shift) - 1) % G), (G,) * m))
            lo, hi = np.searchsorted(self.cells, [nb, nb + 1])
            near.extend(self.samples[int(key)] for key in self.keys[lo:hi] if int(key) in self.samples)
        if not near:
            raise UnderSampledError(f"no samples near cell {cell} to resolve the lattice offset")
        y = np.concatenate(near)
        k = np.round(y - pt)
        d = np.max(np.abs(pt + k - y), axis=1)
        return k[np.argmin(d)]


class _Accumulator:
    def __init__(self, m: int, G: int, samples_per_pair: int):
        self.m, self.G, self.spp = m, G, samples_per_pair
        self.tile: TorusTile | None = None

    def add(self, states: np.ndarray) -> None:
        states = np.asarray(states, dtype=float)
        if states.ndim != 2 or states.shape[1] != self.m:
            raise ValueError(f"states must have shape (N, {self.m})")
        if len(states) == 0:
            return
        m, G = self.m, self.G
        k = np.floor(states).astype(np.int64)
        f = states - k
        # rounding can put f at exactly 1.0
        over = f >= 1.0
        if over.any():
            k = k + over
            f = np.where(over, 0.0, f)
        j = np.minimum((f * G).astype(np.int64), G - 1)
        cells = np.ravel_multi_index(tuple(j.T), (G,) * m)
        pair = (cells << (_OFFSET_BITS * m)) | _encode_offsets(k)
        keys, first, inv = np.unique(pair, return_index=True, return_inverse=True)
        counts = np.bincount(inv, minlength=len(keys))

        ncol = G ** (m - 1)
        col = cells // G if m > 1 else np.zeros(len(cells), dtype=np.int64)
        last = states[:, -1]
        col_min = np.full(ncol, np.inf)
        col_max = np.full(ncol, -np.inf)
        np.minimum.at(col_min, col, last)
        np.maximum.at(col_max, col, last)
        cell_sum = np.bincount(cells, weights=last, minlength=G**m)

        samples = {}
        order = np.argsort(inv, kind="stable")
        starts = np.searchsorted(inv[order], np.arange(len(keys)))
        for idx, key in enumerate(keys):
            sel = order[starts[idx] : starts[idx] + min(self.spp, counts[idx])]
            samples[int(key)] = states[sel].copy()

        part = TorusTile(m, G, keys, counts.astype(np.int64), len(states), col_min, col_max, cell_sum, samples)
        self.tile = part if self.tile is None else self.tile.merge(part)

    def finish(self) -> TorusTile:
        if self.tile is None:
            ncol = self.G ** (self.m - 1)
            return TorusTile(
                self.m, self.G, np.zeros(0, np.int64), np.zeros(0, np.int64), 0,
                np.full(ncol, np.inf), np.full(ncol, -np.inf), np.zeros(self.G**self.m),
            )
        return self.tile


def build_tile(source, resolution: int, order: int | None = None, burn_in: int | None = None,
               samples_per_pair: int = _SAMPLES_PER_PAIR) -> TorusTile:
    """Bin states onto a G^m grid of the torus, recording lattice offsets per cell.

    ``source`` is a :class:`Trajectory` (the first ``burn_in`` states, default
    1000, are dropped), an (N, m) array of states, or an iterable of such
    arrays, e.g. from :func:`sigmatile.simulate.iter_states`.

    Raises :class:`UnderSampledError` when fewer than half the cells are hit.
    """
    if int(resolution) != resolution or resolution < 1:
        raise ValueError("resolution must be a positive integer")
    G = int(resolution)
    if isinstance(source, Trajectory):
        b = DEFAULT_BURN_IN if burn_in is None else burn_in
        chunks: Iterable[np.ndarray] = [source.states[b:]]
        order = source.order
    elif isinstance(source, np.ndarray):
        chunks = [source[burn_in or 0 :]]
        order = source.shape[1] if source.ndim == 2 else order
    else:
        chunks = source
    acc: _Accumulator | None = None
    for ch in chunks:
        ch = np.asarray(ch, dtype=float)
        if acc is None:
            acc = _Accumulator(order or ch.shape[1], G, samples_per_pair)
        for i in range(0, len(ch), 1 << 20):
            acc.add(ch[i : i + (1 << 20)])
    if acc is None:
        if order is None:
            raise UnderSampledError("no samples")
        acc = _Accumulator(order, G, samples_per_pair)
    tile = acc.finish()
    if tile.sample_size < 10 * tile.n_cells:
        log.warning("%d samples for %d cells: fewer than 10 expected hits per cell", tile.sample_size, tile.n_cells)
    visited = np.count_nonzero(tile.cell_visits()) / tile.n_cells
    if visited < 0.5:
        raise UnderSampledError(f"only {visited:.1%} of {tile.n_cells} cells visited by {tile.sample_size} samples")
    return tile


@dataclass(frozen=True)
class MultiplicityReport:
    histogram: dict[int, int]
    covered_fraction: float
    single_fraction: float
    certified: bool
    eps_cover: float

    @property
    def dominant(self) -> int:
        return max(self.histogram, key=self.histogram.get)

    def to_dict(self) -> dict:
        return {
            "histogram": {str(k): v for k, v in sorted(self.histogram.items())},
            "covered_fraction": self.covered_fraction,
            "single_fraction": self.single_fraction,
            "certified": self.certified,
            "eps_cover": self.eps_cover,
        }


def multiplicity_report(tile: TorusTile, eps_cover: float = DEFAULT_EPS_COVER) -> MultiplicityReport:
    """Histogram of per-cell multiplicities over visited cells and the single-tile verdict."""
    if tile.sample_size == 0:
        raise UnderSampledError("empty tile")
    mult = tile.multiplicity()
    visited = mult[mult > 0]
    values, freq = np.unique(visited, return_counts=True)
    hist = {int(v): int(c) for v, c in zip(values, freq)}
    covered = len(visited) / tile.n_cells
    single = hist.get(1, 0) / len(visited)
    certified = single >= 1 - eps_cover and covered >= 1 - eps_cover
    return MultiplicityReport(hist, covered, single, certified, eps_cover)


def column_failures(tile: TorusTile, tol: float | None = None) -> tuple[int, int, int]:
    """(gapped, too_wide, non-empty) column counts for the v_m-connectivity test.

    A column is gapped when its occupied lifted cells (j_m + G k_m) are not
    contiguous. It is too wide when the observed values span more than
    ``1 + var + tol``, where ``var`` estimates how far the midpoint function
    moves across the column (half the summed jumps to the neighbouring
    columns along each axis) and ``tol`` defaults to 2/G.
    """
    m, G = tile.order, tile.resolution
    tol = 2.0 / G if tol is None else tol
    cells, k = tile.cells, tile.offsets
    col = cells // G
    lifted = (cells % G) + G * k[:, -1]
    order = np.lexsort((lifted, col))
    col_s, lif_s = col[order], lifted[order]
    bounds = np.searchsorted(col_s, np.arange(G ** (m - 1) + 1))
    width = tile.col_max - tile.col_min
    var = _column_variation(tile)
    gapped = wide = filled = 0
    for c in range(G ** (m - 1)):
        seg = np.unique(lif_s[bounds[c] : bounds[c + 1]])
        if len(seg) == 0:
            continue
        filled += 1
        gapped += int(seg[-1] - seg[0] + 1 != len(seg))
        wide += int(width[c] > 1 + var[c] + tol)
    return gapped, wide, filled


def _column_variation(tile: TorusTile) -> np.ndarray:
    m, G = tile.order, tile.resolution
    if m == 1:
        return np.zeros(1)
    lam = ((tile.col_min + tile.col_max) / 2).reshape((G,) * (m - 1))
    var = np.zeros_like(lam)
    for ax in range(m - 1):
        fwd = np.abs(np.roll(lam, -1, axis=ax) - lam)
        bwd = np.abs(lam - np.roll(lam, 1, axis=ax))
        var += np.nan_to_num((fwd + bwd) / 2, nan=0.0, posinf=0.0)
    return var.reshape(-1)


def vm_connected(tile: TorusTile, tol: float | None = None, eps_cover: float = DEFAULT_EPS_COVER) -> bool:
    """True when the lifted last-coordinate set of each column is one interval of length about 1.

    Every column must be gap-free. The length test may fail on up to
    ``eps_cover`` of the columns: a column straddling a jump of the midpoint
    function is wider than one unit at any finite G. See :func:`column_failures`.
    """
    tile.require_single(eps_cover)
    m, G = tile.order, tile.resolution
    if m == 1:
        return True
    gapped, wide, filled = column_failures(tile, tol)
    if G ** (m - 1) - filled > eps_cover * G ** (m - 1):
        raise UnderSampledError(f"{G ** (m - 1) - filled} empty columns")
    return gapped == 0 and wide <= eps_cover * filled


@dataclass(frozen=True)
class MidpointFunction:
    """Midpoint function on the (m-1)-torus and the Fourier coefficients of G-bar.

    ``lam`` has shape (G,)*(m-1) sampled at cell centers (a 0-d array for
    m = 1). ``fourier[n + n_fourier]`` is the n-th Fourier coefficient of the
    first-variable average G-bar, which equals lam-bar when m >= 2.
    """

    order: int
    resolution: int
    lam: np.ndarray
    lam_bar: np.ndarray
    fourier: np.ndarray
    n_fourier: int

    def coefficient(self, n: int) -> complex:
        return complex(self.fourier[n + self.n_fourier])

    def lam_at(self, vprime) -> np.ndarray:
        """lambda at arbitrary v' (periodic, linear between cell centers)."""
        if self.order == 1:
            return np.broadcast_to(float(self.lam), np.shape(vprime)[:-1] if np.ndim(vprime) > 1 else np.shape(vprime)).copy()
        if self.order == 2:
            vp = np.asarray(vprime, dtype=float)
            if vp.ndim and vp.shape[-1] == 1:  # (..., 1) points of the 1-torus
                vp = vp[..., 0]
            return periodic_interp(self.lam, vp)
        vp = np.asarray(vprime, dtype=float)
        G = self.resolution
        j = np.floor(vp * G).astype(np.int64) % G  # nearest-cell lookup in higher dimension
        return self.lam[tuple(np.moveaxis(j, -1, 0))]

    def lam_bar_at(self, v) -> np.ndarray:
        return periodic_interp(self.lam_bar, np.asarray(v, dtype=float))

    @classmethod
    def from_samples(cls, lam_samples, n_fourier: int | None = None) -> "MidpointFunction":
        """m = 2 midpoint function from samples at cell centers (j + 1/2)/G."""
        lam = np.asarray(lam_samples, dtype=float)
        G = len(lam)
        nf = G // 4 if n_fourier is None else n_fourier
        return cls(2, G, lam, lam, cell_center_dft(lam, nf), nf)


def periodic_interp(samples: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Linear interpolation of 1-periodic cell-center samples."""
    G = len(samples)
    t = (np.asarray(v) * G - 0.5) % G
    i0 = np.floor(t).astype(np.int64)
    w = t - i0
    return (1 - w) * samples[i0 % G] + w * samples[(i0 + 1) % G]


def cell_center_dft(samples: np.ndarray, n_fourier: int) -> np.ndarray:
    """c[n] = (1/G) sum_j f((j+1/2)/G) exp(-2 pi i n (j+1/2)/G), n = -N..N."""
    G = len(samples)
    n = np.arange(-n_fourier, n_fourier + 1)
    centers = (np.arange(G) + 0.5) / G
    return np.exp(-2j * np.pi * np.outer(n, centers)) @ samples / G


def extract_midpoint(tile: TorusTile, n_fourier: int | None = None, tol: float | None = None) -> MidpointFunction:
    """Midpoint lambda = (min + max)/2 of the lifted last coordinate per column.

    For m >= 2 the pure-point generator G-bar equals lam-bar, the average of
    lambda over coordinates 2..m-1. For m = 1 there is no column structure:
    G-bar is G_Gamma itself, estimated from per-cell means of the lifted
    state, and its DFT is divided by the cell-averaging factor sinc(n/G).
    """
    if not vm_connected(tile, tol):
        raise ConnectivityError("tile is not v_m-connected")
    m, G = tile.order, tile.resolution
    nf = G // 4 if n_fourier is None else n_fourier
    lam = (tile.col_min + tile.col_max) / 2
    if m == 1:
        visits = tile.cell_visits()
        if np.any(visits == 0):
            raise UnderSampledError("m=1 extraction needs every cell visited")
        gbar = tile.cell_sum_last / visits
        n = np.arange(-nf, nf + 1)
        fourier = cell_center_dft(gbar, nf) / np.sinc(n / G)
        return MidpointFunction(1, G, np.asarray(lam[0]), gbar, fourier, nf)
    lam = lam.reshape((G,) * (m - 1))
    if not np.all(np.isfinite(lam)):
        # fill unvisited columns from their neighbours along v_1
        flat = lam.reshape(G, -1)
        for c in range(flat.shape[1]):
            col = flat[:, c]
            good = np.isfinite(col)
            if not good.any():
                raise UnderSampledError("a whole v_1 line of columns is empty")
            idx = np.arange(G)
            col[~good] = np.interp(idx[~good], idx[good], col[good], period=G)
        lam = flat.reshape((G,) * (m - 1))
    lam_bar = lam.reshape(G, -1).mean(axis=1)
    return MidpointFunction(m, G, lam, lam_bar, cell_center_dft(lam_bar, nf), nf)


def g_gamma(mid: MidpointFunction, v) -> np.ndarray:
    """G_Gamma(v', v_m) = <v_m - lambda(v')>_0 + lambda(v'); differs from v_m by an integer."""
    v = np.asarray(v, dtype=float)
    vm = v[..., -1]
    lam = mid.lam_at(v[..., :-1]) if mid.order > 1 else float(mid.lam)
    t = vm - lam
    k = t - frac0(t)  # exact integer
    return vm - k


def invariance_fraction(tile: TorusTile, mod: Modulator) -> float:
    """Fraction of occupied cells whose every (cell-centre + offset) image lands on an occupied pair."""
    G, m = tile.resolution, tile.order
    occupied = set(tile.keys.tolist())
    cells, offs = tile.cells, tile.offsets
    centers = (np.array(np.unravel_index(cells, (G,) * m)).T + 0.5) / G
    ok_cell: dict[int, bool] = {}
    for c, pt in zip(cells, centers + offs):
        img = modulator_map(mod, pt)
        k = np.floor(img).astype(np.int64)
        f = img - k
        jc = tile.cell_index(f[None, :])[0]
        key = int((jc << (_OFFSET_BITS * m)) | _encode_offsets(k[None, :])[0])
        ok_cell[int(c)] = ok_cell.get(int(c), True) and key in occupied
    return sum(ok_cell.values()) / len(ok_cell)


def iterate_box(mod: Modulator, lower, upper, n_points: int, steps: int, rng=None) -> list[np.ndarray]:
    """Push a uniform point cloud of the box [lower, upper] forward: Gamma_k = M^k(Gamma_0)."""
    rng = np.random.default_rng(rng)
    lower, upper = np.asarray(lower, float), np.asarray(upper, float)
    pts = rng.uniform(lower, upper, size=(n_points, mod.order))
    clouds = [pts]
    for _ in range(steps):
        pts = np.array([modulator_map(mod, p) for p in pts])
        clouds.append(pts)
    return clouds


def export_tile_csv(tile: TorusTile, path, comment: str | None = None) -> None:
    m, G = tile.order, tile.resolution
    idx = np.array(np.unravel_index(tile.cells, (G,) * m)).T
    with open(path, "w", newline="") as fh:
        if comment:
            fh.write(f"# {comment}\n")
        w = csv.writer(fh)
        w.writerow(["cell", *(f"j_{i}" for i in range(1, m + 1)), *(f"k_{i}" for i in range(1, m + 1)), "count"])
        for c, j, k, n in zip(tile.cells, idx, tile.offsets, tile.counts):
            w.writerow([int(c), *map(int, j), *map(int, k), int(n)])


def _write_pgm(path, img: np.ndarray, comment: str | None) -> None:
    h, w = img.shape
    with open(path, "wb") as fh:
        fh.write(b"P5\n")
        if comment:
            fh.write(f"# {comment}\n".encode())
        fh.write(f"{w} {h}\n255\n".encode())
        fh.write(img.astype(np.uint8).tobytes())


def export_multiplicity_pgm(tile: TorusTile, path, comment: str | None = None) -> None:
    """Torus image for m = 2: black = unvisited, brighter = higher multiplicity. Row 0 is v_2 near 1."""
    if tile.order != 2:
        raise ValueError("PGM export is only defined for m = 2")
    G = tile.resolution
    mult = tile.multiplicity().reshape(G, G)  # axis 0: v_1, axis 1: v_2
    top = max(int(mult.max()), 1)
    img = np.round(255 * mult / top).T[::-1]
    _write_pgm(path, img, comment)


def export_lifted_pgm(tile: TorusTile, path, comment: str | None = None) -> None:
    """Picture of Gamma itself in the plane (m = 2): occupied lifted cells drawn dark."""
    if tile.order != 2:
        raise ValueError("PGM export is only defined for m = 2")
    G = tile.resolution
    j = np.array(np.unravel_index(tile.cells, (G, G))).T
    lifted = j + G * tile.offsets
    lo = lifted.min(axis=0)
    size = lifted.max(axis=0) - lo + 1
    img = np.full((size[1], size[0]), 255, dtype=np.uint8)
    img[size[1] - 1 - (lifted[:, 1] - lo[1]), lifted[:, 0] - lo[0]] = 0
    _write_pgm(path, img, comment)
