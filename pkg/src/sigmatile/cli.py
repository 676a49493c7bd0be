"""Command-line front end: ``sigmatile <command> --config experiment.toml --out DIR``.

Exit codes: 0 success, 1 configuration error, 2 divergence, 3 undersampled,
4 rational input where an irrational one is needed, 5 any other failed
precondition (uncertified or disconnected tile, quadrature failure).
"""

from __future__ import annotations

import argparse
import copy
import hashlib
import json
import logging
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import tomli
import tomli_w

from . import arith, core, filters, mse, simulate, spectral, tiling
from .errors import DegenerateError, DivergenceError, RationalError, SigmaTileError, UnderSampledError

log = logging.getLogger("sigmatile")

EXIT_OK, EXIT_CONFIG, EXIT_DIVERGENCE, EXIT_UNDERSAMPLED, EXIT_RATIONAL, EXIT_PRECONDITION = range(6)

DEFAULTS = {
    "seed": 0,
    "scheme": {"order": 2, "rule": "ideal", "x": "sqrt2m1", "u0": None, "jitter": 0.0},
    "run": {"steps": 1_000_000, "burn_in": simulate.DEFAULT_BURN_IN, "blowup": simulate.DEFAULT_BLOWUP},
    "tile": {"resolution": 128, "eps_cover": tiling.DEFAULT_EPS_COVER},
    "spectrum": {"K_max": 50, "n_grid": 1024},
    "mse": {"family": "sinc", "p": 3, "M": [16, 32, 64, 128, 256]},
    "identity": {"orders": [1, 2, 3], "M_min": 2, "M_max": 64},
    "decay_lemma": {"n_phi": 20, "K_max": 100, "degree": 4, "amplitude": 0.3},
}

NAMED_X = {"golden": arith.GOLDEN, "sqrt2m1": arith.SQRT2_MINUS_1}


class ConfigError(Exception):
    """Bad configuration; the message names the offending field."""


@dataclass
class ExperimentConfig:
    raw: dict
    modulator: core.Modulator
    u0: np.ndarray
    x_label: str
    liouville: mse.LiouvilleInput | None = field(default=None, repr=False)

    def section(self, name: str) -> dict:
        return self.raw[name]

    @property
    def seed(self) -> int:
        return int(self.raw["seed"])

    def canonical(self) -> str:
        return tomli_w.dumps(_sorted(_tomlable(self.raw)))

    def digest(self) -> str:
        return hashlib.sha256(self.canonical().encode()).hexdigest()

    def stamp(self) -> str:
        return f"sigmatile config-sha256 {self.digest()}"


def _sorted(d):
    if isinstance(d, dict):
        return {k: _sorted(d[k]) for k in sorted(d)}
    return d


def _tomlable(d):
    # TOML has no null: drop unset optional fields
    if isinstance(d, dict):
        return {k: _tomlable(v) for k, v in d.items() if v is not None}
    return d


def _merge(defaults: dict, given: dict, where: str = "") -> dict:
    out = copy.deepcopy(defaults)
    for key, val in given.items():
        if key not in defaults:
            raise ConfigError(f"unknown field '{where}{key}'")
        if isinstance(defaults[key], dict):
            if not isinstance(val, dict):
                raise ConfigError(f"'{where}{key}' must be a table")
            out[key] = _merge(defaults[key], val, f"{where}{key}.")
        else:
            out[key] = val
    return out


def _int(d: dict, key: str, where: str, lo: int | None = None) -> int:
    v = d[key]
    if isinstance(v, bool) or not isinstance(v, int):
        raise ConfigError(f"'{where}.{key}' must be an integer, got {v!r}")
    if lo is not None and v < lo:
        raise ConfigError(f"'{where}.{key}' must be >= {lo}, got {v}")
    return v


def _parse_x(spec) -> tuple[float, str, mse.LiouvilleInput | None]:
    if isinstance(spec, bool):
        raise ConfigError("'scheme.x' must be a number, a name or a liouville spec")
    if isinstance(spec, (int, float)):
        return float(spec), repr(float(spec)), None
    if isinstance(spec, str):
        if spec in NAMED_X:
            return NAMED_X[spec], spec, None
        if spec.startswith("liouville:"):
            try:
                _, x0, l = spec.split(":")
                spec = {"liouville": {"x0": float(x0), "l": int(l)}}
            except ValueError:
                raise ConfigError("liouville spec must look like 'liouville:X0:L'") from None
        else:
            raise ConfigError(f"unknown named x {spec!r}; use a number, {sorted(NAMED_X)} or 'liouville:X0:L'")
    if isinstance(spec, dict) and set(spec) == {"liouville"}:
        lv = spec["liouville"]
        try:
            li = mse.liouville_input(lv["x0"], int(lv["l"]))
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"bad liouville spec: {exc}") from None
        return li.value, f"liouville(x0={lv['x0']}, l={lv['l']})", li
    raise ConfigError(f"cannot read 'scheme.x' = {spec!r}")


def _parse_rule(spec) -> core.QuantizerRule:
    if isinstance(spec, str):
        bank = core.rule_bank()
        if spec not in bank:
            raise ConfigError(f"unknown rule {spec!r}; known: {sorted(bank)}")
        return bank[spec]
    if isinstance(spec, dict):
        try:
            return core.QuantizerRule.from_dict(spec)
        except (ValueError, TypeError) as exc:
            raise ConfigError(f"bad 'scheme.rule': {exc}") from None
    raise ConfigError("'scheme.rule' must be a rule name or a table")


def build_config(given: dict, seed: int | None = None) -> ExperimentConfig:
    """Merge with defaults and validate every field before anything runs."""
    if not given:
        raise ConfigError("empty configuration: at least a [scheme] table is required")
    raw = _merge(DEFAULTS, given)
    if seed is not None:
        raw["seed"] = seed
    if isinstance(raw["seed"], bool) or not isinstance(raw["seed"], int):
        raise ConfigError("'seed' must be an integer")
    sch = raw["scheme"]
    m = _int(sch, "order", "scheme", 1)
    x, label, li = _parse_x(sch["x"])
    rule = _parse_rule(sch["rule"])
    try:
        mod = core.Modulator(m, rule, x)
    except ValueError as exc:
        raise ConfigError(f"bad scheme: {exc}") from None
    u0 = np.zeros(m) if sch["u0"] is None else np.asarray(sch["u0"], dtype=float)
    if u0.shape != (m,):
        raise ConfigError(f"'scheme.u0' must have {m} entries")
    jitter = float(sch["jitter"])
    if jitter < 0:
        raise ConfigError("'scheme.jitter' must be >= 0")
    if jitter:
        u0 = u0 + np.random.default_rng(raw["seed"]).uniform(-jitter, jitter, size=m)
    run = raw["run"]
    _int(run, "steps", "run", 0)
    _int(run, "burn_in", "run", 0)
    if not float(run["blowup"]) > 0:
        raise ConfigError("'run.blowup' must be positive")
    _int(raw["tile"], "resolution", "tile", 1)
    _int(raw["spectrum"], "K_max", "spectrum", 0)
    _int(raw["spectrum"], "n_grid", "spectrum", 1)
    ms = raw["mse"]
    if ms["family"] not in ("rect", "sinc", "ideal"):
        raise ConfigError("'mse.family' must be rect, sinc or ideal")
    _int(ms, "p", "mse", 1)
    if not isinstance(ms["M"], list) or not ms["M"] or not all(isinstance(v, int) and v >= 1 for v in ms["M"]):
        raise ConfigError("'mse.M' must be a non-empty list of positive integers")
    idn = raw["identity"]
    if not all(isinstance(v, int) and v >= 1 for v in idn["orders"]):
        raise ConfigError("'identity.orders' must be positive integers")
    _int(idn, "M_min", "identity", 1)
    _int(idn, "M_max", "identity", idn["M_min"])
    dl = raw["decay_lemma"]
    _int(dl, "n_phi", "decay_lemma", 1)
    _int(dl, "K_max", "decay_lemma", 1)
    _int(dl, "degree", "decay_lemma", 1)
    return ExperimentConfig(raw, mod, u0, label, li)


def load_config(path, seed: int | None = None) -> ExperimentConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    try:
        given = tomli.loads(text)
    except tomli.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from None  # message carries line and column
    return build_config(given, seed)


# commands -----------------------------------------------------------------


def _trajectory(cfg: ExperimentConfig) -> simulate.Trajectory:
    r = cfg.section("run")
    return simulate.run(cfg.modulator, cfg.u0, r["steps"], float(r["blowup"]))


def _write_json(path: Path, obj, cfg: ExperimentConfig) -> None:
    obj = dict(obj, config_sha256=cfg.digest())
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def cmd_simulate(cfg: ExperimentConfig, out: Path, threads: int) -> int:
    traj = _trajectory(cfg)
    traj.to_csv(out / "trajectory.csv", cfg.stamp())
    return EXIT_OK


def _tile(cfg: ExperimentConfig, traj: simulate.Trajectory) -> tiling.TorusTile:
    t = cfg.section("tile")
    return tiling.build_tile(traj, t["resolution"], burn_in=cfg.section("run")["burn_in"])


def cmd_tile(cfg: ExperimentConfig, out: Path, threads: int) -> int:
    traj = _trajectory(cfg)
    tile = _tile(cfg, traj)
    rep = tiling.multiplicity_report(tile, cfg.section("tile")["eps_cover"])
    tiling.export_tile_csv(tile, out / "tile.csv", cfg.stamp())
    if tile.order == 2:
        tiling.export_multiplicity_pgm(tile, out / "tile.pgm", cfg.stamp())
        tiling.export_lifted_pgm(tile, out / "lifted.pgm", cfg.stamp())
    _write_json(out / "multiplicity.json", rep.to_dict(), cfg)
    return EXIT_OK


def cmd_spectrum(cfg: ExperimentConfig, out: Path, threads: int) -> int:
    arith.require_irrational(cfg.modulator.x)
    sp = cfg.section("spectrum")
    traj = _trajectory(cfg)
    tile = _tile(cfg, traj)
    mid = tiling.extract_midpoint(tile)
    measure, est = spectral.spectral_measure(mid, cfg.modulator.x, sp["K_max"], sp["n_grid"])
    auto = spectral.autocorrelation(traj, sp["K_max"], cfg.section("run")["burn_in"])
    measure.export_atoms_csv(out / "atoms.csv", cfg.stamp())
    measure.export_density_csv(out / "density.csv", cfg.stamp())
    summary = {
        "n_atoms": len(measure.atoms),
        "total_mass": measure.total_mass(),
        "rho0_measured": float(auto.rho[0]),
        "decomposition_residual": float(np.max(np.abs(auto.rho - est.rho))),
    }
    if measure.density is not None:
        summary["s0_windowed"] = measure.density.s0_windowed
        summary["s0_raw"] = measure.density.s0_raw
    _write_json(out / "spectrum.json", summary, cfg)
    return EXIT_OK


def _filter(family: str, M: int, p: int):
    if family == "rect":
        return filters.rect(M)
    if family == "sinc":
        return filters.sinc_p(M, p)
    raise ValueError(family)


def cmd_mse(cfg: ExperimentConfig, out: Path, threads: int) -> int:
    ms = cfg.section("mse")
    m = cfg.modulator.order
    family, p = ms["family"], ms["p"]
    if family == "sinc" and p != m + 1:
        log.warning("sinc^%d with an order-%d scheme: the matched choice is p = %d", p, m, m + 1)
    Ms = sorted(set(ms["M"]))
    traj = None if family == "ideal" else _trajectory(cfg)
    measure = None
    tail = None
    if m <= 2 and arith.is_irrational_like(cfg.modulator.x):
        try:
            if traj is None:
                traj = _trajectory(cfg)
            mid = tiling.extract_midpoint(_tile(cfg, traj))
            measure, _ = spectral.spectral_measure(mid, cfg.modulator.x, cfg.section("spectrum")["K_max"])
            try:
                beta, C = mse.coefficient_decay(mid)
                bound = mse.pp_tail_bound(beta, C, mid.n_fourier, m)
                tail = {"beta": beta, "C": C, "n_fourier": mid.n_fourier, "bound": bound if math.isfinite(bound) else None}
            except DegenerateError as exc:  # flat midpoint, nothing to bound
                log.info("pp tail bound omitted: %s", exc)
        except SigmaTileError as exc:
            log.warning("spectral route unavailable: %s", exc)
    if family == "ideal" and measure is None:
        raise UnderSampledError("the ideal low-pass has only a spectral route, which is unavailable here")

    def point(M):
        pp = ac = float("nan")
        total = float("nan")
        if family != "ideal":
            total = mse.mse_time_domain(traj, _filter(family, M, p), cfg.section("run")["burn_in"])
        if measure is not None:
            tf = filters.ideal_lowpass(M) if family == "ideal" else filters.fir_transfer(_filter(family, M, p))
            pp, ac = mse.mse_spectral(measure, tf, m)
            if family == "ideal":
                total = pp + ac
        return M, total, pp, ac

    with ThreadPoolExecutor(max_workers=max(1, threads)) as pool:
        results = list(pool.map(point, Ms))
    curve = mse.MseCurve(f"{family}{p if family == 'sinc' else ''}")
    for r in results:
        curve.add(*r)
    curve.to_csv(out / "curve.csv", cfg.stamp())
    fit = None
    try:
        slope, const, resid = mse.fit_decay(curve)
        fit = {"slope": slope, "constant": const, "residual": resid}
    except SigmaTileError as exc:
        log.info("fit omitted: %s", exc)
    _write_json(out / "fit.json", {"fit": fit, "family": curve.filter_family, "pp_tail": tail}, cfg)
    return EXIT_OK


def cmd_identity(cfg: ExperimentConfig, out: Path, threads: int) -> int:
    idn = cfg.section("identity")
    lines = ["m,M,ratio"]
    for m in idn["orders"]:
        for M in range(idn["M_min"], idn["M_max"] + 1):
            lines.append(f"{m},{M},{mse.sin_power_sinc_identity(m, M)!r}")
    (out / "identity.csv").write_text(f"# {cfg.stamp()}\n" + "\n".join(lines) + "\n")
    return EXIT_OK


def cmd_decay_lemma(cfg: ExperimentConfig, out: Path, threads: int) -> int:
    dl = cfg.section("decay_lemma")
    rng = np.random.default_rng(cfg.seed)
    f = spectral.ZeroMeanFunction.sawtooth_autocorrelation()
    phis = [spectral.random_smooth_phase(rng, dl["degree"], dl["amplitude"]) for _ in range(dl["n_phi"])]
    with ThreadPoolExecutor(max_workers=max(1, threads)) as pool:
        reports = list(pool.map(lambda ph: spectral.verify_decay_lemma(f, ph, dl["K_max"]), phis))
    lines = ["phi,k,c,bound1,bound2"]
    for i, rep in enumerate(reports):
        for j, k in enumerate(rep.k):
            b2 = "" if rep.bound2 is None else repr(float(rep.bound2[j]))
            lines.append(f"{i},{k},{float(rep.c[j])!r},{float(rep.bound1[j])!r},{b2}")
    (out / "decay_lemma.csv").write_text(f"# {cfg.stamp()}\n" + "\n".join(lines) + "\n")
    summary = {
        "all_hold": all(r.holds for r in reports),
        "worst_ratio": max(r.worst_ratio() for r in reports),
        "n_phi": len(reports),
    }
    _write_json(out / "decay_lemma.json", summary, cfg)
    return EXIT_OK if summary["all_hold"] else EXIT_PRECONDITION


COMMANDS = {
    "simulate": cmd_simulate,
    "tile": cmd_tile,
    "spectrum": cmd_spectrum,
    "mse": cmd_mse,
    "identity": cmd_identity,
    "decay-lemma": cmd_decay_lemma,
}


def make_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="sigmatile", description="Sigma-delta invariant tiles, spectra and MSE experiments.")
    ap.add_argument("command", choices=sorted(COMMANDS))
    ap.add_argument("--config", required=True, help="experiment TOML file")
    ap.add_argument("--out", default=".", help="output directory (created if missing)")
    ap.add_argument("--threads", type=int, default=1, help="worker threads (SIGMA_TILE_THREADS overrides)")
    ap.add_argument("--seed", type=int, default=None, help="overrides the config seed")
    ap.add_argument("-v", "--verbose", action="store_true")
    return ap


def main(argv=None) -> int:
    args = make_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s: %(message)s")
    threads = args.threads
    env = os.environ.get("SIGMA_TILE_THREADS")
    if env:
        try:
            threads = int(env)
        except ValueError:
            log.error("SIGMA_TILE_THREADS must be an integer, got %r", env)
            return EXIT_CONFIG
    try:
        cfg = load_config(args.config, args.seed)
    except ConfigError as exc:
        log.error("config error: %s", exc)
        return EXIT_CONFIG
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    try:
        return COMMANDS[args.command](cfg, out, threads)
    except DivergenceError as exc:
        log.error("divergence at step %d: %s", exc.step, exc)
        return EXIT_DIVERGENCE
    except UnderSampledError as exc:
        log.error("undersampled: %s", exc)
        return EXIT_UNDERSAMPLED
    except RationalError as exc:
        log.error("rational input: %s", exc)
        return EXIT_RATIONAL
    except SigmaTileError as exc:
        log.error("%s: %s", type(exc).__name__, exc)
        return EXIT_PRECONDITION


if __name__ == "__main__":
    sys.exit(main())
