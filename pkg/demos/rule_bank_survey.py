"""Survey the named second-order rules: do they settle on a single tile?

For every rule in ``rule_bank()`` and two badly approximable inputs, run the
modulator, bin the orbit at three grid sizes and print the multiplicity-1
fraction, the covered fraction and whether the tile is v_2-connected.
A single tile shows up as a single fraction that climbs towards 1 as the
grid is refined.

    python demos/rule_bank_survey.py [--steps 4000000]
"""

import argparse
import time

from sigmatile import DivergenceError, Modulator, rule_bank, run
from sigmatile.arith import GOLDEN, SQRT2_MINUS_1
from sigmatile.tiling import build_tile, invariance_fraction, multiplicity_report, vm_connected

INPUTS = {"golden": GOLDEN, "sqrt2m1": SQRT2_MINUS_1}
GRIDS = (64, 128, 256)


def survey(steps):
    print(f"{'rule':<18} {'x':<8} " + " ".join(f"G={G:<14}" for G in GRIDS) + " connected  invariant")
    for name, rule in rule_bank().items():
        for xname, x in INPUTS.items():
            mod = Modulator(2, rule, x)
            try:
                traj = run(mod, None, steps)
            except DivergenceError as exc:
                print(f"{name:<18} {xname:<8} diverged: {exc}")
                continue
            cols, tile = [], None
            for G in GRIDS:
                tile = build_tile(traj, G)
                rep = multiplicity_report(tile)
                cols.append(f"{rep.single_fraction:.3f}/{rep.covered_fraction:.3f}")
            # connectivity and invariance on the finest grid
            conn = vm_connected(tile)
            inv = invariance_fraction(tile, mod)
            print(f"{name:<18} {xname:<8} " + " ".join(f"{c:<16}" for c in cols) + f" {str(conn):<10} {inv:.3f}")


if __name__ == "__main__":
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--steps", type=int, default=4 * 10**6)
    args = ap.parse_args()
    t0 = time.perf_counter()
    survey(args.steps)
    print(f"columns are single/covered fractions; {time.perf_counter() - t0:.1f} s")
