"""MSE of the reconstruction error against the filter length M.

A constant input is run through ideal first- and second-order modulators
and decoded by rect_M and sinc^{m+1}_M. With the matched sinc filter the
second-order error has a flat continuous spectrum and decays like M^{-5};
the first-order error is pure point and decays like M^{-4} along generic M,
with dips at resonant M. rect_M caps both at M^{-2}. The last column compares
the spectral route (atoms plus density from the tile) with the time average.

    python demos/mse_decay.py
"""

import numpy as np

from sigmatile import Modulator, QuantizerRule, run
from sigmatile.arith import GOLDEN, SQRT2_MINUS_1
from sigmatile.filters import fir_transfer, rect, sinc_p
from sigmatile.mse import fit_decay, mse_spectral, mse_time_domain
from sigmatile.spectral import spectral_measure
from sigmatile.tiling import build_tile, extract_midpoint

Ms = np.unique(np.round(np.geomspace(8, 256, 16)).astype(int))


def sweep(label, m, x, family, steps=2 * 10**6):
    G = 1024 if m == 1 else 128  # first order needs many atoms, hence a fine grid
    mod = Modulator(m, QuantizerRule.ideal(), x)
    traj = run(mod, None, steps)
    measure, _ = spectral_measure(extract_midpoint(build_tile(traj, G)), x, 40)
    make = rect if family == "rect" else (lambda M: sinc_p(M, m + 1))
    E_time, E_spec = [], []
    for M in Ms:
        f = make(int(M))
        E_time.append(mse_time_domain(traj, f))
        E_spec.append(sum(mse_spectral(measure, fir_transfer(f), m)))
    slope, const, _ = fit_decay(Ms, np.array(E_time))
    gap = np.max(np.abs(np.log(np.array(E_spec) / np.array(E_time))))
    print(f"{label:<28} slope {slope:7.3f}  constant {const:8.4f}  max |log(spec/time)| {gap:.3f}")


if __name__ == "__main__":
    sweep("m=1 rect, golden", 1, GOLDEN, "rect")
    sweep("m=1 sinc^2, golden", 1, GOLDEN, "sinc")
    sweep("m=2 rect, sqrt2-1", 2, SQRT2_MINUS_1, "rect")
    sweep("m=2 sinc^3, sqrt2-1", 2, SQRT2_MINUS_1, "sinc")
