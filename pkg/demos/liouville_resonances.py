"""Resonant filter lengths for a Liouville-type input.

x = 1/2 + sum_{k>=2} 2^{-k!} is so well approximated by dyadic rationals
that ||n_q x|| is tiny for n_q = 2^{q!}. Choosing M_q so that this distance
sits in [c2/(4 M_q), c2/M_q] makes a single atom of the first-order
spectrum dominate the sinc^2 error, and the pure-point MSE then decays
more slowly than any fixed power 2m + 2 along the subsequence M_q.
Everything below is exact or computed with mpmath.

    python demos/liouville_resonances.py
"""

import mpmath

from sigmatile.arith import diophantine_type_estimate
from sigmatile.mse import liouville_input, resonant_pp_lower_bound, sinc_lower_constant

C2, M_ORDER, P = 0.4, 1, 2


def coeff_sq(n):
    # sawtooth midpoint of the first-order tile: |c_n|^2 = 1/(2 pi n)^2
    return 1 / (4 * mpmath.pi**2 * mpmath.mpf(n) ** 2)


def main():
    L = liouville_input(0.5, 2, c2=C2)
    bound = sinc_lower_constant(P, C2) ** 2 * C2 ** (2 * M_ORDER)
    print(f"x ~ {L.value!r}; normalized lower bound c1^2 c2^2m = {bound:.4f}")
    print(f"{'q':>2} {'log2 n_q':>9} {'log2 M_q':>9} {'in window':>9} {'normalized':>11} {'exponent':>9}")
    for pair in L.resonances:
        x = L.exact(pair.q + 3)
        total, _ = resonant_pp_lower_bound(pair, x, M_ORDER, P, coeff_sq)
        normalized = float(total * mpmath.mpf(pair.M) ** (2 * M_ORDER) / coeff_sq(pair.n))
        expo = float(-mpmath.log(total) / mpmath.log(pair.M))
        print(f"{pair.q:>2} {pair.n.bit_length() - 1:>9} {float(mpmath.log(pair.M, 2)):>9.2f} {str(pair.in_window):>9} "
              f"{normalized:>11.3f} {expo:>9.3f}")
    for n in (10**2, 10**8, 10**40):
        print(f"type estimate from convergents up to {n:.0e}: {diophantine_type_estimate(L.exact(6), n):.2f}")


if __name__ == "__main__":
    main()
