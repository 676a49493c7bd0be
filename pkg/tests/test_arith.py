import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from sigmatile.arith import (
    GOLDEN,
    SQRT2_MINUS_1,
    continued_fraction,
    diophantine_type_estimate,
    frac,
    frac0,
    is_irrational_like,
    nearest_int_distance,
    rational_approximation,
    reciprocal_distance_sum,
    require_irrational,
)
from sigmatile.errors import RationalError
from sigmatile.mse import liouville_input


@pytest.mark.parametrize("t, expected", [(0.7, -0.3), (-0.5, -0.5), (3.25, 0.25), (0.5, -0.5), (0.0, 0.0)])
def test_frac0_examples(t, expected):
    assert frac0(t) == pytest.approx(expected, abs=1e-15)


@pytest.mark.parametrize("t, expected", [(0.3, 0.3), (0.75, 0.25), (2.0, 0.0)])
def test_nearest_int_distance_examples(t, expected):
    assert nearest_int_distance(t) == pytest.approx(expected, abs=1e-15)


@given(st.floats(min_value=-2.0**51, max_value=2.0**51, allow_nan=False))
def test_frac0_exact_integer_complement(t):
    r = frac0(t)
    assert -0.5 <= r < 0.5
    k = t - r
    assert k == math.floor(k)
    # the split is exact, not just close
    assert Fraction(t) - Fraction(float(r)) == Fraction(int(k))


@given(st.floats(min_value=-1e6, max_value=1e6, allow_nan=False))
def test_frac_range(t):
    f = frac(t)
    assert 0.0 <= f < 1.0


def test_frac_tiny_negative_does_not_return_one():
    assert frac(-1e-20) == 0.0


def test_continued_fraction_golden():
    cf = continued_fraction(GOLDEN, max_terms=20)
    assert cf.quotients[0] == 0
    assert all(a == 1 for a in cf.quotients[1:20])
    assert not cf.terminated


def test_continued_fraction_of_rational_terminates():
    cf = continued_fraction(Fraction(355, 113))
    assert cf.terminated
    assert cf.quotients == (3, 7, 16)
    assert cf.convergents[-1] == (355, 113)


@given(st.floats(min_value=0.001, max_value=0.999, allow_nan=False))
def test_convergent_law(x):
    cf = continued_fraction(x, max_terms=40)
    q = cf.denominators
    assert all(a < b for a, b in zip(q[1:], q[2:]))
    for k in range(len(q) - 1):
        p_k, q_k = cf.convergents[k]
        assert abs(cf.value - Fraction(p_k, q_k)) <= Fraction(1, q_k * q[k + 1])


def test_rational_guard():
    assert rational_approximation(0.5) == Fraction(1, 2)
    assert rational_approximation(1 / 3) == Fraction(1, 3)
    assert rational_approximation(Fraction(7, 999_983)) == Fraction(7, 999_983)
    assert rational_approximation(GOLDEN) is None
    assert is_irrational_like(SQRT2_MINUS_1)
    with pytest.raises(RationalError):
        require_irrational(0.5)
    with pytest.raises(ValueError):  # RationalError is a ValueError too
        require_irrational(0.25)


def test_large_denominator_rational_passes_guard():
    assert is_irrational_like(Fraction(1, 1_000_003))


@pytest.mark.parametrize("x", [GOLDEN, SQRT2_MINUS_1])
def test_type_estimate_bounded_quotients(x):
    eta = diophantine_type_estimate(x, 10**6)
    assert 0.95 <= eta <= 1.05


def test_type_estimate_liouville_grows():
    # denominators 2^6, 2^24, 2^120 each bring a new resonance
    x = liouville_input(0.5, 2).exact(6)
    etas = [diophantine_type_estimate(x, n) for n in (10**2, 10**8, 10**40)]
    assert etas[0] < etas[1] < etas[2]
    assert etas[-1] > 4.5


def test_type_estimate_refuses_rational():
    with pytest.raises(RationalError):
        diophantine_type_estimate(0.375, 1000)


def test_reciprocal_sum_exponent_golden():
    # sum_{k<=n} 1/||k x|| grows like n log n for type-1 x
    ns = np.array([2**10, 2**14, 2**18])
    s = np.array([reciprocal_distance_sum(GOLDEN, int(n)) for n in ns])
    slope = np.polyfit(np.log(ns), np.log(s), 1)[0]
    assert 1.0 < slope < 1.2
