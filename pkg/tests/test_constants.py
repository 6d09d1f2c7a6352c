import math

import pytest
from hypothesis import given, settings, strategies as st

from martlab.constants import (
    ConstantBounds,
    ExponentPair,
    choi_alpha2,
    choi_asymptotic,
    conjugate_exponent,
    cpbB_bounds,
    prop35_bound,
    pstar,
    schrodinger_explicit_bound,
)

# frozen from a 60-digit evaluation of the printed coefficient formula
ALPHA2 = 0.009075889932781911
CHOI_20 = 9.717344209738153
CHOI_2 = 0.7214283602079046


def test_pstar_branches():
    assert pstar(3.0) == 3.0
    assert pstar(3.0) - 1.0 == 2.0
    assert pstar(2.0) - 1.0 == 1.0
    assert pstar(1.5) == 3.0
    assert pstar(1.5) - 1.0 == 2.0


def test_pstar_rejects_bad_exponent():
    for p in (1.0, 0.5, -2.0):
        with pytest.raises(ValueError):
            pstar(p)


@given(st.floats(min_value=1.01, max_value=50.0))
@settings(max_examples=100, deadline=None)
def test_pstar_conjugate_symmetry(p):
    q = conjugate_exponent(p)
    assert math.isclose(pstar(p), pstar(q), rel_tol=1e-12)


def test_exponent_pair_invariants():
    pair = ExponentPair.from_p(4.0)
    assert math.isclose(pair.q, 4.0 / 3.0)
    assert pair.pstar == 4.0
    with pytest.raises(ValueError):
        ExponentPair(2.0, 3.0)


def test_alpha2_against_high_precision_oracle():
    assert abs(choi_alpha2() - ALPHA2) <= 1e-10


def test_choi_series_values():
    assert abs(choi_asymptotic(20.0) - CHOI_20) <= 1e-12
    # p = 2 sits outside the asymptotic regime but the formula still evaluates
    assert abs(choi_asymptotic(2.0) - CHOI_2) <= 1e-12
    with pytest.raises(ValueError):
        choi_asymptotic(1.0)


def test_cpbB_symmetric_interval_is_exact():
    for p in (4.0 / 3.0, 1.5, 2.0, 3.0, 4.0):
        for a in (0.5, 1.0, 2.0):
            cb = cpbB_bounds(p, -a, a)
            assert cb.exact == a * (pstar(p) - 1.0)
            assert cb.lower == cb.upper == cb.exact


def test_cpbB_example_p2():
    cb = cpbB_bounds(2.0, 0.0, 1.0)
    assert cb.lower == cb.upper == cb.exact == 1.0


def test_cpbB_one_sided_upper():
    for p in (4.0 / 3.0, 2.0, 4.0):
        assert cpbB_bounds(p, 0.0, 1.0).upper == pstar(p) - 1.0


@given(st.floats(min_value=1.05, max_value=20.0),
       st.floats(min_value=-3.0, max_value=2.0),
       st.floats(min_value=0.05, max_value=4.0),
       st.floats(min_value=0.1, max_value=10.0))
@settings(max_examples=200, deadline=None)
def test_cpbB_scale_covariance_and_order(p, b, width, s):
    B = b + width
    if B <= 0:
        return
    cb = cpbB_bounds(p, b, B)
    assert cb.lower <= cb.upper + 1e-12
    if s * B > 0:
        scaled = cpbB_bounds(p, s * b, s * B)
        assert math.isclose(scaled.lower, s * cb.lower, rel_tol=1e-12)
        assert math.isclose(scaled.upper, s * cb.upper, rel_tol=1e-12)


def test_cpbB_guards():
    with pytest.raises(ValueError):
        cpbB_bounds(2.0, 1.0, 0.5)
    with pytest.raises(ValueError):
        cpbB_bounds(2.0, -2.0, -1.0)  # B <= 0 is not covered by the sandwich
    with pytest.raises(ValueError):
        cpbB_bounds(1.0, -1.0, 1.0)


def test_schrodinger_bound_values():
    assert schrodinger_explicit_bound(2.0, 1.0) == 128.0
    assert schrodinger_explicit_bound(2.0, 0.0) == 0.0
    assert abs(schrodinger_explicit_bound(4.0, 2.0) - 12288.0 / 9.0) <= 1e-10
    with pytest.raises(ValueError):
        schrodinger_explicit_bound(2.0, -1.0)


def test_prop35_bound_values():
    assert abs(prop35_bound(2.0) - 11.31370849898476) <= 1e-11
    assert abs(prop35_bound(3.0) - 14.286609467713795) <= 1e-11
    # divergence toward p = 1 stays finite for any admissible p
    assert math.isfinite(prop35_bound(1.0 + 1e-9))
    with pytest.raises(ValueError):
        prop35_bound(1.0)


def test_constant_bounds_validation():
    with pytest.raises(ValueError):
        ConstantBounds(lower=2.0, upper=1.0)
    with pytest.raises(ValueError):
        ConstantBounds(lower=1.0, upper=2.0, exact=1.5)
