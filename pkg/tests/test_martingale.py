import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from martlab import martingale as mg
from martlab.constants import pstar


# ---- transforms -------------------------------------------------------------


def test_transform_identity_and_negation():
    f = mg.DiscreteMartingalePath(np.array([1.0, -0.5, 2.0]))
    ones = mg.PredictableSequence(np.ones(3))
    assert np.array_equal(mg.transform(f, ones).increments, f.increments)
    neg = mg.PredictableSequence(-np.ones(3))
    g = mg.transform(f, neg)
    assert np.array_equal(g.increments, -f.increments)
    for p in (1.5, 2.0, 4.0):
        assert math.isclose(np.mean(np.abs(g.partial_sums[-1]) ** p),
                            np.mean(np.abs(f.partial_sums[-1]) ** p))


def test_transform_two_step_hand_computation():
    f = mg.DiscreteMartingalePath(np.array([1.0, 1.0]))
    v = mg.PredictableSequence(np.array([1.0, -1.0]))
    g = mg.transform(f, v)
    assert np.array_equal(g.partial_sums, np.array([1.0, 0.0]))


def test_transform_length_guard():
    f = mg.DiscreteMartingalePath(np.ones(4))
    with pytest.raises(ValueError):
        mg.transform(f, mg.PredictableSequence(np.ones(3)))


def test_transform_linearity_and_composition():
    rng = np.random.default_rng(0)
    df = rng.standard_normal(6)
    v = rng.uniform(-1, 1, 6)
    w = rng.uniform(-1, 1, 6)
    f = mg.DiscreteMartingalePath(df)
    vw = mg.PredictableSequence(v * w)
    double = mg.transform(mg.transform(f, mg.PredictableSequence(v)),
                          mg.PredictableSequence(w))
    assert np.allclose(double.increments, mg.transform(f, vw).increments,
                       atol=1e-15)
    # linearity in f
    g = rng.standard_normal(6)
    lhs = mg.transform(mg.DiscreteMartingalePath(df + g),
                       mg.PredictableSequence(v)).increments
    rhs = (mg.transform(f, mg.PredictableSequence(v)).increments
           + mg.transform(mg.DiscreteMartingalePath(g),
                          mg.PredictableSequence(v)).increments)
    assert np.allclose(lhs, rhs, atol=1e-15)


def test_predictable_sequence_range_guard():
    with pytest.raises(ValueError):
        mg.PredictableSequence(np.array([1.5]), b=-1.0, B=1.0)


# ---- subordination ----------------------------------------------------------


@given(st.integers(min_value=2, max_value=10), st.integers(0, 10_000))
@settings(max_examples=60, deadline=None)
def test_subordination_holds_for_transforms(n, seed):
    rng = np.random.default_rng(seed)
    b, B = sorted(rng.uniform(-2.0, 2.0, size=2))
    if b == B:
        return
    dX = rng.standard_normal(n)
    v = rng.uniform(b, B, size=n)
    X = np.concatenate([[0.0], np.cumsum(dX)])
    Y = np.concatenate([[0.0], np.cumsum(v * dX)])
    assert mg.check_subordination(X, Y, b, B)


def test_subordination_counterexample():
    X = np.array([0.0, 1.0, 0.5])
    assert not mg.check_subordination(X, 2.0 * X, -1.0, 1.0)


def test_subordination_initial_value():
    X = np.array([1.0, 2.0])
    Y = np.array([1.5, 2.0])
    assert not mg.check_subordination(X, Y, -1.0, 1.0)


def test_subordination_grid_guard():
    with pytest.raises(ValueError):
        mg.check_subordination(np.zeros(3), np.zeros(4), -1, 1)


def test_symmetric_case_reduces_to_quadratic_domination():
    # b = -a, B = a: the ledger is [aX] - [Y]
    rng = np.random.default_rng(5)
    dX = rng.standard_normal(8)
    a = 1.5
    v = rng.uniform(-a, a, 8)
    X = np.concatenate([[0.0], np.cumsum(dX)])
    Y = np.concatenate([[0.0], np.cumsum(v * dX)])
    assert mg.check_subordination(X, Y, -a, a)
    assert np.all(np.cumsum((a * dX) ** 2 - (v * dX) ** 2) >= -1e-12)


# ---- dyadic sampler and trees ------------------------------------------------


def test_sample_dyadic_deterministic():
    a = mg.sample_dyadic_martingale(10, ("lognormal", 1.0), seed=7)
    b = mg.sample_dyadic_martingale(10, ("lognormal", 1.0), seed=7)
    assert np.array_equal(a.increments, b.increments)


def test_sample_dyadic_sign_law():
    f = mg.sample_dyadic_martingale(1, "unit", seed=3)
    assert abs(f.increments[0]) == 1.0
    with pytest.raises(ValueError):
        mg.sample_dyadic_martingale(0)
    with pytest.raises(ValueError):
        mg.sample_dyadic_martingale(3, law=("bogus",))


def test_sample_dyadic_ensemble_mean_martingale():
    # ensemble mean of f_n is constant in n within 3 standard errors
    n = 4000
    paths = np.stack([mg.sample_dyadic_martingale(8, ("lognormal", 0.5),
                                                  seed=s).partial_sums
                      for s in range(n)])
    means = paths.mean(axis=0)
    for k in range(1, 8):
        diff = paths[:, k] - paths[:, 0]
        se = diff.std(ddof=1) / math.sqrt(n)
        assert abs(means[k] - means[0]) <= 3.0 * se


def test_tree_exact_lp_against_enumeration():
    # independent oracle: enumerate sign paths with itertools
    tree = mg.random_tree(5, seed=13)
    vt = mg.random_predictable_tree(5, seed=14)
    p = 3.0
    totals_f, totals_g = [], []
    for signs in itertools.product((1.0, -1.0), repeat=5):
        f = g = 0.0
        prefix = 0
        for k, s in enumerate(signs):
            m = tree.levels[k][prefix]
            v = vt.levels[k][prefix]
            f += s * m
            g += v * s * m
            if s < 0:  # sign bit convention: bit set means -1
                prefix |= 1 << k
        totals_f.append(abs(f) ** p)
        totals_g.append(abs(g) ** p)
    oracle_f = (sum(totals_f) / 32.0) ** (1.0 / p)
    oracle_g = (sum(totals_g) / 32.0) ** (1.0 / p)
    assert math.isclose(tree.exact_lp(p), oracle_f, rel_tol=1e-12)
    assert math.isclose(tree.exact_lp(p, v_tree=vt), oracle_g, rel_tol=1e-12)


def test_transform_ratio_batch_respects_sharp_bound():
    ratios, sub_ok = mg.transform_ratio_batch(300, 8, (4.0 / 3.0, 2.0, 4.0),
                                              seed=21)
    assert sub_ok
    for j, p in enumerate((4.0 / 3.0, 2.0, 4.0)):
        assert ratios[:, j].max() <= pstar(p) - 1.0 + 1e-9


def test_search_exceeds_one_for_p4():
    out = mg.search_transform_ratio(5, 4.0, seed=2, n_rounds=3)
    assert out["best_ratio"] > 1.0
    assert out["best_ratio"] <= pstar(4.0) - 1.0 + 1e-9


# ---- weighted integrals -----------------------------------------------------


def test_weighted_integral_zero_potential_is_partial_sum():
    rng = np.random.default_rng(2)
    dM = rng.standard_normal(50)
    proc = mg.weighted_integral(dM, np.zeros(50), 0.01)
    assert np.array_equal(proc.Z[1:], np.cumsum(dM))
    assert proc.Z[0] == 0.0


def test_weighted_integral_impulse_decay():
    c, dt, n = 2.0, 0.1, 20
    dM = np.zeros(n)
    dM[0] = 1.0
    proc = mg.weighted_integral(dM, -c * np.ones(n), dt)
    expect = np.exp(-c * dt * np.arange(1, n + 1))
    assert np.allclose(proc.Z[1:], expect, rtol=1e-14)


def test_weighted_integral_rejects_positive_potential():
    with pytest.raises(ValueError):
        mg.weighted_integral(np.ones(3), np.array([0.0, 0.1, 0.0]), 0.1)


def test_weighted_q2_inequality():
    # E[Z_T^2] <= E[<M>_T] within Monte Carlo resolution
    rng = np.random.default_rng(8)
    n_paths, n_steps, dt = 20_000, 64, 1.0 / 64.0
    dM = math.sqrt(dt) * rng.standard_normal((n_paths, n_steps))
    V = -np.abs(rng.standard_normal((n_paths, n_steps)))
    zT, sup, qv = mg.weighted_ensemble_stats(dM, V, dt)
    D = zT**2 - qv
    assert D.mean() <= 3.0 * D.std(ddof=1) / math.sqrt(n_paths)


def test_weighted_process_invariants():
    proc = mg.weighted_integral(np.array([1.0, -2.0]), np.array([-1.0, 0.0]), 0.5)
    assert np.all(np.diff(proc.qv) >= 0)
    assert proc.sup_abs >= abs(proc.Z[-1])


# ---- matrix variant ---------------------------------------------------------


def test_matrix_zero_generator_is_vector_partial_sum():
    rng = np.random.default_rng(3)
    dM = rng.standard_normal((10, 3))
    proc = mg.matrix_weighted_integral(dM, np.zeros((10, 3, 3)), 0.1)
    assert np.allclose(proc.Z[1:], np.cumsum(dM, axis=0), atol=1e-14)
    assert np.allclose(proc.fundamental[-1], np.eye(3), atol=1e-14)


def test_matrix_diagonal_matches_scalar():
    rng = np.random.default_rng(4)
    n, d, dt = 40, 3, 0.05
    dM = rng.standard_normal((n, d))
    diag = -np.abs(rng.standard_normal((n, d)))
    V = np.zeros((n, d, d))
    V[:, np.arange(d), np.arange(d)] = diag
    proc = mg.matrix_weighted_integral(dM, V, dt)
    for i in range(d):
        scalar = mg.weighted_integral(dM[:, i], diag[:, i], dt)
        assert np.max(np.abs(proc.Z[:, i] - scalar.Z)) <= 1e-12


def test_matrix_d1_reduces_to_scalar():
    rng = np.random.default_rng(6)
    dM = rng.standard_normal((25, 1))
    v = -np.abs(rng.standard_normal(25))
    proc = mg.matrix_weighted_integral(dM, v.reshape(25, 1, 1), 0.2)
    scalar = mg.weighted_integral(dM[:, 0], v, 0.2)
    assert np.max(np.abs(proc.Z[:, 0] - scalar.Z)) <= 1e-13


def test_matrix_guards():
    asym = np.zeros((2, 2, 2))
    asym[:, 0, 1] = 1.0
    with pytest.raises(ValueError):
        mg.matrix_weighted_integral(np.zeros((2, 2)), asym, 0.1)
    pos = np.zeros((2, 2, 2))
    pos[:, 0, 0] = 0.5
    with pytest.raises(ValueError):
        mg.matrix_weighted_integral(np.zeros((2, 2)), pos, 0.1)


# ---- ratio and domination functionals ----------------------------------------


def test_bdg_ratio_doob_sanity():
    rng = np.random.default_rng(12)
    n_paths, n_steps, dt = 20_000, 128, 1.0 / 128.0
    dM = math.sqrt(dt) * rng.standard_normal((n_paths, n_steps))
    zT, sup, qv = mg.weighted_ensemble_stats(dM, np.zeros_like(dM), dt)
    ratio, se = mg.bdg_ratio(sup, qv, 2.0)
    assert ratio <= 4.0 + 3.0 * se


def test_bdg_ratio_errors():
    with pytest.raises(ZeroDivisionError):
        mg.bdg_ratio(np.ones(5), np.zeros(5), 2.0)
    with pytest.raises(ValueError):
        mg.bdg_ratio(np.ones(0), np.ones(0), 2.0)
    with pytest.raises(ValueError):
        mg.bdg_ratio(np.ones(5), np.ones(5), 0.0)


def test_lenglart_factor_and_equality_case():
    rng = np.random.default_rng(9)
    dM = 0.1 * rng.standard_normal((4000, 64))
    qv = np.concatenate([np.zeros((4000, 1)), np.cumsum(dM**2, axis=1)], axis=1)
    rep = mg.lenglart_check(qv, qv, 0.5)
    assert math.isclose(rep["factor"], 3.0)
    assert rep["hypothesis_ok"] and rep["conclusion_ok"]
    # deterministic increasing N = A: conclusion holds with slack factor >= 1
    det = np.tile(np.linspace(0.0, 1.0, 11), (3, 1))
    rep2 = mg.lenglart_check(det, det, 0.25)
    assert rep2["conclusion_ok"]
    with pytest.raises(ValueError):
        mg.lenglart_check(qv, qv, 1.5)
