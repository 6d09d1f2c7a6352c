import math

import numpy as np
import pytest

from martlab import spectral as sp


def crit_field():
    return sp.FourierField.from_modes(2, 4, {
        (1, 0): 0.5, (-1, 0): 0.5, (1, 1): -0.25j, (-1, -1): 0.25j,
    })


# ---- field structure --------------------------------------------------------


def test_grid_roundtrip():
    f = sp.FourierField.random(2, 5, seed=3)
    g = sp.FourierField.from_grid(f.to_grid(2 * 5 + 2), 5)
    assert np.max(np.abs(f.coeffs - g.coeffs)) <= 1e-10


def test_reality_flag_enforced():
    with pytest.raises(ValueError):
        sp.FourierField.from_modes(1, 2, {(1,): 1.0}, real=True)
    f = sp.FourierField.from_modes(1, 2, {(1,): 0.5, (-1,): 0.5})
    assert f.real


def test_eval_matches_grid():
    f = sp.FourierField.random(2, 3, seed=9)
    n = 16
    grid = f.to_grid(n)
    xs = np.stack(np.meshgrid(np.arange(n) / n, np.arange(n) / n,
                              indexing="ij"), -1).reshape(-1, 2)
    direct = f.eval_at(xs).reshape(n, n)
    assert np.max(np.abs(direct - grid)) <= 1e-10


# ---- heat semigroup ---------------------------------------------------------


def test_heat_identity_at_zero():
    f = sp.FourierField.random(2, 4, seed=1)
    assert np.array_equal(sp.heat_semigroup(f, 0.0).coeffs, f.coeffs)


def test_heat_single_mode_decay():
    f = sp.FourierField.from_modes(2, 2, {(1, 0): 1.0}, real=False)
    out = sp.heat_semigroup(f, 0.3)
    assert abs(out.coeffs[3, 2] - math.exp(-2.0 * math.pi**2 * 0.3)) <= 1e-14


def test_heat_semigroup_law():
    f = sp.FourierField.random(2, 4, seed=2)
    a = sp.heat_semigroup(sp.heat_semigroup(f, 0.2), 0.5)
    b = sp.heat_semigroup(f, 0.7)
    assert np.max(np.abs(a.coeffs - b.coeffs)) <= 1e-12


def test_heat_rejects_negative_time():
    with pytest.raises(ValueError):
        sp.heat_semigroup(crit_field(), -0.1)


# ---- gradient ---------------------------------------------------------------


def test_gradient_constant_is_zero():
    f = sp.FourierField.from_modes(2, 2, {(0, 0): 3.0})
    assert all(g.l2_norm() == 0.0 for g in sp.gradient(f))


def test_gradient_of_sine():
    # sin(2 pi x1) -> 2 pi cos(2 pi x1)
    f = sp.FourierField.from_modes(1, 2, {(1,): -0.5j, (-1,): 0.5j})
    g = sp.gradient(f)[0]
    n = 16
    xs = (np.arange(n) / n).reshape(-1, 1)
    expect = 2.0 * np.pi * np.cos(2.0 * np.pi * xs[:, 0])
    assert np.max(np.abs(np.real(g.eval_at(xs)) - expect)) <= 1e-12


def test_gradient_parseval():
    f = sp.FourierField.random(2, 4, seed=5)
    kk = sp.wavevectors(2, 4)
    total = sum(g.l2_norm() ** 2 for g in sp.gradient(f))
    expect = float(np.sum(4.0 * np.pi**2 * np.sum(kk**2, -1) * np.abs(f.coeffs) ** 2))
    assert math.isclose(total, expect, rel_tol=1e-12)


# ---- Riesz compositions and the projection family --------------------------


def test_riesz_symbol_values():
    s = sp.riesz2_symbol(0, 1, 2, 4)
    K = 4
    assert s.values[K + 1, K + 1] == -0.5
    assert s.values[K, K] == 0.0
    assert s.sup_abs <= 1.0


def test_riesz_trace_identity():
    K = 5
    total = sum(sp.riesz2_symbol(i, i, 2, K).values for i in range(2))
    kk = sp.wavevectors(2, K)
    nonzero = np.sum(kk**2, -1) > 0
    assert np.allclose(total[nonzero], -1.0)
    assert total[K, K] == 0.0


def test_sa_identity_is_negative_projection():
    f = crit_field()
    out = sp.sa_constant_apply(np.eye(2), f)
    expect = -f.coeffs.copy()
    expect[4, 4] = 0.0
    assert np.max(np.abs(out.coeffs - expect)) <= 1e-14


def test_sa_single_entry_matches_riesz():
    f = sp.FourierField.random(2, 4, seed=8)
    A = np.zeros((2, 2))
    A[0, 1] = 1.0
    a = sp.sa_constant_apply(A, f)
    b = sp.riesz2_apply(0, 1, f)
    assert np.array_equal(a.coeffs, b.coeffs)


def test_sa_symbol_range_matches_eigenvalues():
    # symmetric A with eigenvalues in [b, B] gives symbol values in [-B, -b]
    rng = np.random.default_rng(4)
    M = rng.standard_normal((2, 2))
    A = 0.5 * (M + M.T)
    evals = np.linalg.eigvalsh(A)
    sym = sp.sa_constant_symbol(A, 2, 6)
    vals = sym.values[np.abs(sym.values) > 0]
    assert vals.min() >= -evals[-1] - 1e-12
    assert vals.max() <= -evals[0] + 1e-12


def test_sa_oracle_constant_horizon_limit():
    f = crit_field()
    a = sp.sa_oracle(f, np.eye(2), math.inf)
    b = sp.sa_constant_apply(np.eye(2), f)
    assert np.max(np.abs(a.coeffs - b.coeffs)) <= 1e-10
    # finite-horizon truncation approaches at the per-mode exponential rate
    T = 0.25
    c = sp.sa_oracle(f, np.eye(2), T)
    gap = np.max(np.abs(c.coeffs - b.coeffs))
    assert gap <= math.exp(-4.0 * math.pi**2 * T) * np.max(np.abs(f.coeffs)) * 1.01


def test_sa_oracle_zero_horizon():
    out = sp.sa_oracle(crit_field(), np.eye(2), 0.0)
    assert out.l2_norm() == 0.0


def test_sa_oracle_exponential_profile_closed_form():
    f = sp.FourierField.from_modes(2, 2, {(1, 0): 0.5, (-1, 0): 0.5})
    out = sp.sa_oracle(f, np.eye(2), math.inf, profile=lambda t: math.exp(-t))
    lam = 4.0 * math.pi**2
    expect = -lam / (lam + 1.0)
    assert abs(out.coeffs[3, 2] / f.coeffs[3, 2] - expect) <= 1e-10


def test_sa_oracle_potential_fold():
    f = crit_field()
    m = 1.0
    out = sp.sa_oracle(f, np.eye(2), 0.5, v_const=-m)
    kk = sp.wavevectors(2, 4)
    k2 = np.sum(kk**2, -1)
    gam = 4.0 * math.pi**2 * k2 + 2.0 * m
    with np.errstate(divide="ignore", invalid="ignore"):
        sym = np.where(k2 > 0, -4.0 * math.pi**2 * k2 * (1 - np.exp(-gam * 0.5)) / gam, 0.0)
    assert np.max(np.abs(out.coeffs - sym * f.coeffs)) <= 1e-12


def test_multipliers_commute():
    f = sp.FourierField.random(2, 4, seed=11)
    r = sp.riesz2_symbol(0, 1, 2, 4)
    s = sp.sa_constant_symbol(np.array([[1.0, 0.3], [0.3, -0.5]]), 2, 4)
    a = s.apply(r.apply(f))
    b = r.apply(s.apply(f))
    assert np.max(np.abs(a.coeffs - b.coeffs)) <= 1e-10
    c = sp.heat_semigroup(r.apply(f), 0.2)
    d = r.apply(sp.heat_semigroup(f, 0.2))
    assert np.max(np.abs(c.coeffs - d.coeffs)) <= 1e-10


# ---- Laplace-transform-type multipliers -------------------------------------


def test_laplace_constant_profile():
    sym = sp.laplace_multiplier_symbol(lambda t: 1.0, 2, 4)
    K = 4
    nonzero = np.ones((9, 9), dtype=bool)
    nonzero[K, K] = False
    assert np.max(np.abs(sym.values[nonzero] + 0.5)) <= 1e-10
    assert sym.values[K, K] == 0.0


def test_laplace_zero_profile():
    sym = sp.laplace_multiplier_symbol(lambda t: 0.0, 2, 3)
    assert sym.sup_abs == 0.0


@pytest.mark.parametrize("profile,sup_a,breaks", [
    (lambda t: 1.0, 1.0, None),
    (lambda t: math.exp(-t), 1.0, None),
    (lambda t: 1.0 if t <= 1.0 else 0.0, 1.0, [1.0]),
])
def test_laplace_symbol_bound(profile, sup_a, breaks):
    sym = sp.laplace_multiplier_symbol(profile, 2, 5, breakpoints=breaks)
    assert sym.sup_abs <= sup_a / 2.0 + 1e-12


def test_laplace_box_closed_form():
    sym = sp.laplace_multiplier_symbol(lambda t: 1.0 if t <= 1.0 else 0.0, 1, 3,
                                       breakpoints=[1.0])
    lam = 2.0 * math.pi**2
    expect = -0.5 * (1.0 - math.exp(-2.0 * lam))
    assert abs(sym.values[4] - expect) <= 1e-10


def test_laplace_unbounded_profile_rejected():
    with pytest.raises(ValueError):
        sp.laplace_multiplier_symbol(lambda t: math.exp(t * t), 1, 1)


# ---- bilinear embedding ------------------------------------------------------


def test_bilinear_constant_field_vanishes():
    f = sp.FourierField.from_modes(2, 4, {(0, 0): 2.0})
    g = crit_field()
    assert sp.bilinear_embedding(f, g, math.inf) == 0.0


def test_bilinear_self_pairing_parseval():
    # mean-zero f, T = inf: int ||grad P_t f||_2^2 dt telescopes to ||f||_2^2
    f = crit_field()
    val = sp.bilinear_embedding(f, f, math.inf)
    assert abs(val - f.l2_norm() ** 2) <= 1e-8
    g = sp.FourierField.from_modes(2, 2, {(1, 0): 0.5, (-1, 0): 0.5})
    assert abs(sp.bilinear_embedding(g, g, math.inf) - 0.5) <= 1e-9


def test_bilinear_cauchy_schwarz():
    f = sp.FourierField.random(2, 3, seed=21)
    g = sp.FourierField.random(2, 3, seed=22)
    val = sp.bilinear_embedding(f, g, math.inf)
    a = sp.bilinear_embedding(f, f, math.inf)
    b = sp.bilinear_embedding(g, g, math.inf)
    assert val <= math.sqrt(a * b) * (1.0 + 1e-9)


# ---- SU(2) ------------------------------------------------------------------


def test_su2_multiplier_small_cases():
    assert abs(sp.su2_multiplier_value(2, 1.0, +1) - 1.0 / 3.0) <= 1e-15
    a = 1.7
    assert abs(sp.su2_multiplier_value(2, a, +1) - a * a / 3.0) <= 1e-13
    assert sp.su2_multiplier_value(5, 1.0, -1) == -sp.su2_multiplier_value(5, 1.0, +1)


def test_su2_multiplier_limit_and_bound():
    vals = [sp.su2_multiplier_value(n, 1.0, +1) for n in range(2, 4000)]
    assert vals[-1] <= 1.0
    assert abs(vals[-1] - 1.0) <= 1e-3
    assert max(abs(v) for v in vals) <= 1.0  # sup |m| <= ||alpha|| ||beta||


def test_su2_apply_guards_trivial_rep():
    cf = sp.SU2ClassFunction(np.array([1.0, 0.5, 0.0]))
    with pytest.raises(ValueError):
        sp.su2_multiplier_apply(cf)
    with pytest.raises(ValueError):
        sp.su2_multiplier_value(1)


def test_su2_apply_support_and_norm():
    coeffs = np.array([0.0, 2.0, 0.0, -1.0, 0.5])
    cf = sp.SU2ClassFunction(coeffs)
    out = sp.su2_multiplier_apply(cf, alpha_norm=2.0)
    assert np.array_equal(out.support(), cf.support())
    assert out.a(2) == 4.0 * 2.0 * (1.0 / 3.0)
    assert cf.l2_norm() == math.sqrt(float(np.sum(coeffs**2)))
