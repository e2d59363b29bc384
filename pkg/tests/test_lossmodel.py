import itertools
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from droughtrate import dataset, empirics, lossmodel
from droughtrate.dataset import PriceSchedule, ThetaSeries, YieldPanel
from droughtrate.errors import ValidationError, ZeroVarianceError
from droughtrate.lossmodel import LossSeries

from conftest import random_panel


def _losses(L):
    L = np.asarray(L, dtype=float)
    z = np.zeros_like(L)
    return LossSeries(crops=tuple(f"c{j}" for j in range(L.shape[0])), loss=L, gain=z,
                      surplus=-L)


def _theta(shares):
    shares = np.asarray(shares, dtype=float)
    return ThetaSeries(shares=shares, alphas=shares.mean(axis=1))


def _const_theta(alphas, n):
    return _theta(np.repeat(np.asarray(alphas, float)[:, None], n, axis=1))


def _setup(panel, prices=None, mu=None):
    prices = prices or PriceSchedule(panel.crops, np.linspace(1.0, 3.0, panel.n_crops))
    mu = np.median(panel.yields, axis=1) if mu is None else mu
    thr = empirics.external_thresholds(panel, mu)
    return dataset.derive_theta(panel), lossmodel.loss_gain_surplus(panel, prices, thr)


# -- per-crop series ---------------------------------------------------------


def test_loss_gain_surplus_examples():
    panel = YieldPanel(["a"], [1, 2, 3], [[100.0, 60.0, 130.0]], np.ones((1, 3)))
    ls = lossmodel.loss_gain_surplus(panel, PriceSchedule(["a"], [2.0]),
                                     empirics.external_thresholds(panel, [100.0]))
    assert ls.loss.tolist() == [[0.0, 80.0, 0.0]]
    assert ls.gain.tolist() == [[0.0, 0.0, 60.0]]
    assert ls.surplus.tolist() == [[0.0, -80.0, 60.0]]


def test_loss_gain_match_cell_by_cell(panel, prices, declarations):
    thr = empirics.thresholds_for_omega(panel, declarations.omega_hat)
    ls = lossmodel.loss_gain_surplus(panel, prices, thr)
    lam = dict(zip(prices.crops, prices.values.tolist()))
    for j, crop in enumerate(panel.crops):
        mu = float(thr.mu_c[j])
        for t in range(panel.n_years):
            y = float(panel.yields[j, t])
            loss = lam[crop] * (mu - y) if y < mu else 0.0
            gain = lam[crop] * (y - mu) if y > mu else 0.0
            assert ls.loss[j, t] == loss
            assert ls.gain[j, t] == gain
            assert ls.surplus[j, t] == gain - loss


@settings(max_examples=50)
@given(st.integers(0, 2 ** 32 - 1))
def test_loss_gain_exclusive(seed):
    rng = np.random.default_rng(seed)
    panel = random_panel(rng, 3, 15)
    _, ls = _setup(panel)
    assert np.all(ls.loss >= 0) and np.all(ls.gain >= 0)
    assert np.all(ls.loss * ls.gain == 0)
    assert np.array_equal(ls.surplus, ls.gain - ls.loss)


def test_missing_price_raises():
    panel = YieldPanel(["a", "b"], [1, 2], np.ones((2, 2)), np.ones((2, 2)))
    with pytest.raises(ValidationError):
        lossmodel.loss_gain_surplus(panel, PriceSchedule(["a"], [1.0]),
                                    empirics.external_thresholds(panel, [1.0, 1.0]))


def test_revenue(panel, prices):
    z = YieldPanel(["a"], [1, 2], np.zeros((1, 2)), np.ones((1, 2)))
    assert lossmodel.revenue_series(z, PriceSchedule(["a"], [1.75])).tolist() == [[0.0, 0.0]]
    one = YieldPanel(["maize"], [1, 2], [[400.0, 0.0]], np.ones((1, 2)))
    assert lossmodel.revenue_series(one, PriceSchedule(["maize"], [1.75]))[0, 0] == 700.0
    rev = lossmodel.revenue_series(panel, prices)
    lam = {"maize": 1.75, "sorghum": 1.70, "cowpeas": 11.90}
    for j, c in enumerate(panel.crops):
        for t in range(panel.n_years):
            assert rev[j, t] == lam[c] * float(panel.yields[j, t])


# -- pooled mean -------------------------------------------------------------


def test_mean_constant_equal_theta():
    rng = np.random.default_rng(0)
    L = rng.exponential(50.0, size=(3, 20))
    got = lossmodel.mean_weighted_loss(_const_theta([1 / 3] * 3, 20), _losses(L))
    assert got == pytest.approx(sum(L[j].mean() for j in range(3)) / 3, rel=1e-13)


def test_mean_single_crop():
    L = np.array([[0.0, 3.0, 9.0, 0.0]])
    assert lossmodel.mean_weighted_loss(_const_theta([1.0], 4), _losses(L)) == 3.0


def test_mean_matches_pooled_series(panel, prices, declarations):
    thr = empirics.thresholds_for_omega(panel, declarations.omega_hat)
    theta = dataset.derive_theta(panel)
    ls = lossmodel.loss_gain_surplus(panel, prices, thr)
    series = []
    for t in range(panel.n_years):
        series.append(sum(float(theta.shares[j, t]) * float(ls.loss[j, t])
                          for j in range(panel.n_crops)))
    assert lossmodel.mean_weighted_loss(theta, ls) == pytest.approx(
        sum(series) / len(series), rel=1e-12)


@settings(max_examples=100, deadline=None)
@given(st.integers(1, 5), st.integers(2, 200), st.integers(0, 2 ** 32 - 1))
def test_mean_identity_property(J, n, seed):
    rng = np.random.default_rng(seed)
    theta, ls = _setup(random_panel(rng, J, n))
    # raises IdentityCheckError on disagreement
    lossmodel.mean_weighted_loss(theta, ls)


# -- pooled variance ---------------------------------------------------------


def test_var_constant_theta_matches_covariance_expansion():
    rng = np.random.default_rng(4)
    J, n = 4, 60
    L = rng.exponential(30.0, size=(J, n))
    a = np.array([0.1, 0.2, 0.3, 0.4])
    got = lossmodel.var_weighted_loss(_const_theta(a, n), _losses(L), "direct", ddof=1)
    expansion = 0.0
    for i in range(J):
        for j in range(J):
            mi, mj = L[i].mean(), L[j].mean()
            cov = sum((L[i, t] - mi) * (L[j, t] - mj) for t in range(n)) / (n - 1)
            expansion += a[i] * a[j] * cov
    assert got == pytest.approx(expansion, rel=1e-12)


def test_var_single_crop():
    L = np.array([[1.0, 5.0, 2.0, 8.0]])
    th = _const_theta([1.0], 4)
    assert lossmodel.var_weighted_loss(th, _losses(L), ddof=1) == pytest.approx(
        np.var(L[0], ddof=1), rel=1e-15)
    assert lossmodel.var_weighted_loss(th, _losses(L), "decomposed", ddof=1) == pytest.approx(
        np.var(L[0], ddof=1), rel=1e-12)


def enumerated_variance(outcomes):
    """Population variance of sum_j theta_j L_j over (prob, theta, L) outcomes,
    in exact rational arithmetic."""
    mean = sum(p * sum(Fraction(t) * Fraction(l) for t, l in zip(th, L))
               for p, th, L in outcomes)
    return float(sum(
        p * (sum(Fraction(t) * Fraction(l) for t, l in zip(th, L)) - mean) ** 2
        for p, th, L in outcomes
    ))


def joint_to_panel(outcomes):
    """Replicate each outcome in proportion to its probability."""
    denom = np.lcm.reduce([p.denominator for p, _, _ in outcomes])
    cols_t, cols_l = [], []
    for p, th, L in outcomes:
        for _ in range(int(p * denom)):
            cols_t.append(th)
            cols_l.append(L)
    return _theta(np.array(cols_t, float).T), _losses(np.array(cols_l, float).T)


JOINTS = [
    # (probability, shares, losses)
    [(Fraction(1, 2), (1.0,), (0.0,)), (Fraction(1, 2), (1.0,), (100.0,))],
    [(Fraction(1, 4), (0.5, 0.5), (10.0, 0.0)), (Fraction(1, 4), (0.25, 0.75), (0.0, 4.0)),
     (Fraction(1, 2), (0.75, 0.25), (6.0, 2.0))],
    [(Fraction(1, 8), (0.2, 0.3, 0.5), (1.0, 2.0, 3.0)),
     (Fraction(3, 8), (0.5, 0.25, 0.25), (0.0, 8.0, 1.0)),
     (Fraction(1, 4), (0.125, 0.375, 0.5), (5.0, 0.0, 0.0)),
     (Fraction(1, 4), (0.25, 0.25, 0.5), (2.5, 1.5, 7.0))],
]


@pytest.mark.parametrize("joint", JOINTS)
def test_var_matches_exhaustive_enumeration(joint):
    theta, ls = joint_to_panel(joint)
    exact = enumerated_variance(joint)
    for mode in ("direct", "decomposed"):
        assert abs(lossmodel.var_weighted_loss(theta, ls, mode, ddof=0) - exact) <= \
            1e-12 * max(1.0, exact)


@settings(max_examples=150, deadline=None)
@given(st.integers(1, 5), st.integers(2, 200), st.integers(0, 2 ** 32 - 1), st.sampled_from([0, 1]))
def test_direct_equals_decomposed(J, n, seed, ddof):
    rng = np.random.default_rng(seed)
    theta, ls = _setup(random_panel(rng, J, n))
    d = lossmodel.var_weighted_loss(theta, ls, "direct", ddof=ddof)
    e = lossmodel.var_weighted_loss(theta, ls, "decomposed", ddof=ddof)
    assert abs(d - e) <= 1e-9 * max(abs(d), abs(e), 1e-300)


def test_independent_reduction_is_not_a_variance():
    # constant shares make every Cov(theta^2, L^2) vanish, yet losses vary
    rng = np.random.default_rng(9)
    L = rng.exponential(10.0, size=(2, 40))
    th = _const_theta([0.5, 0.5], 40)
    assert lossmodel.var_weighted_loss(th, _losses(L), "independent_reduction") == 0.0
    assert lossmodel.var_weighted_loss(th, _losses(L), "direct") > 0.0


def test_var_errors():
    th = _const_theta([1.0], 3)
    with pytest.raises(ValidationError):
        lossmodel.var_weighted_loss(th, _losses([[1.0, 2.0, 3.0]]), "bogus")
    with pytest.raises(ValidationError):
        lossmodel.var_weighted_loss(_const_theta([1.0], 2), _losses([[1.0, 2.0, 3.0]]))


# -- coefficient of effectiveness --------------------------------------------


def hadamard(k):
    H = np.array([[1.0]])
    for _ in range(k):
        H = np.block([[H, H], [H, -H]])
    return H


def equal_cov_losses(J, v, c, k=4):
    """Losses with every variance exactly ``v`` and every pairwise covariance
    exactly ``c`` (population divisor), built from orthogonal Hadamard rows."""
    H = hadamard(k)[1:]  # zero-mean, unit population variance, mutually orthogonal
    common = H[0]
    return np.array([100.0 + np.sqrt(c) * common + np.sqrt(v - c) * H[j + 1]
                     for j in range(J)])


@pytest.mark.parametrize("J", [1, 2, 3, 5])
@pytest.mark.parametrize("v, c", [(4.0, 0.0), (4.0, 1.0), (9.0, 9.0), (2.0, 0.5)])
def test_phi_equal_covariance_formula(J, v, c):
    L = equal_cov_losses(J, v, c)
    phi = lossmodel.coefficient_of_effectiveness(_const_theta([1 / J] * J, L.shape[1]),
                                                 _losses(L))
    expected = 1 / J + (J - 1) * c / (J * v)
    assert phi == pytest.approx(expected, rel=1e-12)


def test_phi_single_crop_and_identical_losses():
    rng = np.random.default_rng(1)
    L = rng.exponential(5.0, size=(1, 30))
    assert lossmodel.coefficient_of_effectiveness(_const_theta([1.0], 30), _losses(L)) == \
        pytest.approx(1.0, rel=1e-14)
    same = np.repeat(L, 3, axis=0)
    assert lossmodel.coefficient_of_effectiveness(
        _const_theta([1 / 3] * 3, 30), _losses(same)) == pytest.approx(1.0, rel=1e-12)


def test_phi_zero_variance():
    with pytest.raises(ZeroVarianceError):
        lossmodel.coefficient_of_effectiveness(_const_theta([0.5, 0.5], 3),
                                               _losses(np.zeros((2, 3))))


@settings(max_examples=50, deadline=None)
@given(st.integers(1, 4), st.integers(3, 80), st.integers(0, 2 ** 32 - 1),
       st.floats(0.01, 100.0))
def test_price_scaling(J, n, seed, s):
    rng = np.random.default_rng(seed)
    panel = random_panel(rng, J, n)
    mu = np.median(panel.yields, axis=1)
    base = PriceSchedule(panel.crops, rng.uniform(0.5, 5.0, J))
    scaled = PriceSchedule(panel.crops, base.values * s)
    th, a = _setup(panel, base, mu)
    _, b = _setup(panel, scaled, mu)
    assert np.allclose(b.loss, s * a.loss, rtol=1e-13, atol=0)
    assert np.allclose(b.gain, s * a.gain, rtol=1e-13, atol=0)
    sa, sb = lossmodel.cluster_stats(th, a), lossmodel.cluster_stats(th, b)
    assert sb.mean_loss == pytest.approx(s * sa.mean_loss, rel=1e-12, abs=1e-300)
    assert sb.mean_surplus == pytest.approx(s * sa.mean_surplus, rel=1e-10, abs=1e-9 * s)
    assert sb.var_loss == pytest.approx(s * s * sa.var_loss, rel=1e-11, abs=1e-300)
    if np.isfinite(sa.phi):
        assert sb.phi == pytest.approx(sa.phi, rel=1e-11)
        assert sa.phi >= 0


def test_minimizer_and_grid_search():
    w, val = lossmodel.effectiveness_minimizer(3)
    assert np.allclose(w, 1 / 3) and val == pytest.approx(1 / 3)
    w, val = lossmodel.effectiveness_minimizer(1)
    assert w.tolist() == [1.0] and val == 1.0
    steps = [k / 20 for k in range(21)]
    best = min(
        lossmodel.equal_variance_effectiveness((a, b, c, 1 - a - b - c))
        for a, b, c in itertools.product(steps, repeat=3) if a + b + c <= 1 + 1e-12
    )
    assert best == pytest.approx(0.25, abs=1e-12)
    assert best >= lossmodel.effectiveness_minimizer(4)[1] - 1e-12


# -- surplus -----------------------------------------------------------------


def test_surplus_all_above_thresholds():
    panel = YieldPanel(["a", "b"], [1, 2, 3], [[5.0, 6.0, 7.0], [8.0, 9.0, 10.0]],
                       [[1.0, 2.0, 3.0], [3.0, 2.0, 1.0]])
    thr = empirics.external_thresholds(panel, [1.0, 1.0])
    ls = lossmodel.loss_gain_surplus(panel, PriceSchedule(["a", "b"], [1.0, 2.0]), thr)
    th = dataset.derive_theta(panel)
    st_ = lossmodel.cluster_stats(th, ls)
    assert st_.mean_surplus > 0
    assert st_.mean_surplus == pytest.approx(st_.mean_gain, rel=1e-15)
    assert st_.per_crop_insurable.tolist() == [True, True]
    below = lossmodel.loss_gain_surplus(panel, PriceSchedule(["a", "b"], [1.0, 2.0]),
                                        empirics.external_thresholds(panel, [50.0, 50.0]))
    assert lossmodel.surplus_stats(th, below).mean_surplus < 0


def test_surplus_matches_pooled_series(panel, prices):
    thr = empirics.thresholds_for_omega(panel, 0.4)
    theta = dataset.derive_theta(panel)
    ls = lossmodel.loss_gain_surplus(panel, prices, thr)
    ss = lossmodel.surplus_stats(theta, ls)
    series = [sum(float(theta.shares[j, t]) * float(ls.surplus[j, t]) for j in range(3))
              for t in range(panel.n_years)]
    assert ss.mean_surplus == pytest.approx(sum(series) / len(series), rel=1e-12)
    fac = sum(float(theta.alphas[j]) * float(ls.surplus[j].mean()) for j in range(3))
    assert ss.factorized_mean_surplus == pytest.approx(fac, rel=1e-12)
    assert ss.insurable.tolist() == [s > 0 for s in ss.per_crop_mean]


# -- gross premium -----------------------------------------------------------


def test_gross_premium():
    assert lossmodel.gross_premium(100, 0, 0).gross == 100
    b = lossmodel.gross_premium(322, 50, 28)
    assert (b.net_premium, b.buffer_load, b.admin_cost, b.gross) == (322, 50, 28, 400)
    with pytest.raises(ValidationError):
        lossmodel.gross_premium(-1, 0, 0)


@given(st.floats(0, 1e9), st.floats(0, 1e9), st.floats(0, 1e9))
def test_gross_premium_is_sum(a, b, c):
    assert lossmodel.gross_premium(a, b, c).gross == a + b + c
