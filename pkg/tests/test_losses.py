import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.optimize import minimize_scalar

from fiol.core import DomainError, NumericError
from fiol.losses import (LOSSES, batch_deriv, batch_loss, conj_neg, conj_neg_deriv, dual_domain,
                         extended_conj_neg_deriv, loss_bregman, loss_deriv, loss_value,
                         solve_segment)

labels = {"squared": st.floats(-5, 5), "hinge": st.sampled_from([-1.0, 1.0]),
          "logistic": st.sampled_from([-1.0, 1.0]), "exponential": st.sampled_from([-1.0, 1.0])}


def kind_and_label():
    return st.sampled_from(LOSSES).flatmap(lambda k: st.tuples(st.just(k), labels[k]))


def test_value_examples():
    assert loss_value("squared", 0.0, 1.0) == 0.5
    assert loss_value("hinge", 2.0, 1.0) == 0.0
    assert loss_value("logistic", 0.0, 1.0) == pytest.approx(math.log(2))
    assert loss_value("exponential", 0.0, -1.0) == 1.0


def test_deriv_examples():
    assert loss_deriv("squared", 0.0, 1.0) == -1.0
    assert loss_deriv("hinge", 0.0, 1.0) == -1.0
    assert loss_deriv("hinge", 1.0, 1.0) == 0.0


@pytest.mark.parametrize("kind", ["hinge", "logistic", "exponential"])
def test_classification_label_check(kind):
    with pytest.raises(ValueError):
        loss_value(kind, 0.0, 0.5)
    with pytest.raises(ValueError):
        loss_deriv(kind, 0.0, 2.0)
    with pytest.raises(ValueError):
        batch_loss(kind, np.zeros(2), np.array([1.0, 0.0]))


def test_unknown_loss():
    with pytest.raises(ValueError):
        loss_value("huber", 0.0, 1.0)


def test_conj_deriv_examples():
    assert conj_neg_deriv("squared", 0.0, 1.0) == -1.0
    assert conj_neg_deriv("logistic", 0.5, 1.0) == 0.0
    assert conj_neg_deriv("exponential", 1.0, 1.0) == 0.0
    assert conj_neg_deriv("hinge", 0.5, 1.0) == -1.0
    with pytest.raises(DomainError):
        conj_neg_deriv("logistic", 1.0, 1.0)
    with pytest.raises(DomainError):
        conj_neg_deriv("exponential", 0.5, -1.0)


def test_domain_examples():
    d = dual_domain("squared", 3.0)
    assert (d.lo, d.hi) == (-math.inf, math.inf)
    d = dual_domain("hinge", 1.0)
    assert (d.lo, d.hi, d.open_lo, d.open_hi) == (0.0, 1.0, False, False)
    d = dual_domain("logistic", 1.0)
    assert (d.lo, d.hi, d.open_lo, d.open_hi) == (0.0, 1.0, True, True)
    d = dual_domain("hinge", -1.0)
    assert (d.lo, d.hi) == (-1.0, 0.0)
    d = dual_domain("exponential", -1.0)
    assert (d.lo, d.hi) == (-math.inf, 0.0)
    assert d.contains(-3.0) and not d.contains(0.0) and d.clamp(2.0) == 0.0


def test_segment_examples():
    assert solve_segment("squared", 1.0, 0.0, 1.0) == 0.5
    assert solve_segment("hinge", 1.0, 0.0, 1.0) == 1.0
    assert solve_segment("logistic", 0.0, 0.0, 1.0) == pytest.approx(0.5, abs=1e-12)
    assert solve_segment("exponential", 0.0, 0.0, 1.0) == pytest.approx(1.0, abs=1e-12)
    with pytest.raises(ValueError):
        solve_segment("squared", -1.0, 0.0, 1.0)


@given(kind_and_label(), st.floats(-8, 8))
def test_fenchel_young(kl, z0):
    kind, y = kl
    dom = dual_domain(kind, y)
    lo = max(dom.lo, -1e4)
    hi = min(dom.hi, 1e4)
    # phi(z0) = sup_beta -beta*z0 - phi*(-beta)
    res = minimize_scalar(lambda b: b * z0 + conj_neg(kind, b, y), bounds=(lo, hi),
                          method="bounded", options={"xatol": 1e-12})
    best = -res.fun
    for b in (lo, hi):
        v = conj_neg(kind, b, y)
        if math.isfinite(v):
            best = max(best, -(b * z0 + v))
    assert best == pytest.approx(loss_value(kind, z0, y), abs=1e-8, rel=1e-8)


@given(kind_and_label())
def test_conj_deriv_monotone(kl):
    kind, y = kl
    dom = dual_domain(kind, y)
    lo, hi = max(dom.lo, -20.0), min(dom.hi, 20.0)
    grid = np.linspace(lo, hi, 203)[1:-1]
    vals = extended_conj_neg_deriv(kind, grid, y)
    assert np.all(np.diff(vals) >= -1e-12)
    assert np.all(np.isfinite(vals))


@given(kind_and_label())
def test_extended_deriv_off_domain(kl):
    kind, y = kl
    dom = dual_domain(kind, y)
    if math.isfinite(dom.lo):
        assert extended_conj_neg_deriv(kind, np.array([dom.lo - 1.0]), y)[0] == -math.inf
    if math.isfinite(dom.hi):
        assert extended_conj_neg_deriv(kind, np.array([dom.hi + 1.0]), y)[0] == math.inf


@pytest.mark.parametrize("kind", LOSSES)
def test_deriv_matches_finite_difference(kind, rng):
    h = 1e-6
    checked = 0
    while checked < 100:
        z = rng.uniform(-4, 4)
        y = rng.uniform(-3, 3) if kind == "squared" else rng.choice([-1.0, 1.0])
        if kind == "hinge" and abs(1 - y * z) < 1e-3:
            continue
        fd = (loss_value(kind, z + h, y) - loss_value(kind, z - h, y)) / (2 * h)
        assert loss_deriv(kind, z, y) == pytest.approx(fd, abs=1e-6)
        checked += 1


@given(kind_and_label(), st.floats(-50, 50), st.floats(-50, 50))
def test_bregman_nonnegative(kl, z, z2):
    kind, y = kl
    assert loss_bregman(kind, z, z2, y) >= -1e-12 * (1 + abs(loss_value(kind, z2, y)))


@given(kind_and_label(), st.floats(0, 1e4), st.floats(-1e3, 1e3))
def test_segment_solution_is_optimal(kl, a, b):
    kind, y = kl
    # exponential root s solves s + a*e^s = y*b; beyond s = 709 exp overflows
    if kind == "exponential" and y * b - 709.0 >= a * math.exp(709.0):
        with pytest.raises(NumericError):
            solve_segment(kind, a, b, y)
        return
    beta = solve_segment(kind, a, b, y)
    assert dual_domain(kind, y).clamp(beta) == beta

    def g(t):
        return extended_conj_neg_deriv(kind, np.array([t]), y)[0] + a * t - b

    # the derivative changes sign across a relative neighbourhood of beta
    # (off-domain points evaluate to -inf / +inf, so boundary optima pass too)
    h = 1e-9 * max(1.0, abs(beta))
    scale = 1e-9 * (1 + abs(b) + a * (abs(beta) + h))
    assert g(beta - h) <= scale
    assert g(beta + h) >= -scale


def test_batch_matches_scalar(rng):
    z = rng.standard_normal(20) * 3
    for kind in LOSSES:
        y = rng.standard_normal(20) if kind == "squared" else rng.choice([-1.0, 1.0], 20)
        np.testing.assert_allclose(batch_loss(kind, z, y),
                                   [loss_value(kind, a, b) for a, b in zip(z, y)], rtol=1e-14)
        np.testing.assert_allclose(batch_deriv(kind, z, y),
                                   [loss_deriv(kind, a, b) for a, b in zip(z, y)], rtol=1e-14)
