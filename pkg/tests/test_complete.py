import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hyposde.complete import (
    asymptotic_precision, contrast, estimate_complete, fit_document, write_json,
)
from hyposde.density import log_transition_density
from hyposde.errors import ArgumentError
from hyposde.models import builtin_model
from hyposde.optimize import SENTINEL
from hyposde.stochastics import project_observed, simulate


@pytest.fixture(scope="module")
def toy_data():
    p = builtin_model("toy3")
    path = simulate(p.model, p.theta, np.zeros(3), 1e-3, 200_000, rng=17, keep_every=10)
    return project_observed(path, (0, 1, 2))


@given(st.floats(0.5, 4.0), st.floats(1.0, 8.0))
@settings(max_examples=15)
def test_contrast_is_minus_twice_loglik_up_to_constant(toy_data, beta, sigma):
    p = builtin_model("toy3")
    x, y = toy_data.values[:-1][:500], toy_data.values[1:][:500]
    ll = log_transition_density(p.model, toy_data.delta, x, y, [beta, sigma]).sum()
    c = contrast(p.model, (toy_data.values[:501], toy_data.delta), [beta, sigma])
    const = 500 * (3 * np.log(2 * np.pi) + 9 * np.log(toy_data.delta))
    assert c == pytest.approx(-2 * ll - const, rel=1e-10)


def test_contrast_prefers_truth(toy_data):
    p = builtin_model("toy3")
    at_truth = contrast(p.model, toy_data, p.theta)
    assert at_truth < contrast(p.model, toy_data, [2.0, 4.4])
    assert at_truth < contrast(p.model, toy_data, [2.0, 3.6])


def test_degenerate_covariance_gives_sentinel():
    p = builtin_model("qgle_ho")
    path = simulate(p.model, p.theta, np.zeros(3), 0.01, 20, rng=0)
    assert contrast(p.model, (path.states, 0.01), [1.0, 0.0, 4.0, 1.0]) == SENTINEL


def test_estimate_recovers_truth(toy_data):
    p = builtin_model("toy3")
    res = estimate_complete(p.model, toy_data, [1.0, 3.0])
    se = asymptotic_precision(p.model, toy_data, res.theta_hat).se
    assert res.converged
    assert abs(res.theta_hat.values[0] - 2.0) < 4 * se[0]
    assert abs(res.theta_hat.values[1] - 4.0) < 4 * se[1]


def test_precision_blocks_against_hand_derivation(toy_data):
    p = builtin_model("toy3")
    prec = asymptotic_precision(p.model, toy_data, p.theta)
    s = toy_data.values[:-1, 2]
    # drift of s is -beta s with a_R = sigma^2, and Sigma scales as sigma^2
    assert prec.gamma_blocks["beta_r"][0, 0] == pytest.approx(np.mean(s * s) / 16.0, rel=1e-6)
    assert prec.gamma_blocks["sigma"][0, 0] == pytest.approx(6.0 / 16.0, rel=1e-6)
    n, delta = toy_data.n, toy_data.delta
    np.testing.assert_allclose(prec.rates, [np.sqrt(n * delta), np.sqrt(n)])
    assert not prec.pseudo_inverse


def test_rejects_partial_data(toy_data):
    p = builtin_model("toy3")
    obs = type(toy_data)(toy_data.values[:, :1], toy_data.delta, (0,))
    with pytest.raises(ArgumentError):
        contrast(p.model, obs, p.theta)
    with pytest.raises(ArgumentError):
        contrast(p.model, (toy_data.values[:1], 0.01), p.theta)


def test_fit_document_is_json(tmp_path, toy_data):
    p = builtin_model("toy3")
    sub = (toy_data.values[:2000], toy_data.delta)
    res = estimate_complete(p.model, sub, p.theta)
    doc = fit_document(res, [0.1, 0.2], {"model": "toy3"}, 5)
    write_json(doc, tmp_path / "fit.json")
    back = json.loads((tmp_path / "fit.json").read_text())
    assert set(back["theta_hat"]) == {"beta", "sigma"}
    assert back["seed"] == 5
