import hashlib

import numpy as np
import pytest
from hypothesis import given, strategies as st

from hyposde.errors import ArgumentError, DivergenceError, ParseError
from hyposde.models import builtin_model
from hyposde.stochastics import (
    INCREMENT_MAP, INCREMENT_POWERS, ObservationSet, PathSample, drop_burn_in, increment_covariance,
    increment_from_normals, noise_loadings, project_observed, read_csv, sample_increment, scheme_increment,
    simulate, simulate_many, subsample, write_csv,
)

from oracles import exact_toy_transition, toy_unit_covariance_quadrature


@given(st.floats(1e-4, 10.0))
def test_increment_map_reproduces_covariance(delta):
    scaled = INCREMENT_MAP * (delta ** INCREMENT_POWERS)[:, None]
    np.testing.assert_allclose(scaled @ scaled.T, increment_covariance(delta), rtol=1e-12)


def test_unit_increment_covariance_matches_quadrature():
    # quadrature orders the triple (i110, i10, dB); reverse it
    ref = toy_unit_covariance_quadrature()[::-1, ::-1]
    np.testing.assert_allclose(increment_covariance(1.0), ref, rtol=1e-12)


def test_increment_from_normals_rejects_bad_input():
    with pytest.raises(ArgumentError):
        increment_from_normals(np.zeros((3, 1)), 0.0)


def test_sample_increment_shapes(rng):
    inc = sample_increment(0.1, 2, rng, size=5)
    assert inc.db.shape == inc.i10.shape == inc.i110.shape == (5, 2)


def test_em_loads_noise_on_rough_block_only():
    p = builtin_model("qgle_ho")
    g = noise_loadings(p.model, 0.1, np.zeros(3), p.theta, "EM")
    assert np.all(g[:2] == 0.0)
    assert np.any(g[2] != 0.0)


def test_lg1_has_no_smooth_noise_but_lg2_does():
    p = builtin_model("toy3")
    g1 = noise_loadings(p.model, 0.1, np.zeros(3), p.theta, "LG1")
    g2 = noise_loadings(p.model, 0.1, np.zeros(3), p.theta, "LG2")
    assert np.all(g1[0] == 0.0)
    assert np.any(g2[0] != 0.0)


def test_lg2_drift_vs_nocorr():
    p = builtin_model("toy3")
    x = np.array([0.0, 1.0, 2.0])
    full = scheme_increment(p.model, 0.1, x, p.theta, "LG2")
    bare = scheme_increment(p.model, 0.1, x, p.theta, "LG2_nocorr")
    np.testing.assert_allclose(bare, [0.1, 0.2, -0.4])
    np.testing.assert_allclose(full, [0.109333333333333, 0.18, -0.4])


def test_lg2_noise_matches_exact_transition_to_leading_order():
    # LG2 covariance of toy-3 against the exact OU covariance: agreement improves as delta shrinks
    p = builtin_model("toy3")
    beta, sigma = p.theta.values
    errs = []
    for delta in (0.1, 0.01):
        g = noise_loadings(p.model, delta, np.zeros(3), p.theta, "LG2")
        lg = g @ g.T
        _, w = exact_toy_transition(beta, sigma, delta)
        s = np.array([delta ** 2.5, delta ** 1.5, delta ** 0.5])
        errs.append(np.max(np.abs(lg - w) / np.outer(s, s)))
    assert errs[1] < errs[0] / 5


def test_replication_independent_of_rep_count():
    p = builtin_model("toy3")
    one = simulate_many(p.model, p.theta, np.zeros(3), 0.01, 200, seed=11, reps=1)[0]
    three = simulate_many(p.model, p.theta, np.zeros(3), 0.01, 200, seed=11, reps=3)
    np.testing.assert_array_equal(one.states, three[0].states)
    assert not np.array_equal(three[0].states, three[1].states)


def test_fast_and_generic_paths_agree():
    p = builtin_model("qgle_ho")
    a = simulate_many(p.model, p.theta, np.zeros(3), 0.01, 500, seed=3, reps=2, keep_every=5)
    b = simulate_many(p.model, p.theta, np.zeros(3), 0.01, 500, seed=3, reps=2, keep_every=5, fast=False)
    for x, y in zip(a, b):
        np.testing.assert_allclose(x.states, y.states, rtol=1e-12, atol=1e-12)


def test_keep_every_subsamples_same_path():
    p = builtin_model("toy3")
    full = simulate(p.model, p.theta, np.zeros(3), 0.01, 100, rng=4)
    sparse = simulate(p.model, p.theta, np.zeros(3), 0.01, 100, rng=4, keep_every=10)
    np.testing.assert_array_equal(subsample(full, 10).states, sparse.states)
    assert sparse.delta == pytest.approx(0.1)


def test_divergence_reports_step():
    p = builtin_model("toy3")
    with pytest.raises(DivergenceError) as err:
        simulate(p.model, [-50.0, 4.0], np.zeros(3), 1.0, 200, rng=0)
    assert err.value.step >= 1


def test_simulate_argument_errors():
    p = builtin_model("toy3")
    with pytest.raises(ArgumentError):
        simulate(p.model, p.theta, np.zeros(3), 0.01, 10, scheme="RK4")
    with pytest.raises(ArgumentError):
        simulate(p.model, p.theta, np.zeros(3), -0.01, 10)
    with pytest.raises(ArgumentError):
        simulate(p.model, p.theta, np.zeros(3), 0.01, 10, keep_every=3)


def test_path_helpers():
    states = np.arange(30.0).reshape(10, 3)
    path = PathSample(states[:9], 0.5)
    burnt = drop_burn_in(path, 2)
    assert burnt.t0 == 1.0 and burnt.n == 6
    obs = project_observed(path, (0,))
    assert obs.mask == (0,) and obs.values.shape == (9, 1)
    np.testing.assert_array_equal(obs.column(0), states[:9, 0])
    with pytest.raises(ArgumentError):
        project_observed(path, (3,))
    with pytest.raises(ArgumentError):
        subsample(path, 3)


@given(st.integers(2, 30), st.floats(1e-4, 1.0), st.floats(0.0, 1e3), st.integers(0, 2**32 - 1))
def test_csv_round_trip(tmp_path_factory, n, delta, t0, seed):
    vals = np.random.default_rng(seed).normal(size=(n, 2)) * 1e3
    path = tmp_path_factory.mktemp("csv") / "obs.csv"
    write_csv(ObservationSet(vals, delta, (0, 2), t0), path)
    back = read_csv(path)
    np.testing.assert_array_equal(back.values, vals)
    assert back.mask == (0, 2)
    assert back.delta == pytest.approx(delta, rel=1e-9)


def test_csv_is_deterministic(tmp_path):
    p = builtin_model("toy3")
    digests = []
    for k in range(2):
        path = simulate(p.model, p.theta, np.zeros(3), 0.01, 50, rng=9)
        write_csv(path, tmp_path / f"{k}.csv")
        digests.append(hashlib.sha256((tmp_path / f"{k}.csv").read_bytes()).hexdigest())
    assert digests[0] == digests[1]


@pytest.mark.parametrize("text, row", [
    ("t,x1\n0,1\n0.1,2\n0.3,3\n", "row 3"),
    ("t,x1\n0,1\n0.1,abc\n", "row 3"),
    ("t,x1\n0,1\n0.1\n", "row 3"),
    ("q,x1\n0,1\n0.1,2\n", "row 1"),
])
def test_csv_parse_errors(tmp_path, text, row):
    path = tmp_path / "bad.csv"
    path.write_text(text)
    with pytest.raises(ParseError, match=row):
        read_csv(path)


def test_csv_missing_required_column(tmp_path):
    path = tmp_path / "q.csv"
    path.write_text("t,x1\n0,1\n0.1,2\n")
    with pytest.raises(ParseError, match="x3"):
        read_csv(path, required=(2,))


def test_csv_large_time_origin(tmp_path):
    # t0 of order 1e5 with a 1e-3 step still parses
    obs = ObservationSet(np.zeros((1001, 1)), 1e-3, (0,), 1e5)
    write_csv(obs, tmp_path / "late.csv")
    assert read_csv(tmp_path / "late.csv").n == 1000
