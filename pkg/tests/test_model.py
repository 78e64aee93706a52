import numpy as np
import pytest
from hypothesis import given, strategies as st

from hyposde.errors import ArgumentError, ShapeError
from hyposde.model import (
    apply_generator, check_condition_a2, drift, generator_terms, jac_s1, jac_s2, memory_kernel_prony,
)
from hyposde.models import MODEL_NAMES, PRONY_KT, builtin_model

coord = st.floats(-2.0, 2.0, allow_nan=False)


def test_toy3_drift_and_generator_terms():
    p = builtin_model("toy3")
    x = np.array([0.0, 1.0, 2.0])
    np.testing.assert_allclose(drift(p.model, x, p.theta), [1.0, 2.0, -4.0])
    g1, g2, h1 = generator_terms(p.model, x, p.theta)
    # L(p) = s, L^2(p) = -beta s, L(s) = -beta s with beta = 2
    np.testing.assert_allclose(g1, [2.0])
    np.testing.assert_allclose(g2, [-4.0])
    np.testing.assert_allclose(h1, [-4.0])


@pytest.mark.parametrize("name", MODEL_NAMES)
@given(data=st.data())
def test_analytic_generators_match_finite_differences(name, data):
    p = builtin_model(name)
    x = np.array(data.draw(st.lists(coord, min_size=p.model.dims.n, max_size=p.model.dims.n)))
    for phi, order in (("s1", 1), ("s1", 2), ("s2", 1)):
        a = apply_generator(p.model, phi, x, p.theta, order, method="analytic")
        f = apply_generator(p.model, phi, x, p.theta, order, method="fd")
        np.testing.assert_allclose(f, a, rtol=1e-5, atol=1e-5 * (1 + np.abs(a).max()))


@pytest.mark.parametrize("name", MODEL_NAMES)
def test_jacobians_shapes(name):
    p = builtin_model(name)
    d = p.model.dims
    x = np.zeros((4, d.n))
    assert jac_s1(p.model, x, p.theta).shape == (4, d.n_s1, d.n_s2)
    assert jac_s2(p.model, x, p.theta).shape == (4, d.n_s2, d.n_r)


def test_condition_a2_toy_brackets():
    p = builtin_model("toy3")
    rep = check_condition_a2(p.model, np.zeros(3), p.theta)
    assert rep.passed
    assert (rep.rank_r, rep.rank_s2r, rep.rank_full) == (1, 2, 3)
    # with sigma = 4, beta = 2: V = 4 e3, [V0, V] = (0, -4, 8), [V0, [V0, V]] = (4, -8, 16)
    np.testing.assert_allclose(rep.fields[:, 0], [0.0, 0.0, 4.0])
    np.testing.assert_allclose(np.abs(rep.brackets[:, 0]), [0.0, 4.0, 8.0], atol=1e-6)
    np.testing.assert_allclose(np.abs(rep.brackets2[:, 0]), [4.0, 8.0, 16.0], atol=1e-5)


def test_condition_a2_fails_without_coupling():
    p = builtin_model("qgle_ho")
    theta = p.theta.values.copy()
    theta[1] = 0.0     # lambda = 0 decouples the auxiliary variable
    rep = check_condition_a2(p.model, np.array([0.3, -0.2, 0.5]), p.model.params(theta))
    assert not rep.passed


def test_condition_a2_rejects_bad_tolerance():
    p = builtin_model("toy3")
    with pytest.raises(ArgumentError):
        check_condition_a2(p.model, np.zeros(3), p.theta, tol=0.0)


def test_prony_kernel_at_zero():
    c, tau = np.array([0.22, 1.2]), np.array([0.007, 4.6])
    assert memory_kernel_prony(0.0, c, tau) == pytest.approx(0.22 / 0.007 + 1.2 / 4.6)
    with pytest.raises(ArgumentError):
        memory_kernel_prony(1.0, c, [0.0, 1.0])
    with pytest.raises(ShapeError):
        memory_kernel_prony(1.0, c, [1.0])


@given(st.floats(0.0, 50.0))
def test_prony_kernel_is_positive_and_decreasing(t):
    c, tau = np.array([0.22, 1.2]), np.array([0.007, 4.6])
    assert memory_kernel_prony(t + 0.1, c, tau) < memory_kernel_prony(t, c, tau)
    assert memory_kernel_prony(t, c, tau) > 0


def test_param_vector_validation():
    m = builtin_model("toy3").model
    with pytest.raises(ArgumentError):
        m.params([2.0, -1.0])
    with pytest.raises(ShapeError):
        m.params([2.0])
    pv = m.params([2.0, 4.0])
    assert pv.as_dict() == {"beta": 2.0, "sigma": 4.0}
    np.testing.assert_array_equal(pv.clamp([1e6, -1.0]), [50.0, 1e-6])


def test_unknown_model_lists_available():
    with pytest.raises(LookupError, match="toy3"):
        builtin_model("nope")


def test_prony_preset_prior_uses_temperature():
    p = builtin_model("qgle_prony")
    np.testing.assert_allclose(np.diag(p.prior_cov), PRONY_KT)
