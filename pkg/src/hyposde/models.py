"""Built-in models with closed-form generator terms and their reference presets."""

from dataclasses import dataclass, field

import numpy as np

from .model import Dims, ModelSpec, ParamVector

# temperature and free-energy constants of the protein-folding style QGLE
PRONY_KT = 2.949
PRONY_U = {"q_min": 0.30, "q_max": 0.90, "a": 1200.0, "b": 0.001}


@dataclass(frozen=True)
class Preset:
    model: ModelSpec
    theta: ParamVector
    x0: np.ndarray
    prior_mean: np.ndarray      # hidden block (x_S2, x_R) at time 0
    prior_cov: np.ndarray
    constants: dict = field(default_factory=dict)


def _const_matrix(x, mat):
    mat = np.asarray(mat, dtype=float)
    return np.broadcast_to(mat, x.shape[:-1] + mat.shape)


def _ones_like_batch(x, shape):
    return np.ones(x.shape[:-1] + shape)


# ---------------------------------------------------------------------------
# linear toy model: dq = p dt, dp = s dt, ds = -beta s dt + sigma dB

def _toy(name, beta_fixed=None):
    if beta_fixed is None:
        names, blocks = ("beta", "sigma"), ("beta_r", "sigma")
        bounds = ((-50.0, 50.0), (1e-6, 1e3))
        beta = lambda th: th[0]
        sigma = lambda th: th[1]
    else:
        names, blocks = ("sigma",), ("sigma",)
        bounds = ((1e-6, 1e3),)
        beta = lambda th: beta_fixed
        sigma = lambda th: th[0]

    return ModelSpec(
        name=name,
        dims=Dims(1, 1, 1, 1),
        param_names=names,
        param_blocks=blocks,
        param_bounds=bounds,
        drift_s1=lambda xs, th: xs[..., 1:2].copy(),
        drift_s2=lambda x, th: x[..., 2:3].copy(),
        drift_r=lambda x, th: -beta(th) * x[..., 2:3],
        diff_r=lambda x, th: sigma(th) * _ones_like_batch(x, (1, 1)),
        jac_s1_wrt_s2=lambda xs, th: _ones_like_batch(xs, (1, 1)),
        jac_s2_wrt_r=lambda x, th: _ones_like_batch(x, (1, 1)),
        gen_s1=lambda x, th: x[..., 2:3].copy(),
        gen2_s1=lambda x, th: -beta(th) * x[..., 2:3],
        gen_s2=lambda x, th: -beta(th) * x[..., 2:3],
        constant_diffusion=True,
    )


# ---------------------------------------------------------------------------
# scalar QGLE: dq = p dt, dp = (-U'(q) + lam s) dt, ds = (-lam p - alpha s) dt + sigma dB

def _u_ho(q, d):
    return d * q, d * np.ones_like(q)


def _u_dw(q, d):
    arg = 0.25 + 2.0 * q
    return d * q + 2.0 * np.cos(arg), d - 4.0 * np.sin(arg)


def _qgle(name, potential):
    def v_s2(x, th):
        du, _ = potential(x[..., 0], th[0])
        return (-du + th[1] * x[..., 2])[..., None]

    def v_r(x, th):
        return (-th[1] * x[..., 1] - th[2] * x[..., 2])[..., None]

    def second(x, th):
        # L V_S2 = -U''(q) p + lam V_R (V_S2 is linear in s)
        _, d2u = potential(x[..., 0], th[0])
        return -d2u[..., None] * x[..., 1:2] + th[1] * v_r(x, th)

    return ModelSpec(
        name=name,
        dims=Dims(1, 1, 1, 1),
        param_names=("D", "lam", "alpha", "sigma"),
        param_blocks=("beta_s2", "beta_s2", "beta_r", "sigma"),
        param_bounds=((1e-6, 100.0), (-100.0, 100.0), (1e-6, 100.0), (1e-6, 100.0)),
        drift_s1=lambda xs, th: xs[..., 1:2].copy(),
        drift_s2=v_s2,
        drift_r=v_r,
        diff_r=lambda x, th: th[3] * _ones_like_batch(x, (1, 1)),
        jac_s1_wrt_s2=lambda xs, th: _ones_like_batch(xs, (1, 1)),
        jac_s2_wrt_r=lambda x, th: th[1] * _ones_like_batch(x, (1, 1)),
        gen_s1=v_s2,
        gen2_s1=second,
        gen_s2=second,
        constant_diffusion=True,
    )


# ---------------------------------------------------------------------------
# QGLE with a two-term Prony memory kernel, unit mass, theta = (c1, tau1, c2, tau2)

_PA, _PB = PRONY_U["a"], PRONY_U["b"]
_Q1, _Q2 = PRONY_U["q_min"], PRONY_U["q_max"]


def prony_potential(q):
    """U, U', U'' of the double-well free energy a f(q)^2 + b q^3."""
    f = (q - _Q1) * (q - _Q2)
    df = 2.0 * q - (_Q1 + _Q2)
    u = _PA * f * f + _PB * q * q * q
    du = 2.0 * _PA * f * df + 3.0 * _PB * q * q
    d2u = 2.0 * _PA * (df * df + 2.0 * f) + 6.0 * _PB * q
    return u, du, d2u


def _prony():
    def v_s2(x, th):
        _, du, _ = prony_potential(x[..., 0])
        return (-du + x[..., 2] + x[..., 3])[..., None]

    def v_r(x, th):
        c, tau = th[0::2], th[1::2]
        return -(x[..., 2:4] + c * x[..., 1:2]) / tau

    def diff(x, th):
        c, tau = th[0::2], th[1::2]
        return _const_matrix(x, np.diag(np.sqrt(2.0 * PRONY_KT * c) / tau))

    def second(x, th):
        _, _, d2u = prony_potential(x[..., 0])
        return (-d2u * x[..., 1] + v_r(x, th).sum(axis=-1))[..., None]

    return ModelSpec(
        name="qgle_prony",
        dims=Dims(1, 1, 2, 2),
        param_names=("c1", "tau1", "c2", "tau2"),
        param_blocks=("beta_r",) * 4,
        param_bounds=((1e-4, 100.0), (1e-4, 1e3), (1e-4, 100.0), (1e-4, 1e3)),
        drift_s1=lambda xs, th: xs[..., 1:2].copy(),
        drift_s2=v_s2,
        drift_r=v_r,
        diff_r=diff,
        jac_s1_wrt_s2=lambda xs, th: _ones_like_batch(xs, (1, 1)),
        jac_s2_wrt_r=lambda x, th: _ones_like_batch(x, (1, 2)),
        gen_s1=v_s2,
        gen2_s1=second,
        gen_s2=second,
        constant_diffusion=True,
    )


def _preset(model, theta, x0, prior_var, constants=None):
    h = model.dims.n_hidden
    return Preset(
        model=model,
        theta=model.params(theta),
        x0=np.asarray(x0, dtype=float),
        prior_mean=np.zeros(h),
        prior_cov=prior_var * np.eye(h),
        constants=dict(constants or {}),
    )


_REGISTRY = {
    "toy3": lambda: _preset(_toy("toy3"), (2.0, 4.0), (0.0, 0.0, 0.0), 10.0),
    "toy2": lambda: _preset(_toy("toy2", beta_fixed=1.0), (1.0,), (0.0, 0.0, 0.0), 10.0,
                            {"beta": 1.0}),
    "qgle_ho": lambda: _preset(_qgle("qgle_ho", _u_ho), (1.0, 2.0, 4.0, 1.0), (0.0, 0.0, 0.0), 1.0),
    "qgle_dw": lambda: _preset(_qgle("qgle_dw", _u_dw), (1.0, 2.0, 4.0, 4.0), (0.0, 0.0, 0.0), 1.0),
    "qgle_prony": lambda: _preset(_prony(), (0.22, 0.007, 1.2, 4.6), (0.3, 0.0, 0.0, 0.0), PRONY_KT,
                                  dict(PRONY_U, kT=PRONY_KT)),
}

MODEL_NAMES = tuple(_REGISTRY)


def builtin_model(name: str) -> Preset:
    try:
        factory = _REGISTRY[name]
    except KeyError:
        raise LookupError(f"unknown model {name!r}; available: {', '.join(MODEL_NAMES)}") from None
    return factory()
