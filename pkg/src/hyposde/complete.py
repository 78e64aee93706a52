"""Contrast estimation from complete observations and plug-in standard errors."""

import json
from dataclasses import dataclass, field

import numpy as np

from .density import covariance_blocks, precision_and_logdet, quadratic_form, residual_m
from .errors import ArgumentError, DefinitenessError, ShapeError
from .model import ModelSpec, ParamVector, drift, theta_values
from .optimize import SENTINEL, OptimizerConfig, fd_steps, minimize
from .stochastics import ObservationSet

RATE_EXPONENTS = {"beta_s1": -1.5, "beta_s2": -0.5, "beta_r": 0.5, "sigma": 0.0}


@dataclass(frozen=True)
class ContrastResult:
    theta_hat: ParamVector
    contrast_value: float
    iterations: int
    converged: bool
    optimizer_tag: str
    evaluations: int = 0
    extra: dict = field(default_factory=dict)


def _transitions(model: ModelSpec, data):
    if isinstance(data, ObservationSet):
        if not data.is_complete(model.dims.n):
            raise ArgumentError("contrast needs all coordinates observed")
        values, delta = data.values, data.delta
    else:
        values, delta = np.asarray(data[0], dtype=float), float(data[1])
    if values.ndim != 2 or values.shape[1] != model.dims.n:
        raise ShapeError(f"expected an (n+1, {model.dims.n}) array of states")
    if values.shape[0] < 2:
        raise ArgumentError("need at least one transition")
    return values[:-1], values[1:], delta


def _precision_batch(sigma):
    """Factor once when all transitions share the same covariance."""
    if sigma.ndim == 3 and np.all(sigma == sigma[:1]):
        prec, logdet = precision_and_logdet(sigma[0])
        return prec, logdet * sigma.shape[0]
    prec, logdet = precision_and_logdet(sigma)
    return prec, logdet.sum()


def contrast_terms(model: ModelSpec, x, y, delta, theta, corrected=True):
    """(sum of m^T Lambda m, sum of log det Sigma(1, x, theta)) over transitions."""
    theta = theta_values(theta)
    m = residual_m(model, delta, x, y, theta, corrected)
    cov = covariance_blocks(model, x, theta)
    sigma = np.broadcast_to(cov.sigma, x.shape[:-1] + cov.sigma.shape[-2:])
    prec, logdet = _precision_batch(sigma)
    return float(quadratic_form(prec, m).sum()), float(logdet)


def contrast(model: ModelSpec, data, theta, corrected: bool = True) -> float:
    """l_n(theta) = sum_i m_i^T Lambda(X_{i-1}) m_i + log|Sigma(X_{i-1})|.

    A covariance that is not positive definite anywhere yields ``SENTINEL``.
    """
    x, y, delta = _transitions(model, data)
    return _contrast_xy(model, x, y, delta, theta, corrected)


def _contrast_xy(model, x, y, delta, theta, corrected):
    try:
        q, ld = contrast_terms(model, x, y, delta, theta, corrected)
    except (DefinitenessError, FloatingPointError):
        return SENTINEL
    val = q + ld
    return val if np.isfinite(val) else SENTINEL


def estimate_complete(model: ModelSpec, data, theta0, config: OptimizerConfig = OptimizerConfig(),
                      corrected: bool = True) -> ContrastResult:
    x, y, delta = _transitions(model, data)
    n = x.shape[0]
    start = model.params(theta_values(theta0))

    def objective(th):
        return _contrast_xy(model, x, y, delta, th, corrected) / n

    res = minimize(objective, start.values, start.bounds, config)
    return ContrastResult(start.replace(start.clamp(res.x)), res.fun * n, res.iterations,
                          res.converged, res.method, res.evaluations)


# ---------------------------------------------------------------------------
# asymptotic precision

@dataclass(frozen=True)
class PrecisionMatrix:
    gamma_blocks: dict          # label -> symmetric block
    rates: np.ndarray           # one rate per parameter
    se: np.ndarray
    pseudo_inverse: bool

    def gamma(self) -> np.ndarray:
        mats = [self.gamma_blocks[k] for k in self.gamma_blocks]
        n = sum(m.shape[0] for m in mats)
        out = np.zeros((n, n))
        i = 0
        for m in mats:
            k = m.shape[0]
            out[i:i + k, i:i + k] = m
            i += k
        return out


def _param_derivative(fun, theta, idx):
    """Central differences of ``fun(theta)`` w.r.t. the entries ``idx``."""
    steps = fd_steps(theta)
    cols = []
    for k in idx:
        tp, tm = theta.copy(), theta.copy()
        tp[k] += steps[k]
        tm[k] -= steps[k]
        cols.append((fun(tp) - fun(tm)) / (tp[k] - tm[k]))
    return np.stack(cols, axis=-1)


def _drift_block(model, x, label):
    dims = model.dims
    sl = {"beta_s1": dims.s1, "beta_s2": dims.s2, "beta_r": dims.r}[label]
    return lambda th: drift(model, x, th)[..., sl]


def asymptotic_precision(model: ModelSpec, data, theta_hat) -> PrecisionMatrix:
    """Plug-in Gamma(theta_hat) with the invariant law replaced by the empirical one."""
    x, _, delta = _transitions(model, data)
    params = theta_hat if isinstance(theta_hat, ParamVector) else model.params(theta_hat)
    theta = params.values.copy()
    n = x.shape[0]
    cov = covariance_blocks(model, x, theta)
    weights = {"beta_s1": (720.0, cov.a_s1), "beta_s2": (12.0, cov.a_s2), "beta_r": (1.0, cov.a_r)}

    blocks, pinv = {}, False
    for label in ("beta_s1", "beta_s2", "beta_r", "sigma"):
        idx = np.flatnonzero(params.block_mask(label))
        if idx.size == 0:
            continue
        if label == "sigma":
            sig_fun = lambda th: np.broadcast_to(covariance_blocks(model, x, th).sigma,
                                                 x.shape[:-1] + cov.sigma.shape[-2:])
            dsig = _param_derivative(sig_fun, theta, idx)              # (..., N, N, k)
            prec, _ = precision_and_logdet(np.broadcast_to(cov.sigma, dsig.shape[:-1]))
            w = np.einsum("...abk,...bc->...ack", dsig, prec)
            g = 0.5 * np.einsum("...abk,...bal->...kl", w, w)
        else:
            scale, a = weights[label]
            dv = _param_derivative(_drift_block(model, x, label), theta, idx)   # (..., m, k)
            a = np.broadcast_to(a, dv.shape[:-1] + dv.shape[-2:-1])
            g = scale * np.einsum("...ak,...al->...kl", dv, np.linalg.solve(a, dv))
        g = g.reshape(-1, idx.size, idx.size).mean(axis=0)
        blocks[label] = 0.5 * (g + g.T)

    rates = np.array([np.sqrt(n) * delta ** RATE_EXPONENTS[b] for b in params.blocks])
    var = []
    for label, g in blocks.items():
        try:
            if np.linalg.cond(g) > 1e12:
                raise np.linalg.LinAlgError
            inv = np.linalg.inv(g)
        except np.linalg.LinAlgError:
            inv, pinv = np.linalg.pinv(g), True
        var.extend(np.diag(inv))
    se = np.sqrt(np.maximum(np.array(var), 0.0)) / rates
    return PrecisionMatrix(blocks, rates, se, pinv)


# ---------------------------------------------------------------------------

def fit_document(result: ContrastResult, se=None, config=None, seed=None, extra=None) -> dict:
    th = result.theta_hat
    doc = {
        "theta_hat": th.as_dict(),
        "se": None if se is None else {k: float(v) for k, v in zip(th.names, se)},
        "contrast_value": float(result.contrast_value),
        "converged": bool(result.converged),
        "iterations": int(result.iterations),
        "optimizer": result.optimizer_tag,
        "config": config,
        "seed": seed,
    }
    if extra:
        doc.update(extra)
    return doc


def write_json(doc: dict, path) -> None:
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")
