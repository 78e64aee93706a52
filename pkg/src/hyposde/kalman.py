"""Kalman filtering for conditionally Gaussian systems under the LG-II scheme.

Only the top block x_S1 is observed.  Given x_S1 the LG-II step is affine in
the hidden block h = (x_S2, x_R):

    X_{k+1} = b(x_S1) + A(x_S1) h + w,    w ~ N(0, Sigma(Delta, theta)),

and the filter carries h | x_S1[0:k] ~ N(m_k, Q_k).  All increments are
formed relative to x_S1 so that large positions do not cost precision.
"""

import csv
from dataclasses import dataclass

import numba
import numpy as np

from .complete import ContrastResult
from .density import covariance_blocks, mean_increment
from .errors import ArgumentError, DefinitenessError, ModelShapeError, ShapeError
from .model import ModelSpec, theta_values
from .optimize import SENTINEL, OptimizerConfig, minimize
from .stochastics import ObservationSet

AFFINE_RTOL = 1e-10
_LOG_2PI = np.log(2.0 * np.pi)


@dataclass(frozen=True)
class CondGaussSpec:
    base: ModelSpec
    m0: np.ndarray
    q0: np.ndarray
    scheme_variant: str = "LG2"

    def __post_init__(self):
        if self.scheme_variant not in ("LG2", "LG2_nocorr"):
            raise ArgumentError("scheme_variant must be LG2 or LG2_nocorr")
        h = self.base.dims.n_hidden
        m0 = np.asarray(self.m0, dtype=float).reshape(h)
        q0 = np.asarray(self.q0, dtype=float).reshape(h, h)
        if self.base.dims.n_s1 < 1:
            raise ModelShapeError("the filter observes the S1 block, which is empty")
        object.__setattr__(self, "m0", m0)
        object.__setattr__(self, "q0", q0)

    @classmethod
    def from_preset(cls, preset, scheme_variant="LG2"):
        return cls(preset.model, preset.prior_mean, preset.prior_cov, scheme_variant)


@dataclass(frozen=True)
class FilterState:
    m: np.ndarray
    q: np.ndarray
    k: int = 0


# ---------------------------------------------------------------------------
# linearisation

def _embed(model, x_s1, h):
    n1 = model.dims.n_s1
    batch = np.broadcast_shapes(x_s1.shape[:-1], h.shape[:-1])
    x = np.empty(batch + (model.dims.n,))
    x[..., :n1] = x_s1
    x[..., n1:] = h
    return x


def linearize_increments(spec: CondGaussSpec, delta, x_s1, theta, rng=None):
    """(b_inc, A, Sigma_w) with X_{k+1} - (x_S1, 0) = b_inc + A h + w.

    ``x_s1`` may carry leading batch axes; ``Sigma_w`` has shape (1, N, N)
    when it does not vary with x_S1.
    """
    model, dims = spec.base, spec.base.dims
    theta = theta_values(theta)
    x_s1 = np.asarray(x_s1, dtype=float)
    if x_s1.shape[-1:] != (dims.n_s1,):
        raise ShapeError(f"x_s1 must have trailing length {dims.n_s1}")
    h_dim = dims.n_hidden
    corrected = spec.scheme_variant == "LG2"
    rng = np.random.default_rng(99) if rng is None else rng
    flat = x_s1.reshape(-1, dims.n_s1)
    # a few rows spread over the series for the structural checks
    rows = np.unique(np.linspace(0, flat.shape[0] - 1, min(flat.shape[0], 16)).astype(int))
    h_probe = rng.normal(size=(rows.size, h_dim))

    x = _embed(model, x_s1[..., None, :], np.vstack([np.zeros(h_dim), np.eye(h_dim)]))   # (..., H+1, N)
    inc = mean_increment(model, delta, x, theta, corrected) if delta > 0 else np.zeros_like(x)
    b_inc = inc[..., 0, :]
    a_inc = np.swapaxes(inc[..., 1:, :] - b_inc[..., None, :], -1, -2)   # (..., N, H)

    xp = _embed(model, flat[rows], h_probe)
    got = mean_increment(model, delta, xp, theta, corrected) if delta > 0 else np.zeros_like(xp)
    b_rows = b_inc.reshape(-1, dims.n)[rows]
    pred = b_rows + np.einsum("rnh,rh->rn", a_inc.reshape(-1, dims.n, h_dim)[rows], h_probe)
    if not np.all(np.abs(got - pred) <= AFFINE_RTOL * np.maximum(1.0, np.abs(got) + np.abs(b_rows))):
        raise ModelShapeError(f"model {model.name!r} is not affine in the hidden block")
    a = a_inc.copy()
    a[..., dims.n_s1:, :] += np.eye(h_dim)

    if delta == 0:
        sw = np.zeros((1, dims.n, dims.n))
    else:
        x0 = _embed(model, flat[rows], np.zeros(h_dim))
        cov = covariance_blocks(model, np.vstack([x0, xp]), theta).scaled(delta)
        cov = np.broadcast_to(cov, (2 * rows.size, dims.n, dims.n))
        if not np.allclose(cov, cov[:1], rtol=1e-12, atol=0.0):
            raise ModelShapeError("noise covariance varies with the state")
        sw = np.ascontiguousarray(cov[:1])
    return b_inc, a, sw


def linearize_step(spec: CondGaussSpec, delta, x_s1, theta):
    """(b, A, Sigma_w) of X_{k+1} = b + A h + w at a single observed state."""
    x_s1 = np.atleast_1d(np.asarray(x_s1, dtype=float))
    b_inc, a, sw = linearize_increments(spec, delta, x_s1, theta)
    b = b_inc.copy()
    b[: spec.base.dims.n_s1] += x_s1
    return b, a, sw[0]


# ---------------------------------------------------------------------------
# recursion

def kalman_step(spec: CondGaussSpec, state: FilterState, x_s1_next, x_s1_curr, delta, theta):
    """One prediction/update; returns the new state and the observed-block predictive (mean, cov)."""
    n1 = spec.base.dims.n_s1
    x_s1_curr = np.atleast_1d(np.asarray(x_s1_curr, dtype=float))
    x_s1_next = np.atleast_1d(np.asarray(x_s1_next, dtype=float))
    b, a, sw = linearize_step(spec, delta, x_s1_curr, theta)
    mu = b + a @ state.m
    lam = sw + a @ state.q @ a.T
    lam = 0.5 * (lam + lam.T)
    s = lam[:n1, :n1]
    if np.any(np.linalg.eigvalsh(s) <= 0):
        raise DefinitenessError("predictive covariance of the observed block is not positive definite", state.k + 1)
    gain = np.linalg.solve(s, lam[:n1, n1:]).T
    m = mu[n1:] + gain @ (x_s1_next - mu[:n1])
    q = lam[n1:, n1:] - gain @ s @ gain.T
    return FilterState(m, 0.5 * (q + q.T), state.k + 1), (mu[:n1], s)


@numba.njit(cache=True)
def _filter_kernel(dx, b, a, sw, m0, q0, store, ms, qs):
    n, n1 = dx.shape
    nn = b.shape[1]
    h = nn - n1
    m = m0.copy()
    q = q0.copy()
    mu = np.empty(nn)
    aq = np.empty((nn, h))
    lam = np.empty((nn, nn))
    chol = np.empty((n1, n1))
    tmp = np.empty(n1)
    gain = np.empty((h, n1))
    ll = 0.0
    if store:
        ms[0] = m
        qs[0] = q
    for k in range(n):
        ia = 0 if a.shape[0] == 1 else k
        iw = 0 if sw.shape[0] == 1 else k
        for i in range(nn):
            acc = b[k, i]
            for j in range(h):
                acc += a[ia, i, j] * m[j]
            mu[i] = acc
        for i in range(nn):
            for j in range(h):
                acc = 0.0
                for l in range(h):
                    acc += a[ia, i, l] * q[l, j]
                aq[i, j] = acc
        for i in range(nn):
            for j in range(i + 1):
                acc = sw[iw, i, j]
                for l in range(h):
                    acc += aq[i, l] * a[ia, j, l]
                lam[i, j] = acc
                lam[j, i] = acc
        # Cholesky of the observed block
        logdet = 0.0
        for i in range(n1):
            for j in range(i + 1):
                acc = lam[i, j]
                for l in range(j):
                    acc -= chol[i, l] * chol[j, l]
                if i == j:
                    if not acc > 0.0:
                        return np.nan, k
                    chol[i, i] = np.sqrt(acc)
                    logdet += 2.0 * np.log(chol[i, i])
                else:
                    chol[i, j] = acc / chol[j, j]
        # whitened innovation
        quad = 0.0
        for i in range(n1):
            acc = dx[k, i] - mu[i]
            for l in range(i):
                acc -= chol[i, l] * tmp[l]
            tmp[i] = acc / chol[i, i]
            quad += tmp[i] * tmp[i]
        ll -= 0.5 * (n1 * 1.8378770664093453 + logdet + quad)
        # gain^T = S^{-1} Lambda_SH, column by column
        for c in range(h):
            for i in range(n1):
                acc = lam[i, n1 + c]
                for l in range(i):
                    acc -= chol[i, l] * gain[c, l]
                gain[c, i] = acc / chol[i, i]
            for i in range(n1 - 1, -1, -1):
                acc = gain[c, i]
                for l in range(i + 1, n1):
                    acc -= chol[l, i] * gain[c, l]
                gain[c, i] = acc / chol[i, i]
        # m = mu_H + K (dx - mu_S);  Q = Lambda_HH - K Lambda_SH, symmetrised
        for c in range(h):
            acc = mu[n1 + c]
            for i in range(n1):
                acc += gain[c, i] * (dx[k, i] - mu[i])
            m[c] = acc
        for r in range(h):
            for c in range(r + 1):
                acc = lam[n1 + r, n1 + c]
                acc2 = lam[n1 + c, n1 + r]
                for i in range(n1):
                    acc -= gain[r, i] * lam[i, n1 + c]
                    acc2 -= gain[c, i] * lam[i, n1 + r]
                v = 0.5 * (acc + acc2)
                q[r, c] = v
                q[c, r] = v
        if store:
            ms[k + 1] = m
            qs[k + 1] = q
    return ll, -1


def _observed_series(spec, obs):
    n1 = spec.base.dims.n_s1
    if isinstance(obs, ObservationSet):
        if tuple(obs.mask[:n1]) != tuple(range(n1)):
            raise ArgumentError("observations must contain the S1 coordinates")
        return obs.values[:, :n1], obs.delta
    values, delta = obs
    values = np.asarray(values, dtype=float)
    if values.ndim == 1:
        values = values[:, None]
    if values.shape[1] != n1:
        raise ShapeError(f"expected {n1} observed columns")
    return values, float(delta)


def _run(spec, obs, theta, store):
    y, delta = _observed_series(spec, obs)
    if y.shape[0] < 2:
        raise ArgumentError("need at least one transition")
    b_inc, a, sw = linearize_increments(spec, delta, y[:-1], theta)
    dx = np.diff(y, axis=0)
    n, h = dx.shape[0], spec.base.dims.n_hidden
    if np.all(a == a[:1]):
        a = a[:1]
    ms = np.empty((n + 1 if store else 1, h))
    qs = np.empty((n + 1 if store else 1, h, h))
    ll, bad = _filter_kernel(np.ascontiguousarray(dx), np.ascontiguousarray(b_inc), np.ascontiguousarray(a),
                             np.ascontiguousarray(sw), spec.m0, spec.q0, store, ms, qs)
    if bad >= 0:
        raise DefinitenessError("predictive covariance of the observed block is not positive definite", bad + 1)
    return ll, ms, qs


def marginal_loglik(spec: CondGaussSpec, obs, theta) -> float:
    """sum_k log N(x_S1,k; mu_S1,k-1, Lambda_S1S1,k-1); the initial density is left out."""
    return float(_run(spec, obs, theta, False)[0])


def filter_trace(spec: CondGaussSpec, obs, theta):
    """Filter means (n+1, H) and covariances (n+1, H, H)."""
    _, ms, qs = _run(spec, obs, theta, True)
    return ms, qs


def write_trace_csv(ms, qs, path) -> None:
    h = ms.shape[1]
    header = ["k"] + [f"m_{i + 1}" for i in range(h)] + [f"q_{i + 1}{j + 1}" for i in range(h) for j in range(h)]
    table = np.column_stack([np.arange(ms.shape[0]), ms, qs.reshape(qs.shape[0], -1)])
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in table:
            w.writerow([str(int(row[0]))] + [f"{v:.17g}" for v in row[1:]])


def estimate_partial(spec: CondGaussSpec, obs, theta0, config: OptimizerConfig = OptimizerConfig()) -> ContrastResult:
    """Maximise the marginal likelihood of the S1 observations."""
    y, delta = _observed_series(spec, obs)
    n = y.shape[0] - 1
    if n < 1:
        raise ArgumentError("need at least one transition")
    start = spec.base.params(theta_values(theta0))

    def objective(th):
        try:
            return -marginal_loglik(spec, (y, delta), th) / n
        except (DefinitenessError, FloatingPointError):
            return SENTINEL

    res = minimize(objective, start.values, start.bounds, config)
    return ContrastResult(start.replace(start.clamp(res.x)), res.fun * n, res.iterations,
                          res.converged, res.method, res.evaluations)
