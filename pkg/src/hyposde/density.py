"""Transition mean, block covariance and Gaussian log-density of the LG-II scheme.

The covariance is always built at unit step.  For a step Delta the block
(i, j) scales as Delta^{(k_i + k_j)/2} with k = 5, 3, 1 for S1, S2, R, so the
density is evaluated on residuals rescaled by Delta^{-k/2}.
"""

from dataclasses import dataclass

import numpy as np

from .errors import ArgumentError, ConsistencyError, DefinitenessError, ModelShapeError
from .model import ModelSpec, drift, generator_terms, jac_s1, jac_s2, theta_values

# unit-step moments of the iterated Brownian integrals
C_S1S1 = 1.0 / 20.0
C_S1S2 = 1.0 / 8.0
C_S1R = 1.0 / 6.0
C_S2S2 = 1.0 / 3.0
C_S2R = 1.0 / 2.0
C_RR = 1.0

# Schur complements of the S2 and S1 blocks: 1/3 - 1/4 and 1/720
S2_SCHUR = 12.0
S1_SCHUR = 720.0

PD_RTOL = 1e-12
IDENTITY_RTOL = 1e-10


@dataclass(frozen=True)
class MeanVector:
    mu_s1: np.ndarray
    mu_s2: np.ndarray
    mu_r: np.ndarray
    delta: float

    def as_array(self) -> np.ndarray:
        return np.concatenate([self.mu_s1, self.mu_s2, self.mu_r], axis=-1)


def _check_delta(delta, allow_zero=False):
    delta = float(delta)
    if delta < 0 or (delta == 0 and not allow_zero) or not np.isfinite(delta):
        raise ArgumentError(f"step must be positive, got {delta}")
    return delta


def _require_s1(model):
    if model.dims.n_s1 < 1:
        raise ModelShapeError("the LG-II density needs at least one S1 coordinate")


def mean_increment(model: ModelSpec, delta, x, theta, corrected: bool = True) -> np.ndarray:
    """mu(Delta, x, theta) - x; ``corrected=False`` drops the Delta^2 and Delta^3 terms."""
    dims = model.dims
    x = np.asarray(x, dtype=float)
    theta = theta_values(theta)
    v0 = drift(model, x, theta)
    inc = v0 * delta
    if corrected:
        g1, g2, h1 = generator_terms(model, x, theta)
        if dims.n_s1:
            inc[..., dims.s1] += g1 * (delta ** 2 / 2.0) + g2 * (delta ** 3 / 6.0)
        inc[..., dims.s2] += h1 * (delta ** 2 / 2.0)
    return inc


def mean_lg2(model: ModelSpec, delta, x, theta, corrected: bool = True) -> MeanVector:
    delta = _check_delta(delta, allow_zero=True)
    _require_s1(model)
    x = np.asarray(x, dtype=float)
    mu = x + mean_increment(model, delta, x, theta, corrected)
    d = model.dims
    return MeanVector(mu[..., d.s1], mu[..., d.s2], mu[..., d.r], delta)


@dataclass(frozen=True)
class BlockCovariance:
    """Unit-step LG-II covariance together with its building matrices."""

    sigma: np.ndarray   # (..., N, N)
    a_r: np.ndarray
    a_s2: np.ndarray
    a_s1: np.ndarray
    j1: np.ndarray      # d V_S1 / d x_S2
    j2: np.ndarray      # d V_S2 / d x_R
    n_s1: int
    n_s2: int
    n_r: int

    @property
    def delta_power(self) -> int:
        return 5 * self.n_s1 + 3 * self.n_s2 + self.n_r

    def scale_vector(self, delta) -> np.ndarray:
        k = np.concatenate([np.full(self.n_s1, 2.5), np.full(self.n_s2, 1.5), np.full(self.n_r, 0.5)])
        return float(delta) ** k

    def scaled(self, delta) -> np.ndarray:
        """Sigma(Delta, x, theta)."""
        s = self.scale_vector(delta)
        return self.sigma * s[:, None] * s[None, :]

    def block(self, i: str, j: str) -> np.ndarray:
        sl = {"s1": slice(0, self.n_s1), "s2": slice(self.n_s1, self.n_s1 + self.n_s2),
              "r": slice(self.n_s1 + self.n_s2, None)}
        return self.sigma[..., sl[i], sl[j]]


def covariance_from_parts(vr, j1, j2) -> BlockCovariance:
    """Assemble the unit covariance from V_R, the S1 and the S2 Jacobians."""
    n_s1, n_s2, n_r = j1.shape[-2], j2.shape[-2], vr.shape[-2]
    a_r = vr @ np.swapaxes(vr, -1, -2)
    j2_ar = j2 @ a_r
    a_s2 = j2_ar @ np.swapaxes(j2, -1, -2)
    j1_as2 = j1 @ a_s2
    a_s1 = j1_as2 @ np.swapaxes(j1, -1, -2)
    j1j2_ar = j1 @ j2_ar

    batch = np.broadcast_shapes(a_r.shape[:-2], a_s2.shape[:-2], a_s1.shape[:-2])
    n = n_s1 + n_s2 + n_r
    sig = np.empty(batch + (n, n))
    s1, s2, r = slice(0, n_s1), slice(n_s1, n_s1 + n_s2), slice(n_s1 + n_s2, n)
    sig[..., s1, s1] = C_S1S1 * a_s1
    sig[..., s1, s2] = C_S1S2 * j1_as2
    sig[..., s1, r] = C_S1R * j1j2_ar
    sig[..., s2, s2] = C_S2S2 * a_s2
    sig[..., s2, r] = C_S2R * j2_ar
    sig[..., r, r] = C_RR * a_r
    sig[..., s2, s1] = np.swapaxes(sig[..., s1, s2], -1, -2)
    sig[..., r, s1] = np.swapaxes(sig[..., s1, r], -1, -2)
    sig[..., r, s2] = np.swapaxes(sig[..., s2, r], -1, -2)
    return BlockCovariance(sig, a_r, a_s2, a_s1, j1, j2, n_s1, n_s2, n_r)


def covariance_blocks(model: ModelSpec, x, theta) -> BlockCovariance:
    _require_s1(model)
    x = np.asarray(x, dtype=float)
    theta = theta_values(theta)
    return covariance_from_parts(model.diff_r(x, theta), jac_s1(model, x, theta), jac_s2(model, x, theta))


# ---------------------------------------------------------------------------
# factorisation

def _factor(sigma):
    """Equilibrated Cholesky factor of a batch of covariances.

    Returns (L, d) with sigma = D^{-1} L L^T D^{-1}, D = diag(d).
    """
    diag = np.diagonal(sigma, axis1=-2, axis2=-1)
    if np.any(~(diag > 0)):
        raise DefinitenessError("covariance has a non-positive diagonal entry")
    d = 1.0 / np.sqrt(diag)
    eq = sigma * d[..., :, None] * d[..., None, :]
    n = eq.shape[-1]
    lam_min = np.linalg.eigvalsh(eq)[..., 0]
    if np.any(lam_min < PD_RTOL * n):
        raise DefinitenessError(f"covariance is not positive definite (smallest scaled eigenvalue {lam_min.min():.3e})")
    try:
        chol = np.linalg.cholesky(eq)
    except np.linalg.LinAlgError as exc:
        raise DefinitenessError("Cholesky factorisation failed") from exc
    return chol, d


def precision_and_logdet(sigma):
    """Inverse and log-determinant of a batch of SPD matrices."""
    chol, d = _factor(sigma)
    linv = np.linalg.inv(chol)
    prec = np.swapaxes(linv, -1, -2) @ linv
    prec = prec * d[..., :, None] * d[..., None, :]
    prec = 0.5 * (prec + np.swapaxes(prec, -1, -2))
    logdet = 2.0 * np.log(np.diagonal(chol, axis1=-2, axis2=-1)).sum(-1) - 2.0 * np.log(d).sum(-1)
    return prec, logdet


def log_det_sigma(cov: BlockCovariance, delta=1.0) -> np.ndarray:
    delta = _check_delta(delta)
    _, logdet = precision_and_logdet(cov.sigma)
    return logdet + cov.delta_power * np.log(delta)


def determinant_sigma(cov: BlockCovariance, delta) -> np.ndarray:
    """det Sigma(Delta, x, theta) = Delta^{5 N_S1 + 3 N_S2 + N_R} det Sigma(1, x, theta)."""
    return np.exp(log_det_sigma(cov, delta))


def determinant_closed_form(cov: BlockCovariance, delta) -> np.ndarray:
    """Product formula |a_R| |a_S2| |a_S1| / (12^{N_S2} 720^{N_S1}) times the Delta power."""
    delta = _check_delta(delta)
    det = np.linalg.det(cov.a_r) * np.linalg.det(cov.a_s2) * np.linalg.det(cov.a_s1)
    det = det / (S2_SCHUR ** cov.n_s2 * S1_SCHUR ** cov.n_s1)
    return det * delta ** cov.delta_power


def _rel_err(a, b):
    scale = max(np.max(np.abs(b)), np.finfo(float).tiny)
    return float(np.max(np.abs(a - b)) / scale)


def precision_identity_errors(cov: BlockCovariance, prec: np.ndarray) -> dict:
    """Relative violations of the blockwise closed forms of the precision matrix."""
    n1, n2 = cov.n_s1, cov.n_s2
    s1, s2 = slice(0, n1), slice(n1, n1 + n2)
    l11, l12, l21, l22 = (prec[..., s1, s1], prec[..., s1, s2], prec[..., s2, s1], prec[..., s2, s2])
    t11 = S1_SCHUR * np.linalg.inv(cov.a_s1)
    t12 = -0.5 * l11 @ cov.j1
    t22 = S2_SCHUR * np.linalg.inv(cov.a_s2) - 0.5 * l21 @ cov.j1
    phi = l11 @ cov.j1 + 2.0 * l12
    return {
        "lambda_s1s1": _rel_err(l11, t11),
        "lambda_s1s2": _rel_err(l12, t12),
        "lambda_s2s2": _rel_err(l22, t22),
        "phi": float(np.max(np.abs(phi)) / max(np.max(np.abs(l11 @ cov.j1)), np.finfo(float).tiny)),
    }


def precision_closed_form(cov: BlockCovariance, rtol: float = IDENTITY_RTOL) -> np.ndarray:
    """Lambda = Sigma(1, x, theta)^{-1}, verified against its blockwise closed forms."""
    prec, _ = precision_and_logdet(cov.sigma)
    errs = precision_identity_errors(cov, prec)
    bad = {k: v for k, v in errs.items() if not v <= rtol}
    if bad:
        raise ConsistencyError(f"precision identities violated: {bad}")
    return prec


# ---------------------------------------------------------------------------

def residual_m(model: ModelSpec, delta, x, y, theta, corrected: bool = True) -> np.ndarray:
    """Blockwise (y - mu) / Delta^{k/2}, k = 5, 3, 1."""
    delta = _check_delta(delta)
    _require_s1(model)
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    inc = mean_increment(model, delta, x, theta, corrected)
    k = model.dims.delta_powers / 2.0
    return ((y - x) - inc) / delta ** k


def quadratic_form(prec, m):
    return np.einsum("...i,...ij,...j->...", m, prec, m)


def log_transition_density(model: ModelSpec, delta, x, y, theta, corrected: bool = True):
    """log of the LG-II Gaussian transition density p(x -> y) over a step Delta."""
    m = residual_m(model, delta, x, y, theta, corrected)
    cov = covariance_blocks(model, x, theta)
    prec, logdet = precision_and_logdet(cov.sigma)
    n = model.dims.n
    return -0.5 * (n * np.log(2.0 * np.pi) + cov.delta_power * np.log(delta) + logdet + quadratic_form(prec, m))
