"""Closed-form estimators that expose the bias of inadequate discretisations.

Both work on the linear toy model dq = p dt, dp = s dt, ds = -beta s dt + sigma dB.
"""

from dataclasses import dataclass

import numpy as np

from .density import C_S1R, C_S1S1, C_S1S2, C_S2R, C_S2S2, C_RR, precision_and_logdet
from .errors import ArgumentError, DegenerateDataError, ShapeError
from .stochastics import ObservationSet

UNIT_COVARIANCE = np.array([
    [C_S1S1, C_S1S2, C_S1R],
    [C_S1S2, C_S2S2, C_S2R],
    [C_S1R, C_S2R, C_RR],
])
# lower-right 2x2 block: the (p, s) covariance of a second-order scheme
UNIT_COVARIANCE_2 = UNIT_COVARIANCE[1:, 1:]


@dataclass(frozen=True)
class CaseStudyConstants:
    sigma_inv: np.ndarray
    c1: float
    c2: float

    @property
    def predicted_limit_factor(self) -> float:
        return 1.0 + self.c2 / self.c1

    @classmethod
    def compute(cls):
        lam, _ = precision_and_logdet(UNIT_COVARIANCE)
        # 1-based (row, col) entries as in the estimator display
        l = lambda i, j: lam[i - 1, j - 1]
        c1 = 0.5 * l(3, 2) + l(3, 3) + 0.25 * l(2, 2) + 0.5 * l(2, 3)
        c2 = l(3, 1) / 6.0 + l(2, 1) / 12.0
        return cls(lam, float(c1), float(c2))


CONSTANTS = CaseStudyConstants.compute()


def _states(data):
    if isinstance(data, ObservationSet):
        if tuple(data.mask) != (0, 1, 2):
            raise ArgumentError("need complete (q, p, s) observations")
        return data.values, data.delta
    states, delta = data
    states = np.asarray(states, dtype=float)
    if states.ndim != 2 or states.shape[1] != 3:
        raise ShapeError("need an (n+1, 3) array of (q, p, s)")
    return states, float(delta)


def estimator_incorrect_drift(data) -> float:
    """beta estimate from the scheme whose q-mean stops at the Delta^2 term.

    Its limit is (1 + c2/c1) beta rather than beta.
    """
    states, delta = _states(data)
    if states.shape[0] < 2:
        raise ArgumentError("need at least one transition")
    q, p, s = states.T
    s0 = s[:-1]
    dq, dp, ds = np.diff(q), np.diff(p), np.diff(s)
    r = np.stack([
        (dq - p[:-1] * delta - s0 * delta ** 2 / 2.0) / delta ** 2.5,
        (dp - s0 * delta) / delta ** 1.5,
        ds / np.sqrt(delta),
    ], axis=-1)
    lam = CONSTANTS.sigma_inv
    w = lam[2] + 0.5 * lam[1]
    n = s0.size
    f = CONSTANTS.c1 * np.mean(s0 * s0)
    if not f > np.finfo(float).tiny * n:
        raise DegenerateDataError("the s-component vanishes; beta is not identified")
    g = -np.sum(s0 * (r @ w)) / (n * np.sqrt(delta))
    return float(g / f)


def estimator_finite_difference_sigma(q, s, delta) -> float:
    """sigma^2 estimate with p imputed by forward differences of q.

    Needs q[0:n+2] and s[0:n+1]; converges to 8/5 sigma^2 instead of sigma^2.
    """
    q = np.asarray(q, dtype=float).ravel()
    s = np.asarray(s, dtype=float).ravel()
    if q.size != s.size + 1:
        raise ArgumentError(f"q must be one step longer than s, got {q.size} and {s.size}")
    if s.size < 2:
        raise ArgumentError("need at least one transition")
    if not delta > 0:
        raise ArgumentError("step must be positive")
    p_hat = np.diff(q) / delta
    s0 = s[:-1]
    m = np.stack([
        (np.diff(p_hat) - s0 * delta + s0 * delta ** 2 / 2.0) / delta ** 1.5,
        (np.diff(s) + s0 * delta) / np.sqrt(delta),
    ], axis=-1)
    prec, _ = precision_and_logdet(UNIT_COVARIANCE_2)
    n = s0.size
    return float(np.einsum("ki,ij,kj->", m, prec, m) / (2.0 * n))
