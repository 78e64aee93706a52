"""Box-constrained minimisers: Nelder-Mead (scipy) and Adam with finite-difference gradients."""

from dataclasses import asdict, dataclass

import numpy as np
from scipy.optimize import minimize as _scipy_minimize

from .derivatives import gradient_fd
from .errors import ArgumentError

SENTINEL = 1e300


@dataclass(frozen=True)
class OptimizerConfig:
    method: str = "nelder-mead"
    max_evals: int = 10_000
    xatol: float = 1e-8
    fatol: float = 1e-10
    # Adam
    lr: float = 0.1
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    max_iter: int = 2000
    grad_rel_step: float = 1e-5
    gtol: float = 1e-6

    def to_dict(self):
        return asdict(self)


@dataclass(frozen=True)
class OptimResult:
    x: np.ndarray
    fun: float
    iterations: int
    evaluations: int
    converged: bool
    method: str


def fd_steps(theta, rel=1e-5):
    return rel * np.maximum(1.0, np.abs(theta))


def _guard(objective):
    def f(theta):
        try:
            val = float(objective(theta))
        except ArithmeticError:
            return SENTINEL
        return val if np.isfinite(val) else SENTINEL
    return f


def minimize(objective, theta0, bounds, config: OptimizerConfig = OptimizerConfig()) -> OptimResult:
    """Minimise ``objective`` over the box ``bounds`` starting at ``theta0``.

    Numerical failures of the objective (non-PD covariance, overflow) are
    mapped to a large finite value so that the search can retreat.
    """
    theta0 = np.asarray(theta0, dtype=float)
    bounds = np.asarray(bounds, dtype=float).reshape(-1, 2)
    if bounds.shape[0] != theta0.size:
        raise ArgumentError("bounds and theta0 differ in length")
    if np.any(theta0 < bounds[:, 0]) or np.any(theta0 > bounds[:, 1]):
        raise ArgumentError("theta0 lies outside the bounds")
    f = _guard(objective)
    method = config.method.lower()
    if method in ("nelder-mead", "nm", "neldermead"):
        return _nelder_mead(f, theta0, bounds, config)
    if method == "adam":
        return _adam(f, theta0, bounds, config)
    raise ArgumentError(f"unknown optimiser {config.method!r}")


def _nelder_mead(f, theta0, bounds, config):
    res = _scipy_minimize(
        f, theta0, method="Nelder-Mead", bounds=bounds,
        options={"xatol": config.xatol, "fatol": config.fatol, "maxfev": config.max_evals,
                 "maxiter": config.max_evals, "adaptive": False},
    )
    return OptimResult(np.asarray(res.x), float(res.fun), int(res.nit), int(res.nfev), bool(res.success), "nelder-mead")


def _adam(f, theta0, bounds, config):
    lo, hi = bounds[:, 0], bounds[:, 1]
    theta = theta0.copy()
    m = np.zeros_like(theta)
    v = np.zeros_like(theta)
    best_x, best_f = theta.copy(), f(theta)
    evals, converged, it = 1, False, 0
    for it in range(1, config.max_iter + 1):
        steps = fd_steps(theta, config.grad_rel_step)
        # keep the stencil inside the box
        steps = np.minimum(steps, np.maximum(np.minimum(theta - lo, hi - theta), 1e-12))
        g = gradient_fd(f, theta, steps)
        evals += 2 * theta.size
        if not np.all(np.isfinite(g)):
            break
        m = config.beta1 * m + (1.0 - config.beta1) * g
        v = config.beta2 * v + (1.0 - config.beta2) * g * g
        mhat = m / (1.0 - config.beta1 ** it)
        vhat = v / (1.0 - config.beta2 ** it)
        theta = np.clip(theta - config.lr * mhat / (np.sqrt(vhat) + config.eps), lo, hi)
        val = f(theta)
        evals += 1
        if val < best_f:
            best_x, best_f = theta.copy(), val
        if np.max(np.abs(g)) < config.gtol or evals >= config.max_evals:
            converged = np.max(np.abs(g)) < config.gtol
            break
    return OptimResult(best_x, float(best_f), it, evals, converged, "adam")
