"""Model interface for the highly degenerate (Hypo-II) class of SDEs.

State layout is ``x = (x_S1, x_S2, x_R)``: the smoothest block, the
intermediate smooth block and the rough block that carries the Brownian
noise.  Every evaluator is vectorised over leading batch axes of ``x`` and
receives the full parameter array ``theta`` (models are free to share a
parameter between drift blocks, e.g. the coupling constant of a QGLE).
"""

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from . import derivatives as fd
from .errors import ArgumentError, ConfigurationError, NumericError, ShapeError

BLOCKS = ("beta_s1", "beta_s2", "beta_r", "sigma")

Evaluator = Callable[[np.ndarray, np.ndarray], np.ndarray]


@dataclass(frozen=True)
class Dims:
    n_s1: int
    n_s2: int
    n_r: int
    d: int

    def __post_init__(self):
        if self.n_s1 < 0 or min(self.n_s2, self.n_r, self.d) < 1:
            raise ArgumentError(
                f"need n_s1 >= 0 and n_s2, n_r, d >= 1, got {self.n_s1, self.n_s2, self.n_r, self.d}"
            )

    @property
    def n(self) -> int:
        return self.n_s1 + self.n_s2 + self.n_r

    @property
    def n_s(self) -> int:
        return self.n_s1 + self.n_s2

    @property
    def n_hidden(self) -> int:
        return self.n_s2 + self.n_r

    @property
    def s1(self) -> slice:
        return slice(0, self.n_s1)

    @property
    def s2(self) -> slice:
        return slice(self.n_s1, self.n_s)

    @property
    def r(self) -> slice:
        return slice(self.n_s, self.n)

    @property
    def delta_powers(self) -> np.ndarray:
        """Per-coordinate powers k of the residual scaling Delta^{-k/2}."""
        return np.concatenate(
            [np.full(self.n_s1, 5.0), np.full(self.n_s2, 3.0), np.full(self.n_r, 1.0)]
        )


@dataclass(frozen=True)
class ParamVector:
    """Parameter values with their block labels and box bounds.

    Entries are always ordered ``beta_s1, beta_s2, beta_r, sigma``.
    """

    names: tuple
    values: np.ndarray
    blocks: tuple
    bounds: np.ndarray

    def __post_init__(self):
        values = np.array(self.values, dtype=float).reshape(-1)
        bounds = np.array(self.bounds, dtype=float).reshape(-1, 2)
        names, blocks = tuple(self.names), tuple(self.blocks)
        if not (len(names) == len(blocks) == values.size == bounds.shape[0]):
            raise ShapeError("names, blocks, values and bounds must have equal length")
        unknown = set(blocks) - set(BLOCKS)
        if unknown:
            raise ArgumentError(f"unknown parameter blocks {sorted(unknown)}")
        order = [BLOCKS.index(b) for b in blocks]
        if order != sorted(order):
            raise ArgumentError("parameters must be ordered beta_s1, beta_s2, beta_r, sigma")
        outside = (values < bounds[:, 0]) | (values > bounds[:, 1]) | ~np.isfinite(values)
        if np.any(outside):
            bad = [f"{n}={v:g} not in [{lo:g}, {hi:g}]" for n, v, (lo, hi), o
                   in zip(names, values, bounds, outside) if o]
            raise ArgumentError("parameter outside bounds: " + ", ".join(bad))
        values.setflags(write=False)
        bounds.setflags(write=False)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "bounds", bounds)
        object.__setattr__(self, "names", names)
        object.__setattr__(self, "blocks", blocks)

    def __len__(self):
        return self.values.size

    def block_mask(self, label: str) -> np.ndarray:
        return np.array([b == label for b in self.blocks], dtype=bool)

    def block(self, label: str) -> np.ndarray:
        return self.values[self.block_mask(label)]

    @property
    def beta_s1(self):
        return self.block("beta_s1")

    @property
    def beta_s2(self):
        return self.block("beta_s2")

    @property
    def beta_r(self):
        return self.block("beta_r")

    @property
    def sigma(self):
        return self.block("sigma")

    def replace(self, values) -> "ParamVector":
        return ParamVector(self.names, values, self.blocks, self.bounds)

    def clamp(self, values) -> np.ndarray:
        return np.clip(np.asarray(values, dtype=float), self.bounds[:, 0], self.bounds[:, 1])

    def as_dict(self) -> dict:
        return {n: float(v) for n, v in zip(self.names, self.values)}


@dataclass(frozen=True)
class ModelSpec:
    """A Hypo-II model given through vectorised evaluators.

    ``drift_s1`` sees only ``x_S = (x_S1, x_S2)``; ``diff_r`` returns the
    ``(n_r, d)`` matrix whose column ``j`` is ``V_{R,j}``.  The Jacobian and
    generator suppliers are optional; missing ones are replaced by central
    finite differences unless ``fd_fallback`` is off.
    """

    name: str
    dims: Dims
    param_names: tuple
    param_blocks: tuple
    param_bounds: tuple
    drift_s1: Optional[Evaluator]
    drift_s2: Evaluator
    drift_r: Evaluator
    diff_r: Evaluator
    jac_s1_wrt_s2: Optional[Evaluator] = None
    jac_s2_wrt_r: Optional[Evaluator] = None
    gen_s1: Optional[Evaluator] = None
    gen2_s1: Optional[Evaluator] = None
    gen_s2: Optional[Evaluator] = None
    constant_diffusion: bool = False
    fd_fallback: bool = True

    def params(self, values) -> ParamVector:
        return ParamVector(self.param_names, values, self.param_blocks, self.param_bounds)


def theta_values(theta) -> np.ndarray:
    if isinstance(theta, ParamVector):
        return theta.values
    return np.asarray(theta, dtype=float)


def check_state(model: ModelSpec, x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.ndim == 0 or x.shape[-1] != model.dims.n:
        raise ShapeError(f"state must have trailing length {model.dims.n}, got shape {x.shape}")
    return x


# ---------------------------------------------------------------------------
# raw evaluators (no validation, used on hot paths)

def drift(model: ModelSpec, x, theta) -> np.ndarray:
    theta = theta_values(theta)
    dims = model.dims
    parts = []
    if dims.n_s1:
        parts.append(model.drift_s1(x[..., : dims.n_s], theta))
    parts.append(model.drift_s2(x, theta))
    parts.append(model.drift_r(x, theta))
    return np.concatenate(parts, axis=-1)


def diffusion_fields(model: ModelSpec, x, theta) -> np.ndarray:
    """All noise vector fields V_k embedded in R^N, shape ``(..., N, d)``."""
    theta = theta_values(theta)
    dims = model.dims
    vr = model.diff_r(x, theta)
    out = np.zeros(vr.shape[:-2] + (dims.n, dims.d))
    out[..., dims.r, :] = vr
    return out


def _drift_s1_full(model, theta):
    ns = model.dims.n_s
    return lambda z: model.drift_s1(z[..., :ns], theta)


def jac_s1(model: ModelSpec, x, theta) -> np.ndarray:
    """d V_{S1,0} / d x_{S2}, shape ``(..., n_s1, n_s2)``."""
    theta = theta_values(theta)
    dims = model.dims
    if model.jac_s1_wrt_s2 is not None:
        return model.jac_s1_wrt_s2(x[..., : dims.n_s], theta)
    _require_fallback(model, "jac_s1_wrt_s2")
    return fd.jacobian(_drift_s1_full(model, theta), x, range(dims.n_s1, dims.n_s))


def jac_s2(model: ModelSpec, x, theta) -> np.ndarray:
    """d V_{S2,0} / d x_R, shape ``(..., n_s2, n_r)``."""
    theta = theta_values(theta)
    dims = model.dims
    if model.jac_s2_wrt_r is not None:
        return model.jac_s2_wrt_r(x, theta)
    _require_fallback(model, "jac_s2_wrt_r")
    return fd.jacobian(lambda z: model.drift_s2(z, theta), x, range(dims.n_s, dims.n))


def _require_fallback(model, what):
    if not model.fd_fallback:
        raise ConfigurationError(f"model {model.name!r} supplies no {what} and finite differences are disabled")


# ---------------------------------------------------------------------------
# generator L and its finite-difference fallback

def _fd_generator_s1(model, x, theta):
    # V_{S1,0} does not depend on x_R, so the second-order part of L vanishes
    v0 = drift(model, x, theta)
    return fd.directional_derivative(_drift_s1_full(model, theta), x, v0)


def _fd_generator_s2(model, x, theta):
    f = lambda z: model.drift_s2(z, theta)
    out = fd.directional_derivative(f, x, drift(model, x, theta))
    vk = diffusion_fields(model, x, theta)
    for k in range(model.dims.d):
        out = out + 0.5 * fd.second_directional_derivative(f, x, vk[..., k])
    return out


def _fd_generator2_s1(model, x, theta):
    # L^2 phi = D^2_{V0} phi + D_w phi,  w = D_{V0} V0 + 1/2 sum_k D^2_{V_k} V0,
    # valid because phi = V_{S1,0} does not depend on x_R
    phi = _drift_s1_full(model, theta)
    f0 = lambda z: drift(model, z, theta)
    v0 = f0(x)
    w = fd.directional_derivative(f0, x, v0)
    vk = diffusion_fields(model, x, theta)
    for k in range(model.dims.d):
        w = w + 0.5 * fd.second_directional_derivative(f0, x, vk[..., k])
    return fd.second_directional_derivative(phi, x, v0) + fd.directional_derivative(phi, x, w)


_ANALYTIC = {("s1", 1): "gen_s1", ("s1", 2): "gen2_s1", ("s2", 1): "gen_s2"}
_FALLBACK = {("s1", 1): _fd_generator_s1, ("s1", 2): _fd_generator2_s1, ("s2", 1): _fd_generator_s2}


def apply_generator(model: ModelSpec, phi: str, x, theta, order: int = 1, method: str = "auto"):
    """Apply L (``order=1``) or L^2 (``order=2``, ``phi="s1"`` only) to a smooth drift.

    ``phi`` is ``"s1"`` for V_{S1,0} or ``"s2"`` for V_{S2,0}.  ``method`` is
    ``"auto"`` (analytic supplier when available), ``"analytic"`` or ``"fd"``.
    """
    key = (phi, order)
    if key not in _ANALYTIC:
        raise ArgumentError(f"unsupported generator application {phi!r}, order {order}")
    if phi == "s1" and model.dims.n_s1 == 0:
        raise ArgumentError("model has no S1 block")
    x = check_state(model, x)
    theta = theta_values(theta)
    supplier = getattr(model, _ANALYTIC[key])
    if method == "analytic" and supplier is None:
        raise ConfigurationError(f"model {model.name!r} has no analytic {_ANALYTIC[key]}")
    if supplier is not None and method != "fd":
        return supplier(x, theta)
    if method != "fd":
        _require_fallback(model, _ANALYTIC[key])
    return _FALLBACK[key](model, x, theta)


def generator_terms(model: ModelSpec, x, theta, method="auto"):
    """(L V_{S1,0}, L^2 V_{S1,0}, L V_{S2,0}); the S1 terms are None when n_s1 = 0."""
    if model.dims.n_s1 == 0:
        return None, None, apply_generator(model, "s2", x, theta, 1, method)
    return (
        apply_generator(model, "s1", x, theta, 1, method),
        apply_generator(model, "s1", x, theta, 2, method),
        apply_generator(model, "s2", x, theta, 1, method),
    )


def eval_drift(model: ModelSpec, x, theta) -> np.ndarray:
    """Stacked drift ``[V_{S1,0}; V_{S2,0}; V_{R,0}]`` with finiteness checks."""
    x = check_state(model, x)
    theta = theta_values(theta)
    dims = model.dims
    out = drift(model, x, theta)
    for label, sl in (("V_S1", dims.s1), ("V_S2", dims.s2), ("V_R", dims.r)):
        if not np.all(np.isfinite(out[..., sl])):
            raise NumericError(f"non-finite drift in block {label}")
    return out


# ---------------------------------------------------------------------------
# Lie brackets and the span condition

def stratonovich_drift(model: ModelSpec, x, theta) -> np.ndarray:
    """V0 - 1/2 sum_k (L_k V_k); the correction is skipped for constant diffusion."""
    v0 = drift(model, x, theta)
    if model.constant_diffusion:
        return v0
    corr = np.zeros_like(v0)
    for k in range(model.dims.d):
        fk = lambda z, k=k: diffusion_fields(model, z, theta)[..., k]
        corr = corr + fd.directional_derivative(fk, x, fk(x))
    return v0 - 0.5 * corr


def lie_bracket(w, z, x) -> np.ndarray:
    """[W, Z](x) = (D_W Z)(x) - (D_Z W)(x) for vector fields given as callables."""
    return fd.directional_derivative(z, x, w(x)) - fd.directional_derivative(w, x, z(x))


@dataclass(frozen=True)
class A2Report:
    rank_r: int
    rank_s2r: int
    rank_full: int
    passed: bool
    fields: np.ndarray      # columns V_k
    brackets: np.ndarray    # columns [V0~, V_k]
    brackets2: np.ndarray   # columns [V0~, [V0~, V_k]]


def _rank(m, tol):
    s = np.linalg.svd(m, compute_uv=False)
    if s.size == 0 or s[0] == 0.0:
        return 0
    return int(np.sum(s >= tol * s[0]))


def check_condition_a2(model: ModelSpec, x, theta, tol: float = 1e-8) -> A2Report:
    """Numerical rank check of the three span conditions at a single state."""
    if not tol > 0:
        raise ArgumentError("tol must be positive")
    x = check_state(model, x)
    if x.ndim != 1:
        raise ShapeError("check_condition_a2 takes a single state")
    theta = theta_values(theta)
    dims = model.dims
    v0 = lambda z: stratonovich_drift(model, z, theta)
    fields, b1, b2 = [], [], []
    for k in range(dims.d):
        vk = lambda z, k=k: diffusion_fields(model, z, theta)[..., k]
        bk = lambda z, vk=vk: lie_bracket(v0, vk, z)
        fields.append(vk(x))
        b1.append(bk(x))
        b2.append(lie_bracket(v0, bk, x))
    fields, b1, b2 = (np.stack(c, axis=-1) for c in (fields, b1, b2))
    rank_r = _rank(fields[dims.r], tol)
    rank_s2r = _rank(np.hstack([fields, b1])[dims.n_s1:], tol)
    rank_full = _rank(np.hstack([fields, b1, b2]), tol)
    passed = rank_r == dims.n_r and rank_s2r == dims.n_hidden and rank_full == dims.n
    return A2Report(rank_r, rank_s2r, rank_full, passed, fields, b1, b2)


# ---------------------------------------------------------------------------

def memory_kernel_prony(t, c, tau):
    """Prony-series memory kernel K(t) = sum_l (c_l / tau_l) exp(-t / tau_l)."""
    c = np.atleast_1d(np.asarray(c, dtype=float))
    tau = np.atleast_1d(np.asarray(tau, dtype=float))
    if c.shape != tau.shape:
        raise ShapeError("c and tau must have equal length")
    if np.any(tau <= 0):
        raise ArgumentError("all relaxation times tau_l must be positive")
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise ArgumentError("t must be non-negative")
    terms = (c / tau) * np.exp(-t[..., None] / tau)
    return terms.sum(axis=-1)
