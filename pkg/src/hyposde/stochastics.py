"""Iterated Brownian increments and path simulation (EM, LG-I, LG-II).

Per Brownian coordinate the triple (dB, int int dB du, int int int dB dv du)
is drawn from three i.i.d. standard normals through a fixed linear map.
Replications get independent PCG64 streams spawned from one SeedSequence,
so a replication's path does not depend on how many others run beside it.
"""

import csv
from dataclasses import dataclass, field, replace

import numba
import numpy as np

from .density import mean_increment
from .errors import ArgumentError, DivergenceError, ModelShapeError, ParseError, ShapeError
from .model import ModelSpec, check_state, diffusion_fields, drift, generator_terms, jac_s1, jac_s2, theta_values

SCHEMES = ("EM", "LG1", "LG2", "LG2_nocorr")
DIVERGENCE_BOUND = 1e12
CHUNK_STEPS = 1 << 14

_SQRT3 = np.sqrt(3.0)
_SQRT5 = np.sqrt(5.0)
# rows: dB, i10, i110 (unit step); columns: z1, z2, z3
INCREMENT_MAP = np.array([
    [1.0, 0.0, 0.0],
    [0.5, 1.0 / (2.0 * _SQRT3), 0.0],
    [1.0 / 6.0, 1.0 / (4.0 * _SQRT3), 1.0 / (12.0 * _SQRT5)],
])
INCREMENT_POWERS = np.array([0.5, 1.5, 2.5])


def increment_covariance(delta) -> np.ndarray:
    """Exact covariance of (dB, i10, i110) for one Brownian coordinate."""
    d = float(delta)
    return np.array([
        [d, d ** 2 / 2, d ** 3 / 6],
        [d ** 2 / 2, d ** 3 / 3, d ** 4 / 8],
        [d ** 3 / 6, d ** 4 / 8, d ** 5 / 20],
    ])


@dataclass(frozen=True)
class IteratedIncrement:
    db: np.ndarray
    i10: np.ndarray
    i110: np.ndarray
    delta: float


def increment_from_normals(z, delta) -> IteratedIncrement:
    """Map standard normals ``z[..., 0:3, j]`` to the iterated integrals."""
    if not delta > 0:
        raise ArgumentError(f"step must be positive, got {delta}")
    z = np.asarray(z, dtype=float)
    if z.shape[-2] != 3:
        raise ShapeError("z must have shape (..., 3, d)")
    out = np.einsum("ab,...bj->...aj", INCREMENT_MAP, z) * (delta ** INCREMENT_POWERS)[:, None]
    return IteratedIncrement(out[..., 0, :], out[..., 1, :], out[..., 2, :], float(delta))


def sample_increment(delta, d, rng, size=None) -> IteratedIncrement:
    if not delta > 0:
        raise ArgumentError(f"step must be positive, got {delta}")
    shape = (3, d) if size is None else tuple(np.atleast_1d(size)) + (3, d)
    return increment_from_normals(rng.standard_normal(shape), delta)


# ---------------------------------------------------------------------------
# path containers

@dataclass(frozen=True)
class PathSample:
    states: np.ndarray      # (n+1, N)
    delta: float
    t0: float = 0.0
    seed: object = None
    scheme: str = "LG2"

    @property
    def n(self) -> int:
        return self.states.shape[0] - 1

    @property
    def times(self) -> np.ndarray:
        return self.t0 + self.delta * np.arange(self.n + 1)


@dataclass(frozen=True)
class ObservationSet:
    """Observed coordinates ``mask`` (0-based) of a path on an equi-spaced grid."""

    values: np.ndarray      # (n+1, len(mask))
    delta: float
    mask: tuple
    t0: float = 0.0
    meta: dict = field(default_factory=dict)

    @property
    def n(self) -> int:
        return self.values.shape[0] - 1

    @property
    def times(self) -> np.ndarray:
        return self.t0 + self.delta * np.arange(self.n + 1)

    def is_complete(self, n_coords: int) -> bool:
        return tuple(self.mask) == tuple(range(n_coords))

    def column(self, coord: int) -> np.ndarray:
        return self.values[:, self.mask.index(coord)]


def subsample(path: PathSample, stride: int) -> PathSample:
    if int(stride) != stride or stride < 1:
        raise ArgumentError("stride must be a positive integer")
    if path.n % stride:
        raise ArgumentError(f"stride {stride} does not divide n = {path.n}")
    return replace(path, states=path.states[::stride].copy(), delta=path.delta * stride)


def project_observed(path: PathSample, mask) -> ObservationSet:
    mask = tuple(int(i) for i in mask)
    if not mask:
        raise ArgumentError("observation mask must be non-empty")
    if len(set(mask)) != len(mask) or min(mask) < 0 or max(mask) >= path.states.shape[1]:
        raise ArgumentError(f"invalid observation mask {mask}")
    return ObservationSet(path.states[:, mask].copy(), path.delta, mask, path.t0,
                          {"seed": path.seed, "scheme": path.scheme})


def drop_burn_in(path: PathSample, steps: int) -> PathSample:
    return replace(path, states=path.states[steps:].copy(), t0=path.t0 + steps * path.delta)


# ---------------------------------------------------------------------------
# one-step maps

def scheme_increment(model: ModelSpec, delta, x, theta, scheme: str) -> np.ndarray:
    """Deterministic part of x_{i+1} - x_i for the chosen scheme."""
    theta = theta_values(theta)
    if scheme == "LG2":
        return mean_increment(model, delta, x, theta, corrected=True)
    if scheme == "LG2_nocorr" or scheme == "EM":
        return drift(model, x, theta) * delta
    if scheme == "LG1":
        dims = model.dims
        inc = drift(model, x, theta) * delta
        g1, _, h1 = generator_terms(model, x, theta)
        if dims.n_s1:
            inc[..., dims.s1] += g1 * (delta ** 2 / 2.0)
        inc[..., dims.s2] += h1 * (delta ** 2 / 2.0)
        return inc
    raise ArgumentError(f"unknown scheme {scheme!r}; choose from {SCHEMES}")


def noise_loadings(model: ModelSpec, delta, x, theta, scheme: str) -> np.ndarray:
    """Matrix G with x_{i+1} - x_i - increment = G z, z = (z1, z2, z3) per Brownian coordinate.

    Shape ``(..., N, 3 d)``; column ``b * d + j`` multiplies ``z_{b+1, j}``.
    """
    dims = model.dims
    theta = theta_values(theta)
    vr = model.diff_r(x, theta)
    batch = vr.shape[:-2]
    # per-integral loadings: rows of the state, columns j
    by_integral = np.zeros((3,) + batch + (dims.n, dims.d))
    by_integral[0][..., dims.r, :] = vr
    if scheme != "EM":
        l2 = jac_s2(model, x, theta) @ vr
        by_integral[1][..., dims.s2, :] = l2
        if scheme != "LG1" and dims.n_s1:
            by_integral[2][..., dims.s1, :] = jac_s1(model, x, theta) @ l2
    coef = INCREMENT_MAP * (delta ** INCREMENT_POWERS)[:, None]   # (integral, z)
    g = np.einsum("ab,a...nj->...nbj", coef, by_integral)
    return g.reshape(batch + (dims.n, 3 * dims.d))


# ---------------------------------------------------------------------------
# affine fast path

@numba.njit(cache=True)
def _affine_chunk(x, c, m, g, z, keep_every, phase, out, kept):
    n = x.size
    k = g.shape[1]
    tmp = np.empty(n)
    for step in range(z.shape[0]):
        for i in range(n):
            acc = c[i]
            for j in range(n):
                acc += m[i, j] * x[j]
            for j in range(k):
                acc += g[i, j] * z[step, j]
            tmp[i] = x[i] + acc
        for i in range(n):
            x[i] = tmp[i]
            if not abs(x[i]) <= 1e12:
                return step, kept
        phase += 1
        if phase == keep_every:
            phase = 0
            for i in range(n):
                out[kept, i] = x[i]
            kept += 1
    return -1, kept


def affine_structure(model, delta, theta, scheme, rng=None, rtol=1e-10):
    """(c, M, G) if the scheme step is affine with constant noise, else None."""
    n = model.dims.n
    probes = np.vstack([np.zeros(n), np.eye(n)])
    inc = scheme_increment(model, delta, probes, theta, scheme)
    c = inc[0]
    m = (inc[1:] - c).T
    rng = np.random.default_rng(12345) if rng is None else rng
    xt = rng.normal(scale=3.0, size=(4, n))
    lhs = scheme_increment(model, delta, xt, theta, scheme)
    rhs = c + xt @ m.T
    if not np.all(np.abs(lhs - rhs) <= rtol * np.maximum(1.0, np.abs(lhs) + np.abs(rhs))):
        return None
    g = noise_loadings(model, delta, np.vstack([probes[:1], xt]), theta, scheme)
    if not np.allclose(g, g[0], rtol=rtol, atol=0.0):
        return None
    return c, m, np.ascontiguousarray(g[0])


# ---------------------------------------------------------------------------

def _rngs(seed, reps):
    if isinstance(seed, np.random.Generator):
        if reps != 1:
            raise ArgumentError("pass an integer seed to simulate several replications")
        return [seed]
    return [np.random.Generator(np.random.PCG64(s)) for s in np.random.SeedSequence(seed).spawn(reps)]


def simulate_many(model: ModelSpec, theta, x0, delta, n, scheme="LG2", seed=0, reps=1,
                  keep_every=1, fast=True):
    """Simulate ``reps`` independent paths, keeping every ``keep_every``-th state.

    Returns a list of PathSample on the coarse grid of step ``keep_every * delta``.
    """
    if scheme not in SCHEMES:
        raise ArgumentError(f"unknown scheme {scheme!r}; choose from {SCHEMES}")
    if scheme in ("LG2", "LG2_nocorr") and model.dims.n_s1 < 1:
        raise ModelShapeError(f"scheme {scheme} needs an S1 block")
    if not delta > 0:
        raise ArgumentError(f"step must be positive, got {delta}")
    n, keep_every, reps = int(n), int(keep_every), int(reps)
    if n < 0 or keep_every < 1 or n % keep_every:
        raise ArgumentError("need n >= 0 and keep_every dividing n")
    if reps < 1:
        raise ArgumentError("need at least one replication")
    theta = theta_values(theta)
    x0 = check_state(model, x0)
    x0 = np.broadcast_to(x0, (reps, model.dims.n)).astype(float)
    rngs = _rngs(seed, reps)
    kd = 3 * model.dims.d
    n_keep = n // keep_every
    out = np.empty((reps, n_keep + 1, model.dims.n))
    out[:, 0] = x0
    chunk = max(keep_every, (CHUNK_STEPS // keep_every) * keep_every)

    affine = affine_structure(model, delta, theta, scheme) if fast else None
    if affine is not None:
        c, m, g = affine
        for r in range(reps):
            x = x0[r].copy()
            kept, done = 1, 0
            while done < n:
                size = min(chunk, n - done)
                z = rngs[r].standard_normal((size, kd))
                bad, kept = _affine_chunk(x, c, m, g, z, keep_every, 0, out[r], kept)
                if bad >= 0:
                    raise DivergenceError("state left the admissible region", done + bad + 1)
                done += size
    else:
        _simulate_generic(model, theta, delta, n, scheme, rngs, keep_every, chunk, out)

    tag = seed if not isinstance(seed, np.random.Generator) else None
    return [PathSample(out[r], delta * keep_every, 0.0, tag if reps == 1 else (tag, r), scheme)
            for r in range(reps)]


def _simulate_generic(model, theta, delta, n, scheme, rngs, keep_every, chunk, out):
    reps, dims = len(rngs), model.dims
    kd = 3 * dims.d
    x = out[:, 0].copy()
    probe = np.random.default_rng(7).normal(scale=2.0, size=(3, dims.n))
    g_probe = noise_loadings(model, delta, probe, theta, scheme)
    g_const = g_probe[0] if np.allclose(g_probe, g_probe[0], rtol=1e-12, atol=0.0) else None
    kept, done = 1, 0
    while done < n:
        size = min(chunk, n - done)
        z = np.stack([rng.standard_normal((size, kd)) for rng in rngs], axis=1)
        for step in range(size):
            g = g_const if g_const is not None else noise_loadings(model, delta, x, theta, scheme)
            x = x + scheme_increment(model, delta, x, theta, scheme) + np.einsum("...nk,...k->...n", g, z[step])
            if not np.all(np.abs(x) <= DIVERGENCE_BOUND):
                raise DivergenceError("state left the admissible region", done + step + 1)
            if (done + step + 1) % keep_every == 0:
                out[:, kept] = x
                kept += 1
        done += size


def simulate(model: ModelSpec, theta, x0, delta, n, scheme="LG2", rng=0, keep_every=1) -> PathSample:
    """Single path; ``rng`` is a Generator or an integer seed."""
    return simulate_many(model, theta, x0, delta, n, scheme, rng, 1, keep_every)[0]


# ---------------------------------------------------------------------------
# CSV

def _columns(mask):
    return ["t"] + [f"x{i + 1}" for i in mask]


def write_csv(data, path) -> None:
    """Write a PathSample or ObservationSet as ``t,x1,...`` with 17 significant digits."""
    if isinstance(data, PathSample):
        values, mask = data.states, tuple(range(data.states.shape[1]))
    else:
        values, mask = data.values, data.mask
    table = np.column_stack([data.times, values])
    np.savetxt(path, table, delimiter=",", fmt="%.17g", header=",".join(_columns(mask)), comments="")


def read_csv(path, required=None) -> ObservationSet:
    """Read an observation file; the ``x<k>`` columns present define the mask."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise ParseError(f"{path}: empty file") from None
        if not header or header[0] != "t":
            raise ParseError(f"{path}: row 1: first column must be 't'")
        mask = []
        for name in header[1:]:
            if not (name.startswith("x") and name[1:].isdigit() and int(name[1:]) >= 1):
                raise ParseError(f"{path}: row 1: bad column name {name!r}")
            mask.append(int(name[1:]) - 1)
        if not mask:
            raise ParseError(f"{path}: row 1: no state columns")
        for k in required or ():
            if k not in mask:
                raise ParseError(f"{path}: row 1: missing column x{k + 1}")
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if len(row) != len(header):
                raise ParseError(f"{path}: row {lineno}: expected {len(header)} fields, got {len(row)}")
            try:
                rows.append([float(v) for v in row])
            except ValueError:
                raise ParseError(f"{path}: row {lineno}: non-numeric entry") from None
    table = np.array(rows, dtype=float).reshape(-1, len(header))
    if table.shape[0] < 2:
        raise ParseError(f"{path}: need at least two rows of data")
    t = table[:, 0]
    n = t.size - 1
    delta = (t[-1] - t[0]) / n
    grid = t[0] + delta * np.arange(n + 1)
    dev = np.abs(t - grid)
    off = dev > 1e-10 * delta + 1e-12 * np.abs(t)
    if not delta > 0 or np.any(off):
        bad = int(np.argmax(off)) + 2 if delta > 0 else 2
        raise ParseError(f"{path}: row {bad}: time grid is not equi-spaced")
    order = np.argsort(mask)
    return ObservationSet(table[:, 1:][:, order], float(delta), tuple(sorted(mask)), float(t[0]))
