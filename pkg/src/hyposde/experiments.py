"""Experiment configurations, replication driver and the identity checks behind ``verify``."""

import csv
import json
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, fields, replace
from fractions import Fraction

import numpy as np

from . import density
from .bias import CONSTANTS, UNIT_COVARIANCE
from .complete import asymptotic_precision, estimate_complete
from .errors import ConfigurationError
from .kalman import CondGaussSpec, estimate_partial, marginal_loglik
from .model import check_condition_a2, memory_kernel_prony
from .models import MODEL_NAMES, builtin_model
from .optimize import OptimizerConfig
from .stochastics import (
    affine_structure, drop_burn_in, increment_covariance, project_observed, sample_increment, simulate,
)


@dataclass(frozen=True)
class ExperimentConfig:
    model: str = "toy3"
    scheme: str = "LG2"                 # data-generating scheme
    theta_true: tuple = None            # None: the model preset
    theta_init: tuple = None            # None: theta_true
    n: int = 1000                       # observation steps after burn-in
    delta: float = 1e-3                 # observation step
    stride: int = 10                    # fine steps per observation step
    burn_in: int = 0                    # observation steps dropped before fitting
    replications: int = 1
    seed: int = 0
    mask: tuple = None                  # None: complete observations
    variants: tuple = ("LG2",)          # fitting schemes
    optimizer: dict = field(default_factory=dict)
    x0: tuple = None

    def __post_init__(self):
        if self.model not in MODEL_NAMES:
            raise ConfigurationError(f"unknown model {self.model!r}; available: {', '.join(MODEL_NAMES)}")
        if int(self.replications) < 1:
            raise ConfigurationError("replications must be at least 1")
        if int(self.n) < 1 or not self.delta > 0 or int(self.stride) < 1 or int(self.burn_in) < 0:
            raise ConfigurationError("need n >= 1, delta > 0, stride >= 1 and burn_in >= 0")
        for v in self.variants:
            if v not in ("LG2", "LG2_nocorr"):
                raise ConfigurationError(f"unknown fitting variant {v!r}")
        if self.mask is not None:
            object.__setattr__(self, "mask", tuple(int(i) for i in self.mask))
        for name in ("theta_true", "theta_init", "x0", "variants"):
            v = getattr(self, name)
            if v is not None:
                object.__setattr__(self, name, tuple(v))

    @property
    def fine_delta(self) -> float:
        return self.delta / self.stride

    @property
    def horizon(self) -> float:
        return self.n * self.delta

    def optimizer_config(self) -> OptimizerConfig:
        return OptimizerConfig(**self.optimizer)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, doc: dict) -> "ExperimentConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(doc) - known
        if unknown:
            raise ConfigurationError(f"unknown config keys {sorted(unknown)}")
        return cls(**doc)

    @classmethod
    def from_json(cls, path) -> "ExperimentConfig":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))

    def with_overrides(self, **kw) -> "ExperimentConfig":
        return replace(self, **{k: v for k, v in kw.items() if v is not None})


TABLES = {
    "table1_set1": ExperimentConfig("toy3", n=500_000, delta=1e-3, stride=10, replications=20,
                                    mask=(0,), variants=("LG2", "LG2_nocorr"), theta_init=(1.0, 3.0)),
    "table1_set2": ExperimentConfig("toy3", n=2_000_000, delta=5e-4, stride=5, replications=20,
                                    mask=(0,), variants=("LG2", "LG2_nocorr"), theta_init=(1.0, 3.0)),
    "table1_set3": ExperimentConfig("toy3", n=10_000_000, delta=1e-3, stride=10, replications=20,
                                    mask=(0,), variants=("LG2", "LG2_nocorr"), theta_init=(1.0, 3.0)),
    "table2_ho": ExperimentConfig("qgle_ho", n=200_000, delta=1e-3, stride=10, replications=5,
                                  theta_init=(2.0, 2.0, 2.0, 2.0)),
    "table2_dw": ExperimentConfig("qgle_dw", n=200_000, delta=1e-3, stride=10, replications=5,
                                  theta_init=(3.0, 3.0, 3.0, 3.0)),
    "prony": ExperimentConfig("qgle_prony", n=200_000, delta=1e-3, stride=10, burn_in=50_000, replications=1,
                              mask=(0,), theta_init=(0.1, 0.01, 1.0, 10.0)),
}


# ---------------------------------------------------------------------------
# replication

def worker_count() -> int:
    cap = os.environ.get("HYPOSDE_THREADS")
    cpus = os.cpu_count() or 1
    if cap:
        try:
            return max(1, min(int(cap), cpus))
        except ValueError:
            raise ConfigurationError("HYPOSDE_THREADS must be an integer") from None
    return cpus


def replication_rngs(seed, reps):
    return [np.random.Generator(np.random.PCG64(s)) for s in np.random.SeedSequence(seed).spawn(reps)]


def simulate_dataset(cfg: ExperimentConfig, rng):
    """Fine LG path, subsampled to the observation grid, burn-in removed."""
    preset = builtin_model(cfg.model)
    theta = preset.theta.values if cfg.theta_true is None else np.asarray(cfg.theta_true, dtype=float)
    x0 = preset.x0 if cfg.x0 is None else np.asarray(cfg.x0, dtype=float)
    steps = (cfg.n + cfg.burn_in) * cfg.stride
    path = simulate(preset.model, theta, x0, cfg.fine_delta, steps, cfg.scheme, rng, keep_every=cfg.stride)
    # the fine grid step times stride can differ from delta in the last bit
    path = replace(path, delta=cfg.delta)
    if cfg.burn_in:
        path = drop_burn_in(path, cfg.burn_in)
    return path


def fit_dataset(cfg: ExperimentConfig, obs, variant="LG2"):
    """Estimate by contrast (complete data) or by the Kalman likelihood (S1 only)."""
    preset = builtin_model(cfg.model)
    model = preset.model
    theta_true = preset.theta.values if cfg.theta_true is None else np.asarray(cfg.theta_true)
    theta0 = theta_true if cfg.theta_init is None else np.asarray(cfg.theta_init, dtype=float)
    opt = cfg.optimizer_config()
    if obs.is_complete(model.dims.n):
        res = estimate_complete(model, obs, theta0, opt, corrected=(variant == "LG2"))
        se = asymptotic_precision(model, obs, res.theta_hat).se
        return res, se
    spec = CondGaussSpec.from_preset(preset, variant)
    return estimate_partial(spec, obs, theta0, opt), None


def _one_replication(cfg, r, rng):
    path = simulate_dataset(cfg, rng)
    mask = tuple(range(path.states.shape[1])) if cfg.mask is None else cfg.mask
    obs = project_observed(path, mask)
    preset = builtin_model(cfg.model)
    truth = preset.theta.values if cfg.theta_true is None else np.asarray(cfg.theta_true)
    rows = []
    for variant in cfg.variants:
        res, se = fit_dataset(cfg, obs, variant)
        est = res.theta_hat.values
        metrics = {}
        if cfg.model == "qgle_prony":
            metrics["kernel_rel_err"] = kernel_relative_error(est, truth)
        for k, name in enumerate(res.theta_hat.names):
            rows.append({
                "replication": r, "variant": variant, "param": name, "true": float(truth[k]),
                "estimate": float(est[k]), "se": None if se is None else float(se[k]),
                "converged": bool(res.converged), **metrics,
            })
    return rows


def replicate(cfg: ExperimentConfig, workers=None):
    """Run all replications; returns (per-replication rows, summary rows)."""
    rngs = replication_rngs(cfg.seed, cfg.replications)
    workers = worker_count() if workers is None else workers
    jobs = [(cfg, r, rngs[r]) for r in range(cfg.replications)]
    if workers > 1 and cfg.replications > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(lambda a: _one_replication(*a), jobs))
    else:
        results = [_one_replication(*a) for a in jobs]
    rows = [row for rep in results for row in rep]
    return rows, summarize(rows)


def summarize(rows):
    groups = {}
    for row in rows:
        groups.setdefault((row["variant"], row["param"]), []).append(row)
    out = []
    for (variant, param), rs in groups.items():
        est = np.array([r["estimate"] for r in rs])
        true = rs[0]["true"]
        sd = float(est.std(ddof=1)) if est.size > 1 else float("nan")
        out.append({
            "param": param, "true": true, "mean_estimate": float(est.mean()),
            "mean_bias": float(est.mean() - true), "sd": sd,
            "se": float(sd / np.sqrt(est.size)) if est.size > 1 else float("nan"),
            "replications": int(est.size), "variant": variant,
        })
    return out


def write_rows_csv(rows, path) -> None:
    if not rows:
        raise ConfigurationError("nothing to write")
    keys = list(rows[0])
    for r in rows:
        keys += [k for k in r if k not in keys]
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=keys)
        w.writeheader()
        for r in rows:
            w.writerow({k: (f"{v:.17g}" if isinstance(v, float) else v) for k, v in r.items()})


def kernel_relative_error(theta_hat, theta_true, t=None) -> float:
    """max over t of |K_hat(t) - K(t)| / K(t) for the two-term Prony kernel."""
    t = np.geomspace(0.01, 10.0, 400) if t is None else np.asarray(t)
    k_hat = memory_kernel_prony(t, theta_hat[0::2], theta_hat[1::2])
    k = memory_kernel_prony(t, theta_true[0::2], theta_true[1::2])
    return float(np.max(np.abs(k_hat - k) / k))


# ---------------------------------------------------------------------------
# identity checks

@dataclass(frozen=True)
class Check:
    name: str
    measured: float
    tolerance: float
    passed: bool

    def line(self) -> str:
        flag = "PASS" if self.passed else "FAIL"
        return f"[{flag}] {self.name}: measured {self.measured:.3e} (tolerance {self.tolerance:.1e})"


def _random_states(model, rng, size, scale=2.0):
    return rng.uniform(-scale, scale, size=(size, model.dims.n))


def _random_theta(preset, rng, size):
    base = preset.theta.values
    lo, hi = preset.theta.bounds.T
    draws = base * rng.uniform(0.5, 1.5, size=(size, base.size))
    return np.clip(draws, lo, hi)


def check_increment_moments(draws=200_000, delta=0.01, seed=0) -> Check:
    inc = sample_increment(delta, 1, np.random.default_rng(seed), size=draws)
    z = np.stack([inc.db[:, 0], inc.i10[:, 0], inc.i110[:, 0]], axis=1)
    target = increment_covariance(delta)
    worst = 0.0
    for i in range(3):
        for j in range(i, 3):
            prod = z[:, i] * z[:, j]
            se = prod.std(ddof=1) / np.sqrt(draws)
            worst = max(worst, abs(prod.mean() - target[i, j]) / se)
    return Check("increment covariance (standard errors)", worst, 4.0, worst <= 4.0)


def check_determinant(points=100, seed=1) -> Check:
    rng = np.random.default_rng(seed)
    worst = 0.0
    for name in ("toy3", "qgle_ho"):
        preset = builtin_model(name)
        xs = _random_states(preset.model, rng, points)
        for x, th in zip(xs, _random_theta(preset, rng, points)):
            cov = density.covariance_blocks(preset.model, x, th)
            delta = 10 ** rng.uniform(-3, 0)
            a = density.determinant_sigma(cov, delta)
            b = density.determinant_closed_form(cov, delta)
            worst = max(worst, abs(a - b) / abs(b))
    return Check("determinant product formula (relative)", worst, 1e-10, worst <= 1e-10)


def check_precision_identities(points=100, seed=2) -> list:
    rng = np.random.default_rng(seed)
    worst = {}
    for name in MODEL_NAMES:
        preset = builtin_model(name)
        xs = _random_states(preset.model, rng, points)
        for x, th in zip(xs, _random_theta(preset, rng, points)):
            cov = density.covariance_blocks(preset.model, x, th)
            prec, _ = density.precision_and_logdet(cov.sigma)
            for k, v in density.precision_identity_errors(cov, prec).items():
                worst[k] = max(worst.get(k, 0.0), v)
    return [Check(f"precision identity {k} (relative)", v, 1e-10, v <= 1e-10) for k, v in worst.items()]


def dense_marginal_loglik(model, theta, q, delta, m0, q0, scheme="LG2"):
    """log p(q_1..q_n | q_0) of an affine model by explicit joint-Gaussian marginalisation."""
    c, m, g = affine_structure(model, delta, theta, scheme)
    n_state = model.dims.n
    f = np.eye(n_state) + m
    w = g @ g.T
    n = len(q) - 1
    means = [np.concatenate([[q[0]], m0])]
    b0 = np.vstack([np.zeros((1, len(m0))), np.eye(len(m0))])
    loads_h = [b0]
    loads_w = [[]]
    for _ in range(n):
        means.append(f @ means[-1] + c)
        loads_h.append(f @ loads_h[-1])
        loads_w.append([f @ d for d in loads_w[-1]] + [np.eye(n_state)])
    mu = np.array([means[i][0] for i in range(1, n + 1)])
    cov = np.empty((n, n))
    for i in range(1, n + 1):
        for j in range(1, n + 1):
            cij = loads_h[i] @ q0 @ loads_h[j].T
            for l in range(min(i, j)):
                cij = cij + loads_w[i][l] @ w @ loads_w[j][l].T
            cov[i - 1, j - 1] = cij[0, 0]
    resid = np.asarray(q[1:]) - mu
    sign, logdet = np.linalg.slogdet(cov)
    return -0.5 * (n * np.log(2 * np.pi) + logdet + resid @ np.linalg.solve(cov, resid))


def check_kalman_oracle(seed=3) -> Check:
    preset = builtin_model("toy3")
    spec = CondGaussSpec.from_preset(preset)
    rng = np.random.default_rng(seed)
    worst = 0.0
    for n in range(1, 11):
        path = simulate(preset.model, preset.theta, rng.normal(size=3), 0.1, n, "LG2", rng)
        q = path.states[:, 0]
        a = marginal_loglik(spec, (q, 0.1), preset.theta)
        b = dense_marginal_loglik(preset.model, preset.theta.values, q, 0.1, spec.m0, spec.q0)
        worst = max(worst, abs(a - b) / abs(b))
    return Check("Kalman likelihood vs dense marginalisation (relative)", worst, 1e-8, worst <= 1e-8)


def check_condition_a2_builtins(points=20, seed=4) -> Check:
    rng = np.random.default_rng(seed)
    failures = 0
    for name in MODEL_NAMES:
        preset = builtin_model(name)
        for x in _random_states(preset.model, rng, points, scale=1.0):
            failures += not check_condition_a2(preset.model, x, preset.theta).passed
    return Check("condition A-II failures on built-in models", failures, 0, failures == 0)


def check_case_constants() -> Check:
    exact = [[Fraction(v).limit_denominator(1000) for v in row] for row in UNIT_COVARIANCE]
    # exact inverse by Gauss-Jordan elimination over the rationals
    n = 3
    aug = [row[:] + [Fraction(int(i == j)) for j in range(n)] for i, row in enumerate(exact)]
    for col in range(n):
        piv = next(r for r in range(col, n) if aug[r][col] != 0)
        aug[col], aug[piv] = aug[piv], aug[col]
        p = aug[col][col]
        aug[col] = [v / p for v in aug[col]]
        for r in range(n):
            if r != col and aug[r][col] != 0:
                fct = aug[r][col]
                aug[r] = [a - fct * b for a, b in zip(aug[r], aug[col])]
    inv = [row[n:] for row in aug]
    c1 = inv[2][1] / 2 + inv[2][2] + inv[1][1] / 4 + inv[1][2] / 2
    c2 = inv[2][0] / 6 + inv[1][0] / 12
    factor = 1 + c2 / c1
    err = abs(CONSTANTS.predicted_limit_factor - float(factor))
    return Check("bias limit factor vs exact rational value", err, 1e-12, err <= 1e-12)


def run_checks() -> list:
    checks = [check_increment_moments(), check_determinant()]
    checks += check_precision_identities()
    checks += [check_kalman_oracle(), check_condition_a2_builtins(), check_case_constants()]
    return checks
