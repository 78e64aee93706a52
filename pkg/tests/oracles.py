"""Independent reference computations used only by the tests."""

from fractions import Fraction

import numpy as np
from scipy import integrate
from scipy.linalg import expm
from scipy.stats import multivariate_normal


def toy_matrix(beta):
    return np.array([[0.0, 1.0, 0.0], [0.0, 0.0, 1.0], [0.0, 0.0, -beta]])


def toy_truncated_mean(x, beta, delta):
    """Row-wise Taylor truncation of expm(A delta) x: orders 3, 2, 1 for q, p, s."""
    a = toy_matrix(beta)
    out = np.array(x, dtype=float)
    term = np.array(x, dtype=float)
    orders = (3, 2, 1)
    fact = 1.0
    for k in range(1, 4):
        term = a @ term
        fact *= k
        for row, order in enumerate(orders):
            if k <= order:
                out[row] += term[row] * delta ** k / fact
    return out


def toy_unit_covariance_quadrature():
    """Covariance of (int int int dB, int int dB, dB) over [0, 1] from the kernels (1-u)^2/2, 1-u, 1."""
    g = [lambda u: (1 - u) ** 2 / 2, lambda u: 1 - u, lambda u: 1.0]
    out = np.empty((3, 3))
    for i in range(3):
        for j in range(3):
            out[i, j] = integrate.quad(lambda u: g[i](u) * g[j](u), 0.0, 1.0)[0]
    return out


def exact_inverse(mat):
    """Gauss-Jordan over the rationals."""
    n = len(mat)
    aug = [[Fraction(v) for v in row] + [Fraction(int(i == j)) for j in range(n)] for i, row in enumerate(mat)]
    for col in range(n):
        piv = next(r for r in range(col, n) if aug[r][col] != 0)
        aug[col], aug[piv] = aug[piv], aug[col]
        p = aug[col][col]
        aug[col] = [v / p for v in aug[col]]
        for r in range(n):
            if r != col:
                f = aug[r][col]
                aug[r] = [a - f * b for a, b in zip(aug[r], aug[col])]
    return [row[n:] for row in aug]


UNIT_FRACTIONS = [
    [Fraction(1, 20), Fraction(1, 8), Fraction(1, 6)],
    [Fraction(1, 8), Fraction(1, 3), Fraction(1, 2)],
    [Fraction(1, 6), Fraction(1, 2), Fraction(1)],
]


def toy_dense_loglik(beta, sigma, q, delta, m0, q0, corrected=True):
    """log p(q_1..q_n | q_0) for toy-3 under LG2, built as one big Gaussian.

    The one-step map is x' = F x + w with F the truncated exponential and w
    Gaussian with the LG2 covariance; the stacked path is then linear in
    (h_0, w_1, ..., w_n).
    """
    a = toy_matrix(beta)
    f = np.eye(3) + a * delta
    if corrected:
        a2, a3 = a @ a, a @ a @ a
        f[0] += a2[0] * delta ** 2 / 2 + a3[0] * delta ** 3 / 6
        f[1] += a2[1] * delta ** 2 / 2
    scale = np.array([delta ** 2.5, delta ** 1.5, delta ** 0.5])
    w = sigma ** 2 * np.array(UNIT_FRACTIONS, dtype=float) * np.outer(scale, scale)
    n = len(q) - 1
    dim = 2 + 3 * n
    # state_k = shift_k + lin_k @ (h0, w_1..w_n)
    shift = np.array([q[0], 0.0, 0.0])
    lin = np.zeros((3, dim))
    lin[1:, :2] = np.eye(2)
    mean0 = np.concatenate([m0, np.zeros(3 * n)])
    cov0 = np.zeros((dim, dim))
    cov0[:2, :2] = q0
    for k in range(n):
        cov0[2 + 3 * k:5 + 3 * k, 2 + 3 * k:5 + 3 * k] = w
    rows_mu, rows_lin = [], []
    for k in range(n):
        shift = f @ shift
        lin = f @ lin
        lin[:, 2 + 3 * k:5 + 3 * k] += np.eye(3)
        rows_mu.append(shift[0] + lin[0] @ mean0)
        rows_lin.append(lin[0].copy())
    b = np.array(rows_lin)
    return multivariate_normal(np.array(rows_mu), b @ cov0 @ b.T).logpdf(np.asarray(q[1:]))


def exact_toy_transition(beta, sigma, delta):
    """(F, W) of the exact toy-3 transition, via the Van Loan block exponential."""
    a = toy_matrix(beta)
    bb = np.zeros((3, 3))
    bb[2, 2] = sigma ** 2
    big = np.zeros((6, 6))
    big[:3, :3] = -a
    big[:3, 3:] = bb
    big[3:, 3:] = a.T
    e = expm(big * delta)
    f = e[3:, 3:].T
    return f, f @ e[:3, 3:]
