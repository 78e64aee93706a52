"""Monte Carlo check of the two closed-form bias limits.

beta_tilde from the scheme that stops the q-mean at Delta^2 should approach beta / 21;
sigma^2 with p imputed by differencing q should approach 8/5 sigma^2.
"""

import argparse

import numpy as np

from hyposde.bias import CONSTANTS, estimator_finite_difference_sigma, estimator_incorrect_drift
from hyposde.models import builtin_model
from hyposde.stochastics import simulate_many


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--reps", type=int, default=10)
    ap.add_argument("--n", type=int, default=500_000)
    ap.add_argument("--seed", type=int, required=True)
    args = ap.parse_args()
    stride, fine = 10, 1e-4
    toy3 = builtin_model("toy3")
    beta = [estimator_incorrect_drift((p.states, fine * stride))
            for p in simulate_many(toy3.model, [1.0, 1.0], np.zeros(3), fine, args.n * stride,
                                   seed=args.seed, reps=args.reps, keep_every=stride)]
    toy2 = builtin_model("toy2")
    sig = [estimator_finite_difference_sigma(p.states[:, 0], p.states[:-1, 2], fine * stride)
           for p in simulate_many(toy2.model, [1.0], np.zeros(3), fine, (args.n + 1) * stride,
                                  seed=args.seed + 1, reps=args.reps, keep_every=stride)]
    for label, vals, target in (("beta_tilde", beta, CONSTANTS.predicted_limit_factor), ("sigma2_hat", sig, 1.6)):
        vals = np.asarray(vals)
        print(f"{label}: mean {vals.mean():.5f}, sd {vals.std(ddof=1):.5f}, "
              f"se {vals.std(ddof=1) / np.sqrt(vals.size):.5f}, limit {target:.5f}")


if __name__ == "__main__":
    main()
