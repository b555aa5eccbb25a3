#!/usr/bin/env python3
"""Geometry of the worst-case-optimal step-size.

The controller solves a two-player game: it wants the largest step that
still guarantees descent when an adversary picks the worst gradient
estimation error inside the estimator's ellipsoid. The closed form is

    alpha = max(0, 1 - ||cov^(1/2) K theta|| / ||theta||_K^2)   (sqrt_form)
    alpha = max(0, 1 - ||cov       K theta|| / ||theta||_K^2)   (full_form)

This script sweeps the uncertainty scale, compares the closed form with
brute-force sampled maxima over the matching ellipsoid, and shows the
worst-case error vector: it never rotates the descent direction, it
amplifies it.
"""

import pathlib

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from esclab import GradientEstimate, compute_step_size, worst_case_error
from esclab.numerics import sym_inverse, sym_sqrt

OUT = pathlib.Path(__file__).parent / "output"
OUT.mkdir(exist_ok=True)
rng = np.random.default_rng(7)

theta = np.array([2.0, 1.0])
K = np.diag([0.8, 0.5])


def estimate_with(cov):
    info, _ = sym_inverse(cov)
    return GradientEstimate(valid=True, info=info, theta=theta, cov=cov,
                            cov_sqrt=sym_sqrt(cov))


scales = np.logspace(-2, 1.2, 40)
closed = {"sqrt_form": [], "full_form": []}
sampled = {"sqrt_form": [], "full_form": []}
Z = rng.normal(size=(20_000, 2))
Z /= np.linalg.norm(Z, axis=1, keepdims=True)

base_cov = np.array([[1.0, 0.3], [0.3, 0.6]])
descent = theta @ K @ theta
for s in scales:
    est = estimate_with(s * base_cov)
    for rule in closed:
        closed[rule].append(compute_step_size(est, K, rule))
        shape = est.cov_sqrt if rule == "sqrt_form" else est.cov
        worst = np.max((Z @ shape) @ (K @ theta))
        sampled[rule].append(max(0.0, 1.0 - worst / descent))

fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(10.5, 4.4))
for rule, style in (("sqrt_form", "C0"), ("full_form", "C1")):
    ax1.semilogx(scales, closed[rule], style + "-", label=f"{rule} closed form")
    ax1.semilogx(scales, sampled[rule], style + "o", ms=3, alpha=0.5,
                 label=f"{rule} sampled game")
ax1.set_xlabel("uncertainty scale (cov multiplier)")
ax1.set_ylabel("step-size")
ax1.set_title("step-size collapses as the error ellipsoid grows")
ax1.legend()

# worst-case error vectors for a few uncertainty levels
est = estimate_with(0.35 * base_cov)
ax2.quiver(0, 0, *(K @ theta), angles="xy", scale_units="xy", scale=1,
           color="k", label="descent direction K theta")
for rule, color in (("sqrt_form", "C0"), ("full_form", "C1")):
    star = worst_case_error(est, K, rule)
    ax2.quiver(0, 0, *star, angles="xy", scale_units="xy", scale=1,
               color=color, label=f"worst error ({rule})")
    print(f"{rule}: alpha={compute_step_size(est, K, rule):.3f}, "
          f"worst error {star}, alignment {star @ (K @ theta):.3f} >= 0")
ax2.set_xlim(-0.5, 2.0)
ax2.set_ylim(-0.5, 1.5)
ax2.set_aspect("equal")
ax2.set_title("the adversary amplifies, never rotates")
ax2.legend(loc="upper left", fontsize=8)
fig.tight_layout()
fig.savefig(OUT / "step_size_game.png", dpi=130)
print(f"wrote {OUT / 'step_size_game.png'}")
