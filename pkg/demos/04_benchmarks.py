#!/usr/bin/env python3
"""The three literature benchmarks, side by side.

- benchmark 1: scalar first-order lag with a non-convex valley cost;
- benchmark 2: rotation-actuated planar plant whose looping transients
  keep the step-size at zero almost everywhere (a handful of confident
  steps do all the work);
- benchmark 3: three-state plant with a steady-state-inverting input
  map and a constraint-saturated optimum.
"""

import pathlib

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from esclab import (
    bench1_config,
    bench2_config,
    bench3_config,
    run_closed_loop,
    trace_column,
)

OUT = pathlib.Path(__file__).parent / "output"
OUT.mkdir(exist_ok=True)

fig, axes = plt.subplots(2, 3, figsize=(13, 6.5))
for col, (builder, optimum, label) in enumerate(
    [
        (bench1_config, 2.0, "benchmark 1: cost J(y)"),
        (bench2_config, 2018.0, "benchmark 2: cost J(y)"),
        (bench3_config, 0.0, "benchmark 3: cost J(y)"),
    ]
):
    cfg = builder()
    trace = run_closed_loop(cfg)
    t = trace_column(trace, "t")
    J = trace_column(trace, "cost")
    alpha = trace_column(trace, "alpha")
    nonzero = int((alpha > 0).sum())

    ax = axes[0, col]
    ax.plot(t, J, "C0")
    ax.axhline(optimum, color="k", ls=":", lw=1)
    ax.set_title(label)
    ax.set_xlabel("time [s]")

    ax = axes[1, col]
    ax.stem(t[alpha > 0], alpha[alpha > 0], basefmt=" ")
    ax.set_ylim(0, 1.05)
    ax.set_title(f"step-size (nonzero at {nonzero}/{len(t)} samples)")
    ax.set_xlabel("time [s]")

    print(f"{cfg.name}: final J = {J[-1]:.4f} (optimum {optimum}), "
          f"nonzero steps {nonzero}/{len(t)}")

fig.tight_layout()
fig.savefig(OUT / "benchmarks.png", dpi=130)
print(f"wrote {OUT / 'benchmarks.png'}")
