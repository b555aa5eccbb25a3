#!/usr/bin/env python3
"""Drone seeking the source of a pollutant plume.

The planar drone surrogate measures the local concentration of a
Gaussian plume blown downwind of an unknown source. Starting on the
plume fringe, the controller rides the concentration gradient crosswind
into the plume, then upwind to the source, exploiting only when the
randomly dithered data supports a confident gradient estimate (roughly
one sample in twenty).
"""

import pathlib

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from esclab import drone_config, run_closed_loop, trace_column

OUT = pathlib.Path(__file__).parent / "output"
OUT.mkdir(exist_ok=True)

cfg = drone_config(seed=0)
trace = run_closed_loop(cfg)
t = trace_column(trace, "t")
r = trace_column(trace, "reference")
y = trace_column(trace, "output")
alpha = trace_column(trace, "alpha")
J = trace_column(trace, "cost")
source = cfg.cost.y_star

# concentration field for the background
gx = np.linspace(140, 300, 240)
gy = np.linspace(20, 160, 240)
GX, GY = np.meshgrid(gx, gy)
conc = np.array(
    [[-cfg.cost.evaluate([a, b]) for a, b in zip(row_x, row_y)]
     for row_x, row_y in zip(GX, GY)]
)

fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(12, 5))
im = ax1.contourf(GX, GY, conc, levels=30, cmap="turbo")
ax1.plot(y[::20, 0], y[::20, 1], "w-", lw=1, alpha=0.8, label="drone path")
ax1.plot(*source, "r*", ms=14, label="source")
ax1.plot(*cfg.r0, "wo", ms=7, label="start")
ax1.set_xlabel("east [m]")
ax1.set_ylabel("north [m]")
ax1.set_title("plume concentration and drone path")
ax1.legend(loc="lower right")
fig.colorbar(im, ax=ax1, label="concentration")

dist = np.linalg.norm(r - source, axis=1)
ax2.plot(t, dist, "C0", label="distance to source [m]")
ax2.set_xlabel("time [s]")
ax2.set_ylabel("distance [m]")
ax2b = ax2.twinx()
ax2b.plot(t, -J, "C1", alpha=0.5, label="measured concentration")
ax2b.set_ylabel("concentration")
ax2.set_title(f"convergence (step nonzero at {int((alpha > 0).sum())} of {len(t)} samples)")
ax2.legend(loc="center right")
fig.tight_layout()
fig.savefig(OUT / "drone_plume.png", dpi=130)

print(f"final distance to source: {dist[-1]:.2f} m")
print(f"final concentration: {-J[-1]:.3f} of peak {cfg.cost.amplitude / np.sqrt(2 * np.pi * cfg.cost.sigma_0):.3f}")
print(f"wrote {OUT / 'drone_plume.png'}")
