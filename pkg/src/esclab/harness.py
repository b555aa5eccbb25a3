"""Closed-loop simulation runner, trace persistence, and configuration.

One run is one sequential loop over controller samples. At each sample
time t the harness:

    1. draws the dither d_t and forms the input u_t = r_t + d_t,
    2. reads the outputs y_t = g(x_t, u_t) and the cost J(y_t),
    3. pushes (y_t, J_t) into the measurement window,
    4. estimates the gradient (once the window is primed) and updates
       the controller state r,
    5. advances the plant one sample period under the held input.

The window is primed during the first N samples with the controller
forced into exploration. Runs are deterministic given the seed; traces
serialize to CSV with fixed formatting, so identical configurations
produce byte-identical files.
"""

import configparser
import math
import os
from dataclasses import dataclass, replace

import numpy as np

from .controller import ControllerConfig, ControllerState, controller_step
from .estimator import (
    DEFAULT_COND_THRESH,
    DEFAULT_W_MAX,
    CurvatureBounds,
    GradientEstimate,
    SampleBatch,
    estimate_gradient,
)
from .models import (
    DitherSpec,
    bench1_cost,
    bench1_plant,
    bench2_plant,
    bench3_cost,
    bench3_plant,
    dither_sample,
    drone_plant,
    plume_cost,
    quadratic_cost,
    second_order_plant,
)
from .numerics import as_vector

__all__ = [
    "RunConfig",
    "TraceRecord",
    "DivergenceError",
    "ConfigError",
    "run_closed_loop",
    "emit_csv",
    "trace_column",
    "illustrative_config",
    "drone_config",
    "bench1_config",
    "bench2_config",
    "bench3_config",
    "default_config",
    "apply_config_file",
    "load_gain_check",
    "seed_from_env",
    "EXAMPLE_NAMES",
    "SEED_ENV_VAR",
]

SEED_ENV_VAR = "ESC_LAB_SEED"

EXAMPLE_NAMES = ("illustrative", "drone", "bench1", "bench2", "bench3")

#: any state/output component beyond this magnitude aborts the run
DIVERGENCE_LIMIT = 1e9


class ConfigError(ValueError):
    """Raised for malformed or inconsistent run configuration."""


class DivergenceError(RuntimeError):
    """Raised when the closed loop leaves the admissible region.

    Carries the abort time and the trace collected so far, so callers
    can report the divergence instead of emitting garbage data.
    """

    def __init__(self, t, magnitude, trace):
        super().__init__(
            f"closed loop diverged at t = {t:.6g} s (component magnitude {magnitude:.3e})"
        )
        self.t = t
        self.magnitude = magnitude
        self.trace = trace


@dataclass
class RunConfig:
    """Everything one closed-loop run needs; value-semantic and explicit."""

    plant: object
    cost: object
    bounds: CurvatureBounds
    gain: np.ndarray
    dt: float
    duration: float
    r0: np.ndarray
    x0: np.ndarray
    dither: DitherSpec
    alpha_min: float = 0.01
    horizon: int = 5
    step_rule: str = "sqrt_form"
    seed: int = 0
    w_max: float = DEFAULT_W_MAX
    cond_thresh: float = DEFAULT_COND_THRESH
    divergence_limit: float = DIVERGENCE_LIMIT
    name: str = "custom"

    def __post_init__(self):
        if self.dt <= 0:
            raise ConfigError("sample period dt must be positive")
        if self.duration < 0:
            raise ConfigError("duration must be non-negative")
        if self.horizon < self.plant.n_y:
            raise ConfigError(
                f"batch horizon N={self.horizon} must be at least the output dimension {self.plant.n_y}"
            )
        self.r0 = as_vector(self.r0, self.plant.n_r)
        self.x0 = as_vector(self.x0, self.plant.n_x)
        self.gain = np.atleast_2d(np.asarray(self.gain, dtype=float))

    def controller(self):
        return ControllerConfig(
            gain=self.gain,
            alpha_min=self.alpha_min,
            horizon=self.horizon,
            step_rule=self.step_rule,
        )


@dataclass(frozen=True)
class TraceRecord:
    """One controller sample: commanded reference, applied input, readings.

    ``reference`` is the controller state r_t during the sample (before
    the update computed at this sample takes effect), so exploration
    samples repeat the previous reference exactly. ``theta`` and
    ``info_norm`` are None while the estimate is invalid or the window
    is still priming.
    """

    t: float
    reference: np.ndarray
    control: np.ndarray
    output: np.ndarray
    cost: float
    alpha: float
    mode: str
    theta: np.ndarray = None
    info_norm: float = None


def run_closed_loop(config):
    """Simulate the closed loop and return the list of trace records.

    Samples run at t = 0, dt, ..., duration inclusive (duration/dt + 1
    rows); a zero duration returns an empty trace. Raises
    DivergenceError if any state or output component exceeds the
    divergence limit.
    """
    if config.duration == 0:
        return []

    plant, cost = config.plant, config.cost
    ctrl_cfg = config.controller()
    state = ControllerState(reference=config.r0)
    rng = np.random.default_rng(
        config.seed if config.dither.seed is None else config.dither.seed
    )

    n_steps = int(round(config.duration / config.dt))
    x = as_vector(config.x0, plant.n_x).copy()
    window_y = []
    window_J = []
    trace = []

    for i in range(n_steps + 1):
        t = i * config.dt
        d = dither_sample(config.dither, t, rng)
        u = state.reference + d
        y = as_vector(plant.output(x, u), plant.n_y)
        J = float(cost.evaluate(y))

        if not np.all(np.isfinite(y)) or np.max(np.abs(y)) > config.divergence_limit:
            raise DivergenceError(t, float(np.max(np.abs(y))), trace)

        window_y.append(y)
        window_J.append(J)
        if len(window_y) > config.horizon + 1:
            window_y.pop(0)
            window_J.pop(0)

        if len(window_y) == config.horizon + 1:
            batch = SampleBatch(
                outputs=np.array(window_y),
                costs=np.array(window_J),
                reference=state.reference,
            )
            estimate = estimate_gradient(
                batch, config.bounds, w_max=config.w_max, cond_thresh=config.cond_thresh
            )
        else:
            # priming: forced exploration until the window fills
            estimate = GradientEstimate.invalid(np.zeros((plant.n_y, plant.n_y)))

        record = TraceRecord(
            t=t,
            reference=state.reference.copy(),
            control=u.copy(),
            output=y.copy(),
            cost=J,
            alpha=0.0,
            mode="exploration",
            theta=None,
            info_norm=None,
        )
        state = controller_step(state, estimate, ctrl_cfg)
        record = replace(
            record,
            alpha=state.last_alpha,
            mode=state.mode,
            theta=None if not estimate.valid else estimate.theta.copy(),
            info_norm=None if not estimate.valid else float(np.linalg.norm(estimate.info, 2)),
        )
        trace.append(record)

        if i < n_steps:
            x = plant.step(x, u, config.dt, t)
            if not np.all(np.isfinite(x)) or np.max(np.abs(x)) > config.divergence_limit:
                raise DivergenceError(t + config.dt, float(np.max(np.abs(x))), trace)

    return trace


def trace_column(trace, name):
    """Extract one column of a trace as an array (None entries -> nan)."""
    if name in ("t", "cost", "alpha"):
        return np.array([getattr(rec, name) for rec in trace])
    if name == "mode":
        return np.array([1 if rec.mode == "exploitation" else 0 for rec in trace])
    if name in ("reference", "control", "output"):
        return np.array([getattr(rec, name) for rec in trace])
    if name == "theta":
        dim = trace[0].reference.shape[0]
        return np.array(
            [rec.theta if rec.theta is not None else np.full(dim, np.nan) for rec in trace]
        )
    if name == "info_norm":
        return np.array(
            [rec.info_norm if rec.info_norm is not None else np.nan for rec in trace]
        )
    raise KeyError(name)


def _fmt(v):
    return f"{v:.12e}"


def emit_csv(trace, path, dims=None):
    """Write a trace as CSV with fixed 13-significant-digit formatting.

    Columns: t, r_0.., u_0.., y_0.., J, alpha, mode, theta_0..,
    info_norm. Mode is encoded 0 = exploration / 1 = exploitation;
    invalid-estimate cells are empty. An empty trace writes the header
    only, which requires ``dims`` = (n_r, n_y) to size the columns.
    """
    if trace:
        n_r = trace[0].reference.shape[0]
        n_y = trace[0].output.shape[0]
    elif dims is not None:
        n_r, n_y = dims
    else:
        raise ValueError("emitting an empty trace requires explicit dims=(n_r, n_y)")

    header = (
        ["t"]
        + [f"r_{i}" for i in range(n_r)]
        + [f"u_{i}" for i in range(n_r)]
        + [f"y_{i}" for i in range(n_y)]
        + ["J", "alpha", "mode"]
        + [f"theta_{i}" for i in range(n_y)]
        + ["info_norm"]
    )
    try:
        with open(path, "w", newline="") as fh:
            fh.write(",".join(header) + "\n")
            for rec in trace:
                row = [_fmt(rec.t)]
                row += [_fmt(v) for v in rec.reference]
                row += [_fmt(v) for v in rec.control]
                row += [_fmt(v) for v in rec.output]
                row += [_fmt(rec.cost), _fmt(rec.alpha)]
                row += ["1" if rec.mode == "exploitation" else "0"]
                if rec.theta is None:
                    row += [""] * n_y + [""]
                else:
                    row += [_fmt(v) for v in rec.theta] + [_fmt(rec.info_norm)]
                fh.write(",".join(row) + "\n")
    except OSError as exc:
        raise OSError(f"failed to write trace to {path!r}: {exc}") from exc


# ---------------------------------------------------------------------------
# per-example default configurations


def illustrative_config(seed=0):
    """Under-damped second-order plant with an unknown quadratic cost.

    Sampled at 10 Hz for 60 s; batch horizon 5 with curvature bounds
    [0, 10] around the true Hessian 5; dither 0.001 sin(t). The scalar
    gain 0.0025 satisfies the stability condition with gamma = 390,
    which leaves the margin the step-size needs on this resonant plant.
    """
    return RunConfig(
        name="illustrative",
        plant=second_order_plant(zeta=0.1, omega_n=1.0, dt=0.1),
        cost=quadratic_cost(5.0, [10.0]),
        bounds=CurvatureBounds.isotropic(0.0, 10.0, 1),
        gain=np.array([[0.0025]]),
        dt=0.1,
        duration=60.0,
        r0=np.zeros(1),
        x0=np.zeros(2),
        dither=DitherSpec.sinusoidal([0.001], [1.0]),
        alpha_min=0.01,
        horizon=5,
        seed=seed,
    )


def drone_config(seed=0):
    """Planar drone surrogate seeking a Gaussian-plume source.

    Sampled at 20 Hz for 900 s, horizon 20 (one second of data), gain I,
    curvature bounds [-0.3 I, 0.15 I], unit Gaussian dither. The plume
    is 20 m wide at the source with a physical concentration amplitude
    chosen so the field's true curvature peaks near 0.1 (inside the
    declared bounds): with meter-scale dither the curvature-range term
    floors the estimation uncertainty around 0.2, and a bare normalized
    density would leave every gradient below that floor, freezing the
    controller in exploration forever. The start sits on the plume
    fringe, mostly crosswind of the axis.
    """
    plant = drone_plant(dt=0.05)
    sigma0 = 20.0
    # amplitude for a source-peak curvature of 0.1 = A / (sigma0^2 sqrt(2 pi sigma0))
    amplitude = 0.1 * sigma0**2 * math.sqrt(2.0 * math.pi * sigma0)
    start = np.array([242.4, 107.0])  # ~25 m downwind, ~35 m crosswind of the source
    return RunConfig(
        name="drone",
        plant=plant,
        cost=plume_cost([200.0, 100.0], -math.pi / 4.0, sigma0, amplitude=amplitude),
        bounds=CurvatureBounds.isotropic(-0.3, 0.15, 2),
        gain=np.eye(2),
        dt=0.05,
        duration=900.0,
        r0=start,
        x0=plant.equilibrium(start),
        dither=DitherSpec.gaussian(1.0, 2),
        alpha_min=0.01,
        horizon=20,
        seed=seed,
    )


def bench1_config(seed=0):
    """Scalar first-order benchmark with the non-convex valley cost.

    Runs under the full_form step rule: with Lipschitz-only curvature
    bounds on this one-second-lag plant, the sqrt_form rule caps the
    sustained descent rate at half the squared gradient (the tracking
    error re-inflates the error set as soon as the reference moves),
    which cannot reach the optimum within the 20 s budget.
    """
    return RunConfig(
        name="bench1",
        plant=bench1_plant(),
        cost=bench1_cost(),
        bounds=CurvatureBounds.isotropic(-2.0, 2.0, 1),
        gain=np.array([[0.5]]),
        dt=0.1,
        duration=20.0,
        r0=0.5 * np.ones(1),
        x0=0.5 * np.ones(1),
        dither=DitherSpec.sinusoidal([0.001], [1.0]),
        alpha_min=0.01,
        horizon=5,
        step_rule="full_form",
        seed=seed,
    )


def bench2_config(seed=0):
    """Rotation-actuated planar benchmark driven only by its disturbance."""
    plant = bench2_plant()
    return RunConfig(
        name="bench2",
        plant=plant,
        cost=quadratic_cost(2.0 * np.eye(2), [1.0, 1.0], offset=2018.0,
                            bounds=CurvatureBounds.isotropic(0.0, 10.0, 2)),
        bounds=CurvatureBounds.isotropic(0.0, 10.0, 2),
        gain=0.5 * np.eye(2),
        dt=0.05,
        duration=25.0,
        r0=np.zeros(2),
        x0=np.zeros(2),
        dither=DitherSpec.zero(2),
        alpha_min=0.01,
        horizon=5,
        step_rule="full_form",
        seed=seed,
    )


def bench3_config(seed=0):
    """Three-state benchmark with the steady-state-inverting input map.

    The cost gradient along the second reference channel is a constant
    2, so the optimum sits on the r2 >= 0 constraint boundary; once the
    reference crosses it, the growing mismatch between the reference
    and the saturated steady state inflates the error set and shuts the
    step-size down. alpha_min = 0.05 suppresses the low-confidence
    creep along that boundary.
    """
    plant = bench3_plant()
    r0 = np.array([0.5, 0.5])
    return RunConfig(
        name="bench3",
        plant=plant,
        cost=bench3_cost(),
        bounds=CurvatureBounds.isotropic(0.0, 10.0, 2),
        gain=0.1 * np.eye(2),
        dt=0.25,
        duration=30.0,
        r0=r0,
        x0=plant.equilibrium(r0),
        dither=DitherSpec.sinusoidal([0.001, 0.001], [1.0, 2.0]),
        alpha_min=0.05,
        horizon=5,
        seed=seed,
    )


_CONFIG_BUILDERS = {
    "illustrative": illustrative_config,
    "drone": drone_config,
    "bench1": bench1_config,
    "bench2": bench2_config,
    "bench3": bench3_config,
}


def default_config(name, seed=0):
    try:
        return _CONFIG_BUILDERS[name](seed=seed)
    except KeyError:
        raise ConfigError(f"unknown example {name!r}; choose from {EXAMPLE_NAMES}") from None


# ---------------------------------------------------------------------------
# config-file ingestion (flat INI: sections of key = value pairs)


def _parse_vector(text):
    try:
        return np.array([float(v) for v in text.replace(";", ",").split(",") if v.strip()])
    except ValueError as exc:
        raise ConfigError(f"cannot parse vector {text!r}") from exc


def _parse_matrix(text, dim):
    """Parse 'a, b; c, d' as a matrix; a bare scalar s means s * I."""
    rows = [r for r in text.split(";") if r.strip()]
    try:
        data = [[float(v) for v in row.split(",") if v.strip()] for row in rows]
    except ValueError as exc:
        raise ConfigError(f"cannot parse matrix {text!r}") from exc
    if len(data) == 1 and len(data[0]) == 1:
        return data[0][0] * np.eye(dim)
    M = np.array(data)
    if M.shape != (dim, dim):
        raise ConfigError(f"matrix {text!r} has shape {M.shape}, expected ({dim}, {dim})")
    return M


_KNOWN_KEYS = {
    "run": {"dt", "duration", "seed", "divergence_limit"},
    "plant": {"kind", "zeta", "omega_n", "kp", "kd", "f", "integrator"},
    "cost": {"kind", "hessian", "y_star", "offset", "wind_angle", "sigma0", "amplitude"},
    "estimator": {"horizon", "h_lower", "h_upper", "w_max", "cond_thresh"},
    "controller": {"gain", "alpha_min", "step_rule"},
    "dither": {"kind", "amplitudes", "frequencies", "phases", "std", "seed"},
    "init": {"r0", "x0"},
}


def _read_ini(path):
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    read = parser.read(path)
    if not read:
        raise ConfigError(f"cannot read config file {path!r}")
    return parser


def apply_config_file(config, path):
    """Overlay an INI config file onto a base (default) RunConfig.

    Every key is optional; unknown sections or keys are errors so typos
    do not silently fall back to defaults. Plant and cost rebuilds are
    only attempted when their sections are present.
    """
    parser = _read_ini(path)
    for section in parser.sections():
        if section not in _KNOWN_KEYS:
            raise ConfigError(f"unknown config section [{section}]")
        unknown = set(parser[section]) - _KNOWN_KEYS[section]
        if unknown:
            raise ConfigError(f"unknown keys in [{section}]: {sorted(unknown)}")

    if parser.has_section("plant"):
        config = _rebuild_plant(config, parser["plant"])
    if parser.has_section("cost"):
        config = _rebuild_cost(config, parser["cost"])

    n_y = config.plant.n_y
    if parser.has_section("run"):
        sec = parser["run"]
        config.dt = sec.getfloat("dt", config.dt)
        config.duration = sec.getfloat("duration", config.duration)
        config.seed = sec.getint("seed", config.seed)
        config.divergence_limit = sec.getfloat("divergence_limit", config.divergence_limit)
    if parser.has_section("estimator"):
        sec = parser["estimator"]
        config.horizon = sec.getint("horizon", config.horizon)
        lo = _parse_matrix(sec["h_lower"], n_y) if "h_lower" in sec else config.bounds.lower
        hi = _parse_matrix(sec["h_upper"], n_y) if "h_upper" in sec else config.bounds.upper
        config.bounds = CurvatureBounds(lo, hi)
        config.w_max = sec.getfloat("w_max", config.w_max)
        config.cond_thresh = sec.getfloat("cond_thresh", config.cond_thresh)
    if parser.has_section("controller"):
        sec = parser["controller"]
        if "gain" in sec:
            config.gain = _parse_matrix(sec["gain"], n_y)
        config.alpha_min = sec.getfloat("alpha_min", config.alpha_min)
        config.step_rule = sec.get("step_rule", config.step_rule)
    if parser.has_section("dither"):
        config.dither = _rebuild_dither(config, parser["dither"])
    if parser.has_section("init"):
        sec = parser["init"]
        if "r0" in sec:
            config.r0 = _parse_vector(sec["r0"])
        if "x0" in sec:
            if sec["x0"].strip() == "equilibrium":
                config.x0 = config.plant.equilibrium(config.r0)
            else:
                config.x0 = _parse_vector(sec["x0"])

    # re-run validation with the overlaid values
    return RunConfig(**{f: getattr(config, f) for f in config.__dataclass_fields__})


def _rebuild_plant(config, sec):
    kind = sec.get("kind", config.name)
    if kind == "second_order" or (kind == "illustrative"):
        config.plant = second_order_plant(
            zeta=sec.getfloat("zeta", 0.1), omega_n=sec.getfloat("omega_n", 1.0)
        )
    elif kind == "drone":
        config.plant = drone_plant(kp=sec.getfloat("kp", 25.0), kd=sec.getfloat("kd", 10.0))
    elif kind == "bench1":
        config.plant = bench1_plant()
    elif kind == "bench2":
        F = _parse_matrix(sec["f"], 2) if "f" in sec else None
        config.plant = bench2_plant(F)
    elif kind == "bench3":
        config.plant = bench3_plant(sec.get("integrator", "rk4"))
    else:
        raise ConfigError(f"unknown plant kind {kind!r}")
    return config


def _rebuild_cost(config, sec):
    kind = sec.get("kind", None)
    if kind is None:
        raise ConfigError("[cost] section requires a 'kind' key")
    if kind == "quadratic":
        y_star = _parse_vector(sec.get("y_star", "0"))
        H = _parse_matrix(sec.get("hessian", "1"), y_star.shape[0])
        config.cost = quadratic_cost(H, y_star, offset=sec.getfloat("offset", 0.0))
    elif kind == "plume":
        y_star = _parse_vector(sec.get("y_star", "200, 100"))
        config.cost = plume_cost(
            y_star,
            sec.getfloat("wind_angle", -math.pi / 4.0),
            sec.getfloat("sigma0", 20.0),
            amplitude=sec.getfloat("amplitude", 1.0),
        )
    elif kind == "bench1":
        config.cost = bench1_cost()
    elif kind == "bench3":
        config.cost = bench3_cost()
    elif kind == "bench2":
        config.cost = quadratic_cost(
            2.0 * np.eye(2), [1.0, 1.0], offset=2018.0,
            bounds=CurvatureBounds.isotropic(0.0, 10.0, 2),
        )
    else:
        raise ConfigError(f"unknown cost kind {kind!r}")
    return config


def _rebuild_dither(config, sec):
    kind = sec.get("kind", config.dither.kind)
    if kind == "none":
        return DitherSpec.zero(config.plant.n_r)
    if kind == "sinusoidal":
        amp = _parse_vector(sec["amplitudes"]) if "amplitudes" in sec else config.dither.amplitudes
        freq = (
            _parse_vector(sec["frequencies"])
            if "frequencies" in sec
            else config.dither.frequencies
        )
        ph = _parse_vector(sec["phases"]) if "phases" in sec else config.dither.phases
        if amp is None or freq is None:
            raise ConfigError("sinusoidal dither requires amplitudes and frequencies")
        return DitherSpec.sinusoidal(amp, freq, ph)
    if kind == "gaussian":
        seed = sec.getint("seed", None) if "seed" in sec else None
        return DitherSpec.gaussian(sec.getfloat("std", config.dither.std),
                                   config.plant.n_r, seed=seed)
    raise ConfigError(f"unknown dither kind {kind!r}")


def load_gain_check(path):
    """Read a [gain] section: K, h_upper, gamma, tol, dim.

    Returns (K, H_upper, gamma, tol) as arrays/floats. Scalar K or
    h_upper entries are expanded with ``dim`` (default 1).
    """
    parser = _read_ini(path)
    if not parser.has_section("gain"):
        raise ConfigError("gain-check config requires a [gain] section")
    sec = parser["gain"]
    unknown = set(sec) - {"k", "h_upper", "gamma", "tol", "dim"}
    if unknown:
        raise ConfigError(f"unknown keys in [gain]: {sorted(unknown)}")
    dim = sec.getint("dim", 1)
    if "k" not in sec or "h_upper" not in sec:
        raise ConfigError("[gain] requires both 'k' and 'h_upper'")
    K = _parse_matrix(sec["k"], dim)
    H = _parse_matrix(sec["h_upper"], dim)
    return K, H, sec.getfloat("gamma", 0.0), sec.getfloat("tol", 1e-9)


def seed_from_env(default=0):
    """Seed from the environment, used when no --seed flag is given."""
    raw = os.environ.get(SEED_ENV_VAR)
    if raw is None:
        return default
    try:
        return int(raw)
    except ValueError:
        raise ConfigError(f"{SEED_ENV_VAR} must be an integer, got {raw!r}") from None
