"""Plant simulators, cost functions, and dither generators.

Plants expose a uniform sampled-data interface: ``step(x, u, dt, t)``
advances the state one controller sample with the input held constant
(zero-order hold), and ``output(x, u)`` reads the measured outputs.
Linear plants discretize exactly through the matrix exponential;
nonlinear plants integrate with classical RK4 at an inner step of
dt / n_sub. Every built-in plant has unity steady-state gain from the
commanded reference to the output, so a constant command settles the
output onto that command.

Costs expose ``evaluate`` and an analytic ``gradient`` (used only by
tests and diagnostics; the controller never sees it), plus declared
curvature bounds that are honest: the true Hessian of each built-in
cost stays inside its declared bounds over the simulated region.
"""

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import expm

from .estimator import CurvatureBounds
from .numerics import as_symmetric, as_vector

__all__ = [
    "PlantModel",
    "LinearZohPlant",
    "Rk4Plant",
    "CostModel",
    "QuadraticCost",
    "PlumeCost",
    "Bench1Cost",
    "Bench3Cost",
    "DitherSpec",
    "second_order_plant",
    "drone_plant",
    "quadratic_cost",
    "plume_cost",
    "bench1_plant",
    "bench1_cost",
    "bench2_plant",
    "bench3_plant",
    "bench3_cost",
    "bench3_transform",
    "dither_sample",
    "rk4_integrate",
    "finite_difference_gradient",
    "finite_difference_hessian",
]


# ---------------------------------------------------------------------------
# integration helpers


def rk4_integrate(f, x, t, dt, n_sub=10):
    """Classical RK4 integration of xdot = f(x, t) over [t, t + dt]."""
    h = dt / n_sub
    for i in range(n_sub):
        ti = t + i * h
        k1 = f(x, ti)
        k2 = f(x + 0.5 * h * k1, ti + 0.5 * h)
        k3 = f(x + 0.5 * h * k2, ti + 0.5 * h)
        k4 = f(x + h * k3, ti + h)
        x = x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    return x


def finite_difference_gradient(f, y, h=1e-6):
    """Central-difference gradient, the standard oracle for cost models."""
    y = as_vector(y)
    g = np.zeros_like(y)
    for i in range(y.shape[0]):
        e = np.zeros_like(y)
        e[i] = h
        g[i] = (f(y + e) - f(y - e)) / (2.0 * h)
    return g


def finite_difference_hessian(f, y, h=1e-4):
    """Central-difference Hessian (symmetrized)."""
    y = as_vector(y)
    n = y.shape[0]
    H = np.zeros((n, n))
    f0 = f(y)
    for i in range(n):
        ei = np.zeros(n)
        ei[i] = h
        H[i, i] = (f(y + ei) - 2.0 * f0 + f(y - ei)) / h**2
        for j in range(i + 1, n):
            ej = np.zeros(n)
            ej[j] = h
            H[i, j] = H[j, i] = (
                f(y + ei + ej) - f(y + ei - ej) - f(y - ei + ej) + f(y - ei - ej)
            ) / (4.0 * h**2)
    return 0.5 * (H + H.T)


# ---------------------------------------------------------------------------
# plants


class PlantModel:
    """Deterministic sampled-data plant x+ = f(x, u), y = g(x, u)."""

    n_x = None
    n_r = None
    n_y = None

    def step(self, x, u, dt, t=0.0):
        raise NotImplementedError

    def output(self, x, u):
        raise NotImplementedError

    def equilibrium(self, u):
        """Steady state reached under the constant command u."""
        raise NotImplementedError

    def steady_output(self, r):
        """Output reached at equilibrium under the constant command r.

        Identity for every built-in plant on its admissible commands;
        plants with an input transformation may saturate some channels.
        """
        return as_vector(r, self.n_r)


class LinearZohPlant(PlantModel):
    """Continuous-time linear plant under exact zero-order-hold sampling.

    xdot = Ac x + Bc u, y = C x. The discrete pair (Ad, Bd) for a given
    sample period comes from one matrix exponential and is cached per
    period.
    """

    def __init__(self, Ac, Bc, C):
        self.Ac = np.atleast_2d(np.asarray(Ac, dtype=float))
        self.Bc = np.atleast_2d(np.asarray(Bc, dtype=float))
        self.C = np.atleast_2d(np.asarray(C, dtype=float))
        self.n_x = self.Ac.shape[0]
        self.n_r = self.Bc.shape[1]
        self.n_y = self.C.shape[0]
        self._zoh_cache = {}

    def discrete(self, dt):
        """Exact ZOH pair (Ad, Bd) plus the output matrix C."""
        if dt not in self._zoh_cache:
            n, m = self.n_x, self.n_r
            M = np.zeros((n + m, n + m))
            M[:n, :n] = self.Ac
            M[:n, n:] = self.Bc
            Md = expm(M * dt)
            self._zoh_cache[dt] = (Md[:n, :n], Md[:n, n:])
        Ad, Bd = self._zoh_cache[dt]
        return Ad, Bd, self.C

    def step(self, x, u, dt, t=0.0):
        Ad, Bd, _ = self.discrete(dt)
        return Ad @ as_vector(x, self.n_x) + Bd @ as_vector(u, self.n_r)

    def output(self, x, u):
        return self.C @ as_vector(x, self.n_x)

    def equilibrium(self, u):
        return np.linalg.solve(-self.Ac, self.Bc @ as_vector(u, self.n_r))


class Rk4Plant(PlantModel):
    """Nonlinear plant integrated with fixed-step RK4 under ZOH inputs."""

    n_sub = 10

    def derivative(self, x, u, t):
        raise NotImplementedError

    def step(self, x, u, dt, t=0.0):
        x = as_vector(x, self.n_x)
        u = as_vector(u, self.n_r)
        return rk4_integrate(lambda xx, tt: self.derivative(xx, u, tt), x, t, dt, self.n_sub)


def second_order_plant(zeta, omega_n, dt=None):
    """Under-damped second-order lag ydd + 2 zeta wn yd + wn^2 y = wn^2 u.

    Unity DC gain, so the output settles on a constant command. The
    optional ``dt`` pre-warms the ZOH cache for the harness sample rate.
    """
    wn2 = omega_n**2
    plant = LinearZohPlant(
        Ac=[[0.0, 1.0], [-wn2, -2.0 * zeta * omega_n]],
        Bc=[[0.0], [wn2]],
        C=[[1.0, 0.0]],
    )
    if dt is not None:
        plant.discrete(dt)
    return plant


def drone_plant(kp=25.0, kd=10.0, dt=None):
    """Planar position-loop surrogate for a quadrotor with an inner tracker.

    Each axis is a double integrator closed by a PD loop,
    pdd = kp (u - p) - kd pd, tuned for roughly one-second settling.
    The measured output is the planar position (the GPS fix).
    """
    Ac = np.zeros((4, 4))
    Bc = np.zeros((4, 2))
    C = np.zeros((2, 4))
    for axis in range(2):
        i = 2 * axis
        Ac[i, i + 1] = 1.0
        Ac[i + 1, i] = -kp
        Ac[i + 1, i + 1] = -kd
        Bc[i + 1, axis] = kp
        C[axis, i] = 1.0
    plant = LinearZohPlant(Ac, Bc, C)
    if dt is not None:
        plant.discrete(dt)
    return plant


class _Bench1Plant(Rk4Plant):
    """Scalar first-order lag xdot = -x + u, y = x."""

    n_x = 1
    n_r = 1
    n_y = 1

    def derivative(self, x, u, t):
        return -x + u

    def output(self, x, u):
        return as_vector(x, 1).copy()

    def equilibrium(self, u):
        return as_vector(u, 1).copy()


def bench1_plant():
    return _Bench1Plant()


class _Bench2Plant(Rk4Plant):
    """Planar rotation-actuated plant with periodic disturbance.

    xdot = R(x) u + w(t) with R(x) a rotation by angle x1 + x2 and
    w(t) = [sin 2t, cos t]. The raw input is computed by an inner
    pre-stabilizer from the state and disturbance sampled at the start
    of each period and held (ZOH): u_raw = R(x)' (F (x - r) - w), which
    at sample instants yields the tracking dynamics xdot = F (x - r).
    The command ``u`` given to :meth:`step` is the reference r.
    """

    n_x = 2
    n_r = 2
    n_y = 2

    def __init__(self, F=None):
        F = -10.0 * np.eye(2) if F is None else np.atleast_2d(np.asarray(F, dtype=float))
        if F.shape != (2, 2):
            raise ValueError("F must be a 2x2 matrix")
        if np.any(np.real(np.linalg.eigvals(F)) >= 0):
            raise ValueError("pre-stabilizer matrix F must be Hurwitz")
        self.F = F

    @staticmethod
    def rotation(x):
        a = x[0] + x[1]
        c, s = math.cos(a), math.sin(a)
        return np.array([[c, -s], [s, c]])

    @staticmethod
    def disturbance(t):
        return np.array([math.sin(2.0 * t), math.cos(t)])

    def step(self, x, u, dt, t=0.0):
        x = as_vector(x, 2)
        r = as_vector(u, 2)
        # raw input from sampled state/disturbance, held over the period
        u_raw = self.rotation(x).T @ (self.F @ (x - r) - self.disturbance(t))
        f = lambda xx, tt: self.rotation(xx) @ u_raw + self.disturbance(tt)
        return rk4_integrate(f, x, t, dt, self.n_sub)

    def output(self, x, u):
        return as_vector(x, 2).copy()

    def equilibrium(self, u):
        # equilibrium of the disturbance-free pre-stabilized loop
        return as_vector(u, 2).copy()


def bench2_plant(F=None):
    return _Bench2Plant(F)


def bench3_transform(r):
    """Steady-state-inverting input transformation with the r2 >= 0 clamp.

    u1 = r1 / (1 + sqrt(r2)), u2 = sqrt(r2), with r2 clamped to zero
    from below. Under this transformation the plant's steady-state map
    from (clamped) r to y is the identity.
    """
    r = as_vector(r, 2)
    r2 = max(r[1], 0.0)
    s = math.sqrt(r2)
    return np.array([r[0] / (1.0 + s), s])


class _Bench3Plant(Rk4Plant):
    """Three-state benchmark with a steady-state-inverting input map.

    x1dot = -x1 + u2^2, x2dot = -x2 + u1, x3dot = -x3 + u2 x2, with
    y1 = x2 + x3 and y2 = x1 + x2 - u1. The command is the reference r,
    mapped through :func:`bench3_transform`. ``integrator="euler"``
    selects a single forward-Euler step per sample period instead of
    the RK4 default.
    """

    n_x = 3
    n_r = 2
    n_y = 2

    def __init__(self, integrator="rk4"):
        if integrator not in ("rk4", "euler"):
            raise ValueError("integrator must be 'rk4' or 'euler'")
        self.integrator = integrator

    def derivative(self, x, u, t):
        u1, u2 = u
        return np.array([-x[0] + u2**2, -x[1] + u1, -x[2] + u2 * x[1]])

    def step(self, x, u, dt, t=0.0):
        x = as_vector(x, 3)
        u_raw = bench3_transform(u)
        if self.integrator == "euler":
            return x + dt * self.derivative(x, u_raw, t)
        return rk4_integrate(lambda xx, tt: self.derivative(xx, u_raw, tt), x, t, dt, self.n_sub)

    def output(self, x, u):
        x = as_vector(x, 3)
        u_raw = bench3_transform(u)
        return np.array([x[1] + x[2], x[0] + x[1] - u_raw[0]])

    def equilibrium(self, u):
        u_raw = bench3_transform(u)
        return np.array([u_raw[1] ** 2, u_raw[0], u_raw[1] * u_raw[0]])

    def steady_output(self, r):
        r = as_vector(r, 2)
        return np.array([r[0], max(r[1], 0.0)])


def bench3_plant(integrator="rk4"):
    return _Bench3Plant(integrator)


# ---------------------------------------------------------------------------
# costs


class CostModel:
    """Steady-state cost J(y) with declared curvature bounds."""

    bounds = None

    def evaluate(self, y):
        raise NotImplementedError

    def gradient(self, y):
        raise NotImplementedError

    def optimum(self):
        """(y_star, J_star) if known analytically."""
        raise NotImplementedError


class QuadraticCost(CostModel):
    """J(y) = 0.5 (y - y_star)' H (y - y_star) + offset."""

    def __init__(self, H, y_star, offset=0.0, bounds=None):
        self.H = as_symmetric(H)
        self.y_star = as_vector(y_star, self.H.shape[0])
        self.offset = float(offset)
        self.bounds = bounds if bounds is not None else CurvatureBounds.exact(self.H)

    def evaluate(self, y):
        d = as_vector(y, self.y_star.shape[0]) - self.y_star
        return 0.5 * float(d @ self.H @ d) + self.offset

    def gradient(self, y):
        return self.H @ (as_vector(y, self.y_star.shape[0]) - self.y_star)

    def hessian(self, y):
        return self.H.copy()

    def optimum(self):
        return self.y_star.copy(), self.offset


def quadratic_cost(H, y_star, offset=0.0, bounds=None):
    return QuadraticCost(H, y_star, offset=offset, bounds=bounds)


class PlumeCost(CostModel):
    """Negative pollutant concentration under a Gaussian plume.

    Downwind of the source (d' (y - y_star) >= 0) the concentration is
    Gaussian in the crosswind offset with a width
    sigma = sigma0 + d' (y - y_star) / 2 growing along the wind axis;
    upwind it is an isotropic Gaussian bell of constant width sigma0.
    The cost is the negative concentration, so the source is the
    minimum with value -amplitude/sqrt(2 pi sigma0). ``amplitude``
    converts the normalized density into physical concentration units;
    the default 1.0 keeps the bare density.
    """

    def __init__(self, y_star, wind_dir_angle, sigma_0, bounds=None, amplitude=1.0):
        if sigma_0 <= 0:
            raise ValueError("sigma_0 must be positive")
        if amplitude <= 0:
            raise ValueError("amplitude must be positive")
        self.y_star = as_vector(y_star, 2)
        self.wind = np.array([math.cos(wind_dir_angle), math.sin(wind_dir_angle)])
        self.sigma_0 = float(sigma_0)
        self.amplitude = float(amplitude)
        if bounds is None:
            bounds = CurvatureBounds.isotropic(-0.3, 0.15, 2)
        self.bounds = bounds

    def _geometry(self, y):
        delta = as_vector(y, 2) - self.y_star
        c = float(self.wind @ delta)
        return delta, c

    def evaluate(self, y):
        delta, c = self._geometry(y)
        if c >= 0.0:
            sigma = self.sigma_0 + 0.5 * c
            z = delta - c * self.wind
            expo = 0.5 * float(z @ z) / sigma**2
        else:
            sigma = self.sigma_0
            expo = 0.5 * float(delta @ delta) / sigma**2
        return -self.amplitude * math.exp(-expo) / math.sqrt(2.0 * math.pi * sigma)

    def gradient(self, y):
        delta, c = self._geometry(y)
        mag = -self.evaluate(y)  # positive concentration
        if c >= 0.0:
            sigma = self.sigma_0 + 0.5 * c
            z = delta - c * self.wind
            q = float(z @ z) / sigma**2
            # d/dy of [ln sqrt(2 pi sigma) + q/2] times concentration
            return mag * (self.wind / (4.0 * sigma) + z / sigma**2 - q * self.wind / (2.0 * sigma))
        return mag * delta / self.sigma_0**2

    def optimum(self):
        return self.y_star.copy(), -self.amplitude / math.sqrt(2.0 * math.pi * self.sigma_0)


def plume_cost(y_star, wind_dir_angle, sigma_0, bounds=None, amplitude=1.0):
    return PlumeCost(y_star, wind_dir_angle, sigma_0, bounds=bounds, amplitude=amplitude)


class Bench1Cost(CostModel):
    """Non-convex scalar valley J(y) = 3 - 1 / sqrt(1 + (y - 2)^2)."""

    def __init__(self, bounds=None):
        self.bounds = bounds if bounds is not None else CurvatureBounds.isotropic(-2.0, 2.0, 1)

    def evaluate(self, y):
        u = float(as_vector(y, 1)[0]) - 2.0
        return 3.0 - 1.0 / math.sqrt(1.0 + u**2)

    def gradient(self, y):
        u = float(as_vector(y, 1)[0]) - 2.0
        return np.array([u * (1.0 + u**2) ** -1.5])

    def hessian(self, y):
        u = float(as_vector(y, 1)[0]) - 2.0
        return np.array([[(1.0 - 2.0 * u**2) * (1.0 + u**2) ** -2.5]])

    def optimum(self):
        return np.array([2.0]), 2.0


def bench1_cost(bounds=None):
    return Bench1Cost(bounds)


class Bench3Cost(CostModel):
    """Convex but not strictly convex cost J(y) = y1^2 + 2 y2."""

    def __init__(self, bounds=None):
        self.bounds = bounds if bounds is not None else CurvatureBounds.isotropic(0.0, 10.0, 2)

    def evaluate(self, y):
        y = as_vector(y, 2)
        return float(y[0] ** 2 + 2.0 * y[1])

    def gradient(self, y):
        y = as_vector(y, 2)
        return np.array([2.0 * y[0], 2.0])

    def hessian(self, y):
        return np.diag([2.0, 0.0])

    def optimum(self):
        # minimum over the feasible steady states (y2 >= 0)
        return np.zeros(2), 0.0


def bench3_cost(bounds=None):
    return Bench3Cost(bounds)


# ---------------------------------------------------------------------------
# dither


@dataclass(frozen=True)
class DitherSpec:
    """Persistent-excitation signal: per-channel sinusoids or Gaussian noise."""

    kind: str
    amplitudes: np.ndarray = None
    frequencies: np.ndarray = None
    phases: np.ndarray = None
    std: float = 0.0
    dim: int = 1
    seed: int = None

    def __post_init__(self):
        if self.kind not in ("sinusoidal", "gaussian"):
            raise ValueError("dither kind must be 'sinusoidal' or 'gaussian'")
        if self.kind == "sinusoidal":
            amp = as_vector(self.amplitudes)
            if np.any(amp < 0):
                raise ValueError("dither amplitudes must be non-negative")
            freq = as_vector(self.frequencies, amp.shape[0])
            ph = (
                np.zeros(amp.shape[0])
                if self.phases is None
                else as_vector(self.phases, amp.shape[0])
            )
            object.__setattr__(self, "amplitudes", amp)
            object.__setattr__(self, "frequencies", freq)
            object.__setattr__(self, "phases", ph)
            object.__setattr__(self, "dim", amp.shape[0])
        else:
            if self.std < 0:
                raise ValueError("dither std must be non-negative")
            if self.dim < 1:
                raise ValueError("dither dimension must be at least 1")

    @classmethod
    def sinusoidal(cls, amplitudes, frequencies, phases=None):
        return cls(kind="sinusoidal", amplitudes=amplitudes, frequencies=frequencies, phases=phases)

    @classmethod
    def gaussian(cls, std, dim, seed=None):
        return cls(kind="gaussian", std=std, dim=dim, seed=seed)

    @classmethod
    def zero(cls, dim):
        return cls.sinusoidal(np.zeros(dim), np.zeros(dim))


def dither_sample(spec, t, rng=None):
    """One dither sample: deterministic in t for sinusoids, drawn from
    ``rng`` for Gaussian dither (reproducible under a fixed seed)."""
    if spec.kind == "sinusoidal":
        return spec.amplitudes * np.sin(spec.frequencies * t + spec.phases)
    if rng is None:
        raise ValueError("gaussian dither requires a random generator")
    return rng.normal(0.0, spec.std, spec.dim)
