"""Fixed-step RK4 integration of the state equation and of the adjoint equation.

Controls are piecewise constant: ``values[i]`` acts on ``[t_i, t_{i+1})``.
"""
from dataclasses import dataclass

import numpy as np


class DivergenceError(FloatingPointError):
    """A non-finite state appeared during integration."""

    def __init__(self, step, channel=None):
        self.step = step
        self.channel = channel
        where = f"step {step}" if channel is None else f"step {step}, channel {channel}"
        super().__init__(f"integration produced a non-finite state at {where}")


@dataclass(frozen=True)
class TimeGrid:
    T: float = 3.0
    steps: int = 640

    def __post_init__(self):
        if int(self.steps) != self.steps or self.steps < 1:
            raise ValueError(f"steps must be a positive integer, got {self.steps}")
        if not self.T > 0:
            raise ValueError(f"horizon must be positive, got {self.T}")

    @property
    def dt(self):
        return self.T / self.steps

    @property
    def nodes(self):
        return np.arange(self.steps + 1) * self.dt

    def time(self, i):
        return i * self.dt


@dataclass
class ControlTrajectory:
    grid: TimeGrid
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.ndim != 2 or self.values.shape[0] != self.grid.steps:
            raise ValueError(
                f"control values must have shape ({self.grid.steps}, m), got {self.values.shape}"
            )

    @classmethod
    def zeros(cls, grid, m):
        return cls(grid, np.zeros((grid.steps, m)))

    @classmethod
    def constant(cls, grid, value):
        value = np.atleast_1d(np.asarray(value, dtype=float))
        return cls(grid, np.tile(value, (grid.steps, 1)))

    @property
    def dim(self):
        return self.values.shape[1]

    def norms(self):
        return np.linalg.norm(self.values, axis=1)

    def is_admissible(self, R, slack=1e-12):
        return bool(np.all(self.norms() <= R * (1 + slack)))


@dataclass
class StatePath:
    """States at nodes ``start .. start + len(states) - 1``."""

    grid: TimeGrid
    states: np.ndarray
    start: int = 0

    @property
    def final(self):
        return self.states[-1]

    @property
    def stop(self):
        return self.start + len(self.states) - 1

    def at(self, i):
        return self.states[i - self.start]


@dataclass
class AdjointPath:
    """Adjoint states at all nodes plus the values used at step midpoints.

    ``midpoints[i]`` and ``state_midpoints[i]`` approximate the adjoint and the
    forward state at ``t_i + dt/2``.
    """

    grid: TimeGrid
    states: np.ndarray
    midpoints: np.ndarray
    state_midpoints: np.ndarray


def row_norms(v):
    """Euclidean norms along the last axis, kept as a trailing axis.

    Rows are rescaled by their largest entry first, so the result neither
    underflows to zero nor overflows to infinity for representable norms.
    """
    scale = np.max(np.abs(v), axis=-1, keepdims=True)
    safe = np.where(scale > 0, scale, 1.0)
    return scale * np.linalg.norm(v / safe, axis=-1, keepdims=True)


def project_ball(values, R):
    """Radial projection of each row onto the closed Euclidean ball of radius R."""
    values = np.asarray(values, dtype=float)
    norms = row_norms(values)
    outside = norms > R
    if not np.any(outside):
        return values.copy()
    return np.where(outside, values * (R / np.where(outside, norms, 1.0)), values)


def rk4_step(system, t, x, u, dt):
    k1 = system.rhs(t, x, u)
    k2 = system.rhs(t + 0.5 * dt, x + 0.5 * dt * k1, u)
    k3 = system.rhs(t + 0.5 * dt, x + 0.5 * dt * k2, u)
    k4 = system.rhs(t + dt, x + dt * k3, u)
    return x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def integrate_forward(system, x_init, u, from_step=0, to_step=None):
    """Flow ``Phi^u_{s,t}(x_init)`` on the nodes ``from_step .. to_step``.

    ``x_init`` may carry leading batch axes; all members share the control.
    """
    grid = u.grid
    if to_step is None:
        to_step = grid.steps
    if not 0 <= from_step <= to_step <= grid.steps:
        raise IndexError(f"invalid step range [{from_step}, {to_step}] for {grid.steps} steps")
    x = np.array(x_init, dtype=float)
    if not np.all(np.isfinite(x)):
        raise DivergenceError(from_step)
    dt = grid.dt
    states = np.empty((to_step - from_step + 1,) + x.shape)
    states[0] = x
    for i in range(from_step, to_step):
        x = rk4_step(system, grid.time(i), x, u.values[i], dt)
        if not np.all(np.isfinite(x)):
            raise DivergenceError(i + 1)
        states[i + 1 - from_step] = x
    return StatePath(grid, states, from_step)


def _hermite_mid(a, b, da, db, dt):
    # cubic Hermite interpolant at the midpoint of [t, t + dt]
    return 0.5 * (a + b) + 0.125 * dt * (da - db)


def integrate_adjoint(system, xbar, ubar):
    """Backward RK4 for ``psi' = -DF(xbar, ubar)' psi``, ``psi_T = Dl(xbar_T)``.

    The forward state at RK4 half steps is the average of the neighbouring
    node states. The adjoint at each step midpoint is stored as well, from
    cubic Hermite interpolation of node values and node slopes.
    """
    grid = ubar.grid
    if xbar.start != 0 or xbar.stop != grid.steps:
        raise ValueError("adjoint needs the forward path on the whole time grid")
    dt = grid.dt
    xs = xbar.states

    def psidot(t, x, u, p):
        return -(system.drift_jacobian_adjoint(t, x, p) + system.control_jacobian_adjoint(t, x, u, p))

    psi = np.array(system.terminal_cost_gradient(xs[-1]), dtype=float)
    states = np.empty((grid.steps + 1,) + psi.shape)
    mids = np.empty((grid.steps,) + psi.shape)
    xmids = np.empty((grid.steps,) + xs.shape[1:])
    states[-1] = psi
    for i in range(grid.steps - 1, -1, -1):
        t0, t1 = grid.time(i), grid.time(i + 1)
        tm = t0 + 0.5 * dt
        u = ubar.values[i]
        xm = 0.5 * (xs[i] + xs[i + 1])
        xmids[i] = xm
        k1 = psidot(t1, xs[i + 1], u, psi)
        k2 = psidot(tm, xm, u, psi - 0.5 * dt * k1)
        k3 = psidot(tm, xm, u, psi - 0.5 * dt * k2)
        k4 = psidot(t0, xs[i], u, psi - dt * k3)
        new = psi - (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if not np.all(np.isfinite(new)):
            raise DivergenceError(i)
        mids[i] = _hermite_mid(new, psi, psidot(t0, xs[i], u, new), k1, dt)
        psi = new
        states[i] = psi
    return AdjointPath(grid, states, mids, xmids)


def concat_controls(u, ubar, s):
    """``u`` on steps before node ``s`` and ``ubar`` from node ``s`` on."""
    if u.grid != ubar.grid:
        raise ValueError("controls live on different time grids")
    if not 0 <= s <= u.grid.steps:
        raise IndexError(f"node {s} outside [0, {u.grid.steps}]")
    values = np.concatenate([u.values[:s], ubar.values[s:]])
    return ControlTrajectory(u.grid, values)
