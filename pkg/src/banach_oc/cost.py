"""Cost functional, Hamilton-Pontryagin function, and the exact increment formula."""
from dataclasses import dataclass

import numpy as np

from .dynamics import row_norms


@dataclass(frozen=True)
class CostBreakdown:
    terminal: float
    energy: float

    @property
    def total(self):
        return self.terminal + self.energy


def energy(system, u):
    """``(alpha/2) int |u_t|^2 dt``, exact for piecewise-constant controls."""
    return 0.5 * system.energy_weight * u.grid.dt * float(np.sum(u.values**2))


def total_cost(system, x, u):
    if x.grid != u.grid or x.stop != u.grid.steps:
        raise ValueError("state path does not end at the horizon of the control grid")
    return CostBreakdown(float(system.terminal_cost(x.final)), energy(system, u))


def hamiltonian(system, t, x, p, u):
    u = np.asarray(u, dtype=float)
    return (
        0.5 * system.energy_weight * float(u @ u)
        + float(system.inner(p, system.drift(t, x)))
        + float(u @ system.control_adjoint(t, x, p))
    )


def feedback_minimizer(system, gp):
    """Minimizer of ``u -> (alpha/2)|u|^2 + <u, gp>`` over the ball of radius R.

    With ``alpha == 0`` the minimizer is ``-R gp/|gp|``; a vanishing ``gp``
    yields the zero control. Rows of a 2-d ``gp`` are handled independently.
    """
    gp = np.asarray(gp, dtype=float)
    alpha, R = system.energy_weight, system.control_bound
    norms = row_norms(gp)
    # |gp| > alpha R  <=>  -gp/alpha lies outside the ball; never divide there
    outside = norms > alpha * R
    on_sphere = -R * gp / np.where(norms > 0, norms, 1.0)
    if alpha > 0:
        interior = -gp / np.where(outside, 1.0, alpha)
    else:
        interior = np.zeros_like(gp)
    return np.where(outside, on_sphere, interior)


def adjoint_channel_mean(system, xbar, psi):
    """Per-step average of ``G(x_t)' psi_t`` by Simpson's rule, shape ``(steps, m)``."""
    grid = psi.grid
    xs, ps = xbar.states, psi.states
    nodes = np.array([system.control_adjoint(grid.time(i), xs[i], ps[i]) for i in range(grid.steps + 1)])
    mids = np.array(
        [
            system.control_adjoint(grid.time(i) + 0.5 * grid.dt, psi.state_midpoints[i], psi.midpoints[i])
            for i in range(grid.steps)
        ]
    )
    return (nodes[:-1] + 4.0 * mids + nodes[1:]) / 6.0


def cost_gradient(system, xbar, ubar, psi):
    """L2 gradient of the cost w.r.t. the piecewise-constant control values.

    Row ``i`` is the step average of ``alpha u_t + G(x_t)' psi_t``, so the
    directional derivative along ``du`` is ``dt * sum_i <du_i, row_i>``.
    """
    return system.energy_weight * ubar.values + adjoint_channel_mean(system, xbar, psi)


def directional_derivative(gradient, du):
    return du.grid.dt * float(np.sum(gradient * du.values))


def increment(system, ubar, u, gp):
    """Exact increment ``I[u] - I[ubar]`` as the integral of Hamiltonian differences.

    ``gp[i]`` is ``G(x_t)' Dp_t(x_t)`` at node ``i`` along the path ``x`` of
    ``u``, where ``p_t`` is the baseline cost-to-go. Nodes are combined with
    the trapezoid rule on each step.
    """
    gp = np.asarray(gp, dtype=float)
    if gp.shape != (u.grid.steps + 1, u.dim):
        raise ValueError(f"expected probes of shape {(u.grid.steps + 1, u.dim)}, got {gp.shape}")
    alpha = system.energy_weight
    du = u.values - ubar.values
    quad = 0.5 * alpha * (np.sum(u.values**2, axis=1) - np.sum(ubar.values**2, axis=1))
    lin = np.sum(du * 0.5 * (gp[:-1] + gp[1:]), axis=1)
    return u.grid.dt * float(np.sum(quad + lin))
