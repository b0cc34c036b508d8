"""Monotone descent by sample-and-hold synthesis of the exact-increment feedback.

At each sample node ``t_k`` the derivative of the baseline cost-to-go
``l o Phibar_{t,T}`` along every actuation direction ``h^j`` is probed by a
one-sided finite difference of radius ``epsilon``. The resulting feedback
value is held constant on ``[t_k, t_{k+1})`` while the state is advanced.
"""
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .cost import feedback_minimizer, total_cost
from .dynamics import (
    ControlTrajectory,
    DivergenceError,
    StatePath,
    integrate_forward,
    project_ball,
)
from .pmp import DescentReport

THREADS_ENV = "BANACH_OC_THREADS"


class ConfigurationError(ValueError):
    pass


@dataclass(frozen=True)
class MonotoneConfig:
    N: int = 32
    epsilon: float = None
    max_iters: int = 5
    tol_rel: float = 1e-8
    smooth_output: bool = False
    smooth_window: int = 21
    probes_per_subinterval: int = 1
    threads: int = None

    def __post_init__(self):
        if self.N < 1:
            raise ConfigurationError(f"N must be >= 1, got {self.N}")
        if self.epsilon is not None and not self.epsilon > 0:
            raise ConfigurationError(f"epsilon must be positive, got {self.epsilon}")
        if self.probes_per_subinterval < 1:
            raise ConfigurationError("probes_per_subinterval must be >= 1")

    @property
    def eps(self):
        # epsilon * N = 1 unless set explicitly
        return 1.0 / self.N if self.epsilon is None else self.epsilon

    def subinterval(self, grid):
        if grid.steps % self.N:
            raise ConfigurationError(f"{grid.steps} time steps are not divisible by N={self.N}")
        L = grid.steps // self.N
        if L % self.probes_per_subinterval:
            raise ConfigurationError(
                f"{L} steps per subinterval not divisible by {self.probes_per_subinterval} probes"
            )
        return L


@dataclass(frozen=True)
class ProbeResult:
    node: int
    xi: np.ndarray
    directions: tuple

    @property
    def gp(self):
        """Estimate of ``G(x)' Dp(x) = sum_j xi_j g^j``."""
        return sum(x * g for x, g in zip(self.xi, self.directions))


def _thread_count(threads):
    if threads is None:
        threads = int(os.environ.get(THREADS_ENV, "0") or 0)
    return max(int(threads), 0)


def _terminal_values(system, batch, ubar, node):
    end = integrate_forward(system, batch, ubar, node).final
    return np.atleast_1d(system.terminal_cost(end))


def probe_at_node(system, ubar, node, x, eps, threads=None):
    """One-sided probes ``[l(Phibar(x + eps h^j)) - l(Phibar(x))] / eps`` from node to T.

    The baseline and the perturbed states are stacked and advanced together;
    with ``threads > 1`` the stack is split across a thread pool. Each row is
    an independent computation, so the split does not change the result.
    """
    t = ubar.grid.time(node)
    chans = system.channels(t, x)
    batch = np.stack([x] + [x + eps * np.asarray(h) for _, h in chans])
    nthreads = _thread_count(threads)
    try:
        if nthreads > 1:
            chunks = np.array_split(np.arange(len(batch)), min(nthreads, len(batch)))
            with ThreadPoolExecutor(max_workers=len(chunks)) as pool:
                parts = list(pool.map(lambda idx: _terminal_values(system, batch[idx], ubar, node), chunks))
            values = np.concatenate(parts)
        else:
            values = _terminal_values(system, batch, ubar, node)
    except DivergenceError as err:
        for j, row in enumerate(batch):
            try:
                _terminal_values(system, row[None], ubar, node)
            except DivergenceError as inner:
                raise DivergenceError(inner.step, "baseline" if j == 0 else j - 1) from err
        raise
    xi = (values[1:] - values[0]) / eps
    return ProbeResult(node, xi, tuple(np.asarray(g, dtype=float) for g, _ in chans))


def probe_xi(system, ubar, k, x_k, cfg):
    """Probe at the k-th sample node of the partition into ``cfg.N`` subintervals."""
    L = cfg.subinterval(ubar.grid)
    if not 0 <= k <= cfg.N:
        raise IndexError(f"sample index {k} outside [0, {cfg.N}]")
    return probe_at_node(system, ubar, k * L, x_k, cfg.eps, cfg.threads)


def probe_path(system, ubar, x, eps, stride=1, threads=None):
    """Probe estimates of ``G(x_t)' Dp_t(x_t)`` along a full state path.

    Probes are taken at every ``stride``-th node (and at the last node) and
    linearly interpolated in time; returns shape ``(steps + 1, m)``.
    """
    grid = ubar.grid
    nodes = list(range(0, grid.steps + 1, stride))
    if nodes[-1] != grid.steps:
        nodes.append(grid.steps)
    gps = np.array([probe_at_node(system, ubar, i, x.at(i), eps, threads).gp for i in nodes])
    all_nodes = np.arange(grid.steps + 1)
    return np.stack([np.interp(all_nodes, nodes, gps[:, j]) for j in range(gps.shape[1])], axis=1)


def _hold_values(system, ubar, s0, L, x, cfg):
    p = cfg.probes_per_subinterval
    nodes = [s0 + j * (L // p) for j in range(p)]
    gps = np.array([probe_at_node(system, ubar, s, x, cfg.eps, cfg.threads).gp for s in nodes])
    if p == 1:
        return np.tile(feedback_minimizer(system, gps[0]), (L, 1)), 1
    # linear in t between probe times, constant after the last one
    fine = np.arange(s0, s0 + L)
    gp = np.stack([np.interp(fine, nodes, gps[:, j]) for j in range(gps.shape[1])], axis=1)
    return feedback_minimizer(system, gp), p


def monotone_descend(system, u0, cfg=None):
    cfg = cfg or MonotoneConfig()
    grid = u0.grid
    L = cfg.subinterval(grid)
    R = system.control_bound
    m = u0.dim

    t0 = time.perf_counter()
    ubar = ControlTrajectory(grid, project_ball(u0.values, R))
    xbar = integrate_forward(system, system.x0, ubar)
    cbar = total_cost(system, xbar, ubar)
    report = DescentReport("monotone", controls=[ubar], path=xbar)
    report._append(0, cbar, float("nan"), t0, 1)
    report.stop_reason = "max_iters reached"

    for it in range(1, cfg.max_iters + 1):
        t0 = time.perf_counter()
        values = np.zeros((grid.steps, m))
        cand = ControlTrajectory(grid, values)
        states = np.empty_like(xbar.states)
        states[0] = x = system.x0
        probes = 0
        for k in range(cfg.N):
            s0 = k * L
            values[s0 : s0 + L], n_probes = _hold_values(system, ubar, s0, L, x, cfg)
            probes += n_probes
            seg = integrate_forward(system, x, cand, s0, s0 + L)
            states[s0 + 1 : s0 + L + 1] = seg.states[1:]
            x = seg.final
        path = StatePath(grid, states)
        c = total_cost(system, path, cand)
        if not c.total < cbar.total:
            report.stop_reason = "candidate did not decrease the cost; baseline kept"
            break
        decrease = cbar.total - c.total
        ubar, xbar, cbar = cand, path, c
        report.controls.append(ubar)
        report.path = xbar
        # one probe batch is m + 1 forward solves to T
        report._append(it, cbar, cfg.eps, t0, probes * (m + 1))
        if decrease <= cfg.tol_rel * abs(report.records[-2].total):
            report.stop_reason = "relative decrease below tolerance"
            break

    if cfg.smooth_output:
        us = smooth_control(report.control, cfg.smooth_window, R)
        report.smoothed_control = us
        report.smoothed_cost = total_cost(system, integrate_forward(system, system.x0, us), us)
    return report


def smooth_control(u, window, R=np.inf):
    """Centered moving average per channel; the window is truncated at the ends."""
    steps = u.grid.steps
    if window < 1 or window % 2 == 0 or window > steps:
        raise ValueError(f"window must be odd and in [1, {steps}], got {window}")
    if window == 1:
        return ControlTrajectory(u.grid, project_ball(u.values.copy(), R))
    kernel = np.ones(window)
    counts = np.convolve(np.ones(steps), kernel, mode="same")
    out = np.stack([np.convolve(col, kernel, mode="same") / counts for col in u.values.T], axis=1)
    return ControlTrajectory(u.grid, project_ball(out, R))
