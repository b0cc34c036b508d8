"""PMP-based descent: forward sweep, backward adjoint sweep, convex-combination update.

The trade-off ``eta`` is found by backtracking from ``eta0`` at every
iteration; a candidate is accepted as soon as it does not increase the cost.
"""
import time
from dataclasses import dataclass, field

import numpy as np

from .cost import adjoint_channel_mean, total_cost
from .dynamics import ControlTrajectory, integrate_adjoint, integrate_forward, project_ball


class UnsupportedConfigurationError(ValueError):
    pass


@dataclass(frozen=True)
class PmpConfig:
    max_iters: int = 40
    eta0: float = 0.5
    backtrack_factor: float = 0.5
    eta_min: float = 1e-6
    tol_rel: float = 1e-8

    def __post_init__(self):
        if not 0 < self.eta0 < 1:
            raise ValueError(f"eta0 must lie in (0, 1), got {self.eta0}")
        if not 0 < self.backtrack_factor < 1:
            raise ValueError(f"backtrack_factor must lie in (0, 1), got {self.backtrack_factor}")
        if not self.eta_min > 0:
            raise ValueError(f"eta_min must be positive, got {self.eta_min}")
        if self.max_iters < 0:
            raise ValueError(f"max_iters must be non-negative, got {self.max_iters}")


@dataclass
class IterationRecord:
    iteration: int
    total: float
    terminal: float
    energy: float
    step: float = float("nan")
    wall_ms: float = 0.0
    forward_solves: int = 0


@dataclass
class DescentReport:
    """Accepted iterates of a descent run; ``records[0]`` describes the initial guess."""

    method: str
    records: list = field(default_factory=list)
    controls: list = field(default_factory=list)
    path: object = None
    stop_reason: str = ""
    smoothed_control: object = None
    smoothed_cost: object = None

    @property
    def control(self):
        return self.controls[-1]

    @property
    def costs(self):
        return np.array([r.total for r in self.records])

    @property
    def iterations(self):
        return len(self.records) - 1

    def is_monotone(self, slack=1e-10):
        c = self.costs
        return bool(np.all(np.diff(c) <= slack))

    def _append(self, it, cost, step, t0, solves):
        self.records.append(
            IterationRecord(
                iteration=it,
                total=cost.total,
                terminal=cost.terminal,
                energy=cost.energy,
                step=step,
                wall_ms=1e3 * (time.perf_counter() - t0),
                forward_solves=solves,
            )
        )


def _evaluate(system, u):
    x = integrate_forward(system, system.x0, u)
    return x, total_cost(system, x, u)


def pmp_descend(system, u0, cfg=None):
    cfg = cfg or PmpConfig()
    alpha = system.energy_weight
    if not alpha > 0:
        raise UnsupportedConfigurationError("PMP descent divides by alpha; alpha must be positive")
    R = system.control_bound

    t0 = time.perf_counter()
    ubar = ControlTrajectory(u0.grid, project_ball(u0.values, R))
    xbar, cbar = _evaluate(system, ubar)
    report = DescentReport("pmp", controls=[ubar], path=xbar)
    report._append(0, cbar, float("nan"), t0, 1)

    for it in range(1, cfg.max_iters + 1):
        t0 = time.perf_counter()
        psi = integrate_adjoint(system, xbar, ubar)
        w = -adjoint_channel_mean(system, xbar, psi) / alpha
        eta = cfg.eta0
        solves = 0
        while True:
            cand = ControlTrajectory(ubar.grid, project_ball((1.0 - eta) * ubar.values + eta * w, R))
            x, c = _evaluate(system, cand)
            solves += 1
            if c.total <= cbar.total:
                break
            eta *= cfg.backtrack_factor
            if eta < cfg.eta_min:
                report.stop_reason = "step collapsed below eta_min"
                return report
        decrease = cbar.total - c.total
        ubar, xbar, cbar = cand, x, c
        report.controls.append(ubar)
        report.path = xbar
        report._append(it, cbar, eta, t0, solves)
        if decrease <= cfg.tol_rel * abs(report.records[-2].total):
            report.stop_reason = "relative decrease below tolerance"
            return report
    report.stop_reason = "max_iters reached"
    return report


def pmp_residual(system, u):
    """Extremality defect ``max_t |u_t - Proj_R(-G(x_t)' psi_t / alpha)|``."""
    alpha = system.energy_weight
    if not alpha > 0:
        raise UnsupportedConfigurationError("PMP residual needs alpha > 0")
    x = integrate_forward(system, system.x0, u)
    psi = integrate_adjoint(system, x, u)
    best = project_ball(-adjoint_channel_mean(system, x, psi) / alpha, system.control_bound)
    return float(np.max(np.linalg.norm(u.values - best, axis=1)))
