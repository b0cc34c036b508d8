"""Control-affine systems ``x' = f_t(x) + G_t(x) u`` with finite-rank actuation.

Two instances are provided: the Amari neural field on the circle, actuated
through a truncated Fourier basis, and a scalar linear-quadratic toy whose
optimum is known in closed form.

States may carry leading batch axes; every method maps over them.
"""
import abc
import math
from dataclasses import dataclass

import numpy as np

from .spectral import (
    TWO_PI,
    CircleGrid,
    GridMismatchError,
    circular_convolution,
    convolution_operator,
    fourier_basis,
    quadrature,
)

SIGMA_EXP_CLAMP = 500.0


class ControlAffineSystem(abc.ABC):
    """Dynamics ``f_t(x) + sum_j <u, g^j_t(x)> h^j_t(x)`` with terminal cost ``l(x)``.

    Subclasses set ``control_dim``, ``control_bound``, ``energy_weight``
    and ``x0``.
    """

    control_dim: int
    control_bound: float
    energy_weight: float
    x0: np.ndarray

    @abc.abstractmethod
    def drift(self, t, x):
        ...

    @abc.abstractmethod
    def control_apply(self, t, x, u):
        """``G_t(x) u``."""

    @abc.abstractmethod
    def control_adjoint(self, t, x, p):
        """``G_t(x)' p`` as a vector in the control space."""

    @abc.abstractmethod
    def channels(self, t, x):
        """Pairs ``(g^j, h^j)`` with ``G_t(x) u = sum_j <u, g^j> h^j``."""

    @abc.abstractmethod
    def drift_jacobian_adjoint(self, t, x, p):
        """``Df_t(x)' p``."""

    def control_jacobian_adjoint(self, t, x, u, p):
        """``(D_x [G_t(x) u])' p``; zero for state-independent actuation."""
        return np.zeros_like(p)

    @abc.abstractmethod
    def terminal_cost(self, x):
        ...

    @abc.abstractmethod
    def terminal_cost_gradient(self, x):
        ...

    @abc.abstractmethod
    def inner(self, a, b):
        ...

    def rhs(self, t, x, u):
        return self.drift(t, x) + self.control_apply(t, x, u)


# -- neural field helpers ---------------------------------------------------


def bessel_i0(kappa):
    """Modified Bessel function ``I_0`` from its power series ``sum (k/2)^{2j} / (j!)^2``."""
    kappa = float(kappa)
    if kappa < 0 or not math.isfinite(kappa):
        raise ValueError(f"bessel_i0 requires a finite kappa >= 0, got {kappa}")
    q = 0.25 * kappa * kappa
    total = term = 1.0
    j = 0
    while term > 1e-17 * total:
        j += 1
        term *= q / (j * j)
        total += term
    return total


def vonmises_kernel(kappa, grid):
    """``W(d) = exp(kappa cos d) / (2 pi I_0(kappa))`` sampled at the grid nodes."""
    return np.exp(kappa * np.cos(grid.theta)) / (TWO_PI * bessel_i0(kappa))


def sigma(q, beta, vartheta):
    z = np.clip(-beta * (np.asarray(q, dtype=float) - vartheta), -SIGMA_EXP_CLAMP, SIGMA_EXP_CLAMP)
    return 1.0 / (1.0 + np.exp(z))


def sigma_prime(q, beta, vartheta):
    s = sigma(q, beta, vartheta)
    return beta * s * (1.0 - s)


@dataclass(frozen=True)
class AmariParams:
    gamma: float = 1.0
    beta: float = 2.0
    vartheta: float = 0.5
    kappa: float = 4.0
    K: int = 3
    A_d: float = 0.8
    kappa_d: float = 6.0
    theta_star: float = math.pi / 3
    alpha: float = 0.1
    R: float = 1e3

    def __post_init__(self):
        for name in ("gamma", "beta", "kappa", "kappa_d", "A_d", "R"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive, got {getattr(self, name)}")
        if self.alpha < 0:
            raise ValueError(f"alpha must be non-negative, got {self.alpha}")
        if self.K < 0:
            raise ValueError(f"K must be non-negative, got {self.K}")


def _check_same_grid(a, b):
    if np.shape(a)[-1] != np.shape(b)[-1]:
        raise GridMismatchError(f"grid sizes differ: {np.shape(a)[-1]} vs {np.shape(b)[-1]}")


def amari_drift(x, params, W):
    """``-gamma x + W * sigma(x)``."""
    _check_same_grid(x, W)
    return -params.gamma * x + circular_convolution(W, sigma(x, params.beta, params.vartheta))


def amari_drift_jacobian_adjoint(x, p, params, W):
    """``-gamma p + sigma'(x) (W * p)``; uses that the kernel is even."""
    _check_same_grid(x, W)
    _check_same_grid(p, W)
    return -params.gamma * p + sigma_prime(x, params.beta, params.vartheta) * circular_convolution(W, p)


def target_profile(params, grid):
    """Bump ``A_d exp(kappa_d cos(theta - theta*)) / (2 pi I_0(kappa_d))``."""
    return (
        params.A_d
        * np.exp(params.kappa_d * np.cos(grid.theta - params.theta_star))
        / (TWO_PI * bessel_i0(params.kappa_d))
    )


def amari_terminal_cost(x, params, target=None):
    if target is None:
        target = target_profile(params, CircleGrid(np.shape(x)[-1]))
    _check_same_grid(x, target)
    return 0.5 * quadrature((x - target) ** 2)


def amari_terminal_cost_gradient(x, params, target=None):
    if target is None:
        target = target_profile(params, CircleGrid(np.shape(x)[-1]))
    _check_same_grid(x, target)
    return x - target


class AmariSystem(ControlAffineSystem):
    """Neural field ``dN/dt = -gamma N + W * sigma(N) + sum_j u_j phi_j`` on the circle.

    The state space carries the L2 pairing realized by grid quadrature, so
    gradients are Riesz representers with respect to that pairing.
    ``drift_enabled=False`` switches off ``f`` (a test hook).
    """

    def __init__(self, params=None, grid=None, x0=None, drift_enabled=True):
        self.params = params or AmariParams()
        self.grid = grid or CircleGrid()
        self.kernel = vonmises_kernel(self.params.kappa, self.grid)
        self._convolve = convolution_operator(self.kernel)
        self.basis = fourier_basis(self.grid, self.params.K)
        self.target = target_profile(self.params, self.grid)
        self.drift_enabled = drift_enabled
        self.control_dim = self.basis.shape[0]
        self.control_bound = float(self.params.R)
        self.energy_weight = float(self.params.alpha)
        self.x0 = np.zeros(self.grid.n) if x0 is None else np.array(x0, dtype=float)
        _check_same_grid(self.x0, self.kernel)

    def drift(self, t, x):
        if not self.drift_enabled:
            return np.zeros_like(x)
        p = self.params
        return -p.gamma * x + self._convolve(sigma(x, p.beta, p.vartheta))

    def control_apply(self, t, x, u):
        return np.asarray(u) @ self.basis

    def control_adjoint(self, t, x, p):
        return (np.asarray(p) @ self.basis.T) * self.grid.dtheta

    def channels(self, t, x):
        eye = np.eye(self.control_dim)
        return [(eye[j], self.basis[j]) for j in range(self.control_dim)]

    def drift_jacobian_adjoint(self, t, x, p):
        if not self.drift_enabled:
            return np.zeros_like(p)
        q = self.params
        return -q.gamma * p + sigma_prime(x, q.beta, q.vartheta) * self._convolve(p)

    def terminal_cost(self, x):
        return amari_terminal_cost(x, self.params, self.target)

    def terminal_cost_gradient(self, x):
        return amari_terminal_cost_gradient(x, self.params, self.target)

    def inner(self, a, b):
        return quadrature(np.asarray(a) * np.asarray(b))


# -- scalar linear-quadratic oracle -----------------------------------------


@dataclass(frozen=True)
class LqToyParams:
    alpha: float = 1.0
    target: float = 1.0
    horizon: float = 1.0
    R: float = 1e3

    def __post_init__(self):
        if not self.alpha > 0:
            raise ValueError(f"alpha must be positive, got {self.alpha}")
        if not self.horizon > 0:
            raise ValueError(f"horizon must be positive, got {self.horizon}")


class LqToySystem(ControlAffineSystem):
    """``x' = u``, ``x_0 = 0``, ``l(x) = (x - target)^2 / 2``; states have shape ``(..., 1)``."""

    control_dim = 1

    def __init__(self, params=None):
        self.params = params or LqToyParams()
        self.control_bound = float(self.params.R)
        self.energy_weight = float(self.params.alpha)
        self.x0 = np.zeros(1)

    def drift(self, t, x):
        return np.zeros_like(x)

    def control_apply(self, t, x, u):
        return np.zeros_like(x) + np.asarray(u, dtype=float)

    def control_adjoint(self, t, x, p):
        return np.array(p, dtype=float)

    def channels(self, t, x):
        return [(np.ones(1), np.ones(1))]

    def drift_jacobian_adjoint(self, t, x, p):
        return np.zeros_like(p)

    def terminal_cost(self, x):
        return 0.5 * (np.asarray(x)[..., 0] - self.params.target) ** 2

    def terminal_cost_gradient(self, x):
        return np.asarray(x, dtype=float) - self.params.target

    def inner(self, a, b):
        return np.sum(np.asarray(a) * np.asarray(b), axis=-1)


def lq_toy_system(params):
    return LqToySystem(params)


def lq_optimum(params):
    """Optimal constant control and optimal cost of the LQ toy.

    Minimizes ``(cT - target)^2 / 2 + alpha c^2 T / 2`` over ``c``; the adjoint
    is constant in time, so the unconstrained optimum is a constant control.
    """
    T, a, y = params.horizon, params.alpha, params.target
    c = y / (T + a)
    return c, 0.5 * (c * T - y) ** 2 + 0.5 * a * c * c * T
