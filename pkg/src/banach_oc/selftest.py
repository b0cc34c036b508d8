"""Fast invariant checks run by ``banach-oc selftest``."""
import numpy as np

from .cost import cost_gradient, directional_derivative, increment, total_cost
from .dynamics import ControlTrajectory, TimeGrid, integrate_adjoint, integrate_forward
from .spectral import CircleGrid, circular_convolution, fourier_basis, quadrature
from .systems import AmariSystem, LqToyParams, LqToySystem, lq_optimum, vonmises_kernel


class _Decay(LqToySystem):
    # x' = -x + u with the toy's cost
    def drift(self, t, x):
        return -x

    def drift_jacobian_adjoint(self, t, x, p):
        return -p


def _check_quadrature(rng):
    grid = CircleGrid(8)
    return abs(quadrature(np.cos(grid.theta) ** 2) - np.pi) < 1e-12


def _check_convolution(rng):
    grid = CircleGrid(64)
    w = vonmises_kernel(4.0, grid)
    y = rng.standard_normal(grid.n)
    idx = (np.arange(grid.n)[:, None] - np.arange(grid.n)[None, :]) % grid.n
    direct = grid.dtheta * (w[idx] @ y)
    return np.max(np.abs(circular_convolution(w, y) - direct)) <= 1e-10 * np.max(np.abs(direct))


def _check_basis(rng):
    grid = CircleGrid(64)
    B = fourier_basis(grid, 3)
    return np.allclose(grid.dtheta * B @ B.T, np.eye(7), atol=1e-12)


def _check_adjoint_pairing(rng):
    s = AmariSystem(grid=CircleGrid(64))
    for _ in range(20):
        x, p = rng.standard_normal((2, 64))
        u = rng.standard_normal(7)
        lhs = s.inner(p, s.control_apply(0.0, x, u))
        rhs = u @ s.control_adjoint(0.0, x, p)
        if abs(lhs - rhs) > 1e-10 * max(1.0, abs(lhs)):
            return False
    return True


def _check_rk4_order(rng):
    s = _Decay()
    errs = []
    for steps in (100, 200, 400):
        g = TimeGrid(3.0, steps)
        xT = integrate_forward(s, np.ones(1), ControlTrajectory.zeros(g, 1)).final[0]
        errs.append(abs(xT - np.exp(-3.0)))
    slopes = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    return bool(np.all(slopes >= 3.9))


def _check_flow_composition(rng):
    s = AmariSystem(grid=CircleGrid(32))
    g = TimeGrid(3.0, 60)
    u = ControlTrajectory(g, rng.standard_normal((60, 7)))
    full = integrate_forward(s, s.x0, u)
    a = integrate_forward(s, s.x0, u, 0, 25)
    b = integrate_forward(s, a.final, u, 25, 60)
    return np.array_equal(full.final, b.final)


def _check_lq_gradient(rng):
    s = LqToySystem(LqToyParams(alpha=0.5))
    g = TimeGrid(1.0, 50)
    u = ControlTrajectory(g, rng.standard_normal((50, 1)))
    du = ControlTrajectory(g, rng.standard_normal((50, 1)))
    x = integrate_forward(s, s.x0, u)
    grad = cost_gradient(s, x, u, integrate_adjoint(s, x, u))

    def cost(v):
        return total_cost(s, integrate_forward(s, s.x0, v), v).total

    eta = 1e-5
    fd = (cost(ControlTrajectory(g, u.values + eta * du.values)) - cost(ControlTrajectory(g, u.values - eta * du.values))) / (2 * eta)
    return abs(fd - directional_derivative(grad, du)) <= 1e-6 * max(1.0, abs(fd))


def _check_lq_increment(rng):
    p = LqToyParams(alpha=1.0)
    s = LqToySystem(p)
    g = TimeGrid(1.0, 40)
    ubar = ControlTrajectory(g, rng.standard_normal((40, 1)))
    u = ControlTrajectory(g, rng.standard_normal((40, 1)))
    x = integrate_forward(s, s.x0, u)
    tail = np.concatenate([np.cumsum(ubar.values[::-1, 0])[::-1] * g.dt, [0.0]])
    gp = (x.states[:, 0] + tail - p.target)[:, None]
    exact = total_cost(s, x, u).total - total_cost(s, integrate_forward(s, s.x0, ubar), ubar).total
    return abs(increment(s, ubar, u, gp) - exact) <= 1e-10


def _check_lq_optimum(rng):
    p = LqToyParams(alpha=1.0)
    c, best = lq_optimum(p)
    return abs(c - 0.5) < 1e-15 and abs(best - 0.25) < 1e-15


CHECKS = [
    ("quadrature exact on cos^2", _check_quadrature),
    ("spectral convolution matches direct sum", _check_convolution),
    ("Fourier basis orthonormal", _check_basis),
    ("control adjoint pairing", _check_adjoint_pairing),
    ("RK4 fourth-order convergence", _check_rk4_order),
    ("flow composition", _check_flow_composition),
    ("adjoint gradient on LQ toy", _check_lq_gradient),
    ("exact increment on LQ toy", _check_lq_increment),
    ("LQ closed form", _check_lq_optimum),
]


def run_selftest(seed=0, echo=print):
    rng = np.random.default_rng(seed)
    ok = True
    for name, check in CHECKS:
        passed = bool(check(rng))
        ok &= passed
        echo(f"{'PASS' if passed else 'FAIL'}  {name}")
    return ok
