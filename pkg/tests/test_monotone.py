import numpy as np
import pytest

from banach_oc.dynamics import ControlTrajectory, DivergenceError, TimeGrid, integrate_forward
from banach_oc.monotone import (
    ConfigurationError,
    MonotoneConfig,
    monotone_descend,
    probe_at_node,
    probe_xi,
    smooth_control,
)
from banach_oc.spectral import CircleGrid
from banach_oc.systems import AmariParams, AmariSystem, LqToyParams, LqToySystem, lq_optimum

from conftest import cost_of


class FlatCost(LqToySystem):
    def terminal_cost(self, x):
        return np.zeros(np.shape(x)[:-1]) + 3.0


class Explosive(LqToySystem):
    def drift(self, t, x):
        with np.errstate(over="ignore", invalid="ignore"):
            return np.where(x > 1.0, x**4, 0.0)


def lq_single_sweep_oracle(alpha, target, N, eps):
    # baseline u = 0: the flow is the identity, xi = x_k - target + eps/2
    x, energy, dt = 0.0, 0.0, 1.0 / N
    for _ in range(N):
        u = -(x - target + eps / 2) / alpha
        energy += 0.5 * alpha * u * u * dt
        x += u * dt
    return 0.5 * (x - target) ** 2 + energy


def test_config_checks():
    with pytest.raises(ConfigurationError):
        MonotoneConfig(N=0)
    with pytest.raises(ConfigurationError):
        MonotoneConfig(epsilon=0.0)
    assert MonotoneConfig(N=16).eps == 1 / 16
    with pytest.raises(ConfigurationError):
        MonotoneConfig(N=32).subinterval(TimeGrid(3.0, 600))


def test_probe_flat_cost_is_zero():
    s = FlatCost()
    g = TimeGrid(1.0, 16)
    res = probe_at_node(s, ControlTrajectory.zeros(g, 1), 4, np.array([0.2]), 0.1)
    assert np.all(res.xi == 0)


def test_probe_lq_closed_form(rng):
    p = LqToyParams(alpha=1.0, target=1.0)
    s = LqToySystem(p)
    g = TimeGrid(1.0, 32)
    ubar = ControlTrajectory(g, rng.standard_normal((32, 1)))
    cfg = MonotoneConfig(N=8, epsilon=1 / 16)
    x_k = np.array([0.37])
    res = probe_xi(s, ubar, 3, x_k, cfg)
    xT = x_k[0] + g.dt * ubar.values[12:, 0].sum()
    assert res.xi[0] == pytest.approx((xT - 1.0) + cfg.eps / 2, abs=1e-13)


def test_probe_error_first_order_in_eps():
    s = LqToySystem(LqToyParams(alpha=1.0))
    g = TimeGrid(1.0, 64)
    ubar = ControlTrajectory.constant(g, 0.2)
    x = np.array([0.1])
    exact = x[0] + 0.2 * 1.0 - 1.0
    errs = [abs(probe_at_node(s, ubar, 0, x, e).xi[0] - exact) for e in (1 / 16, 1 / 32, 1 / 64)]
    slopes = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    assert np.allclose(slopes, 1.0, atol=1e-6)


def test_amari_probe_matches_directional_derivative(rng):
    s = AmariSystem(grid=CircleGrid(64))
    g = TimeGrid(3.0, 96)
    ubar = ControlTrajectory(g, 0.3 * rng.standard_normal((96, 7)))
    node = 24
    x = integrate_forward(s, s.x0, ubar, 0, node).final

    def p_bar(y):
        return s.terminal_cost(integrate_forward(s, y, ubar, node).final)

    h = 1e-4
    oracle = np.array([(p_bar(x + h * phi) - p_bar(x - h * phi)) / (2 * h) for phi in s.basis])
    e1 = np.abs(probe_at_node(s, ubar, node, x, 1 / 32).xi - oracle)
    e2 = np.abs(probe_at_node(s, ubar, node, x, 1 / 64).xi - oracle)
    assert np.max(e1) <= 1 / 32
    # first order: halving eps roughly halves the error
    big = e1 > 1e-6
    assert np.all((e1[big] / e2[big] > 1.7) & (e1[big] / e2[big] < 2.3))


def test_probe_threads_do_not_change_result(rng, monkeypatch):
    s = AmariSystem(grid=CircleGrid(32))
    g = TimeGrid(3.0, 60)
    ubar = ControlTrajectory(g, rng.standard_normal((60, 7)))
    x = rng.standard_normal(32)
    base = probe_at_node(s, ubar, 10, x, 0.05, threads=0).xi
    assert np.array_equal(base, probe_at_node(s, ubar, 10, x, 0.05, threads=3).xi)
    monkeypatch.setenv("BANACH_OC_THREADS", "4")
    assert np.array_equal(base, probe_at_node(s, ubar, 10, x, 0.05).xi)


def test_probe_divergence_names_channel():
    s = Explosive()
    g = TimeGrid(1.0, 50)
    with pytest.raises(DivergenceError) as err:
        probe_at_node(s, ControlTrajectory.zeros(g, 1), 0, np.array([0.999]), 1.0)
    assert err.value.channel == 0


def test_lq_from_optimum_keeps_baseline():
    p = LqToyParams(alpha=1.0)
    s = LqToySystem(p)
    g = TimeGrid(1.0, 64)
    c_star, j_star = lq_optimum(p)
    rep = monotone_descend(s, ControlTrajectory.constant(g, c_star), MonotoneConfig(N=16))
    assert rep.iterations == 0
    assert np.array_equal(rep.control.values, np.full((64, 1), c_star))
    assert rep.costs[-1] == pytest.approx(j_star, abs=1e-3)


def test_lq_single_sweep_matches_recursion():
    p = LqToyParams(alpha=1.0)
    s = LqToySystem(p)
    g = TimeGrid(1.0, 64)
    rep = monotone_descend(s, ControlTrajectory.zeros(g, 1), MonotoneConfig(N=16, epsilon=1 / 16, max_iters=1))
    assert rep.iterations == 1
    assert rep.costs[-1] == pytest.approx(lq_single_sweep_oracle(1.0, 1.0, 16, 1 / 16), rel=1e-12)
    assert rep.costs[-1] < rep.costs[0]


def test_lq_iterations_approach_optimum():
    p = LqToyParams(alpha=1.0)
    s = LqToySystem(p)
    g = TimeGrid(1.0, 64)
    _, j_star = lq_optimum(p)
    rep = monotone_descend(s, ControlTrajectory.zeros(g, 1), MonotoneConfig(N=16, epsilon=1 / 16, max_iters=30))
    assert rep.is_monotone(1e-10)
    assert abs(rep.costs[-1] - j_star) <= 5e-3


@pytest.mark.parametrize("R, alpha", [(1e3, 0.1), (0.5, 0.1), (1.0, 0.0)])
def test_amari_monotone_and_admissible(R, alpha):
    s = AmariSystem(AmariParams(R=R, alpha=alpha), CircleGrid(32))
    g = TimeGrid(3.0, 96)
    rep = monotone_descend(s, ControlTrajectory.zeros(g, 7), MonotoneConfig(N=16, max_iters=3))
    assert rep.is_monotone(1e-10)
    for u in rep.controls:
        assert u.is_admissible(R)
    for rec, u in zip(rep.records, rep.controls):
        assert abs(rec.total - cost_of(s, u)) <= 1e-12


def test_multiple_probes_per_subinterval():
    s = AmariSystem(grid=CircleGrid(32))
    g = TimeGrid(3.0, 96)
    cfg = MonotoneConfig(N=16, max_iters=1, probes_per_subinterval=3)
    rep = monotone_descend(s, ControlTrajectory.zeros(g, 7), cfg)
    assert rep.iterations == 1 and rep.costs[1] < rep.costs[0]
    with pytest.raises(ConfigurationError):
        MonotoneConfig(N=16, probes_per_subinterval=4).subinterval(g)


def test_smoothing_reported_separately():
    s = AmariSystem(grid=CircleGrid(32))
    g = TimeGrid(3.0, 96)
    rep = monotone_descend(s, ControlTrajectory.zeros(g, 7), MonotoneConfig(N=16, max_iters=1, smooth_output=True, smooth_window=5))
    assert rep.smoothed_control is not None
    assert rep.smoothed_cost.total == pytest.approx(cost_of(s, rep.smoothed_control), abs=1e-14)
    assert not np.array_equal(rep.smoothed_control.values, rep.control.values)


def test_smooth_control_examples(rng):
    g = TimeGrid(1.0, 10)
    u = ControlTrajectory(g, rng.standard_normal((10, 2)))
    assert np.array_equal(smooth_control(u, 1).values, u.values)
    const = ControlTrajectory.constant(g, [0.4, -1.2])
    assert np.allclose(smooth_control(const, 5).values, const.values, atol=1e-15)
    c = 3.0
    step = ControlTrajectory(g, np.r_[np.zeros(5), np.full(5, c)][:, None])
    sm = smooth_control(step, 3).values[:, 0]
    assert sm[4] == pytest.approx(c / 3) and sm[5] == pytest.approx(2 * c / 3)
    assert 0.5 * (sm[4] + sm[5]) == pytest.approx(c / 2)
    for bad in (0, 2, 11):
        with pytest.raises(ValueError):
            smooth_control(u, bad)


def test_smooth_control_projects():
    g = TimeGrid(1.0, 6)
    u = ControlTrajectory.constant(g, [3.0, 4.0])
    assert np.allclose(smooth_control(u, 3, R=1.0).values, [[0.6, 0.8]] * 6)


def test_lq_small_alpha_reaches_optimum():
    p = LqToyParams(alpha=0.1)
    s = LqToySystem(p)
    c_star, j_star = lq_optimum(p)
    rep = monotone_descend(
        s, ControlTrajectory.zeros(TimeGrid(1.0, 64), 1), MonotoneConfig(N=32, epsilon=1e-7, max_iters=400, tol_rel=0.0)
    )
    assert np.max(np.abs(rep.control.values - c_star)) <= 1e-3
    assert rep.costs[-1] == pytest.approx(j_star, rel=1e-6)
