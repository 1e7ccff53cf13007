from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from foliate import (SpectralGap, StableSolveConfig, TimeGrid, TimeGridFunction,
                     count_multiplications, kse_galerkin, pwconst_schedule, solve_inertial_manifold,
                     solve_stable_leaf, solve_unstable_leaf, t_map_apply, u_map_apply)
from foliate.timegrid import zero_trajectory

ys = st.floats(-4.0, 4.0, allow_nan=False)


def _cfg(gap, method="SIMP", j=8, h=0.05, n=401):
    return StableSolveConfig(gap, method, h=h, n_points=n, j_iterations=j)


@pytest.mark.parametrize("method", ("PWCONST", "SIMP", "SIMPGS"))
def test_stable_and_unstable_paths_are_bitwise_dual(toy, toy_gap, method):
    # the unstable solver on the reversed system is the stable solver on the original
    z0 = np.array([0.7, -0.4])
    cfg = _cfg(toy_gap, method)
    s = solve_stable_leaf(toy, z0, [1.3], cfg)
    u = solve_unstable_leaf(toy.reversed(), toy.swap(z0), [1.3], cfg.reversed())
    assert np.array_equal(s.value, u.value)
    assert all(np.array_equal(a, b) for a, b in zip(s.iterates, u.iterates))
    assert np.array_equal(s.varphi.weighted, u.psi.weighted)


def test_galerkin_duality_bitwise():
    system = kse_galerkin(6, 20.0, dim_y=2, rho=2.0)
    gap = SpectralGap.for_system(system, 50.0)
    z0 = np.linspace(-0.3, 0.3, 6)
    cfg = StableSolveConfig(gap, "SIMP", h=1e-4, n_points=201, j_iterations=4)
    y = np.array([0.2, -0.1])
    u = solve_unstable_leaf(system, z0, y, cfg)
    s = solve_stable_leaf(system.reversed(), system.swap(z0), y, cfg.reversed())
    assert np.array_equal(u.value, s.value)


def test_map_application_dual(toy, toy_gap):
    rev = toy.reversed()
    grid = TimeGrid(0.05, 101)
    w = np.random.default_rng(4).normal(size=(101, 2))
    psi = TimeGridFunction(grid, w, -toy_gap.sigma, 1)
    a = u_map_apply(psi, [0.3], toy, toy_gap)
    b = t_map_apply(psi, [0.3], zero_trajectory(rev, grid), toy_gap.reversed())
    assert np.array_equal(a.weighted, b.weighted)


@settings(max_examples=20)
@given(y=ys)
def test_inertial_manifold_matches_closed_form(toy, toy_gap, oracle, y):
    res = solve_inertial_manifold(toy, [y], _cfg(toy_gap, j=15, h=0.02, n=1001))
    assert abs(res.value[0] - oracle.inertial_x(y)) < 1e-7


@settings(max_examples=15)
@given(y1=ys, y2=ys)
def test_unstable_graph_lipschitz(toy, toy_gap, y1, y2):
    if abs(y1 - y2) < 1e-6:
        return
    k = toy_gap.kappa
    bound = toy_gap.delta / (toy_gap.sigma - toy_gap.alpha) / (1 - k)
    r1 = solve_inertial_manifold(toy, [y1], _cfg(toy_gap))
    r2 = solve_inertial_manifold(toy, [y2], _cfg(toy_gap))
    for a, b in zip(r1.iterates, r2.iterates):
        assert abs(a[0] - b[0]) <= bound * abs(y1 - y2)


def test_pwconst_on_manifold_halves_error(toy, toy_gap, oracle):
    gap = SpectralGap(-1.0, 1.0, 0.25, 0.5)  # sigma > 0 here means decay after reversal
    cfg = StableSolveConfig(gap, "PWCONST", j_iterations=11, schedule=pwconst_schedule(11))
    res = solve_inertial_manifold(toy, [1.5], cfg)
    err = np.abs(np.array(res.iterates)[:, 0] - oracle.inertial_x(1.5))
    ratios = err[-4:] / err[-5:-1]
    assert np.all((ratios > 0.4) & (ratios < 0.6)), ratios


def test_multiplication_counts():
    assert count_multiplications(10, 16, 8) == (1_769_664, 787_776)
    assert count_multiplications(0, 4) == (0, 0)
    with pytest.raises(ValueError):
        count_multiplications(-1, 4)
