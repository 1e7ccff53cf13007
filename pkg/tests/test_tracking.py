from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from foliate import (GapConditionError, IterationLimitError, SpectralGap, SplitSystem,
                     StableSolveConfig, TrackingConfig, cone_classify, rate_sweep, sigma_step,
                     solve_tracking, tracking_rate)
from foliate.timegrid import rk4_states
from foliate.tracking import apriori_bound, c_constant, projected_ic, stable_leaf_points

yt_s = st.floats(-2.0, 2.0, allow_nan=False)


def _tcfg(gap, j=8, h=0.05, n=401, **kw):
    leaf = StableSolveConfig(gap, "SIMP", h=h, n_points=n)
    return TrackingConfig(leaf, leaf, j1=j, j2=j, **kw)


def test_config_requires_strong_gap():
    weak = SpectralGap(-1.0, 1.0, 0.6)
    leaf = StableSolveConfig(weak, "SIMP", h=0.1, n_points=11)
    with pytest.raises(GapConditionError):
        TrackingConfig(leaf, leaf)


def test_linear_system_one_step():
    lin = SplitSystem([-2.0], [1.0], lambda z: np.zeros_like(z))
    gap = SpectralGap(-2.0, 1.0, 0.0, -0.5)
    res = solve_tracking(lin, np.array([0.8, 0.3]), _tcfg(gap, j=1, outer_tol=0.0, max_outer=3))
    assert np.array_equal(res.outer_history[1], [0.0, 0.3])
    assert np.array_equal(res.z_plus, [0.0, 0.3])


@settings(max_examples=8)
@given(xt=st.floats(-3, 3), yt=yt_s)
def test_tracking_point_matches_closed_form(toy, toy_gap, oracle, xt, yt):
    z0 = oracle.transform([xt, yt])
    res = solve_tracking(toy, z0, _tcfg(toy_gap, j=10, h=0.02, n=1001, update="seidel",
                                        outer_tol=1e-12))
    assert np.linalg.norm(res.z_plus - oracle.exact_tracking_ic(yt)) < 1e-7


@pytest.mark.parametrize("j", [1, 2, 3, 4])
def test_apriori_error_bound(toy, toy_gap, oracle, toy_base_point, j):
    res = solve_tracking(toy, toy_base_point, _tcfg(toy_gap, j=j, h=0.02, n=1001))
    err = np.linalg.norm(res.z_plus - oracle.exact_tracking_ic(1.0))
    assert err <= res.apriori_error + 1e-8


def test_constant_pairing():
    assert c_constant(0.5, 3, 5, 1.0, 1.0) == pytest.approx(1.0)
    assert c_constant(0.5, 5, 3, 4.0, 1.0) == pytest.approx(4.0)
    assert c_constant(0.5, 3, 5, 4.0, 1.0) == pytest.approx(1.0)
    assert apriori_bound(0.5, 3, 1.0) == np.inf
    assert apriori_bound(0.25, 2, 1.0) == pytest.approx(0.125)


def test_outer_residuals_contract(toy, toy_gap, toy_base_point):
    k = toy_gap.kappa
    res = solve_tracking(toy, toy_base_point, _tcfg(toy_gap, start=(3.0, 3.0), outer_tol=1e-11))
    r = np.array(res.residuals)
    live = r[:-1] > 1e-10
    assert np.all(r[1:][live] <= (k / (1 - k) + 0.1) * r[:-1][live])


def test_fixed_point_of_sigma(toy, toy_gap, toy_base_point):
    cfg = _tcfg(toy_gap, outer_tol=1e-13)
    res = solve_tracking(toy, toy_base_point, cfg)
    assert np.linalg.norm(sigma_step(toy, res.z_plus, toy_base_point, cfg) - res.z_plus) < 1e-12


def test_iteration_limit(toy, toy_gap, toy_base_point):
    with pytest.raises(IterationLimitError) as info:
        solve_tracking(toy, toy_base_point, _tcfg(toy_gap, max_outer=1, start=(3.0, 3.0)))
    assert len(info.value.history) == 1


@settings(max_examples=6)
@given(xt=st.floats(-3, 3), yt=yt_s)
def test_exponential_tracking_inequality(toy, toy_gap, oracle, xt, yt):
    z0 = oracle.transform([xt, yt])
    res = solve_tracking(toy, z0, _tcfg(toy_gap, j=10, h=0.02, n=1001, update="seidel"))
    n, h = 600, 0.01
    d = toy.norm(rk4_states(toy, z0, h, n) - rk4_states(toy, res.z_plus, h, n))
    t = h * np.arange(n + 1)
    rate = toy_gap.alpha + toy_gap.delta
    assert np.all(d <= np.exp(rate * t) * d[0] * (1 + 1e-6) + 1e-9)


def test_tracking_beats_projection(toy, toy_gap, oracle):
    z0 = oracle.transform([1.5, 0.4])
    res = solve_tracking(toy, z0, _tcfg(toy_gap))
    s_t = tracking_rate(toy, z0, res.z_plus, 3.0)
    s_p = tracking_rate(toy, z0, projected_ic(toy, z0), 3.0)
    assert s_t < -0.75 < s_p
    assert s_t == pytest.approx(-1.0, abs=0.05)


def test_cone_classes(toy, toy_gap, oracle, toy_base_point):
    leaf_cfg = StableSolveConfig(toy_gap, "SIMP", h=0.02, n_points=1001, j_iterations=10)
    mate = stable_leaf_points(toy, toy_base_point, [[2.0]], leaf_cfg)[0]
    fwd = cone_classify(toy, toy_base_point, mate, 5.0)
    assert fwd.kind == "u-dominant"
    m1, m2 = oracle.exact_unstable_manifold(0.2), oracle.exact_unstable_manifold(0.5)
    assert cone_classify(toy, m1, m2, 3.0).kind == "v-dominant"
    back = cone_classify(toy, m1, m2, -3.0)
    assert back.kind == "v-dominant"
    a = oracle.transform([2.0, 0.001])
    b = oracle.transform([0.0, 0.0])
    cross = cone_classify(toy, a, b, 10.0)
    assert cross.kind == "crossing" and cross.violations == 0
    lo, hi = cross.t0_bracket
    assert 0 < lo < hi < 10


def test_rate_sweep_deterministic(toy, toy_gap):
    cfg = _tcfg(toy_gap, j=6)
    a = rate_sweep(toy, 6, 1.0, cfg, rng_seed=11, window=2.0, workers=1)
    b = rate_sweep(toy, 6, 1.0, cfg, rng_seed=11, window=2.0, workers=3)
    assert np.array_equal(a.ics, b.ics)
    assert np.array_equal(a.table, b.table)
    assert a.n_failed == 0 and a.ordered_fraction() == 1.0
