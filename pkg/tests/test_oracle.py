from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from foliate import SpectralGap, ToyOracle
from foliate.oracle import integrate_reference
from foliate.timegrid import rk4_states

par = st.floats(-5.0, 5.0, allow_nan=False)


def test_rejects_bad_parameter():
    with pytest.raises(ValueError):
        ToyOracle(0.0)


@given(par)
def test_manifold_parametrisation_inverts(oracle, yt):
    x, y = oracle.exact_unstable_manifold(yt)
    assert oracle.inertial_x(y) == pytest.approx(x, abs=1e-14)


@given(par)
def test_manifold_is_image_of_axis(oracle, yt):
    w = oracle.inverse(oracle.exact_unstable_manifold(yt))
    assert abs(w[0]) < 1e-14 and w[1] == pytest.approx(yt, abs=1e-13)


def test_manifold_is_invariant(toy, oracle):
    z = rk4_states(toy, oracle.exact_unstable_manifold(0.3), 1e-3, 1500)[-1]
    assert abs(z[0] - oracle.inertial_x(z[1])) < 1e-10


@given(par, par)
def test_leaf_points_share_y_tilde(oracle, x, yt0):
    z1 = np.array([x, oracle.exact_stable_leaf(x, yt0)])
    z2 = oracle.exact_tracking_ic(yt0)
    w1, w2 = oracle.inverse(z1), oracle.inverse(z2)
    assert w1[1] == pytest.approx(w2[1], abs=1e-12)


@given(par, par, par)
def test_exact_graphs_obey_lipschitz_bound(oracle, a, b, yt0):
    gap = SpectralGap(-1.0, 1.0, 0.25, 0.0)
    bound = ToyOracle.graph_lipschitz(gap)
    if abs(a - b) < 1e-6:
        return
    leaf = abs(oracle.exact_stable_leaf(a, yt0) - oracle.exact_stable_leaf(b, yt0))
    man = abs(oracle.inertial_x(a) - oracle.inertial_x(b))
    assert leaf <= bound * abs(a - b) and man <= bound * abs(a - b)


@given(par, par)
def test_exponential_tracking_on_closed_form(toy, oracle, xt, yt):
    # |z(t, z0) - z(t, z0+)| <= e^{(alpha + delta) t} |z0 - z0+| with alpha + delta = -0.75
    t = np.linspace(0.0, 8.0, 81)
    za = oracle.transform(np.stack([xt * np.exp(-t), yt * np.exp(t)], axis=-1))
    zb = oracle.transform(np.stack([0 * t, yt * np.exp(t)], axis=-1))
    d = toy.norm(za - zb)
    if d[0] == 0:
        return
    assert np.all(d <= np.exp(-0.75 * t) * d[0] * (1 + 1e-12))


def test_reference_integrator(toy, oracle):
    w0 = np.array([0.5, 0.25])
    z = integrate_reference(toy, oracle.transform(w0), 1.0)
    assert np.allclose(z, oracle.transform([0.5 * math.exp(-1), 0.25 * math.e]), atol=1e-11)
