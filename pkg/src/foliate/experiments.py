"""Reproduction runs shared by the command line tool, the tests and the demos.

Every run returns an :class:`ExperimentOutput`: named tables of numbers plus a
summary dictionary.  Galerkin states are given as sine amplitudes ``b_1..b_n``
and converted to the ``[x, y]`` state internally.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .accel import aitken_sequence
from .errors import DivergenceError
from .model import (SpectralGap, SplitSystem, kse_aif, kse_galerkin, modes_to_state,
                    state_to_modes, toy_system, toy_transform)
from .oracle import ToyOracle, kse_reference_point
from .stable import StableSolveConfig, pwconst_schedule, solve_stable_leaf
from .tracking import (TrackingConfig, leaf_equivalence_experiment, log_difference,
                       projected_ic, rate_sweep, solve_tracking, stable_leaf_points,
                       tracking_rate)
from .unstable import solve_inertial_manifold


@dataclass
class Table:
    columns: list[str]
    rows: list[list[float]]

    def column(self, name: str) -> np.ndarray:
        k = self.columns.index(name)
        return np.array([r[k] for r in self.rows], dtype=float)


@dataclass
class ExperimentOutput:
    tables: dict[str, Table]
    summary: dict = field(default_factory=dict)


def build_model(kind: str, p: float = 10.0, n_modes: int = 16, gamma: float = 32.0,
                dim_y: int = 8, rho: float | None = None, band: int = 12) -> SplitSystem:
    if kind == "toy":
        return toy_system(p)
    if kind == "kse":
        return kse_galerkin(n_modes, gamma, dim_y=dim_y, rho=rho)
    if kind == "aif":
        return kse_aif(gamma, dim_y=dim_y, rho=rho, band=band)
    raise ValueError(f"unknown model kind {kind!r}")


def _grid_points(t_end: float, h: float) -> int:
    return int(round(t_end / h)) + 1


# ---------------------------------------------------------------------------
# test problem


def toy_stable_leaf(p: float = 10.0, x_tilde: float = 3.0, base_tilde=(1.0, 1.0),
                    delta: float = 0.25, sigma: float = 0.0, h: float = 0.25,
                    t_end: float = 20.0, j_iterations: int = 7, pwconst_iterations: int = 12,
                    pwconst_h0: float = 1.0, pwconst_n0: int = 1,
                    initial: str = "exponential") -> ExperimentOutput:
    """Stable leaf of the toy system through ``T(base_tilde)`` at ``x = T(x_tilde, y~0)_x``.

    Compares SIMP and SIMPGS against the closed form, then runs PWCONST on
    the refinement schedule together with its Aitken sequence.  ``initial``
    is the first guess of the Simpson runs (``'constant'`` needs ``sigma >= 0``).
    """
    system, oracle = toy_system(p), ToyOracle(p)
    z0 = toy_transform(np.asarray(base_tilde, dtype=float), p)
    yt0 = float(base_tilde[1])
    x = float(toy_transform([x_tilde, yt0], p)[0])
    exact = oracle.exact_stable_leaf(x, yt0)
    gap = SpectralGap(-1.0, 1.0, delta, sigma)
    n = _grid_points(t_end, h)
    res = {m: solve_stable_leaf(system, z0, [x],
                                StableSolveConfig(gap, m, h=h, n_points=n,
                                                  j_iterations=j_iterations, initial=initial))
           for m in ("SIMP", "SIMPGS")}
    rows = []
    for j in range(j_iterations):
        vs, vg = res["SIMP"].iterates[j][0], res["SIMPGS"].iterates[j][0]
        rows.append([j + 1, abs(vs - exact), abs(vg - exact), vs, vg])
    simp = Table(["j", "err_simp", "err_simpgs", "value_simp", "value_simpgs"], rows)

    tables = {"simp": simp}
    if pwconst_iterations > 0:
        sched = pwconst_schedule(pwconst_iterations, pwconst_h0, pwconst_n0)
        cfg = StableSolveConfig(gap, "PWCONST", j_iterations=pwconst_iterations, schedule=sched)
        r = solve_stable_leaf(system, z0, [x], cfg)
        seq = [r.initial] + r.iterates
        acc = aitken_sequence(seq)
        prow = []
        for j, (v, a) in enumerate(zip(seq, acc)):
            hj, nj = sched[j - 1] if j else (float("nan"), 0)
            prow.append([j, hj, nj, abs(v[0] - exact), abs(a[0] - exact) if a is not None else math.nan])
        tables["pwconst_aitken"] = Table(["j", "h_j", "n_j", "err_pwconst", "err_aitken"], prow)
    summary = {"x": x, "exact_y": exact, "t_end": (n - 1) * h,
               "saturation_simp": rows[-1][1], "saturation_simpgs": rows[-1][2]}
    return ExperimentOutput(tables, summary)


def toy_tracking(p: float = 10.0, base_tilde=(1.0, 1.0), start=(3.0, 3.0), delta: float = 0.25,
                 sigma: float = 0.0, h: float = 0.01, t_end: float = 20.0, method: str = "SIMP",
                 j_iterations: int = 15, j_sweep: int = 6, update: str = "seidel",
                 max_outer: int = 30, outer_tol: float = 1e-13) -> ExperimentOutput:
    """Tracking initial condition of ``T(base_tilde)`` against the closed form."""
    system, oracle = toy_system(p), ToyOracle(p)
    z0 = toy_transform(np.asarray(base_tilde, dtype=float), p)
    exact = oracle.exact_tracking_ic(float(base_tilde[1]))
    gap = SpectralGap(-1.0, 1.0, delta, sigma)
    leaf = StableSolveConfig(gap, method, h=h, n_points=_grid_points(t_end, h))

    def run(j):
        cfg = TrackingConfig(leaf, leaf, j1=j, j2=j, max_outer=max_outer, outer_tol=outer_tol,
                             update=update, start=start)
        return solve_tracking(system, z0, cfg)

    main = run(j_iterations)
    outer = Table(["i", "err", "x", "y", "residual"],
                  [[i, float(np.linalg.norm(z - exact)), z[0], z[1],
                    main.residuals[i - 1] if i else math.nan]
                   for i, z in enumerate(main.outer_history)])
    by_j = []
    for j in range(1, j_sweep + 1):
        r = run(j)
        by_j.append([j, float(np.linalg.norm(r.z_plus - exact)), r.apriori_error, r.c_constant,
                     r.n_outer])
    summary = {"exact": exact.tolist(), "z_plus": main.z_plus.tolist(),
               "final_error": float(np.linalg.norm(main.z_plus - exact)),
               "kappa": gap.kappa, "c_constant": main.c_constant,
               "apriori_error": main.apriori_error}
    return ExperimentOutput({"outer": outer,
                             "by_j": Table(["j", "err", "apriori", "c", "n_outer"], by_j)},
                            summary)


# ---------------------------------------------------------------------------
# Galerkin systems


def kse_inertial_pwconst_aitken(n_modes: int = 16, gamma: float = 32.0, dim_y: int = 8,
                                rho: float | None = 15.0, delta: float = 2000.0,
                                j_iterations: int = 13, h0: float = 1.5e-4, n0: int = 4,
                                ref_modes=(1.0, -0.5, 0.3, 0.2),
                                ref_time: float = 0.01) -> ExperimentOutput:
    """PWCONST and vector-Aitken errors for ``Psi(y)`` at a point of the attractor."""
    system = kse_galerkin(n_modes, gamma, dim_y=dim_y, rho=rho)
    z_ref = kse_reference_point(system, ref_modes, ref_time)
    x_ref, y = system.split(z_ref)
    gap = SpectralGap.for_system(system, delta)
    cfg = StableSolveConfig(gap, "PWCONST", j_iterations=j_iterations,
                            schedule=pwconst_schedule(j_iterations, h0, n0))
    r = solve_inertial_manifold(system, y, cfg)
    seq = [r.initial] + r.iterates
    acc = aitken_sequence(seq)
    rows = [[j, float(np.linalg.norm(v - x_ref)),
             float(np.linalg.norm(a - x_ref)) if a is not None else math.nan]
            for j, (v, a) in enumerate(zip(seq, acc))]
    summary = {"alpha": gap.alpha, "beta": gap.beta, "sigma": gap.sigma, "kappa": gap.kappa,
               "x_ref_norm": float(np.linalg.norm(x_ref)), "y_ref_norm": float(np.linalg.norm(y))}
    return ExperimentOutput({"errors": Table(["j", "err_pwconst", "err_aitken"], rows)}, summary)


def kse_inertial_simp_gapsweep(n_modes: int = 16, gamma: float = 32.0, dims=tuple(range(1, 9)),
                               rho: float | None = 15.0, delta: float = 10.0, h: float = 1e-6,
                               n_points: int = 100001, max_iterations: int = 150,
                               tol: float = 1e-7, ref_modes=(1e-6,),
                               ref_time: float = 0.55) -> ExperimentOutput:
    """SIMP on the inertial manifold for every splitting ``dim Y`` in ``dims``.

    The reference point is the equilibrium reached from a tiny first mode; it
    lies on the inertial manifold of every splitting.  Splittings that break
    the gap condition are run anyway (``check=False``).
    """
    full = kse_galerkin(n_modes, gamma, dim_y=n_modes // 2, rho=rho)
    b_ref = state_to_modes(kse_reference_point(full, ref_modes, ref_time, atol=1e-20),
                           full.dim_y)
    summary_rows, hist_rows = [], []
    for dy in dims:
        system = kse_galerkin(n_modes, gamma, dim_y=int(dy), rho=rho)
        x_ref, y = system.split(modes_to_state(b_ref, int(dy)))
        gap = SpectralGap.for_system(system, delta, check=False)
        cfg = StableSolveConfig(gap, "SIMP", h=h, n_points=n_points, j_iterations=max_iterations)
        errs: list[float] = []

        def stop(j, value):
            errs.append(float(np.linalg.norm(value - x_ref)))
            return errs[-1] <= tol

        status = 0
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            try:
                solve_inertial_manifold(system, y, cfg, stop=stop)
            except DivergenceError:
                status = 2
        hit = next((j + 1 for j, e in enumerate(errs) if e <= tol), -1)
        if status == 0 and hit < 0:
            status = 1
        summary_rows.append([dy, gap.alpha, gap.beta, hit, errs[-1] if errs else math.nan, status])
        hist_rows.extend([dy, j + 1, e] for j, e in enumerate(errs))
    tables = {"summary": Table(["dim_y", "alpha", "beta", "iterations", "final_err", "status"],
                               summary_rows),
              "history": Table(["dim_y", "j", "err"], hist_rows)}
    return ExperimentOutput(tables, {"tol": tol, "reference_norm": float(np.linalg.norm(b_ref)),
                                     "status_codes": "0 converged, 1 not within budget, 2 diverged"})


def _aif_tracking_config(gap: SpectralGap, h: float, unstable_t_end: float, j: int,
                         max_outer: int, outer_tol: float) -> TrackingConfig:
    ss = StableSolveConfig(gap, "SIMP", h=h)
    su = StableSolveConfig(gap, "SIMP", h=h, n_points=_grid_points(unstable_t_end, h))
    return TrackingConfig(ss, su, j1=j, j2=j, max_outer=max_outer, outer_tol=outer_tol)


def aif_leaf_equivalence(gamma: float = 25.0, dim_y: int = 2, rho: float | None = None,
                         band: int = 12, delta: float = 29.9, h: float = 1e-3,
                         j_iterations: int = 6, z1_modes=(0.0, 0.02, 0.01),
                         z2_modes=(0.0, -0.02, 0.01), x_offsets=(0.05, 0.1, -0.05),
                         horizon: float = 5.0, rk_step: float = 1e-3) -> ExperimentOutput:
    """Leaf-mates of two nearby points on opposite sides of a separatrix.

    Each of ``z1`` and ``z2`` gets points on its computed stable leaf at the
    given X offsets; every bundle must share its base point's fate.
    """
    system = kse_aif(gamma, dim_y=dim_y, rho=rho, band=band)
    gap = SpectralGap.for_system(system, delta)
    cfg = StableSolveConfig(gap, "SIMP", h=h, j_iterations=j_iterations)
    final_rows, sep_rows, summary = [], [], {}
    for label, modes in (("z1", z1_modes), ("z2", z2_modes)):
        z = modes_to_state(np.asarray(modes, dtype=float), dim_y)
        x, _ = system.split(z)
        mates = stable_leaf_points(system, z, [x + off for off in x_offsets], cfg)
        pts = np.vstack([z, mates])
        bundle = leaf_equivalence_experiment(system, pts, horizon, rk_step)
        fate = state_to_modes(bundle.trajectories[:, -1], dim_y)
        for k, (p0, b) in enumerate(zip(pts, fate)):
            final_rows.append([0 if label == "z1" else 1, k, *state_to_modes(p0, dim_y), *b,
                               bundle.final_distances[0, k]])
        stride = max(1, len(bundle.times) // 200)
        for i in range(0, len(bundle.times), stride):
            sep_rows.append([0 if label == "z1" else 1, bundle.times[i], *bundle.separation[1:, i]])
        summary[f"{label}_max_final_distance"] = float(np.max(bundle.final_distances[0]))
    n = 3
    cols = (["bundle", "point"] + [f"b{i}_0" for i in range(1, n + 1)]
            + [f"b{i}_T" for i in range(1, n + 1)] + ["dist_to_base_T"])
    sep_cols = ["bundle", "t"] + [f"sep_{k + 1}" for k in range(len(x_offsets))]
    summary["kappa"] = gap.kappa
    return ExperimentOutput({"final": Table(cols, final_rows),
                             "separation": Table(sep_cols, sep_rows)}, summary)


_RATE_MODELS = {
    # kind -> (model kwargs, cutoff, delta, leaf step, unstable tail, window, ball radius)
    "aif": (dict(kind="aif", gamma=25.0, dim_y=2), None, 29.9, 1e-3, 1.0, 0.1, 0.4),
    "kse8": (dict(kind="kse", n_modes=8, gamma=32.0, dim_y=4), 1.0, 290.0, 2e-5, 0.05, 0.008, 0.5),
}


def rate_defaults(model: str) -> dict:
    """Calibrated settings of the two rate-comparison models.

    ``rho`` is the cutoff radius of the prepared nonlinearity; ``0`` in a
    caller's override means no cutoff.
    """
    if model not in _RATE_MODELS:
        raise ValueError(f"unknown rate model {model!r}; choose from {sorted(_RATE_MODELS)}")
    _, rho, delta, h, tail, window, radius = _RATE_MODELS[model]
    return dict(rho=rho, delta=delta, h=h, unstable_t_end=tail, window=window,
                ball_radius=radius)


def _rate_setup(model, delta, h, unstable_t_end, j_iterations, max_outer, outer_tol, rho):
    kw = dict(_RATE_MODELS[model][0])
    rho = rate_defaults(model)["rho"] if rho is None else (rho if rho > 0 else None)
    system = build_model(rho=rho, **kw)
    gap = SpectralGap.for_system(system, delta)
    return system, _aif_tracking_config(gap, h, unstable_t_end, j_iterations, max_outer, outer_tol)


def rate_compare(model: str = "aif", z0_modes=(0.12, 0.5, 0.5), rho: float | None = None,
                 delta: float | None = None, h: float | None = None,
                 unstable_t_end: float | None = None, j_iterations: int = 6,
                 max_outer: int = 60, outer_tol: float = 1e-10, window: float | None = None,
                 rk_step: float | None = None) -> ExperimentOutput:
    """Log-difference curves of the tracking and the projected initial condition."""
    d = rate_defaults(model)
    delta = d["delta"] if delta is None else delta
    h = d["h"] if h is None else h
    unstable_t_end = d["unstable_t_end"] if unstable_t_end is None else unstable_t_end
    window = d["window"] if window is None else window
    rk_step = window / 1000.0 if rk_step is None else rk_step
    system, cfg = _rate_setup(model, delta, h, unstable_t_end, j_iterations, max_outer,
                              outer_tol, rho)
    b = np.zeros(system.dim)
    b[: len(z0_modes)] = z0_modes
    z0 = modes_to_state(b, system.dim_y)
    res = solve_tracking(system, z0, cfg)
    zt = projected_ic(system, z0)
    t, ld_plus = log_difference(system, z0, res.z_plus, window, rk_step)
    _, ld_proj = log_difference(system, z0, zt, window, rk_step)
    s_plus = tracking_rate(system, z0, res.z_plus, window, window, rk_step)
    s_proj = tracking_rate(system, z0, zt, window, window, rk_step)
    gap = cfg.gap
    summary = {"z0_modes": state_to_modes(z0, system.dim_y).tolist(),
               "z_plus_modes": state_to_modes(res.z_plus, system.dim_y).tolist(),
               "projected_modes": state_to_modes(zt, system.dim_y).tolist(),
               "slope_tracking": s_plus, "slope_projected": s_proj,
               "gap": [gap.alpha, gap.beta], "n_outer": res.n_outer}
    return ExperimentOutput({"log_difference": Table(["t", "ln_diff_tracking", "ln_diff_projected"],
                                                     [list(r) for r in zip(t, ld_plus, ld_proj)])},
                            summary)


def rate_sweep_experiment(model: str = "aif", n_samples: int = 200, seed: int = 0,
                          rho: float | None = None, delta: float | None = None,
                          h: float | None = None, unstable_t_end: float | None = None,
                          j_iterations: int = 6, max_outer: int = 60, outer_tol: float = 1e-10,
                          window: float | None = None, ball_radius: float | None = None,
                          rk_step: float | None = None, workers: int = 1) -> ExperimentOutput:
    """Slopes of both initial conditions for ICs drawn uniformly in a ball."""
    d = rate_defaults(model)
    delta = d["delta"] if delta is None else delta
    h = d["h"] if h is None else h
    unstable_t_end = d["unstable_t_end"] if unstable_t_end is None else unstable_t_end
    window = d["window"] if window is None else window
    ball_radius = d["ball_radius"] if ball_radius is None else ball_radius
    rk_step = window / 1000.0 if rk_step is None else rk_step
    system, cfg = _rate_setup(model, delta, h, unstable_t_end, j_iterations, max_outer,
                              outer_tol, rho)
    res = rate_sweep(system, n_samples, ball_radius, cfg, seed, window, rk_step, workers)
    rows = []
    for i in range(n_samples):
        rows.append([i, *res.ics[i], *res.table[i], 0 if i not in res.failures else 1])
    cols = (["sample"] + [f"z{k}" for k in range(system.dim)]
            + ["slope_tracking", "slope_projected", "failed"])
    ok = np.all(np.isfinite(res.table), axis=1)
    gap = cfg.gap
    mid = 0.5 * (gap.alpha + gap.beta)
    med = np.median(res.table[ok], axis=0) if np.any(ok) else np.array([math.nan, math.nan])
    summary = {"gap": [gap.alpha, gap.beta], "gap_midpoint": mid,
               "n_failed": res.n_failed, "failures": {str(k): v for k, v in res.failures.items()},
               "ordered_fraction": res.ordered_fraction(),
               "median_tracking": float(med[0]), "median_projected": float(med[1])}
    return ExperimentOutput({"slopes": Table(cols, rows)}, summary)


EXPERIMENTS = {
    "toy-stable-leaf": toy_stable_leaf,
    "toy-tracking": toy_tracking,
    "kse-inertial-pwconst-aitken": kse_inertial_pwconst_aitken,
    "kse-inertial-simp-gapsweep": kse_inertial_simp_gapsweep,
    "aif-leaf-equivalence": aif_leaf_equivalence,
    "rate-compare": rate_compare,
    "rate-sweep": rate_sweep_experiment,
}
