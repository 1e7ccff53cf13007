"""Exponential-tracking initial conditions and tracking-rate diagnostics.

The tracking initial condition of ``z0`` is the point where the stable leaf
through ``z0`` meets the inertial manifold.  It is the fixed point of

    Sigma(x, y) = (Psi(y), Phi_z0(x))

where ``x = Psi(y)`` is the inertial manifold and ``y = Phi_z0(x)`` the
stable leaf, each evaluated with a fixed number of inner sweeps.
"""

from __future__ import annotations

import math
import os
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .errors import DivergenceError, FoliateError, IterationLimitError
from .model import SpectralGap, SplitSystem, sample_ball
from .stable import (StableLeafResult, StableSolveConfig, _resolve_grid, base_trajectory_for,
                     solve_stable_leaf)
from .timegrid import BaseTrajectory, rk4_states

UPDATES = ("jacobi", "seidel")


@dataclass(frozen=True)
class TrackingConfig:
    """Settings of the outer fixed-point iteration.

    ``stable`` and ``unstable`` configure the two leaf solvers; their
    ``j_iterations`` are overridden by ``j2`` and ``j1``.  ``update='seidel'``
    feeds the fresh ``x = Psi(y)`` straight into ``Phi`` within one step.
    ``start`` is the first outer iterate (``None`` means ``z0``) and
    ``unstable_base`` names the unstable leaf (``None`` is the origin, i.e.
    the inertial manifold).
    """

    stable: StableSolveConfig
    unstable: StableSolveConfig
    j1: int = 6
    j2: int = 6
    max_outer: int = 30
    outer_tol: float = 1e-12
    update: str = "jacobi"
    start: tuple[float, ...] | None = None
    unstable_base: tuple[float, ...] | None = None

    def __post_init__(self):
        self.stable.gap.require_tracking()
        self.unstable.gap.require_tracking()
        if self.j1 < 1 or self.j2 < 1:
            raise ValueError("inner iteration counts must be positive")
        if self.max_outer < 1:
            raise ValueError("max_outer must be positive")
        if not self.outer_tol >= 0:
            raise ValueError("outer_tol must be non-negative")
        if self.update not in UPDATES:
            raise ValueError(f"update must be one of {UPDATES}, got {self.update!r}")
        for name in ("start", "unstable_base"):
            v = getattr(self, name)
            if v is not None:
                object.__setattr__(self, name, tuple(float(c) for c in np.ravel(v)))

    @property
    def gap(self) -> SpectralGap:
        return self.stable.gap

    @property
    def j(self) -> int:
        return min(self.j1, self.j2)


@dataclass(eq=False)
class TrackingResult:
    z_plus: np.ndarray
    outer_history: list[np.ndarray]
    residuals: list[float]
    c_constant: float
    apriori_error: float
    kappa: float
    stable_leaf: StableLeafResult | None = None
    unstable_leaf: StableLeafResult | None = None

    @property
    def n_outer(self) -> int:
        return len(self.outer_history) - 1


class _LeafCache:
    """One base trajectory per side, reused while its tail is long enough.

    The tail length depends on the offset from the base point, which changes
    every outer step; a longer cached tail still meets the bound.
    """

    def __init__(self, system: SplitSystem, z0, cfg: TrackingConfig):
        self.system = system
        self.rev = system.reversed()
        self.z0 = np.asarray(z0, dtype=float)
        zb = np.zeros(system.dim) if cfg.unstable_base is None else np.asarray(cfg.unstable_base)
        self.zu = zb
        self._stable: BaseTrajectory | None = None
        self._unstable: BaseTrajectory | None = None

    @staticmethod
    def _fits(base: BaseTrajectory | None, grid) -> bool:
        return base is not None and base.grid.h == grid.h and base.grid.n >= grid.n

    def stable(self, cfg: StableSolveConfig, x_norm: float) -> BaseTrajectory:
        grid = _resolve_grid(cfg, max(x_norm, 1e-300))
        if not self._fits(self._stable, grid):
            self._stable = base_trajectory_for(self.system, self.z0, grid)
        return self._stable

    def unstable(self, cfg: StableSolveConfig, y_norm: float) -> BaseTrajectory:
        grid = _resolve_grid(cfg.reversed(), max(y_norm, 1e-300))
        if not self._fits(self._unstable, grid):
            self._unstable = base_trajectory_for(self.rev, self.system.swap(self.zu), grid)
        return self._unstable


def _psi(system, cache: _LeafCache, y, cfg: TrackingConfig) -> StableLeafResult:
    ucfg = replace(cfg.unstable, j_iterations=cfg.j1).reversed()
    _, yb = system.split(cache.zu)
    y_norm = float(np.linalg.norm(np.atleast_1d(y) - yb))
    base = cache.unstable(cfg.unstable, y_norm) if y_norm > 0 else None
    try:
        return solve_stable_leaf(cache.rev, system.swap(cache.zu), y, ucfg, base=base)
    except DivergenceError as exc:
        raise DivergenceError(f"unstable leaf: {exc}", iteration=exc.iteration, index=exc.index,
                              side="unstable") from exc


def _phi(system, cache: _LeafCache, x, cfg: TrackingConfig) -> StableLeafResult:
    scfg = replace(cfg.stable, j_iterations=cfg.j2)
    x0, _ = system.split(cache.z0)
    x_norm = float(np.linalg.norm(np.atleast_1d(x) - x0))
    base = cache.stable(scfg, x_norm) if x_norm > 0 else None
    try:
        return solve_stable_leaf(system, cache.z0, x, scfg, base=base)
    except DivergenceError as exc:
        raise DivergenceError(f"stable leaf: {exc}", iteration=exc.iteration, index=exc.index,
                              side="stable") from exc


def _step(system, z, cache, cfg):
    x, y = system.split(np.asarray(z, dtype=float))
    ures = _psi(system, cache, y, cfg)
    x_new = ures.value
    sres = _phi(system, cache, x_new if cfg.update == "seidel" else x, cfg)
    return system.join(x_new, sres.value), sres, ures


def sigma_step(system: SplitSystem, z, z0, cfg: TrackingConfig) -> np.ndarray:
    """One application of ``Sigma`` for the stable leaf through ``z0``."""
    return _step(system, z, _LeafCache(system, z0, cfg), cfg)[0]


def c_constant(kappa: float, j1: int, j2: int, phi_first: float, psi_first: float) -> float:
    """``max(kappa^(j2-j) |phi^1-phi^0|, kappa^(j1-j) |psi^1-psi^0|)`` with ``j = min(j1, j2)``.

    ``Phi`` runs ``j2`` sweeps, so its first-sweep size carries the ``j2`` power.
    """
    j = min(j1, j2)
    return max(kappa ** (j2 - j) * phi_first, kappa ** (j1 - j) * psi_first)


def apriori_bound(kappa: float, j: int, c: float) -> float:
    if not kappa < 0.5:
        return math.inf
    return c * kappa**j / (1.0 - 2.0 * kappa)


def solve_tracking(system: SplitSystem, z0, cfg: TrackingConfig) -> TrackingResult:
    """Iterate ``Sigma`` until successive iterates differ by at most ``outer_tol``."""
    z0 = np.asarray(z0, dtype=float)
    cache = _LeafCache(system, z0, cfg)
    z = z0.copy() if cfg.start is None else np.asarray(cfg.start, dtype=float)
    history, residuals = [z.copy()], []
    sres = ures = None
    converged = False
    for _ in range(cfg.max_outer):
        z_new, sres, ures = _step(system, z, cache, cfg)
        residuals.append(float(np.linalg.norm(z_new - z)))
        history.append(z_new.copy())
        z = z_new
        if residuals[-1] <= cfg.outer_tol:
            converged = True
            break
    if not converged:
        raise IterationLimitError(
            f"outer iteration did not reach {cfg.outer_tol:g} in {cfg.max_outer} steps "
            f"(last residual {residuals[-1]:.3e})", history=residuals,
        )
    kappa = cfg.gap.kappa
    phi_first = sres.sigma_norm_history[0] if sres.sigma_norm_history else 0.0
    psi_first = ures.sigma_norm_history[0] if ures.sigma_norm_history else 0.0
    c = c_constant(kappa, cfg.j1, cfg.j2, phi_first, psi_first)
    return TrackingResult(z.copy(), history, residuals, c, apriori_bound(kappa, cfg.j, c),
                          kappa, sres, ures)


def projected_ic(system: SplitSystem, z0) -> np.ndarray:
    """``(0, y0)``: the linear projection onto the unstable eigenspace."""
    _, y0 = system.split(np.asarray(z0, dtype=float))
    return system.join(np.zeros(system.dim_x), y0)


# ---------------------------------------------------------------------------
# rates


def _default_step(span: float) -> float:
    return abs(span) / 2000.0


def log_difference(system: SplitSystem, z0, z_ref, horizon: float, h: float | None = None):
    """Times and ``ln |z(t, z0) - z(t, z_ref)|`` along an RK4 run of length ``horizon``."""
    h = _default_step(horizon) if h is None else h
    n = max(1, int(math.ceil(abs(horizon) / h - 1e-9)))
    step = math.copysign(abs(horizon) / n, horizon)
    za = rk4_states(system, z0, step, n)
    zb = rk4_states(system, z_ref, step, n)
    d = np.linalg.norm(za - zb, axis=1)
    with np.errstate(divide="ignore"):
        return step * np.arange(n + 1), np.log(d)


def tracking_rate(system: SplitSystem, z0, z_ref, horizon: float, window: float | None = None,
                  h: float | None = None) -> float:
    """Least-squares slope of ``ln |z(t, z0) - z(t, z_ref)|`` over ``[0, window]``.

    If the difference underflows to zero the window stops at the last finite
    logarithm (with a warning); fewer than two usable nodes give ``nan``.
    """
    window = horizon if window is None else window
    if window > horizon:
        raise ValueError("window longer than the integration horizon")
    t, logd = log_difference(system, z0, z_ref, horizon, h)
    keep = t <= window * (1 + 1e-12)
    t, logd = t[keep], logd[keep]
    bad = ~np.isfinite(logd)
    if np.any(bad):
        last = int(np.argmax(bad))
        warnings.warn(f"difference vanished at t={t[last]:g}; window truncated",
                      RuntimeWarning, stacklevel=2)
        t, logd = t[:last], logd[:last]
    if t.size < 2:
        return float("nan")
    return float(np.polyfit(t, logd, 1)[0])


@dataclass(eq=False)
class RateSweepResult:
    """``table[i] = (slope_tracking, slope_projected)``; failed rows hold ``nan``."""

    ics: np.ndarray
    table: np.ndarray
    z_plus: np.ndarray
    failures: dict[int, str] = field(default_factory=dict)

    @property
    def n_failed(self) -> int:
        return len(self.failures)

    def ordered_fraction(self) -> float:
        ok = np.all(np.isfinite(self.table), axis=1)
        if not np.any(ok):
            return float("nan")
        return float(np.mean(self.table[ok, 0] < self.table[ok, 1]))


def rate_sweep(system: SplitSystem, n_samples: int, ball_radius: float, cfg: TrackingConfig,
               rng_seed: int, window: float, h: float | None = None,
               workers: int | None = None) -> RateSweepResult:
    """Tracking-IC versus projected-IC slopes for ICs drawn uniformly in a ball.

    The ICs are drawn up front from ``rng_seed`` so results do not depend on
    scheduling; rows are merged in sample order.
    """
    if n_samples < 1:
        raise ValueError("need at least one sample")
    rng = np.random.default_rng(rng_seed)
    ics = sample_ball(rng, n_samples, ball_radius, system.dim_x, system.dim_y)

    def one(i):
        z0 = ics[i]
        zp = solve_tracking(system, z0, cfg).z_plus
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            s_t = tracking_rate(system, z0, zp, window, window, h)
            s_p = tracking_rate(system, z0, projected_ic(system, z0), window, window, h)
        return zp, (s_t, s_p)

    table = np.full((n_samples, 2), np.nan)
    zplus = np.full((n_samples, system.dim), np.nan)
    failures: dict[int, str] = {}
    workers = workers or min(4, os.cpu_count() or 1)
    with ThreadPoolExecutor(max_workers=workers) as pool:
        futures = [pool.submit(one, i) for i in range(n_samples)]
        for i, fut in enumerate(futures):
            try:
                zp, row = fut.result()
            except (FoliateError, FloatingPointError, np.linalg.LinAlgError) as exc:
                failures[i] = f"{type(exc).__name__}: {exc}"
                continue
            zplus[i] = zp
            table[i] = row
    return RateSweepResult(ics, table, zplus, failures)


# ---------------------------------------------------------------------------
# cone invariance and leaf equivalence


@dataclass(eq=False)
class ConeClassification:
    """``kind`` is ``'u-dominant'``, ``'v-dominant'`` or ``'crossing'``.

    For a crossing, ``t0_bracket`` encloses the first time ``|v| >= |u|``.
    ``violations`` counts later nodes that switch back, which the trichotomy
    rules out up to round-off.
    """

    kind: str
    t0_bracket: tuple[float, float] | None
    times: np.ndarray
    u_norm: np.ndarray
    v_norm: np.ndarray
    violations: int = 0


def cone_classify(system: SplitSystem, z1, z2, horizon: float,
                  h: float | None = None) -> ConeClassification:
    """Compare ``|x(t,z1) - x(t,z2)|`` with ``|y(t,z1) - y(t,z2)|`` along RK4 runs.

    A negative ``horizon`` integrates backward in time.
    """
    z1, z2 = np.asarray(z1, dtype=float), np.asarray(z2, dtype=float)
    if np.array_equal(z1, z2):
        raise ValueError("the two points must differ")
    h = _default_step(horizon) if h is None else h
    n = max(1, int(math.ceil(abs(horizon) / h - 1e-9)))
    step = math.copysign(abs(horizon) / n, horizon)
    diff = rk4_states(system, z1, step, n) - rk4_states(system, z2, step, n)
    u = np.linalg.norm(diff[:, : system.dim_x], axis=1)
    v = np.linalg.norm(diff[:, system.dim_x:], axis=1)
    t = step * np.arange(n + 1)
    above = v > u
    if np.all(above):
        return ConeClassification("v-dominant", None, t, u, v)
    if not np.any(above):
        return ConeClassification("u-dominant", None, t, u, v)
    if above[0]:
        # starts v-dominant and later drops below; report the switch count
        return ConeClassification("v-dominant", None, t, u, v, int(np.sum(~above)))
    k = int(np.argmax(above))
    return ConeClassification("crossing", (float(t[k - 1]), float(t[k])), t, u, v,
                              int(np.sum(~above[k:])))


def stable_leaf_points(system: SplitSystem, z0, xs: Sequence, cfg: StableSolveConfig) -> np.ndarray:
    """Points ``(x, Phi_z0(x))`` of the computed stable leaf through ``z0``."""
    pts = []
    for x in xs:
        x = np.atleast_1d(np.asarray(x, dtype=float))
        pts.append(system.join(x, solve_stable_leaf(system, z0, x, cfg).value))
    return np.array(pts)


@dataclass(eq=False)
class LeafBundle:
    times: np.ndarray
    trajectories: np.ndarray  # (points, nodes, dim)
    final_distances: np.ndarray  # pairwise, at the last node
    separation: np.ndarray  # (points, nodes): distance to the first trajectory


def leaf_equivalence_experiment(system: SplitSystem, z_list, horizon: float,
                                h: float | None = None) -> LeafBundle:
    """Integrate every point and measure how the bundle collapses."""
    z_list = np.atleast_2d(np.asarray(z_list, dtype=float))
    h = _default_step(horizon) if h is None else h
    n = max(1, int(math.ceil(horizon / h - 1e-9)))
    step = horizon / n
    traj = np.array([rk4_states(system, z, step, n) for z in z_list])
    final = traj[:, -1]
    pair = np.linalg.norm(final[:, None, :] - final[None, :, :], axis=-1)
    sep = np.linalg.norm(traj - traj[:1], axis=-1)
    return LeafBundle(step * np.arange(n + 1), traj, pair, sep)
