"""Leaves of the stable foliation by iterating the discretised Lyapunov-Perron map.

For a base point ``z0 = (x0, y0)`` the leaf through ``z0`` is the graph of
``Phi_z0(x) = y0 + Q phi(0)``, where ``phi`` is the fixed point of

    T(phi, x)(t) = e^{tA} x + int_0^t e^{(t-s)A} dF(s) ds - int_t^inf e^{(t-s)B} dG(s) ds

with ``dF(s) = F(phi(s) + z(s, z0)) - F(z(s, z0))`` (same for ``G``).

Three discretisations are provided:

``PWCONST``
    integrand frozen at the left node of each step, exponential weights exact;
``SIMP``
    Simpson two-step recursion with 3/8-rule starting values;
``SIMPGS``
    SIMP where nodes already updated in the current sweep feed the sums.

All sweeps work on the weighted samples ``w_i = exp(-sigma t_i) phi(t_i)``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np
from scipy.signal import lfilter

from .errors import DivergenceError
from .model import SpectralGap, SplitSystem
from .timegrid import (BaseTrajectory, TimeGrid, TimeGridFunction, choose_tail,
                       rk4_trajectory, zero_trajectory)

METHODS = ("PWCONST", "SIMP", "SIMPGS")

#: Largest weighted magnitude accepted before a sweep is declared divergent.
DIVERGENCE_GUARD = 1e12


def pwconst_schedule(n_iterations: int, h0: float = 1.0, n0: int = 1) -> list[tuple[float, int]]:
    """Grid refinement ``h_j = h0 2^-j`` with ``N_j = n0 j 2^j`` steps, ``j = 1..J``.

    ``h0 = n0 = 1`` is the classical choice ``h_j = 2^-j``, ``N_j = j 2^j``.
    """
    return [(h0 * 2.0**-j, n0 * j * 2**j) for j in range(1, n_iterations + 1)]


@dataclass(frozen=True)
class StableSolveConfig:
    """Settings of one leaf solve.

    ``n_points=None`` picks the tail length from the truncation bound (needs
    ``sigma < 0``).  ``schedule`` is only used by ``PWCONST``: a list of
    ``(h_j, N_j)`` pairs, one per iteration, overriding ``h``/``n_points``.
    ``initial`` selects ``phi^0 = e^{alpha t}(x - x0)`` or the constant
    ``phi^0 = x - x0``; the constant has a finite weighted norm only when
    ``sigma >= 0`` (on the reversed side, ``sigma < 0`` in the original
    orientation).
    """

    gap: SpectralGap
    method: str = "SIMP"
    h: float = 0.1
    n_points: int | None = None
    j_iterations: int = 6
    schedule: tuple[tuple[float, int], ...] | None = None
    initial: str = "exponential"

    def __post_init__(self):
        if self.initial not in ("exponential", "constant"):
            raise ValueError(f"initial guess must be 'exponential' or 'constant', got {self.initial!r}")
        if self.method not in METHODS:
            raise ValueError(f"method must be one of {METHODS}, got {self.method!r}")
        if self.j_iterations < 1:
            raise ValueError("need at least one iteration")
        if not self.h > 0:
            raise ValueError("step must be positive")
        if self.schedule is not None:
            object.__setattr__(self, "schedule", tuple((float(h), int(n)) for h, n in self.schedule))
            if self.method != "PWCONST":
                raise ValueError("a grid schedule is only meaningful for PWCONST")
            if len(self.schedule) < self.j_iterations:
                raise ValueError("schedule shorter than the number of iterations")

    def reversed(self) -> "StableSolveConfig":
        return replace(self, gap=self.gap.reversed())


@dataclass(eq=False)
class StableLeafResult:
    """Outcome of a leaf solve.

    ``iterates[j-1]`` is ``Phi^j(x)``; ``sigma_norm_history[j-1]`` is
    ``|phi^j - phi^(j-1)|_sigma``.  ``initial`` holds ``Phi^0(x) = y0``.
    """

    value: np.ndarray
    iterates: list[np.ndarray]
    sigma_norm_history: list[float]
    varphi: TimeGridFunction | None = None
    base: BaseTrajectory | None = None
    initial: np.ndarray | None = None
    grids: list[TimeGrid] = field(default_factory=list)

    @property
    def iterate_history(self) -> list[np.ndarray]:
        return self.iterates


# ---------------------------------------------------------------------------
# helpers


def _phi1(lam: np.ndarray, h: float) -> np.ndarray:
    """``int_0^h exp(lam s) ds`` evaluated stably."""
    lam = np.asarray(lam, dtype=float)
    out = np.full(lam.shape, h)
    nz = lam != 0
    with np.errstate(over="ignore"):
        out[nz] = np.expm1(lam[nz] * h) / lam[nz]
    return out


def _log_phi1(lam: np.ndarray, h: float) -> np.ndarray:
    """``log int_0^h exp(lam s) ds`` without overflow for large ``lam h``."""
    lam = np.asarray(lam, dtype=float)
    out = np.full(lam.shape, math.log(h))
    pos, neg = lam > 0, lam < 0
    lp, ln = lam[pos], lam[neg]
    out[pos] = lp * h - np.log(lp) + np.log(-np.expm1(-lp * h))
    out[neg] = np.log(-np.expm1(ln * h)) - np.log(-ln)
    return out


def _unscale(weighted: np.ndarray, exponent: np.ndarray) -> np.ndarray:
    """``weighted * exp(exponent)`` per row without ``0 * inf``."""
    with np.errstate(over="ignore", divide="ignore", invalid="ignore"):
        mag = np.exp(np.log(np.abs(weighted)) + exponent[:, None])
    return np.sign(weighted) * mag


def _first_order(coef: np.ndarray, start: np.ndarray, forcing: np.ndarray) -> np.ndarray:
    """``u[0] = start``, ``u[m] = coef u[m-1] + forcing[m-1]`` (columnwise)."""
    m = forcing.shape[0]
    out = np.empty((m + 1, start.size))
    out[0] = start
    for c in range(start.size):
        if m:
            out[1:, c], _ = lfilter([1.0], [1.0, -coef[c]], forcing[:, c],
                                    zi=[coef[c] * start[c]])
    return out


def _two_step(coef: np.ndarray, u0: np.ndarray, u1: np.ndarray,
              forcing: np.ndarray) -> np.ndarray:
    """``u[i+1] = coef u[i-1] + forcing[i-1]`` for ``i = 1..len(forcing)``."""
    n_out = forcing.shape[0] + 2
    out = np.empty((n_out, u0.size))
    even = _first_order(coef, u0, forcing[0::2])
    odd = _first_order(coef, u1, forcing[1::2])
    out[0::2] = even[: (n_out + 1) // 2]
    out[1::2] = odd[: n_out // 2]
    return out


def _check_finite(w: np.ndarray, iteration: int | None, side: str | None = None):
    bad = ~np.isfinite(w) | (np.abs(w) > DIVERGENCE_GUARD)
    if np.any(bad):
        idx = int(np.argmax(np.any(bad, axis=1)))
        raise DivergenceError(
            f"iterate diverged at node {idx}" + (f" in iteration {iteration}" if iteration else ""),
            iteration=iteration, index=idx, side=side,
        )


def initial_guess(grid: TimeGrid, x_rel, system: SplitSystem, gap: SpectralGap,
                  kind: str = "exponential") -> TimeGridFunction:
    """``phi^0(t) = (e^{alpha t} (x - x0), 0)``, or ``(x - x0, 0)`` for ``kind='constant'``."""
    tau = grid.times
    rate = gap.alpha if kind == "exponential" else 0.0
    w = np.zeros((grid.n_points, system.dim))
    w[:, : system.dim_x] = np.exp((rate - gap.sigma) * tau)[:, None] * np.asarray(x_rel)
    return TimeGridFunction(grid, w, gap.sigma, system.dim_x)


def _scaled_differences(w: np.ndarray, base: BaseTrajectory, sigma: float) -> np.ndarray:
    """``exp(-sigma t_i) [H(phi_i + z_i) - H(z_i)]`` for every node."""
    tau = base.grid.times
    phi = _unscale(w, sigma * tau)
    diff = base.system.H(base.states + phi) - base.nonlinear
    with np.errstate(over="ignore", invalid="ignore"):
        return diff * np.exp(-sigma * tau)[:, None]


def _node_difference(z_pert: np.ndarray, i: int, base: BaseTrajectory, sigma: float) -> np.ndarray:
    tau = base.grid.times[i]
    diff = base.system.H(z_pert) - base.nonlinear[i]
    return diff * math.exp(-sigma * tau)


# ---------------------------------------------------------------------------
# one application of the discretised map


def _sweep_simp(w: np.ndarray, x_rel: np.ndarray, base: BaseTrajectory, sigma: float) -> np.ndarray:
    system, grid = base.system, base.grid
    n, h, dx = grid.n, grid.h, system.dim_x
    if n < 3:
        raise ValueError("SIMP needs at least four grid nodes")
    a, b = system.spectrum_a, system.spectrum_b
    d = _scaled_differences(w, base, sigma)
    f, g = d[:, :dx], d[:, dx:]
    out = np.empty_like(w)

    e1 = np.exp(h * (a - sigma))
    ei1 = np.exp(-h * (a - sigma))
    x1 = (e1 * x_rel
          + 0.375 * h * (e1 * f[0] + 3.0 * f[1] + 3.0 * ei1 * f[2] + ei1**2 * f[3])
          - (h / 3.0) * (f[1] + 4.0 * ei1 * f[2] + ei1**2 * f[3]))
    forcing = (h / 3.0) * (e1**2 * f[:-2] + 4.0 * e1 * f[1:-1] + f[2:])
    out[:, :dx] = _two_step(e1**2, np.asarray(x_rel, dtype=float), x1, forcing)

    d1 = np.exp(-h * (b - sigma))
    di1 = np.exp(h * (b - sigma))
    yn1 = (-0.375 * h * (di1**2 * g[n - 3] + 3.0 * di1 * g[n - 2] + 3.0 * g[n - 1] + d1 * g[n])
           + (h / 3.0) * (di1**2 * g[n - 3] + 4.0 * di1 * g[n - 2] + g[n - 1]))
    # backward recursion, written for the reversed index m = n - i
    back = -(h / 3.0) * (g[:-2] + 4.0 * d1 * g[1:-1] + d1**2 * g[2:])
    rev = _two_step(d1**2, np.zeros(b.size), yn1, back[::-1])
    out[:, dx:] = rev[::-1]
    return out


def _sweep_simpgs(w: np.ndarray, x_rel: np.ndarray, base: BaseTrajectory, sigma: float) -> np.ndarray:
    system, grid = base.system, base.grid
    n, h, dx = grid.n, grid.h, system.dim_x
    if n < 3:
        raise ValueError("SIMPGS needs at least four grid nodes")
    a, b = system.spectrum_a, system.spectrum_b
    tau = grid.times
    d_old = _scaled_differences(w, base, sigma)
    f_old, g_old = d_old[:, :dx], d_old[:, dx:]
    phi_old = _unscale(w, sigma * tau)
    out = np.empty_like(w)

    # forward X sweep: node values of x already updated, y from the previous iterate
    e1, ei1 = np.exp(h * (a - sigma)), np.exp(-h * (a - sigma))
    e2 = e1**2
    xs = out[:, :dx]
    f_new = np.empty_like(f_old)

    def refresh_f(i):
        z = base.states[i].copy()
        z[:dx] += math.exp(sigma * tau[i]) * xs[i]
        z[dx:] += phi_old[i, dx:]
        f_new[i] = _node_difference(z, i, base, sigma)[:dx]

    xs[0] = x_rel
    refresh_f(0)
    xs[1] = (e1 * x_rel
             + 0.375 * h * (e1 * f_new[0] + 3.0 * f_old[1] + 3.0 * ei1 * f_old[2] + ei1**2 * f_old[3])
             - (h / 3.0) * (f_old[1] + 4.0 * ei1 * f_old[2] + ei1**2 * f_old[3]))
    refresh_f(1)
    for i in range(1, n):
        xs[i + 1] = e2 * xs[i - 1] + (h / 3.0) * (e2 * f_new[i - 1] + 4.0 * e1 * f_new[i] + f_old[i + 1])
        if not np.all(np.isfinite(xs[i + 1])):
            raise DivergenceError(f"SIMPGS X sweep diverged at node {i + 1}", index=i + 1, side="X")
        if i + 1 < n:
            refresh_f(i + 1)

    # backward Y sweep, mirrored
    d1, di1 = np.exp(-h * (b - sigma)), np.exp(h * (b - sigma))
    d2 = d1**2
    ys = out[:, dx:]
    g_new = np.empty_like(g_old)

    def refresh_g(i):
        z = base.states[i].copy()
        z[:dx] += phi_old[i, :dx]
        z[dx:] += math.exp(sigma * tau[i]) * ys[i]
        g_new[i] = _node_difference(z, i, base, sigma)[dx:]

    ys[n] = 0.0
    refresh_g(n)
    ys[n - 1] = (-0.375 * h * (di1**2 * g_old[n - 3] + 3.0 * di1 * g_old[n - 2] + 3.0 * g_old[n - 1]
                               + d1 * g_new[n])
                 + (h / 3.0) * (di1**2 * g_old[n - 3] + 4.0 * di1 * g_old[n - 2] + g_old[n - 1]))
    refresh_g(n - 1)
    for i in range(n - 1, 0, -1):
        ys[i - 1] = d2 * ys[i + 1] - (h / 3.0) * (g_old[i - 1] + 4.0 * d1 * g_new[i] + d2 * g_new[i + 1])
        if not np.all(np.isfinite(ys[i - 1])):
            raise DivergenceError(f"SIMPGS Y sweep diverged at node {i - 1}", index=i - 1, side="Y")
        if i - 1 > 0:
            refresh_g(i - 1)
    return out


def _sweep_pwconst(w: np.ndarray, x_rel: np.ndarray, base: BaseTrajectory, sigma: float) -> np.ndarray:
    system, grid = base.system, base.grid
    n, h, dx = grid.n, grid.h, system.dim_x
    a, b = system.spectrum_a, system.spectrum_b
    d = _scaled_differences(w, base, sigma)
    f, g = d[:, :dx], d[:, dx:]
    out = np.empty_like(w)

    # x(t_{i+1}) = e^{hA} x(t_i) + int_{t_i}^{t_{i+1}} e^{(t_{i+1}-s)A} ds F_i
    coef_x = np.exp(_log_phi1(a, h) - sigma * h)
    out[:, :dx] = _first_order(np.exp(h * (a - sigma)), np.asarray(x_rel, dtype=float),
                               coef_x * f[:-1])

    # y(t_i) = e^{-hB} y(t_{i+1}) - int_{t_i}^{t_{i+1}} e^{(t_i-s)B} ds G_i
    tail = np.where(b > 0, -g[n] / np.where(b > 0, b, 1.0), 0.0)
    back = -_phi1(-b, h) * g[:-1]
    rev = _first_order(np.exp(-h * (b - sigma)), tail, back[::-1])
    out[:, dx:] = rev[::-1]
    return out


_SWEEPS = {"SIMP": _sweep_simp, "SIMPGS": _sweep_simpgs, "PWCONST": _sweep_pwconst}


def t_map_apply(varphi: TimeGridFunction, x, base: BaseTrajectory, gap: SpectralGap,
                method: str = "SIMP") -> TimeGridFunction:
    """One application of the discretised map ``T(phi, x)``.

    ``x`` is the offset ``x - x0`` from the base point.
    """
    if varphi.grid != base.grid:
        raise ValueError("iterate and base trajectory must share a grid")
    if method not in _SWEEPS:
        raise ValueError(f"unknown method {method!r}")
    x_rel = np.atleast_1d(np.asarray(x, dtype=float))
    w = _SWEEPS[method](varphi.weighted, x_rel, base, gap.sigma)
    _check_finite(w, None)
    return TimeGridFunction(base.grid, w, gap.sigma, base.system.dim_x)


# ---------------------------------------------------------------------------
# drivers


def _warn_ratio(norms: Sequence[float], kappa: float, floor: float):
    if len(norms) < 2 or not np.isfinite(kappa):
        return
    prev, last = norms[-2], norms[-1]
    if prev > floor and last > floor and last > 1.1 * kappa * prev:
        warnings.warn(
            f"contraction ratio {last / prev:.3g} exceeds kappa={kappa:.3g} by more than 10%",
            RuntimeWarning, stacklevel=3,
        )


def base_trajectory_for(system: SplitSystem, z0, grid: TimeGrid) -> BaseTrajectory:
    z0 = np.asarray(z0, dtype=float)
    if not np.any(z0):
        # RK4 keeps the equilibrium exactly; skip the loop
        return zero_trajectory(system, grid)
    return rk4_trajectory(system, z0, grid)


def _resolve_grid(cfg: StableSolveConfig, x_norm: float) -> TimeGrid:
    if cfg.n_points is not None:
        return TimeGrid(cfg.h, cfg.n_points)
    return choose_tail(cfg.gap, cfg.h, x_norm)


def solve_stable_leaf(system: SplitSystem, z0, x, cfg: StableSolveConfig,
                      base: BaseTrajectory | None = None,
                      stop: Callable[[int, np.ndarray], bool] | None = None) -> StableLeafResult:
    """``Phi_z0(x)`` after ``cfg.j_iterations`` sweeps.

    A precomputed ``base`` trajectory (on the matching grid) may be passed to
    avoid re-integrating when many inputs share the base point.  ``stop(j,
    value)`` is called after every sweep; returning true ends the iteration.
    """
    if cfg.method == "PWCONST" and cfg.schedule is not None:
        return solve_stable_leaf_pwconst(system, z0, x, cfg)
    z0 = np.asarray(z0, dtype=float)
    x0, y0 = system.split(z0)
    x_rel = np.atleast_1d(np.asarray(x, dtype=float)) - x0
    gap = cfg.gap
    x_norm = float(np.linalg.norm(x_rel))
    if x_norm == 0.0:
        return StableLeafResult(y0.copy(), [y0.copy()] * cfg.j_iterations,
                                [0.0] * cfg.j_iterations, initial=y0.copy())
    if base is None:
        base = base_trajectory_for(system, z0, _resolve_grid(cfg, x_norm))
    grid = base.grid
    phi = initial_guess(grid, x_rel, system, gap, cfg.initial)
    floor = 1e-13 * max(1.0, x_norm)
    iterates, norms = [], []
    for j in range(1, cfg.j_iterations + 1):
        w = _SWEEPS[cfg.method](phi.weighted, x_rel, base, gap.sigma)
        _check_finite(w, j)
        new = TimeGridFunction(grid, w, gap.sigma, system.dim_x)
        norms.append((new - phi).sigma_norm())
        phi = new
        iterates.append(y0 + phi.weighted[0, system.dim_x:])
        _warn_ratio(norms, gap.kappa, floor)
        if stop is not None and stop(j, iterates[-1]):
            break
    return StableLeafResult(iterates[-1].copy(), iterates, norms, phi, base, y0.copy(), [grid])


def resample(varphi: TimeGridFunction, grid: TimeGrid) -> TimeGridFunction:
    """Piecewise-constant transfer (left-node convention) to another grid.

    Beyond the old end point the last value is continued.
    """
    old = varphi.grid
    tau_new = grid.times
    k = np.minimum(np.floor(tau_new / old.h + 1e-9).astype(int), old.n)
    shift = varphi.sigma * (old.times[k] - tau_new)
    w = _unscale(varphi.weighted[k], shift)
    return TimeGridFunction(grid, np.nan_to_num(w, nan=0.0), varphi.sigma, varphi.dim_x)


def _nested_base(system: SplitSystem, z0, schedule) -> BaseTrajectory | None:
    """One RK4 run on the finest grid when every scheduled grid is a subgrid of it."""
    h_min = min(h for h, _ in schedule)
    t_max = max(h * n for h, n in schedule)
    for h, _ in schedule:
        r = h / h_min
        if abs(r - round(r)) > 1e-9:
            return None
    n_fine = int(round(t_max / h_min))
    return base_trajectory_for(system, z0, TimeGrid(h_min, n_fine + 1))


def _restrict(fine: BaseTrajectory, grid: TimeGrid) -> BaseTrajectory | None:
    stride = int(round(grid.h / fine.grid.h))
    last = stride * grid.n
    if last > fine.grid.n:
        return None
    sl = slice(0, last + 1, stride)
    return BaseTrajectory(grid, fine.states[sl], fine.nonlinear[sl], fine.system)


def solve_stable_leaf_pwconst(system: SplitSystem, z0, x, cfg: StableSolveConfig) -> StableLeafResult:
    """PWCONST with a grid refreshed at every iteration from ``cfg.schedule``.

    The base trajectory is recomputed on each grid; the previous iterate is
    transferred piecewise-constantly before the sweep.
    """
    schedule = cfg.schedule or tuple(pwconst_schedule(cfg.j_iterations))
    z0 = np.asarray(z0, dtype=float)
    x0, y0 = system.split(z0)
    x_rel = np.atleast_1d(np.asarray(x, dtype=float)) - x0
    gap = cfg.gap
    if float(np.linalg.norm(x_rel)) == 0.0:
        return StableLeafResult(y0.copy(), [y0.copy()] * cfg.j_iterations,
                                [0.0] * cfg.j_iterations, initial=y0.copy())
    phi = None
    iterates, norms, grids = [], [], []
    fine = _nested_base(system, z0, schedule[: cfg.j_iterations])
    for j in range(1, cfg.j_iterations + 1):
        h_j, n_j = schedule[j - 1]
        grid = TimeGrid(h_j, n_j + 1)
        base = _restrict(fine, grid) if fine is not None else None
        if base is None:
            base = base_trajectory_for(system, z0, grid)
        phi = initial_guess(grid, x_rel, system, gap, cfg.initial) if phi is None else resample(phi, grid)
        w = _sweep_pwconst(phi.weighted, x_rel, base, gap.sigma)
        _check_finite(w, j)
        new = TimeGridFunction(grid, w, gap.sigma, system.dim_x)
        norms.append((new - phi).sigma_norm())
        phi = new
        iterates.append(y0 + phi.weighted[0, system.dim_x:])
        grids.append(grid)
    return StableLeafResult(iterates[-1].copy(), iterates, norms, phi, base, y0.copy(), grids)
