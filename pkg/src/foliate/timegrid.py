"""Uniform time grids, weighted grid functions, RK4 base trajectories, quadrature."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DivergenceError, InfeasibleTailError
from .model import SpectralGap, SplitSystem, block_norm


@dataclass(frozen=True)
class TimeGrid:
    """Nodes ``t_i = i h`` (forward) or ``t_i = -i h`` (backward), ``i = 0..N``."""

    h: float
    n_points: int
    direction: str = "forward"

    def __post_init__(self):
        if not self.h > 0:
            raise ValueError(f"step must be positive, got {self.h}")
        if self.n_points < 2:
            raise ValueError("a grid needs at least 2 nodes")
        if self.direction not in ("forward", "backward"):
            raise ValueError(f"unknown direction {self.direction!r}")

    @property
    def n(self) -> int:
        """Index of the last node, ``N``."""
        return self.n_points - 1

    @property
    def t_end(self) -> float:
        return self.n * self.h

    @property
    def sign(self) -> float:
        return 1.0 if self.direction == "forward" else -1.0

    @property
    def times(self) -> np.ndarray:
        return self.sign * self.h * np.arange(self.n_points)

    def flipped(self) -> "TimeGrid":
        other = "backward" if self.direction == "forward" else "forward"
        return TimeGrid(self.h, self.n_points, other)


@dataclass(frozen=True, eq=False)
class TimeGridFunction:
    """A function sampled on a grid, stored as ``w_i = exp(-sigma t_i) phi(t_i)``.

    Keeping the weighted samples avoids overflow when the raw values grow like
    ``exp(sigma t)``; ``sigma_norm`` is the grid version of the weighted sup norm.
    """

    grid: TimeGrid
    weighted: np.ndarray
    sigma: float
    dim_x: int

    @property
    def values(self) -> np.ndarray:
        with np.errstate(over="ignore", divide="ignore", invalid="ignore"):
            mag = np.exp(np.log(np.abs(self.weighted)) + self.sigma * self.grid.times[:, None])
        return np.sign(self.weighted) * mag

    def at_origin(self) -> np.ndarray:
        return self.weighted[0].copy()

    def sigma_norm(self) -> float:
        return float(np.max(block_norm(self.weighted, self.dim_x)))

    def __sub__(self, other: "TimeGridFunction") -> "TimeGridFunction":
        if other.grid != self.grid or other.sigma != self.sigma:
            raise ValueError("grid functions live on different grids")
        return TimeGridFunction(self.grid, self.weighted - other.weighted, self.sigma, self.dim_x)


@dataclass(frozen=True, eq=False)
class BaseTrajectory:
    """RK4 solution ``z(t_i, z0)`` with the nonlinear terms cached at every node."""

    grid: TimeGrid
    states: np.ndarray
    nonlinear: np.ndarray
    system: SplitSystem

    @property
    def F(self) -> np.ndarray:
        return self.nonlinear[:, : self.system.dim_x]

    @property
    def G(self) -> np.ndarray:
        return self.nonlinear[:, self.system.dim_x:]


def zero_trajectory(system: SplitSystem, grid: TimeGrid) -> BaseTrajectory:
    """The equilibrium at the origin (valid since ``H(0) = 0``)."""
    zeros = np.zeros((grid.n_points, system.dim))
    return BaseTrajectory(grid, zeros, zeros.copy(), system)


def rk4_states(system: SplitSystem, z0, h: float, n_steps: int) -> np.ndarray:
    """Classical RK4 with signed step ``h``; returns ``n_steps + 1`` states."""
    z = np.array(z0, dtype=float)
    out = np.empty((n_steps + 1, z.size))
    out[0] = z
    f = system.rhs
    for i in range(n_steps):
        k1 = f(z)
        k2 = f(z + 0.5 * h * k1)
        k3 = f(z + 0.5 * h * k2)
        k4 = f(z + h * k3)
        z = z + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if not np.all(np.isfinite(z)):
            raise DivergenceError(f"RK4 state became non-finite at node {i + 1}", index=i + 1)
        out[i + 1] = z
    return out


def rk4_trajectory(system: SplitSystem, z0, grid: TimeGrid) -> BaseTrajectory:
    """Integrate along ``grid`` (backward grids integrate with step ``-h``)."""
    states = rk4_states(system, z0, grid.sign * grid.h, grid.n)
    return BaseTrajectory(grid, states, system.H(states), system)


def propagate_diag(spectrum, dt: float, v):
    """``exp(dt * diag(spectrum)) v``."""
    return np.asarray(v, dtype=float) * np.exp(np.asarray(spectrum, dtype=float) * dt)


def simpson(f0, f1, f2, h: float):
    return (h / 3.0) * (np.asarray(f0) + 4.0 * np.asarray(f1) + np.asarray(f2))


def simpson38(f0, f1, f2, f3, h: float):
    return 0.375 * h * (np.asarray(f0) + 3.0 * np.asarray(f1) + 3.0 * np.asarray(f2)
                        + np.asarray(f3))


def tail_length(gap: SpectralGap, h: float, x_norm: float) -> float:
    """Smallest ``t_N`` with ``kappa/(1-kappa) exp(sigma t_N) |x| <= h^5``."""
    if not x_norm > 0:
        raise ValueError("x_norm must be positive; a zero offset is handled by the caller")
    if gap.sigma >= 0:
        raise InfeasibleTailError(
            f"sigma={gap.sigma:g} >= 0: the tail bound cannot be met; pass n_points explicitly"
        )
    k = gap.kappa
    if k == 0:
        return 0.0
    t = math.log(k * x_norm / ((1.0 - k) * h**5)) / (-gap.sigma)
    return max(t, 0.0)


def choose_tail(gap: SpectralGap, h: float, x_norm: float) -> TimeGrid:
    """Forward grid whose length meets the tail bound, with ``N`` even and ``>= 4``."""
    n = math.ceil(tail_length(gap, h, x_norm) / h - 1e-9)
    n = max(n + (n % 2), 4)
    return TimeGrid(h, n + 1)
