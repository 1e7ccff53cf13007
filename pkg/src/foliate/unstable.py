"""Unstable leaves and the inertial manifold.

The unstable leaf of a system is the stable leaf of its time-reversed,
block-swapped twin (see :meth:`SplitSystem.reversed`).  Every routine here
maps the query into the reversed coordinates, calls the stable solver and
maps the answer back, so both sides share one code path.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, replace

import numpy as np

from .model import SpectralGap, SplitSystem
from .stable import (StableLeafResult, StableSolveConfig, solve_stable_leaf, t_map_apply)
from .timegrid import BaseTrajectory, TimeGridFunction, zero_trajectory


@dataclass(eq=False)
class UnstableLeafResult(StableLeafResult):
    """``value`` is ``x = Psi(y)``.

    ``varphi`` is stored in the reversed coordinates: node ``i`` holds
    ``swap(psi(-t_i))`` weighted by ``exp(-sigma t)`` with ``t = -t_i``.
    """

    @property
    def psi(self) -> TimeGridFunction | None:
        return self.varphi

    @classmethod
    def from_stable(cls, res: StableLeafResult) -> "UnstableLeafResult":
        return cls(res.value, res.iterates, res.sigma_norm_history, res.varphi, res.base,
                   res.initial, res.grids)


def u_map_apply(psi: TimeGridFunction, y, system: SplitSystem, gap: SpectralGap,
                method: str = "SIMP", base: BaseTrajectory | None = None) -> TimeGridFunction:
    """One sweep of the discretised map whose fixed point gives ``Psi(y)``.

    ``psi`` lives in the reversed coordinates of ``system``; ``gap`` is given
    in the original orientation.  With no ``base`` the origin is used.
    """
    rev = system.reversed()
    if base is None:
        base = zero_trajectory(rev, psi.grid)
    return t_map_apply(psi, y, base, gap.reversed(), method)


def solve_unstable_leaf(system: SplitSystem, z_base, y, cfg: StableSolveConfig,
                        base: BaseTrajectory | None = None, stop=None) -> UnstableLeafResult:
    """``Psi_{z_base}(y)``: the X coordinate of the unstable leaf through ``z_base`` at ``y``.

    ``cfg.gap`` is in the original orientation.
    """
    rev = system.reversed()
    res = solve_stable_leaf(rev, system.swap(np.asarray(z_base, dtype=float)), y,
                            cfg.reversed(), base=base, stop=stop)
    return UnstableLeafResult.from_stable(res)


def solve_inertial_manifold(system: SplitSystem, y, cfg: StableSolveConfig,
                            base: BaseTrajectory | None = None, stop=None) -> UnstableLeafResult:
    """``Psi(y)`` for the unstable leaf through the origin.

    PWCONST starts from the constant ``psi^0 = (0, y)``; SIMP and SIMPGS from
    ``psi^0(t) = (0, e^{beta t} y)``.
    """
    gap = cfg.gap
    if cfg.method == "PWCONST" and gap.sigma < 0:
        cfg = replace(cfg, initial="constant")
    if not gap.alpha + gap.delta < 0:
        warnings.warn(
            f"alpha + delta = {gap.alpha + gap.delta:g} >= 0: the leaf through the origin "
            "is not attracting", RuntimeWarning, stacklevel=2,
        )
    return solve_unstable_leaf(system, np.zeros(system.dim), y, cfg, base=base, stop=stop)


def count_multiplications(j_iterations: int, dim_z: int, dim_x: int | None = None) -> tuple[int, int]:
    """Multiplication counts of plain PWCONST and of the Aitken route.

    Plain: ``sum_{j=1}^{J} j 2^j 6 dim_z``.  Aitken (two accelerated terms):
    ``sum_{j=1}^{dim_x+1} j 2^j 6 dim_z + 2 (dim_x^3 + dim_x^2)``.
    """
    if j_iterations < 0 or dim_z < 1:
        raise ValueError("need J >= 0 and dim_z >= 1")
    plain = sum(j * 2**j * 6 * dim_z for j in range(1, j_iterations + 1))
    if dim_x is None:
        return plain, 0
    aitken = sum(j * 2**j * 6 * dim_z for j in range(1, dim_x + 2)) + 2 * (dim_x**3 + dim_x**2)
    return plain, aitken
