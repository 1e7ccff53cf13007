"""Closed-form invariant objects of the conjugated linear saddle.

The toy system is ``z = T(w)`` applied to ``w~' = -w~x, w~y' = w~y``, so its
invariant objects are images of coordinate lines.  Everything is evaluated
in ``numpy.longdouble`` and returned as ``float64``.  The module also
provides tightly integrated reference points for the Galerkin systems.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.integrate import solve_ivp

from .model import modes_to_state, toy_inverse, toy_transform

_LD = np.longdouble


def _ld(v):
    return np.asarray(v, dtype=_LD)


@dataclass(frozen=True)
class ToyOracle:
    p: float = 10.0

    def __post_init__(self):
        if not self.p > 0:
            raise ValueError(f"p must be positive, got {self.p}")

    # coordinate maps, re-exported for convenience
    def transform(self, w) -> np.ndarray:
        return toy_transform(w, self.p)

    def inverse(self, z) -> np.ndarray:
        return toy_inverse(z, self.p)

    def exact_unstable_manifold(self, y_tilde) -> np.ndarray:
        """Image of the line ``x~ = 0`` at parameter ``y~``; the inertial manifold."""
        yt = _ld(y_tilde)
        p = _ld(self.p)
        x = yt / (p * np.sqrt(1 + yt * yt))
        y = yt + np.arctan(x) / p
        return np.stack([x, y], axis=-1).astype(float)

    def exact_stable_leaf(self, x, y_tilde0) -> np.ndarray | float:
        """``y`` on the leaf that is the image of ``y~ = y_tilde0``."""
        out = _ld(y_tilde0) + np.arctan(_ld(x)) / _ld(self.p)
        return out.astype(float) if np.ndim(out) else float(out)

    def y_tilde_of(self, z0) -> float:
        """``y~0`` of a point given in the original coordinates."""
        return float(toy_inverse(np.asarray(z0, dtype=float), self.p)[1])

    def exact_tracking_ic(self, y_tilde0) -> np.ndarray:
        """The point of the inertial manifold on the stable leaf ``y~ = y_tilde0``.

        Both leaves are images of coordinate lines, so the intersection is
        ``T(0, y_tilde0)``.
        """
        return self.exact_unstable_manifold(y_tilde0)

    def inertial_x(self, y) -> float:
        """``x = Psi(y)`` on the inertial manifold, by Newton on the parametrisation."""
        p = _ld(self.p)
        y = _ld(y)
        yt = y
        for _ in range(60):
            s = np.sqrt(1 + yt * yt)
            x = yt / (p * s)
            dx = 1 / (p * s**3)
            r = yt + np.arctan(x) / p - y
            dr = 1 + dx / (p * (1 + x * x))
            step = r / dr
            yt = yt - step
            if abs(step) <= 4 * np.finfo(_LD).eps * max(_ld(1), abs(yt)):
                break
        return float(yt / (p * np.sqrt(1 + yt * yt)))

    def stable_leaf_through(self, z0, x) -> float:
        """``Phi_z0(x)`` for a base point in the original coordinates."""
        return self.exact_stable_leaf(x, self.y_tilde_of(z0))

    @staticmethod
    def graph_lipschitz(gap) -> float:
        """Lipschitz bound ``delta / (beta - alpha - delta)`` of a leaf graph."""
        return gap.delta / (gap.beta - gap.alpha - gap.delta)


# ---------------------------------------------------------------------------
# reference points for systems without closed forms


def integrate_reference(system, z_init, t_final: float, rtol: float = 1e-13,
                        atol: float = 1e-16) -> np.ndarray:
    """High-accuracy state ``z(t_final, z_init)`` (DOP853, tight tolerances)."""
    sol = solve_ivp(lambda t, z: system.rhs(z), (0.0, t_final), np.asarray(z_init, dtype=float),
                    method="DOP853", rtol=rtol, atol=atol)
    if not sol.success:
        raise RuntimeError(f"reference integration failed: {sol.message}")
    return sol.y[:, -1].copy()


def kse_reference_point(system, modes, t_final: float, **kw) -> np.ndarray:
    """Galerkin state reached from the given sine amplitudes after ``t_final``.

    After a short transient the high modes are slaved to the low ones to
    round-off, so the point lies on the inertial manifold of the splitting.
    """
    b = np.zeros(system.dim)
    b[: len(modes)] = modes
    return integrate_reference(system, modes_to_state(b, system.dim_y), t_final, **kw)
