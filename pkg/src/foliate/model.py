"""Split ODE systems ``z' = Cz + H(z)`` and the built-in models.

A state is a flat float array ``z = [x, y]`` holding the X block first.  Both
linear parts are diagonal, so a system is described by the two spectra and a
vectorised nonlinear map acting on arrays of shape ``(..., dim)``.  The norm on
Z is ``max(|x|_2, |y|_2)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable

import numpy as np

from .errors import GapConditionError

NonlinearMap = Callable[[np.ndarray], np.ndarray]


def cutoff_theta(s):
    """C^1 cutoff equal to 1 on [0, 1], a cubic blend on [1, 2] and 0 beyond."""
    s_arr = np.asarray(s, dtype=float)
    if np.any(s_arr < 0):
        raise ValueError("cutoff_theta is defined for s >= 0 only")
    r = s_arr - 1.0
    out = np.where(s_arr <= 1.0, 1.0, 2.0 * r**3 - 3.0 * r**2 + 1.0)
    out = np.where(s_arr > 2.0, 0.0, out)
    return float(out) if np.ndim(out) == 0 else out


def block_norm(z, dim_x: int):
    """``max(|x|_2, |y|_2)`` over the last axis of ``z``."""
    z = np.asarray(z, dtype=float)
    nx = np.linalg.norm(z[..., :dim_x], axis=-1)
    ny = np.linalg.norm(z[..., dim_x:], axis=-1)
    return np.maximum(nx, ny)


def prepare(h_raw: NonlinearMap, rho: float, dim_x: int) -> NonlinearMap:
    """Return ``z -> theta(|z|^2 / rho^2) H(z)``.

    Rows whose norm puts them in the zero region of the cutoff (or which are not
    finite) are never passed to ``h_raw``, so huge iterates cannot produce
    ``inf * 0``.
    """
    if rho <= 0:
        raise ValueError("cutoff radius must be positive")

    def h_prepared(z):
        z = np.asarray(z, dtype=float)
        with np.errstate(over="ignore", invalid="ignore"):
            s = block_norm(z, dim_x) ** 2 / rho**2
        live = np.isfinite(s) & (s < 2.0)
        out = np.zeros_like(z)
        if z.ndim == 1:
            if live:
                out = cutoff_theta(float(s)) * h_raw(z)
            return out
        if np.any(live):
            out[live] = cutoff_theta(s[live])[:, None] * h_raw(z[live])
        return out

    return h_prepared


@dataclass(frozen=True)
class Preparation:
    rho: float

    def __post_init__(self):
        if not self.rho > 0:
            raise ValueError(f"cutoff radius must be positive, got {self.rho}")


@dataclass(frozen=True)
class SpectralGap:
    """Spectral constants of a split system.

    ``sigma`` defaults to the midpoint ``(alpha + beta) / 2``.  Pass
    ``check=False`` to build the constants of a splitting that violates the gap
    condition (useful to demonstrate non-convergence); ``kappa`` is then
    reported as ``inf`` when it is not defined.
    """

    alpha: float
    beta: float
    delta: float
    sigma: float | None = None
    check: bool = True

    def __post_init__(self):
        if self.sigma is None:
            object.__setattr__(self, "sigma", 0.5 * (self.alpha + self.beta))
        if not self.check:
            return
        if self.delta < 0:
            raise GapConditionError("Lipschitz bound delta must be non-negative")
        if not 2.0 * self.delta < self.beta - self.alpha:
            raise GapConditionError(
                "spectral gap condition 2*delta < beta - alpha violated: "
                f"2*{self.delta:g} >= {self.beta:g} - ({self.alpha:g})"
            )
        if not self.alpha + self.delta < self.sigma < self.beta - self.delta:
            raise GapConditionError(
                f"sigma={self.sigma:g} must lie in (alpha + delta, beta - delta) = "
                f"({self.alpha + self.delta:g}, {self.beta - self.delta:g})"
            )

    @property
    def kappa(self) -> float:
        lo, hi = self.sigma - self.alpha, self.beta - self.sigma
        if lo <= 0 or hi <= 0:
            return float("inf")
        if self.delta == 0:
            return 0.0
        return max(self.delta / hi, self.delta / lo)

    @property
    def gap(self) -> float:
        return self.beta - self.alpha

    def require_tracking(self) -> "SpectralGap":
        """Check the stronger condition ``4 delta < beta - alpha``."""
        if not 4.0 * self.delta < self.beta - self.alpha:
            raise GapConditionError(
                "tracking requires 4*delta < beta - alpha: "
                f"4*{self.delta:g} >= {self.beta - self.alpha:g}"
            )
        if not self.kappa < 0.5:
            raise GapConditionError(f"tracking requires kappa < 1/2, got {self.kappa:g}")
        return self

    def reversed(self) -> "SpectralGap":
        """Constants of the time-reversed, block-swapped system."""
        return SpectralGap(-self.beta, -self.alpha, self.delta, -self.sigma, check=self.check)

    @classmethod
    def for_system(cls, system: "SplitSystem", delta: float, sigma: float | None = None,
                   check: bool = True) -> "SpectralGap":
        alpha = float(np.max(system.spectrum_a))
        beta = float(np.min(system.spectrum_b))
        return cls(alpha, beta, delta, sigma, check=check)


@dataclass(frozen=True, eq=False)
class SplitSystem:
    """``x' = diag(a) x + F(x, y)``, ``y' = diag(b) y + G(x, y)``."""

    spectrum_a: np.ndarray
    spectrum_b: np.ndarray
    nonlinear: NonlinearMap
    preparation: Preparation | None = None
    name: str = "system"
    _h: NonlinearMap = field(init=False, repr=False)

    def __post_init__(self):
        a = np.atleast_1d(np.asarray(self.spectrum_a, dtype=float)).copy()
        b = np.atleast_1d(np.asarray(self.spectrum_b, dtype=float)).copy()
        a.flags.writeable = False
        b.flags.writeable = False
        object.__setattr__(self, "spectrum_a", a)
        object.__setattr__(self, "spectrum_b", b)
        h = self.nonlinear
        if self.preparation is not None:
            h = prepare(self.nonlinear, self.preparation.rho, a.size)
        object.__setattr__(self, "_h", h)

    @property
    def dim_x(self) -> int:
        return self.spectrum_a.size

    @property
    def dim_y(self) -> int:
        return self.spectrum_b.size

    @property
    def dim(self) -> int:
        return self.dim_x + self.dim_y

    @property
    def spectrum(self) -> np.ndarray:
        return np.concatenate([self.spectrum_a, self.spectrum_b])

    def H(self, z):
        """Nonlinearity after preparation (identical to ``nonlinear`` without one)."""
        return self._h(z)

    def F(self, z):
        return self.H(z)[..., : self.dim_x]

    def G(self, z):
        return self.H(z)[..., self.dim_x:]

    def rhs(self, z):
        z = np.asarray(z, dtype=float)
        return self.spectrum * z + self.H(z)

    def norm(self, z):
        return block_norm(z, self.dim_x)

    def split(self, z):
        z = np.asarray(z, dtype=float)
        return z[..., : self.dim_x], z[..., self.dim_x:]

    def join(self, x, y):
        x = np.atleast_1d(np.asarray(x, dtype=float))
        y = np.atleast_1d(np.asarray(y, dtype=float))
        return np.concatenate([x, y], axis=-1)

    def swap(self, z):
        """``[x, y] -> [y, x]``."""
        z = np.asarray(z, dtype=float)
        return np.concatenate([z[..., self.dim_x:], z[..., : self.dim_x]], axis=-1)

    def reversed(self) -> "SplitSystem":
        """The system for ``w(s) = swap(z(-s))``.

        Its X block is the old Y block with spectrum ``-b`` and vice versa, so
        unstable leaves of ``self`` are stable leaves of the result.
        """
        dx = self.dim_x
        h = self.H

        def h_rev(w):
            w = np.asarray(w, dtype=float)
            dy = w.shape[-1] - dx
            z = np.concatenate([w[..., dy:], w[..., :dy]], axis=-1)
            hz = h(z)
            return -np.concatenate([hz[..., dx:], hz[..., :dx]], axis=-1)

        return SplitSystem(-self.spectrum_b, -self.spectrum_a, h_rev, None,
                           name=f"reversed({self.name})")


def estimate_lipschitz(system: SplitSystem, radius: float, n_samples: int = 2000,
                       seed: int = 0, eps: float = 1e-6) -> float:
    """Sampled estimate of ``Lip(H)`` on the ball of the given radius.

    Uses central-difference Jacobians and the block bound
    ``max(|J_xx| + |J_xy|, |J_yx| + |J_yy|)`` for the induced norm.
    """
    rng = np.random.default_rng(seed)
    pts = sample_ball(rng, n_samples, radius, system.dim_x, system.dim_y)
    d, dx = system.dim, system.dim_x
    best = 0.0
    for z in pts:
        cols = []
        for k in range(d):
            e = np.zeros(d)
            e[k] = eps
            cols.append((system.H(z + e) - system.H(z - e)) / (2 * eps))
        jac = np.array(cols).T
        rx = np.linalg.norm(jac[:dx, :dx], 2) + np.linalg.norm(jac[:dx, dx:], 2)
        ry = np.linalg.norm(jac[dx:, :dx], 2) + np.linalg.norm(jac[dx:, dx:], 2)
        best = max(best, rx, ry)
    return float(best)


def sample_ball(rng: np.random.Generator, n: int, radius: float, dim_x: int,
                dim_y: int) -> np.ndarray:
    """Uniform samples of ``{max(|x|, |y|) <= radius}`` by rejection from the cube."""
    out = []
    while len(out) < n:
        z = rng.uniform(-radius, radius, size=dim_x + dim_y)
        if np.linalg.norm(z[:dim_x]) <= radius and np.linalg.norm(z[dim_x:]) <= radius:
            out.append(z)
    return np.array(out).reshape(n, dim_x + dim_y)


# ---------------------------------------------------------------------------
# Test problem: the linear saddle x~' = -x~, y~' = y~ conjugated by T = T2 o T1.


def toy_transform(w, p: float):
    """Apply ``T`` to ``w = (x~, y~)`` (vectorised over leading axes)."""
    w = np.asarray(w, dtype=float)
    xt, yt = w[..., 0], w[..., 1]
    x = xt + yt / (p * np.sqrt(1.0 + yt**2))
    y = yt + np.arctan(x) / p
    return np.stack([x, y], axis=-1)


def toy_inverse(z, p: float):
    """Inverse of :func:`toy_transform`, in closed form."""
    z = np.asarray(z, dtype=float)
    x, y = z[..., 0], z[..., 1]
    yt = y - np.arctan(x) / p
    xt = x - yt / (p * np.sqrt(1.0 + yt**2))
    return np.stack([xt, yt], axis=-1)


def toy_jacobian(w, p: float):
    """Jacobian of ``T`` at ``w``."""
    xt, yt = float(w[0]), float(w[1])
    q = 1.0 + yt**2
    dx_dyt = 1.0 / (p * q**1.5)
    x = xt + yt / (p * np.sqrt(q))
    datan = 1.0 / (p * (1.0 + x**2))
    return np.array([[1.0, dx_dyt], [datan, 1.0 + datan * dx_dyt]])


def _toy_xdot(x, y, p):
    s = y - np.arctan(x) / p
    q = 1.0 + s**2
    return -x + s / (p * np.sqrt(q)) + s / (p * q**1.5)


def toy_rhs(z, p: float):
    """Full vector field of the conjugated saddle."""
    z = np.asarray(z, dtype=float)
    x, y = z[..., 0], z[..., 1]
    xdot = _toy_xdot(x, y, p)
    s = y - np.arctan(x) / p
    ydot = s + xdot / (p * (1.0 + x**2))
    return np.stack([xdot, ydot], axis=-1)


def toy_system(p: float = 10.0) -> SplitSystem:
    """The conjugated saddle with ``A = -1``, ``B = 1``."""
    if not p > 0:
        raise ValueError("p must be positive")

    def h(z):
        z = np.asarray(z, dtype=float)
        return toy_rhs(z, p) - np.array([-1.0, 1.0]) * z

    return SplitSystem(np.array([-1.0]), np.array([1.0]), h, name=f"toy(p={p:g})")


# ---------------------------------------------------------------------------
# Kuramoto-Sivashinsky in sine modes b_1..b_n:  b_j' = (g j^2 - 4 j^4) b_j - g (u u_xi)_j


def kse_eigenvalues(n_modes: int, gamma: float) -> np.ndarray:
    j = np.arange(1, n_modes + 1, dtype=float)
    return gamma * j**2 - 4.0 * j**4


@lru_cache(maxsize=32)
def _convection_matrix(n: int) -> np.ndarray:
    """Coefficients mapping the products ``b_k b_l`` to the modes of ``u u_xi``."""
    m = np.zeros((n, n, n))
    k = np.arange(1, n + 1)
    for j in range(1, n + 1):
        m[:, :, j - 1] += 0.25 * j * (k[:, None] + k[None, :] == j)
        m[:, :, j - 1] -= 0.5 * j * (k[None, :] - k[:, None] == j)
    return m.reshape(n * n, n)


def sine_convection(b):
    """Sine coefficients of ``u u_xi`` for ``u = sum_j b_j sin(j xi)``, modes 1..n."""
    b = np.asarray(b, dtype=float)
    n = b.shape[-1]
    prod = (b[..., :, None] * b[..., None, :]).reshape(b.shape[:-1] + (n * n,))
    return prod @ _convection_matrix(n)


def modes_to_state(b, dim_y: int):
    """Galerkin coefficients ``b_1..b_n`` to ``z = [x, y]`` with ``y`` the low modes."""
    b = np.asarray(b, dtype=float)
    return np.concatenate([b[..., dim_y:], b[..., :dim_y]], axis=-1)


def state_to_modes(z, dim_y: int):
    z = np.asarray(z, dtype=float)
    dx = z.shape[-1] - dim_y
    return np.concatenate([z[..., dx:], z[..., :dx]], axis=-1)


def kse_galerkin(n_modes: int, gamma: float, dim_y: int | None = None,
                 rho: float | None = None) -> SplitSystem:
    """``n_modes`` sine-Galerkin truncation; Y holds modes ``1..dim_y``."""
    if n_modes < 2:
        raise ValueError("need at least two modes")
    if not gamma > 0:
        raise ValueError("gamma must be positive")
    dim_y = n_modes // 2 if dim_y is None else dim_y
    if not 1 <= dim_y < n_modes:
        raise ValueError(f"dim_y must be in [1, {n_modes - 1}]")
    lam = kse_eigenvalues(n_modes, gamma)

    def h(z):
        b = state_to_modes(z, dim_y)
        return modes_to_state(-gamma * sine_convection(b), dim_y)

    prep = Preparation(rho) if rho is not None else None
    return SplitSystem(lam[dim_y:], lam[:dim_y], h, prep,
                       name=f"kse{n_modes}(gamma={gamma:g}, dim_y={dim_y})")


def aif_lift(p, gamma: float, n: int = 3, band: int | None = None):
    """``Phi_1(p) = -L^{-1} Q R(p)`` on modes ``n+1..band`` (default ``4n``)."""
    band = 4 * n if band is None else band
    p = np.asarray(p, dtype=float)
    pad = np.zeros(p.shape[:-1] + (band,))
    pad[..., :n] = p
    r = gamma * sine_convection(pad)
    lam = kse_eigenvalues(band, gamma)
    q = np.zeros_like(pad)
    q[..., n:] = r[..., n:] / lam[n:]
    return q


def kse_aif(gamma: float, dim_y: int = 2, rho: float | None = None,
            band: int = 12) -> SplitSystem:
    """Three-mode approximate inertial form ``p' = -Lp - P R(p + Phi_1(p))``.

    The state is ``[x, y]`` with Y the modes ``1..dim_y``; ``band`` is the
    highest mode retained by the lift.
    """
    n = 3
    if not gamma > 0:
        raise ValueError("gamma must be positive")
    lam_band = kse_eigenvalues(band, gamma)
    if np.any(lam_band[n:] == 0):
        raise ValueError("L is singular on the lifted band for this gamma")
    lam = lam_band[:n]

    def h(z):
        pm = state_to_modes(z, dim_y)
        w = aif_lift(pm, gamma, n, band)
        w[..., :n] += pm
        return modes_to_state(-gamma * sine_convection(w)[..., :n], dim_y)

    prep = Preparation(rho) if rho is not None else None
    return SplitSystem(lam[dim_y:], lam[:dim_y], h, prep,
                       name=f"aif(gamma={gamma:g}, dim_y={dim_y})")
