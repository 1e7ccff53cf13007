"""Aitken delta-squared acceleration for linearly convergent sequences."""

from __future__ import annotations

from typing import Sequence

import numpy as np

from .errors import DegenerateSequenceError

#: Relative residual above which the vector system counts as singular.
SOLVE_RESIDUAL = 1e-8


def aitken_scalar(seq: Sequence[float], k: int = 0) -> float:
    """``x_k - (dx_k)^2 / d2x_k`` using entries ``k, k+1, k+2``."""
    if k < 0 or k + 2 >= len(seq):
        raise IndexError(f"need entries {k}..{k + 2}, have {len(seq)}")
    x0, x1, x2 = (float(seq[k + i]) for i in range(3))
    d0, d1 = x1 - x0, x2 - x1
    d2 = d1 - d0
    if d2 == 0.0:
        raise DegenerateSequenceError(f"second difference vanishes at k={k}")
    return x0 - d0 * d0 / d2


def _as_matrix(seq) -> np.ndarray:
    arr = [np.atleast_1d(np.asarray(z, dtype=float)) for z in seq]
    dims = {a.shape for a in arr}
    if len(dims) > 1:
        raise ValueError(f"sequence entries differ in shape: {sorted(dims)}")
    return np.array(arr)


def aitken_vector(seq, k: int = 0) -> np.ndarray:
    """Vector Aitken term from entries ``k .. k+n+1`` of an ``R^n`` sequence.

    ``D_k`` has columns ``z_{k+i+1} - z_{k+i}`` for ``i < n`` and the result is
    ``z_k - D_k (D_{k+1} - D_k)^{-1} (z_{k+1} - z_k)``.
    """
    z = _as_matrix(seq)
    n = z.shape[1]
    if k < 0 or k + n + 1 >= len(z):
        raise IndexError(f"need entries {k}..{k + n + 1}, have {len(z)}")
    diffs = np.diff(z[k: k + n + 2], axis=0)  # n + 1 first differences
    d_k = diffs[:n].T
    d2_k = diffs[1: n + 1].T - d_k
    rhs = diffs[0]
    try:
        v = np.linalg.solve(d2_k, rhs)
    except np.linalg.LinAlgError as exc:
        raise DegenerateSequenceError(f"singular second-difference matrix at k={k}") from exc
    scale = np.linalg.norm(rhs)
    if not np.all(np.isfinite(v)) or np.linalg.norm(d2_k @ v - rhs) > SOLVE_RESIDUAL * scale \
            or scale == 0.0:
        raise DegenerateSequenceError(f"second-difference system is numerically singular at k={k}")
    return z[k] - d_k @ v


def available_terms(length: int, dim: int) -> int:
    """How many accelerated terms a history of ``length`` entries supports."""
    return max(0, length - dim - 1)


def aitken_sequence(seq, strict: bool = False) -> list[np.ndarray | None]:
    """Accelerated sequence aligned with its input.

    Entry ``m`` holds the newest term computable from ``seq[:m+1]``, i.e. the
    term with ``k = m - n - 1``; earlier entries are ``None``.  Degenerate
    systems give ``None`` unless ``strict``.
    """
    z = _as_matrix(seq)
    n = z.shape[1]
    out: list[np.ndarray | None] = [None] * len(z)
    for m in range(n + 1, len(z)):
        try:
            out[m] = aitken_vector(z, m - n - 1)
        except DegenerateSequenceError:
            if strict:
                raise
    return out
