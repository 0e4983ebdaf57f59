"""Dense solvers shared by the analysis and identification stages."""

from __future__ import annotations

import numpy as np
from scipy.linalg import schur, solve_triangular

from .errors import DegeneracyError, DimensionError

__all__ = ["solve_sylvester", "solve_lyapunov", "pbh_uncontrollable_modes", "is_controllable", "is_observable"]


def solve_sylvester(a, b, q, tol: float = 1e-13):
    """Solve ``a x + x b = q`` by the Bartels-Stewart scheme.

    Both coefficients are reduced to complex Schur form, ``a = U R U^H`` and
    ``b = V S V^H``, after which ``R y + y S = U^H q V`` is solved one column
    at a time by back substitution and ``x = U y V^H``.

    Raises
    ------
    DegeneracyError
        If ``spec(a)`` and ``spec(-b)`` (numerically) intersect.
    """
    a = np.atleast_2d(np.asarray(a, dtype=complex))
    b = np.atleast_2d(np.asarray(b, dtype=complex))
    q = np.atleast_2d(np.asarray(q, dtype=complex))
    n, k = a.shape[0], b.shape[0]
    if a.shape != (n, n) or b.shape != (k, k) or q.shape != (n, k):
        raise DimensionError(f"incompatible shapes a{a.shape}, b{b.shape}, q{q.shape}")
    if n == 0 or k == 0:
        return np.zeros((n, k), dtype=complex)

    r, u = schur(a, output="complex")
    s, v = schur(b, output="complex")
    f = u.conj().T @ q @ v

    scale = max(np.max(np.abs(np.diag(r))), np.max(np.abs(np.diag(s))), 1.0)
    gap = np.min(np.abs(np.diag(r)[:, None] + np.diag(s)[None, :]))
    if gap <= tol * scale:
        raise DegeneracyError(f"spec(a) and spec(-b) intersect (gap {gap:.3e}); no unique solution")

    y = np.zeros((n, k), dtype=complex)
    eye = np.eye(n)
    for j in range(k):
        rhs = f[:, j] - y[:, :j] @ s[:j, j]
        y[:, j] = solve_triangular(r + s[j, j] * eye, rhs)
    return u @ y @ v.conj().T


def solve_lyapunov(a, q):
    """Solve ``a p + p a^H + q = 0``."""
    a = np.atleast_2d(np.asarray(a, dtype=complex))
    return solve_sylvester(a, a.conj().T, -np.asarray(q, dtype=complex))


def _pbh_margins(a, b):
    a = np.atleast_2d(np.asarray(a, dtype=complex))
    b = np.atleast_2d(np.asarray(b, dtype=complex))
    n = a.shape[0]
    if b.shape[0] != n:
        raise DimensionError(f"b must have {n} rows, got {b.shape}")
    margins = []
    eigs = np.linalg.eigvals(a)
    for lam in eigs:
        sv = np.linalg.svd(np.hstack([lam * np.eye(n) - a, b]), compute_uv=False)
        margins.append(sv[n - 1] / max(sv[0], np.finfo(float).tiny))
    return eigs, np.array(margins)


def pbh_uncontrollable_modes(a, b, tol: float = 1e-8):
    """Eigenvalues ``lam`` of ``a`` at which ``[lam - a, b]`` loses rank.

    Rank loss is declared when the smallest of the ``n`` leading singular
    values falls below ``tol`` times the largest.
    """
    eigs, margins = _pbh_margins(a, b)
    return eigs[margins < tol]


def pbh_margin(a, b) -> float:
    """Smallest relative PBH singular value over the spectrum of ``a``."""
    a = np.atleast_2d(np.asarray(a))
    if a.shape[0] == 0:
        return np.inf
    return float(np.min(_pbh_margins(a, b)[1]))


def is_controllable(a, b, tol: float = 1e-8) -> bool:
    """PBH controllability test of the pair ``(a, b)``."""
    return pbh_margin(a, b) >= tol


def is_observable(c, a, tol: float = 1e-8) -> bool:
    """PBH observability test of the pair ``(c, a)`` (dual of controllability)."""
    a = np.atleast_2d(np.asarray(a, dtype=complex))
    c = np.atleast_2d(np.asarray(c, dtype=complex))
    return is_controllable(a.conj().T, c.conj().T, tol)
