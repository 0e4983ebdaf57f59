"""Doubled-up linear algebra.

Vectors of annihilation operators are stacked with their adjoints,
``(a; a*)``, so that matrices acting on them take the block form::

    delta(X_minus, X_plus) = [[X_minus,       X_plus      ],
                              [conj(X_plus),  conj(X_minus)]]

The indefinite metric ``J_k = diag(1_k, -1_k)`` defines the flat adjoint
``Z^flat = J_m Z^dagger J_n`` for a ``2n x 2m`` matrix ``Z``.  A matrix is
flat-unitary when ``S^flat S = S S^flat = 1`` and symplectic when it is
additionally doubled-up.
"""

from __future__ import annotations

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy.linalg import expm

from .errors import ContractError, DimensionError, InfeasibleError

ComplexArray = NDArray[np.complex128]

#: Default relative tolerance for structure tests.
STRUCTURE_TOL = 1e-9


def as_complex(z: ArrayLike) -> ComplexArray:
    """Return ``z`` as a 2-D complex array with finite entries."""
    z = np.atleast_2d(np.asarray(z, dtype=complex))
    if z.ndim != 2:
        raise DimensionError(f"expected a matrix, got array of shape {z.shape}")
    if not np.all(np.isfinite(z)):
        raise ContractError("matrix has non-finite entries")
    return z


def _half(k: int, what: str) -> int:
    if k % 2:
        raise DimensionError(f"{what} dimension {k} is odd; doubled-up matrices have even dimensions")
    return k // 2


def jmat(k: int) -> ComplexArray:
    """Return ``J_k = diag(1_k, -1_k)`` of size ``2k x 2k``."""
    return np.diag(np.r_[np.ones(k), -np.ones(k)]).astype(complex)


def sigma(k: int) -> ComplexArray:
    """Return the block swap ``[[0, 1_k], [1_k, 0]]``."""
    z = np.zeros((k, k))
    e = np.eye(k)
    return np.block([[z, e], [e, z]]).astype(complex)


def flat(z: ArrayLike) -> ComplexArray:
    """Flat adjoint ``J_m Z^dagger J_n`` of a ``2n x 2m`` matrix."""
    z = as_complex(z)
    n = _half(z.shape[0], "row")
    m = _half(z.shape[1], "column")
    # Multiplying by J just flips the sign of the second half of rows/columns.
    zd = z.conj().T.copy()
    zd[m:, :] *= -1
    zd[:, n:] *= -1
    return zd


def delta(minus: ArrayLike, plus: ArrayLike) -> ComplexArray:
    """Assemble ``delta(X_minus, X_plus)`` from two ``p x q`` blocks."""
    xm = np.atleast_2d(np.asarray(minus, dtype=complex))
    xp = np.atleast_2d(np.asarray(plus, dtype=complex))
    if xm.shape != xp.shape:
        raise DimensionError(f"block shapes differ: {xm.shape} vs {xp.shape}")
    return np.block([[xm, xp], [xp.conj(), xm.conj()]])


def blocks(z: ArrayLike) -> tuple[ComplexArray, ComplexArray]:
    """Return the top ``(minus, plus)`` blocks of a ``2p x 2q`` matrix."""
    z = as_complex(z)
    p = _half(z.shape[0], "row")
    q = _half(z.shape[1], "column")
    return z[:p, :q].copy(), z[:p, q:].copy()


def doubled_up_deviation(z: ArrayLike) -> float:
    """Max entrywise deviation from doubled-up structure, relative to ``max(1, max|z|)``."""
    z = as_complex(z)
    p, q = z.shape[0] // 2, z.shape[1] // 2
    dev = max(
        np.max(np.abs(z[:p, :q] - z[p:, q:].conj()), initial=0.0),
        np.max(np.abs(z[:p, q:] - z[p:, :q].conj()), initial=0.0),
    )
    return float(dev / max(1.0, np.max(np.abs(z), initial=0.0)))


def is_doubled_up(z: ArrayLike, tol: float = STRUCTURE_TOL) -> bool:
    z = np.atleast_2d(np.asarray(z, dtype=complex))
    if z.ndim != 2 or z.shape[0] % 2 or z.shape[1] % 2:
        return False
    return doubled_up_deviation(z) <= tol


def project_doubled_up(z: ArrayLike) -> ComplexArray:
    """Nearest doubled-up matrix (in Frobenius norm) to ``z``."""
    z = as_complex(z)
    p, q = _half(z.shape[0], "row"), _half(z.shape[1], "column")
    xm = 0.5 * (z[:p, :q] + z[p:, q:].conj())
    xp = 0.5 * (z[:p, q:] + z[p:, :q].conj())
    return delta(xm, xp)


def flat_unitary_deviation(s: ArrayLike) -> float:
    """``max(|S^flat S - 1|, |S S^flat - 1|)`` relative to ``max(1, |S|_2^2)``."""
    s = as_complex(s)
    if s.shape[0] != s.shape[1]:
        raise DimensionError(f"matrix must be square, got {s.shape}")
    sf = flat(s)
    eye = np.eye(s.shape[0])
    dev = max(np.max(np.abs(sf @ s - eye)), np.max(np.abs(s @ sf - eye)))
    return float(dev / max(1.0, np.linalg.norm(s, 2) ** 2))


def is_flat_unitary(s: ArrayLike, tol: float = STRUCTURE_TOL) -> bool:
    s = np.atleast_2d(np.asarray(s, dtype=complex))
    if s.ndim != 2 or s.shape[0] != s.shape[1] or s.shape[0] % 2:
        return False
    return flat_unitary_deviation(s) <= tol


def is_symplectic(s: ArrayLike, tol: float = STRUCTURE_TOL) -> bool:
    """True iff ``s`` is doubled-up and flat-unitary within ``tol``."""
    return is_flat_unitary(s, tol) and is_doubled_up(s, tol)


def is_flat_hermitian(w: ArrayLike, tol: float = STRUCTURE_TOL) -> bool:
    w = as_complex(w)
    if w.shape[0] != w.shape[1] or w.shape[0] % 2:
        return False
    return float(np.max(np.abs(flat(w) - w))) <= tol * max(1.0, float(np.max(np.abs(w))))


def flat_factorize(w: ArrayLike, tol: float = STRUCTURE_TOL, singular_tol: float | None = None) -> ComplexArray:
    """Find a doubled-up ``T`` with ``T^flat T = W``.

    ``W`` must be flat-Hermitian and doubled-up, so that ``J W`` is Hermitian
    with eigenpairs ``(d, v)`` and ``(-d, sigma conj(v))``.  Orthonormal
    eigenvectors of the positive part, scaled by ``sqrt(d)``, determine the
    negative part by the conjugate swap, and stacking both halves gives
    ``T^dagger`` in doubled-up form.

    The factor is unique up to left multiplication by a symplectic matrix.
    ``tol`` bounds the structural deviations; ``singular_tol`` (default
    ``tol``) is the relative eigenvalue size of ``J W`` treated as zero.

    Raises
    ------
    ContractError
        ``W`` is not flat-Hermitian or not doubled-up within ``tol``.
    InfeasibleError
        ``J W`` does not have signature ``(p, p)`` or ``W`` is singular.
    """
    w = as_complex(w)
    if w.shape[0] != w.shape[1]:
        raise DimensionError(f"W must be square, got {w.shape}")
    p = _half(w.shape[0], "row")
    if not is_flat_hermitian(w, tol):
        raise ContractError("W is not flat-Hermitian within tolerance")
    if not is_doubled_up(w, tol):
        raise ContractError("W is not doubled-up within tolerance")

    jw = jmat(p) @ w
    jw = 0.5 * (jw + jw.conj().T)
    d, u = np.linalg.eigh(jw)
    scale = max(float(np.max(np.abs(d))), np.finfo(float).tiny)
    if np.min(np.abs(d)) <= (tol if singular_tol is None else singular_tol) * scale:
        raise InfeasibleError("W is singular; no invertible flat factor exists")
    n_pos = int(np.sum(d > 0))
    if n_pos != p:
        raise InfeasibleError(f"J W has signature ({n_pos}, {2 * p - n_pos}); expected ({p}, {p})")

    pos = d > 0
    v = u[:, pos] * np.sqrt(d[pos])
    m = np.hstack([v, sigma(p) @ v.conj()])
    return m.conj().T


def random_symplectic(m: int, rng: np.random.Generator, scale: float = 0.5) -> ComplexArray:
    """Random ``2m x 2m`` symplectic matrix ``expm(K)``.

    ``K = delta(i H, G)`` with ``H`` Hermitian and ``G`` complex symmetric lies
    in the Lie algebra (``K^flat = -K``).  ``scale`` bounds the generator size
    and hence the condition number.
    """
    h = rng.normal(size=(m, m)) + 1j * rng.normal(size=(m, m))
    h = 0.5 * (h + h.conj().T)
    g = rng.normal(size=(m, m)) + 1j * rng.normal(size=(m, m))
    g = 0.5 * (g + g.T)
    k = delta(1j * h, g) * (scale / np.sqrt(max(m, 1)))
    return project_doubled_up(expm(k))
