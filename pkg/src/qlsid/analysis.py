"""Frequency-domain and stationary analysis of quantum linear systems."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dup import (
    ComplexArray,
    as_complex,
    doubled_up_deviation,
    flat,
    flat_unitary_deviation,
    is_symplectic,
    project_doubled_up,
)
from .errors import ConsistencyError, DimensionError, NumericalError, SingularityError, StabilityError
from .linalg import is_controllable, is_observable, solve_lyapunov
from .model import StateSpace, vacuum_covariance

#: Stability margin: Hurwitz means every eigenvalue has real part below ``-STABILITY_TOL``.
STABILITY_TOL = 1e-9
#: Relative PBH threshold.
PBH_TOL = 1e-8
#: Relative threshold on ``min eig(P) / max eig(P)`` for a fully mixed stationary state.
GMIN_TOL = 1e-8
#: Distance to ``spec(A)`` below which the resolvent is declared singular.
SINGULAR_TOL = 1e-12


@dataclass(frozen=True)
class TransferSample:
    s: complex
    xi: ComplexArray

    @property
    def minus(self) -> ComplexArray:
        m = self.xi.shape[0] // 2
        return self.xi[:m, :m]

    @property
    def plus(self) -> ComplexArray:
        m = self.xi.shape[0] // 2
        return self.xi[:m, m:]


@dataclass(frozen=True)
class SpectrumSample:
    s: complex
    psi: ComplexArray


@dataclass(frozen=True)
class StationaryCovariance:
    p: ComplexArray
    min_eigenvalue: float
    max_eigenvalue: float
    residual: float

    @property
    def is_fully_mixed(self) -> bool:
        return self.min_eigenvalue > GMIN_TOL * max(self.max_eigenvalue, np.finfo(float).tiny)


def _resolvent_apply(ss: StateSpace, s: complex, rhs):
    n2 = ss.a.shape[0]
    eigs = np.linalg.eigvals(ss.a)
    scale = max(1.0, float(np.max(np.abs(eigs), initial=0.0)))
    if eigs.size and np.min(np.abs(eigs - s)) <= SINGULAR_TOL * scale:
        raise SingularityError(f"s = {s} lies on the spectrum of A")
    return np.linalg.solve(s * np.eye(n2) - ss.a, rhs)


def transfer_matrix(ss: StateSpace, s: complex) -> ComplexArray:
    """``Xi(s) = 1 - C (s - A)^{-1} C^flat``."""
    s = complex(s)
    return np.eye(ss.c.shape[0]) - ss.c @ _resolvent_apply(ss, s, flat(ss.c))


def transfer_at(ss: StateSpace, s: complex) -> TransferSample:
    return TransferSample(complex(s), transfer_matrix(ss, s))


def axis_symplectic_deviation(ss: StateSpace, omega: float) -> tuple[float, float]:
    """Deviations of ``Xi(-i omega)`` from symplecticity on the frequency axis.

    Returns ``(flat-unitary deviation, pairing deviation)``.  On the axis the
    conjugate blocks pair ``omega`` with ``-omega``: the lower blocks of
    ``Xi(-i omega)`` are the conjugates of the upper blocks of ``Xi(i omega)``.
    """
    x = transfer_matrix(ss, -1j * omega)
    y = transfer_matrix(ss, 1j * omega)
    m = ss.channels
    pair = max(
        np.max(np.abs(x[m:, m:] - y[:m, :m].conj())),
        np.max(np.abs(x[m:, :m] - y[:m, m:].conj())),
    ) / max(1.0, float(np.max(np.abs(x))))
    return flat_unitary_deviation(x), float(pair)


def is_symplectic_on_axis(ss: StateSpace, omega: float, tol: float = 1e-10) -> bool:
    return max(axis_symplectic_deviation(ss, omega)) <= tol


def spectrum_matrix(ss: StateSpace, v, s: complex) -> ComplexArray:
    """``Psi_V(s) = Xi(s) V Xi(-conj(s))^dagger``."""
    s = complex(s)
    v = as_complex(v)
    if v.shape != (ss.c.shape[0],) * 2:
        raise DimensionError(f"covariance must be {ss.c.shape[0]}x{ss.c.shape[0]}, got {v.shape}")
    return transfer_matrix(ss, s) @ v @ transfer_matrix(ss, -np.conj(s)).conj().T


def spectrum_at(ss: StateSpace, v, s: complex) -> SpectrumSample:
    return SpectrumSample(complex(s), spectrum_matrix(ss, v, s))


def transfer_sweep(ss: StateSpace, omegas) -> ComplexArray:
    """Stack of ``Xi(-i omega)`` over ``omegas``."""
    return np.array([transfer_matrix(ss, -1j * w) for w in np.asarray(omegas, dtype=float)])


def spectrum_sweep(ss: StateSpace, v, omegas) -> ComplexArray:
    return np.array([spectrum_matrix(ss, v, -1j * w) for w in np.asarray(omegas, dtype=float)])


def spectral_abscissa(ss: StateSpace) -> float:
    return float(np.max(np.linalg.eigvals(ss.a).real))


def is_hurwitz(ss: StateSpace, tol: float = STABILITY_TOL) -> bool:
    return spectral_abscissa(ss) < -tol


def is_minimal(ss: StateSpace, tol: float = PBH_TOL) -> bool:
    """Controllability of ``(A, C^flat)`` and observability of ``(C, A)``.

    The two verdicts coincide for quantum linear systems; a disagreement is
    reported as a ``ConsistencyError``.
    """
    ctrl = is_controllable(ss.a, flat(ss.c), tol)
    obs = is_observable(ss.c, ss.a, tol)
    if ctrl != obs:
        raise ConsistencyError(f"controllability ({ctrl}) and observability ({obs}) disagree")
    return ctrl


def stationary_covariance(ss: StateSpace) -> StationaryCovariance:
    """Solve ``A P + P A^dagger + C^flat V_vac (C^flat)^dagger = 0``."""
    if not is_hurwitz(ss):
        raise StabilityError("stationary covariance requires a Hurwitz system")
    cf = flat(ss.c)
    q = cf @ vacuum_covariance(ss.channels) @ cf.conj().T
    p = solve_lyapunov(ss.a, q)
    p = 0.5 * (p + p.conj().T)
    res = ss.a @ p + p @ ss.a.conj().T + q
    pnorm = max(np.linalg.norm(p, 2), np.finfo(float).tiny)
    ev = np.linalg.eigvalsh(p)
    return StationaryCovariance(p, float(ev[0]), float(ev[-1]), float(np.linalg.norm(res, 2) / pnorm))


@dataclass(frozen=True)
class GlobalMinimalityReport:
    by_covariance: bool
    by_controllability: bool
    by_observability: bool
    min_eigenvalue: float
    max_eigenvalue: float

    @property
    def globally_minimal(self) -> bool:
        return self.by_covariance

    def __bool__(self) -> bool:
        return self.by_covariance


def is_globally_minimal(ss: StateSpace, tol: float = GMIN_TOL, pbh_tol: float = PBH_TOL) -> GlobalMinimalityReport:
    """Three equivalent tests of global minimality for vacuum input.

    * the stationary covariance is fully mixed, ``min eig(P) > tol max eig(P)``;
    * ``(A, C^flat V_vac)`` is controllable;
    * ``(V_vac C, A^flat)`` is observable.

    Raises ``ConsistencyError`` if they disagree.
    """
    cov = stationary_covariance(ss)
    vv = vacuum_covariance(ss.channels)
    by_cov = cov.min_eigenvalue > tol * max(cov.max_eigenvalue, np.finfo(float).tiny)
    by_ctrl = is_controllable(ss.a, flat(ss.c) @ vv, pbh_tol)
    by_obs = is_observable(vv @ ss.c, flat(ss.a), pbh_tol)
    report = GlobalMinimalityReport(by_cov, by_ctrl, by_obs, cov.min_eigenvalue, cov.max_eigenvalue)
    if not by_cov == by_ctrl == by_obs:
        raise ConsistencyError(f"global-minimality criteria disagree: {report}")
    return report


def probe_frequencies(ss: StateSpace, points: int = 50) -> np.ndarray:
    """Log-spaced ``omega`` in ``[1e-2, 1e2]`` scaled by ``|A|``."""
    scale = max(np.linalg.norm(ss.a, 2), 1e-12)
    return np.logspace(-2, 2, points) * scale


def transfer_distance(ss1: StateSpace, ss2: StateSpace, omegas) -> float:
    """Max over ``omegas`` of ``|Xi_1 - Xi_2|_2 / max(1, |Xi_1|_2)``."""
    worst = 0.0
    for w in omegas:
        x1 = transfer_matrix(ss1, -1j * w)
        x2 = transfer_matrix(ss2, -1j * w)
        worst = max(worst, np.linalg.norm(x1 - x2, 2) / max(1.0, np.linalg.norm(x1, 2)))
    return float(worst)


@dataclass(frozen=True)
class EquivalenceResult:
    t: ComplexArray
    transfer_distance: float
    relation_residual: float
    symplectic_deviation: float


def solve_similarity(ss1: StateSpace, ss2: StateSpace) -> tuple[ComplexArray, float, int]:
    """Least-squares ``T`` with ``A2 T = T A1`` and ``C2 T = C1``.

    Returns ``(T, relative residual, rank)`` of the stacked Kronecker system.
    """
    a1, c1, a2, c2 = ss1.a, ss1.c, ss2.a, ss2.c
    k = a1.shape[0]
    eye = np.eye(k)
    # Column-major vec: vec(A2 T - T A1) = (I kron A2 - A1^T kron I) vec(T).
    m_a = np.kron(eye, a2) - np.kron(a1.T, eye)
    m_c = np.kron(eye, c2)
    lhs = np.vstack([m_a, m_c])
    rhs = np.concatenate([np.zeros(k * k, dtype=complex), c1.flatten(order="F")])
    sol, _, rank, _ = np.linalg.lstsq(lhs, rhs, rcond=None)
    t = sol.reshape((k, k), order="F")
    res = np.linalg.norm(lhs @ sol - rhs) / max(np.linalg.norm(rhs), np.finfo(float).tiny)
    return t, float(res), int(rank)


def find_symplectic_between(
    ss1: StateSpace,
    ss2: StateSpace,
    transfer_tol: float = 1e-7,
    relation_tol: float = 1e-8,
    points: int = 50,
) -> EquivalenceResult | None:
    """Symplectic ``T`` with ``A2 = T A1 T^flat`` and ``C2 = C1 T^flat``.

    Returns ``None`` when the transfer functions differ on the probe grid.
    Both systems must be minimal, so the solution is unique.

    Raises
    ------
    NumericalError
        Transfer functions agree but no verified symplectic solution exists.
    """
    if ss1.a.shape != ss2.a.shape or ss1.c.shape != ss2.c.shape:
        return None
    dist = transfer_distance(ss1, ss2, probe_frequencies(ss1, points))
    if dist > transfer_tol:
        return None
    k = ss1.a.shape[0]
    t, res, rank = solve_similarity(ss1, ss2)
    if rank < k * k:
        raise NumericalError(f"similarity system is rank deficient ({rank} < {k * k}); are both systems minimal?")
    scale = max(1.0, np.linalg.norm(t, 2))
    rel = max(
        np.linalg.norm(ss2.a @ t - t @ ss1.a, 2) / (max(1.0, np.linalg.norm(ss1.a, 2)) * scale),
        np.linalg.norm(ss2.c @ t - ss1.c, 2) / max(1.0, np.linalg.norm(ss1.c, 2)),
    )
    sdev = max(flat_unitary_deviation(t), doubled_up_deviation(t))
    if rel > relation_tol or not is_symplectic(t, max(relation_tol, 1e-9)):
        raise NumericalError(
            f"transfer functions agree (distance {dist:.2e}) but similarity fails verification "
            f"(relation residual {rel:.2e}, symplectic deviation {sdev:.2e})"
        )
    return EquivalenceResult(project_doubled_up(t), dist, float(rel), float(sdev))
