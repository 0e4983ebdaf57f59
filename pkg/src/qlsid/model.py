"""Quantum linear system parameters, state-space matrices and Gaussian inputs.

A system with ``n`` modes and ``m`` field channels is specified by a
Hermitian ``omega_minus``, a symmetric ``omega_plus`` (both ``n x n``) and
coupling blocks ``c_minus``, ``c_plus`` (``m x n``).  The doubled-up drift is
``A = -1/2 C^flat C - i J Omega`` with ``C = delta(c_minus, c_plus)`` and
``Omega = delta(omega_minus, omega_plus)``.

Channel ordering convention: doubled-up field vectors list all annihilators
first, then all creators, so the vacuum covariance is ``diag(1_m, 0_m)``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import eigh

from .dup import (
    ComplexArray,
    as_complex,
    blocks,
    delta,
    flat,
    is_doubled_up,
    jmat,
    project_doubled_up,
)
from .errors import ContractError, DimensionError, InputError, PurityError

#: Relative tolerance for Hermitian / symmetric validation of user input.
VALIDATION_TOL = 1e-12


def _check_close(x, y, what: str, tol: float = VALIDATION_TOL) -> None:
    scale = max(1.0, float(np.max(np.abs(x), initial=0.0)))
    if np.max(np.abs(x - y), initial=0.0) > tol * scale:
        raise InputError(f"{what} (tolerance {tol:g} relative)")


@dataclass(frozen=True)
class QlsParams:
    """Physical parameters of a quantum linear system.

    Matrices are validated at construction and never silently symmetrized.
    """

    omega_minus: ComplexArray
    omega_plus: ComplexArray
    c_minus: ComplexArray
    c_plus: ComplexArray

    def __post_init__(self):
        om = np.atleast_2d(np.asarray(self.omega_minus, dtype=complex))
        op = np.atleast_2d(np.asarray(self.omega_plus, dtype=complex))
        cm = np.atleast_2d(np.asarray(self.c_minus, dtype=complex))
        cp = np.atleast_2d(np.asarray(self.c_plus, dtype=complex))
        n = om.shape[0]
        if om.shape != (n, n) or op.shape != (n, n):
            raise DimensionError(f"omega blocks must be {n}x{n}, got {om.shape} and {op.shape}")
        if cm.shape != cp.shape or cm.shape[1] != n:
            raise DimensionError(f"coupling blocks must be m x {n}, got {cm.shape} and {cp.shape}")
        for name, x in (("omega_minus", om), ("omega_plus", op), ("c_minus", cm), ("c_plus", cp)):
            if not np.all(np.isfinite(x)):
                raise InputError(f"{name} has non-finite entries")
        _check_close(om, om.conj().T, "omega_minus is not Hermitian")
        _check_close(op, op.T, "omega_plus is not symmetric")
        object.__setattr__(self, "omega_minus", om)
        object.__setattr__(self, "omega_plus", op)
        object.__setattr__(self, "c_minus", cm)
        object.__setattr__(self, "c_plus", cp)

    @property
    def modes(self) -> int:
        return self.omega_minus.shape[0]

    @property
    def channels(self) -> int:
        return self.c_minus.shape[0]

    @property
    def omega(self) -> ComplexArray:
        return delta(self.omega_minus, self.omega_plus)

    @property
    def c(self) -> ComplexArray:
        return delta(self.c_minus, self.c_plus)

    @classmethod
    def cavity(cls, kappa: float = 1.0, detuning: float = 0.0) -> "QlsParams":
        """Single-mode empty cavity with decay rate ``kappa`` and detuning."""
        return cls([[detuning]], [[0.0]], [[np.sqrt(kappa)]], [[0.0]])


@dataclass(frozen=True)
class StateSpace:
    """Doubled-up drift ``a`` (``2n x 2n``) and coupling ``c`` (``2m x 2n``)."""

    a: ComplexArray
    c: ComplexArray

    def __post_init__(self):
        a = as_complex(self.a)
        c = as_complex(self.c)
        if a.shape[0] != a.shape[1] or a.shape[0] % 2:
            raise DimensionError(f"a must be square with even size, got {a.shape}")
        if c.shape[1] != a.shape[0] or c.shape[0] % 2:
            raise DimensionError(f"c must be 2m x {a.shape[0]}, got {c.shape}")
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "c", c)

    @property
    def modes(self) -> int:
        return self.a.shape[0] // 2

    @property
    def channels(self) -> int:
        return self.c.shape[0] // 2

    def conjugate(self, t) -> "StateSpace":
        """Return the symplectically equivalent system ``(T A T^flat, C T^flat)``."""
        t = as_complex(t)
        tf = flat(t)
        return StateSpace(t @ self.a @ tf, self.c @ tf)


@dataclass(frozen=True)
class GaussianInput:
    """Stationary Gaussian field state with photon matrices ``n_mat``, ``m_mat``.

    The Ito covariance is ``V = [[N^T + 1, M], [M^dagger, N]]``.
    """

    n_mat: ComplexArray
    m_mat: ComplexArray

    def __post_init__(self):
        n = np.atleast_2d(np.asarray(self.n_mat, dtype=complex))
        m = np.atleast_2d(np.asarray(self.m_mat, dtype=complex))
        k = n.shape[0]
        if n.shape != (k, k) or m.shape != (k, k):
            raise DimensionError(f"n_mat and m_mat must be square and equal size, got {n.shape}, {m.shape}")
        _check_close(n, n.conj().T, "n_mat is not Hermitian")
        _check_close(m, m.T, "m_mat is not symmetric")
        object.__setattr__(self, "n_mat", n)
        object.__setattr__(self, "m_mat", m)
        if np.min(np.linalg.eigvalsh(0.5 * (self.v + self.v.conj().T))) < -1e-9 * max(1.0, np.linalg.norm(self.v)):
            raise InputError("input covariance V(N, M) is not positive semidefinite")

    @property
    def channels(self) -> int:
        return self.n_mat.shape[0]

    @property
    def v(self) -> ComplexArray:
        n, m = self.n_mat, self.m_mat
        return np.block([[n.T + np.eye(self.channels), m], [m.conj().T, n]])

    def purity_defect(self) -> float:
        """Norm of ``conj(M) (N^T + 1)^-1 M - N`` relative to ``max(1, |N|)``."""
        n, m = self.n_mat, self.m_mat
        lhs = m.conj() @ np.linalg.solve(n.T + np.eye(self.channels), m)
        return float(np.linalg.norm(lhs - n) / max(1.0, np.linalg.norm(n)))

    def is_pure(self, tol: float = 1e-9) -> bool:
        return self.purity_defect() <= tol

    @classmethod
    def vacuum(cls, channels: int) -> "GaussianInput":
        z = np.zeros((channels, channels))
        return cls(z, z)

    @classmethod
    def from_symplectic(cls, s) -> "GaussianInput":
        """Pure input with covariance ``S V_vac S^dagger``."""
        s = as_complex(s)
        m = s.shape[0] // 2
        v = s @ vacuum_covariance(m) @ s.conj().T
        n_mat = v[m:, m:]
        m_mat = v[:m, m:]
        return cls(0.5 * (n_mat + n_mat.conj().T), 0.5 * (m_mat + m_mat.T))


def vacuum_covariance(channels: int) -> ComplexArray:
    """``V_vac = diag(1_m, 0_m)``."""
    return np.diag(np.r_[np.ones(channels), np.zeros(channels)]).astype(complex)


def drift_blocks(params: QlsParams) -> tuple[ComplexArray, ComplexArray]:
    """Blocks ``(A_minus, A_plus)`` from the explicit componentwise formula."""
    cm, cp = params.c_minus, params.c_plus
    a_minus = -0.5 * (cm.conj().T @ cm - cp.T @ cp.conj()) - 1j * params.omega_minus
    a_plus = -0.5 * (cm.conj().T @ cp - cp.T @ cm.conj()) - 1j * params.omega_plus
    return a_minus, a_plus


def build_state_space(params: QlsParams) -> StateSpace:
    """Doubled-up ``(A, C)`` with ``A = -1/2 C^flat C - i J Omega``."""
    c = params.c
    a = -0.5 * flat(c) @ c - 1j * jmat(params.modes) @ params.omega
    return StateSpace(a, c)


def realizability_residual(ss: StateSpace) -> float:
    """``|A + A^flat + C^flat C| / max(1, |A|)`` (spectral norms)."""
    res = ss.a + flat(ss.a) + flat(ss.c) @ ss.c
    return float(np.linalg.norm(res, 2) / max(1.0, np.linalg.norm(ss.a, 2)))


def check_realizability(ss: StateSpace, tol: float | None = None) -> float:
    """Return the realizability residual; raise if it exceeds ``tol`` (when given)."""
    r = realizability_residual(ss)
    if tol is not None and r > tol:
        raise ContractError(f"realizability residual {r:.3e} exceeds {tol:.1e}")
    return r


def recover_hamiltonian(ss: StateSpace, tol: float = 1e-9) -> ComplexArray:
    """Invert the drift formula: ``Omega = i J (A + 1/2 C^flat C)``.

    Raises ``ContractError`` if ``ss`` is not realizable or the recovered
    ``Omega`` lacks the Hermitian/symmetric doubled-up structure.
    """
    check_realizability(ss, tol)
    omega = 1j * jmat(ss.modes) @ (ss.a + 0.5 * flat(ss.c) @ ss.c)
    scale = max(1.0, float(np.max(np.abs(omega))))
    if not is_doubled_up(omega, tol):
        raise ContractError("recovered Hamiltonian matrix is not doubled-up")
    om, op = blocks(omega)
    if np.max(np.abs(om - om.conj().T)) > tol * scale or np.max(np.abs(op - op.T)) > tol * scale:
        raise ContractError("recovered Hamiltonian blocks are not Hermitian/symmetric")
    return omega


def params_from_state_space(ss: StateSpace, tol: float = 1e-9) -> QlsParams:
    """Physical parameters of a realizable state space.

    The recovered blocks are checked to ``tol`` and then projected onto the
    exact Hermitian/symmetric structure.
    """
    omega = recover_hamiltonian(ss, tol)
    om, op = blocks(omega)
    if not is_doubled_up(ss.c, tol):
        raise ContractError("coupling matrix is not doubled-up")
    cm, cp = blocks(project_doubled_up(ss.c))
    return QlsParams(0.5 * (om + om.conj().T), 0.5 * (op + op.T), cm, cp)


def _psd_power(h, power):
    w, u = eigh(0.5 * (h + h.conj().T))
    if np.min(w) <= 0:
        raise ContractError("matrix is not positive definite")
    return (u * w**power) @ u.conj().T


def purifying_symplectic(inp: GaussianInput, tol: float = 1e-9) -> ComplexArray:
    """Symplectic ``S`` with ``S V_vac S^dagger = V`` for a pure input.

    ``S = delta((N^T + 1)^{1/2}, M (N + 1)^{-1/2})`` with principal square
    roots of the Hermitian positive definite factors.
    """
    if not inp.is_pure(tol):
        raise PurityError(f"input is not pure (defect {inp.purity_defect():.3e})")
    eye = np.eye(inp.channels)
    s_minus = _psd_power(inp.n_mat.T + eye, 0.5)
    s_plus = inp.m_mat @ _psd_power(inp.n_mat + eye, -0.5)
    return delta(s_minus, s_plus)


def reduce_to_vacuum_input(ss: StateSpace, inp: GaussianInput, tol: float = 1e-9) -> StateSpace:
    """Equivalent system driven by vacuum.

    With ``V = S V_vac S^dagger`` the coupling becomes ``S^flat C`` while the
    Hamiltonian is unchanged; since ``(S^flat C)^flat (S^flat C) = C^flat C``
    the drift is unchanged as well.  The vacuum spectrum of the result equals
    ``S^flat Psi_V (S^flat)^dagger``.
    """
    if inp.channels != ss.channels:
        raise DimensionError(f"input has {inp.channels} channels, system has {ss.channels}")
    s = purifying_symplectic(inp, tol)
    c_new = flat(s) @ ss.c
    a_new = -0.5 * flat(c_new) @ c_new + (ss.a + 0.5 * flat(ss.c) @ ss.c)
    return StateSpace(a_new, c_new)


def restore_input_frame(ss: StateSpace, inp: GaussianInput, tol: float = 1e-9) -> StateSpace:
    """Inverse of :func:`reduce_to_vacuum_input`: coupling ``S C``, same Hamiltonian."""
    if inp.channels != ss.channels:
        raise DimensionError(f"input has {inp.channels} channels, system has {ss.channels}")
    s = purifying_symplectic(inp, tol)
    c_new = s @ ss.c
    a_new = -0.5 * flat(c_new) @ c_new + (ss.a + 0.5 * flat(ss.c) @ ss.c)
    return StateSpace(a_new, c_new)


def reduce_params_to_vacuum(params: QlsParams, inp: GaussianInput, tol: float = 1e-9) -> QlsParams:
    s = purifying_symplectic(inp, tol)
    cm, cp = blocks(flat(s) @ params.c)
    return QlsParams(params.omega_minus, params.omega_plus, cm, cp)


def is_passive(params: QlsParams, tol: float = 1e-12) -> bool:
    """True iff both plus-blocks vanish (relative to the parameter scale)."""
    scale = max(1.0, float(np.max(np.abs(params.omega_minus))), float(np.max(np.abs(params.c_minus))))
    return bool(
        np.max(np.abs(params.c_plus), initial=0.0) <= tol * scale
        and np.max(np.abs(params.omega_plus), initial=0.0) <= tol * scale
    )


def series_product(first: QlsParams, second: QlsParams) -> QlsParams:
    """Cascade ``first`` into ``second`` on the same channels.

    Modes are concatenated ``(first, second)``.  The coupling operators add
    and the Hamiltonian gains the cross term ``(L2^dagger L1 - L1^dagger L2)/(2i)``.
    """
    if first.channels != second.channels:
        raise DimensionError("series product needs matching channel counts")
    n1, n2 = first.modes, second.modes
    c1m, c1p, c2m, c2p = first.c_minus, first.c_plus, second.c_minus, second.c_plus
    om = np.zeros((n1 + n2, n1 + n2), dtype=complex)
    op = np.zeros_like(om)
    om[:n1, :n1] = first.omega_minus
    om[n1:, n1:] = second.omega_minus
    op[:n1, :n1] = first.omega_plus
    op[n1:, n1:] = second.omega_plus

    # Cross terms between mode groups 2 <- 1, written in doubled-up coefficient form.
    x21 = (c2m.conj().T @ c1m - c2p.T @ c1p.conj()) / 2j
    om[n1:, :n1] += x21
    om[:n1, n1:] += x21.conj().T
    y21 = (c2p.T @ c1m.conj() - c2m.conj().T @ c1p) * (0.5j)
    op[n1:, :n1] += y21
    op[:n1, n1:] += y21.T
    return QlsParams(om, op, np.hstack([c1m, c2m]), np.hstack([c1p, c2p]))
