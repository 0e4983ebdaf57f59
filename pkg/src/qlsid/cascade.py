"""Classical realizations of the power spectrum ``Psi(s) J``.

For vacuum input the spectrum times ``J`` is the transfer function of an
unstable system ``(-A^flat, -C^flat, -V_vac C, V_vac)`` cascaded into the
stable system ``(A, -C^flat V_vac, C, V_vac)``.  The block lower triangular
drift of that cascade, and its diagonal (Gilbert) counterpart, are the
starting points of identification.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .analysis import is_globally_minimal, is_hurwitz, spectrum_matrix
from .dup import ComplexArray, as_complex, flat, jmat, project_doubled_up, sigma
from .errors import (
    ConsistencyError,
    ContractError,
    DimensionError,
    GenericityError,
    GlobalMinimalityError,
    ResidueRankError,
    StabilityError,
    StructureError,
)
from .linalg import is_controllable, is_observable
from .model import StateSpace, vacuum_covariance


@dataclass(frozen=True)
class Realization:
    """Classical state space ``d + c (s - a)^{-1} b``."""

    a: ComplexArray
    b: ComplexArray
    c: ComplexArray
    d: ComplexArray

    def __post_init__(self):
        for name in ("a", "b", "c", "d"):
            object.__setattr__(self, name, np.atleast_2d(np.asarray(getattr(self, name), dtype=complex)))
        k = self.a.shape[0]
        if self.a.shape != (k, k) or self.b.shape[0] != k or self.c.shape[1] != k:
            raise DimensionError(f"inconsistent realization shapes {self.a.shape} {self.b.shape} {self.c.shape}")
        if self.d.shape != (self.c.shape[0], self.b.shape[1]):
            raise DimensionError(f"d has shape {self.d.shape}, expected {(self.c.shape[0], self.b.shape[1])}")

    @property
    def order(self) -> int:
        return self.a.shape[0]

    def evaluate(self, s: complex) -> ComplexArray:
        if self.order == 0:
            return self.d.copy()
        return self.d + self.c @ np.linalg.solve(s * np.eye(self.order) - self.a, self.b)

    def similar(self, t) -> "Realization":
        """``(T a T^-1, T b, c T^-1, d)``."""
        t = as_complex(t)
        ti = np.linalg.inv(t)
        return Realization(t @ self.a @ ti, t @ self.b, self.c @ ti, self.d)

    def is_minimal(self, tol: float = 1e-8) -> bool:
        if self.order == 0:
            return True
        return is_controllable(self.a, self.b, tol) and is_observable(self.c, self.a, tol)


# The cascade is a Realization whose drift is proper LBT by construction.
CascadeRealization = Realization


def build_cascade(ss: StateSpace) -> Realization:
    """Cascade realization of ``Psi(s) J`` for vacuum input."""
    if not is_hurwitz(ss):
        raise StabilityError("cascade realization requires a Hurwitz system")
    a, c = ss.a, ss.c
    vv = vacuum_covariance(ss.channels)
    cf = flat(c)
    zero = np.zeros_like(a)
    a_t = np.block([[-flat(a), zero], [cf @ vv @ c, a]])
    b_t = np.vstack([-cf, -cf @ vv])
    c_t = np.hstack([-vv @ c, c])
    return Realization(a_t, b_t, c_t, vv)


def spectrum_times_j(ss: StateSpace, s: complex) -> ComplexArray:
    """``Psi(s) J`` for vacuum input evaluated from the transfer function."""
    return spectrum_matrix(ss, vacuum_covariance(ss.channels), s) @ jmat(ss.channels)


def _split(m) -> tuple[int, ComplexArray, ComplexArray, ComplexArray, ComplexArray]:
    m = as_complex(m)
    k = m.shape[0]
    if m.shape != (k, k) or k % 2:
        raise DimensionError(f"expected a square matrix of even size, got {m.shape}")
    h = k // 2
    return h, m[:h, :h], m[:h, h:], m[h:, :h], m[h:, h:]


def is_proper_lbt(m, tol: float = 1e-9) -> bool:
    """Block lower triangular with antistable upper-left and stable lower-right blocks.

    ``tol`` bounds the upper-right block relative to ``max(1, |m|)`` and is the
    margin required of the real parts of both diagonal blocks' eigenvalues.
    """
    _, ul, ur, _, lr = _split(m)
    if np.linalg.norm(ur, 2) > tol * max(1.0, np.linalg.norm(m, 2)):
        return False
    if np.max(np.linalg.eigvals(lr).real) >= -tol:
        return False
    return bool(np.min(np.linalg.eigvals(ul).real) > tol)


def upper_right_norm(t) -> float:
    """``|upper-right block| / |t|``."""
    _, _, ur, _, _ = _split(t)
    return float(np.linalg.norm(ur, 2) / max(np.linalg.norm(t, 2), np.finfo(float).tiny))


def check_lbt_similarity(a1, a2, t, tol: float = 1e-8) -> bool:
    """For ``a2 = t a1 t^-1`` with both proper LBT, report whether ``t`` is LBT.

    Raises ``ContractError`` when the similarity itself does not hold.
    """
    a1, a2, t = as_complex(a1), as_complex(a2), as_complex(t)
    resid = np.linalg.norm(a2 @ t - t @ a1, 2)
    scale = max(1.0, np.linalg.norm(a1, 2), np.linalg.norm(a2, 2)) * max(1.0, np.linalg.norm(t, 2))
    if resid > tol * scale:
        raise ContractError(f"a2 != t a1 t^-1 (residual {resid / scale:.2e})")
    return upper_right_norm(t) <= tol


@dataclass(frozen=True)
class CascadeMinimalityReport:
    cascade_minimal: bool
    globally_minimal: bool


def cascade_minimality_check(ss: StateSpace, pbh_tol: float = 1e-8, gmin_tol: float = 1e-8) -> CascadeMinimalityReport:
    """Compare minimality of the cascade with global minimality of ``ss``.

    The two verdicts must coincide; a mismatch raises ``ConsistencyError``.
    """
    casc = build_cascade(ss)
    cm = casc.is_minimal(pbh_tol)
    gm = is_globally_minimal(ss, gmin_tol, pbh_tol).globally_minimal
    if cm != gm:
        raise ConsistencyError(f"cascade minimality ({cm}) disagrees with global minimality ({gm})")
    return CascadeMinimalityReport(cm, gm)


@dataclass(frozen=True)
class GilbertRealization:
    """Diagonal realization of ``Psi(s) J`` with doubled-up ``B1`` and ``C2``.

    State ordering: ``-conj(lam_i)``, ``-lam_i`` (antistable half), then
    ``lam_i``, ``conj(lam_i)`` (stable half), ``i = 1..n``.
    """

    lambdas: ComplexArray
    b1: ComplexArray
    b2: ComplexArray
    c1: ComplexArray
    c2: ComplexArray
    d: ComplexArray
    residues: ComplexArray = field(repr=False)
    raw_poles: ComplexArray = field(repr=False)

    @property
    def modes(self) -> int:
        return self.lambdas.size

    @property
    def channels(self) -> int:
        return self.d.shape[0] // 2

    @property
    def a0(self) -> ComplexArray:
        """Stable diagonal block ``diag(lam, conj(lam))``."""
        return np.diag(np.r_[self.lambdas, self.lambdas.conj()])

    @property
    def poles(self) -> ComplexArray:
        lam = self.lambdas
        return np.r_[-lam.conj(), -lam, lam, lam.conj()]

    @property
    def a0_tilde(self) -> ComplexArray:
        return np.diag(self.poles)

    @property
    def b0(self) -> ComplexArray:
        return np.vstack([self.b1, self.b2])

    @property
    def c0(self) -> ComplexArray:
        return np.hstack([self.c1, self.c2])

    def realization(self) -> Realization:
        return Realization(self.a0_tilde, self.b0, self.c0, self.d)

    def evaluate(self, s: complex) -> ComplexArray:
        p = self.poles
        return self.d + (self.c0 / (s - p)) @ self.b0


def _residues(source: Realization):
    poles, right = np.linalg.eig(source.a)
    left = np.linalg.inv(right)
    cr = source.c @ right
    lb = left @ source.b
    res = np.einsum("ik,kj->kij", cr, lb)
    return poles, res


def _match(target: complex, candidates: np.ndarray, used: set, tol: float) -> int:
    d = np.abs(candidates - target)
    for k in used:
        d[k] = np.inf
    k = int(np.argmin(d))
    if d[k] > tol:
        raise StructureError(f"no pole near {target:.6g} (closest at distance {d[k]:.2e})")
    return k


def _rank_one(r, rank_tol: float, residue_tol: float, scale: float):
    u, sv, vh = np.linalg.svd(r)
    if sv[0] <= residue_tol * scale:
        raise GlobalMinimalityError("vanishing residue: the realization is not minimal")
    if sv.size > 1 and sv[1] > rank_tol * sv[0]:
        raise ResidueRankError(f"residue has rank above one (sigma2/sigma1 = {sv[1] / sv[0]:.2e})")
    return u[:, 0] * sv[0], vh[0, :]


def gilbert_realization(
    source: Realization,
    pair_tol: float = 1e-7,
    rank_tol: float = 1e-8,
    genericity_tol: float = 1e-6,
) -> GilbertRealization:
    """Gilbert realization of ``Psi(s) J`` from a minimal classical realization.

    Poles are the eigenvalues of ``source.a``; residues are
    ``(c e_k)(w_k b)`` for right/left eigenvectors with ``w_k e_k = 1`` and are
    split into rank-one factors by SVD.  Rows of ``B1`` and columns of ``C2``
    are then rescaled in pairs (with compensating scalings of ``C1`` columns
    and ``B2`` rows) so that both are doubled-up.

    Raises
    ------
    GenericityError
        Poles are real or repeated.
    StructureError
        Poles do not form the set ``{-conj(lam), -lam, lam, conj(lam)}`` or
        the residue factors cannot be paired.
    ResidueRankError
        A residue has rank above one.
    GlobalMinimalityError
        A residue vanishes (the source is not minimal).
    """
    k = source.order
    p2 = source.d.shape[0]
    if p2 % 2 or source.d.shape != (p2, p2):
        raise DimensionError(f"feedthrough must be square of even size, got {source.d.shape}")
    m = p2 // 2
    if k == 0:
        raise GlobalMinimalityError("the spectrum is constant; a zero-mode system reproduces it")
    if k % 4:
        raise StructureError(f"order {k} is not a multiple of 4")
    n = k // 4

    poles, res = _residues(source)
    scale = max(1.0, float(np.max(np.abs(poles))))
    if np.min(np.abs(poles.imag)) <= genericity_tol * scale:
        raise GenericityError("spectrum has real poles; Gilbert construction needs non-real poles")
    gaps = np.abs(poles[:, None] - poles[None, :]) + np.diag(np.full(k, np.inf))
    if np.min(gaps) <= genericity_tol * scale:
        raise GenericityError(f"spectrum has repeated poles (separation {np.min(gaps):.2e})")

    stable = np.flatnonzero(poles.real < 0)
    if stable.size != 2 * n:
        raise StructureError(f"expected {2 * n} stable poles, found {stable.size}")
    upper = [i for i in stable if poles[i].imag > 0]
    if len(upper) != n:
        raise StructureError("stable poles are not closed under conjugation")
    upper.sort(key=lambda i: (poles[i].imag, poles[i].real))
    lam = poles[upper]

    tol = pair_tol * scale
    used: set = set(upper)
    idx_conj, idx_neg_conj, idx_neg = [], [], []
    for lv in lam:
        for target, bucket in ((lv.conjugate(), idx_conj), (-lv.conjugate(), idx_neg_conj), (-lv, idx_neg)):
            j = _match(target, poles, used, tol)
            used.add(j)
            bucket.append(j)
    order = idx_neg_conj + idx_neg + upper + idx_conj

    res_scale = max(float(np.max(np.abs(res))), np.finfo(float).tiny)
    c_cols, b_rows = [], []
    for j in order:
        cf, bf = _rank_one(res[j], rank_tol, 1e-10, res_scale)
        c_cols.append(cf)
        b_rows.append(bf)
    c0 = np.array(c_cols).T
    b0 = np.array(b_rows)

    sig = sigma(m)
    b1, b2 = b0[: 2 * n].copy(), b0[2 * n :].copy()
    c1, c2 = c0[:, : 2 * n].copy(), c0[:, 2 * n :].copy()
    for i in range(n):
        # Rows i and n+i of B1 (poles -conj(lam_i), -lam_i) must be conj-swap partners.
        target = b1[i].conj() @ sig
        coef = _pair_coefficient(b1[n + i], target, pair_tol, "B1 rows")
        b1[n + i] /= coef
        c1[:, n + i] *= coef
        # Columns i and n+i of C2 (poles lam_i, conj(lam_i)).
        target = sig @ c2[:, i].conj()
        coef = _pair_coefficient(c2[:, n + i], target, pair_tol, "C2 columns")
        c2[:, n + i] /= coef
        b2[n + i] *= coef

    # Pairing leaves rounding-level asymmetry; fix the structure exactly.
    return GilbertRealization(
        lambdas=lam,
        b1=project_doubled_up(b1),
        b2=b2,
        c1=c1,
        c2=project_doubled_up(c2),
        d=source.d.copy(),
        residues=res[order],
        raw_poles=poles[order],
    )


def _pair_coefficient(vec, target, pair_tol: float, what: str) -> complex:
    """Least-squares ``c`` with ``vec ~ c target``; checks the fit."""
    denom = np.vdot(target, target)
    if abs(denom) == 0:
        raise StructureError(f"{what}: zero factor")
    coef = np.vdot(target, vec) / denom
    misfit = np.linalg.norm(vec - coef * target) / max(np.linalg.norm(vec), np.finfo(float).tiny)
    if misfit > max(1e-6, 10 * pair_tol):
        raise StructureError(f"{what}: no constant links the pair (misfit {misfit:.2e})")
    return complex(coef)

