"""Physical realization of a power spectrum from its Gilbert realization.

With the Gilbert data ``(A0, B1, B2, C1, C2)`` the physical cascade is
reached by a block lower triangular similarity ``[[T1, 0], [T2, T3]]``.
Realizability of ``(A, C) = (T3 A0 T3^-1, C2 T3^-1)`` fixes the gram
``T3^flat T3`` through a Sylvester equation, and similarly for
``(T1^flat T1)^-1`` through ``A^flat = T1 A0^flat T1^-1``, ``C^flat = -T1 B1``.
Each gram is then flat-factorized.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .analysis import find_symplectic_between, probe_frequencies
from .cascade import GilbertRealization, Realization, build_cascade, gilbert_realization, spectrum_times_j
from .dup import ComplexArray, as_complex, flat, flat_factorize, is_doubled_up, is_flat_hermitian, project_doubled_up
from .errors import (
    DegeneracyError,
    GlobalMinimalityError,
    InconsistentInputError,
    InfeasibleError,
    NumericalError,
)
from .linalg import solve_sylvester
from .model import StateSpace, realizability_residual, vacuum_covariance

#: Relative singular-value threshold below which a gram is declared singular.
GRAM_TOL = 1e-10


def _gram_residual(w, a0, q) -> float:
    r = w @ a0 + flat(a0) @ w + q
    return float(np.linalg.norm(r, 2) / max(np.linalg.norm(w, 2), np.finfo(float).tiny))


def solve_t3_gram(g: GilbertRealization) -> ComplexArray:
    """``W3 = T3^flat T3`` from ``W3 A0 + A0^flat W3 + C2^flat C2 = 0``."""
    a0 = g.a0
    return solve_sylvester(flat(a0), a0, -flat(g.c2) @ g.c2)


def solve_t1_gram(g: GilbertRealization) -> ComplexArray:
    """``(T1^flat T1)^-1`` from ``A0^flat X + X A0 + B1 B1^flat = 0``."""
    a0 = g.a0
    return solve_sylvester(flat(a0), a0, -g.b1 @ flat(g.b1))


def _min_rel_sv(w) -> float:
    sv = np.linalg.svd(w, compute_uv=False)
    if sv[0] == 0:
        return 0.0
    return float(sv[-1] / sv[0])


@dataclass(frozen=True)
class IdentificationResult:
    """Reconstructed system and diagnostics.

    ``system`` comes from the ``T3`` gram and is the canonical answer;
    ``alt_system`` comes from the ``T1`` gram.  ``relating_symplectic`` is
    ``S`` with ``system = (S A_alt S^flat, C_alt S^flat)``.
    """

    system: StateSpace
    alt_system: StateSpace
    t1: ComplexArray
    t3: ComplexArray
    relating_symplectic: ComplexArray
    residuals: dict = field(default_factory=dict)
    t2: ComplexArray | None = None


@dataclass(frozen=True)
class Tolerances:
    """Thresholds used along the identification pipeline.

    The defaults suit exact spectra.  :meth:`for_noise` loosens the
    structure-dependent ones for spectra fitted from noisy data.
    """

    pair: float = 1e-7
    rank: float = 1e-8
    genericity: float = 1e-6
    gram: float = GRAM_TOL
    structure: float = 1e-8
    realizability: float = 1e-8
    inconsistent: float = 1e-6
    transfer: float = 1e-7
    relation: float = 1e-8
    t2: float = 1e-7

    @classmethod
    def for_noise(cls, level: float) -> "Tolerances":
        """Tolerances for data with relative error ``level``."""
        loose = max(1e-7, 10.0 * level)
        return cls(
            pair=loose, rank=1e-8, structure=loose, transfer=loose, relation=loose, t2=loose
        )

    def gilbert_kwargs(self) -> dict:
        return {"pair_tol": self.pair, "rank_tol": self.rank, "genericity_tol": self.genericity}


def reconstruct(g: GilbertRealization, tol: Tolerances | None = None) -> IdentificationResult:
    """Physical ``(A, C)`` realizing the spectrum encoded by ``g``.

    Raises
    ------
    GlobalMinimalityError
        A gram is singular: the spectrum has a smaller realization.
    InconsistentInputError
        A reconstruction violates realizability beyond ``inconsistent_tol``.
    NumericalError
        The two reconstructions cannot be related by a verified symplectic.
    """
    tol = tol or Tolerances()
    a0 = g.a0
    w3 = solve_t3_gram(g)
    w1_inv = solve_t1_gram(g)
    gram_sv = {"w3": _min_rel_sv(w3), "w1_inv": _min_rel_sv(w1_inv)}
    for name, sv in gram_sv.items():
        if sv <= tol.gram:
            raise GlobalMinimalityError(f"gram {name} is singular (relative sigma_min {sv:.2e})")

    w3 = _structured(w3, tol.structure, "W3")
    w1 = _structured(np.linalg.inv(w1_inv), tol.structure, "W1")
    try:
        t3 = flat_factorize(w3, tol.structure, tol.gram)
        t1 = flat_factorize(w1, tol.structure, tol.gram)
    except InfeasibleError as exc:
        raise InconsistentInputError(f"gram cannot be flat-factorized: {exc}") from exc

    t3_inv = np.linalg.inv(t3)
    system = StateSpace(project_doubled_up(t3 @ a0 @ t3_inv), project_doubled_up(g.c2 @ t3_inv))
    a_alt_flat = t1 @ flat(a0) @ np.linalg.inv(t1)
    alt_system = StateSpace(project_doubled_up(flat(a_alt_flat)), project_doubled_up(flat(-t1 @ g.b1)))

    residuals = {
        "gram_w3": _gram_residual(w3, a0, flat(g.c2) @ g.c2),
        "gram_w1_inv": _gram_residual(w1_inv, a0, g.b1 @ flat(g.b1)),
        "gram_w3_min_sv": gram_sv["w3"],
        "gram_w1_inv_min_sv": gram_sv["w1_inv"],
        "realizability": realizability_residual(system),
        "realizability_alt": realizability_residual(alt_system),
    }
    worst = max(residuals["realizability"], residuals["realizability_alt"])
    if worst > tol.inconsistent:
        raise InconsistentInputError(f"reconstruction is not physically realizable (residual {worst:.2e})")
    if worst > tol.realizability:
        raise NumericalError(f"realizability residual {worst:.2e} above {tol.realizability:.0e}")

    eq = find_symplectic_between(alt_system, system, transfer_tol=tol.transfer, relation_tol=tol.relation)
    if eq is None:
        raise NumericalError("the two reconstructions have different transfer functions")
    residuals["symplectic_link"] = max(eq.relation_residual, eq.symplectic_deviation)
    residuals["alt_transfer_distance"] = eq.transfer_distance
    residuals["spectrum_match"] = spectrum_mismatch(system, g)
    return IdentificationResult(system, alt_system, t1, t3, eq.t, residuals)


def _structured(w, tol: float, name: str):
    if not is_flat_hermitian(w, tol) or not is_doubled_up(w, tol):
        raise InconsistentInputError(f"gram {name} lacks the flat-Hermitian doubled-up structure")
    w = project_doubled_up(w)
    return 0.5 * (w + flat(w))


def spectrum_mismatch(ss: StateSpace, g: GilbertRealization, points: int = 50) -> float:
    """Max relative deviation of ``Psi(s) J`` of ``ss`` from the Gilbert data on the probe grid."""
    worst = 0.0
    for w in probe_frequencies(ss, points):
        ref = g.evaluate(-1j * w)
        got = spectrum_times_j(ss, -1j * w)
        worst = max(worst, np.linalg.norm(got - ref, 2) / max(1.0, np.linalg.norm(ref, 2)))
    return float(worst)


def aligned_t1(result: IdentificationResult) -> ComplexArray:
    """``T1`` moved into the frame of ``system`` by the relating symplectic."""
    return result.relating_symplectic @ result.t1


def lbt_map(result: IdentificationResult, t2) -> ComplexArray:
    """``[[T1, 0], [T2, T3]]`` with ``T1`` aligned to ``system``."""
    t1 = aligned_t1(result)
    k = t1.shape[0]
    return np.block([[t1, np.zeros((k, k))], [as_complex(t2), result.t3]])


def lbt_map_errors(result: IdentificationResult, g: GilbertRealization, t2) -> dict:
    """Relative mismatch of ``T (A0~, B0, C0) T^-1`` against the cascade of ``system``."""
    casc = build_cascade(result.system)
    mapped = g.realization().similar(lbt_map(result, t2))
    return {
        name: float(
            np.linalg.norm(getattr(mapped, name) - getattr(casc, name), 2)
            / max(1.0, np.linalg.norm(getattr(casc, name), 2))
        )
        for name in ("a", "b", "c")
    }


def recover_t2(result: IdentificationResult, g: GilbertRealization, tol: float = 1e-7) -> ComplexArray:
    """Lower-left block ``T2`` of the similarity from the Gilbert data to the cascade.

    With ``T1`` aligned to ``system`` (see :func:`aligned_t1`),
    ``Y = T2 T1^-1`` solves ``A Y + Y A^flat + C^flat V_vac C = 0``.  The
    assembled map is verified against the cascade of ``system``.

    Raises
    ------
    DegeneracyError
        The Sylvester equation is singular (impossible for Hurwitz ``A``).
    NumericalError
        The assembled map misses the cascade by more than ``tol``.
    """
    ss = result.system
    a, c = ss.a, ss.c
    vv = vacuum_covariance(ss.channels)
    try:
        y = solve_sylvester(a, flat(a), -flat(c) @ vv @ c)
    except DegeneracyError as exc:
        raise DegeneracyError(f"T2 equation is degenerate: {exc}") from exc
    t2 = y @ aligned_t1(result)
    errs = lbt_map_errors(result, g, t2)
    if max(errs.values()) > tol:
        raise NumericalError(f"assembled similarity does not map Gilbert data to the cascade ({errs})")
    return t2


def identify(source: Realization, tol: Tolerances | None = None, with_t2: bool = True) -> IdentificationResult:
    """Gilbert realization, :func:`reconstruct` and optionally :func:`recover_t2`.

    Raises ``GlobalMinimalityError`` when ``source`` is not minimal, since the
    spectrum then has a realization with fewer modes.
    """
    tol = tol or Tolerances()
    if source.order and not source.is_minimal():
        raise GlobalMinimalityError("the realization of Psi(s) J is not minimal")
    g = gilbert_realization(source, **tol.gilbert_kwargs())
    result = reconstruct(g, tol)
    if with_t2:
        t2 = recover_t2(result, g, tol.t2)
        residuals = dict(result.residuals)
        residuals["lbt_map"] = max(lbt_map_errors(result, g, t2).values())
        result = replace(result, t2=t2, residuals=residuals)
    return result
