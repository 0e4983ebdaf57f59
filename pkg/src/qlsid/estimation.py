"""Synthetic spectrum measurements and rational fitting of ``Psi(s) J``.

Measured spectra are modelled by a complex Wishart surrogate: the sample at
each frequency is the average of ``K`` outer products of circular Gaussian
vectors with covariance ``Psi_V(-i omega)``.  Fitting uses the block Loewner
framework on samples split alternately into left and right interpolation
sets, truncated by singular values.  Noisy fits are refined by variable
projection: poles by nonlinear least squares, residues eliminated linearly.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import least_squares, linear_sum_assignment

from .analysis import is_hurwitz, spectrum_matrix
from .cascade import Realization
from .dup import ComplexArray, jmat, sigma
from .errors import InputError, NumericalError, OrderError, StabilityError
from .identification import IdentificationResult, Tolerances, identify
from .model import GaussianInput, StateSpace, purifying_symplectic, restore_input_frame, vacuum_covariance

#: Relative singular-value threshold for Loewner rank detection.
RANK_TOL = 1e-8
#: Relative tolerance for Hermitian / PSD validation of samples.
SAMPLE_TOL = 1e-9


def default_grid(ss: StateSpace, points: int = 101) -> np.ndarray:
    """Log-spaced frequencies in ``[1e-2, 1e2]`` times ``|A|``."""
    scale = max(np.linalg.norm(ss.a, 2), 1e-12)
    return np.logspace(-2, 2, points) * scale


@dataclass(frozen=True)
class SpectrumDataset:
    """Spectrum samples ``Psi_V(-i omega_k)`` on a strictly increasing grid.

    ``input`` records the Gaussian input that drove the system (``None`` for
    vacuum).  ``shots`` is ``None`` for exact samples.
    """

    omegas: np.ndarray
    samples: ComplexArray
    shots: int | None = None
    seed: int | None = None
    input: GaussianInput | None = field(default=None)

    def __post_init__(self):
        om = np.asarray(self.omegas, dtype=float).ravel()
        smp = np.asarray(self.samples, dtype=complex)
        if smp.ndim != 3 or smp.shape[0] != om.size or smp.shape[1] != smp.shape[2] or smp.shape[1] % 2:
            raise InputError(f"samples must have shape ({om.size}, 2m, 2m), got {smp.shape}")
        if not np.all(np.isfinite(om)) or not np.all(np.isfinite(smp)):
            raise InputError("dataset contains non-finite values")
        if om.size > 1 and np.any(np.diff(om) <= 0):
            raise InputError("omegas must be strictly increasing")
        if self.shots is not None and int(self.shots) < 1:
            raise InputError("shots must be at least 1")
        for k, w in enumerate(smp):
            scale = max(1.0, np.linalg.norm(w, 2))
            if np.max(np.abs(w - w.conj().T)) > SAMPLE_TOL * scale:
                raise InputError(f"sample {k} is not Hermitian")
            if np.linalg.eigvalsh(0.5 * (w + w.conj().T))[0] < -SAMPLE_TOL * scale:
                raise InputError(f"sample {k} is not positive semidefinite")
        if self.input is not None and self.input.channels * 2 != smp.shape[1]:
            raise InputError("input channel count does not match the samples")
        object.__setattr__(self, "omegas", om)
        object.__setattr__(self, "samples", smp)

    @property
    def channels(self) -> int:
        return self.samples.shape[1] // 2

    def vacuum_samples(self) -> ComplexArray:
        """Samples mapped to the vacuum-input frame, ``S^-1 Psi S^-dagger``."""
        if self.input is None:
            return self.samples
        s_inv = np.linalg.inv(purifying_symplectic(self.input))
        return np.einsum("ij,kjl,ml->kim", s_inv, self.samples, s_inv.conj())


def _psd_factor(psi: ComplexArray) -> ComplexArray:
    h = 0.5 * (psi + psi.conj().T)
    d, u = np.linalg.eigh(h)
    if d[0] < -SAMPLE_TOL * max(1.0, d[-1]):
        raise NumericalError(f"true spectrum is not positive semidefinite (eigenvalue {d[0]:.2e})")
    return u * np.sqrt(np.clip(d, 0.0, None))


def complex_wishart(cov: ComplexArray, shots: int, rng: np.random.Generator) -> ComplexArray:
    """Average of ``shots`` outer products ``x x^dagger`` with ``x ~ CN(0, cov)``.

    Uses the Bartlett decomposition when ``shots >= dim`` so the cost does not
    grow with ``shots``.
    """
    p = cov.shape[0]
    factor = _psd_factor(cov)
    if shots >= p:
        a = np.zeros((p, p), dtype=complex)
        a[np.diag_indices(p)] = np.sqrt(rng.gamma(shape=shots - np.arange(p), scale=1.0))
        low = np.tril_indices(p, -1)
        a[low] = (rng.normal(size=len(low[0])) + 1j * rng.normal(size=len(low[0]))) / np.sqrt(2)
        g = factor @ a
    else:
        x = (rng.normal(size=(p, shots)) + 1j * rng.normal(size=(p, shots))) / np.sqrt(2)
        g = factor @ x
    w = g @ g.conj().T / shots
    return 0.5 * (w + w.conj().T)


def exact_dataset(ss: StateSpace, inp: GaussianInput | None, omegas) -> SpectrumDataset:
    """Noise-free samples of ``Psi_V(-i omega)``."""
    v = vacuum_covariance(ss.channels) if inp is None else inp.v
    om = np.asarray(omegas, dtype=float)
    samples = np.array([spectrum_matrix(ss, v, -1j * w) for w in om])
    return SpectrumDataset(om, samples, None, None, inp)


def synthesize_dataset(
    ss: StateSpace,
    inp: GaussianInput | None,
    omegas,
    shots: int,
    seed: int,
) -> SpectrumDataset:
    """Wishart-distributed samples with mean ``Psi_V(-i omega)`` and ``shots`` degrees of freedom.

    Each frequency draws from its own stream spawned from ``seed``, so the
    dataset is reproducible and independent of evaluation order.
    """
    if not is_hurwitz(ss):
        raise StabilityError("synthesis requires a Hurwitz system")
    shots = int(shots)
    if shots < 1:
        raise InputError("shots must be at least 1")
    truth = exact_dataset(ss, inp, omegas)
    streams = np.random.SeedSequence(int(seed)).spawn(truth.omegas.size)
    samples = np.array(
        [complex_wishart(psi, shots, np.random.default_rng(st)) for psi, st in zip(truth.samples, streams)]
    )
    return SpectrumDataset(truth.omegas, samples, shots, int(seed), inp)


@dataclass(frozen=True)
class FitResult:
    """Fitted realization of ``Psi(s) J`` and fit diagnostics."""

    realization: Realization
    detected_order: int
    singular_values: np.ndarray
    sample_residual: float
    refined: bool = False

    @property
    def poles(self) -> ComplexArray:
        return np.linalg.eigvals(self.realization.a) if self.realization.order else np.zeros(0, dtype=complex)


def mirrored_samples(omegas, psi):
    """Vacuum-frame samples extended to ``-omega`` and sorted; ``omega = 0`` is kept once."""
    m = psi.shape[1] // 2
    sig = sigma(m)
    keep = omegas != 0
    om = np.concatenate([omegas, -omegas[keep]])
    extra = sig @ psi[keep].conj() @ sig + jmat(m)
    allpsi = np.concatenate([psi, extra])
    order = np.argsort(om)
    return om[order], allpsi[order]


def _loewner(s_left, g_left, s_right, g_right):
    """Block Loewner and shifted Loewner matrices with full tangential directions."""
    p = g_left.shape[1]
    nl, nr = s_left.size, s_right.size
    ll = np.empty((nl * p, nr * p), dtype=complex)
    ls = np.empty_like(ll)
    for i, (mu, vi) in enumerate(zip(s_left, g_left)):
        for j, (la, wj) in enumerate(zip(s_right, g_right)):
            d = mu - la
            ll[i * p : (i + 1) * p, j * p : (j + 1) * p] = (vi - wj) / d
            ls[i * p : (i + 1) * p, j * p : (j + 1) * p] = (mu * vi - la * wj) / d
    v = np.vstack(list(g_left))
    w = np.hstack(list(g_right))
    return ll, ls, v, w


def _sample_residual(real: Realization, s, h) -> float:
    num = sum(np.linalg.norm(real.evaluate(sk) - hk) ** 2 for sk, hk in zip(s, h))
    den = sum(np.linalg.norm(hk) ** 2 for hk in h)
    return float(np.sqrt(num / max(den, np.finfo(float).tiny)))


def fit_realization(
    data: SpectrumDataset,
    order: int | None = None,
    *,
    rank_tol: float = RANK_TOL,
    strict: bool = True,
    refine: bool = False,
    symmetric: bool = True,
    mirror: bool = True,
) -> FitResult:
    """Minimal realization of ``Psi(s) J`` from spectrum samples.

    The feedthrough ``V_vac J`` is known and subtracted.  Samples are mapped
    to the vacuum-input frame when the dataset records a non-vacuum input.

    Parameters
    ----------
    order
        Expected McMillan degree (``4n``).  When ``None`` the detected order
        is used.
    rank_tol
        Relative singular-value threshold for order detection.
    strict
        Raise ``OrderError`` if the detected order differs from ``order``.
        With noisy data the detected order is meaningless at the default
        threshold; pass ``strict=False`` to force ``order``.
    refine
        Re-estimate poles and residues by least squares over all samples,
        with rank-one residues.  Recommended for noisy data.
    symmetric
        During refinement, snap poles onto the set
        ``{-conj(lam), -lam, lam, conj(lam)}`` implied by the structure of the
        spectrum.
    mirror
        Extend the samples to ``-omega`` through the exact identity
        ``Psi(i w) = Sigma conj(Psi(-i w)) Sigma + J`` (vacuum frame), so
        poles on both sides of the real axis are seen by the data.
    """
    om = data.omegas
    if om.size < 2:
        raise InputError("at least two frequencies are needed")
    m = data.channels
    dj = vacuum_covariance(m) @ jmat(m)
    psi = data.vacuum_samples()
    if mirror:
        om, psi = mirrored_samples(om, psi)
    s = -1j * om
    h = psi @ jmat(m)
    g = h - dj

    left, right = np.arange(0, om.size, 2), np.arange(1, om.size, 2)
    ll, ls, v, w = _loewner(s[left], g[left], s[right], g[right])
    sv_row = np.linalg.svd(np.hstack([ll, ls]), compute_uv=False)
    # Relative to the larger of the leading singular value and the sample size,
    # so rounding-level data (a constant spectrum) has order zero.
    scale = max(float(sv_row[0]), float(np.max(np.abs(h))))
    detected = int(np.sum(sv_row > rank_tol * scale))
    if order is None:
        order = detected
    elif strict and detected != order:
        raise OrderError(f"detected order {detected}, expected {order}", detected)
    max_order = min(ll.shape)
    if order > max_order:
        raise InputError(f"order {order} needs more frequencies (at most {max_order} with this grid)")

    p = 2 * m
    if order == 0:
        real = Realization(np.zeros((0, 0)), np.zeros((0, p)), np.zeros((p, 0)), dj)
        return FitResult(real, detected, sv_row, _sample_residual(real, s, h))

    y = np.linalg.svd(np.hstack([ll, ls]))[0][:, :order]
    x = np.linalg.svd(np.vstack([ll, ls]))[2][:order].conj().T
    lr = y.conj().T @ ll @ x
    lsr = y.conj().T @ ls @ x
    vr = y.conj().T @ v
    wr = w @ x
    if np.linalg.cond(lr) > 1e14:
        raise NumericalError("projected Loewner matrix is singular; order too high for the data")
    a = np.linalg.solve(lr, lsr)
    b = -np.linalg.solve(lr, vr)
    real = Realization(a, b, wr, dj)
    refined = False
    if refine:
        real = _refine(real, s, g, dj, symmetric)
        refined = True
    return FitResult(real, detected, sv_row, _sample_residual(real, s, h), refined)


def _symmetrize_poles(poles: ComplexArray) -> ComplexArray:
    """Project poles onto a set closed under ``lam -> conj(lam)`` and ``lam -> -conj(lam)``.

    Each pole is mapped to its image with negative real part and positive
    imaginary part; the images are grouped four at a time by proximity and
    averaged.  Poles that noise pushed across an axis are thus recovered.
    """
    k = poles.size
    if k % 4:
        raise NumericalError(f"order {k} is not a multiple of 4")
    canon = list(-np.abs(poles.real) + 1j * np.abs(poles.imag))
    out = []
    while canon:
        # Seed with the largest remaining image so small poles are not absorbed.
        i = int(np.argmax(np.abs(canon)))
        seed = canon.pop(i)
        group = [seed]
        for _ in range(3):
            j = int(np.argmin([abs(r - seed) for r in canon]))
            group.append(canon.pop(j))
        avg = np.mean(group)
        out += [-avg.conjugate(), -avg, avg, avg.conjugate()]
    return np.array(out)


def _residue_fit(poles, s, g):
    phi = 1.0 / (s[:, None] - poles[None, :])
    p = g.shape[1]
    rhs = g.reshape(s.size, p * p)
    coef, *_ = np.linalg.lstsq(phi, rhs, rcond=None)
    return coef.reshape(poles.size, p, p)


def _generic_poles(omegas, k: int, damping: float = 0.01) -> ComplexArray:
    """Starting quadruples ``-a +- i b``, ``a +- i b`` with ``b`` spread log-uniformly over the grid and ``a = damping * b``."""
    w = np.abs(omegas[omegas != 0]) if np.any(omegas != 0) else np.ones(1)
    betas = np.logspace(np.log10(w.min()), np.log10(w.max()), k // 4 + 2)[1:-1]
    out = []
    for b in betas:
        lam = -damping * b + 1j * b
        out += [-lam.conjugate(), -lam, lam, lam.conjugate()]
    return np.array(out)


def _quadruples(theta) -> ComplexArray:
    """Poles ``{-conj(lam), -lam, lam, conj(lam)}`` with ``lam = -exp(a) + i exp(b)``."""
    out = []
    for a, b in theta.reshape(-1, 2):
        lam = -np.exp(a) + 1j * np.exp(b)
        out += [-lam.conjugate(), -lam, lam, lam.conjugate()]
    return np.array(out)


def _projected_residual(poles, s, g) -> np.ndarray:
    """Sample misfit after the optimal residues for ``poles`` are eliminated."""
    phi = 1.0 / (s[:, None] - poles[None, :])
    rhs = g.reshape(s.size, -1)
    q = np.linalg.qr(phi)[0]
    r = (q @ (q.conj().T @ rhs) - rhs).ravel()
    return np.concatenate([r.real, r.imag])


def _pole_fit(poles, s, g, dj, symmetric: bool, iterations: int) -> Realization:
    """Variable-projection least squares over the poles, then rank-one residues.

    With ``symmetric`` the unknowns are one log-parametrized ``lam`` per
    quadruple, which keeps every pole strictly off both axes.  ``iterations``
    scales the evaluation budget of the optimizer.
    """
    if symmetric:
        canon = _symmetrize_poles(poles)[2::4]
        floor = 1e-8 * np.maximum(np.abs(canon), 1e-300)
        theta0 = np.column_stack([np.log(np.maximum(-canon.real, floor)), np.log(np.maximum(canon.imag, floor))]).ravel()
        unpack = _quadruples
    else:
        theta0 = np.concatenate([poles.real, poles.imag])
        k = poles.size

        def unpack(theta):
            return theta[:k] + 1j * theta[k:]

    sol = least_squares(lambda th: _projected_residual(unpack(th), s, g), theta0, max_nfev=25 * iterations)
    poles = unpack(sol.x)
    c, b = _rank_one_residues(poles, s, g)
    return Realization(np.diag(poles), b, c, dj)


def _rank_one_residues(poles, s, g, sweeps: int = 100, rtol: float = 1e-10):
    """Residues ``c_j b_j^T`` fitted under the rank-one constraint.

    Alternating least squares over the columns ``c_j`` and rows ``b_j``,
    started from the leading singular pairs of the unconstrained fit.  Close
    poles carry large, nearly cancelling residues, so truncating the
    unconstrained fit afterwards is not enough.
    """
    phi = 1.0 / (s[:, None] - poles[None, :])
    k, n, p = poles.size, s.size, g.shape[1]
    c = np.empty((p, k), dtype=complex)
    b = np.empty((k, p), dtype=complex)
    for j, r in enumerate(_residue_fit(poles, s, g)):
        u, sv, vh = np.linalg.svd(r)
        c[:, j] = u[:, 0] * sv[0]
        b[j] = vh[0]
    prev = np.inf
    for _ in range(sweeps):
        # g[n, a, e] = sum_j phi[n, j] c[a, j] b[j, e]
        design = (phi[:, None, :] * b.T[None, :, :]).reshape(n * p, k)
        c = np.linalg.lstsq(design, g.transpose(0, 2, 1).reshape(n * p, p), rcond=None)[0].T
        design = (phi[:, None, :] * c[None, :, :]).reshape(n * p, k)
        b = np.linalg.lstsq(design, g.reshape(n * p, p), rcond=None)[0]
        err = np.linalg.norm(np.einsum("nj,aj,je->nae", phi, c, b) - g)
        if prev - err <= rtol * max(prev, 1.0):
            break
        prev = err
    return c, b


def _refine(real: Realization, s, g, dj, symmetric: bool, iterations: int = 20) -> Realization:
    """Least-squares pole estimation from several starts, then rank-one residues.

    Starts from the Loewner poles and from generic quadruples spread over the
    grid at light, moderate and heavy damping, and keeps the fit with the
    smallest sample residual.
    """
    k = real.order
    omegas = (1j * s).real
    starts = [np.linalg.eigvals(real.a)] + [_generic_poles(omegas, k, z) for z in (0.01, 0.1, 0.5, 2.0)]
    h = g + dj
    best, best_res = None, np.inf
    for start in starts:
        try:
            cand = _pole_fit(start, s, g, dj, symmetric, iterations)
        except (NumericalError, np.linalg.LinAlgError):
            continue
        r = _sample_residual(cand, s, h)
        if r < best_res:
            best, best_res = cand, r
    if best is None:
        raise NumericalError("refinement failed to produce a structured pole set")
    if symmetric:
        # A quadruple pressed onto the real axis is a stuck start, not a fit:
        # re-seed it at the same modulus and several angles.
        lam = np.diag(best.a)[2::4]
        stuck = np.abs(lam.imag) < 1e-3 * np.abs(lam)
        if np.any(stuck):
            for angle in (0.55, 0.65, 0.75, 0.85):
                start = np.where(stuck, np.abs(lam) * np.exp(1j * np.pi * angle), lam)
                cand = _pole_fit(_quadruples_from(start), s, g, dj, symmetric, iterations)
                r = _sample_residual(cand, s, h)
                if r < best_res:
                    best, best_res = cand, r
    return best


def _quadruples_from(lams) -> ComplexArray:
    out = []
    for lam in lams:
        out += [-lam.conjugate(), -lam, lam, lam.conjugate()]
    return np.array(out)


def transfer_error(real: Realization, truth_fn, omegas) -> float:
    """RMS relative Frobenius error of ``real`` against ``truth_fn(s)`` at ``s = -i omega``."""
    num = den = 0.0
    for w in omegas:
        t = truth_fn(-1j * w)
        num += np.linalg.norm(real.evaluate(-1j * w) - t) ** 2
        den += np.linalg.norm(t) ** 2
    return float(np.sqrt(num / max(den, np.finfo(float).tiny)))


def noise_floor(data: SpectrumDataset, truth: SpectrumDataset) -> float:
    """RMS relative Frobenius deviation of the samples from the truth."""
    d = data.samples - truth.samples
    return float(np.sqrt(np.sum(np.abs(d) ** 2) / np.sum(np.abs(truth.samples) ** 2)))


def as_realization(x) -> Realization:
    """Accept either a :class:`Realization` or a fit result."""
    if isinstance(x, FitResult):
        return x.realization
    if isinstance(x, Realization):
        return x
    raise InputError(f"cannot interpret {type(x).__name__} as a realization")


def match_poles(found, reference) -> float:
    """Largest distance between optimally matched pole sets of equal size."""
    found, reference = np.asarray(found), np.asarray(reference)
    if found.size != reference.size:
        return float("inf")
    if found.size == 0:
        return 0.0
    cost = np.abs(found[:, None] - reference[None, :])
    rows, cols = linear_sum_assignment(cost)
    return float(cost[rows, cols].max())


@dataclass(frozen=True)
class DataIdentification:
    """Identification from samples: fit, vacuum-frame result and the system in the input's frame."""

    fit: FitResult
    result: IdentificationResult
    system: StateSpace


def identify_from_data(
    data: SpectrumDataset,
    order: int | None = None,
    tol: Tolerances | None = None,
) -> DataIdentification:
    """Fit ``Psi(s) J`` and run the identification pipeline.

    Exact datasets (``shots is None``) use the interpolating fit and strict
    order checking.  Noisy datasets are fitted by least squares with
    ``order`` forced and tolerances loosened to the fit residual.
    """
    if data.shots is None:
        fit = fit_realization(data, order)
        tol = tol or Tolerances()
    else:
        if order is None:
            raise InputError("noisy data needs an explicit model order")
        fit = fit_realization(data, order, strict=False, refine=True)
        tol = tol or Tolerances.for_noise(fit.sample_residual)
    result = identify(fit.realization, tol)
    system = result.system if data.input is None else restore_input_frame(result.system, data.input)
    return DataIdentification(fit, result, system)
