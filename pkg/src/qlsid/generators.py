"""Random systems and inputs for tests, benchmarks and the ``random`` command.

Generators reject and resample until the requested properties hold, so the
output is deterministic for a given seed.
"""

from __future__ import annotations

import numpy as np

from .analysis import is_hurwitz, spectral_abscissa, stationary_covariance
from .dup import random_symplectic
from .errors import NumericalError
from .model import GaussianInput, QlsParams, build_state_space, series_product

MAX_TRIES = 10_000


def _cnormal(rng, shape):
    return (rng.normal(size=shape) + 1j * rng.normal(size=shape)) / np.sqrt(2)


def random_params(n: int, m: int, rng: np.random.Generator, active: float = 0.4, passive: bool = False) -> QlsParams:
    """Unconstrained random parameters.

    ``active`` scales the squeezing blocks ``c_plus`` and ``omega_plus``
    relative to their passive counterparts.
    """
    h = _cnormal(rng, (n, n))
    om = h + h.conj().T
    cm = _cnormal(rng, (m, n))
    if passive:
        op = np.zeros((n, n), dtype=complex)
        cp = np.zeros((m, n), dtype=complex)
    else:
        g = _cnormal(rng, (n, n))
        op = active * (g + g.T) / 2
        cp = active * _cnormal(rng, (m, n))
    return QlsParams(om, op, cm, cp)


def _pole_margin(ss) -> float:
    ev = np.linalg.eigvals(ss.a)
    scale = max(1.0, np.max(np.abs(ev)))
    gaps = np.abs(ev[:, None] - ev[None, :]) + np.diag(np.full(ev.size, np.inf))
    return float(min(np.min(np.abs(ev.imag)), np.min(gaps), -np.max(ev.real)) / scale)


def random_system(
    n: int,
    m: int,
    rng: np.random.Generator,
    *,
    globally_minimal: bool = False,
    generic: bool = False,
    margin: float = 0.02,
    mixing: float = 1e-3,
    active: float = 0.4,
) -> QlsParams:
    """Random Hurwitz system, optionally globally minimal and generic.

    ``generic`` asks for distinct non-real eigenvalues of ``A`` separated by
    at least ``margin`` (relative to the spectral radius), which also serves
    as the stability margin.  ``globally_minimal`` asks for
    ``min eig(P) >= mixing * max eig(P)``.
    """
    for _ in range(MAX_TRIES):
        params = random_params(n, m, rng, active=active)
        ss = build_state_space(params)
        if not is_hurwitz(ss):
            continue
        if generic and _pole_margin(ss) < margin:
            continue
        if globally_minimal:
            cov = stationary_covariance(ss)
            if cov.min_eigenvalue < mixing * cov.max_eigenvalue:
                continue
        return params
    raise NumericalError("could not draw a system with the requested properties")


def random_passive_system(n: int, m: int, rng: np.random.Generator) -> QlsParams:
    """Random passive system (always Hurwitz when couplings are full rank)."""
    for _ in range(MAX_TRIES):
        params = random_params(n, m, rng, passive=True)
        if spectral_abscissa(build_state_space(params)) < -1e-3:
            return params
    raise NumericalError("could not draw a stable passive system")


def pad_with_passive(params: QlsParams, rng: np.random.Generator, extra_modes: int = 1) -> QlsParams:
    """Prepend a passive system in series; the result is not globally minimal.

    Driven by vacuum, the passive stage emits vacuum, so the spectrum is that of
    ``params`` while the mode count grows.
    """
    return series_product(random_passive_system(extra_modes, params.channels, rng), params)


def random_pure_input(m: int, rng: np.random.Generator, scale: float = 0.5) -> GaussianInput:
    """Pure Gaussian input ``S V_vac S^dagger`` for a random symplectic ``S``."""
    return GaussianInput.from_symplectic(random_symplectic(m, rng, scale))


def random_ensemble(count: int, rng: np.random.Generator, max_modes: int = 3, max_channels: int = 2):
    """Alternate globally minimal systems and passive-padded copies.

    Yields ``(params, expected_globally_minimal)``.
    """
    for k in range(count):
        n = int(rng.integers(1, max_modes + 1))
        m = int(rng.integers(1, max_channels + 1))
        if k % 2 == 0:
            yield random_system(n, m, rng, globally_minimal=True), True
        else:
            base_n = max(1, n - 1)
            base = random_system(base_n, m, rng, globally_minimal=True)
            yield pad_with_passive(base, rng), False
