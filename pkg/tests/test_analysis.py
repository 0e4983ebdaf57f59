import numpy as np
import pytest

from qlsid.analysis import (
    axis_symplectic_deviation,
    is_symplectic_on_axis,
    find_symplectic_between,
    is_globally_minimal,
    is_hurwitz,
    is_minimal,
    spectrum_at,
    stationary_covariance,
    transfer_at,
)
from qlsid.dup import flat, is_doubled_up, is_flat_unitary, is_symplectic, random_symplectic
from qlsid.errors import SingularityError, StabilityError
from qlsid.generators import pad_with_passive, random_system
from qlsid.linalg import is_controllable, is_observable
from qlsid.model import GaussianInput, QlsParams, build_state_space, purifying_symplectic, vacuum_covariance


def test_cavity_transfer_at_zero(cavity):
    sample = transfer_at(cavity, 0.0)
    assert sample.minus[0, 0] == pytest.approx(-1.0, abs=1e-14)
    assert abs(sample.plus[0, 0]) < 1e-15


def test_transfer_at_large_s(rng):
    ss = build_state_space(random_system(3, 2, rng))
    assert np.allclose(transfer_at(ss, 1e8).xi, np.eye(4), atol=1e-6)


def test_transfer_singular(cavity):
    with pytest.raises(SingularityError):
        transfer_at(cavity, -0.5)


def test_transfer_symplectic_on_axis(rng):
    for _ in range(10):
        ss = build_state_space(random_system(int(rng.integers(1, 4)), int(rng.integers(1, 3)), rng))
        w = rng.normal() * 3
        assert is_flat_unitary(transfer_at(ss, -1j * w).xi, 1e-10)
        assert is_symplectic_on_axis(ss, w)


def test_transfer_doubled_up_pairs_opposite_frequencies(detuned_cavity):
    # At omega = 0 both sides of the pairing coincide and the sample is doubled-up.
    assert is_symplectic(transfer_at(detuned_cavity, 0.0).xi, 1e-12)
    # Away from zero the sample is not doubled-up by itself.
    assert not is_doubled_up(transfer_at(detuned_cavity, -0.7j).xi, 1e-6)
    assert max(axis_symplectic_deviation(detuned_cavity, 0.7)) <= 1e-12


def test_passive_vacuum_spectrum(rng):
    for _ in range(5):
        from qlsid.generators import random_passive_system

        ss = build_state_space(random_passive_system(2, 2, rng))
        for s in (-0.7j, 0.3 + 0.2j, 2.0):
            assert np.allclose(spectrum_at(ss, vacuum_covariance(2), s).psi, vacuum_covariance(2), atol=1e-12)


def test_spectrum_hermitian_psd(rng):
    ss = build_state_space(random_system(2, 2, rng))
    psi = spectrum_at(ss, vacuum_covariance(2), -1.3j).psi
    assert np.allclose(psi, psi.conj().T, atol=1e-12)
    assert np.linalg.eigvalsh(psi)[0] >= -1e-12


def test_squeezed_spectrum_matches_reduced(squeezed_input, detuned_cavity, squeezed_cavity):
    s = purifying_symplectic(squeezed_input)
    lhs = spectrum_at(detuned_cavity, squeezed_input.v, 0.0).psi
    rhs = s @ spectrum_at(squeezed_cavity, vacuum_covariance(1), 0.0).psi @ s.conj().T
    assert np.allclose(lhs, rhs, atol=1e-12)


def test_hurwitz_and_minimal(cavity):
    assert is_hurwitz(cavity) and is_minimal(cavity)
    marginal = build_state_space(QlsParams([[1.0]], [[0.0]], [[0.0]], [[0.0]]))
    assert not is_hurwitz(marginal)


def test_hurwitz_implies_minimal(rng):
    for _ in range(30):
        ss = build_state_space(random_system(int(rng.integers(1, 4)), int(rng.integers(1, 3)), rng))
        assert is_minimal(ss)


def test_stationary_covariance_cavity(cavity):
    cov = stationary_covariance(cavity)
    assert np.allclose(cov.p, np.diag([1.0, 0.0]), atol=1e-14)
    assert cov.residual <= 1e-9


def test_stationary_covariance_squeezed(squeezed_cavity):
    cov = stationary_covariance(squeezed_cavity)
    assert cov.min_eigenvalue > 0.5
    assert cov.residual <= 1e-9


def test_stationary_covariance_requires_hurwitz():
    with pytest.raises(StabilityError):
        stationary_covariance(build_state_space(QlsParams([[1.0]], [[0.0]], [[0.0]], [[0.0]])))


def test_global_minimality_examples(cavity, squeezed_cavity, rng):
    rep = is_globally_minimal(cavity)
    assert not (rep.by_covariance or rep.by_controllability or rep.by_observability)
    rep = is_globally_minimal(squeezed_cavity)
    assert rep.by_covariance and rep.by_controllability and rep.by_observability
    padded = build_state_space(pad_with_passive(QlsParams.cavity(1.0, 1.0), rng))
    assert not is_globally_minimal(padded)


def test_decoupled_passive_mode_breaks_global_minimality(squeezed_input):
    from qlsid.model import reduce_params_to_vacuum

    base = reduce_params_to_vacuum(QlsParams.cavity(1.0, 1.0), squeezed_input)
    z = np.zeros((1, 1))
    om = np.block([[base.omega_minus, z], [z, np.array([[0.3]])]])
    op = np.block([[base.omega_plus, z], [z, z]])
    cm = np.hstack([base.c_minus, z])
    cp = np.hstack([base.c_plus, z])
    # The extra mode is damped by its own vacuum channel and never squeezed.
    cm2 = np.vstack([cm, np.array([[0.0, 1.0]])])
    cp2 = np.vstack([cp, np.zeros((1, 2))])
    ss = build_state_space(QlsParams(om, op, cm2, cp2))
    rep = is_globally_minimal(ss)
    assert not (rep.by_covariance or rep.by_controllability or rep.by_observability)


def test_controllability_observability_duality(rng):
    for _ in range(20):
        ss = build_state_space(random_system(2, int(rng.integers(1, 3)), rng))
        vv = vacuum_covariance(ss.channels)
        b = flat(ss.c) @ vv
        assert is_controllable(ss.a, b) == is_observable(b.conj().T, ss.a.conj().T)


def test_find_symplectic_identity(rng):
    ss = build_state_space(random_system(2, 1, rng))
    eq = find_symplectic_between(ss, ss)
    assert eq is not None and np.allclose(eq.t, np.eye(4), atol=1e-8)


def test_find_symplectic_conjugate(rng):
    for _ in range(10):
        ss = build_state_space(random_system(int(rng.integers(1, 4)), int(rng.integers(1, 3)), rng))
        t0 = random_symplectic(ss.modes, rng)
        eq = find_symplectic_between(ss, ss.conjugate(t0))
        assert eq is not None
        other = ss.conjugate(t0)
        assert np.allclose(other.a @ eq.t, eq.t @ ss.a, atol=1e-8)
        assert np.allclose(other.c @ eq.t, ss.c, atol=1e-8)
        assert is_symplectic(eq.t, 1e-8)


def test_find_symplectic_different_cavities():
    a = build_state_space(QlsParams.cavity(1.0, 1.0))
    b = build_state_space(QlsParams.cavity(2.0, 1.0))
    assert find_symplectic_between(a, b) is None


def test_spectrum_invariant_under_conjugation(rng):
    ss = build_state_space(random_system(2, 2, rng))
    other = ss.conjugate(random_symplectic(2, rng))
    v = GaussianInput.vacuum(2).v
    for w in rng.normal(size=5):
        assert np.allclose(spectrum_at(ss, v, -1j * w).psi, spectrum_at(other, v, -1j * w).psi, atol=1e-9)
