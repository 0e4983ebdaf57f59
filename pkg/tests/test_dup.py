import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qlsid.dup import (
    delta,
    flat,
    flat_factorize,
    is_doubled_up,
    is_flat_unitary,
    is_symplectic,
    jmat,
    random_symplectic,
)
from qlsid.errors import ContractError, DimensionError, InfeasibleError


def cnormal(rng, *shape):
    return rng.normal(size=shape) + 1j * rng.normal(size=shape)


def test_flat_identity_and_j():
    assert np.array_equal(flat(np.eye(2)), np.eye(2))
    assert np.array_equal(flat(jmat(1)), jmat(1))


def test_flat_odd_dimension_rejected():
    with pytest.raises(DimensionError):
        flat(np.zeros((3, 2)))


def test_flat_rectangular_against_definition(rng):
    z = delta(cnormal(rng, 2, 1), cnormal(rng, 2, 1))
    expected = jmat(1) @ z.conj().T @ jmat(2)
    assert np.allclose(flat(z), expected, rtol=0, atol=1e-15)
    assert np.array_equal(flat(flat(z)), z)


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 3), st.integers(1, 3), st.integers(1, 3), st.integers(0, 2**32 - 1))
def test_flat_reverses_products(p, q, r, seed):
    rng = np.random.default_rng(seed)
    x = delta(cnormal(rng, p, q), cnormal(rng, p, q))
    y = delta(cnormal(rng, q, r), cnormal(rng, q, r))
    lhs, rhs = flat(x @ y), flat(y) @ flat(x)
    assert np.max(np.abs(lhs - rhs)) <= 1e-12 * max(1.0, np.max(np.abs(lhs)))


def test_is_doubled_up_detects_perturbation(rng):
    z = delta(cnormal(rng, 2, 2), cnormal(rng, 2, 2))
    assert is_doubled_up(z, 1e-9)
    z[3, 1] += 10 * 1e-9 * np.max(np.abs(z))
    assert not is_doubled_up(z, 1e-9)
    assert not is_doubled_up(np.zeros((3, 3)))


def test_symplectic_examples():
    r = 1.0
    s = delta(np.array([[np.cosh(r)]]), np.array([[np.sinh(r)]]))
    assert is_symplectic(s, 1e-12)
    assert is_flat_unitary(np.eye(4)) and is_symplectic(np.eye(4))
    d = np.diag([2.0, 1.0, 0.5, 1.0])
    # Direct evaluation of d^flat d shows it is not flat-unitary.
    assert not np.allclose(flat(d) @ d, np.eye(4))
    assert not is_symplectic(d)


def test_symplectic_group_closure(rng):
    for _ in range(20):
        a, b = random_symplectic(2, rng), random_symplectic(2, rng)
        assert is_symplectic(a @ b, 1e-10)
        assert is_symplectic(np.linalg.inv(a), 1e-10)


def test_flat_factorize_identity():
    t = flat_factorize(np.eye(4))
    assert np.allclose(flat(t) @ t, np.eye(4), atol=1e-14)


def test_flat_factorize_recovers_symplectic_class(rng):
    for p in range(1, 5):
        for _ in range(25):
            t0 = delta(cnormal(rng, p, p), 0.3 * cnormal(rng, p, p))
            w = flat(t0) @ t0
            t = flat_factorize(w, 1e-9)
            assert is_doubled_up(t, 1e-12)
            assert np.linalg.norm(flat(t) @ t - w, 2) <= 1e-10 * np.linalg.norm(w, 2)
            assert is_symplectic(t0 @ np.linalg.inv(t), 1e-8)


def test_flat_factorize_rejects_wrong_signature():
    # J is flat-Hermitian with J J = 1 of signature (2p, 0), but it is not
    # doubled-up, so it fails the structural precondition.
    with pytest.raises(ContractError):
        flat_factorize(jmat(2))


def test_flat_factorize_rejects_singular(rng):
    t0 = delta(np.array([[1.0, 0.0], [0.0, 0.0]]), np.zeros((2, 2)))
    with pytest.raises(InfeasibleError):
        flat_factorize(flat(t0) @ t0)


def test_doubled_up_flat_hermitian_has_balanced_signature(rng):
    for _ in range(20):
        t0 = delta(cnormal(rng, 3, 3), cnormal(rng, 3, 3))
        jw = jmat(3) @ flat(t0) @ t0
        d = np.linalg.eigvalsh(0.5 * (jw + jw.conj().T))
        assert np.sum(d > 0) == 3


def test_flat_factorize_rejects_non_flat_hermitian(rng):
    w = delta(cnormal(rng, 2, 2), cnormal(rng, 2, 2))
    with pytest.raises(ContractError):
        flat_factorize(w)


def test_flat_factorize_separates_singularity_threshold():
    w = np.diag([1.0, 0.05, 1.0, 0.05]).astype(complex)
    with pytest.raises(InfeasibleError):
        flat_factorize(w, tol=0.1)
    t = flat_factorize(w, tol=0.1, singular_tol=1e-10)
    assert np.allclose(flat(t) @ t, w, atol=1e-12)
