import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.stats import unitary_group

from mourrelab.errors import NotHermitian, NotUnitary
from mourrelab.opcore import (IndexWindow, SpectralDecomposition, TruncatedOperator, hermitian_eig, op_norm,
                              tol_eig, unitary_eig, weight_power)

from conftest import random_hermitian


def test_window_basics():
    w = IndexWindow(-3, 4)
    assert w.dim == 8
    assert w.position(-3) == 0 and w.position(4) == 7
    assert IndexWindow.centered(5) == IndexWindow(-2, 2)
    with pytest.raises(ValueError):
        IndexWindow(2, 1)
    with pytest.raises(IndexError):
        w.position(5)


def test_outer_mask_splits_between_ends():
    m = IndexWindow(0, 99).outer_mask(0.1)
    assert m.sum() == 10 and m[:5].all() and m[-5:].all()


def test_truncated_operator_adjoint_involution(rng):
    m = rng.standard_normal((6, 6)) + 1j * rng.standard_normal((6, 6))
    op = TruncatedOperator(IndexWindow(-2, 3), m)
    assert op.adjoint().adjoint() == op
    with pytest.raises(ValueError):
        TruncatedOperator(IndexWindow(0, 2), m)
    with pytest.raises(ValueError):
        op.entries[0, 0] = 1.0


def test_hermitian_eig_examples(rng):
    lam, vec = hermitian_eig(np.eye(5))
    assert np.allclose(lam, 1.0)
    assert np.allclose(np.abs(vec), np.eye(5)) or np.allclose(vec @ vec.conj().T, np.eye(5))
    lam, _ = hermitian_eig(np.diag([-1.0, 0.0, 3.0]))
    assert np.array_equal(lam, [-1.0, 0.0, 3.0])
    h = random_hermitian(rng, 50)
    lam, vec = hermitian_eig(h)
    assert np.max(np.abs((vec * lam) @ vec.conj().T - h)) <= 1e-10
    assert np.all(np.diff(lam) >= 0)


def test_hermitian_eig_rejects_non_hermitian(rng):
    m = rng.standard_normal((4, 4))
    with pytest.raises(NotHermitian):
        hermitian_eig(m)


def test_unitary_eig_examples():
    d = unitary_eig(np.eye(4))
    assert np.allclose(d.phases, 0.0)
    N = 12
    shift = np.roll(np.eye(N), 1, axis=0)
    d = unitary_eig(shift)
    assert np.allclose(np.sort(d.phases), 2 * np.pi * np.arange(N) / N, atol=1e-12)
    d = unitary_eig(np.diag(np.exp([1j * np.pi / 3, -1j * np.pi / 3])))
    assert np.allclose(d.phases, [np.pi / 3, 5 * np.pi / 3])


def test_unitary_eig_postconditions():
    U = unitary_group.rvs(40, random_state=3)
    d = unitary_eig(U)
    tol = tol_eig(40, 1.0)
    assert d.reconstruction_error(U) <= tol
    assert d.gram_error() <= tol
    assert np.all((d.phases >= 0) & (d.phases < 2 * np.pi))
    assert np.all(np.diff(d.phases) >= 0)
    assert np.sum(np.abs(d.eigenvalues) ** 2) == pytest.approx(40, abs=1e-12)
    P = d.projector(d.phases < np.pi)
    assert np.max(np.abs(P @ P - P)) <= tol
    assert np.max(np.abs(P - P.conj().T)) <= tol


def test_unitary_eig_deterministic_ties():
    d1 = unitary_eig(np.eye(6))
    d2 = unitary_eig(np.eye(6))
    assert np.array_equal(d1.vectors, d2.vectors)


def test_unitary_eig_rejects_non_unitary():
    with pytest.raises(NotUnitary):
        unitary_eig(2 * np.eye(3))


def test_unitary_eig_keeps_window():
    U = TruncatedOperator(IndexWindow(-2, 2), np.eye(5))
    assert unitary_eig(U).window == IndexWindow(-2, 2)


def test_op_norm_examples(rng):
    assert op_norm(np.zeros((4, 4))) == 0.0
    assert op_norm(unitary_group.rvs(10, random_state=1)) == pytest.approx(1.0, abs=1e-10)
    u = rng.standard_normal(5)
    v = rng.standard_normal(5)
    u *= 2 / np.linalg.norm(u)
    v *= 3 / np.linalg.norm(v)
    assert op_norm(np.outer(u, v)) == pytest.approx(6.0, rel=1e-10)


@settings(max_examples=30, deadline=None)
@given(st.integers(min_value=1, max_value=12), st.complex_numbers(max_magnitude=100, allow_nan=False),
       st.integers(min_value=0, max_value=2**31))
def test_op_norm_properties(n, c, seed):
    m = np.random.default_rng(seed).standard_normal((n, n)) + 0j
    nm = op_norm(m)
    assert op_norm(m.conj().T) == pytest.approx(nm, rel=1e-12, abs=1e-300)
    assert op_norm(c * m) == pytest.approx(abs(c) * nm, rel=1e-12, abs=1e-300)


def test_weight_power_examples(rng):
    assert np.allclose(weight_power(np.zeros((4, 4)), 1.7), np.eye(4))
    w = weight_power(np.diag([0.0, 1.0, 2.0]), 2.0)
    assert np.allclose(w, np.diag([1.0, 0.5, 0.2]), atol=0)
    A = random_hermitian(rng, 20)
    W = weight_power(A, 1.0)
    assert np.max(np.abs(W @ W - np.linalg.inv(A @ A + np.eye(20)))) <= 1e-9
    assert np.max(np.abs(W @ A - A @ W)) <= tol_eig(20, op_norm(A))
    assert np.all(np.linalg.eigvalsh(W) > 0)
    with pytest.raises(ValueError):
        weight_power(A, 0.0)


@settings(max_examples=20, deadline=None)
@given(st.floats(0.1, 3.0), st.floats(0.1, 3.0), st.integers(0, 2**31))
def test_weight_power_semigroup(s1, s2, seed):
    A = random_hermitian(np.random.default_rng(seed), 8)
    lhs = np.asarray(weight_power(A, s1)) @ np.asarray(weight_power(A, s2))
    rhs = np.asarray(weight_power(A, s1 + s2))
    assert np.max(np.abs(lhs - rhs)) <= tol_eig(8, op_norm(A))


def test_spectral_decomposition_apply():
    d = SpectralDecomposition(np.array([0.0, np.pi]), np.eye(2, dtype=complex))
    assert np.allclose(d.reconstruct(), np.diag([1.0, -1.0]))
