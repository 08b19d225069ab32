import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mourrelab.bandalg import (BandOperator, DiagSeq, X_SEQ, ad_A, ad_A_J_closed, ad_conjugate,
                               ad_conjugate_diag_closed, ad_conjugate_J_closed, band_mul, conjugate_generator,
                               interior_deviation, materialize, seminorm)
from mourrelab.errors import UnboundedGrowth, WindowTooSmall
from mourrelab.models import B_a_band, conjugate_B_a
from mourrelab.opcore import IndexWindow

W20 = IndexWindow(-20, 20)


def test_shift_times_adjoint_is_identity():
    P = band_mul(BandOperator.shift(1), BandOperator.shift(-1))
    assert P.offsets == (0,)
    assert P.max_coefficient_deviation(BandOperator.identity(), W20) == 0.0


def test_position_times_shift():
    P = band_mul(BandOperator.position(), BandOperator.shift(1))
    k = W20.indices()
    assert np.array_equal(P.coefficient(1).on(W20), k)
    # D_x T e_k = (k + 1) e_{k+1}: the coefficient at row k is k
    M = np.asarray(materialize(P, W20))
    assert M[W20.position(4), W20.position(3)] == 4


def test_product_against_matrix_oracle(rng):
    al = DiagSeq.random_trig(rng)
    be = DiagSeq.random_trig(rng)
    X = band_mul(BandOperator.diag(al), BandOperator.shift(1))
    Y = band_mul(BandOperator.diag(be), BandOperator.shift(-1))
    P = band_mul(X, Y)
    assert P.offsets == (0,)
    # coefficient is alpha_k beta_{k-1}
    k = W20.indices()
    assert np.allclose(P.coefficient(0).on(W20), al(k) * be(k - 1), atol=0)
    big = IndexWindow(-25, 25)
    oracle = np.asarray(materialize(X, big)) @ np.asarray(materialize(Y, big))
    assert interior_deviation(oracle, materialize(P, big), 2) <= 1e-14


def test_ad_A_examples(rng):
    T = BandOperator.shift(1)
    assert ad_A(T).max_coefficient_deviation(T, W20) == 0.0
    assert ad_A(ad_A(T)).max_coefficient_deviation(T, W20) == 0.0
    assert ad_A(BandOperator.diag(DiagSeq.random_trig(rng))).offsets == ()
    al, be = DiagSeq.random_trig(rng), DiagSeq.random_trig(rng)
    J = BandOperator.J(2, al, be)
    w = IndexWindow(-50, 50)
    assert ad_A(J).max_coefficient_deviation(BandOperator.J(2, al, -be).scale(2), w) <= 1e-15
    assert ad_A(J).max_coefficient_deviation(ad_A_J_closed(2, al, be), w) <= 1e-15


def test_ad_A_matches_matrix_commutator(rng):
    X = BandOperator.J(3, DiagSeq.random_trig(rng), DiagSeq.random_trig(rng))
    A = np.asarray(materialize(BandOperator.position(), W20))
    M = np.asarray(materialize(X, W20))
    assert interior_deviation(A @ M - M @ A, materialize(ad_A(X), W20), 4) <= 1e-12


def test_derivation_and_adjoint_rules(rng):
    X = BandOperator.J(1, DiagSeq.random_trig(rng), DiagSeq.random_trig(rng))
    Y = BandOperator.J(-2, DiagSeq.random_trig(rng), DiagSeq.random_trig(rng))
    lhs = ad_A(band_mul(X, Y))
    rhs = band_mul(ad_A(X), Y) + band_mul(X, ad_A(Y))
    assert lhs.max_coefficient_deviation(rhs, W20) <= 1e-13
    assert ad_A(X).adjoint().max_coefficient_deviation(-ad_A(X.adjoint()), W20) <= 1e-15


def test_adjoint_matches_conjugate_transpose(rng):
    X = BandOperator.J(2, DiagSeq.random_trig(rng), DiagSeq.random_trig(rng)) + BandOperator.diag(
        DiagSeq.random_trig(rng))
    M = np.asarray(materialize(X, W20))
    assert interior_deviation(M.conj().T, materialize(X.adjoint(), W20), 3) == 0.0


def test_J_reindexing(rng):
    al, be = DiagSeq.random_trig(rng), DiagSeq.random_trig(rng)
    for n in (1, -2, 3):
        lhs = BandOperator.J(n, al, be)
        rhs = BandOperator.J(-n, be.shift(-n), al.shift(-n))
        assert lhs.max_coefficient_deviation(rhs, W20) == 0.0


def test_ad_conjugate_constant_alpha_diag():
    out = ad_conjugate_diag_closed(1.0, 1, DiagSeq.constant(0.3))
    assert out.max_coefficient_deviation(BandOperator.zero(), W20) == 0.0


def test_ad_conjugate_diag_example():
    al = DiagSeq(lambda k: 1.0 / (1.0 + k.astype(float) ** 2))
    w = IndexWindow(-30, 30)
    G = np.asarray(materialize(conjugate_generator(1.0, 1), w))
    D = np.asarray(materialize(BandOperator.diag(al), w))
    closed = ad_conjugate_diag_closed(1.0, 1, al)
    assert interior_deviation(G @ D - D @ G, materialize(closed, w), 3) <= 1e-12
    assert ad_conjugate(1.0, 1, BandOperator.diag(al), w).max_coefficient_deviation(closed, w) <= 1e-15


@pytest.mark.parametrize("n,m", [(1, 1), (2, 2), (1, -1), (2, -2), (1, 3), (2, -1), (-1, 2)])
def test_ad_conjugate_J_cases(n, m, rng):
    al, be = DiagSeq.random_decaying(rng), DiagSeq.random_decaying(rng)
    z = complex(rng.standard_normal(), rng.standard_normal())
    w = IndexWindow(-40, 40)
    closed = ad_conjugate_J_closed(z, n, m, al, be)
    sym = ad_conjugate(z, n, BandOperator.J(m, al, be), w)
    assert sym.max_coefficient_deviation(closed, w) <= 1e-12
    G = np.asarray(materialize(conjugate_generator(z, n), w))
    J = np.asarray(materialize(BandOperator.J(m, al, be), w))
    assert interior_deviation(G @ J - J @ G, materialize(closed, w), abs(n) + abs(m) + 1) <= 1e-12
    if m == n:
        assert 0 in closed.offsets and 2 * n in closed.offsets
    if m == -n:
        assert 0 in closed.offsets and 2 * m in closed.offsets


def test_ad_conjugate_growth_guard():
    X = BandOperator.diag(DiagSeq(lambda k: np.exp(k.astype(float))))
    with pytest.raises(UnboundedGrowth):
        ad_conjugate(1.0, 1, X, IndexWindow(-40, 40))
    with pytest.raises(ValueError):
        ad_conjugate(0.0, 1, X)


def test_materialize_examples():
    assert np.array_equal(np.asarray(materialize(BandOperator.identity(), IndexWindow(0, 3))), np.eye(4))
    T = np.asarray(materialize(BandOperator.shift(1), IndexWindow(0, 3)))
    assert np.array_equal(T, np.eye(4, k=-1))
    assert np.array_equal(np.linalg.matrix_power(T, 4), np.zeros((4, 4)))


def test_B_a_band_entries():
    a = 1.3
    w = IndexWindow(-5, 5)
    M = np.asarray(materialize(B_a_band(a), w))
    for k in range(-5, 5):
        assert M[w.position(k + 1), w.position(k)] == pytest.approx(a * (2 * k + 1), abs=1e-14)
        assert M[w.position(k), w.position(k)] == pytest.approx(-4 * k, abs=1e-14)
    assert interior_deviation(M, conjugate_B_a(a, w), 1) <= 1e-14


def test_seminorm_examples():
    w = IndexWindow(-100, 100)
    rep = seminorm(DiagSeq.constant(0.7), 3, w)
    assert rep.values[0] == pytest.approx(0.7)
    assert all(v == 0.0 for v in rep.values[1:])
    assert rep.q == pytest.approx(0.7)
    big = IndexWindow(-10_000, 10_000)
    u = DiagSeq(lambda k: 1.0 / (1.0 + np.abs(k)))
    rep = seminorm(u, 1, big)
    k = big.indices().astype(float)
    vals = u.on(big)
    direct = np.max(np.abs(k[1:] * np.diff(vals)))
    assert rep.values[1] <= 1.0 and rep.values[1] == pytest.approx(direct, rel=1e-14)
    assert seminorm(X_SEQ, 1, w).converged is False
    with pytest.raises(WindowTooSmall):
        seminorm(u, 5, IndexWindow(0, 4))


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**31), st.integers(0, 4))
def test_seminorm_monotone_in_order(seed, n):
    u = DiagSeq.random_decaying(np.random.default_rng(seed))
    w = IndexWindow(-60, 60)
    reps = [seminorm(u, m, w) for m in range(n + 1)]
    qs = [r.q for r in reps]
    assert all(b >= a for a, b in zip(qs, qs[1:]))
    assert reps[-1].q >= reps[-1].values[0] >= 0


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**31), st.integers(-3, 3), st.integers(-3, 3))
def test_band_mul_matches_matrices(seed, n, m):
    rng = np.random.default_rng(seed)
    X = BandOperator.J(n, DiagSeq.random_trig(rng), DiagSeq.random_trig(rng)) if n else BandOperator.diag(
        DiagSeq.random_trig(rng))
    Y = BandOperator.J(m, DiagSeq.random_trig(rng), DiagSeq.random_trig(rng)) if m else BandOperator.diag(
        DiagSeq.random_trig(rng))
    w = IndexWindow(-15, 15)
    prod = np.asarray(materialize(X, w)) @ np.asarray(materialize(Y, w))
    assert interior_deviation(prod, materialize(band_mul(X, Y), w), abs(n) + abs(m) + 1) <= 1e-13
