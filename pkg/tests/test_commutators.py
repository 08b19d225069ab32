import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import solve_ivp
from scipy.linalg import expm
from scipy.stats import unitary_group

from mourrelab.bandalg import BandOperator, materialize
from mourrelab.commutators import (CommutatorChain, EpsFamily, ad, ad_power, bch_bound, bch_transform, bp_sequence,
                                   expm_taylor, gronwall_bound, q_decay_fit, q_operators)
from mourrelab.errors import InsufficientPoints, SeriesDivergence, WindowMismatch
from mourrelab.experiments import random_hermitian, random_pair
from mourrelab.models import koopman_build
from mourrelab.opcore import IndexWindow, TruncatedOperator, op_norm

EPS = np.geomspace(1e-3, 1e-1, 7)


def test_ad_power_examples(rng):
    A = random_hermitian(8, rng)
    assert np.max(np.abs(ad_power(A, A, 1))) <= 1e-14
    B = random_hermitian(8, rng)
    assert np.array_equal(ad_power(A, B, 0), B)
    w = IndexWindow(-10, 10)
    X = materialize(BandOperator.position(), w)
    T = materialize(BandOperator.shift(1), w)
    assert np.array_equal(np.asarray(ad_power(X, T, 1)), np.asarray(T))
    with pytest.raises(WindowMismatch):
        ad_power(X, TruncatedOperator(IndexWindow(0, 20), np.eye(21)), 1)


def test_derivation_property(rng):
    A, B, C = (random_hermitian(10, rng) for _ in range(3))
    lhs = ad(A, B @ C) - ad(A, B) @ C - B @ ad(A, C)
    assert np.max(np.abs(lhs)) <= 1e-12


def test_chain_identities(rng):
    U, A = random_pair(20, rng)
    e1, e2 = CommutatorChain(U, A).identity_defects()
    assert e1 <= 1e-10 and e2 <= 1e-10
    B1 = CommutatorChain(U, A).B(1)
    assert np.max(np.abs(B1 - B1.conj().T)) <= 1e-10


def test_bp_trivial_and_koopman():
    A = random_hermitian(6, np.random.default_rng(0))
    for B in bp_sequence(CommutatorChain(np.eye(6), A, 3), 3):
        assert np.max(np.abs(B)) <= 1e-14
    m = koopman_build(8, 1)
    chain = CommutatorChain(m.U, m.A, 3, require_unitary=False)
    Bs = bp_sequence(chain, 3)
    dom = np.asarray(m.shift_domain)
    d = np.real(np.diag(Bs[0]))
    assert np.max(np.abs(Bs[0] - np.diag(np.diag(Bs[0])))) == 0.0
    # B_1 = A - U A U* is 1 on the image of the nonvacuum shift domain
    img = np.asarray(m.shift_image)[dom != 0]
    assert np.all(d[img] == 1.0)
    for B in Bs[1:]:
        assert np.max(np.abs(B)) == 0.0


def test_B2_against_expansion_oracle(rng):
    U, A = random_pair(40, rng)
    chain = CommutatorChain(U, A, 1)
    B1, B2 = chain.B(1), chain.B(2)
    assert np.max(np.abs(B2 - ad(A, B1))) <= 1e-13
    # order-eps coefficient of e^{-C} A e^{C} - A + (d e^{-C}) e^{C} + B_1 with C = eps B_1
    eps = np.linspace(-2e-2, 2e-2, 9)
    ys = []
    for e in eps:
        E = expm(-e * B1)
        ys.append(E @ A @ expm(e * B1) - A + (-B1 @ E) @ expm(e * B1) + B1)
    Y = np.stack([y.ravel() for y in ys])
    coef = np.polynomial.polynomial.polyfit(eps, Y, 4)
    assert np.max(np.abs(coef[1].reshape(40, 40) - B2)) <= 1e-6


def test_eps_family_deviation_bound(rng):
    U, A = random_pair(20, rng)
    fam = EpsFamily.from_chain(CommutatorChain(U, A, 2), 2, EPS)
    devs = [fam.deviation(e) for e in EPS]
    for e, d in zip(EPS, devs):
        assert d <= fam.deviation_bound(e) * (1 + 1e-12)
    assert all(b >= a for a, b in zip(devs, devs[1:]))


def test_q_operators_koopman_cancel():
    m = koopman_build(10, 2)
    chain = CommutatorChain(m.U, m.A, 2, require_unitary=False)
    fam = EpsFamily.from_chain(chain, 2)
    for e in (1e-3, 1e-1):
        for z in (1.0, 0.7j, -0.6):
            qp, qm = q_operators(fam, m.U, m.A, e, z)
            assert op_norm(qp) <= 1e-13 and op_norm(qm) <= 1e-13


def test_q_norm_depends_only_on_modulus(rng):
    U, A = random_pair(20, rng)
    fam = EpsFamily.from_chain(CommutatorChain(U, A, 1), 1)
    ref = [op_norm(q) for q in q_operators(fam, U, A, 0.05, 0.8)]
    for ph in np.linspace(0, 2 * np.pi, 5):
        got = [op_norm(q) for q in q_operators(fam, U, A, 0.05, 0.8 * np.exp(1j * ph))]
        assert got == pytest.approx(ref, rel=1e-12)
    with pytest.raises(ValueError):
        q_operators(fam, U, A, 0.05, 0.3)


def test_q_decay_slopes(rng):
    U, A = random_pair(40, rng)
    f1 = q_decay_fit(U, A, 1, EPS)
    f2 = q_decay_fit(U, A, 2, EPS)
    assert 1.9 <= f1.slope <= 2.3
    assert 2.9 <= f2.slope <= 3.4
    m = koopman_build(10, 1)
    fk = q_decay_fit(m.U, m.A, 1, EPS, require_unitary=False)
    assert fk.exact_cancellation
    with pytest.raises(InsufficientPoints):
        q_decay_fit(U, A, 1, [1e-2, 2e-2, 5e-2])


def test_series_guard():
    with pytest.raises(SeriesDivergence):
        expm_taylor(25 * np.eye(3))


def test_bch_examples(rng):
    A = random_hermitian(10, rng)
    C = 0.3 * random_hermitian(10, rng)
    assert np.max(np.abs(bch_transform(A * 0.1, A))) <= 1e-14
    oracle = expm(-C) @ A @ expm(C) - A
    got = bch_transform(C, A)
    assert np.max(np.abs(got - oracle)) <= 1e-12
    assert op_norm(got) <= bch_bound(C, A)
    B = random_hermitian(10, rng)
    t = 1e-3
    fd = expm(-t * B) @ A @ expm(t * B) - A
    assert np.max(np.abs(bch_transform(t * B, A) - fd)) <= t * 1e-8


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**31), st.floats(0.05, 2.0))
def test_bch_bound_property(seed, scale):
    rng = np.random.default_rng(seed)
    A = random_hermitian(8, rng)
    x = rng.standard_normal((8, 8)) + 1j * rng.standard_normal((8, 8))
    C = scale * x / np.linalg.norm(x, 2)
    assert op_norm(bch_transform(C, A)) <= bch_bound(C, A) * (1 + 1e-12)


def test_gronwall_trivial_cases():
    grid = np.linspace(0.0, 1.0, 101)
    assert np.allclose(gronwall_bound(2.0, 0.5, 0.0, 0.0, grid), 2.0)
    psi = np.full_like(grid, 0.7)
    b = gronwall_bound(2.0, 0.0, 0.0, psi, grid)
    assert np.allclose(b, 2.0 * np.exp(0.7 * (1.0 - grid)), rtol=1e-13)


def test_gronwall_saturating_ode():
    # f(l) = omega + int_l^b sqrt(f): f' = -sqrt(f), f(b) = omega
    omega, b = 1.3, 2.0
    grid = np.linspace(0.0, b, 10_000)
    sol = solve_ivp(lambda t, f: -np.sqrt(f), (b, 0.0), [omega], t_eval=grid[::-1], rtol=1e-12, atol=1e-14)
    f = sol.y[0][::-1]
    bound = gronwall_bound(omega, 0.5, 1.0, 0.0, grid)
    assert np.max(np.abs(bound - f)) <= 1e-6
    with pytest.raises(ValueError):
        gronwall_bound(1.0, 1.0, 1.0, 0.0, grid)
