import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.stats import unitary_group

from mourrelab.errors import DegenerateMargin
from mourrelab.experiments import random_hermitian
from mourrelab.models import conjugate_B_a, constant_alpha, constant_symbol, ggt_pinned, koopman_build
from mourrelab.opcore import tol_eig, unitary_eig
from mourrelab.spectral import (Arc, bump, func_calc, func_calc_fourier, koopman_mourre, mourre_constant,
                                smooth_step, spectral_projector, symbol_commutator_check, symbol_quadratic_form,
                                virial_scan)

PI = np.pi


@pytest.fixture(scope="module")
def h_small():
    H, _ = ggt_pinned(constant_alpha(1.25), 160)
    return H, conjugate_B_a(1.25, H.window), unitary_eig(H)


def test_arc_wrap_and_contains():
    arc = Arc(5.5, 0.5)
    assert arc.wraps
    assert arc.contains(0.0) and arc.contains(6.0) and not arc.contains(3.0)
    assert arc.length == pytest.approx(2 * PI - 5.0)
    assert Arc.full_circle().contains(1.234)
    with pytest.raises(ValueError):
        Arc(1.0, 1.0)


def test_bump_values():
    b = bump(Arc(PI - 1.0, PI + 1.0), Arc(PI - 0.5, PI + 0.5))
    assert b(np.array([PI]))[0] == 1.0
    assert b(np.array([0.1]))[0] == 0.0
    assert b(np.array([PI + 0.75]))[0] == pytest.approx(0.5, abs=1e-15)
    th = np.linspace(0, 2 * PI, 5000)
    v = b(th)
    assert np.all((v >= 0) & (v <= 1))
    with pytest.raises(DegenerateMargin):
        bump(Arc(1.0, 2.0), Arc(1.0, 1.5))


def test_smooth_step_symmetry():
    t = np.linspace(0, 1, 101)
    assert np.allclose(smooth_step(t) + smooth_step(1 - t), 1.0, atol=1e-15)


def test_projector_examples(h_small):
    H, _, dec = h_small
    assert np.allclose(spectral_projector(dec, Arc.full_circle()), np.eye(H.dim), atol=1e-12)
    U = np.diag(np.exp(1j * np.array([0.1, 0.2])))
    d = unitary_eig(U)
    assert np.max(np.abs(spectral_projector(d, Arc(3.0, 4.0)))) == 0.0


def test_projector_rank_on_symbol_arc():
    H, _ = ggt_pinned(constant_alpha(1.25), 400)
    dec = unitary_eig(H)
    E = np.asarray(spectral_projector(dec, Arc.from_symbol(constant_symbol(1.25))))
    assert np.trace(E).real >= 0.95 * 400


def test_projector_properties(h_small):
    H, _, dec = h_small
    tol = tol_eig(H.dim, 1.0)
    big = Arc(2.0, 4.5)
    small = Arc(2.5, 4.0)
    Eb = np.asarray(spectral_projector(dec, big))
    Es = np.asarray(spectral_projector(dec, small))
    assert np.max(np.abs(Eb @ Eb - Eb)) <= tol
    assert np.max(np.abs(Eb @ Es - Es)) <= tol


def test_func_calc_examples(h_small):
    H, _, dec = h_small
    one = np.asarray(func_calc(dec, lambda t: np.ones_like(t)))
    assert np.allclose(one, np.eye(H.dim), atol=1e-12)
    U = np.diag(np.exp(1j * np.array([0.1, 0.2, 6.0])))
    d = unitary_eig(U)
    off = np.asarray(func_calc(d, bump(Arc(2.0, 4.0), Arc(2.5, 3.5))))
    assert np.max(np.abs(off)) <= tol_eig(3, 1.0)


def test_func_calc_multiplicative_and_commutes(h_small):
    H, _, dec = h_small
    p1 = bump(Arc(2.0, 4.5), Arc(2.5, 4.0))
    p2 = bump(Arc(2.8, 5.0), Arc(3.2, 4.5))
    F1 = np.asarray(func_calc(dec, p1))
    F2 = np.asarray(func_calc(dec, p2))
    F12 = np.asarray(func_calc(dec, lambda t: p1(t) * p2(t)))
    tol = tol_eig(H.dim, 1.0)
    assert np.max(np.abs(F1 @ F2 - F12)) <= tol
    Hm = np.asarray(H)
    assert np.max(np.abs(F1 @ Hm - Hm @ F1)) <= tol


def test_fourier_cross_check(h_small):
    H, _, dec = h_small
    phi = bump(Arc(PI - 1.6, PI + 1.6), Arc(PI - 0.3, PI + 0.3))
    eig = np.asarray(func_calc(dec, phi))
    errs = [np.max(np.abs(eig - func_calc_fourier(H, phi, M))) for M in (20, 60, 200)]
    assert errs[-1] <= 1e-6
    assert errs[0] > errs[1] > errs[2]


def test_mourre_koopman():
    m = koopman_build(12, 2)
    rep = koopman_mourre(m, Arc(0.5, 2 * PI - 0.5))
    assert rep.c_strict == 1.0
    assert rep.c_filtered >= rep.c_strict


def test_mourre_ggt_small_and_monotone(h_small):
    H, B, dec = h_small
    sym = constant_symbol(1.25)
    big = mourre_constant(H, B, Arc(PI - 0.7, PI + 0.7), dec=dec, symbol=sym)
    small = mourre_constant(H, B, Arc(PI - 0.4, PI + 0.4), dec=dec, symbol=sym)
    assert small.c_strict >= big.c_strict - 1e-9
    assert big.c_filtered >= big.c_strict
    assert small.symbol_prediction == pytest.approx(sym.min_j_over_preimage(Arc(PI - 0.4, PI + 0.4).contains))


def test_virial_exact(h_small):
    H, B, dec = h_small
    scan = virial_scan(H, B, dec.vectors, dec.phases)
    assert scan.max_abs <= 1e-9
    m = koopman_build(10, 2)
    vs = virial_scan(m.U, m.A, m.vacuum, [0.0], m.boundary_mask())
    assert vs.values[0] == 0.0 and vs.localization[0] == 0.0


def test_virial_random_pairs(rng):
    U = unitary_group.rvs(30, random_state=4)
    A = random_hermitian(30, rng)
    assert virial_scan(U, A).max_abs <= 1e-9


def test_symbol_check():
    sc = symbol_commutator_check(1.25, 400)
    assert sc.deviation <= 1e-6
    assert sc.interior_min_eigenvalue >= -1e-6
    val, pred = symbol_quadratic_form(sc, 0.0)
    assert pred == pytest.approx(8.0)
    assert val == pytest.approx(pred, rel=0.05)


@settings(max_examples=20, deadline=None)
@given(st.floats(0, 2 * PI), st.floats(0.2, 1.0), st.floats(0.05, 0.9))
def test_bump_plateau_property(center, half, frac):
    b = bump(Arc.centered(center, half), Arc.centered(center, half * frac))
    th = np.linspace(0, 2 * PI, 2001)
    v = b(th)
    inner = Arc.centered(center, half * frac).contains(th)
    outer = ~Arc.centered(center, half).contains(th)
    assert np.all(v[inner] == 1.0)
    assert np.all(v[outer] == 0.0)
