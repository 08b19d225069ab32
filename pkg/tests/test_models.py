import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mourrelab.bandalg import interior_deviation, materialize
from mourrelab.errors import BasisTooLarge, NonDecayingTail, OutOfDisk
from mourrelab.models import (B_a_band, VerblunskySeq, conjugate_B_a, constant_alpha, constant_symbol, e0_perp,
                              ggt_build_closed, ggt_build_series, ggt_pinned, ggt_pinned_block, koopman_build,
                              pinned_window, verblunsky_profile)
from mourrelab.opcore import IndexWindow, unitarity_defect


def test_series_column_coefficients():
    alpha = constant_alpha(1.25)
    w = IndexWindow(-20, 20)
    H = np.asarray(ggt_build_series(alpha, w))
    c = w.position(0)
    col = H[:, c]
    assert col[c - 1] == pytest.approx(0.8, abs=1e-15)
    expected = [-0.36, -0.288, -0.2304]
    for i, e in enumerate(expected):
        assert col[c + i] == pytest.approx(e, abs=1e-15)
    assert np.allclose(col[c + 3:c + 10], -0.36 * 0.8 ** np.arange(3, 10), atol=1e-15)


def test_pin_decouples_columns():
    alpha = constant_alpha(1.25).with_pins((5,))
    w = IndexWindow(-10, 10)
    H = np.asarray(ggt_build_series(alpha, w))
    c = w.position(5)
    assert H[c - 1, c] == 0.0
    assert np.all(H[c:, :c] == 0.0)


def test_pinned_block_unitary():
    alpha = constant_alpha(1.25)
    H, _ = ggt_pinned_block(alpha, IndexWindow(-100, 99))
    assert unitarity_defect(H) <= 1e-10
    H99, _ = ggt_pinned(VerblunskySeq(lambda k: np.full(k.shape, 0.99 + 0j)), 60)
    assert unitarity_defect(H99) <= 1e-9


def test_pinned_window_sites():
    w, c0, c1 = pinned_window(10)
    assert (w.k_lo, w.k_hi, c0, c1) == (-5, 4, -5, 5)


def test_closed_form_matches_series():
    w = IndexWindow(-50, 50)
    for alpha in (constant_alpha(1.25), verblunsky_profile(0.6, "power", beta=3.0, C=0.1)):
        dev = interior_deviation(ggt_build_series(alpha, w), ggt_build_closed(alpha, w), 25)
        assert dev <= 1e-10
    Hs, _ = ggt_pinned(constant_alpha(1.25), 40, method="series")
    Hc, _ = ggt_pinned(constant_alpha(1.25), 40, method="closed")
    assert np.max(np.abs(np.asarray(Hs) - np.asarray(Hc))) <= 1e-12


def test_series_rejects_zero_alpha():
    alpha = VerblunskySeq(lambda k: np.zeros(k.shape, complex), standard_regime=False)
    with pytest.raises(NonDecayingTail):
        ggt_build_series(alpha, IndexWindow(-5, 5))
    with pytest.raises(ValueError):
        ggt_build_series(constant_alpha(1.25), IndexWindow(-5, 5), tail_tol=1e-3)


def test_conjugate_B_a_entries():
    w = IndexWindow(-50, 50)
    B = np.asarray(conjugate_B_a(1.25, w))
    z = w.position(0)
    assert B[z + 1, z] == 1.25 and B[z, z] == 0.0
    assert np.max(np.abs(B - B.conj().T)) <= 1e-15
    assert np.array_equal(np.asarray(materialize(B_a_band(1.25), w)), B)


def test_constant_symbol_values():
    s = constant_symbol(1.25)
    assert s.theta_a == pytest.approx(math.acos(0.8))
    assert s.f(0.0) == pytest.approx(-1.0)
    assert np.angle(s.f(s.theta_a)) == pytest.approx(math.atan2(-0.96, 0.28), abs=1e-12)
    assert s.arc_width == pytest.approx(3.7092, abs=1e-4)
    assert abs(s.j(s.theta_a)) <= 1e-12 and abs(s.j(-s.theta_a)) <= 1e-12
    assert s.j(0.0) == pytest.approx(8.0) and s.j(math.pi) == pytest.approx(8.0)
    th = np.linspace(0, 2 * np.pi, 10_000)
    assert np.max(np.abs(np.abs(s.f(th)) - 1)) <= 1e-12
    lo, hi = s.arc_endpoints()
    assert lo < math.pi < hi


def test_profiles():
    const = verblunsky_profile(0.6)
    assert const.delta_seminorm(3, IndexWindow(-100, 100)).q == 0.0
    p = verblunsky_profile(0.6, "power", beta=3.0, C=0.1)
    assert abs(p(0)) == pytest.approx(0.66)
    rep = p.delta_seminorm(2, IndexWindow(-2000, 2000))
    assert np.isfinite(rep.q) and rep.converged
    with pytest.raises(OutOfDisk):
        verblunsky_profile(0.95, "power", beta=3.0, C=0.1)


def test_compact_profile_changes_finitely_many_columns():
    w = IndexWindow(-40, 40)
    base = np.asarray(ggt_build_series(verblunsky_profile(0.6), w))
    pert = np.asarray(ggt_build_series(verblunsky_profile(0.6, "compact", support=[0], values=[0.2]), w))
    col_diff = np.max(np.abs(pert - base), axis=0)
    changed = np.flatnonzero(col_diff > 1e-12)
    assert changed.size and changed.max() <= w.position(0) + 1


def test_koopman_small():
    m = koopman_build(3, 1)
    assert m.basis.subsets == ((),) + tuple((i,) for i in range(-3, 4))
    U = np.asarray(m.U)
    assert U[m.basis.index((-2,)), m.basis.index((-3,))] == 1
    assert m.a_diag[m.basis.index((2,))] == 2.0
    assert m.a_diag[0] == 0.0


def test_koopman_level_two():
    m = koopman_build(4, 2)
    assert len(m.basis) == sum(math.comb(9, n) for n in range(3))
    i = m.basis.index((0, 2))
    assert m.a_diag[i] == 1.0
    U = np.asarray(m.U)
    assert U[m.basis.index((1, 3)), i] == 1


def test_koopman_commutator_and_levels():
    m = koopman_build(6, 2)
    d = m.commutator_on_domain()
    dom = np.asarray(m.shift_domain)
    assert np.all(d[dom != 0] == 1.0) and np.all(d[dom == 0] == 0.0)
    U = np.asarray(m.U)
    for n in range(3):
        Q = np.diag(m.level_projector_diag(n))
        assert np.array_equal(U @ Q, Q @ U)
    with pytest.raises(BasisTooLarge):
        koopman_build(100, 3, cap=1000)


def test_e0_perp():
    assert e0_perp(0.5) == pytest.approx((-1.0, 1.0))
    lo, hi = e0_perp(0.25)
    assert (lo, hi) == pytest.approx((-1.7320508, 0.5773503), abs=1e-6)
    assert abs(0.25 * lo + 0.75 * hi) <= 1e-15
    assert 0.25 * lo ** 2 + 0.75 * hi ** 2 == pytest.approx(1.0)


@settings(max_examples=15, deadline=None)
@given(st.floats(1.05, 4.0), st.floats(0, 2 * np.pi), st.integers(8, 60))
def test_pinned_blocks_always_unitary(a, phase, N):
    H, _ = ggt_pinned(constant_alpha(a, phase), N)
    assert unitarity_defect(H) <= 1e-9
