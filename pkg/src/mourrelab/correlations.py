"""Correlation norms ``c_m = ||<A>^{-s} U^m Phi(U) <A>^{-s}||`` and decay fits."""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from . import _kernels
from .errors import FloorDominates, InsufficientPoints, WindowClipsOptimum
from .models import KoopmanModel
from .opcore import MatrixLike, SpectralDecomposition, as_matrix, tol_eig, unitary_eig, weight_power

MIN_FIT_POINTS = 8


@dataclass(frozen=True)
class DecaySeries:
    """Correlation norms on an ``m`` grid, optionally with a fit."""

    s: float
    m: np.ndarray
    values: np.ndarray
    fit_window: tuple[int, int] | None = None
    exponent: float | None = None
    C: float | None = None
    residual: float | None = None
    floor: float = 0.0
    clean: np.ndarray | None = field(default=None, repr=False)

    def value_at(self, m: int) -> float:
        idx = np.flatnonzero(self.m == m)
        if not idx.size:
            raise KeyError(m)
        return float(self.values[idx[0]])


@dataclass(frozen=True)
class DecayFit:
    exponent: float
    C: float
    residual: float
    n_points: int


def japanese(m) -> np.ndarray:
    """``<m> = sqrt(1 + m^2)``."""
    m = np.asarray(m, dtype=np.float64)
    return np.sqrt(1.0 + m * m)


def _phi_on_spectrum(dec: SpectralDecomposition, U: np.ndarray, Phi) -> np.ndarray:
    if callable(Phi):
        return np.asarray(Phi(dec.phases), dtype=np.complex128)
    P = np.asarray(as_matrix(Phi), dtype=np.complex128)
    comm = float(np.max(np.abs(P @ U - U @ P)))
    if comm > tol_eig(P.shape[0], float(np.max(np.abs(P)))):
        raise ValueError(f"Phi does not commute with U (defect {comm:.3e})")
    return np.einsum("ij,ik,kj->j", dec.vectors.conj(), P, dec.vectors)


def correlation_norms(U: MatrixLike, A: MatrixLike, Phi, s: float, m_grid: Sequence[int],
                      dec: SpectralDecomposition | None = None) -> DecaySeries:
    """Correlation norms by phase multiplication in eigencoordinates.

    With ``R = V* W`` (``W = <A>^{-s}``), ``c_m = ||R* diag(phi e^{i m theta}) R||``.
    Rows with ``phi = 0`` are dropped and a thin QR of the remaining rows
    reduces each norm to a ``p x p`` problem, where ``p`` is the number of
    eigenphases in the support of ``phi``.

    ``Phi`` is either a function of the phase or a matrix commuting with ``U``.
    """
    u = np.asarray(as_matrix(U), dtype=np.complex128)
    if dec is None:
        dec = unitary_eig(u)
    phi = _phi_on_spectrum(dec, u, Phi)
    W = np.asarray(as_matrix(weight_power(A, s)), dtype=np.complex128)
    keep = np.abs(phi) > 0
    m_arr = np.asarray(m_grid, dtype=np.int64)
    if not keep.any():
        return DecaySeries(float(s), m_arr, np.zeros(m_arr.size))
    R = dec.vectors[:, keep].conj().T @ W
    _, S = sla.qr(R.conj().T, mode="economic")
    ph = dec.phases[keep]
    g0 = phi[keep]
    vals = np.empty(m_arr.size)
    for i, m in enumerate(m_arr):
        g = g0 * np.exp(1j * m * ph)
        vals[i] = sla.svdvals((S * g) @ S.conj().T)[0]
    return DecaySeries(float(s), m_arr, vals)


def koopman_correlation_norms(model: KoopmanModel, s: float, m_grid: Sequence[int]) -> DecaySeries:
    """``||Q^perp <A>^{-s} U^m <A>^{-s} Q^perp||`` on the truncated Koopman model.

    ``U^m`` is a sparse power of the truncated shift (``U*`` powers for
    negative ``m``). When ``M* M`` is diagonal, as for a weighted partial
    permutation, the norm is the square root of its largest entry.
    """
    w = (1.0 + model.a_diag ** 2) ** (-0.5 * s) * model.qperp_diag
    Wd = sp.diags(w)
    U = model.U_sparse
    Us = U.conj().T.tocsr()
    m_arr = np.asarray(m_grid, dtype=np.int64)
    vals = np.empty(m_arr.size)
    cache = {0: sp.identity(model.dim, dtype=np.complex128, format="csr")}
    for i, m in enumerate(m_arr):
        key = int(m)
        if key not in cache:
            base, step = (U, 1) if key > 0 else (Us, -1)
            start = max((k for k in cache if k * step >= 0 and abs(k) <= abs(key)), key=abs)
            P = cache[start]
            for _ in range(abs(key) - abs(start)):
                P = (base @ P).tocsr()
            cache[key] = P
        M = (Wd @ cache[key] @ Wd).tocsr()
        G = (M.conj().T @ M).tocsr()
        off = G - sp.diags(G.diagonal())
        if off.count_nonzero() == 0 or abs(off).max() == 0:
            vals[i] = float(np.sqrt(np.max(np.real(G.diagonal())))) if G.nnz else 0.0
        else:
            vals[i] = float(spla.svds(M, k=1, return_singular_vectors=False)[0])
    return DecaySeries(float(s), m_arr, vals)


def bernoulli_oracle(s: float, m: int, L: int) -> float:
    """``max_i (1 + i^2)^{-s/2} (1 + (i+m)^2)^{-s/2}`` over ``|i|, |i+m| <= L``."""
    m = int(m)
    if abs(m) > 2 * L:
        raise WindowClipsOptimum(f"no admissible site for m = {m} and L = {L}", "bernoulli_oracle")
    val, i, lo, hi = _kernels.bernoulli_scan(s, m, L)
    if hi > lo and (i == lo or i == hi):
        raise WindowClipsOptimum(f"maximiser i = {i} touches the window edge for m = {m}, L = {L}", "bernoulli_oracle")
    return val


def floor_mask(series: DecaySeries, reference: DecaySeries, rtol: float = 0.1) -> np.ndarray:
    """Points where the series agrees with a larger-dimension reference to ``rtol``."""
    if not np.array_equal(series.m, reference.m):
        raise ValueError("series must share the m grid")
    return np.abs(series.values - reference.values) <= rtol * np.abs(reference.values)


def floor_level(series: DecaySeries, reference: DecaySeries) -> float:
    """Largest discrepancy between the two runs, a proxy for the truncation floor."""
    return float(np.max(np.abs(series.values - reference.values)))


def decay_exponent_fit(series: DecaySeries, m_window: tuple[int, int], clean: np.ndarray | None = None) -> DecayFit:
    """Least-squares fit of ``log c_m = log C - p log <m>`` over ``m_window``.

    Points outside ``clean`` (if given) and nonpositive values are excluded.
    """
    lo, hi = m_window
    inside = (series.m >= lo) & (series.m <= hi)
    if inside.sum() < MIN_FIT_POINTS:
        raise InsufficientPoints(f"{int(inside.sum())} points in window [{lo}, {hi}]", "decay_exponent_fit")
    use = inside & (series.values > 0)
    if clean is not None:
        use &= np.asarray(clean, dtype=bool)
    if use.sum() < MIN_FIT_POINTS:
        raise FloorDominates(f"only {int(use.sum())} points above the truncation floor", "decay_exponent_fit")
    x = np.log(japanese(series.m[use]))
    y = np.log(series.values[use])
    coef, res, *_ = np.polyfit(x, y, 1, full=True)
    resid = float(np.sqrt(res[0] / x.size)) if res.size else 0.0
    return DecayFit(float(-coef[0]), float(np.exp(coef[1])), resid, int(use.sum()))


def fit_with_floor(series: DecaySeries, reference: DecaySeries, m_window: tuple[int, int],
                   rtol: float = 0.1, soft: bool = True) -> tuple[DecaySeries, bool]:
    """Fit after excluding floor points found by comparison with ``reference``.

    Returns the annotated series and a flag telling whether the floor left
    enough clean points. With ``soft=True`` a floor-dominated window falls back
    to fitting every point and emits a warning.
    """
    clean = floor_mask(series, reference, rtol)
    ok = True
    try:
        fit = decay_exponent_fit(series, m_window, clean)
    except FloorDominates:
        if not soft:
            raise
        ok = False
        warnings.warn("truncation floor leaves fewer than 8 clean points; fitting all points", RuntimeWarning)
        fit = decay_exponent_fit(series, m_window)
    out = replace(series, fit_window=tuple(m_window), exponent=fit.exponent, C=fit.C, residual=fit.residual,
                  floor=floor_level(series, reference), clean=clean)
    return out, ok
