"""Arcs, smooth bumps, functional calculus and commutator positivity.

The positivity of ``U* A U - A`` on spectral subspaces is measured by
compressing it to the range of a spectral projector. Vectors carrying most
of their weight near the window edges are attributed to the truncation of the
unbounded conjugate operator and may be filtered out.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp

from .errors import DegenerateMargin, SingularResolvent
from .models import ConstantSymbol, KoopmanModel, conjugate_B_a, constant_alpha, constant_symbol, ggt_pinned_block
from .opcore import (
    TWO_PI,
    IndexWindow,
    MatrixLike,
    SpectralDecomposition,
    as_matrix,
    check_hermitian,
    check_unitary,
    hermitian_eig,
    unitary_eig,
    wrap_phase,
)


@dataclass(frozen=True)
class Arc:
    """Closed arc of the circle running counter-clockwise from ``start`` to ``end``.

    Angles are stored in ``[0, 2*pi)``; ``start > end`` means the arc wraps
    through 0. ``full=True`` denotes the whole circle.
    """

    start: float
    end: float
    full: bool = False

    def __post_init__(self):
        object.__setattr__(self, "start", float(wrap_phase(self.start)))
        object.__setattr__(self, "end", float(wrap_phase(self.end)))
        if not self.full and self.start == self.end:
            raise ValueError("arc must have positive length")

    @classmethod
    def full_circle(cls) -> "Arc":
        return cls(0.0, 0.0, True)

    @classmethod
    def centered(cls, center: float, half_width: float) -> "Arc":
        if not 0 < half_width < np.pi:
            raise ValueError("half width must lie in (0, pi)")
        return cls(center - half_width, center + half_width)

    @classmethod
    def from_symbol(cls, symbol: ConstantSymbol) -> "Arc":
        lo, hi = symbol.arc_endpoints()
        return cls(lo, hi)

    @property
    def wraps(self) -> bool:
        return not self.full and self.start > self.end

    @property
    def length(self) -> float:
        if self.full:
            return TWO_PI
        return float(np.mod(self.end - self.start, TWO_PI))

    @property
    def midpoint(self) -> float:
        return float(wrap_phase(self.start + 0.5 * self.length))

    def offset(self, theta) -> np.ndarray:
        """Counter-clockwise distance from ``start`` in ``[0, 2*pi)``."""
        return wrap_phase(np.asarray(theta, dtype=np.float64) - self.start)

    def contains(self, theta) -> np.ndarray:
        if self.full:
            return np.ones(np.shape(theta), dtype=bool)
        return self.offset(theta) <= self.length

    def widened(self, margin: float) -> "Arc":
        if self.full or self.length + 2 * margin >= TWO_PI:
            return Arc.full_circle()
        return Arc(self.start - margin, self.end + margin)

    def intersection(self, other: "Arc") -> "Arc | None":
        """Intersection when it is a single arc, ``None`` when empty."""
        if self.full:
            return other
        if other.full:
            return self
        L1 = self.length
        u0 = float(self.offset(other.start))
        pieces = []
        for shift in (-TWO_PI, 0.0):
            lo = max(0.0, u0 + shift)
            hi = min(L1, u0 + shift + other.length)
            if hi > lo:
                pieces.append((lo, hi))
        if not pieces:
            return None
        if len(pieces) > 1:
            raise ValueError("intersection consists of two arcs")
        lo, hi = pieces[0]
        return Arc(self.start + lo, self.start + hi)


def _h(t):
    t = np.asarray(t, dtype=np.float64)
    out = np.zeros_like(t)
    pos = t > 0
    out[pos] = np.exp(-1.0 / t[pos])
    return out


def smooth_step(t):
    """``h(t) / (h(t) + h(1 - t))`` with ``h(t) = exp(-1/t)`` for ``t > 0``."""
    t = np.clip(np.asarray(t, dtype=np.float64), 0.0, 1.0)
    a = _h(t)
    b = _h(1.0 - t)
    return a / (a + b)


@dataclass(frozen=True)
class BumpFunction:
    """``C^infinity`` function equal to 1 on ``plateau`` and 0 off ``support``."""

    support: Arc
    plateau: Arc

    def __post_init__(self):
        if self.support.full:
            raise DegenerateMargin("support must be a proper arc", "bump")
        p0 = float(self.support.offset(self.plateau.start))
        p1 = p0 + self.plateau.length
        if self.plateau.full or not (0.0 < p0 and p1 < self.support.length):
            raise DegenerateMargin("plateau must lie strictly inside the support", "bump")
        object.__setattr__(self, "_p0", p0)
        object.__setattr__(self, "_p1", p1)

    def __call__(self, theta) -> np.ndarray:
        u = self.support.offset(theta)
        L = self.support.length
        p0, p1 = self._p0, self._p1
        out = np.zeros(u.shape)
        rise = u < p0
        out[rise] = smooth_step(u[rise] / p0)
        out[(u >= p0) & (u <= p1)] = 1.0
        fall = (u > p1) & (u < L)
        out[fall] = smooth_step((L - u[fall]) / (L - p1))
        return out


def bump(support: Arc, plateau: Arc) -> BumpFunction:
    return BumpFunction(support, plateau)


def spectral_projector(dec: SpectralDecomposition, arc: Arc) -> MatrixLike:
    """``sum_{theta_j in arc} v_j v_j^*``."""
    return dec.wrap(dec.projector(arc.contains(dec.phases)))


def func_calc(dec: SpectralDecomposition, phi: Callable[[np.ndarray], np.ndarray]) -> MatrixLike:
    """``sum_j phi(theta_j) v_j v_j^*``."""
    return dec.wrap(dec.apply(np.asarray(phi(dec.phases))))


def fourier_coefficients(phi: Callable, M: int, n_nodes: int = 8192) -> np.ndarray:
    """Trapezoidal coefficients ``hat phi_m``, ``m = -M..M`` (index ``m + M``)."""
    if n_nodes < 2 * M + 1:
        raise ValueError("need at least 2M + 1 nodes")
    theta = np.arange(n_nodes) * TWO_PI / n_nodes
    c = np.fft.fft(phi(theta)) / n_nodes
    m = np.arange(-M, M + 1)
    return c[np.mod(m, n_nodes)]


def func_calc_fourier(U: MatrixLike, phi: Callable, M: int, n_nodes: int = 8192) -> np.ndarray:
    """``sum_{|m| <= M} hat phi_m U^m`` evaluated by Horner's scheme in ``U`` and ``U*``."""
    u = as_matrix(U)
    n = u.shape[0]
    c = fourier_coefficients(phi, M, n_nodes)
    eye = np.eye(n, dtype=np.complex128)
    pos = c[M] * eye
    acc = c[2 * M] * eye
    for m in range(M - 1, 0, -1):
        acc = acc @ u + c[M + m] * eye
    if M > 0:
        pos = pos + acc @ u
        us = u.conj().T
        acc = c[0] * eye
        for m in range(M - 1, 0, -1):
            acc = acc @ us + c[M - m] * eye
        pos = pos + acc @ us
    return pos


# commutator positivity ---------------------------------------------------

@dataclass(frozen=True)
class MourreReport:
    arc: Arc
    eigenvalues: np.ndarray = field(repr=False)
    c_strict: float
    c_filtered: float
    n_discarded: int
    rank: int
    symbol_prediction: float | None = None
    boundary_weights: np.ndarray = field(default=None, repr=False)


def commutator_form(U: MatrixLike, A: MatrixLike) -> np.ndarray:
    """``U* A U - A``, symmetrised to remove rounding asymmetry."""
    u, a = as_matrix(U), as_matrix(A)
    m = u.conj().T @ a @ u - a
    return 0.5 * (m + m.conj().T)


def _compressed_spectrum(comp: np.ndarray, basis_weights: Callable[[np.ndarray], np.ndarray],
                         boundary_filter: float) -> tuple[np.ndarray, float, float, int, np.ndarray]:
    if comp.shape[0] == 0:
        return np.zeros(0), np.inf, np.inf, 0, np.zeros(0)
    comp = 0.5 * (comp + comp.conj().T)
    if not np.any(comp - np.diag(np.diag(comp))):
        d = np.real(np.diag(comp))
        order = np.argsort(d, kind="stable")
        lam = d[order]
        w = np.eye(comp.shape[0], dtype=np.complex128)[:, order]
    else:
        lam, w = hermitian_eig(comp)
    weights = basis_weights(w)
    keep = weights <= boundary_filter
    c_strict = float(lam[0])
    c_filt = float(np.min(lam[keep])) if keep.any() else np.inf
    return lam, c_strict, c_filt, int((~keep).sum()), weights


def compressed_commutator(M1: np.ndarray, basis: np.ndarray, boundary_mask: np.ndarray,
                          boundary_filter: float = 0.5) -> tuple[np.ndarray, float, float, int, np.ndarray]:
    """Eigenvalues of ``V* M1 V`` and the strict and filtered minima.

    Eigenvectors of the compression with more than ``boundary_filter`` of
    their weight on ``boundary_mask`` are discarded for the filtered minimum.
    An empty set has infimum ``+inf``.
    """
    if basis.shape[1] == 0:
        return np.zeros(0), np.inf, np.inf, 0, np.zeros(0)
    comp = basis.conj().T @ M1 @ basis

    def weights(w):
        vecs = basis[boundary_mask] @ w
        return np.sum(np.abs(vecs) ** 2, axis=0)

    return _compressed_spectrum(comp, weights, boundary_filter)


def mourre_constant(U: MatrixLike, A: MatrixLike, arc: Arc, boundary_filter: float = 0.5,
                    outer_fraction: float = 0.1, dec: SpectralDecomposition | None = None,
                    symbol: ConstantSymbol | None = None) -> MourreReport:
    """Compress ``U* A U - A`` to ``Ran E_arc`` and report its spectrum.

    Parameters
    ----------
    boundary_filter : float
        Weight threshold on the outer ``outer_fraction`` of the index window
        above which compression eigenvectors are ignored for ``c_filtered``.
    symbol : ConstantSymbol, optional
        When given, ``min j_a`` over the preimage of ``arc`` is attached.
    """
    if not 0.0 <= boundary_filter < 1.0:
        raise ValueError("boundary_filter must lie in [0, 1)")
    u = check_unitary(U, op="mourre_constant")
    a = check_hermitian(A, op="mourre_constant")
    if dec is None:
        dec = unitary_eig(u)
    sel = arc.contains(dec.phases)
    basis = dec.vectors[:, sel]
    # re-orthonormalise: clustered Schur vectors can lose a few digits
    if basis.shape[1]:
        basis, _ = np.linalg.qr(basis)
    outer = IndexWindow(0, u.shape[0] - 1).outer_mask(outer_fraction)
    lam, cs, cf, nd, w = compressed_commutator(commutator_form(u, a), basis, outer, boundary_filter)
    pred = symbol.min_j_over_preimage(arc.contains) if symbol is not None else None
    return MourreReport(arc, lam, cs, cf, nd, basis.shape[1], pred, w)


def koopman_mourre(model: KoopmanModel, arc: Arc, boundary_filter: float = 0.5,
                   outer_fraction: float = 0.1) -> MourreReport:
    """Commutator positivity of the truncated Koopman operator.

    The compression uses the basis vectors of ``shift_domain`` where the
    truncated shift acts exactly. Nonvacuum vectors carry continuous spectrum
    of the full operator, so they are kept for every arc; the vacuum
    (eigenphase 0) is kept only when ``arc`` contains 0. The commutator is
    assembled from the sparse shift and the diagonal conjugate operator.
    """
    dom = np.asarray(model.shift_domain)
    if not arc.contains(0.0):
        dom = dom[dom != 0]
    U = model.U_sparse
    A = sp.diags(model.a_diag)
    M1 = (U.conj().T @ A @ U - A).tocsr()
    comp = M1[dom][:, dom].toarray()
    mask = model.boundary_mask(outer_fraction)[dom]

    def weights(w):
        return np.sum(np.abs(w[mask]) ** 2, axis=0)

    lam, cs, cf, nd, w = _compressed_spectrum(comp, weights, boundary_filter)
    return MourreReport(arc, lam, cs, cf, nd, dom.size, None, w)


@dataclass(frozen=True)
class VirialScan:
    phases: np.ndarray
    values: np.ndarray
    localization: np.ndarray

    @property
    def max_abs(self) -> float:
        return float(np.max(np.abs(self.values))) if self.values.size else 0.0


def virial_scan(U: MatrixLike, A: MatrixLike, vectors: np.ndarray | None = None, phases=None,
                boundary_mask: np.ndarray | None = None, outer_fraction: float = 0.1) -> VirialScan:
    """``<phi_j, (U* A U - A) phi_j>`` for eigenvectors ``phi_j`` with boundary weights.

    Without ``vectors`` the eigenvectors come from :func:`unitary_eig`.
    """
    u, a = as_matrix(U), as_matrix(A)
    if vectors is None:
        dec = unitary_eig(u)
        vectors, phases = dec.vectors, dec.phases
    vectors = np.asarray(vectors, dtype=np.complex128)
    if vectors.ndim == 1:
        vectors = vectors[:, None]
    phases = np.asarray(phases if phases is not None else np.full(vectors.shape[1], np.nan), dtype=np.float64)
    uv = u @ vectors
    vals = np.real(np.sum(uv.conj() * (a @ uv), axis=0) - np.sum(vectors.conj() * (a @ vectors), axis=0))
    if boundary_mask is None:
        boundary_mask = IndexWindow(0, u.shape[0] - 1).outer_mask(outer_fraction)
    loc = np.sum(np.abs(vectors[boundary_mask]) ** 2, axis=0)
    return VirialScan(phases, vals, loc)


# symbol cross-check -----------------------------------------------------------

@dataclass(frozen=True)
class SymbolCheck:
    a: float
    window: IndexWindow
    deviation: float
    interior_min_eigenvalue: float
    lhs: np.ndarray = field(repr=False)
    rhs: np.ndarray = field(repr=False)


def symbol_rhs(a: float, window: IndexWindow) -> np.ndarray:
    """``2 (a - T)^{-1} (a T + a T* - 2)^2 (a - T*)^{-1}`` on a window (triangular solves)."""
    n = window.dim
    t = np.eye(n, k=-1)
    G = a * (t + t.T) - 2.0 * np.eye(n)
    try:
        Y = sla.solve_triangular(a * np.eye(n) - t, G, lower=True)
    except (np.linalg.LinAlgError, sla.LinAlgError) as exc:
        raise SingularResolvent(str(exc), "symbol_commutator_check") from exc
    if not np.all(np.isfinite(Y)):
        raise SingularResolvent("a - T is numerically singular", "symbol_commutator_check")
    return 2.0 * Y @ Y.T


def symbol_commutator_check(a: float, window: IndexWindow | int) -> SymbolCheck:
    """Compare ``H* B_a H - B_a`` for the pinned block with the symbol formula.

    The deviation is the max entry difference on the interior half-window
    (positions ``dim/4 .. 3 dim/4``).
    """
    if not a > 1:
        raise ValueError("a must exceed 1")
    if isinstance(window, (int, np.integer)):
        window = IndexWindow.centered(int(window))
    H, _ = ggt_pinned_block(constant_alpha(a), window)
    B = conjugate_B_a(a, window)
    lhs = commutator_form(H, B)
    rhs = symbol_rhs(a, window)
    n = window.dim
    sl = slice(n // 4, n - n // 4)
    dev = float(np.max(np.abs(lhs[sl, sl] - rhs[sl, sl])))
    lam = np.linalg.eigvalsh(lhs[sl, sl])
    return SymbolCheck(float(a), window, dev, float(lam[0]), lhs, rhs)


def wave_packet(window: IndexWindow, theta0: float, width: float, center: float = 0.0) -> np.ndarray:
    """Normalised Gaussian packet ``exp(-(k - c)^2 / (2 w^2) + i theta0 k)``."""
    k = window.indices().astype(np.float64)
    v = np.exp(-0.5 * ((k - center) / width) ** 2 + 1j * theta0 * k)
    return v / np.linalg.norm(v)


def symbol_quadratic_form(check: SymbolCheck, theta0: float = 0.0, width: float | None = None) -> tuple[float, float]:
    """``<phi, (H* B_a H - B_a) phi>`` for a wave packet and the symbol value ``j_a(theta0)``."""
    if width is None:
        width = check.window.dim / 16.0
    phi = wave_packet(check.window, theta0, width)
    val = float(np.real(np.vdot(phi, check.lhs @ phi)))
    return val, float(constant_symbol(check.a).j(theta0))
