"""Exact algebra of band operators ``sum_n D_{c_n} T^n`` on the lattice.

Conventions: ``T e_k = e_{k+1}``, ``(D_c u)_k = c_k u_k``, ``(S c)_k = c_{k+1}``
and ``A = D_x`` with ``x_k = k``. Diagonals are kept to the left of shifts,
using the exchange rule ``T^n D_c = D_{S^{-n} c} T^n``.

Coefficient sequences (:class:`DiagSeq`) are opaque vectorised callables, so
equality is only ever tested pointwise on a finite window.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Mapping

import numpy as np

from . import _kernels
from .errors import UnboundedGrowth, WindowTooSmall
from .opcore import IndexWindow, TruncatedOperator

SeqFunc = Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True, eq=False)
class DiagSeq:
    """Sequence ``k -> c_k`` evaluated on integer arrays.

    Parameters
    ----------
    func : callable
        Maps an ``int64`` array of sites to values of the same shape (a
        scalar return is broadcast).
    tag : str
        Informal description, e.g. ``"constant"``, ``"position"``,
        ``"derived"``.
    """

    func: SeqFunc = field(repr=False)
    tag: str = "derived"

    def __call__(self, k) -> np.ndarray:
        k = np.asarray(k, dtype=np.int64)
        return np.broadcast_to(np.asarray(self.func(k), dtype=np.complex128), k.shape)

    def on(self, window: IndexWindow) -> np.ndarray:
        return self(window.indices())

    # constructors
    @classmethod
    def constant(cls, c: complex) -> "DiagSeq":
        c = complex(c)
        return cls(lambda k: np.full(k.shape, c, dtype=np.complex128), "constant")

    @classmethod
    def position(cls) -> "DiagSeq":
        return cls(lambda k: k.astype(np.complex128), "position")

    @classmethod
    def from_callable(cls, f: SeqFunc, tag: str = "derived") -> "DiagSeq":
        return cls(f, tag)

    @classmethod
    def random_trig(cls, rng: np.random.Generator, n_modes: int = 4, scale: float = 1.0) -> "DiagSeq":
        """Bounded random sequence ``sum_j a_j exp(i (w_j k + p_j))``."""
        amp = scale * (rng.standard_normal(n_modes) + 1j * rng.standard_normal(n_modes)) / np.sqrt(2 * n_modes)
        freq = rng.uniform(0.0, np.pi, n_modes)
        phase = rng.uniform(0.0, 2 * np.pi, n_modes)

        def f(k):
            kk = k.astype(np.float64)[..., None]
            return np.sum(amp * np.exp(1j * (freq * kk + phase)), axis=-1)

        return cls(f, "random-trig")

    @classmethod
    def random_decaying(cls, rng: np.random.Generator, n_bumps: int = 3, spread: float = 20.0) -> "DiagSeq":
        """Bounded random sequence ``c + sum_j a_j / (1 + ((k - k_j) / w_j)^2)``.

        Differences decay like ``k^{-3}``, so ``sup_k |k (u_{k+n} - u_k)|`` is finite.
        """
        c = (rng.standard_normal() + 1j * rng.standard_normal()) / np.sqrt(2)
        amp = (rng.standard_normal(n_bumps) + 1j * rng.standard_normal(n_bumps)) / np.sqrt(2 * n_bumps)
        centre = rng.uniform(-spread, spread, n_bumps)
        width = rng.uniform(1.0, 0.5 * spread, n_bumps)

        def f(k):
            kk = k.astype(np.float64)[..., None]
            return c + np.sum(amp / (1.0 + ((kk - centre) / width) ** 2), axis=-1)

        return cls(f, "random-decaying")

    # algebra
    def _lift(self, other) -> "DiagSeq":
        return other if isinstance(other, DiagSeq) else DiagSeq.constant(other)

    def __add__(self, other):
        o = self._lift(other)
        return DiagSeq(lambda k: self(k) + o(k))

    __radd__ = __add__

    def __sub__(self, other):
        o = self._lift(other)
        return DiagSeq(lambda k: self(k) - o(k))

    def __rsub__(self, other):
        o = self._lift(other)
        return DiagSeq(lambda k: o(k) - self(k))

    def __mul__(self, other):
        o = self._lift(other)
        return DiagSeq(lambda k: self(k) * o(k))

    __rmul__ = __mul__

    def __neg__(self):
        return DiagSeq(lambda k: -self(k))

    def conj(self) -> "DiagSeq":
        return DiagSeq(lambda k: np.conj(self(k)))

    def shift(self, n: int) -> "DiagSeq":
        """``S^n c``, i.e. ``k -> c_{k+n}``."""
        n = int(n)
        if n == 0:
            return self
        return DiagSeq(lambda k: self(k + n))


X_SEQ = DiagSeq.position()
ONE = DiagSeq.constant(1.0)


@dataclass(frozen=True, eq=False)
class BandOperator:
    """Finite sum ``sum_n D_{c_n} T^n`` keyed by shift offset ``n``."""

    terms: Mapping[int, DiagSeq] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "terms", dict(sorted((int(n), c) for n, c in self.terms.items())))

    # constructors
    @classmethod
    def zero(cls) -> "BandOperator":
        return cls({})

    @classmethod
    def identity(cls) -> "BandOperator":
        return cls({0: ONE})

    @classmethod
    def shift(cls, n: int = 1) -> "BandOperator":
        """``T^n``."""
        return cls({int(n): ONE})

    @classmethod
    def diag(cls, c: DiagSeq) -> "BandOperator":
        return cls({0: c})

    @classmethod
    def position(cls) -> "BandOperator":
        """The conjugate operator ``A = D_x``."""
        return cls({0: X_SEQ})

    @classmethod
    def J(cls, n: int, alpha: DiagSeq, beta: DiagSeq) -> "BandOperator":
        """``J_n(D_alpha, D_beta) = T^n D_alpha + D_beta T^{-n}``; ``J_0 = D_{alpha + beta}``."""
        n = int(n)
        if n == 0:
            return cls({0: alpha + beta})
        return cls({n: alpha.shift(-n), -n: beta})

    # structure
    @property
    def offsets(self) -> tuple[int, ...]:
        return tuple(self.terms)

    @property
    def band_width(self) -> int:
        return max((abs(n) for n in self.terms), default=0)

    def coefficient(self, n: int) -> DiagSeq:
        return self.terms.get(int(n), DiagSeq.constant(0.0))

    # algebra
    def __add__(self, other: "BandOperator") -> "BandOperator":
        terms = dict(self.terms)
        for n, c in other.terms.items():
            terms[n] = terms[n] + c if n in terms else c
        return BandOperator(terms)

    def __neg__(self) -> "BandOperator":
        return BandOperator({n: -c for n, c in self.terms.items()})

    def __sub__(self, other: "BandOperator") -> "BandOperator":
        return self + (-other)

    def scale(self, z: complex) -> "BandOperator":
        return BandOperator({n: c * z for n, c in self.terms.items()})

    def __mul__(self, z):
        if isinstance(z, BandOperator):
            return NotImplemented
        return self.scale(z)

    __rmul__ = __mul__

    def __matmul__(self, other: "BandOperator") -> "BandOperator":
        return band_mul(self, other)

    def adjoint(self) -> "BandOperator":
        """``(D_c T^n)^* = D_{S^n conj(c)} T^{-n}``."""
        return BandOperator({-n: c.conj().shift(n) for n, c in self.terms.items()})

    def commutator(self, other: "BandOperator") -> "BandOperator":
        return band_mul(self, other) - band_mul(other, self)

    # evaluation
    def coefficients(self, window: IndexWindow) -> tuple[np.ndarray, np.ndarray]:
        """Offsets and the table ``coeffs[t, r] = c_{n_t}(k_lo + r)``."""
        offs = np.array(self.offsets, dtype=np.int64)
        k = window.indices()
        if offs.size == 0:
            return offs, np.zeros((0, window.dim), dtype=np.complex128)
        return offs, np.vstack([self.terms[int(n)](k) for n in offs])

    def max_coefficient_deviation(self, other: "BandOperator", window: IndexWindow) -> float:
        """Largest pointwise difference of coefficient sequences on ``window``."""
        k = window.indices()
        dev = 0.0
        for n in set(self.terms) | set(other.terms):
            d = self.coefficient(n)(k) - other.coefficient(n)(k)
            dev = max(dev, float(np.max(np.abs(d))))
        return dev

    def materialize(self, window: IndexWindow) -> TruncatedOperator:
        return materialize(self, window)


def band_mul(X: BandOperator, Y: BandOperator) -> BandOperator:
    """Exact normal-form product: ``D_a T^n D_b T^m = D_{a S^{-n} b} T^{n+m}``."""
    terms: dict[int, DiagSeq] = {}
    for n, a in X.terms.items():
        for m, b in Y.terms.items():
            c = a * b.shift(-n)
            terms[n + m] = terms[n + m] + c if n + m in terms else c
    return BandOperator(terms)


def ad_A(X: BandOperator) -> BandOperator:
    """``[A, X]`` with ``A = D_x``; each term ``D_c T^n`` is multiplied by ``n``."""
    return BandOperator({n: c * n for n, c in X.terms.items() if n != 0})


def conjugate_generator(z: complex, n: int) -> BandOperator:
    """``z T^n A + conj(z) A T^{-n}`` in normal form."""
    z = complex(z)
    return BandOperator({int(n): X_SEQ.shift(-n) * z}) + BandOperator({-int(n): X_SEQ * np.conj(z)})


def check_growth(X: BandOperator, window: IndexWindow, threshold: float = 1e12, op: str = "ad_conjugate") -> None:
    _, coeffs = X.coefficients(window)
    if coeffs.size:
        peak = float(np.max(np.abs(coeffs)))
        if not np.isfinite(peak) or peak > threshold:
            raise UnboundedGrowth(f"coefficient magnitude {peak:.3e} exceeds {threshold:.1e} on {window}", op)


def ad_conjugate(z: complex, n: int, X: BandOperator, window: IndexWindow | None = None,
                 threshold: float = 1e12) -> BandOperator:
    """Exact commutator ``[z T^n A + conj(z) A T^{-n}, X]``.

    If ``window`` is given, the coefficient sequences of the result are
    evaluated there and :class:`UnboundedGrowth` is raised when any exceeds
    ``threshold``.
    """
    if complex(z) == 0 or int(n) == 0:
        raise ValueError("ad_conjugate needs z != 0 and n != 0")
    out = conjugate_generator(z, n).commutator(X)
    if window is not None:
        check_growth(out, window, threshold)
    return out


# closed forms ---------------------------------------------------------------

def ad_A_J_closed(m: int, alpha: DiagSeq, beta: DiagSeq) -> BandOperator:
    """``ad_A J_m(D_alpha, D_beta) = m J_m(D_alpha, -D_beta)``."""
    return BandOperator.J(m, alpha, -beta).scale(m)


def ad_conjugate_diag_closed(z: complex, n: int, alpha: DiagSeq) -> BandOperator:
    """Closed form of ``[z T^n A + conj(z) A T^{-n}, D_alpha]``.

    Equals ``J_n(D_{z x (alpha - S^n alpha)}, D_{conj(z) x (S^n alpha - alpha)})``.
    """
    z = complex(z)
    zb = np.conj(z)
    d = alpha - alpha.shift(n)
    return BandOperator.J(n, X_SEQ * d * z, X_SEQ * (-d) * zb)


def ad_conjugate_J_closed(z: complex, n: int, m: int, alpha: DiagSeq, beta: DiagSeq) -> BandOperator:
    """Closed form of ``[z T^n A + conj(z) A T^{-n}, J_m(D_alpha, D_beta)]``.

    The result is ``J_{n+m}(D_a, D_b) + J_{m-n}(D_c, D_d)`` with

    * ``a = z x (alpha - S^n alpha) + z m alpha``
    * ``b = conj(z) x (S^n beta - beta) - conj(z) m beta``
    * ``c = conj(z) (x - n)(alpha - S^{-n} alpha) + conj(z) m alpha``
    * ``d = z (x - n)(S^{-n} beta - beta) - z m beta``

    where ``J_0(D_c, D_d)`` means ``D_{c + d}``. The cases ``m = n`` and
    ``m = -n`` therefore produce a diagonal part.
    """
    z = complex(z)
    zb = np.conj(z)
    x_n = X_SEQ - n
    a = X_SEQ * (alpha - alpha.shift(n)) * z + alpha * (z * m)
    b = X_SEQ * (beta.shift(n) - beta) * zb - beta * (zb * m)
    c = x_n * (alpha - alpha.shift(-n)) * zb + alpha * (zb * m)
    d = x_n * (beta.shift(-n) - beta) * z - beta * (z * m)
    return BandOperator.J(n + m, a, b) + BandOperator.J(m - n, c, d)


# materialisation -------------------------------------------------------------

def materialize(X: BandOperator, window: IndexWindow) -> TruncatedOperator:
    """Finite section ``<e_r, X e_c>`` for ``r, c`` in ``window``.

    Contributions that would land outside the window are dropped, so shifts
    become nilpotent and only entries at least ``X.band_width`` away from
    the edges coincide with those of the infinite operator's products.
    """
    offs, coeffs = X.coefficients(window)
    keep = np.abs(offs) < window.dim
    return TruncatedOperator(window, _kernels.band_fill(offs[keep], coeffs[keep]))


def interior_deviation(M1, M2, margin: int) -> float:
    """Max entry difference over rows and columns ``margin`` away from the edges."""
    a = np.asarray(M1)
    b = np.asarray(M2)
    n = a.shape[0]
    if 2 * margin >= n:
        raise WindowTooSmall(f"margin {margin} leaves no interior in dimension {n}", "interior_deviation")
    sl = slice(margin, n - margin)
    return float(np.max(np.abs(a[sl, sl] - b[sl, sl])))


# seminorms -----------------------------------------------------------------

@dataclass(frozen=True)
class SeminormReport:
    """Values ``p_{m,m}(u) = max_k |k^m (Delta^m u)_k|`` for ``m <= order``."""

    order: int
    values: tuple[float, ...]
    window: IndexWindow
    edge_growth: tuple[bool, ...]

    @property
    def q(self) -> float:
        return float(sum(self.values))

    @property
    def converged(self) -> bool:
        """True when no ``p_{m,m}`` attains its sup in the outer window collar."""
        return not any(self.edge_growth)


def seminorm(u: DiagSeq, n: int, window: IndexWindow, edge_fraction: float = 0.1) -> SeminormReport:
    """Regularity seminorms ``p_{m,m}`` for ``m = 0..n`` and their sum ``q_n``.

    ``(Delta u)_k = u_k - u_{k-1}``; ``Delta^m u`` is evaluated at the sites
    ``k >= k_lo + m`` of the window. A value is flagged as growing at the edge
    when its maximum over the outer ``edge_fraction`` of those sites strictly
    exceeds its maximum over the rest.
    """
    n = int(n)
    if n < 0:
        raise ValueError("order must be nonnegative")
    if window.dim < n + 3:
        raise WindowTooSmall(f"window of {window.dim} sites cannot hold {n} differences", "seminorm")
    vals = u.on(window)
    k_all = window.indices().astype(np.float64)
    values = []
    flags = []
    diff = vals
    for m in range(n + 1):
        if m > 0:
            diff = np.diff(diff)
        k = k_all[m:]
        w = np.abs(k ** m * diff) if m > 0 else np.abs(diff)
        values.append(float(np.max(w)))
        sub = IndexWindow(0, w.shape[0] - 1)
        outer = sub.outer_mask(edge_fraction)
        o_max = float(np.max(w[outer])) if outer.any() else 0.0
        i_max = float(np.max(w[~outer])) if (~outer).any() else 0.0
        flags.append(bool(o_max > i_max * (1.0 + 1e-9) and o_max > 0.0))
    return SeminormReport(n, tuple(values), window, tuple(flags))
