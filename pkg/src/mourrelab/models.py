"""Finite unitary models.

* GGT matrices ``H(alpha)`` built from Verblunsky coefficients, with the
  conjugate operator ``B_a`` and the constant-coefficient symbol ``f_a``.
* The Koopman operator of the two-sided Bernoulli shift in the
  Fourier-Walsh basis, with the conjugate operator ``A f_sigma = mean(sigma) f_sigma``.

GGT blocks are closed by pinning ``|alpha| = 1`` at two cut sites, which
makes ``sqrt(1 - |alpha|^2)`` vanish there and decouples an exactly unitary
block between them.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Mapping, Sequence

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp

from . import _kernels
from .bandalg import BandOperator, DiagSeq, SeminormReport, band_mul, seminorm
from .errors import BasisTooLarge, NonDecayingTail, OutOfDisk, SingularResolvent
from .opcore import IndexWindow, TruncatedOperator, wrap_phase

DEFAULT_TAIL_TOL = 1e-14


# Verblunsky coefficients -----------------------------------------------------

@dataclass(frozen=True, eq=False)
class VerblunskySeq:
    """Sequence ``k -> alpha_k`` in the unit disk with optional unit-modulus pins.

    Attributes
    ----------
    func : callable
        Vectorised map from an integer array of sites to complex values.
    pins : mapping
        Sites ``c`` with ``|alpha_c| = 1`` and their values.
    standard_regime : bool
        Whether ``inf |alpha_k| > 0`` off the pins (geometric tails guaranteed).
    delta : DiagSeq or None
        Relative perturbation ``alpha_k = alpha_inf (1 + delta_k)`` when the
        sequence was built from a profile.
    """

    func: Callable[[np.ndarray], np.ndarray] = field(repr=False)
    pins: Mapping[int, complex] = field(default_factory=dict)
    standard_regime: bool = True
    alpha_inf: complex | None = None
    delta: DiagSeq | None = field(default=None, repr=False)
    label: str = "custom"

    def __post_init__(self):
        pins = {}
        for c, v in dict(self.pins).items():
            v = complex(v)
            if abs(abs(v) - 1.0) > 1e-14:
                raise OutOfDisk(f"pin value at {c} has modulus {abs(v)!r}, expected 1", "VerblunskySeq")
            pins[int(c)] = v / abs(v)
        object.__setattr__(self, "pins", pins)

    def raw(self, k) -> np.ndarray:
        k = np.asarray(k, dtype=np.int64)
        return np.broadcast_to(np.asarray(self.func(k), dtype=np.complex128), k.shape).copy()

    def __call__(self, k) -> np.ndarray:
        k = np.asarray(k, dtype=np.int64)
        out = self.raw(k)
        for c, v in self.pins.items():
            out[k == c] = v
        return out

    def pin_mask(self, k) -> np.ndarray:
        k = np.asarray(k, dtype=np.int64)
        mask = np.zeros(k.shape, dtype=bool)
        for c in self.pins:
            mask |= k == c
        return mask

    def ainv(self, k) -> np.ndarray:
        """``1 / a_k = sqrt(1 - |alpha_k|^2)``, exactly zero on pins."""
        k = np.asarray(k, dtype=np.int64)
        al = self(k)
        out = np.sqrt(np.maximum(1.0 - np.abs(al) ** 2, 0.0))
        out[self.pin_mask(k)] = 0.0
        return out

    def a(self, k) -> np.ndarray:
        with np.errstate(divide="ignore"):
            return 1.0 / self.ainv(k)

    def check_disk(self, k, op: str = "VerblunskySeq") -> None:
        k = np.asarray(k, dtype=np.int64)
        off = ~self.pin_mask(k)
        mags = np.abs(self.raw(k)[off])
        if mags.size and not np.all(mags < 1.0):
            bad = k[off][np.argmax(mags)]
            raise OutOfDisk(f"|alpha_{bad}| = {mags.max():.6g} >= 1 off the pins", op)

    def with_pins(self, sites: Sequence[int], value: complex | None = None) -> "VerblunskySeq":
        """Copy with ``|alpha| = 1`` imposed at ``sites``.

        The default pin value is ``alpha_c / |alpha_c|`` (or ``1`` if it vanishes).
        """
        pins = dict(self.pins)
        for c in sites:
            if value is None:
                v = complex(self.raw(np.array([c]))[0])
                pins[int(c)] = v / abs(v) if v != 0 else 1.0 + 0j
            else:
                pins[int(c)] = complex(value)
        return VerblunskySeq(self.func, pins, self.standard_regime, self.alpha_inf, self.delta, self.label)

    def delta_seminorm(self, n: int, window: IndexWindow) -> SeminormReport:
        if self.delta is None:
            raise ValueError("sequence was not built from a perturbation profile")
        return seminorm(self.delta, n, window)


def verblunsky_profile(alpha_inf: complex, kind: str = "constant", *, beta: float = 3.0, C: complex = 0.0,
                       support: Sequence[int] = (), values: Sequence[complex] = ()) -> VerblunskySeq:
    """Build ``alpha_k = alpha_inf (1 + delta_k)`` from a named profile.

    Parameters
    ----------
    alpha_inf : complex
        Limit value, ``0 < |alpha_inf| < 1`` for the standard regime.
    kind : {"constant", "power", "compact"}
        ``constant``: ``delta = 0``. ``power``: ``delta_k = C (1 + |k|)^{-beta}``.
        ``compact``: ``delta_k = values[i]`` at ``support[i]`` and 0 elsewhere.
    """
    alpha_inf = complex(alpha_inf)
    if not abs(alpha_inf) < 1.0:
        raise OutOfDisk(f"|alpha_inf| = {abs(alpha_inf):.6g} must be < 1", "verblunsky_profile")
    if kind == "constant":
        delta = DiagSeq.constant(0.0)
        sup_factor = 1.0
        inf_factor = 1.0
    elif kind == "power":
        beta = float(beta)
        C = complex(C)
        if beta <= 0:
            raise ValueError("power profile needs beta > 0")
        delta = DiagSeq(lambda k: C * (1.0 + np.abs(k)) ** (-beta), "power")
        # |1 + tC| is convex in t in [0, 1]: extremes at the endpoints, minimum possibly inside
        sup_factor = max(abs(1 + C), 1.0)
        t = np.linspace(0.0, 1.0, 2001)[1:]
        inf_factor = float(np.min(np.abs(1 + t * C)))
    elif kind == "compact":
        if len(support) != len(values):
            raise ValueError("support and values must have equal length")
        table = {int(s): complex(v) for s, v in zip(support, values)}

        def dfun(k, table=table):
            out = np.zeros(k.shape, dtype=np.complex128)
            for s, v in table.items():
                out[k == s] = v
            return out

        delta = DiagSeq(dfun, "compact")
        factors = [abs(1 + v) for v in table.values()] + [1.0]
        sup_factor = max(factors)
        inf_factor = min(factors)
    else:
        raise ValueError(f"unknown profile kind {kind!r}")
    if abs(alpha_inf) * sup_factor >= 1.0:
        raise OutOfDisk(f"profile reaches |alpha| = {abs(alpha_inf) * sup_factor:.6g} >= 1", "verblunsky_profile")
    regime = abs(alpha_inf) > 0 and inf_factor > 0
    return VerblunskySeq(lambda k: alpha_inf * (1.0 + delta(k)), {}, regime, alpha_inf, delta, kind)


def constant_alpha(a: float, phase: float = 0.0) -> VerblunskySeq:
    """Constant coefficients with ``|alpha|^2 + a^{-2} = 1``."""
    if not a > 1:
        raise ValueError("a must exceed 1")
    return verblunsky_profile(np.sqrt(1.0 - a ** -2) * np.exp(1j * phase), "constant")


# GGT construction ------------------------------------------------------------

def _check_tail_tol(tail_tol: float) -> None:
    if not 0.0 < tail_tol <= 1e-8:
        raise ValueError(f"tail_tol must lie in (0, 1e-8], got {tail_tol}")


def ggt_build_series(alpha: VerblunskySeq, window: IndexWindow, tail_tol: float = DEFAULT_TAIL_TOL) -> TruncatedOperator:
    """Finite section of ``H(alpha)`` from its column action.

    Column ``k`` holds ``1/a_k`` at row ``k - 1`` and
    ``-conj(alpha_k) alpha_{i+1} prod_{j=k+1}^{i} 1/a_j`` at rows ``i >= k``; the
    downward series stops when the running product drops below ``tail_tol``.
    Coefficients are read on ``[k_lo, k_hi + 1]``.
    """
    _check_tail_tol(tail_tol)
    k = window.extended(right=1).indices()
    alpha.check_disk(k, "ggt_build_series")
    off = ~alpha.pin_mask(k)
    al = alpha(k)
    if off.any() and np.min(np.abs(al[off])) == 0.0:
        raise NonDecayingTail("some off-pin coefficient vanishes; tails need not decay", "ggt_build_series")
    return TruncatedOperator(window, _kernels.ggt_fill(al, alpha.ainv(k), tail_tol))


def ggt_build_closed(alpha: VerblunskySeq, window: IndexWindow) -> TruncatedOperator:
    """Finite section of ``T* D_2 - T* D_1 T (I - D_2 T)^{-1} D_1*``.

    ``D_1 = diag(alpha)``, ``D_2 = diag(sqrt(1 - |alpha|^2))``. The product is
    assembled on the window extended by one site to the right and then
    restricted; ``I - D_2 T`` is unit lower triangular and is inverted by a
    triangular solve.
    """
    ext = window.extended(right=1)
    k = ext.indices()
    alpha.check_disk(k, "ggt_build_closed")
    n = ext.dim
    d1 = np.diag(alpha(k))
    d2 = np.diag(alpha.ainv(k).astype(np.complex128))
    t = np.eye(n, k=-1, dtype=np.complex128)
    ts = t.conj().T
    lhs = np.eye(n, dtype=np.complex128) - d2 @ t
    try:
        inv_d1s = sla.solve_triangular(lhs, d1.conj().T, lower=True, unit_diagonal=True)
    except (np.linalg.LinAlgError, sla.LinAlgError) as exc:
        raise SingularResolvent(str(exc), "ggt_build_closed") from exc
    if not np.all(np.isfinite(inv_d1s)):
        raise SingularResolvent("I - D_2 T is numerically singular", "ggt_build_closed")
    h = ts @ d2 - ts @ d1 @ t @ inv_d1s
    m = window.dim
    return TruncatedOperator(window, h[:m, :m])


def pinned_window(N: int) -> tuple[IndexWindow, int, int]:
    """Block window ``[c0, c1 - 1]`` of size ``N`` with pin sites ``c0 = -(N // 2)`` and ``c1 = c0 + N``."""
    if N < 2:
        raise ValueError("block size must be at least 2")
    c0 = -(int(N) // 2)
    c1 = c0 + int(N)
    return IndexWindow(c0, c1 - 1), c0, c1


def ggt_pinned_block(alpha: VerblunskySeq, window: IndexWindow, pin_value: complex | None = None,
                     tail_tol: float = DEFAULT_TAIL_TOL, method: str = "series") -> tuple[TruncatedOperator, VerblunskySeq]:
    """Unitary GGT block on ``window`` closed by pins at ``k_lo`` and ``k_hi + 1``."""
    pinned = alpha.with_pins((window.k_lo, window.k_hi + 1), pin_value)
    if method == "series":
        H = ggt_build_series(pinned, window, tail_tol)
    elif method == "closed":
        H = ggt_build_closed(pinned, window)
    else:
        raise ValueError(f"unknown method {method!r}")
    return H, pinned


def ggt_pinned(alpha: VerblunskySeq, N: int, pin_value: complex | None = None,
               tail_tol: float = DEFAULT_TAIL_TOL, method: str = "series") -> tuple[TruncatedOperator, VerblunskySeq]:
    """Exactly unitary ``N x N`` GGT block on the centred window.

    Returns the block and the pinned coefficient sequence.
    """
    window, _, _ = pinned_window(N)
    return ggt_pinned_block(alpha, window, pin_value, tail_tol, method)


def conjugate_B_a(a: float, window: IndexWindow) -> TruncatedOperator:
    """Real symmetric tridiagonal ``B_a``: ``(k+1, k) = (k, k+1) = a(2k+1)``, ``(k, k) = -4k``."""
    k = window.indices().astype(np.float64)
    off = a * (2.0 * k[:-1] + 1.0)
    m = np.diag(-4.0 * k) + np.diag(off, -1) + np.diag(off, 1)
    return TruncatedOperator(window, m.astype(np.complex128))


def B_a_band(a: float) -> BandOperator:
    """``G A + A G`` with ``G = a T + a T* - 2`` as a band operator."""
    G = BandOperator.shift(1).scale(a) + BandOperator.shift(-1).scale(a) + BandOperator.identity().scale(-2.0)
    A = BandOperator.position()
    return band_mul(G, A) + band_mul(A, G)


# constant-coefficient symbol ---------------------------------------------------

@dataclass(frozen=True)
class ConstantSymbol:
    """Symbol data of the constant-coefficient GGT operator with parameter ``a > 1``."""

    a: float
    alpha_inf: complex

    @property
    def theta_a(self) -> float:
        return float(np.arccos(1.0 / self.a))

    def F(self, z):
        z = np.asarray(z, dtype=np.complex128)
        return (1.0 - self.a * z) / (z * (self.a - z))

    def f(self, theta):
        e = np.exp(1j * np.asarray(theta, dtype=np.float64))
        return (np.conj(e) - self.a) / (self.a - e)

    def g(self, theta):
        return 2.0 * self.a * np.cos(theta) - 2.0

    def j(self, theta):
        theta = np.asarray(theta, dtype=np.float64)
        return 8.0 * (self.a * np.cos(theta) - 1.0) ** 2 / np.abs(self.a - np.exp(1j * theta)) ** 2

    def phase_map(self, theta):
        """``theta -> arg f_a(theta)`` wrapped to ``[0, 2*pi)``."""
        return wrap_phase(np.angle(self.f(theta)))

    def arc_endpoints(self) -> tuple[float, float]:
        """``(arg f_a(-theta_a), arg f_a(theta_a))``; the arc runs through ``arg f_a(0) = pi``."""
        return float(self.phase_map(-self.theta_a)), float(self.phase_map(self.theta_a))

    @property
    def arc_width(self) -> float:
        lo, hi = self.arc_endpoints()
        return float(np.mod(hi - lo, 2 * np.pi))

    def min_j_over_preimage(self, contains: Callable[[np.ndarray], np.ndarray], n_grid: int = 200_000) -> float:
        """Minimum of ``j_a`` over ``{theta : arg f_a(theta) in K}`` for a membership test of ``K``."""
        th = np.linspace(0.0, 2 * np.pi, n_grid, endpoint=False)
        sel = contains(self.phase_map(th))
        if not np.any(sel):
            return float("nan")
        return float(np.min(self.j(th[sel])))


def constant_symbol(a: float, alpha_inf: complex | None = None) -> ConstantSymbol:
    if not a > 1:
        raise ValueError(f"a must exceed 1, got {a}")
    if alpha_inf is None:
        alpha_inf = np.sqrt(1.0 - a ** -2)
    elif abs(abs(alpha_inf) ** 2 + a ** -2 - 1.0) > 1e-12:
        raise ValueError("alpha_inf must satisfy |alpha_inf|^2 + a^-2 = 1")
    return ConstantSymbol(float(a), complex(alpha_inf))


# Bernoulli-Koopman ----------------------------------------------------------------

def e0_perp(p: float) -> tuple[float, float]:
    """Values at ``omega = -1`` and ``omega = +1`` of the unit vector orthogonal to 1.

    The single-site measure gives weight ``p`` to ``-1`` and ``q = 1 - p`` to ``+1``.
    """
    if not 0.0 < p < 1.0:
        raise ValueError("p must lie in (0, 1)")
    q = 1.0 - p
    mean = q - p
    norm = 2.0 * np.sqrt(p * q)
    return (-1.0 - mean) / norm, (1.0 - mean) / norm


@dataclass(frozen=True, eq=False)
class FourierWalshBasis:
    """Subsets of ``[-L, L]`` with at most ``n_max`` sites: empty set, then by level, then lexicographic."""

    L: int
    n_max: int
    subsets: tuple[tuple[int, ...], ...] = field(repr=False)

    @classmethod
    def build(cls, L: int, n_max: int, cap: int = 500_000) -> "FourierWalshBasis":
        if L < 1 or n_max < 1:
            raise ValueError("need L >= 1 and n_max >= 1")
        n_sites = 2 * L + 1
        count = sum(math.comb(n_sites, n) for n in range(min(n_max, n_sites) + 1))
        if count > cap:
            raise BasisTooLarge(f"{count} basis elements exceed the cap {cap}", "koopman_build")
        sites = range(-L, L + 1)
        subsets = [()]
        for n in range(1, min(n_max, n_sites) + 1):
            subsets.extend(itertools.combinations(sites, n))
        return cls(L, n_max, tuple(subsets))

    def __len__(self) -> int:
        return len(self.subsets)

    @cached_property
    def _index(self) -> dict:
        return {s: i for i, s in enumerate(self.subsets)}

    def index(self, sigma) -> int:
        return self._index[tuple(sorted(sigma))]

    def level(self) -> np.ndarray:
        return np.array([len(s) for s in self.subsets])

    def means(self) -> np.ndarray:
        return np.array([float(np.mean(s)) if s else 0.0 for s in self.subsets])

    def evaluate(self, sigma, omega: Mapping[int, int], p: float) -> float:
        """``f_sigma(omega) = prod_{i in sigma} e0_perp(omega_i)``."""
        lo, hi = e0_perp(p)
        return float(np.prod([hi if omega[i] > 0 else lo for i in sigma]))


@dataclass(eq=False)
class KoopmanModel:
    """Truncated Koopman operator of the Bernoulli shift.

    ``U f_sigma = f_{sigma + 1}`` for ``sigma`` in ``shift_domain``; other basis
    vectors are mapped to zero, so ``U`` is a partial isometry.
    """

    basis: FourierWalshBasis
    shift_domain: np.ndarray
    shift_image: np.ndarray
    p: float = 0.5

    @property
    def dim(self) -> int:
        return len(self.basis)

    @cached_property
    def a_diag(self) -> np.ndarray:
        return self.basis.means()

    @cached_property
    def U_sparse(self) -> sp.csr_matrix:
        n = self.dim
        data = np.ones(self.shift_domain.shape[0], dtype=np.complex128)
        return sp.csr_matrix((data, (self.shift_image, self.shift_domain)), shape=(n, n))

    @cached_property
    def U(self) -> TruncatedOperator:
        return TruncatedOperator.on_basis(self.U_sparse.toarray())

    @cached_property
    def A(self) -> TruncatedOperator:
        return TruncatedOperator.on_basis(np.diag(self.a_diag).astype(np.complex128))

    @cached_property
    def qperp_diag(self) -> np.ndarray:
        d = np.ones(self.dim)
        d[0] = 0.0
        return d

    @cached_property
    def Qperp(self) -> TruncatedOperator:
        return TruncatedOperator.on_basis(np.diag(self.qperp_diag).astype(np.complex128))

    @property
    def vacuum(self) -> np.ndarray:
        v = np.zeros(self.dim, dtype=np.complex128)
        v[0] = 1.0
        return v

    def level_projector_diag(self, n: int) -> np.ndarray:
        return (self.basis.level() == n).astype(np.float64)

    def boundary_mask(self, fraction: float = 0.1) -> np.ndarray:
        """Basis elements with a site in the outer ``fraction`` of ``[-L, L]``."""
        sites = IndexWindow(-self.basis.L, self.basis.L)
        outer = sites.outer_mask(fraction)
        outer_sites = set(sites.indices()[outer].tolist())
        return np.array([any(i in outer_sites for i in s) for s in self.basis.subsets])

    def commutator_on_domain(self) -> np.ndarray:
        """Diagonal of ``U*AU - A`` restricted to ``shift_domain``."""
        a = self.a_diag
        return a[self.shift_image] - a[self.shift_domain]


def koopman_build(L: int, n_max: int, p: float = 0.5, cap: int = 500_000) -> KoopmanModel:
    """Fourier-Walsh truncation of the Bernoulli-shift Koopman operator on ``[-L, L]``."""
    e0_perp(p)
    basis = FourierWalshBasis.build(L, n_max, cap)
    index = basis._index
    dom = []
    img = []
    for i, s in enumerate(basis.subsets):
        t = tuple(x + 1 for x in s)
        if not t or t[-1] <= L:
            dom.append(i)
            img.append(index[t])
    return KoopmanModel(basis, np.array(dom, dtype=np.int64), np.array(img, dtype=np.int64), float(p))
