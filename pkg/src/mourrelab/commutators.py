"""Iterated commutators and the regularised conjugation family.

``ad_A(B) = AB - BA``. From a unitary ``U`` and Hermitian ``A`` we build
``B_1 = A - U A U*`` and higher ``B_p`` such that, with
``C(eps) = eps B(eps) = sum_p eps^p / p! B_p``, the operators ``Q^+`` and
``Q^-`` vanish to high order in ``eps``.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.integrate import cumulative_trapezoid

from .errors import InsufficientPoints, NotHermitian, SeriesDivergence, WindowMismatch
from .opcore import MatrixLike, TruncatedOperator, as_matrix, check_unitary, hermitian_defect, is_diagonal, op_norm, wrap_like

EXP_GUARD = 20.0


def _pair(A: MatrixLike, B: MatrixLike, op: str) -> tuple[np.ndarray, np.ndarray]:
    if isinstance(A, TruncatedOperator) and isinstance(B, TruncatedOperator) and A.window != B.window:
        raise WindowMismatch(f"windows {A.window} and {B.window} differ", op)
    a, b = as_matrix(A), as_matrix(B)
    if a.shape != b.shape:
        raise WindowMismatch(f"shapes {a.shape} and {b.shape} differ", op)
    return a, b


def ad(X: np.ndarray, Y: np.ndarray) -> np.ndarray:
    return X @ Y - Y @ X


def ad_power(A: MatrixLike, B: MatrixLike, j: int) -> MatrixLike:
    """``ad_A^j(B)``; ``j = 0`` returns ``B``."""
    if j < 0:
        raise ValueError("j must be nonnegative")
    a, b = _pair(A, B, "ad_power")
    out = b
    for _ in range(j):
        out = ad(a, out)
    return wrap_like(B, out)


def _norm_bound(C: np.ndarray) -> float:
    # Frobenius norm bounds the operator norm; only pay for an SVD when it is inconclusive
    fro = float(np.linalg.norm(C))
    return fro if fro <= EXP_GUARD else op_norm(C)


def _guard(C: np.ndarray, op: str) -> float:
    nc = _norm_bound(C)
    if nc > EXP_GUARD:
        raise SeriesDivergence(f"||C|| = {nc:.3g} exceeds {EXP_GUARD}", op)
    return nc


def expm_taylor(C: MatrixLike, rtol: float = 1e-16, return_bound: bool = False):
    """``exp(C)`` by the plain Taylor series.

    Summation stops when the Frobenius norm of the next term falls below
    ``rtol`` times the running sum. Diagonal inputs are exponentiated
    entrywise. With ``return_bound`` a bound on the neglected tail is also
    returned.
    """
    c = as_matrix(C)
    nc = _guard(c, "expm_taylor")
    n = c.shape[0]
    if is_diagonal(c):
        out = np.diag(np.exp(np.diag(c))).astype(np.complex128)
        return (wrap_like(C, out), 0.0) if return_bound else wrap_like(C, out)
    out = np.eye(n, dtype=np.complex128)
    term = out.copy()
    j = 0
    while True:
        j += 1
        term = term @ c / j
        out = out + term
        if np.linalg.norm(term) <= rtol * np.linalg.norm(out) or j > 400:
            break
    # tail after the last included term, bounded by the next term times a geometric factor
    nxt = nc ** (j + 1) / math.factorial(j + 1) if j < 170 else 0.0
    ratio = nc / (j + 2)
    bound = nxt / (1.0 - ratio) if ratio < 1 else float("inf")
    out = wrap_like(C, out)
    return (out, bound) if return_bound else out


def dexp(C: np.ndarray, dC: np.ndarray, sign: int, rtol: float = 1e-16) -> np.ndarray:
    """Derivative of ``exp(sign * C(eps))`` given ``C`` and ``dC = d/deps C``.

    Uses ``exp(C) d exp(-C) = -sum_{p>=1} ad_C^{p-1}(dC) / p!`` and its mirror
    ``exp(-C) d exp(C) = sum_{p>=1} (-1)^{p-1} ad_C^{p-1}(dC) / p!``.
    """
    _guard(C, "dexp")
    acc = np.zeros_like(dC, dtype=np.complex128)
    term = np.asarray(dC, dtype=np.complex128)
    p = 1
    while True:
        coeff = (1.0 if sign < 0 else (-1.0) ** (p - 1)) / math.factorial(p)
        contrib = coeff * term
        acc = acc + contrib
        if np.linalg.norm(contrib) <= rtol * max(np.linalg.norm(acc), np.finfo(float).tiny) or p > 150:
            break
        term = ad(C, term)
        if not np.any(term):
            break
        p += 1
    E = as_matrix(expm_taylor(sign * C))
    return -E @ acc if sign < 0 else E @ acc


def bch_transform(C: MatrixLike, A: MatrixLike, rtol: float = 1e-16) -> MatrixLike:
    """``exp(-C) A exp(C) - A`` as ``sum_{j>=1} (-1)^{j-1}/j! ad_C^{j-1}(ad_A C)``."""
    c, a = _pair(C, A, "bch_transform")
    _guard(c, "bch_transform")
    term = ad(a, c)
    acc = np.zeros_like(term)
    j = 1
    while True:
        contrib = ((-1.0) ** (j - 1) / math.factorial(j)) * term
        acc = acc + contrib
        if np.linalg.norm(contrib) <= rtol * max(np.linalg.norm(acc), np.finfo(float).tiny) or j > 160:
            break
        term = ad(c, term)
        if not np.any(term):
            break
        j += 1
    return wrap_like(A, acc)


def bch_bound(C: MatrixLike, A: MatrixLike) -> float:
    """``exp(||C||) ||ad_A C||``."""
    c, a = _pair(C, A, "bch_bound")
    return float(np.exp(op_norm(c)) * op_norm(ad(a, c)))


# B_p recursion -------------------------------------------------------------

def _nested_ad(Bs: dict[int, np.ndarray], alpha: tuple[int, ...], Y: np.ndarray) -> np.ndarray:
    """``ad_{B_{alpha_1}} o ... o ad_{B_{alpha_last}} (Y)``."""
    for idx in reversed(alpha):
        Y = ad(Bs[idx], Y)
    return Y


def _compositions(total: int, parts: int):
    """Tuples of ``parts`` positive integers summing to ``total``."""
    if parts == 0:
        if total == 0:
            yield ()
        return
    for head in range(1, total - parts + 2):
        for rest in _compositions(total - head, parts - 1):
            yield (head,) + rest


def _alpha_factorial(alpha: tuple[int, ...]) -> int:
    out = 1
    for x in alpha:
        out *= math.factorial(x)
    return out


def next_B(Bs: dict[int, np.ndarray], A: np.ndarray, p: int) -> np.ndarray:
    """``B_{p+1}`` from ``B_1 .. B_p``.

    ``B_{p+1} = p! (R_p + S_p)`` where

    ``R_p = sum_{j>=2} (-1)^j / j! sum ad_{B_alpha}(B_b) / (alpha! (b-1)!)`` over
    ``alpha`` with ``j - 1`` positive entries and ``b >= 1``, ``|alpha| + b - 1 = p``;

    ``S_p = sum_{j>=1} (-1)^{j-1} / j! sum ad_{B_alpha}(ad_A B_c) / (alpha! c!)``
    over ``alpha`` with ``j - 1`` positive entries and ``c >= 1``, ``|alpha| + c = p``.

    These are the coefficients that make the order-``p`` term of
    ``exp(C) d/deps exp(-C) + exp(C) A exp(-C) - A + B_1`` vanish. In particular
    ``B_2 = ad_A B_1``.
    """
    acc = np.zeros_like(A, dtype=np.complex128)
    adA = {}
    for j in range(2, p + 2):
        for b in range(1, p + 1):
            rest = p + 1 - b
            if rest < j - 1:
                continue
            for alpha in _compositions(rest, j - 1):
                w = (-1.0) ** j / math.factorial(j) / _alpha_factorial(alpha) / math.factorial(b - 1)
                acc = acc + w * _nested_ad(Bs, alpha, Bs[b])
    for j in range(1, p + 1):
        for c in range(1, p + 1):
            rest = p - c
            if rest < j - 1 or (j == 1 and rest != 0):
                continue
            if c not in adA:
                adA[c] = ad(A, Bs[c])
            for alpha in _compositions(rest, j - 1):
                w = (-1.0) ** (j - 1) / math.factorial(j) / _alpha_factorial(alpha) / math.factorial(c)
                acc = acc + w * _nested_ad(Bs, alpha, adA[c])
    return math.factorial(p) * acc


@dataclass(eq=False)
class CommutatorChain:
    """Cached commutator data of a pair ``(U, A)``.

    Parameters
    ----------
    U : matrix
        Unitary (or, with ``require_unitary=False``, a contraction such as a
        truncated Koopman partial isometry).
    A : matrix
        Hermitian conjugate operator.
    k_max : int
        Highest regularity order for which ``B_1 .. B_{k_max + 1}`` are cached.
    """

    U: MatrixLike
    A: MatrixLike
    k_max: int = 3
    require_unitary: bool = True
    _ad_U: dict = field(default_factory=dict, repr=False)
    _B: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        u, a = _pair(self.U, self.A, "CommutatorChain")
        if self.require_unitary:
            check_unitary(u, op="CommutatorChain")
        scale = max(1.0, float(np.max(np.abs(a))) if a.size else 1.0)
        if hermitian_defect(a) > 1e-12 * scale:
            raise NotHermitian("A must be Hermitian", "CommutatorChain")
        self._u = np.asarray(u, dtype=np.complex128)
        self._a = np.asarray(a, dtype=np.complex128)
        b1 = self._a - self._u @ self._a @ self._u.conj().T
        if hermitian_defect(b1) > 1e-10 * scale:
            raise NotHermitian("B_1 = A - U A U* is not Hermitian", "CommutatorChain")
        self._B[1] = b1

    def ad_U(self, j: int) -> np.ndarray:
        """``ad_A^j(U)``."""
        if j not in self._ad_U:
            self._ad_U[j] = self._u if j == 0 else ad(self._a, self.ad_U(j - 1))
        return self._ad_U[j]

    def B(self, p: int) -> np.ndarray:
        if p < 1:
            raise ValueError("p must be >= 1")
        if p > self.k_max + 1:
            raise ValueError(f"B_{p} exceeds the cached order k_max + 1 = {self.k_max + 1}")
        for q in range(2, p + 1):
            if q not in self._B:
                self._B[q] = next_B(self._B, self._a, q - 1)
        return self._B[p]

    def identity_defects(self) -> tuple[float, float]:
        """Defects of ``U*AU - A = U*(ad_A U)`` and ``A - UAU* = (ad_A U) U*``."""
        u, a, d = self._u, self._a, self.ad_U(1)
        us = u.conj().T
        e1 = float(np.max(np.abs(us @ a @ u - a - us @ d)))
        e2 = float(np.max(np.abs(a - u @ a @ us - d @ us)))
        return e1, e2


def bp_sequence(chain: CommutatorChain, k: int) -> list[np.ndarray]:
    """``[B_1, ..., B_{k+1}]``."""
    if k < 1:
        raise ValueError("k must be >= 1")
    return [chain.B(p) for p in range(1, k + 2)]


@dataclass(eq=False)
class EpsFamily:
    """``B(eps) = sum_{p=1}^{k+1} eps^{p-1} / p! B_p`` and derived quantities.

    Including ``B_{k+1}`` is what makes ``||Q^{+/-}(eps, z)|| = O(eps^{k+1})``.
    """

    Bs: Sequence[np.ndarray]
    k: int
    eps_grid: np.ndarray | None = None

    @classmethod
    def from_chain(cls, chain: CommutatorChain, k: int, eps_grid=None) -> "EpsFamily":
        grid = None if eps_grid is None else np.asarray(eps_grid, dtype=np.float64)
        return cls(bp_sequence(chain, k), k, grid)

    def __post_init__(self):
        self.Bs = [np.asarray(b, dtype=np.complex128) for b in self.Bs]
        self._norms = [op_norm(b) for b in self.Bs]

    @property
    def B1(self) -> np.ndarray:
        return self.Bs[0]

    def B(self, eps: float) -> np.ndarray:
        return sum(eps ** (p - 1) / math.factorial(p) * b for p, b in enumerate(self.Bs, start=1))

    def dB(self, eps: float) -> np.ndarray:
        out = np.zeros_like(self.Bs[0])
        for p, b in enumerate(self.Bs, start=1):
            if p >= 2:
                out = out + (p - 1) * eps ** (p - 2) / math.factorial(p) * b
        return out

    def C(self, eps: float) -> np.ndarray:
        return eps * self.B(eps)

    def dC(self, eps: float) -> np.ndarray:
        """``d/deps (eps B(eps)) = sum_p eps^{p-1} / (p-1)! B_p``."""
        return sum(eps ** (p - 1) / math.factorial(p - 1) * b for p, b in enumerate(self.Bs, start=1))

    def exp_minus(self, eps: float) -> np.ndarray:
        return as_matrix(expm_taylor(-self.C(eps)))

    def exp_plus_adj(self, eps: float) -> np.ndarray:
        return as_matrix(expm_taylor(self.C(eps).conj().T))

    def deviation_bound(self, eps: float) -> float:
        """``sum_{p>=2} eps^{p-1}/p! ||B_p||``, an upper bound for ``||B(eps) - B_1||``."""
        return float(sum(eps ** (p - 1) / math.factorial(p) * n for p, n in enumerate(self._norms, start=1) if p >= 2))

    def deviation(self, eps: float) -> float:
        return op_norm(self.B(eps) - self.B1)


def q_operators(fam: EpsFamily, U: MatrixLike, A: MatrixLike, eps: float, z: complex) -> tuple[np.ndarray, np.ndarray]:
    """``Q^+`` and ``Q^-`` at ``(eps, z)``.

    ``Q^+ = z U* (d exp(-C) + B_1 exp(-C) - ad_A exp(-C))``
    ``Q^- = conj(z)^{-1} U* (d exp(C*) - B_1 exp(C*) + ad_A exp(C*))``
    with ``C = eps B(eps)`` and ``d = d/deps``.
    """
    z = complex(z)
    if not 0.5 < abs(z) <= 1.0 + 1e-15:
        raise ValueError(f"|z| must lie in (1/2, 1], got {abs(z)}")
    u, a = _pair(U, A, "q_operators")
    us = u.conj().T
    C = fam.C(eps)
    dC = fam.dC(eps)
    b1 = fam.B1
    em = as_matrix(expm_taylor(-C))
    dem = dexp(C, dC, -1)
    qp = z * us @ (dem + b1 @ em - ad(a, em))
    Cs = C.conj().T
    ep = as_matrix(expm_taylor(Cs))
    dep = dexp(Cs, dC.conj().T, +1)
    qm = (1.0 / np.conj(z)) * us @ (dep - b1 @ ep + ad(a, ep))
    return qp, qm


@dataclass(frozen=True)
class QDecayFit:
    slope: float
    intercept: float
    residual: float
    eps: np.ndarray = field(repr=False)
    values: np.ndarray = field(repr=False)
    used: np.ndarray = field(repr=False)
    exact_cancellation: bool
    floor: float


DEFAULT_Z_GRID = (1.0, 0.75j, 0.51 * np.exp(2.0j))


def q_decay_fit(U: MatrixLike, A: MatrixLike, k: int, eps_grid, z_grid=DEFAULT_Z_GRID,
                floor: float = 1e-13, require_unitary: bool = True, family: EpsFamily | None = None) -> QDecayFit:
    """Fit ``log max_z ||Q^{+/-}(eps, z)||`` against ``log eps``.

    Points below ``floor`` are excluded. If every point is below the floor the
    result is flagged as exact cancellation.
    """
    if not 1 <= k <= 3:
        raise ValueError("k must be 1, 2 or 3")
    eps = np.sort(np.asarray(eps_grid, dtype=np.float64))
    if eps.size < 2 or np.log10(eps[-1] / eps[0]) < 2.0 - 1e-9:
        raise InsufficientPoints("the eps grid must span at least two decades", "q_decay_fit")
    if family is None:
        family = EpsFamily.from_chain(CommutatorChain(U, A, k, require_unitary), k, eps)
    vals = np.empty(eps.size)
    for i, e in enumerate(eps):
        best = 0.0
        for z in z_grid:
            qp, qm = q_operators(family, U, A, float(e), z)
            best = max(best, op_norm(qp), op_norm(qm))
        vals[i] = best
    used = vals >= floor
    if not used.any():
        return QDecayFit(float("nan"), float("nan"), 0.0, eps, vals, np.zeros(eps.size, bool), True, floor)
    if used.sum() < 3:
        raise InsufficientPoints(f"only {int(used.sum())} points above the floor {floor:g}", "q_decay_fit")
    x, y = np.log(eps[used]), np.log(vals[used])
    coef, res, *_ = np.polyfit(x, y, 1, full=True)
    resid = float(np.sqrt(res[0] / x.size)) if res.size else 0.0
    return QDecayFit(float(coef[0]), float(coef[1]), resid, eps, vals, used, False, floor)


# scalar Gronwall ------------------------------------------------------------

def _tail_integral(values: np.ndarray, grid: np.ndarray) -> np.ndarray:
    """``int_x^b values`` at every grid point, by the trapezoid rule."""
    rev = cumulative_trapezoid(values[::-1], grid[::-1], initial=0.0)
    return -rev[::-1]


def gronwall_bound(omega: float, theta: float, phi, psi, grid) -> np.ndarray:
    """Right-hand side of the nonlinear Gronwall inequality on a grid.

    For ``f(l) <= omega + int_l^b (phi f^theta + psi f)``:

    ``f(l) <= [omega^{1-theta} + (1-theta) int_l^b phi(m) exp((theta-1) int_m^b psi) dm]^{1/(1-theta)} exp(int_l^b psi)``.

    Integrals use the trapezoid rule on ``grid`` (increasing, ending at ``b``).
    """
    grid = np.asarray(grid, dtype=np.float64)
    phi = np.broadcast_to(np.asarray(phi, dtype=np.float64), grid.shape)
    psi = np.broadcast_to(np.asarray(psi, dtype=np.float64), grid.shape)
    if omega < 0 or not 0.0 <= theta < 1.0:
        raise ValueError("need omega >= 0 and theta in [0, 1)")
    if np.any(phi < 0) or np.any(psi < 0):
        raise ValueError("phi and psi must be nonnegative")
    if np.any(np.diff(grid) <= 0):
        raise ValueError("grid must be strictly increasing")
    Psi = _tail_integral(psi, grid)
    inner = _tail_integral(phi * np.exp((theta - 1.0) * Psi), grid)
    base = omega ** (1.0 - theta) + (1.0 - theta) * inner
    return base ** (1.0 / (1.0 - theta)) * np.exp(Psi)
