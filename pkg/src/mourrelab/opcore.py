"""Dense complex matrix substrate.

Index windows, truncated operators, Hermitian and unitary eigendecompositions,
operator norms and the weights ``<A>^{-s} = (1 + A^2)^{-s/2}``.

Functions accept either a :class:`TruncatedOperator` or a plain square
``numpy`` array; results mirror the input type where that is meaningful.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Union

import numpy as np
import scipy.linalg as sla

from .errors import ConvergenceFailure, NotHermitian, NotUnitary

TWO_PI = 2.0 * np.pi


def tol_eig(dim: int, norm: float) -> float:
    """Eigen-solver tolerance ``1e-10 * dim * norm``."""
    return 1e-10 * max(int(dim), 1) * max(float(norm), 1.0)


@dataclass(frozen=True)
class IndexWindow:
    """Inclusive integer window ``[k_lo, k_hi]`` of the lattice."""

    k_lo: int
    k_hi: int

    def __post_init__(self):
        if int(self.k_lo) != self.k_lo or int(self.k_hi) != self.k_hi:
            raise ValueError("window bounds must be integers")
        object.__setattr__(self, "k_lo", int(self.k_lo))
        object.__setattr__(self, "k_hi", int(self.k_hi))
        if self.k_lo > self.k_hi:
            raise ValueError(f"empty window [{self.k_lo}, {self.k_hi}]")

    @classmethod
    def centered(cls, dim: int) -> "IndexWindow":
        """Window of ``dim`` sites starting at ``-(dim // 2)``."""
        lo = -(int(dim) // 2)
        return cls(lo, lo + int(dim) - 1)

    @property
    def dim(self) -> int:
        return self.k_hi - self.k_lo + 1

    def indices(self) -> np.ndarray:
        return np.arange(self.k_lo, self.k_hi + 1)

    def contains(self, k) -> np.ndarray | bool:
        k = np.asarray(k)
        out = (k >= self.k_lo) & (k <= self.k_hi)
        return bool(out) if out.ndim == 0 else out

    def position(self, k: int) -> int:
        """Row/column position of lattice site ``k``."""
        if not self.contains(k):
            raise IndexError(f"site {k} outside window [{self.k_lo}, {self.k_hi}]")
        return int(k) - self.k_lo

    def interior_mask(self, margin: int) -> np.ndarray:
        """Boolean mask of positions at least ``margin`` away from both edges."""
        pos = np.arange(self.dim)
        return (pos >= margin) & (pos < self.dim - margin)

    def outer_mask(self, fraction: float = 0.1) -> np.ndarray:
        """Positions in the outer ``fraction`` of the window, split evenly between ends."""
        n_edge = int(np.ceil(0.5 * fraction * self.dim))
        pos = np.arange(self.dim)
        return (pos < n_edge) | (pos >= self.dim - n_edge)

    def extended(self, left: int = 0, right: int = 0) -> "IndexWindow":
        return IndexWindow(self.k_lo - left, self.k_hi + right)


@dataclass(frozen=True, eq=False)
class TruncatedOperator:
    """Finite section of an operator on an index window.

    ``entries[r, c] = <e_{k_lo + r}, M e_{k_lo + c}>``. The entries are
    stored as a read-only complex array.
    """

    window: IndexWindow
    entries: np.ndarray = field(repr=False)

    def __post_init__(self):
        arr = np.array(self.entries, dtype=np.complex128, copy=True)
        if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
            raise ValueError(f"entries must be square, got shape {arr.shape}")
        if arr.shape[0] != self.window.dim:
            raise ValueError(
                f"entries have dimension {arr.shape[0]} but window has {self.window.dim}"
            )
        if not np.all(np.isfinite(arr)):
            raise ValueError("entries must be finite")
        arr.flags.writeable = False
        object.__setattr__(self, "entries", arr)

    @classmethod
    def on_basis(cls, entries) -> "TruncatedOperator":
        """Wrap a matrix indexed by an enumerated basis ``0 .. n-1``."""
        entries = np.asarray(entries)
        return cls(IndexWindow(0, entries.shape[0] - 1), entries)

    @property
    def dim(self) -> int:
        return self.window.dim

    @property
    def shape(self) -> tuple[int, int]:
        return self.entries.shape

    def adjoint(self) -> "TruncatedOperator":
        return TruncatedOperator(self.window, self.entries.conj().T)

    @property
    def H(self) -> "TruncatedOperator":
        return self.adjoint()

    def __array__(self, dtype=None, copy=None):
        if dtype is None:
            return self.entries
        return self.entries.astype(dtype)

    def _binary(self, other, op):
        if isinstance(other, TruncatedOperator):
            if other.window != self.window:
                raise ValueError("operators live on different windows")
            other = other.entries
        return TruncatedOperator(self.window, op(self.entries, other))

    def __add__(self, other):
        return self._binary(other, np.add)

    def __sub__(self, other):
        return self._binary(other, np.subtract)

    def __matmul__(self, other):
        return self._binary(other, np.matmul)

    def __mul__(self, scalar):
        return TruncatedOperator(self.window, self.entries * scalar)

    __rmul__ = __mul__

    def __neg__(self):
        return TruncatedOperator(self.window, -self.entries)

    def __eq__(self, other):
        if not isinstance(other, TruncatedOperator):
            return NotImplemented
        return self.window == other.window and np.array_equal(self.entries, other.entries)

    __hash__ = None


MatrixLike = Union[TruncatedOperator, np.ndarray]


def as_matrix(M: MatrixLike) -> np.ndarray:
    """Return the dense complex entries of ``M``."""
    if isinstance(M, TruncatedOperator):
        return M.entries
    arr = np.asarray(M)
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {arr.shape}")
    return arr


def wrap_like(template: MatrixLike, entries: np.ndarray) -> MatrixLike:
    if isinstance(template, TruncatedOperator):
        return TruncatedOperator(template.window, entries)
    return entries


def hermitian_defect(M: MatrixLike) -> float:
    m = as_matrix(M)
    return float(np.max(np.abs(m - m.conj().T))) if m.size else 0.0


def check_hermitian(M: MatrixLike, rtol: float = 1e-12, op: str = "hermitian_eig") -> np.ndarray:
    m = as_matrix(M)
    scale = float(np.max(np.abs(m))) if m.size else 0.0
    defect = hermitian_defect(m)
    if defect > rtol * scale:
        raise NotHermitian(f"max |M - M*| = {defect:.3e} exceeds {rtol:g} * max|M| = {rtol * scale:.3e}", op)
    return m


def unitarity_defect(U: MatrixLike) -> float:
    """``max |U*U - I|``."""
    u = as_matrix(U)
    return float(np.max(np.abs(u.conj().T @ u - np.eye(u.shape[0])))) if u.size else 0.0


def check_unitary(U: MatrixLike, tol: float = 1e-9, op: str = "unitary_eig") -> np.ndarray:
    u = as_matrix(U)
    defect = unitarity_defect(u)
    if not defect <= tol:
        raise NotUnitary(f"max |U*U - I| = {defect:.3e} exceeds {tol:g}", op)
    return u


def hermitian_eig(M: MatrixLike) -> tuple[np.ndarray, np.ndarray]:
    """Eigen-decomposition of a Hermitian matrix.

    Returns
    -------
    eigenvalues : ndarray
        Real, ascending.
    vectors : ndarray
        Orthonormal columns with ``M = V diag(eigenvalues) V*``.
    """
    m = check_hermitian(M)
    try:
        lam, vec = sla.eigh(m)
    except (np.linalg.LinAlgError, sla.LinAlgError) as exc:
        raise ConvergenceFailure(str(exc), "hermitian_eig") from exc
    return lam, vec


@dataclass(frozen=True, eq=False)
class SpectralDecomposition:
    """Eigenphases in ``[0, 2*pi)`` (ascending) with orthonormal eigenvectors."""

    phases: np.ndarray
    vectors: np.ndarray = field(repr=False)
    window: IndexWindow | None = None

    @property
    def dim(self) -> int:
        return self.vectors.shape[0]

    def wrap(self, entries: np.ndarray) -> MatrixLike:
        """Return ``entries`` as a :class:`TruncatedOperator` when the window is known."""
        return entries if self.window is None else TruncatedOperator(self.window, entries)

    @property
    def eigenvalues(self) -> np.ndarray:
        return np.exp(1j * self.phases)

    def apply(self, values) -> np.ndarray:
        """``sum_j values[j] v_j v_j^*``."""
        values = np.asarray(values)
        return (self.vectors * values) @ self.vectors.conj().T

    def reconstruct(self) -> np.ndarray:
        return self.apply(self.eigenvalues)

    def projector(self, mask) -> np.ndarray:
        v = self.vectors[:, np.asarray(mask, dtype=bool)]
        return v @ v.conj().T

    def gram_error(self) -> float:
        g = self.vectors.conj().T @ self.vectors
        return float(np.max(np.abs(g - np.eye(g.shape[0])))) if g.size else 0.0

    def reconstruction_error(self, U: MatrixLike) -> float:
        return float(np.max(np.abs(self.reconstruct() - as_matrix(U))))


def _first_nonzero_arg(vectors: np.ndarray, tol: float = 1e-12) -> np.ndarray:
    mags = np.abs(vectors)
    first = np.argmax(mags > tol, axis=0)
    return np.angle(vectors[first, np.arange(vectors.shape[1])])


def wrap_phase(theta):
    """Map angles into ``[0, 2*pi)``."""
    out = np.mod(theta, TWO_PI)
    return np.where(out >= TWO_PI, 0.0, out)


def unitary_eig(U: MatrixLike, unitary_tol: float = 1e-9) -> SpectralDecomposition:
    """Spectral decomposition of a unitary matrix via the complex Schur form.

    For a normal matrix the Schur factor is diagonal up to rounding, so the
    Schur vectors are orthonormal eigenvectors. Equal phases are ordered by
    the argument of the first nonzero eigenvector component.
    """
    u = check_unitary(U, unitary_tol)
    if u.shape[0] == 0:
        return SpectralDecomposition(np.zeros(0), np.zeros((0, 0), complex))
    try:
        t, z = sla.schur(u.astype(np.complex128), output="complex")
    except (np.linalg.LinAlgError, sla.LinAlgError, ValueError) as exc:
        raise ConvergenceFailure(str(exc), "unitary_eig") from exc
    lam = np.diag(t)
    phases = wrap_phase(np.angle(lam))
    order = np.lexsort((_first_nonzero_arg(z), phases))
    phases = phases[order]
    vectors = np.ascontiguousarray(z[:, order])
    phases.flags.writeable = False
    vectors.flags.writeable = False
    window = U.window if isinstance(U, TruncatedOperator) else None
    return SpectralDecomposition(phases, vectors, window)


def op_norm(M: MatrixLike) -> float:
    """Largest singular value."""
    m = as_matrix(M)
    if m.size == 0:
        return 0.0
    return float(sla.svdvals(m)[0])


def is_diagonal(M: MatrixLike) -> bool:
    m = as_matrix(M)
    return not np.any(m - np.diag(np.diag(m)))


def weight_power(A: MatrixLike, s: float) -> MatrixLike:
    """``<A>^{-s} = (1 + A^2)^{-s/2}`` for Hermitian ``A``.

    Diagonal inputs are handled entrywise, which is exact.
    """
    if not s > 0:
        raise ValueError(f"s must be positive, got {s}")
    a = check_hermitian(A, op="weight_power")
    if is_diagonal(a):
        d = np.real(np.diag(a))
        out = np.diag((1.0 + d * d) ** (-0.5 * s)).astype(np.complex128)
    else:
        lam, vec = hermitian_eig(a)
        out = (vec * (1.0 + lam * lam) ** (-0.5 * s)) @ vec.conj().T
    return wrap_like(A, out)
