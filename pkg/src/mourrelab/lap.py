"""Weighted resolvents near the unit circle.

``F_{j,s}(z) = W (1 - z U*)^{-j} W`` with ``W = <A>^{-s}``. Resolvents are
obtained from an LU factorisation of ``1 - z U*`` rather than an eigenvector
expansion. Boundary values are studied along rays ``z = (1 -/+ delta) e^{i theta}``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
import scipy.linalg as sla
from scipy.linalg.lapack import get_lapack_funcs

from .commutators import EpsFamily
from .errors import NearSingular, NotInvertible
from .opcore import MatrixLike, TWO_PI, as_matrix, check_unitary, op_norm, unitary_eig, weight_power

COND_LIMIT = 1e14


@dataclass(frozen=True)
class WeightedResolventSample:
    j: int
    s: float
    z: complex
    F: np.ndarray = field(repr=False)
    norm: float
    boundary: bool = False


def _factor(M: np.ndarray, op: str, exc_type=NearSingular, limit: float = COND_LIMIT):
    lu, piv = sla.lu_factor(M, check_finite=True)
    gecon, = get_lapack_funcs(("gecon",), (lu,))
    anorm = float(np.max(np.sum(np.abs(M), axis=0)))
    rcond, info = gecon(lu, anorm, norm="1")
    if info != 0 or not rcond > 1.0 / limit:
        raise exc_type(f"condition estimate {1.0 / max(rcond, 1e-300):.3e} exceeds {limit:.0e}", op)
    return lu, piv


class WeightedResolvent:
    """Cache of ``U``, ``W = <A>^{-s}`` for repeated resolvent evaluations.

    Parameters
    ----------
    U : matrix
        Unitary (checked unless ``check=False``).
    A : matrix
        Hermitian conjugate operator.
    s : float
        Weight exponent.
    """

    def __init__(self, U: MatrixLike, A: MatrixLike, s: float, check: bool = True):
        self.U = np.asarray(check_unitary(U, op="weighted_resolvent") if check else as_matrix(U), dtype=np.complex128)
        self.Us = self.U.conj().T
        self.s = float(s)
        self.W = np.asarray(as_matrix(weight_power(A, s)), dtype=np.complex128)
        self.n = self.U.shape[0]

    def powers(self, z: complex, j_max: int) -> list[np.ndarray]:
        """``[F_{1,s}(z), ..., F_{j_max,s}(z)]`` from a single factorisation."""
        z = complex(z)
        M = np.eye(self.n, dtype=np.complex128) - z * self.Us
        lu = _factor(M, "weighted_resolvent")
        X = self.W
        out = []
        for _ in range(j_max):
            X = sla.lu_solve(lu, X)
            out.append(self.W @ X)
        return out

    def F(self, z: complex, j: int = 1) -> np.ndarray:
        return self.powers(z, j)[-1]

    def sample(self, z: complex, j: int = 1) -> WeightedResolventSample:
        F = self.F(z, j)
        return WeightedResolventSample(int(j), self.s, complex(z), F, op_norm(F), abs(abs(z) - 1.0) < 1e-15)


def weighted_resolvent(U: MatrixLike, A: MatrixLike, s: float, j: int, z: complex) -> WeightedResolventSample:
    """``<A>^{-s} (1 - z U*)^{-j} <A>^{-s}`` and its operator norm."""
    if j < 1:
        raise ValueError("j must be >= 1")
    return WeightedResolvent(U, A, s).sample(z, j)


@dataclass(frozen=True)
class RadialStudy:
    theta: float
    delta: np.ndarray
    norms_plus: np.ndarray
    norms_minus: np.ndarray
    plateau: bool
    exponent: float
    floor: float
    variation: float


def relative_variation(values) -> float:
    v = np.asarray(values, dtype=np.float64)
    return float((v.max() - v.min()) / v.max()) if v.size and v.max() > 0 else 0.0


def floor_estimate(delta, norms, tol: float = 0.02) -> float:
    """Largest ``delta`` whose norm departs by more than ``tol`` from the value at the largest ``delta``.

    Returns 0 when the whole curve stays within ``tol``.
    """
    delta = np.asarray(delta, dtype=np.float64)
    norms = np.asarray(norms, dtype=np.float64)
    order = np.argsort(-delta)
    ref = norms[order[0]]
    for i in order[1:]:
        if abs(norms[i] - ref) > tol * ref:
            return float(delta[i])
    return 0.0


def radial_study(U: MatrixLike, A: MatrixLike, s: float, j: int, theta: float, delta_grid: Sequence[float],
                 plateau_tol: float = 0.1, floor_tol: float = 0.02,
                 resolvent: WeightedResolvent | None = None) -> RadialStudy:
    """Norms of ``F_{j,s}`` along ``(1 - delta) e^{i theta}`` and ``(1 + delta) e^{i theta}``.

    The plateau flag is set when the three smallest ``delta`` values give norms
    within ``plateau_tol`` (relative). The blow-up exponent is the slope of
    ``log ||F||`` against ``log(1/delta)`` on the inner side.
    """
    delta = np.sort(np.asarray(delta_grid, dtype=np.float64))[::-1]
    if delta.size < 3 or delta[0] > 0.5 or delta[-1] <= 0:
        raise ValueError("delta grid needs at least 3 values in (0, 0.5]")
    if np.any(np.diff(delta) >= 0):
        raise ValueError("delta grid values must be distinct")
    R = resolvent if resolvent is not None else WeightedResolvent(U, A, s)
    e = np.exp(1j * theta)
    plus = np.array([op_norm(R.F((1.0 - d) * e, j)) for d in delta])
    minus = np.array([op_norm(R.F((1.0 + d) * e, j)) for d in delta])
    plateau = relative_variation(plus[-3:]) < plateau_tol
    slope = float(np.polyfit(np.log(1.0 / delta), np.log(plus), 1)[0])
    return RadialStudy(float(theta), delta, plus, minus, bool(plateau), slope,
                       floor_estimate(delta, plus, floor_tol), relative_variation(plus))


def point_spectrum_test(U: MatrixLike, A: MatrixLike, s: float, theta: float, delta_grid: Sequence[float],
                        exponent_min: float = 0.8, overlap_min: float = 1e-6) -> tuple[bool, float, float]:
    """Flag ``theta`` as an eigenphase from resolvent blow-up.

    Returns ``(flag, exponent, overlap)`` where ``overlap`` is the largest
    ``||<A>^{-s} v||^2`` over eigenvectors whose phase lies within the
    smallest ``delta`` of ``theta``.
    """
    R = WeightedResolvent(U, A, s)
    st = radial_study(U, A, s, 1, theta, delta_grid, resolvent=R)
    dec = unitary_eig(R.U)
    dist = np.abs(np.angle(np.exp(1j * (dec.phases - theta))))
    near = dist <= st.delta.min()
    overlap = float(np.max(np.sum(np.abs(R.W @ dec.vectors[:, near]) ** 2, axis=0))) if near.any() else 0.0
    return bool(st.exponent >= exponent_min and overlap >= overlap_min), st.exponent, overlap


def derivative_identity_check(U: MatrixLike, A: MatrixLike, s: float, j: int, z: complex, h: float,
                              resolvent: WeightedResolvent | None = None) -> float:
    """Relative deviation between a central difference in ``arg z`` and ``i j (F_{j+1} - F_j)``.

    ``d/dtheta F_{j,s}(r e^{i theta}) = i j (F_{j+1,s} - F_{j,s})`` holds exactly
    off the circle; the central difference carries an ``O(h^2)`` error.
    """
    z = complex(z)
    if abs(abs(z) - 1.0) < 1e-15:
        raise ValueError("z must lie off the unit circle")
    R = resolvent if resolvent is not None else WeightedResolvent(U, A, s)
    Fs = R.powers(z, j + 1)
    exact = 1j * j * (Fs[j] - Fs[j - 1])
    fd = (R.F(z * np.exp(1j * h), j) - R.F(z * np.exp(-1j * h), j)) / (2.0 * h)
    return op_norm(fd - exact) / op_norm(exact)


def spectral_density(U: MatrixLike, A: MatrixLike, s: float, theta: float, delta: float,
                     resolvent: WeightedResolvent | None = None) -> np.ndarray:
    """``(F_{1,s}((1 - delta) e^{i theta}) - F_{1,s}((1 + delta) e^{i theta})) / (2 pi)``."""
    if not delta > 0:
        raise ValueError("delta must be positive")
    R = resolvent if resolvent is not None else WeightedResolvent(U, A, s)
    e = np.exp(1j * theta)
    return (R.F((1.0 - delta) * e) - R.F((1.0 + delta) * e)) / TWO_PI


def integrate_density(U: MatrixLike, A: MatrixLike, s: float, phi: Callable[[np.ndarray], np.ndarray],
                      delta: float, n_nodes: int = 2000, resolvent: WeightedResolvent | None = None) -> np.ndarray:
    """Periodic trapezoid rule for ``int phi(theta) density(theta) d theta``.

    Nodes where ``phi`` vanishes are skipped.
    """
    R = resolvent if resolvent is not None else WeightedResolvent(U, A, s)
    theta = np.arange(n_nodes) * TWO_PI / n_nodes
    vals = np.asarray(phi(theta), dtype=np.float64)
    acc = np.zeros((R.n, R.n), dtype=np.complex128)
    for t, v in zip(theta, vals):
        if v != 0.0:
            acc += v * spectral_density(None, None, s, t, delta, resolvent=R)
    return acc * (TWO_PI / n_nodes)


def minus_side_consistency(U: MatrixLike, A: MatrixLike, s: float, z: complex,
                           resolvent: WeightedResolvent | None = None) -> float:
    """Check ``F_{1,s}(z) = <A>^{-2s} - F_{1,s}(1/conj(z))^*`` for ``|z| > 1``.

    This links the outer-side resolvent to the inner-side point ``1/conj(z)``.
    """
    z = complex(z)
    R = resolvent if resolvent is not None else WeightedResolvent(U, A, s)
    direct = R.F(z)
    via = R.W @ R.W - R.F(1.0 / np.conj(z)).conj().T
    return float(np.max(np.abs(direct - via)))


@dataclass(frozen=True)
class UepsSample:
    eps: float
    z: complex
    G_plus: np.ndarray = field(repr=False)
    G_minus: np.ndarray = field(repr=False)
    norm_plus: float
    norm_minus: float
    weighted_norm_plus: float
    weighted_norm_minus: float
    C_plus: float
    C_minus: float
    adjoint_defect: float


def _quadratic_constant(G: np.ndarray, eps: float, psis: np.ndarray) -> float:
    if eps <= 0:
        return float("nan")
    ReG = 0.5 * (G + G.conj().T)
    best = 0.0
    for psi in psis.T:
        num = np.linalg.norm(G @ psi)
        den = np.sqrt(abs(np.vdot(psi, ReG @ psi).real) / eps) + np.linalg.norm(psi)
        best = max(best, num / den)
    return float(best)


def ueps_resolvents(fam: EpsFamily, U: MatrixLike, A: MatrixLike, s: float, eps: float, z: complex,
                    n_samples: int = 8, seed: int = 0, check_unitary_U: bool = True) -> UepsSample:
    """Regularised resolvents ``G^+ = (1 - z U* e^{-eps B})^{-1}`` and ``G^- = (1 - conj(z)^{-1} U* e^{eps B*})^{-1}``.

    Also reports the smallest constant ``C`` for which
    ``||G psi|| <= C (sqrt(|<psi, Re G psi>| / eps) + ||psi||)`` holds on random
    ``psi`` and the defect of ``G^+(z)^* = -conj(z)^{-1} U* e^{eps B*} G^-(z)``.
    """
    z = complex(z)
    if not 0.5 < abs(z) <= 1.0 + 1e-15:
        raise ValueError("|z| must lie in (1/2, 1]")
    u = np.asarray(check_unitary(U, op="ueps_resolvents") if check_unitary_U else as_matrix(U), dtype=np.complex128)
    us = u.conj().T
    n = u.shape[0]
    eye = np.eye(n, dtype=np.complex128)
    em = fam.exp_minus(eps)
    ep = fam.exp_plus_adj(eps)
    Tp = eye - z * us @ em
    Tm = eye - (1.0 / np.conj(z)) * us @ ep
    lup = _factor(Tp, "ueps_resolvents", NotInvertible, 1e15)
    lum = _factor(Tm, "ueps_resolvents", NotInvertible, 1e15)
    Gp = sla.lu_solve(lup, eye)
    Gm = sla.lu_solve(lum, eye)
    W = np.asarray(as_matrix(weight_power(A, s)), dtype=np.complex128)
    rng = np.random.default_rng(seed)
    psis = rng.standard_normal((n, n_samples)) + 1j * rng.standard_normal((n, n_samples))
    adj = float(np.max(np.abs(Gp.conj().T + (1.0 / np.conj(z)) * us @ ep @ Gm)))
    return UepsSample(float(eps), z, Gp, Gm, op_norm(Gp), op_norm(Gm), op_norm(W @ Gp @ W), op_norm(W @ Gm @ W),
                      _quadratic_constant(Gp, eps, psis), _quadratic_constant(Gm, eps, psis), adj)
