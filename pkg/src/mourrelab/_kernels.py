"""Hot loops with paired numba and numpy implementations.

Each kernel exists as an explicit-loop function (compiled with numba when it
is available and enabled) and as a vectorised numpy function. The public
names at the bottom of the module select one of them according to
:data:`mourrelab._accel.USE_NUMBA`; both are always importable so that tests
and the benchmark can compare them.
"""

from __future__ import annotations

import numpy as np

from ._accel import HAVE_NUMBA, USE_NUMBA, njit


# GGT series fill -----------------------------------------------------------

def _ggt_fill_loops(alpha, ainv, tail_tol):
    n = alpha.shape[0] - 1
    out = np.zeros((n, n), dtype=np.complex128)
    for c in range(n):
        if c > 0:
            out[c - 1, c] = ainv[c]
        head = -np.conj(alpha[c])
        prod = 1.0
        for i in range(c, n):
            if i > c:
                prod *= ainv[i]
                if prod < tail_tol:
                    break
            out[i, c] = head * alpha[i + 1] * prod
    return out


def _ggt_fill_numpy(alpha, ainv, tail_tol):
    alpha = np.asarray(alpha, dtype=np.complex128)
    ainv = np.asarray(ainv, dtype=np.float64)
    n = alpha.shape[0] - 1
    out = np.zeros((n, n), dtype=np.complex128)
    idx = np.arange(1, n)
    out[idx - 1, idx] = ainv[1:n]
    for c in range(n):
        prods = np.ones(n - c)
        if n - c > 1:
            prods[1:] = np.cumprod(ainv[c + 1:n])
            below = np.flatnonzero(prods[1:] < tail_tol)
            if below.size:
                prods = prods[: below[0] + 1]
        rows = slice(c, c + prods.shape[0])
        out[rows, c] = -np.conj(alpha[c]) * alpha[c + 1:c + 1 + prods.shape[0]] * prods
    return out


# band materialisation ------------------------------------------------------

def _band_fill_loops(offsets, coeffs):
    n = coeffs.shape[1]
    out = np.zeros((n, n), dtype=np.complex128)
    for t in range(offsets.shape[0]):
        off = offsets[t]
        for c in range(n):
            r = c + off
            if 0 <= r < n:
                out[r, c] += coeffs[t, r]
    return out


def _band_fill_numpy(offsets, coeffs):
    coeffs = np.asarray(coeffs, dtype=np.complex128)
    n = coeffs.shape[1]
    out = np.zeros((n, n), dtype=np.complex128)
    for t, off in enumerate(np.asarray(offsets)):
        c = np.arange(max(0, -off), min(n, n - off))
        r = c + off
        out[r, c] += coeffs[t, r]
    return out


# Bernoulli weighted-shift maximisation -------------------------------------

def _bernoulli_scan_loops(s, m, L):
    lo = max(-L, -L - m)
    hi = min(L, L - m)
    best = -1.0
    best_i = lo
    for i in range(lo, hi + 1):
        v = ((1.0 + i * i) * (1.0 + (i + m) * (i + m))) ** (-0.5 * s)
        if v > best:
            best = v
            best_i = i
    return best, best_i, lo, hi


def _bernoulli_scan_numpy(s, m, L):
    lo = max(-L, -L - m)
    hi = min(L, L - m)
    i = np.arange(lo, hi + 1, dtype=np.float64)
    v = ((1.0 + i * i) * (1.0 + (i + m) ** 2)) ** (-0.5 * s)
    j = int(np.argmax(v))
    return float(v[j]), lo + j, lo, hi


NUMBA_IMPL = {}
if HAVE_NUMBA:
    NUMBA_IMPL = {
        "ggt_fill": njit(_ggt_fill_loops),
        "band_fill": njit(_band_fill_loops),
        "bernoulli_scan": njit(_bernoulli_scan_loops),
    }

NUMPY_IMPL = {
    "ggt_fill": _ggt_fill_numpy,
    "band_fill": _band_fill_numpy,
    "bernoulli_scan": _bernoulli_scan_numpy,
}

ACTIVE = NUMBA_IMPL if (USE_NUMBA and NUMBA_IMPL) else NUMPY_IMPL


def ggt_fill(alpha: np.ndarray, ainv: np.ndarray, tail_tol: float) -> np.ndarray:
    """Dense GGT columns from coefficient values on ``[k_lo, k_hi + 1]``.

    Parameters
    ----------
    alpha : complex array of length N + 1
    ainv : real array of length N + 1, the values ``sqrt(1 - |alpha|^2)``
    tail_tol : float
        The downward series in each column stops once the running product of
        ``ainv`` drops below this value.
    """
    return ACTIVE["ggt_fill"](
        np.ascontiguousarray(alpha, dtype=np.complex128),
        np.ascontiguousarray(ainv, dtype=np.float64),
        float(tail_tol),
    )


def band_fill(offsets: np.ndarray, coeffs: np.ndarray) -> np.ndarray:
    """Assemble ``sum_t D_{c_t} T^{offsets[t]}`` on a window.

    ``coeffs[t, r]`` is the coefficient of offset ``offsets[t]`` at window
    row ``r``.
    """
    return ACTIVE["band_fill"](
        np.ascontiguousarray(offsets, dtype=np.int64),
        np.ascontiguousarray(coeffs, dtype=np.complex128),
    )


def bernoulli_scan(s: float, m: int, L: int):
    """Return ``(max value, argmax i, i_lo, i_hi)`` of the level-one weights."""
    v, i, lo, hi = ACTIVE["bernoulli_scan"](float(s), int(m), int(L))
    return float(v), int(i), int(lo), int(hi)
