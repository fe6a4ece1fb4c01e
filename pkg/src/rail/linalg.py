"""Dense real matrix factorizations used throughout the package.

Matrices are plain two-dimensional ``numpy.ndarray`` objects of dtype
float64 stored in row-major (C) order. The factorizations delegate to
LAPACK through numpy/scipy; this module fixes the calling conventions
(reduced forms, column ordering, error types) the rest of the package
relies on. Column signs of Q, U and V factors are not normalized.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from .exceptions import ArgumentError, NumericError

__all__ = [
    "QrFactors",
    "SvdFactors",
    "SchurFactors",
    "as_matrix",
    "qr_reduced",
    "svd",
    "real_schur",
    "schur_eigenvalues",
]


@dataclass(frozen=True)
class QrFactors:
    q: np.ndarray
    r: np.ndarray


@dataclass(frozen=True)
class SvdFactors:
    u: np.ndarray
    sigma: np.ndarray
    v: np.ndarray

    def reconstruct(self) -> np.ndarray:
        return (self.u * self.sigma) @ self.v.T


@dataclass(frozen=True)
class SchurFactors:
    """Real Schur form ``a = q @ t @ q.T`` with ``t`` quasi-upper-triangular."""

    q: np.ndarray
    t: np.ndarray


def as_matrix(a, *, name: str = "matrix", finite: bool = True) -> np.ndarray:
    """Validate and convert ``a`` to a float64 2D array with positive dimensions."""
    m = np.asarray(a, dtype=float)
    if m.ndim != 2:
        raise ArgumentError(f"{name} must be two-dimensional, got shape {m.shape}")
    if m.shape[0] == 0 or m.shape[1] == 0:
        raise ArgumentError(f"{name} has a zero dimension: {m.shape}")
    if finite and not np.all(np.isfinite(m)):
        raise ArgumentError(f"{name} contains non-finite entries")
    return m


def qr_reduced(a) -> QrFactors:
    """Economy-size QR: ``q`` is n x k with orthonormal columns, k = min(n, m)."""
    a = as_matrix(a, name="qr input")
    q, r = np.linalg.qr(a, mode="reduced")
    return QrFactors(q, r)


def svd(a) -> SvdFactors:
    """Thin SVD with singular values sorted in non-increasing order."""
    a = as_matrix(a, name="svd input")
    try:
        u, s, vt = np.linalg.svd(a, full_matrices=False)
    except np.linalg.LinAlgError as exc:
        raise NumericError(f"SVD did not converge for a {a.shape} matrix") from exc
    return SvdFactors(u, s, vt.T)


def real_schur(a) -> SchurFactors:
    """Real Schur decomposition.

    The QR iteration is capped inside LAPACK (``dhseqr``); failure to
    converge is reported as :class:`NumericError`.
    """
    a = as_matrix(a, name="schur input")
    if a.shape[0] != a.shape[1]:
        raise ArgumentError(f"Schur decomposition needs a square matrix, got {a.shape}")
    try:
        t, q = sla.schur(a, output="real")
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise NumericError("real Schur iteration did not converge") from exc
    return SchurFactors(q, t)


def schur_eigenvalues(t: np.ndarray) -> np.ndarray:
    """Eigenvalues read off the 1x1 and 2x2 diagonal blocks of a real Schur form."""
    n = t.shape[0]
    out = []
    i = 0
    while i < n:
        if i + 1 < n and t[i + 1, i] != 0.0:
            blk = t[i : i + 2, i : i + 2]
            tr = 0.5 * (blk[0, 0] + blk[1, 1])
            det = blk[0, 0] * blk[1, 1] - blk[0, 1] * blk[1, 0]
            disc = complex(tr * tr - det) ** 0.5
            out.extend([tr + disc, tr - disc])
            i += 2
        else:
            out.append(complex(t[i, i]))
            i += 1
    return np.array(out)
