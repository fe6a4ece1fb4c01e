"""Low-rank factorizations ``Vx S Vy^T`` and the operations acting on them.

Two representations are used:

* :class:`LowRankState` -- orthonormal factors ``vx``, ``vy`` and a square
  (not necessarily diagonal) coefficient matrix ``s``. This is the solution
  carried between steps.
* :class:`Factored` -- an arbitrary product ``x @ c @ y.T`` with no
  orthogonality, used for right-hand sides assembled from several terms.
  Nothing here ever forms the N x N product unless asked to.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
import scipy.linalg as sla

from .exceptions import ArgumentError
from .linalg import qr_reduced, svd
from .spectral import Grid2D

__all__ = [
    "AUGMENTATION_TOL",
    "LowRankState",
    "Factored",
    "WeightFunction",
    "reduced_augmentation",
    "reduced_augmentation_pair",
    "truncate_svd",
    "conservative_truncate",
    "mass",
    "l1_error",
]

AUGMENTATION_TOL = 1e-12
ORTHO_TOL = 1e-10


def _orthonormality_defect(v: np.ndarray) -> float:
    return float(np.abs(v.T @ v - np.eye(v.shape[1])).max())


@dataclass(frozen=True)
class Factored:
    """The matrix ``x @ c @ y.T``."""

    x: np.ndarray
    c: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        if self.x.ndim != 2 or self.y.ndim != 2 or self.c.ndim != 2:
            raise ArgumentError("factors must be two-dimensional")
        if self.c.shape != (self.x.shape[1], self.y.shape[1]):
            raise ArgumentError(
                f"coefficient shape {self.c.shape} does not match factors "
                f"{self.x.shape} and {self.y.shape}"
            )

    @property
    def shape(self) -> tuple[int, int]:
        return (self.x.shape[0], self.y.shape[0])

    @property
    def T(self) -> "Factored":
        return Factored(self.y, self.c.T, self.x)

    def scaled(self, alpha: float) -> "Factored":
        return Factored(self.x, alpha * self.c, self.y)

    def times(self, v: np.ndarray) -> np.ndarray:
        """``(x c y^T) @ v``."""
        return self.x @ (self.c @ (self.y.T @ v))

    def project(self, vx: np.ndarray, vy: np.ndarray) -> np.ndarray:
        """``vx^T (x c y^T) vy``."""
        return (vx.T @ self.x) @ self.c @ (self.y.T @ vy)

    def to_dense(self) -> np.ndarray:
        return self.x @ self.c @ self.y.T

    @staticmethod
    def concat(terms: Sequence["Factored"]) -> "Factored":
        """Sum of terms, represented by stacking factors and a block-diagonal coefficient."""
        if not terms:
            raise ArgumentError("cannot concatenate an empty list of terms")
        return Factored(
            np.hstack([t.x for t in terms]),
            sla.block_diag(*[t.c for t in terms]),
            np.hstack([t.y for t in terms]),
        )


@dataclass(frozen=True)
class LowRankState:
    """``U = vx @ s @ vy.T`` with orthonormal columns in ``vx`` and ``vy``."""

    vx: np.ndarray
    s: np.ndarray
    vy: np.ndarray

    def __post_init__(self):
        r = self.vx.shape[1]
        if self.vx.ndim != 2 or self.vy.ndim != 2:
            raise ArgumentError("basis factors must be two-dimensional")
        if self.vy.shape[1] != r or self.s.shape != (r, r):
            raise ArgumentError(
                f"inconsistent ranks: vx {self.vx.shape}, s {self.s.shape}, vy {self.vy.shape}"
            )
        if r == 0:
            raise ArgumentError("rank must be positive")
        if r > self.vx.shape[0] or r > self.vy.shape[0]:
            raise ArgumentError(f"rank {r} exceeds the grid size")
        if _orthonormality_defect(self.vx) > ORTHO_TOL or _orthonormality_defect(self.vy) > ORTHO_TOL:
            raise ArgumentError("basis factors are not orthonormal")

    @property
    def rank(self) -> int:
        return self.vx.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return (self.vx.shape[0], self.vy.shape[0])

    def factored(self) -> Factored:
        return Factored(self.vx, self.s, self.vy)

    def to_dense(self) -> np.ndarray:
        return self.vx @ self.s @ self.vy.T

    def singular_values(self) -> np.ndarray:
        return np.linalg.svd(self.s, compute_uv=False)

    def norm(self) -> float:
        """Frobenius norm of the product (equal to that of ``s``)."""
        return float(np.linalg.norm(self.s))

    @classmethod
    def from_factors(cls, x, c, y) -> "LowRankState":
        """Orthonormalize an arbitrary product ``x c y^T`` without truncating it."""
        qx = qr_reduced(np.asarray(x, dtype=float))
        qy = qr_reduced(np.asarray(y, dtype=float))
        core = svd(qx.r @ np.asarray(c, dtype=float) @ qy.r.T)
        return cls(qx.q @ core.u, np.diag(core.sigma), qy.q @ core.v)

    @classmethod
    def from_dense(cls, u, rank: int | None = None, tol: float = 0.0) -> "LowRankState":
        """Leading SVD triplets of a dense matrix.

        Keeps at most ``rank`` triplets and only those with singular value
        above ``tol`` (always at least one).
        """
        f = svd(u)
        keep = int(np.count_nonzero(f.sigma > tol))
        if rank is not None:
            keep = min(keep, rank)
        keep = max(keep, 1)
        return cls(f.u[:, :keep], np.diag(f.sigma[:keep]), f.v[:, :keep])

    def padded(self, r0: int) -> "LowRankState":
        """Extend to rank ``r0`` with zero coefficients.

        The new basis columns are the first coordinate directions that stay
        independent after Gram-Schmidt against the existing columns, so the
        padding is deterministic.
        """
        if r0 <= self.rank:
            return self
        n = min(self.shape)
        if r0 > n:
            raise ArgumentError(f"cannot pad to rank {r0} on a grid of size {n}")
        vx = _complete_basis(self.vx, r0)
        vy = _complete_basis(self.vy, r0)
        s = np.zeros((r0, r0))
        s[: self.rank, : self.rank] = self.s
        return LowRankState(vx, s, vy)


def _complete_basis(v: np.ndarray, r0: int) -> np.ndarray:
    n = v.shape[0]
    cols = [v[:, i] for i in range(v.shape[1])]
    for i in range(n):
        if len(cols) == r0:
            break
        e = np.zeros(n)
        e[i] = 1.0
        for _ in range(2):
            for c in cols:
                e -= (c @ e) * c
        nrm = np.linalg.norm(e)
        if nrm > 1e-8:
            cols.append(e / nrm)
    return np.column_stack(cols)


@dataclass(frozen=True)
class WeightFunction:
    """Separable positive weight ``w(x, y) = w1(x) w2(y)``."""

    w1: np.ndarray
    w2: np.ndarray

    def __post_init__(self):
        w1 = np.asarray(self.w1, dtype=float)
        w2 = np.asarray(self.w2, dtype=float)
        if w1.ndim != 1 or w2.ndim != 1:
            raise ArgumentError("weight factors must be vectors")
        if not (w1.min() > 0 and w2.min() > 0):
            raise ArgumentError("weight function must be strictly positive")
        object.__setattr__(self, "w1", w1)
        object.__setattr__(self, "w2", w2)

    @classmethod
    def uniform(cls, grid: Grid2D) -> "WeightFunction":
        return cls(np.ones(grid.x.n), np.ones(grid.y.n))

    @classmethod
    def maxwellian(cls, grid: Grid2D, delta: float = 5.0e-9) -> "WeightFunction":
        """``(exp(-x^2/2) + delta)(exp(-y^2/2) + delta)``."""
        return cls(
            np.exp(-0.5 * grid.x.points**2) + delta,
            np.exp(-0.5 * grid.y.points**2) + delta,
        )


def _stacked_factors(bases: Sequence[np.ndarray]):
    if not bases:
        raise ArgumentError("reduced augmentation needs at least one basis")
    n = bases[0].shape[0]
    if any(b.shape[0] != n for b in bases):
        raise ArgumentError("all bases must have the same number of rows")
    qr = qr_reduced(np.hstack(bases))
    core = svd(qr.r)
    return qr.q, core


def reduced_augmentation(bases: Sequence[np.ndarray], tol: float = AUGMENTATION_TOL) -> np.ndarray:
    """Orthonormal basis for the dominant span of the concatenated ``bases``.

    The concatenation is QR-factored; the left singular vectors of R whose
    singular values exceed ``tol`` select the directions kept.
    """
    q, core = _stacked_factors(bases)
    keep = max(int(np.count_nonzero(core.sigma > tol)), 1)
    return q @ core.u[:, :keep]


def reduced_augmentation_pair(
    x_bases: Sequence[np.ndarray],
    y_bases: Sequence[np.ndarray],
    tol: float = AUGMENTATION_TOL,
) -> tuple[np.ndarray, np.ndarray]:
    """Reduce the x and y augmentations to a common column count ``max(rx, ry)``."""
    qx, cx = _stacked_factors(x_bases)
    qy, cy = _stacked_factors(y_bases)
    rx = int(np.count_nonzero(cx.sigma > tol))
    ry = int(np.count_nonzero(cy.sigma > tol))
    keep = min(max(rx, ry, 1), qx.shape[0], qy.shape[0])
    return _leading(qx, cx.u, keep), _leading(qy, cy.u, keep)


def _leading(q: np.ndarray, u: np.ndarray, keep: int) -> np.ndarray:
    # the smaller side may have fewer stacked columns than the common rank
    basis = q @ u[:, :keep]
    return basis if basis.shape[1] == keep else _complete_basis(basis, keep)


def _retained_rank(sigma: np.ndarray, eps: float, relative: bool, norm: str) -> int:
    threshold = eps * sigma[0] if (relative and sigma.size and sigma[0] > 0) else eps
    if norm == "2":
        r = int(np.count_nonzero(sigma > threshold))
    elif norm == "frobenius":
        # smallest r with sqrt(sum_{j>r} sigma_j^2) <= threshold
        tails = np.sqrt(np.cumsum((sigma**2)[::-1]))[::-1]
        tails = np.append(tails, 0.0)
        r = int(np.argmax(tails <= threshold))
    else:
        raise ArgumentError(f"unknown truncation norm {norm!r}")
    return r


def truncate_svd(
    state: LowRankState,
    eps: float,
    *,
    relative: bool = False,
    norm: str = "2",
) -> LowRankState:
    """Diagonalize ``s`` and drop singular values ``<= eps``.

    ``eps`` is absolute unless ``relative`` is set, in which case it scales
    with the largest singular value. ``norm="frobenius"`` switches to the
    criterion on the discarded tail. At least one triplet is always kept.
    """
    core = svd(state.s)
    r = max(_retained_rank(core.sigma, eps, relative, norm), 1)
    return LowRankState(
        state.vx @ core.u[:, :r],
        np.diag(core.sigma[:r]),
        state.vy @ core.v[:, :r],
    )


def conservative_truncate(
    state: LowRankState,
    w: WeightFunction,
    rho0: float,
    eps: float,
    grid: Grid2D,
    *,
    reproject: bool = True,
) -> LowRankState:
    """Truncate while keeping the total mass equal to ``rho0``.

    The state is split into ``f1``, the multiple of ``w`` carrying mass
    ``rho0``, and the remainder ``f2``. The remainder is truncated in the
    ``1/w``-weighted inner product (factors scaled by ``1/sqrt(w)`` before
    the QR and by ``sqrt(w)`` after). SVD truncation can leave the
    truncated remainder with mass of order ``eps``; with ``reproject``
    (default) that residual mass is projected out again, which only
    changes the coefficient of the ``w`` direction. The result is
    re-orthonormalized and has rank ``1 + rank(f2)``.
    """
    if state.shape != grid.shape:
        raise ArgumentError(f"state shape {state.shape} does not match grid {grid.shape}")
    w1, w2 = w.w1, w.w2
    if w1.size != grid.x.n or w2.size != grid.y.n:
        raise ArgumentError("weight function does not match the grid")
    area = grid.cell_area
    norm_w = area * w1.sum() * w2.sum()
    s_f1 = rho0 / norm_w

    sw1, sw2 = np.sqrt(w1), np.sqrt(w2)
    qx = qr_reduced(np.column_stack([w1, state.vx]) / sw1[:, None])
    qy = qr_reduced(np.column_stack([w2, state.vy]) / sw2[:, None])
    core = svd(qx.r @ sla.block_diag([[-s_f1]], state.s) @ qy.r.T)
    r_f2 = int(np.count_nonzero(core.sigma > eps))
    vx_f2 = sw1[:, None] * (qx.q @ core.u[:, :r_f2])
    vy_f2 = sw2[:, None] * (qy.q @ core.v[:, :r_f2])
    s_f2 = np.diag(core.sigma[:r_f2])

    if reproject and r_f2:
        f2_mass = area * (vx_f2.sum(axis=0) @ s_f2 @ vy_f2.sum(axis=0))
        s_f1 -= f2_mass / norm_w

    qx = qr_reduced(np.column_stack([w1, vx_f2]))
    qy = qr_reduced(np.column_stack([w2, vy_f2]))
    core = svd(qx.r @ sla.block_diag([[s_f1]], s_f2) @ qy.r.T)
    return LowRankState(qx.q @ core.u, np.diag(core.sigma), qy.q @ core.v)


def mass(state: LowRankState | Factored, grid: Grid2D) -> float:
    """``dx dy sum_ij U_ij`` evaluated through the factors."""
    if isinstance(state, LowRankState):
        x, c, y = state.vx, state.s, state.vy
    else:
        x, c, y = state.x, state.c, state.y
    return float(grid.cell_area * (x.sum(axis=0) @ c @ y.sum(axis=0)))


def l1_error(a: LowRankState, b, grid: Grid2D) -> float:
    """Discrete L1 distance ``dx dy sum |a - b|``; ``b`` may be dense or low rank."""
    da = a.to_dense()
    db = b.to_dense() if isinstance(b, (LowRankState, Factored)) else np.asarray(b, dtype=float)
    if da.shape != grid.shape or db.shape != grid.shape:
        raise ArgumentError(
            f"grid mismatch: {da.shape} and {db.shape} against grid {grid.shape}"
        )
    return float(grid.cell_area * np.abs(da - db).sum())
