"""Bartels-Stewart solver for ``A X - X B = C``.

Both coefficients are reduced to Schur form; the real quasi-triangular
factors are converted to complex upper-triangular form so the
back-substitution runs one column at a time without special handling
of 2x2 blocks. The imaginary part of the result is discarded.

For the time stepper the large coefficient always has the shape
``I - h F`` with a fixed operator ``F``. :class:`ShiftedSylvesterSolver`
factors ``F`` once; the Schur form of ``I - h F`` is then ``I - h T``
with the same orthogonal factor, so every stage coefficient ``h``
reuses one factorization.

Setting ``RAIL_DEBUG`` in the environment (or ``CHECK_RESIDUALS = True``)
verifies the relative residual of every solve against ``RESIDUAL_TOL``.
"""

from __future__ import annotations

import os
import threading
from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from .exceptions import ArgumentError, NumericError, SingularPencilError
from .linalg import as_matrix, real_schur

__all__ = [
    "SylvesterProblem",
    "ShiftedSylvesterSolver",
    "solve_sylvester",
    "sylvester_residual",
]

COLLISION_TOL = 1e-12
RESIDUAL_TOL = 1e-10
CHECK_RESIDUALS = bool(os.environ.get("RAIL_DEBUG"))


@dataclass(frozen=True)
class SylvesterProblem:
    """Coefficients of ``a_big @ X - X @ b_small = rhs``."""

    a_big: np.ndarray
    b_small: np.ndarray
    rhs: np.ndarray

    def __post_init__(self):
        a = as_matrix(self.a_big, name="a_big")
        b = as_matrix(self.b_small, name="b_small")
        c = as_matrix(self.rhs, name="rhs")
        if a.shape[0] != a.shape[1]:
            raise ArgumentError(f"a_big must be square, got {a.shape}")
        if b.shape[0] != b.shape[1]:
            raise ArgumentError(f"b_small must be square, got {b.shape}")
        if c.shape != (a.shape[0], b.shape[0]):
            raise ArgumentError(
                f"rhs shape {c.shape} does not match ({a.shape[0]}, {b.shape[0]})"
            )
        object.__setattr__(self, "a_big", a)
        object.__setattr__(self, "b_small", b)
        object.__setattr__(self, "rhs", c)


def _complex_schur(a: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    sf = real_schur(a)
    t, z = sla.rsf2csf(sf.t, sf.q)
    return z, t


def _triangular_sylvester(ta: np.ndarray, tb: np.ndarray, f: np.ndarray) -> np.ndarray:
    """Solve ``ta Y - Y tb = f`` for upper-triangular complex ``ta`` and ``tb``."""
    da = np.diag(ta)
    db = np.diag(tb)
    scale = max(1.0, np.abs(da).max(), np.abs(db).max())
    gap = np.abs(da[:, None] - db[None, :]).min()
    if gap <= COLLISION_TOL * scale:
        raise SingularPencilError(
            f"coefficients share an eigenvalue (spectral gap {gap:.3e})"
        )
    n, r = f.shape
    y = np.empty((n, r), dtype=complex)
    eye = np.eye(n)
    for j in range(r):
        rhs = f[:, j] + y[:, :j] @ tb[:j, j]
        y[:, j] = sla.solve_triangular(ta - db[j] * eye, rhs)
    return y


def solve_sylvester(a, b=None, c=None) -> np.ndarray:
    """Return X with ``a @ X - X @ b = c``.

    Accepts either three matrices or a single :class:`SylvesterProblem`.

    Raises
    ------
    ArgumentError
        Shapes are inconsistent.
    SingularPencilError
        ``a`` and ``b`` have an eigenvalue in common (to 1e-12).
    """
    p = a if isinstance(a, SylvesterProblem) else SylvesterProblem(a, b, c)
    za, ta = _complex_schur(p.a_big)
    zb, tb = _complex_schur(p.b_small)
    f = za.conj().T @ p.rhs @ zb
    y = _triangular_sylvester(ta, tb, f)
    x = (za @ y @ zb.conj().T).real
    if CHECK_RESIDUALS:
        _check(p.a_big, p.b_small, p.rhs, x)
    return x


def sylvester_residual(a, b, c, x) -> float:
    """Relative residual ``|AX - XB - C|_F / (|A||X| + |X||B| + |C|)``."""
    num = np.linalg.norm(a @ x - x @ b - c)
    den = (
        np.linalg.norm(a) * np.linalg.norm(x)
        + np.linalg.norm(x) * np.linalg.norm(b)
        + np.linalg.norm(c)
    )
    return float(num / den) if den > 0 else float(num)


def _check(a, b, c, x) -> None:
    res = sylvester_residual(a, b, c, x)
    if not res <= RESIDUAL_TOL:
        raise NumericError(f"Sylvester residual {res:.3e} exceeds {RESIDUAL_TOL:g}")


class ShiftedSylvesterSolver:
    """Solve ``(I - h F) X - X B = C`` for many ``h`` with one factorization of ``F``.

    The triangular factor of ``I - h F`` is cached per ``h``; the cache is
    guarded by a lock so K and L solves may run from separate threads.
    """

    def __init__(self, f):
        f = as_matrix(f, name="operator")
        if f.shape[0] != f.shape[1]:
            raise ArgumentError(f"operator must be square, got {f.shape}")
        self.f = f
        self.n = f.shape[0]
        self._z, self._t = _complex_schur(f)
        self._zh = self._z.conj().T
        self._shifted: dict[float, np.ndarray] = {}
        self._lock = threading.Lock()

    def _triangular(self, h: float) -> np.ndarray:
        with self._lock:
            ta = self._shifted.get(h)
            if ta is None:
                ta = np.eye(self.n) - h * self._t
                self._shifted[h] = ta
            return ta

    def solve(self, h: float, b, c) -> np.ndarray:
        b = as_matrix(b, name="b_small")
        c = as_matrix(c, name="rhs")
        if b.shape[0] != b.shape[1] or c.shape != (self.n, b.shape[0]):
            raise ArgumentError(
                f"shapes incompatible: operator {self.n}, b {b.shape}, rhs {c.shape}"
            )
        zb, tb = _complex_schur(b)
        f = self._zh @ c @ zb
        y = _triangular_sylvester(self._triangular(float(h)), tb, f)
        x = (self._z @ y @ zb.conj().T).real
        if CHECK_RESIDUALS:
            _check(np.eye(self.n) - h * self.f, b, c, x)
        return x
