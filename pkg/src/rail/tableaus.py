"""Stiffly accurate DIRK tableaus and their IMEX pairings.

DIRK2/DIRK3 follow Alexander's stiffly accurate families. The IMEX pairs
are the ARS(1,1,1), ARS(2,2,2) and ARS(4,4,3) schemes of Ascher, Ruuth and
Spiteri (Appl. Numer. Math. 25, 1997). Each table is checked against the
Runge-Kutta order conditions up to its nominal order when constructed.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .exceptions import ArgumentError

__all__ = [
    "ButcherTableau",
    "ImexTableau",
    "backward_euler",
    "dirk2",
    "dirk3",
    "imex111",
    "imex222",
    "imex443",
    "DIRK_SCHEMES",
    "IMEX_SCHEMES",
    "get_scheme",
]

TOL = 1e-12


def _order_defects(b: np.ndarray, a_tables: list[np.ndarray], c: np.ndarray, order: int) -> list[str]:
    """Names of violated order conditions (classical, or additive when several tables are given)."""
    bad = []
    if abs(b.sum() - 1.0) > TOL:
        bad.append("sum(b) = 1")
    if order >= 2 and abs(b @ c - 0.5) > TOL:
        bad.append("b.c = 1/2")
    if order >= 3:
        if abs(b @ c**2 - 1.0 / 3.0) > TOL:
            bad.append("b.c^2 = 1/3")
        for a in a_tables:
            if abs(b @ a @ c - 1.0 / 6.0) > TOL:
                bad.append("b.A.c = 1/6")
    if order >= 4:
        raise ArgumentError("order conditions are only tabulated up to order 3")
    return bad


@dataclass(frozen=True)
class ButcherTableau:
    """Diagonally implicit tableau; construction checks DIRK structure and stiff accuracy."""

    a: np.ndarray
    b: np.ndarray
    c: np.ndarray
    name: str
    order: int = 1

    def __post_init__(self):
        a = np.atleast_2d(np.asarray(self.a, dtype=float))
        b = np.asarray(self.b, dtype=float)
        c = np.asarray(self.c, dtype=float)
        s = a.shape[0]
        if a.shape != (s, s) or b.shape != (s,) or c.shape != (s,):
            raise ArgumentError(f"{self.name}: inconsistent tableau shapes")
        if np.any(np.abs(np.triu(a, 1)) > 0):
            raise ArgumentError(f"{self.name}: tableau is not lower triangular")
        if np.any(np.diag(a) <= 0):
            raise ArgumentError(f"{self.name}: diagonal coefficients must be positive")
        if np.abs(a.sum(axis=1) - c).max() > TOL:
            raise ArgumentError(f"{self.name}: abscissae are not the row sums")
        bad = _order_defects(b, [a], c, self.order)
        if bad:
            raise ArgumentError(f"{self.name}: order conditions violated: {bad}")
        for name, v in (("a", a), ("b", b), ("c", c)):
            object.__setattr__(self, name, v)

    @property
    def stages(self) -> int:
        return self.a.shape[0]

    @property
    def stiffly_accurate(self) -> bool:
        return abs(self.c[-1] - 1.0) <= TOL and np.abs(self.a[-1] - self.b).max() <= TOL

    def padded(self) -> "tuple[np.ndarray, np.ndarray, np.ndarray]":
        """The (s+1)-stage form with a leading zero row and column."""
        s = self.stages
        a = np.zeros((s + 1, s + 1))
        a[1:, 1:] = self.a
        return a, np.concatenate(([0.0], self.b)), np.concatenate(([0.0], self.c))


@dataclass(frozen=True)
class ImexTableau:
    """A DIRK paired with an explicit tableau of one more stage.

    ``explicit_a`` is (s+1) x (s+1) strictly lower triangular; its abscissae
    must equal those of the padded implicit table.
    """

    implicit: ButcherTableau
    explicit_a: np.ndarray
    explicit_b: np.ndarray
    name: str
    order: int = 1
    c: np.ndarray = field(init=False)

    def __post_init__(self):
        ea = np.asarray(self.explicit_a, dtype=float)
        eb = np.asarray(self.explicit_b, dtype=float)
        s = self.implicit.stages
        if ea.shape != (s + 1, s + 1) or eb.shape != (s + 1,):
            raise ArgumentError(f"{self.name}: explicit table must have {s + 1} stages")
        if np.any(np.abs(np.triu(ea)) > 0):
            raise ArgumentError(f"{self.name}: explicit table must be strictly lower triangular")
        ia, ib, ic = self.implicit.padded()
        if np.abs(ea.sum(axis=1) - ic).max() > TOL:
            raise ArgumentError(f"{self.name}: implicit and explicit abscissae differ")
        tables = [ia, ea]
        bad = _order_defects(ib, tables, ic, self.order) + _order_defects(eb, tables, ic, self.order)
        if bad:
            raise ArgumentError(f"{self.name}: coupled order conditions violated: {bad}")
        object.__setattr__(self, "explicit_a", ea)
        object.__setattr__(self, "explicit_b", eb)
        object.__setattr__(self, "c", ic)

    @property
    def stages(self) -> int:
        return self.implicit.stages

    @property
    def stiffly_accurate(self) -> bool:
        return (
            self.implicit.stiffly_accurate
            and np.abs(self.explicit_a[-1] - self.explicit_b).max() <= TOL
        )


def backward_euler() -> ButcherTableau:
    return ButcherTableau([[1.0]], [1.0], [1.0], "be", order=1)


def dirk2() -> ButcherTableau:
    nu = 1.0 - np.sqrt(2.0) / 2.0
    return ButcherTableau(
        [[nu, 0.0], [1.0 - nu, nu]], [1.0 - nu, nu], [nu, 1.0], "dirk2", order=2
    )


def dirk3() -> ButcherTableau:
    nu = 0.435866521508459
    b1 = -1.5 * nu**2 + 4.0 * nu - 0.25
    b2 = 1.5 * nu**2 - 5.0 * nu + 1.25
    return ButcherTableau(
        [[nu, 0.0, 0.0], [(1.0 - nu) / 2.0, nu, 0.0], [b1, b2, nu]],
        [b1, b2, nu],
        [nu, (1.0 + nu) / 2.0, 1.0],
        "dirk3",
        order=3,
    )


def imex111() -> ImexTableau:
    return ImexTableau(
        backward_euler(), [[0.0, 0.0], [1.0, 0.0]], [1.0, 0.0], "imex111", order=1
    )


def imex222() -> ImexTableau:
    gamma = 1.0 - 1.0 / np.sqrt(2.0)
    delta = 1.0 - 1.0 / (2.0 * gamma)
    implicit = ButcherTableau(
        [[gamma, 0.0], [1.0 - gamma, gamma]], [1.0 - gamma, gamma], [gamma, 1.0], "ars222-implicit", order=2
    )
    explicit = [[0.0, 0.0, 0.0], [gamma, 0.0, 0.0], [delta, 1.0 - delta, 0.0]]
    return ImexTableau(implicit, explicit, [delta, 1.0 - delta, 0.0], "imex222", order=2)


def imex443() -> ImexTableau:
    implicit = ButcherTableau(
        [
            [1 / 2, 0, 0, 0],
            [1 / 6, 1 / 2, 0, 0],
            [-1 / 2, 1 / 2, 1 / 2, 0],
            [3 / 2, -3 / 2, 1 / 2, 1 / 2],
        ],
        [3 / 2, -3 / 2, 1 / 2, 1 / 2],
        [1 / 2, 2 / 3, 1 / 2, 1],
        "ars443-implicit",
        order=3,
    )
    explicit = [
        [0, 0, 0, 0, 0],
        [1 / 2, 0, 0, 0, 0],
        [11 / 18, 1 / 18, 0, 0, 0],
        [5 / 6, -5 / 6, 1 / 2, 0, 0],
        [1 / 4, 7 / 4, 3 / 4, -7 / 4, 0],
    ]
    return ImexTableau(implicit, explicit, [1 / 4, 7 / 4, 3 / 4, -7 / 4, 0], "imex443", order=3)


DIRK_SCHEMES = {"be": backward_euler, "dirk2": dirk2, "dirk3": dirk3}
IMEX_SCHEMES = {"imex111": imex111, "imex222": imex222, "imex443": imex443}


def get_scheme(name: str) -> ButcherTableau | ImexTableau:
    factory = DIRK_SCHEMES.get(name) or IMEX_SCHEMES.get(name)
    if factory is None:
        raise ArgumentError(
            f"unknown scheme {name!r}; choose from {sorted(DIRK_SCHEMES) + sorted(IMEX_SCHEMES)}"
        )
    return factory()
