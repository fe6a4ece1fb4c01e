"""RAIL time stepping for ``dU/dt = Fx U + U Fy^T + Ex(t, U) + Phi(t)``.

Each implicit stage solves

    U(k) = W(k-1) + h (Fx U(k) + U(k) Fy^T),      h = a_kk dt,

in three projected pieces: a K solve and an L solve (Sylvester equations
of size N x r) that produce candidate bases, a reduced augmentation that
merges them with the bases of earlier stages, and a Galerkin S solve for
the coefficients. ``W(k-1)`` gathers every known term of the stage
equation in factored form.

Stage 1 projects onto the bases of ``U^n``. Later stages project onto the
reduced augmentation of a first-order prediction at the stage time and
all previous stage bases. Only stiffly accurate tableaus are accepted, so
the last stage is the step result.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Union

import numpy as np

from .exceptions import ArgumentError, NumericError
from .lowrank import (
    AUGMENTATION_TOL,
    Factored,
    LowRankState,
    WeightFunction,
    conservative_truncate,
    mass,
    reduced_augmentation_pair,
    truncate_svd,
)
from .linalg import qr_reduced
from .spectral import Grid2D
from .sylvester import ShiftedSylvesterSolver, solve_sylvester
from .tableaus import ButcherTableau, ImexTableau, backward_euler

__all__ = [
    "ProblemOperators",
    "TruncationPolicy",
    "StageWorkspace",
    "RailStepper",
    "assemble_w",
    "implicit_increment",
    "backward_euler_step",
    "dirk_step",
    "imex_step",
]

OperatorLike = Union[np.ndarray, Callable[[float], np.ndarray]]


@dataclass
class ProblemOperators:
    """Right-hand side pieces of the matrix ODE.

    ``fx`` and ``fy`` are N x N matrices or callables of time. The explicit
    term and the source return :class:`Factored` triples.
    """

    fx: OperatorLike
    fy: OperatorLike
    explicit_term: Callable[[float, LowRankState], Factored] | None = None
    source: Callable[[float], Factored] | None = None

    def __post_init__(self):
        for name in ("fx", "fy"):
            op = getattr(self, name)
            if not callable(op):
                op = np.asarray(op, dtype=float)
                if op.ndim != 2 or op.shape[0] != op.shape[1]:
                    raise ArgumentError(f"{name} must be a square matrix, got {op.shape}")
                setattr(self, name, op)

    @property
    def time_dependent(self) -> bool:
        return callable(self.fx) or callable(self.fy)

    def fx_at(self, t: float) -> np.ndarray:
        return self.fx(t) if callable(self.fx) else self.fx

    def fy_at(self, t: float) -> np.ndarray:
        return self.fy(t) if callable(self.fy) else self.fy


@dataclass(frozen=True)
class TruncationPolicy:
    """How a pre-truncated factorization is compressed.

    ``kind="svd"`` drops singular values ``<= eps``. ``kind="conservative"``
    keeps the mass equal to ``target_mass``, or to the mass of the input
    when no target is set (needed when a source changes the mass).
    """

    kind: str = "svd"
    weight: WeightFunction | None = None
    grid: Grid2D | None = None
    target_mass: float | None = None
    relative: bool = False
    norm: str = "2"

    def __post_init__(self):
        if self.kind not in ("svd", "conservative"):
            raise ArgumentError(f"unknown truncation kind {self.kind!r}")
        if self.kind == "conservative" and (self.weight is None or self.grid is None):
            raise ArgumentError("conservative truncation needs a weight function and a grid")

    def apply(self, state: LowRankState, eps: float) -> LowRankState:
        if self.kind == "svd":
            return truncate_svd(state, eps, relative=self.relative, norm=self.norm)
        rho = self.target_mass if self.target_mass is not None else mass(state, self.grid)
        return conservative_truncate(state, self.weight, rho, eps, self.grid)


@dataclass
class StageWorkspace:
    """Quantities stored while advancing one step.

    Lists are indexed by stage (0-based); ``explicit[l]`` is the explicit
    increment evaluated at the start of stage ``l + 1``, i.e. from ``U^n``
    for ``l = 0``.
    """

    u_n: LowRankState
    stages: list[LowRankState] = field(default_factory=list)
    implicit: list[Factored] = field(default_factory=list)
    explicit: list[Factored] = field(default_factory=list)
    sources: list[Factored] = field(default_factory=list)
    predictors: dict[float, LowRankState] = field(default_factory=dict)

    def bases_x(self) -> list[np.ndarray]:
        """Stage bases newest first, ending with the bases of ``U^n``."""
        return [u.vx for u in reversed(self.stages)] + [self.u_n.vx]

    def bases_y(self) -> list[np.ndarray]:
        return [u.vy for u in reversed(self.stages)] + [self.u_n.vy]


def implicit_increment(state: LowRankState, fx: np.ndarray, fy: np.ndarray) -> Factored:
    """``Fx U + U Fy^T`` as a rank-2r triple."""
    s = state.s
    zero = np.zeros_like(s)
    return Factored(
        np.hstack([fx @ state.vx, state.vx]),
        np.block([[s, zero], [zero, s]]),
        np.hstack([state.vy, fy @ state.vy]),
    )


def assemble_w(k: int, workspace: StageWorkspace, dt: float, tableau) -> Factored:
    """Known part ``W(k-1)`` of stage ``k`` (1-based) as a factored sum.

    ``U^n + dt sum_{l<k} a_kl Y_l + dt sum_{l<=k} a_kl Phi(t_l)
    + dt sum_{l<=k} at_{k+1,l} Yt_l`` where the last sum (explicit terms)
    is present only for IMEX tableaus. Zero coefficients are skipped.
    """
    imex = isinstance(tableau, ImexTableau)
    a = tableau.implicit.a if imex else tableau.a
    if not 1 <= k <= a.shape[0]:
        raise ArgumentError(f"stage index {k} out of range")
    terms = [workspace.u_n.factored()]
    for l in range(k - 1):
        if a[k - 1, l] != 0.0:
            terms.append(workspace.implicit[l].scaled(dt * a[k - 1, l]))
    for l, phi in enumerate(workspace.sources[:k]):
        if phi is not None and a[k - 1, l] != 0.0:
            terms.append(phi.scaled(dt * a[k - 1, l]))
    if imex:
        ea = tableau.explicit_a
        for l, ex in enumerate(workspace.explicit[:k]):
            if ea[k, l] != 0.0:
                terms.append(ex.scaled(dt * ea[k, l]))
    elif workspace.explicit:
        raise ArgumentError("explicit increments need an IMEX tableau")
    return terms[0] if len(terms) == 1 else Factored.concat(terms)


class RailStepper:
    """Advance a :class:`LowRankState` with a stiffly accurate DIRK or IMEX tableau.

    Parameters
    ----------
    ops
        The problem operators.
    tableau
        :class:`ButcherTableau` (implicit only) or :class:`ImexTableau`.
    eps
        Singular value tolerance for truncation.
    truncation
        Policy applied to the accepted step.
    conservative_stages
        Apply ``truncation`` at internal stages and first-order predictions
        too. Off by default: those then use plain SVD truncation with the
        same tolerance.
    aug_tol
        Tolerance of the reduced augmentation.
    parallel
        Run the K and L solves of a stage in two threads.
    """

    def __init__(
        self,
        ops: ProblemOperators,
        tableau: ButcherTableau | ImexTableau,
        eps: float,
        truncation: TruncationPolicy | None = None,
        *,
        aug_tol: float = AUGMENTATION_TOL,
        conservative_stages: bool = False,
        parallel: bool = False,
    ):
        if not tableau.stiffly_accurate:
            raise ArgumentError(f"tableau {tableau.name!r} is not stiffly accurate")
        self.imex = isinstance(tableau, ImexTableau)
        if ops.explicit_term is not None and not self.imex:
            raise ArgumentError("problems with explicit terms need an IMEX tableau")
        self.ops = ops
        self.tableau = tableau
        self.eps = float(eps)
        self.truncation = truncation or TruncationPolicy()
        self.stage_truncation = self.truncation if conservative_stages else TruncationPolicy(
            relative=self.truncation.relative, norm=self.truncation.norm
        )
        self.aug_tol = aug_tol
        self.parallel = parallel
        self._solvers: dict = {}
        self._pool = ThreadPoolExecutor(max_workers=2) if parallel else None

    # -- operator access -------------------------------------------------

    def _solver(self, axis: str, t: float) -> ShiftedSylvesterSolver:
        key = (axis, t) if self.ops.time_dependent else axis
        solver = self._solvers.get(key)
        if solver is None:
            f = self.ops.fx_at(t) if axis == "x" else self.ops.fy_at(t)
            solver = ShiftedSylvesterSolver(f)
            if self.ops.time_dependent and len(self._solvers) > 16:
                self._solvers.clear()
            self._solvers[key] = solver
        return solver

    # -- building blocks -------------------------------------------------

    def kls(
        self,
        w: Factored,
        h: float,
        star: tuple[np.ndarray, np.ndarray],
        history: tuple[list[np.ndarray], list[np.ndarray]],
        t: float,
    ) -> LowRankState:
        """Solve ``U = W + h (Fx U + U Fy^T)`` projected onto ``star``; return the untruncated result."""
        fx, fy = self.ops.fx_at(t), self.ops.fy_at(t)
        vsx, vsy = star

        def k_solve():
            b = h * (fy @ vsy).T @ vsy
            return self._solver("x", t).solve(h, b, w.times(vsy))

        def l_solve():
            b = h * (fx @ vsx).T @ vsx
            return self._solver("y", t).solve(h, b, w.T.times(vsx))

        if self._pool is not None:
            fk, fl = self._pool.submit(k_solve), self._pool.submit(l_solve)
            k_mat, l_mat = fk.result(), fl.result()
        else:
            k_mat, l_mat = k_solve(), l_solve()

        vhx, vhy = reduced_augmentation_pair(
            [qr_reduced(k_mat).q] + history[0],
            [qr_reduced(l_mat).q] + history[1],
            self.aug_tol,
        )
        n = min(w.shape)
        if vhx.shape[1] > n:
            raise NumericError(f"rank {vhx.shape[1]} exceeds grid size {n}")
        a_s = np.eye(vhx.shape[1]) - h * (vhx.T @ fx @ vhx)
        b_s = h * (fy @ vhy).T @ vhy
        s_hat = solve_sylvester(a_s, b_s, w.project(vhx, vhy))
        return LowRankState(vhx, s_hat, vhy)

    def _source(self, t: float) -> Factored | None:
        return self.ops.source(t) if self.ops.source is not None else None

    def first_order(
        self,
        state: LowRankState,
        t: float,
        h: float,
        explicit: Factored | None = None,
    ) -> LowRankState:
        """Backward Euler (or IMEX(1,1,1) when ``explicit`` is given) over ``[t, t + h]``."""
        terms = [state.factored()]
        phi = self._source(t + h)
        if phi is not None:
            terms.append(phi.scaled(h))
        if explicit is not None:
            terms.append(explicit.scaled(h))
        w = terms[0] if len(terms) == 1 else Factored.concat(terms)
        hat = self.kls(w, h, (state.vx, state.vy), ([state.vx], [state.vy]), t + h)
        return self.stage_truncation.apply(hat, self.eps)

    # -- one step --------------------------------------------------------

    def step(self, state: LowRankState, t: float, dt: float) -> LowRankState:
        if not dt > 0:
            raise ArgumentError(f"time step must be positive, got {dt}")
        tab = self.tableau
        a = tab.implicit.a if self.imex else tab.a
        c = tab.implicit.c if self.imex else tab.c
        s = a.shape[0]
        ws = StageWorkspace(state)
        for k in range(s):
            tk = t + c[k] * dt
            h = a[k, k] * dt
            if self.imex and self.ops.explicit_term is not None:
                prev, tprev = (state, t) if k == 0 else (ws.stages[k - 1], t + c[k - 1] * dt)
                ws.explicit.append(self.ops.explicit_term(tprev, prev))
            ws.sources.append(self._source(tk))
            w = assemble_w(k + 1, ws, dt, tab)

            hist = (ws.bases_x(), ws.bases_y())
            if k == 0:
                star = (state.vx, state.vy)
            else:
                pred = ws.predictors.get(c[k])
                if pred is None:
                    ex0 = ws.explicit[0] if ws.explicit else None
                    pred = self.first_order(state, t, c[k] * dt, ex0)
                    ws.predictors[c[k]] = pred
                star = reduced_augmentation_pair(
                    [pred.vx] + hist[0], [pred.vy] + hist[1], self.aug_tol
                )
            hat = self.kls(w, h, star, hist, tk)
            policy = self.truncation if k == s - 1 else self.stage_truncation
            u_k = policy.apply(hat, self.eps)
            ws.stages.append(u_k)
            if k < s - 1:
                ws.implicit.append(implicit_increment(u_k, self.ops.fx_at(tk), self.ops.fy_at(tk)))
        return ws.stages[-1]

    def close(self):
        if self._pool is not None:
            self._pool.shutdown()


def backward_euler_step(
    state: LowRankState,
    ops: ProblemOperators,
    dt: float,
    eps: float,
    trunc: TruncationPolicy | None = None,
    t: float = 0.0,
) -> LowRankState:
    """One first-order RAIL step."""
    return RailStepper(ops, backward_euler(), eps, trunc).step(state, t, dt)


def dirk_step(
    state: LowRankState,
    ops: ProblemOperators,
    dt: float,
    tableau: ButcherTableau,
    eps: float,
    trunc: TruncationPolicy | None = None,
    t: float = 0.0,
) -> LowRankState:
    if not isinstance(tableau, ButcherTableau):
        raise ArgumentError("dirk_step needs a ButcherTableau")
    return RailStepper(ops, tableau, eps, trunc).step(state, t, dt)


def imex_step(
    state: LowRankState,
    ops: ProblemOperators,
    dt: float,
    tableau: ImexTableau,
    eps: float,
    trunc: TruncationPolicy | None = None,
    t: float = 0.0,
) -> LowRankState:
    if not isinstance(tableau, ImexTableau):
        raise ArgumentError("imex_step needs an ImexTableau")
    return RailStepper(ops, tableau, eps, trunc).step(state, t, dt)
