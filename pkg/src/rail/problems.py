"""Benchmark problems and the low-rank advection flux.

All four benchmarks are advection-diffusion equations

    u_t + (a1 u)_x + (a2 u)_y = d1 u_xx + d2 u_yy + phi

on periodic square domains, with rank-one flow components
``a_l(x, y, t) = ax_l(x) at_l(t) ay_l(y)`` and low-rank sources.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .exceptions import ArgumentError
from .integrator import ProblemOperators
from .lowrank import Factored, LowRankState, WeightFunction
from .spectral import DiffOps, Grid2D, fourier_diff, make_grid

__all__ = [
    "RankOneFlow",
    "LowRankSource",
    "BenchmarkSpec",
    "explicit_flux_divergence",
    "maxwellian",
    "make_diffusion_benchmark",
    "make_rigid_rotation_benchmark",
    "make_swirling_benchmark",
    "make_lbfp_benchmark",
    "BENCHMARKS",
    "make_benchmark",
]


def _one(t: float) -> float:
    return 1.0


@dataclass(frozen=True)
class RankOneFlow:
    """Flow component ``ax(x) * at(t) * ay(y)`` sampled on the grid."""

    ax: np.ndarray
    ay: np.ndarray
    at: Callable[[float], float] = _one


@dataclass(frozen=True)
class LowRankSource:
    """``phi(t) = phix(t) @ phit(t) @ phiy(t).T``."""

    phix: Callable[[float], np.ndarray]
    phit: Callable[[float], np.ndarray]
    phiy: Callable[[float], np.ndarray]

    def __call__(self, t: float) -> Factored:
        return Factored(self.phix(t), self.phit(t), self.phiy(t))


def explicit_flux_divergence(
    state: LowRankState,
    flows: tuple[RankOneFlow, RankOneFlow],
    diff_x: DiffOps,
    diff_y: DiffOps,
    t: float,
) -> Factored:
    """``-[(a1 u)_x + (a2 u)_y]`` as a rank-2r triple.

    Each flux ``a_l u`` is ``(ax_l * Vx) (at_l S) (ay_l * Vy)^T`` with
    ``*`` scaling every column entrywise; the x derivative hits the left
    factor of the first flux and the y derivative the right factor of the
    second.
    """
    f1, f2 = flows
    vx, s, vy = state.vx, state.s, state.vy
    x1 = diff_x.d1 @ (f1.ax[:, None] * vx)
    y1 = f1.ay[:, None] * vy
    x2 = f2.ax[:, None] * vx
    y2 = diff_y.d1 @ (f2.ay[:, None] * vy)
    r = s.shape[0]
    c = np.zeros((2 * r, 2 * r))
    c[:r, :r] = -f1.at(t) * s
    c[r:, r:] = -f2.at(t) * s
    return Factored(np.hstack([x1, x2]), c, np.hstack([y1, y2]))


@dataclass
class BenchmarkSpec:
    """A benchmark discretized on an N x N grid together with its run defaults."""

    name: str
    grid: Grid2D
    diff_x: DiffOps
    diff_y: DiffOps
    d1: float
    d2: float
    initial: Callable[[], LowRankState]
    flows: tuple[RankOneFlow, RankOneFlow] | None = None
    source: LowRankSource | None = None
    exact: Callable[[float], np.ndarray] | None = None
    equilibrium: Callable[[], np.ndarray] | None = None
    weight: WeightFunction | None = None
    defaults: dict = field(default_factory=dict)

    @property
    def has_advection(self) -> bool:
        return self.flows is not None

    @property
    def conserves_mass(self) -> bool:
        return self.source is None

    def operators(self) -> ProblemOperators:
        explicit = None
        if self.flows is not None:
            flows, dx, dy = self.flows, self.diff_x, self.diff_y

            def explicit(t, u):
                return explicit_flux_divergence(u, flows, dx, dy, t)

        return ProblemOperators(
            self.d1 * self.diff_x.d2,
            self.d2 * self.diff_y.d2,
            explicit,
            self.source,
        )

    def initial_state(self, r0: int | None = None) -> LowRankState:
        """Initial factorization padded to rank ``r0`` (default from ``defaults``)."""
        r0 = self.defaults.get("r0", 1) if r0 is None else r0
        return self.initial().padded(r0)

    def weight_function(self, kind: str = "default", delta: float | None = None) -> WeightFunction:
        if kind == "uniform":
            return WeightFunction.uniform(self.grid)
        if kind == "maxwellian":
            return WeightFunction.maxwellian(
                self.grid, self.defaults.get("delta", 5.0e-9) if delta is None else delta
            )
        return self.weight if self.weight is not None else WeightFunction.uniform(self.grid)


def _square(n: int, left: float, right: float):
    g = make_grid(n, left, right)
    ops = fourier_diff(g)
    return Grid2D(g, g), ops


def _gauss(x: np.ndarray, center: float, k: float) -> np.ndarray:
    return np.exp(-k * (x - center) ** 2)


def make_diffusion_benchmark(n: int = 200) -> BenchmarkSpec:
    """``u_t = u_xx/4 + u_yy/9`` on (0, 14)^2 from two separable Gaussians."""
    grid, ops = _square(n, 0.0, 14.0)
    x = grid.x.points

    def initial():
        return LowRankState.from_factors(
            np.column_stack([_gauss(x, 6.5, 15.0), _gauss(x, 7.5, 15.0)]),
            np.diag([0.8, 0.5]),
            np.column_stack([_gauss(x, 6.5, 15.0), _gauss(x, 7.0, 15.0)]),
        )

    return BenchmarkSpec(
        "diffusion",
        grid,
        ops,
        ops,
        0.25,
        1.0 / 9.0,
        initial,
        defaults=dict(n=200, lam=0.3, eps=1e-8, t_final=0.5, r0=20, scheme="dirk2"),
    )


def make_rigid_rotation_benchmark(n: int = 200, mode: str = "exact") -> BenchmarkSpec:
    """Rigid rotation ``u_t - y u_x + x u_y = d lap(u) + phi`` on (-2pi, 2pi)^2, d = 1/5.

    ``mode="exact"`` uses the manufactured source with exact solution
    ``exp(-(x^2 + 3y^2 + 2dt))``; ``mode="rank"`` drops the source and starts
    from ``exp(-(x^2 + 9y^2))``.
    """
    if mode not in ("exact", "rank"):
        raise ArgumentError(f"unknown rigid rotation mode {mode!r}")
    d = 0.2
    grid, ops = _square(n, -2.0 * np.pi, 2.0 * np.pi)
    x = grid.x.points
    y = grid.y.points
    ones = np.ones_like(x)
    flows = (RankOneFlow(ones, -y), RankOneFlow(x, ones))

    gx = np.exp(-(x**2))
    if mode == "exact":
        gy = np.exp(-3.0 * y**2)
        px = np.column_stack([gx, x**2 * gx, x * gx])
        py = np.column_stack([gy, y**2 * gy, y * gy])
        core = np.array([[6 * d, -36 * d, 0.0], [-4 * d, 0.0, 0.0], [0.0, 0.0, -4.0]])
        source = LowRankSource(
            lambda t: px, lambda t: np.exp(-2 * d * t) * core, lambda t: py
        )

        def exact(t):
            return np.exp(-2 * d * t) * np.outer(gx, gy)

        def initial():
            return LowRankState.from_factors(gx[:, None], np.eye(1), gy[:, None])

    else:
        source = None
        exact = None
        gy = np.exp(-9.0 * y**2)

        def initial():
            return LowRankState.from_factors(gx[:, None], np.eye(1), gy[:, None])

    return BenchmarkSpec(
        "rigid" if mode == "exact" else "rigid-rank",
        grid,
        ops,
        ops,
        d,
        d,
        initial,
        flows=flows,
        source=source,
        exact=exact,
        defaults=dict(
            n=200,
            lam=0.15,
            eps=1e-8,
            t_final=0.5 if mode == "exact" else np.pi / 2,
            r0=20,
            scheme="imex443",
        ),
    )


def make_swirling_benchmark(n: int = 100, t_final: float = 0.5) -> BenchmarkSpec:
    """Swirling deformation with unit diffusion on (-pi, pi)^2.

    The flow is scaled by ``f(t) = pi cos(pi t / t_final)`` and reverses at
    ``t_final / 2``. The cosine bell is sampled on the grid and compressed
    by SVD (triplets above 1e-12).
    """
    grid, ops = _square(n, -np.pi, np.pi)
    x = grid.x.points
    y = grid.y.points

    def f(t):
        return np.cos(np.pi * t / t_final) * np.pi

    flows = (
        RankOneFlow(-np.cos(0.5 * x) ** 2, np.sin(y), f),
        RankOneFlow(np.sin(x), np.cos(0.5 * y) ** 2, f),
    )
    rb0 = 0.3 * np.pi
    xc, yc = 0.3 * np.pi, 0.0

    def bell(xx, yy):
        rb = np.sqrt((xx - xc) ** 2 + (yy - yc) ** 2)
        return np.where(rb < rb0, rb0 * np.cos(rb * np.pi / (2 * rb0)) ** 6, 0.0)

    def initial():
        xx, yy = grid.mesh()
        return LowRankState.from_dense(bell(xx, yy), tol=1e-12)

    spec = BenchmarkSpec(
        "swirling",
        grid,
        ops,
        ops,
        1.0,
        1.0,
        initial,
        flows=flows,
        defaults=dict(n=100, lam=0.15, eps=1e-8, t_final=t_final, r0=15, scheme="imex222"),
    )
    spec.flow_scale = f
    spec.bell = bell
    return spec


def maxwellian(vx, vy, n: float, ux: float, uy: float, temp: float, gas_const: float = 1.0 / 6.0):
    """``n / (2 pi R T) exp(-|v - u|^2 / (2 R T))`` evaluated on a tensor grid."""
    rt = gas_const * temp
    fx = np.exp(-((vx - ux) ** 2) / (2 * rt))
    fy = np.exp(-((vy - uy) ** 2) / (2 * rt))
    return n / (2 * np.pi * rt) * np.outer(fx, fy)


LBFP_MAXWELLIANS = (
    dict(n=1.990964530353041, ux=0.4979792385268875, uy=0.0, temp=2.46518981703837),
    dict(n=1.150628123236752, ux=-0.8616676237412346, uy=0.0, temp=0.4107062104302872),
)


def make_lbfp_benchmark(n: int = 300, delta: float = 5.0e-9) -> BenchmarkSpec:
    """0D2V Lenard-Bernstein-Fokker-Planck relaxation on (-8, 8)^2.

    ``f_t - ((v_x - ux) f)_vx - ((v_y - uy) f)_vy = D lap(f)`` with
    ``D = R T = 1/2`` (R = 1/6, T = 3), zero bulk velocity and density pi.
    The initial data is the sum of two Maxwellians shifted along v_x.
    """
    gas_const, temp, density = 1.0 / 6.0, 3.0, np.pi
    diff = gas_const * temp
    grid, ops = _square(n, -8.0, 8.0)
    v = grid.x.points
    ones = np.ones_like(v)
    flows = (RankOneFlow(-v, ones), RankOneFlow(ones, -v))

    def initial():
        xs, cs, ys = [], [], []
        for m in LBFP_MAXWELLIANS:
            rt = gas_const * m["temp"]
            xs.append(np.exp(-((v - m["ux"]) ** 2) / (2 * rt)))
            ys.append(np.exp(-((v - m["uy"]) ** 2) / (2 * rt)))
            cs.append(m["n"] / (2 * np.pi * rt))
        return LowRankState.from_factors(np.column_stack(xs), np.diag(cs), np.column_stack(ys))

    def equilibrium():
        return maxwellian(v, v, density, 0.0, 0.0, temp, gas_const)

    return BenchmarkSpec(
        "lbfp",
        grid,
        ops,
        ops,
        diff,
        diff,
        initial,
        flows=flows,
        equilibrium=equilibrium,
        weight=WeightFunction.maxwellian(grid, delta),
        defaults=dict(
            n=300, lam=0.15, eps=1e-6, t_final=15.0, r0=30, scheme="imex222",
            truncation="conservative", weight="maxwellian", delta=delta,
        ),
    )


BENCHMARKS = {
    "diffusion": "anisotropic heat equation, two Gaussians, (0,14)^2",
    "rigid": "rigid rotation with diffusion and manufactured source (exact solution)",
    "rigid-rank": "rigid rotation with diffusion, no source, exp(-(x^2+9y^2)) data",
    "swirling": "swirling deformation with diffusion, cosine bell",
    "lbfp": "0D2V Lenard-Bernstein-Fokker-Planck relaxation of two Maxwellians",
}


def make_benchmark(name: str, n: int | None = None, t_final: float | None = None, delta: float | None = None) -> BenchmarkSpec:
    """Build a benchmark by name; ``n`` defaults to the problem's own default."""
    if name == "diffusion":
        return make_diffusion_benchmark(n or 200)
    if name == "rigid":
        return make_rigid_rotation_benchmark(n or 200, "exact")
    if name == "rigid-rank":
        return make_rigid_rotation_benchmark(n or 200, "rank")
    if name == "swirling":
        return make_swirling_benchmark(n or 100, 0.5 if t_final is None else t_final)
    if name == "lbfp":
        return make_lbfp_benchmark(n or 300, 5.0e-9 if delta is None else delta)
    raise ArgumentError(f"unknown problem {name!r}; choose from {sorted(BENCHMARKS)}")
