"""Benchmark runs, convergence studies and CSV output."""

from __future__ import annotations

import csv
import hashlib
import json
import logging
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, replace
from pathlib import Path

import numpy as np

from .exceptions import ConfigError, NumericError, OutputError
from .integrator import RailStepper, TruncationPolicy
from .lowrank import LowRankState, l1_error, mass
from .problems import BENCHMARKS, BenchmarkSpec, make_benchmark
from .tableaus import DIRK_SCHEMES, IMEX_SCHEMES, get_scheme

__all__ = [
    "RunConfig",
    "StepRecord",
    "RunResult",
    "ConvergenceRow",
    "ConvergenceTable",
    "CSV_HEADER",
    "run_simulation",
    "run_convergence_study",
    "emit_csv",
    "read_csv",
    "observed_orders",
    "least_squares_order",
]

log = logging.getLogger(__name__)

CSV_HEADER = ("step", "time", "rank", "mass", "rel_mass_dev", "l1_error", "decay_l1")
BLOWUP_FACTOR = 1.0e6
REFERENCE_KINDS = ("auto", "exact", "fine", "none")


@dataclass(frozen=True)
class RunConfig:
    """One simulation. Exactly one of ``lam`` (``dt = lam * dx``) and ``dt`` is set.

    ``stage_truncation`` picks the policy for internal stages: ``"svd"``,
    ``"same"`` as the accepted step, or ``"auto"`` (``"same"`` for
    conservative runs, so every stage keeps the mass and no O(eps) error is
    injected between stages; ``"svd"`` otherwise).

    ``ref_*`` fields describe the fine run used as reference when the
    problem has no closed-form solution; unset ones fall back to the run's
    own values (grid, truncation) or to a third-order scheme at
    ``lam = 0.05``.
    """

    problem: str
    scheme: str
    n: int
    t_final: float
    eps: float
    r0: int
    lam: float | None = None
    dt: float | None = None
    truncation: str = "svd"
    weight: str = "uniform"
    delta: float = 5.0e-9
    output: str | None = None
    reference: str = "auto"
    ref_n: int | None = None
    ref_scheme: str | None = None
    ref_lam: float = 0.05
    ref_eps: float | None = None
    ref_r0: int | None = None
    uniform_steps: bool = False
    stage_truncation: str = "auto"

    def __post_init__(self):
        if self.problem not in BENCHMARKS:
            raise ConfigError(f"unknown problem {self.problem!r}; choose from {sorted(BENCHMARKS)}")
        if self.scheme not in DIRK_SCHEMES and self.scheme not in IMEX_SCHEMES:
            raise ConfigError(
                f"unknown scheme {self.scheme!r}; choose from {sorted(DIRK_SCHEMES) + sorted(IMEX_SCHEMES)}"
            )
        advective = self.problem != "diffusion"
        if advective and self.scheme not in IMEX_SCHEMES:
            raise ConfigError(f"{self.problem} has advection and needs an IMEX scheme, got {self.scheme}")
        if not advective and self.scheme not in DIRK_SCHEMES:
            raise ConfigError(f"{self.problem} is pure diffusion and needs a DIRK scheme, got {self.scheme}")
        if (self.lam is None) == (self.dt is None):
            raise ConfigError("set exactly one of lam and dt")
        step = self.lam if self.lam is not None else self.dt
        if not (math.isfinite(step) and step > 0):
            raise ConfigError(f"time step parameter must be positive, got {step}")
        if int(self.n) != self.n or self.n < 4 or self.n % 2:
            raise ConfigError(f"n must be an even integer >= 4, got {self.n}")
        if not (math.isfinite(self.t_final) and self.t_final >= 0):
            raise ConfigError(f"t_final must be non-negative, got {self.t_final}")
        if not self.eps >= 0:
            raise ConfigError(f"eps must be non-negative, got {self.eps}")
        if not 1 <= self.r0 <= self.n:
            raise ConfigError(f"r0 must lie in [1, n], got {self.r0}")
        if self.truncation not in ("svd", "conservative"):
            raise ConfigError(f"truncation must be svd or conservative, got {self.truncation!r}")
        if self.weight not in ("uniform", "maxwellian"):
            raise ConfigError(f"weight must be uniform or maxwellian, got {self.weight!r}")
        if not self.delta > 0:
            raise ConfigError(f"delta must be positive, got {self.delta}")
        if self.stage_truncation not in ("auto", "svd", "same"):
            raise ConfigError(f"stage_truncation must be auto, svd or same, got {self.stage_truncation!r}")
        if self.reference not in REFERENCE_KINDS:
            raise ConfigError(f"reference must be one of {REFERENCE_KINDS}, got {self.reference!r}")
        if self.ref_n is not None and (self.ref_n % self.n or self.ref_n % 2):
            raise ConfigError(f"ref_n={self.ref_n} must be an even multiple-of-n grid size (n={self.n})")
        if self.ref_scheme is not None and self.ref_scheme not in DIRK_SCHEMES | IMEX_SCHEMES:
            raise ConfigError(f"unknown reference scheme {self.ref_scheme!r}")

    @classmethod
    def for_problem(cls, problem: str, **overrides) -> "RunConfig":
        """Config filled from the benchmark's defaults, then ``overrides``."""
        if problem not in BENCHMARKS:
            raise ConfigError(f"unknown problem {problem!r}; choose from {sorted(BENCHMARKS)}")
        d = make_benchmark(problem, n=8).defaults
        base = dict(
            scheme=d["scheme"],
            n=d["n"],
            t_final=d["t_final"],
            eps=d["eps"],
            r0=d["r0"],
            truncation=d.get("truncation", "svd"),
            weight=d.get("weight", "uniform"),
            delta=d.get("delta", 5.0e-9),
        )
        if "dt" not in overrides:
            base["lam"] = d["lam"]
        base.update({k: v for k, v in overrides.items() if v is not None})
        if base.get("dt") is not None:
            base["lam"] = None
        return cls(problem=problem, **base)

    def benchmark(self) -> BenchmarkSpec:
        return make_benchmark(self.problem, self.n, t_final=self.t_final or None, delta=self.delta)

    def base_dt(self, spec: BenchmarkSpec) -> float:
        return self.dt if self.dt is not None else self.lam * spec.grid.x.dx

    def reference_config(self) -> "RunConfig":
        third = "dirk3" if self.scheme in DIRK_SCHEMES else "imex443"
        return replace(
            self,
            scheme=self.ref_scheme or third,
            n=self.ref_n or self.n,
            lam=self.ref_lam,
            dt=None,
            eps=self.ref_eps if self.ref_eps is not None else self.eps,
            r0=self.ref_r0 or self.r0,
            output=None,
            reference="none",
            ref_n=None,
            ref_scheme=None,
            ref_eps=None,
            ref_r0=None,
            uniform_steps=True,
        )

    def digest(self) -> str:
        payload = {k: v for k, v in asdict(self).items() if k != "output"}
        return hashlib.sha256(json.dumps(payload, sort_keys=True).encode()).hexdigest()[:20]


@dataclass(frozen=True)
class StepRecord:
    """One row of a run's time series.

    ``rank`` counts nonzero singular values, so the zero-padded initial
    state reports its true rank rather than ``r0``.
    """

    step: int
    time: float
    rank: int
    mass: float
    rel_mass_dev: float
    l1_error: float | None = None
    decay_l1: float | None = None


@dataclass
class RunResult:
    config: RunConfig
    records: list[StepRecord]
    state: LowRankState
    dt: float
    steps: int


def _step_sizes(t_final: float, dt: float, uniform: bool) -> list[float]:
    if t_final == 0:
        return []
    if uniform:
        m = max(1, math.ceil(t_final / dt - 1e-9))
        return [t_final / m] * m
    m = math.floor(t_final / dt + 1e-9)
    sizes = [dt] * m
    rest = t_final - m * dt
    if rest > 1e-12 * t_final:
        sizes.append(rest)
    return sizes


def _truncation(cfg: RunConfig, spec: BenchmarkSpec, m0: float) -> TruncationPolicy:
    if cfg.truncation == "svd":
        return TruncationPolicy("svd")
    return TruncationPolicy(
        "conservative",
        weight=spec.weight_function(cfg.weight, cfg.delta),
        grid=spec.grid,
        target_mass=m0 if spec.conserves_mass else None,
    )


def run_simulation(cfg: RunConfig, *, parallel: bool = False) -> RunResult:
    """Advance the benchmark from 0 to ``cfg.t_final`` recording every step.

    Raises :class:`NumericError` when the Frobenius norm exceeds
    ``1e6`` times its initial value.
    """
    spec = cfg.benchmark()
    state = spec.initial_state(cfg.r0)
    m0 = mass(state, spec.grid)
    norm0 = state.norm()
    base = cfg.base_dt(spec)
    sizes = _step_sizes(cfg.t_final, base, cfg.uniform_steps)
    f_eq = spec.equilibrium() if spec.equilibrium is not None else None

    def record(k: int, t: float, u: LowRankState) -> StepRecord:
        m = mass(u, spec.grid)
        dev = abs(m - m0) / abs(m0) if m0 != 0 else abs(m)
        err = l1_error(u, spec.exact(t), spec.grid) if spec.exact is not None else None
        dec = l1_error(u, f_eq, spec.grid) if f_eq is not None else None
        rank = int(np.count_nonzero(u.singular_values() > 0))
        return StepRecord(k, t, rank, m, dev, err, dec)

    records = [record(0, 0.0, state)]
    same = cfg.stage_truncation == "same" or (
        cfg.stage_truncation == "auto" and cfg.truncation == "conservative"
    )
    stepper = RailStepper(
        spec.operators(),
        get_scheme(cfg.scheme),
        cfg.eps,
        _truncation(cfg, spec, m0),
        conservative_stages=same,
        parallel=parallel,
    )
    t = 0.0
    try:
        for k, h in enumerate(sizes, start=1):
            state = stepper.step(state, t, h)
            t = cfg.t_final if k == len(sizes) else t + h
            nrm = state.norm()
            if not math.isfinite(nrm) or nrm > BLOWUP_FACTOR * norm0:
                raise NumericError(
                    f"{cfg.problem}/{cfg.scheme}: instability at step {k} (t={t:.6g}), "
                    f"|U|_F={nrm:.3e} vs initial {norm0:.3e}; reduce lam (CFL condition for the explicit part)"
                )
            records.append(record(k, t, state))
    finally:
        stepper.close()
    return RunResult(cfg, records, state, base, len(sizes))


@dataclass(frozen=True)
class ConvergenceRow:
    lam: float
    dt: float
    error: float
    order: float | None


@dataclass
class ConvergenceTable:
    rows: list[ConvergenceRow]
    slope: float
    reference: str

    def errors(self) -> list[float]:
        return [r.error for r in self.rows]


def observed_orders(dts, errors) -> list[float | None]:
    """Successive ``log(e_i/e_{i-1}) / log(dt_i/dt_{i-1})``; ``None`` for the first entry."""
    out: list[float | None] = [None]
    for i in range(1, len(dts)):
        out.append(math.log(errors[i] / errors[i - 1]) / math.log(dts[i] / dts[i - 1]))
    return out


def least_squares_order(dts, errors) -> float:
    """Slope of the least-squares line through ``(log dt, log error)``."""
    if len(dts) < 2:
        raise ConfigError("need at least two runs to estimate an order")
    slope, _ = np.polyfit(np.log(dts), np.log(errors), 1)
    return float(slope)


def _default_cache_dir() -> Path:
    root = os.environ.get("RAIL_CACHE_DIR")
    if root:
        return Path(root)
    return Path(os.environ.get("XDG_CACHE_HOME", Path.home() / ".cache")) / "rail"


def _reference_state(cfg: RunConfig, cache_dir: Path | None) -> np.ndarray:
    ref = cfg.reference_config()
    path = None
    if cache_dir is not None:
        path = Path(cache_dir) / f"ref-{ref.digest()}.npz"
        if path.exists():
            with np.load(path) as z:
                return z["vx"] @ z["s"] @ z["vy"].T
    log.info("computing reference %s/%s n=%d lam=%g", ref.problem, ref.scheme, ref.n, ref.lam)
    u = run_simulation(ref).state
    if path is not None:
        try:
            path.parent.mkdir(parents=True, exist_ok=True)
            tmp = path.with_suffix(".tmp.npz")
            np.savez(tmp, vx=u.vx, s=u.s, vy=u.vy)
            os.replace(tmp, path)
        except OSError as exc:
            log.warning("could not cache reference at %s: %s", path, exc)
    return u.to_dense()


def run_convergence_study(
    template: RunConfig,
    lambdas,
    *,
    workers: int = 1,
    cache_dir: Path | str | None = "default",
) -> ConvergenceTable:
    """L1 error at ``t_final`` for each ``lam``, observed orders and the fitted slope.

    Every run uses ``ceil(t_final / (lam dx))`` equal steps so the
    effective step sizes are exact fractions of ``t_final``. The reference
    is the closed-form solution when the problem has one, otherwise a fine
    run (cached under ``cache_dir``; ``None`` disables caching) restricted
    to the coarse grid by index subsampling.
    """
    lambdas = [float(x) for x in lambdas]
    if not lambdas:
        raise ConfigError("no lambda values given")
    spec = template.benchmark()
    kind = template.reference
    if kind == "auto":
        kind = "exact" if spec.exact is not None else "fine"
    if kind == "none":
        raise ConfigError("a convergence study needs a reference (exact or fine)")
    if kind == "exact" and spec.exact is None:
        raise ConfigError(f"{template.problem} has no closed-form solution; use reference=fine")
    if kind == "exact":
        ref = spec.exact(template.t_final)
    else:
        if cache_dir == "default":
            cache_dir = _default_cache_dir()
        full = _reference_state(template, None if cache_dir is None else Path(cache_dir))
        stride = (template.ref_n or template.n) // template.n
        ref = full[::stride, ::stride]

    configs = [replace(template, lam=lam, dt=None, uniform_steps=True, output=None) for lam in lambdas]

    def one(c: RunConfig) -> tuple[float, float]:
        res = run_simulation(c)
        return template.t_final / res.steps, l1_error(res.state, ref, spec.grid)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(one, configs))
    else:
        results = [one(c) for c in configs]

    dts = [r[0] for r in results]
    errs = [r[1] for r in results]
    if len(set(dts)) < len(dts):
        raise ConfigError(f"lambdas {lambdas} give repeated step sizes {dts}; use smaller or distinct values")
    orders = observed_orders(dts, errs)
    rows = [ConvergenceRow(l, d, e, o) for l, d, e, o in zip(lambdas, dts, errs, orders)]
    return ConvergenceTable(rows, least_squares_order(dts, errs), kind)


def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return format(float(x), ".17g")


def emit_csv(records, path) -> None:
    """Write records with the fixed header; floats round-trip exactly."""
    path = Path(path)
    try:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(CSV_HEADER)
            for r in records:
                w.writerow([_fmt(getattr(r, name)) for name in CSV_HEADER])
    except OSError as exc:
        raise OutputError(f"cannot write CSV to {path}: {exc}") from exc


def read_csv(path) -> list[StepRecord]:
    def opt(s):
        return float(s) if s != "" else None

    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    return [
        StepRecord(
            int(r["step"]), float(r["time"]), int(r["rank"]), float(r["mass"]),
            float(r["rel_mass_dev"]), opt(r["l1_error"]), opt(r["decay_l1"]),
        )
        for r in rows
    ]
