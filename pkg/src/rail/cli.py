"""Command line entry point: ``rail run``, ``rail converge``, ``rail list-problems``.

Settings come from, in increasing priority, the benchmark defaults, a
``key=value`` config file (``--config``) and command-line flags. CSV files
go to ``--output`` when given, otherwise into ``$RAIL_OUTPUT_DIR`` (or the
working directory) under a name built from the problem and scheme.

Exit status: 0 on success, 2 for configuration errors, 3 for numerical
failures such as an unstable run.
"""

from __future__ import annotations

import argparse
import csv
import logging
import os
import sys
from pathlib import Path

from .exceptions import ConfigError, NumericError, OutputError, RailError
from .problems import BENCHMARKS
from .runner import RunConfig, emit_csv, run_convergence_study, run_simulation

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERIC = 3

OUTPUT_ENV = "RAIL_OUTPUT_DIR"

_FIELD_TYPES = {
    "scheme": str,
    "n": int,
    "lam": float,
    "dt": float,
    "t_final": float,
    "eps": float,
    "r0": int,
    "truncation": str,
    "weight": str,
    "delta": float,
    "output": str,
    "reference": str,
    "ref_n": int,
    "ref_scheme": str,
    "ref_lam": float,
    "ref_eps": float,
    "ref_r0": int,
    "stage_truncation": str,
}

log = logging.getLogger("rail")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise ConfigError(message)


def parse_config_file(path) -> dict:
    """Read ``key=value`` lines; ``#`` starts a comment, blank lines are skipped."""
    values: dict = {}
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        key, value = key.strip().replace("-", "_"), value.strip()
        if not sep or not key:
            raise ConfigError(f"{path}:{lineno}: expected key=value, got {raw!r}")
        if key == "lambda":
            key = "lam"
        if key not in _FIELD_TYPES and key not in ("problem", "lambdas", "workers"):
            raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
        values[key] = value
    return values


def _coerce(key: str, value):
    if value is None:
        return None
    kind = _FIELD_TYPES.get(key, str)
    try:
        return kind(value)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad value for {key}: {value!r}") from exc


def _add_run_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("problem", nargs="?", help="benchmark name (see list-problems)")
    p.add_argument("--config", help="key=value settings file")
    for name, kind in _FIELD_TYPES.items():
        flag = "--" + name.replace("_", "-")
        if name == "lam":
            p.add_argument("--lam", "--lambda", dest="lam", type=str, help="dt / dx ratio")
        else:
            p.add_argument(flag, dest=name, type=str)
    p.add_argument("-v", "--verbose", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="rail", description="Low-rank implicit integrator benchmarks")
    sub = parser.add_subparsers(dest="verb", required=True, parser_class=_Parser)
    run = sub.add_parser("run", help="run one simulation and write its time series as CSV")
    _add_run_flags(run)
    conv = sub.add_parser("converge", help="temporal convergence study over lambda values")
    _add_run_flags(conv)
    conv.add_argument("--lambdas", help="comma-separated lambda values, e.g. 1,0.5,0.25")
    conv.add_argument("--workers", type=str, help="parallel runs")
    conv.add_argument("--cache-dir", help="where fine reference runs are cached")
    conv.add_argument("--no-cache", action="store_true")
    sub.add_parser("list-problems", help="print the available benchmarks")
    return parser


def resolve_config(args: argparse.Namespace) -> tuple[RunConfig, dict]:
    """Merge defaults, config file and flags. Returns the config and leftover study options."""
    merged = parse_config_file(args.config) if args.config else {}
    for key in list(_FIELD_TYPES) + ["lambdas", "workers"]:
        value = getattr(args, key, None)
        if value is not None:
            merged[key] = value
    problem = args.problem or merged.pop("problem", None)
    merged.pop("problem", None)
    if problem is None:
        raise ConfigError("no problem given")
    extra = {k: merged.pop(k) for k in ("lambdas", "workers") if k in merged}
    if "dt" in merged and "lam" in merged:
        raise ConfigError("set exactly one of lam and dt")
    overrides = {k: _coerce(k, v) for k, v in merged.items()}
    return RunConfig.for_problem(problem, **overrides), extra


def _output_path(cfg: RunConfig, suffix: str) -> Path:
    if cfg.output:
        return Path(cfg.output)
    root = Path(os.environ.get(OUTPUT_ENV) or ".")
    if not root.is_dir():
        raise OutputError(f"output directory {root} does not exist")
    return root / f"{cfg.problem}_{cfg.scheme}_n{cfg.n}_{suffix}.csv"


def _cmd_run(args) -> int:
    cfg, _ = resolve_config(args)
    path = _output_path(cfg, "run")
    result = run_simulation(cfg)
    emit_csv(result.records, path)
    last = result.records[-1]
    print(
        f"{cfg.problem} {cfg.scheme} n={cfg.n} steps={result.steps} t={last.time:.6g} "
        f"rank={last.rank} rel_mass_dev={last.rel_mass_dev:.3e} -> {path}"
    )
    return EXIT_OK


def _cmd_converge(args) -> int:
    cfg, extra = resolve_config(args)
    try:
        lambdas = [float(x) for x in extra.get("lambdas", "1,0.5,0.25").split(",") if x.strip()]
        workers = int(extra.get("workers", 1))
    except ValueError as exc:
        raise ConfigError(f"bad lambdas/workers: {exc}") from exc
    cache = None if args.no_cache else (args.cache_dir or "default")
    table = run_convergence_study(cfg, lambdas, workers=workers, cache_dir=cache)
    path = _output_path(cfg, "converge")
    try:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["lambda", "dt", "l1_error", "observed_order"])
            for r in table.rows:
                w.writerow([
                    format(r.lam, ".17g"), format(r.dt, ".17g"), format(r.error, ".17g"),
                    "" if r.order is None else format(r.order, ".17g"),
                ])
    except OSError as exc:
        raise OutputError(f"cannot write CSV to {path}: {exc}") from exc
    for r in table.rows:
        order = "" if r.order is None else f"{r.order:6.3f}"
        print(f"lambda={r.lam:<8g} dt={r.dt:<12.6g} L1={r.error:.4e} {order}")
    print(f"least-squares order {table.slope:.3f} (reference: {table.reference}) -> {path}")
    return EXIT_OK


def _cmd_list() -> int:
    for name, text in BENCHMARKS.items():
        d = RunConfig.for_problem(name)
        print(
            f"{name:<11} {text}\n{'':<11} defaults: scheme={d.scheme} n={d.n} lam={d.lam} "
            f"eps={d.eps:g} r0={d.r0} t_final={d.t_final:g} truncation={d.truncation}"
        )
    return EXIT_OK


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        logging.basicConfig(
            level=logging.INFO if getattr(args, "verbose", False) else logging.WARNING,
            format="%(levelname)s %(name)s: %(message)s",
        )
        if args.verb == "list-problems":
            return _cmd_list()
        if args.verb == "run":
            return _cmd_run(args)
        return _cmd_converge(args)
    except SystemExit as exc:
        return int(exc.code or 0)
    except ConfigError as exc:
        print(f"rail: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericError as exc:
        print(f"rail: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (OutputError, RailError) as exc:
        print(f"rail: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
