"""Command-line front end.

Subcommands ``noisy`` and ``delayed`` run coupled sweeps and write one CSV
row per (sweep value, estimator); ``constants`` prints closed-form values;
``bounds`` compares the first-passage tail bounds with simulation;
``diverge`` runs the driftless noisy demonstration.

Exit codes: 0 success, 2 parameter error, 3 I/O error.
"""

from __future__ import annotations

import argparse
import csv
import io
import math
import os
import re
import sys
import warnings
from typing import Optional, Sequence

from . import theory
from .errors import ParameterError
from .estimators import DEFAULT_Q, DelayedThreshold, estimator_from_name, t_star
from .montecarlo import (
    ExperimentConfig,
    PrecisionSpec,
    first_passage_sample,
    run_divergence_demo,
    run_experiment,
    tail_frequencies,
)
from .process import WalkParams

EXIT_OK = 0
EXIT_PARAM = 2
EXIT_IO = 3

CSV_COLUMNS = [
    "experiment",
    "estimator",
    "level_or_delay",
    "p",
    "s",
    "epsilon",
    "q",
    "n_trials",
    "empirical_moment",
    "theory_constant",
    "ratio",
    "stderr",
    "truncated_count",
    "master_seed",
]
BOUNDS_COLUMNS = [
    "z",
    "lower_bound",
    "lower_empirical",
    "lower_stderr",
    "upper_bound",
    "upper_empirical",
    "upper_stderr",
]
DIVERGE_COLUMNS = ["n", "empirical_moment", "truncation_rate", "median_estimate"]

DEFAULT_LEVELS = "250,500,1000,2500,5000,10000,100000"
NOISY_ESTIMATORS = "sequential_mmse,single_observation,fixed_time"


class UsageError(ParameterError):
    pass


def fmt(value) -> str:
    """Shortest round-trip decimal text for floats, plain text otherwise."""
    if value is None:
        return ""
    if isinstance(value, bool):
        return str(int(value))
    if isinstance(value, int):
        return str(value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _floats(text: str, what: str) -> list[float]:
    items = [t.strip() for t in str(text).split(",") if t.strip()]
    if not items:
        raise UsageError(f"{what} must list at least one value")
    try:
        return [float(t) for t in items]
    except ValueError:
        raise UsageError(f"{what} must be a comma-separated list of numbers, got {text!r}") from None


def _ints(text: str, what: str) -> list[int]:
    vals = _floats(text, what)
    if any(v != int(v) for v in vals):
        raise UsageError(f"{what} must be integers, got {text!r}")
    return [int(v) for v in vals]


def parse_ell_rule(rule: str) -> tuple[float, float]:
    """``"100+sd"`` -> offset 100, slope in units of ``s``; returns ``(offset, 1.0)``."""
    m = re.fullmatch(r"\s*(?:([0-9.eE+-]+)\s*\+\s*)?sd\s*", rule)
    if not m:
        raise UsageError(f"--ell-rule must look like '<a>+sd', got {rule!r}")
    return (float(m.group(1)) if m.group(1) else 0.0), 1.0


def read_config_file(path: str) -> dict[str, str]:
    """Plain ``key = value`` lines; ``#`` starts a comment. Keys use flag names."""
    out = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise UsageError(f"{path}:{lineno}: expected key=value")
            key, value = (part.strip() for part in line.split("=", 1))
            out[key.lstrip("-").replace("-", "_")] = value
    return out


def _default_seed() -> int:
    env = os.environ.get("FPT_SEED")
    if env is None or env.strip() == "":
        return 0
    try:
        return int(env)
    except ValueError:
        raise UsageError(f"FPT_SEED must be an integer, got {env!r}") from None


def write_csv(path: str, columns: Sequence[str], rows: Sequence[dict]) -> None:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([fmt(row.get(c)) for c in columns])
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(buf.getvalue())


def write_meta(path: str, resolved: dict) -> None:
    with open(path + ".meta", "w", encoding="utf-8", newline="") as fh:
        for key in sorted(resolved):
            fh.write(f"{key}={fmt(resolved[key])}\n")


def _progress(quiet: bool):
    if quiet:
        return None

    def report(done: int, total: int) -> None:
        print(f"\r{done}/{total} sweep points", end="\n" if done == total else "", file=sys.stderr, flush=True)

    return report


def _precision(args) -> PrecisionSpec:
    return PrecisionSpec(delta=args.delta, n_override=args.n)


def _resolved(args, **extra) -> dict:
    skip = {"func", "config"}
    d = {k: v for k, v in vars(args).items() if k not in skip}
    d.update(extra)
    return d


# ---------------------------------------------------------------------------


def cmd_noisy(args) -> int:
    if not args.s > 0:
        raise UsageError(f"--s must be > 0 for noisy observations, got {args.s}")
    if not args.eps > 0:
        raise UsageError(f"--eps must be > 0 (the asymptotic constant needs 0 < eps < inf), got {args.eps}")
    if not args.p >= 1:
        raise UsageError(f"--p must be >= 1, got {args.p}")
    if not 0.5 < args.q < 1:
        raise UsageError(f"--q must lie strictly between 1/2 and 1, got {args.q}")
    levels = _floats(args.levels, "--levels")
    kinds = [estimator_from_name(name.strip(), args.q) for name in args.estimators.split(",") if name.strip()]
    config = ExperimentConfig(
        mode="noisy",
        params=WalkParams(s=args.s, ell=levels[0], epsilon=args.eps, horizon_cap=args.cap),
        estimators=kinds,
        p=args.p,
        sweep=levels,
        precision=_precision(args),
        master_seed=args.seed,
        workers=args.workers,
        horizon_cap=args.cap,
    )
    results = run_experiment(config, progress=_progress(args.quiet))
    rows = [
        {
            "experiment": "noisy",
            "estimator": m.estimator,
            "level_or_delay": float(m.sweep_value),
            "p": float(args.p),
            "s": float(args.s),
            "epsilon": float(args.eps),
            "q": float(args.q) if m.estimator == "single_observation" else None,
            "n_trials": m.n,
            "empirical_moment": m.empirical_moment,
            "theory_constant": m.theory_constant,
            "ratio": m.ratio,
            "stderr": m.stderr,
            "truncated_count": m.truncated_count,
            "master_seed": config.master_seed,
        }
        for m in results
    ]
    write_csv(args.out, CSV_COLUMNS, rows)
    write_meta(args.out, _resolved(args, command="noisy"))
    return EXIT_OK


def cmd_delayed(args) -> int:
    if not args.s >= 0:
        raise UsageError(f"--s must be >= 0, got {args.s}")
    min_p = 0.5 if args.s == 0 else 1.0
    if not args.p >= min_p:
        raise UsageError(f"--p must be >= {min_p:g}, got {args.p}")
    delays = _ints(args.delays, "--delays")
    if any(d < 0 for d in delays):
        raise UsageError("--delays must be >= 0")
    if args.s == 0 and args.cap is None:
        raise UsageError("--cap is mandatory when --s 0 (the first-passage time has infinite mean)")
    offset = slope = None
    if args.ell_rule:
        offset, slope = parse_ell_rule(args.ell_rule)
        slope *= args.s
    elif args.ell is None:
        raise UsageError("give either --ell or --ell-rule")
    base_ell = args.ell if args.ell is not None else offset
    if not base_ell >= 0:
        raise UsageError("the level must be >= 0")
    for d in delays:
        ell = offset + slope * d if slope is not None else base_ell
        if ell < args.s * d:
            print(f"warning: ell = {ell:g} < s*d = {args.s * d:g} at d = {d}; "
                  "large-delay optimality assumes ell >= s*d", file=sys.stderr)
    config = ExperimentConfig(
        mode="delayed",
        params=WalkParams(s=args.s, ell=base_ell, horizon_cap=args.cap),
        estimators=[DelayedThreshold()],
        p=args.p,
        sweep=delays,
        precision=_precision(args),
        master_seed=args.seed,
        workers=args.workers,
        level_offset=offset,
        level_slope=slope,
        horizon_cap=args.cap,
    )
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        results = run_experiment(config, progress=_progress(args.quiet))
    rows = [
        {
            "experiment": "delayed",
            "estimator": m.estimator,
            "level_or_delay": float(m.sweep_value),
            "p": float(args.p),
            "s": float(args.s),
            "epsilon": 0.0,
            "q": None,
            "n_trials": m.n,
            "empirical_moment": m.empirical_moment,
            "theory_constant": m.theory_constant,
            "ratio": m.ratio,
            "stderr": m.stderr,
            "truncated_count": m.truncated_count,
            "master_seed": config.master_seed,
        }
        for m in results
    ]
    write_csv(args.out, CSV_COLUMNS, rows)
    write_meta(args.out, _resolved(args, command="delayed"))
    return EXIT_OK


def _need(args, *names):
    missing = [n for n in names if getattr(args, n) is None]
    if missing:
        raise UsageError("missing " + ", ".join("--" + n.replace("_", "-") for n in missing))


def _show(value: float) -> str:
    text = format(value, ".15g")
    if re.fullmatch(r"-?\d+", text):
        text += ".0"
    return text


def cmd_constants(args) -> int:
    table: list[tuple[str, float]] = []
    if args.gauss_moment:
        _need(args, "p")
        table.append(("gauss_abs_moment", theory.gauss_abs_moment(args.p)))
    if args.c1:
        _need(args, "ell", "s", "eps", "p")
        table.append(("C1", theory.c1(args.ell, args.s, args.eps, args.p)))
    if args.c2:
        _need(args, "d", "s", "p")
        if args.s == 0:
            table.append(("C2_driftless", theory.c2_driftless(args.d, args.p)))
        else:
            table.append(("C2", theory.c2(args.d, args.s, args.p)))
    if args.ft_ratio:
        _need(args, "eps", "p")
        table.append(("fixed_time_ratio", theory.fixed_time_ratio(args.eps, args.p)))
    if args.t_star:
        _need(args, "ell", "s")
        table.append(("t_star", float(t_star(args.ell, args.s, args.q))))
    if args.moment_bound:
        _need(args, "ell", "s", "p")
        b = theory.centered_moment_bound(args.ell, args.s, args.sigma2, args.p)
        table += [("moment_bound", b.value), ("moment_bound_k1", b.k1), ("moment_bound_k2", b.k2)]
    if args.tails:
        _need(args, "ell", "s", "z")
        for z in _floats(args.z, "--z"):
            table.append((f"upper_tail_bound[z={fmt(z)}]", theory.upper_tail_bound(args.ell, args.s, args.sigma2, z)))
            table.append((f"lower_tail_bound[z={fmt(z)}]", theory.lower_tail_bound(args.ell, args.s, args.sigma2, z)))
    if not table:
        raise UsageError("choose at least one of --c1 --c2 --ft-ratio --gauss-moment --t-star --moment-bound --tails")
    width = max(len(name) for name, _ in table)
    for name, value in table:
        print(f"{name:<{width}}  {_show(value)}")
    return EXIT_OK


def cmd_bounds(args) -> int:
    if not args.s > 0:
        raise UsageError(f"--s must be > 0, got {args.s}")
    if not args.sigma2 > 0:
        raise UsageError(f"--sigma2 must be > 0, got {args.sigma2}")
    if not args.ell > 0:
        raise UsageError(f"--ell must be > 0, got {args.ell}")
    zs = sorted(_floats(args.z, "--z"))
    u = args.ell / args.s
    if zs[0] < 0:
        raise UsageError("--z values must be >= 0")
    if zs[-1] >= u:
        raise UsageError(f"every z must be < ell/s = {u:g} for the lower tail bound")
    # a walk with increment variance sigma2 crosses ell exactly when the unit-variance
    # walk with drift s/sigma crosses ell/sigma
    sd = math.sqrt(args.sigma2)
    unit = WalkParams(s=args.s / sd, ell=args.ell / sd, horizon_cap=args.cap)
    tau, _ = first_passage_sample(unit, args.n, args.seed, 0, args.workers)
    rows = [vars(r) for r in tail_frequencies(tau, args.ell, args.s, args.sigma2, zs)]
    write_csv(args.out, BOUNDS_COLUMNS, rows)
    write_meta(args.out, _resolved(args, command="bounds"))
    return EXIT_OK


def cmd_diverge(args) -> int:
    if args.cap is None:
        raise UsageError("--cap is mandatory: the driftless first-passage time has infinite moments")
    if args.s != 0:
        raise UsageError("diverge is the s = 0 experiment; --s must be 0")
    if not args.eps > 0:
        raise UsageError("--eps must be > 0")
    if not args.ell >= 0:
        raise UsageError("--ell must be >= 0")
    if not args.p >= 0.5:
        raise UsageError("--p must be >= 1/2")
    grid = _ints(args.n_grid, "--n-grid")
    params = WalkParams(s=0.0, ell=args.ell, epsilon=args.eps, horizon_cap=args.cap)
    rows = [vars(r) for r in run_divergence_demo(params, args.p, grid, args.seed, horizon_cap=args.cap)]
    write_csv(args.out, DIVERGE_COLUMNS, rows)
    write_meta(args.out, _resolved(args, command="diverge"))
    return EXIT_OK


# ---------------------------------------------------------------------------


def _common_run_flags(p: argparse.ArgumentParser, out_required: bool = True) -> None:
    p.add_argument("--seed", type=int, default=None, help="master seed (default: $FPT_SEED or 0)")
    p.add_argument("--out", required=out_required, help="output CSV path; <out>.meta gets the resolved config")
    p.add_argument("--workers", type=int, default=1, help="worker processes (results do not depend on it)")
    p.add_argument("--cap", type=int, default=None, help="horizon cap in steps")
    p.add_argument("--config", help="key=value file; command-line flags take precedence")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fptrack", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("noisy", help="sweep levels under noisy observation")
    p.add_argument("--s", type=float, default=10.0)
    p.add_argument("--eps", type=float, default=0.5)
    p.add_argument("--p", type=float, default=1.0)
    p.add_argument("--q", type=float, default=DEFAULT_Q)
    p.add_argument("--levels", default=DEFAULT_LEVELS)
    p.add_argument("--estimators", default=NOISY_ESTIMATORS)
    p.add_argument("--delta", type=float, default=0.05)
    p.add_argument("--n", type=int, default=None, help="trial count (overrides --delta sizing)")
    p.add_argument("--quiet", action="store_true")
    _common_run_flags(p)
    p.set_defaults(func=cmd_noisy)

    p = sub.add_parser("delayed", help="sweep delays under delayed observation")
    p.add_argument("--s", type=float, default=1.0)
    p.add_argument("--p", type=float, default=1.0)
    p.add_argument("--delays", required=True)
    p.add_argument("--ell", type=float, default=None, help="fixed level")
    p.add_argument("--ell-rule", default=None, help="level as a function of d, e.g. 100+sd")
    p.add_argument("--delta", type=float, default=0.03)
    p.add_argument("--n", type=int, default=None)
    p.add_argument("--quiet", action="store_true")
    _common_run_flags(p)
    p.set_defaults(func=cmd_delayed)

    p = sub.add_parser("constants", help="print closed-form constants")
    for flag in ("--c1", "--c2", "--ft-ratio", "--gauss-moment", "--t-star", "--moment-bound", "--tails"):
        p.add_argument(flag, action="store_true")
    p.add_argument("--ell", type=float)
    p.add_argument("--s", type=float)
    p.add_argument("--eps", type=float)
    p.add_argument("--p", type=float)
    p.add_argument("--d", type=float)
    p.add_argument("--q", type=float, default=DEFAULT_Q)
    p.add_argument("--sigma2", type=float, default=1.0)
    p.add_argument("--z", default=None)
    p.add_argument("--config")
    p.set_defaults(func=cmd_constants)

    p = sub.add_parser("bounds", help="tail bounds against empirical first-passage tails")
    p.add_argument("--ell", type=float, default=1000.0)
    p.add_argument("--s", type=float, default=10.0)
    p.add_argument("--sigma2", type=float, default=1.0)
    p.add_argument("--z", default="0,2,5,10,20")
    p.add_argument("--n", type=int, default=100_000)
    _common_run_flags(p)
    p.set_defaults(func=cmd_bounds)

    p = sub.add_parser("diverge", help="driftless noisy case: growth of the empirical moment")
    p.add_argument("--s", type=float, default=0.0)
    p.add_argument("--eps", type=float, default=0.5)
    p.add_argument("--ell", type=float, default=10.0)
    p.add_argument("--p", type=float, default=0.5)
    p.add_argument("--n-grid", default="1000,10000,100000,1000000")
    _common_run_flags(p)
    p.set_defaults(func=cmd_diverge)
    return parser


def _parse(parser: argparse.ArgumentParser, argv: Optional[Sequence[str]]):
    args = parser.parse_args(argv)
    if getattr(args, "config", None):
        cfg = read_config_file(args.config)
        sub = parser._subparsers._group_actions[0].choices[args.command]
        known = {a.dest for a in sub._actions}
        unknown = sorted(set(cfg) - known)
        if unknown:
            raise UsageError(f"unknown keys in {args.config}: {', '.join(unknown)}")
        for action in sub._actions:
            if action.dest in cfg and action.type is not None:
                cfg[action.dest] = action.type(cfg[action.dest])
            elif action.dest in cfg and isinstance(action, argparse._StoreTrueAction):
                cfg[action.dest] = cfg[action.dest].lower() in ("1", "true", "yes", "on")
        sub.set_defaults(**cfg)
        args = parser.parse_args(argv)
    if hasattr(args, "seed") and args.seed is None:
        args.seed = _default_seed()
    if hasattr(args, "workers") and args.workers < 1:
        raise UsageError("--workers must be >= 1")
    return args


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = _parse(parser, argv)
        return args.func(args)
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARAM


if __name__ == "__main__":
    sys.exit(main())
