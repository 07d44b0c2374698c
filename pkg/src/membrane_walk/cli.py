"""Command-line front end: ``membrane-walk {analyze,simulate,verify,reference}``.

Exit codes: 0 success (all checks pass), 1 a check or analysis failed,
2 usage or input error.
"""
from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
from dataclasses import asdict, dataclass, fields
from pathlib import Path

import numpy as np

from . import __version__
from .chain import analyze as analyze_chain, fig1a_closed_forms
from .errors import MembraneWalkError, NotIrreducible, SpecError
from .hitting import hitting_kernel_oracle
from .membrane import IIDEnvironment, PeriodicEnvironment, fig1a, load_environment, load_membrane
from .reference import SQRT_2_OVER_PI, expected_visits, skew_endpoint_sample
from .verification import (DRIFT_CONTROL, combine, verify_invariance, verify_martingales,
                           verify_one_sided, verify_slide, verify_stable_hitting,
                           verify_visit_stationarity)
from .walk import compile_model, path_rng, run_ensemble, scaled, simulate, trajectory_rows

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2
SEED_ENV = "MEMBRANE_WALK_SEED"
SUITES = ("invariance", "slide", "stationarity", "stable", "martingale", "one-sided", "all")


class UsageError(Exception):
    pass


@dataclass
class RunConfig:
    command: str
    spec: str | None = None
    env: str | None = None
    steps: int = 10_000
    paths: int = 1
    seed: int = 1
    grid: list | None = None
    out: str | None = None
    suite: str = "all"
    stride: int = 1
    workers: int | None = None
    n: int = 10_000
    visits: int = 1_000_000
    n_visits: int = 200
    reps: int = 10_000
    m: int = 2
    gamma: float = 0.0
    compare_paper_example: float | None = None
    hitting_kernel: str | None = None
    debug_drift: float | None = None
    stable_scale: float | None = None


CONFIG_KEYS = {f.name for f in fields(RunConfig)}


def canonical(obj):
    """Round floats to 15 significant digits and make the value JSON-serializable."""
    if isinstance(obj, dict):
        return {str(k): canonical(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [canonical(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return canonical(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if not math.isfinite(x):
            return str(x)
        return float(f"{x:.15g}") + 0.0
    return obj


def dumps(doc) -> str:
    return json.dumps(canonical(doc), sort_keys=True, indent=2) + "\n"


def _envelope(cfg: RunConfig, body: dict) -> dict:
    return {"tool": "membrane-walk", "version": __version__, "seed": cfg.seed,
            "config": asdict(cfg), **body}


def _write(path: str | None, text: str):
    if path is None or path == "-":
        sys.stdout.write(text)
    else:
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        Path(path).write_text(text)


def _load_spec(source: str):
    try:
        return load_membrane(source)
    except FileNotFoundError as exc:
        raise UsageError(f"{source}: no such spec file") from exc
    except json.JSONDecodeError as exc:
        raise UsageError(f"{source}:{exc.lineno}:{exc.colno}: invalid JSON: {exc.msg}") from exc
    except (SpecError, KeyError, TypeError, ValueError) as exc:
        raise UsageError(f"{source}: {exc}") from exc


def _load_env(source: str, m=None):
    try:
        return load_environment(source, m)
    except FileNotFoundError as exc:
        raise UsageError(f"{source}: no such environment file") from exc
    except json.JSONDecodeError as exc:
        raise UsageError(f"{source}:{exc.lineno}:{exc.colno}: invalid JSON: {exc.msg}") from exc
    except (SpecError, KeyError, TypeError, ValueError) as exc:
        raise UsageError(f"{source}: {exc}") from exc


def _model(cfg: RunConfig):
    if cfg.spec and cfg.env:
        raise UsageError("give either --spec or --env, not both")
    if cfg.spec:
        return _load_spec(cfg.spec)
    if cfg.env:
        return _load_env(cfg.env)
    raise UsageError("a model is required (--spec or --env)")


def cmd_analyze(cfg: RunConfig) -> int:
    if not cfg.spec:
        raise UsageError("analyze needs --spec")
    mem = _load_spec(cfg.spec)
    try:
        ch = analyze_chain(mem)
    except NotIrreducible as exc:
        classes = "; ".join(str(c) for c in exc.closed_classes)
        print(f"error: {cfg.spec}: {exc} (closed classes: {classes})", file=sys.stderr)
        return EXIT_FAIL
    body = {"analysis": {**ch.to_dict(), "ray_weights": ch.ray_weights.tolist(),
                         "hitting_method": ch.hitting.method}}
    if cfg.hitting_kernel:
        oracle = hitting_kernel_oracle(mem.m, mem.periods, method=cfg.hitting_kernel,
                                       seed=cfg.seed,
                                       budget=500 if cfg.hitting_kernel == "truncated-solve" else 10**6)
        body["hitting_oracle"] = {**oracle.to_dict(),
                                  "max_abs_difference": float(np.abs(oracle.matrix - ch.hitting.matrix).max())}
    if cfg.compare_paper_example is not None:
        p = float(cfg.compare_paper_example)
        ref = fig1a_closed_forms(p)
        ex = analyze_chain(fig1a(p))
        body["example_comparison"] = {
            "p": p, "alpha": ref["alpha"],
            "closed_form": {"P": ref["P"], "pi": ref["pi"], "gamma": ref["gamma"], "c": ref["c"]},
            "pipeline": {"P": ex.P, "pi": ex.pi, "gamma": ex.gamma, "c": ex.slide},
            "delta": {"P": float(np.abs(ex.P - ref["P"]).max()),
                      "pi": float(np.abs(ex.pi - ref["pi"]).max()),
                      "gamma": float(ex.gamma - ref["gamma"]),
                      "c": (ex.slide - ref["c"]).tolist()},
        }
    _write(cfg.out, dumps(_envelope(cfg, body)))
    return EXIT_OK


def _positive(name: str, value) -> int:
    if value is None or int(value) < 1:
        raise UsageError(f"--{name.replace('_', '-')} must be at least 1")
    return int(value)


def cmd_simulate(cfg: RunConfig) -> int:
    model = _model(cfg)
    steps = _positive("steps", cfg.steps)
    paths = _positive("paths", cfg.paths)
    if cfg.stride < 0:
        raise UsageError("--stride must be nonnegative")
    out = Path(cfg.out or "simulation")
    out.mkdir(parents=True, exist_ok=True)
    grid = [float(t) for t in (cfg.grid or [])]
    if any(t < 0 or t > 1 for t in grid):
        raise UsageError("--grid times must lie in [0, 1]")
    summaries = []
    for i in range(paths):
        traj = simulate(model, steps, cfg.seed, path_index=i, stride=cfg.stride, record_visits=False)
        with open(out / f"path_{i:05d}.csv", "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["step", "x", "side"] + [f"y{l + 1}" for l in range(traj.m - 1)])
            w.writerows(trajectory_rows(traj))
        s = traj.summary()
        s["invariants"] = traj.check_invariants()
        if grid:
            try:
                xs, ys = scaled(traj, steps, grid)
                s["scaled"] = {"t": grid, "x": xs.tolist(), "y": ys.tolist()}
            except MembraneWalkError as exc:
                raise UsageError(f"--grid: {exc}") from exc
        summaries.append(s)
    doc = _envelope(cfg, {"model": compile_model(model).name, "paths": summaries})
    (out / "summary.json").write_text(dumps(doc))
    print(f"wrote {paths} trajectories to {out}/", file=sys.stderr)
    return EXIT_OK


def _suites(cfg: RunConfig, one_sided: bool) -> list:
    if cfg.suite not in SUITES:
        raise UsageError(f"unknown suite {cfg.suite!r}")
    if cfg.suite != "all":
        return [cfg.suite]
    if one_sided:
        return ["one-sided", "martingale", "stable"]
    return ["invariance", "slide", "stationarity", "martingale", "stable"]


def cmd_verify(cfg: RunConfig) -> int:
    model = _model(cfg)
    env_model = isinstance(model, (IIDEnvironment, PeriodicEnvironment))
    n = _positive("n", cfg.n)
    paths = _positive("paths", cfg.paths)
    workers = cfg.workers
    suites = _suites(cfg, env_model)
    reports = []
    cm = compile_model(model)
    shared = None
    needs_shared = {"invariance", "slide", "martingale", "one-sided"} & set(suites)
    if needs_shared:
        shared = run_ensemble(cm, n, paths, cfg.seed, workers=workers)
    for suite in suites:
        if suite == "invariance":
            reports.append(verify_invariance(cm, n, paths, cfg.seed, ensemble=shared))
        elif suite == "slide":
            reports.append(verify_slide(cm, n, paths, cfg.seed, ensemble=shared))
        elif suite == "stationarity":
            reports.append(verify_visit_stationarity(cm, _positive("visits", cfg.visits), cfg.seed,
                                                     n=n, workers=workers))
        elif suite == "martingale":
            drift = float(cfg.debug_drift or 0.0)
            reports.append(verify_martingales(cm, n, paths, cfg.seed,
                                              ensemble=shared if drift == 0.0 else None,
                                              workers=workers, drift=drift))
        elif suite == "one-sided":
            if not env_model:
                raise UsageError("the one-sided suite needs --env")
            reports.append(verify_one_sided(model, n, paths, cfg.seed, ensemble=shared))
        elif suite == "stable":
            reports.append(verify_stable_hitting(cm.m, _positive("n_visits", cfg.n_visits),
                                                 _positive("reps", cfg.reps), cfg.seed,
                                                 scale=cfg.stable_scale))
    report = combine(reports, cfg.suite) if len(reports) > 1 else reports[0]
    print(report.table(), file=sys.stderr)
    _write(cfg.out or "report.json", dumps(_envelope(cfg, {"report": report.to_dict()})))
    return EXIT_OK if report.passed else EXIT_FAIL


def cmd_reference(cfg: RunConfig) -> int:
    steps = _positive("steps", cfg.steps)
    paths = _positive("paths", cfg.paths)
    if not -1.0 <= cfg.gamma <= 1.0:
        raise UsageError("--gamma must lie in [-1, 1]")
    x, L = skew_endpoint_sample(cfg.gamma, steps, paths, path_rng(cfg.seed, 0))
    rows = [["path", "x", "local_time"]] + [[i, repr(float(a)), repr(float(b))]
                                            for i, (a, b) in enumerate(zip(x, L))]
    summary = [
        ["statistic", "value"],
        ["seed", cfg.seed], ["gamma", cfg.gamma], ["steps", steps], ["paths", paths],
        ["version", __version__],
        ["mean_local_time", float(L.mean())],
        ["stderr_local_time", float(L.std(ddof=1) / math.sqrt(paths)) if paths > 1 else 0.0],
        ["exact_mean_local_time", expected_visits(steps) / math.sqrt(steps)],
        ["limit_mean_local_time", SQRT_2_OVER_PI],
        ["fraction_positive", float(np.mean(x > 0))],
        ["limit_fraction_positive", (1 + cfg.gamma) / 2],
    ]
    if cfg.out and cfg.out != "-":
        base = Path(cfg.out)
        base.parent.mkdir(parents=True, exist_ok=True)
        with open(base, "w", newline="") as fh:
            csv.writer(fh).writerows(rows)
        with open(base.with_name(base.stem + "_summary.csv"), "w", newline="") as fh:
            csv.writer(fh).writerows(summary)
    else:
        csv.writer(sys.stdout).writerows(rows)
        csv.writer(sys.stderr).writerows(summary)
    return EXIT_OK


COMMANDS = {"analyze": cmd_analyze, "simulate": cmd_simulate, "verify": cmd_verify,
            "reference": cmd_reference}


def _grid(text: str) -> list:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"bad grid {text!r}") from exc


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="membrane-walk",
                                     description="Periodic membranes for lattice random walks: "
                                                 "exact permeability/slide and Monte Carlo checks.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="JSON file with RunConfig keys (command-line flags override)")
        p.add_argument("--seed", type=int, help=f"master seed (default ${SEED_ENV} or 1)")
        p.add_argument("--out", help="output file or directory")
        p.add_argument("--workers", type=int, help="threads for path ensembles (default: all cores)")

    a = sub.add_parser("analyze", help="hitting kernel, embedded chain, pi, gamma, c")
    common(a)
    a.add_argument("--spec", help="membrane JSON file or builtin:NAME(ARGS)")
    a.add_argument("--hitting-kernel", choices=("truncated-solve", "monte-carlo"),
                   help="also compute an independent oracle kernel and its deviation")
    a.add_argument("--compare-paper-example", type=float, metavar="P",
                   help="add closed-form values of the two-periodic example at P and the deltas")

    s = sub.add_parser("simulate", help="simulate paths and write CSV + JSON summaries")
    common(s)
    s.add_argument("--spec")
    s.add_argument("--env", help="one-sided environment JSON file")
    s.add_argument("--steps", type=int)
    s.add_argument("--paths", type=int)
    s.add_argument("--stride", type=int, help="store every k-th state (0: none)")
    s.add_argument("--grid", type=_grid, help="comma-separated times t in [0,1] for X([nt])/sqrt(n)")

    v = sub.add_parser("verify", help="Monte Carlo verification suites")
    common(v)
    v.add_argument("--spec")
    v.add_argument("--env", "--one-sided", dest="env", help="one-sided environment JSON file")
    v.add_argument("--suite", choices=SUITES)
    v.add_argument("--n", type=int, help="steps per path")
    v.add_argument("--steps", type=int, dest="n", help=argparse.SUPPRESS)
    v.add_argument("--paths", type=int)
    v.add_argument("--visits", type=int, help="membrane visits for the stationarity suite")
    v.add_argument("--n-visits", type=int, help="visits per replication for the stable suite")
    v.add_argument("--reps", type=int, help="replications for the stable suite")
    v.add_argument("--stable-scale", type=float, help="Cauchy scale tested (default 1/sqrt(m))")
    v.add_argument("--debug-drift", type=float, nargs="?", const=DRIFT_CONTROL,
                   help="inject a drift into free normal steps of the martingale suite")

    r = sub.add_parser("reference", help="skew Brownian endpoint samples and local times")
    common(r)
    r.add_argument("--gamma", type=float)
    r.add_argument("--paths", type=int)
    r.add_argument("--steps", type=int)
    return parser


DEFAULTS = {"simulate": {"paths": 1}, "verify": {"paths": 20_000}, "reference": {"paths": 10_000}}


def make_config(args: argparse.Namespace) -> RunConfig:
    values = {"command": args.command}
    values.update(DEFAULTS.get(args.command, {}))
    if os.environ.get(SEED_ENV):
        try:
            values["seed"] = int(os.environ[SEED_ENV])
        except ValueError as exc:
            raise UsageError(f"${SEED_ENV} must be an integer") from exc
    if getattr(args, "config", None):
        try:
            doc = json.loads(Path(args.config).read_text())
        except FileNotFoundError as exc:
            raise UsageError(f"{args.config}: no such config file") from exc
        except json.JSONDecodeError as exc:
            raise UsageError(f"{args.config}:{exc.lineno}:{exc.colno}: invalid JSON: {exc.msg}") from exc
        unknown = set(doc) - CONFIG_KEYS
        if unknown:
            raise UsageError(f"{args.config}: unknown config keys {sorted(unknown)}")
        values.update({k: v for k, v in doc.items() if k != "command"})
    for k, v in vars(args).items():
        if k in CONFIG_KEYS and k != "command" and v is not None:
            values[k] = v
    return RunConfig(**values)


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else EXIT_OK
    try:
        cfg = make_config(args)
        return COMMANDS[cfg.command](cfg)
    except UsageError as exc:
        print(f"membrane-walk {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except MembraneWalkError as exc:
        print(f"membrane-walk {args.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
