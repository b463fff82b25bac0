"""Command line front end: ``rwaqubit run | validate | presets``."""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from pathlib import Path

import numpy as np
from threadpoolctl import threadpool_limits

from .dynmap import MapInvariantError
from .exact import TruncationError, truncation_health
from .friedrichs import BracketError, ResolutionError
from .gkls import GridTooCoarse, SolverFailure
from .scenario import ConfigError, Scenario, load, load_preset, preset_names, preset_text

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_TRUNCATION = 3
EXIT_SOLVER = 4

OUT_ENV = "RWAQUBIT_OUT"
DEFAULT_OUT = "rwaqubit-out"

SOLVER_ERRORS = (SolverFailure, GridTooCoarse, ResolutionError, BracketError, MapInvariantError,
                 ArithmeticError, np.linalg.LinAlgError)


def _fmt(x) -> str:
    if isinstance(x, (int, np.integer)) and not isinstance(x, bool):
        return str(int(x))
    return format(float(x), ".17g")


def _plain(x):
    """JSON-ready copy with NaN/inf as null/strings and numpy scalars unwrapped."""
    if isinstance(x, dict):
        return {str(k): _plain(v) for k, v in x.items()}
    if isinstance(x, (list, tuple, np.ndarray)):
        return [_plain(v) for v in x]
    if isinstance(x, (bool, np.bool_)):
        return bool(x)
    if isinstance(x, (int, np.integer)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        x = float(x)
        if math.isnan(x):
            return None
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return x
    return x


def _dump_json(obj) -> str:
    return json.dumps(_plain(obj), indent=2, sort_keys=True, allow_nan=False) + "\n"


def write_outputs(result, out: Path, fmt: str) -> list[str]:
    out.mkdir(parents=True, exist_ok=True)
    written = []
    for name, table in result.tables.items():
        if fmt == "csv":
            lines = [",".join(table.columns)]
            cols = [np.asarray(c) for c in table.data]
            for i in range(len(cols[0])):
                lines.append(",".join(_fmt(c[i]) for c in cols))
            text = "\n".join(lines) + "\n"
            fname = f"{name}.csv"
        else:
            text = _dump_json({"columns": table.columns,
                               "data": {c: np.asarray(d) for c, d in zip(table.columns, table.data)}})
            fname = f"{name}.json"
        (out / fname).write_text(text)
        written.append(fname)
    for name, rec in result.records.items():
        fname = f"{name}.json"
        (out / fname).write_text(_dump_json(rec))
        written.append(fname)
    manifest = dict(result.manifest, files=sorted(written), format=fmt)
    (out / "manifest.json").write_text(_dump_json(manifest))
    return written + ["manifest.json"]


def _scenario(args) -> Scenario:
    if args.config and args.preset:
        raise ConfigError("--config/--preset", "give one of --config or --preset")
    if args.preset:
        return load_preset(args.preset)
    if args.config:
        return load(args.config)
    raise ConfigError("--config", "a scenario is required (--config FILE or --preset NAME)")


def cmd_run(args) -> int:
    from .pipeline import run

    try:
        sc = _scenario(args)
        fmt = args.format or sc.config["output"]["format"]
        out = Path(args.out or os.environ.get(OUT_ENV) or DEFAULT_OUT)
        if args.threads < 1:
            raise ConfigError("--threads", "must be >= 1")
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        # BLAS stays single-threaded so results do not depend on --threads
        with threadpool_limits(limits=1):
            result = run(sc, threads=args.threads)
    except TruncationError as exc:
        print(f"truncation abort: {exc}", file=sys.stderr)
        return EXIT_TRUNCATION
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except SOLVER_ERRORS as exc:
        print(f"solver failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    files = write_outputs(result, out, fmt)
    if not args.quiet:
        print(f"wrote {', '.join(files)} to {out}")
    return EXIT_OK


def validate_scenario(sc: Scenario) -> list[dict]:
    """Issues found without running dynamics (empty when the scenario is runnable)."""
    issues = []
    cfg = sc.config
    if sc.pipeline == "thermal":
        bath = sc.bath()
        M = cfg["truncation"]["max_excitations"]
        w = truncation_health(bath, sc.params, M)
        if w < cfg["truncation"]["min_weight"]:
            issues.append({"level": "truncation", "key": "truncation.max_excitations",
                           "message": f"M={M} captures Gibbs weight {w:.6f} < {cfg['truncation']['min_weight']}"})
    else:
        from .friedrichs import RESOLUTION_LIMIT, _max_detuning

        t = cfg["time"]
        dt = t["t_max"] / t["steps"]
        r = dt * _max_detuning(sc.density, sc.params.Omega)
        if r > RESOLUTION_LIMIT:
            issues.append({"level": "error", "key": "time.steps",
                           "message": f"dt * max|w - Omega| = {r:.3g} exceeds {RESOLUTION_LIMIT}"})
        if sc.density.is_zero:
            issues.append({"level": "error", "key": "bath", "message": "spectral density is identically zero"})
    return issues


def cmd_validate(args) -> int:
    try:
        sc = _scenario(args)
        issues = validate_scenario(sc)
    except ConfigError as exc:
        print(_dump_json({"ok": False, "issues": [{"level": "error", "key": exc.key, "message": str(exc)}]}),
              end="")
        return EXIT_CONFIG
    print(_dump_json({"ok": not issues, "config_sha256": sc.config_hash(), "issues": issues}), end="")
    if any(i["level"] == "error" for i in issues):
        return EXIT_CONFIG
    if issues:
        return EXIT_TRUNCATION
    return EXIT_OK


def cmd_presets(args) -> int:
    if args.show:
        try:
            print(preset_text(args.show), end="")
        except ConfigError as exc:
            print(f"config error: {exc}", file=sys.stderr)
            return EXIT_CONFIG
        return EXIT_OK
    for name in preset_names():
        print(f"{name:28s} {load_preset(name).config['description']}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="rwaqubit", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    def scenario_args(sp):
        sp.add_argument("--config", help="scenario TOML file")
        sp.add_argument("--preset", help="named scenario shipped with the package")

    r = sub.add_parser("run", help="run a scenario and write tables plus a manifest")
    scenario_args(r)
    r.add_argument("--out", help=f"output directory (default ${OUT_ENV} or ./{DEFAULT_OUT})")
    r.add_argument("--format", choices=("csv", "json"), help="table format (default from the scenario)")
    r.add_argument("--threads", type=int, default=1, help="worker threads for sector work")
    r.add_argument("--seedless", action="store_true",
                   help="assert that no random numbers are used (always true; takes no value)")
    r.add_argument("--quiet", action="store_true")
    r.set_defaults(func=cmd_run)

    v = sub.add_parser("validate", help="check a scenario without running dynamics")
    scenario_args(v)
    v.set_defaults(func=cmd_validate)

    s = sub.add_parser("presets", help="list shipped scenarios")
    s.add_argument("--show", metavar="NAME", help="print one preset's TOML")
    s.set_defaults(func=cmd_presets)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
