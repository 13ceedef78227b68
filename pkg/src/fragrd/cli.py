"""Command line interface: ``fragrd gen|run|sweep|verify|plot``.

Exit codes: 0 success, 2 configuration error, 3 numerical failure,
4 infeasible landscape target.
"""
from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
from dataclasses import asdict
from typing import List, Optional

from . import __version__
from .errors import (ConfigError, ConvergenceError, InfeasibleTargetError, NumericalError)
from .harvest import HarvestKind, HarvestStrategy
from .landscape import (GeneratorConfig, Landscape, build_ensemble, generate, load, save)
from .model import ModelParams, NumericsConfig
from .observables import annual_yield
from .solver import solve
from .sweep import (EnsembleSpec, SweepConfig, SweepResult, format_number, run_sweep)

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL, EXIT_INFEASIBLE = 0, 2, 3, 4


# --------------------------------------------------------------------------
# configuration files


def _section(data, allowed, where):
    if data is None:
        return {}
    if not isinstance(data, dict):
        raise ConfigError(f"{where}: expected an object, got {type(data).__name__}")
    unknown = set(data) - set(allowed)
    if unknown:
        raise ConfigError(f"{where}: unknown key(s) {sorted(unknown)}")
    return data


def _build(cls, data, where):
    fields = cls.__dataclass_fields__
    data = _section(data, fields, where)
    try:
        return cls(**data)
    except TypeError as exc:
        raise ConfigError(f"{where}: {exc}") from None


def read_config(path: str) -> dict:
    try:
        with open(path) as fh:
            data = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from None
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: top level must be an object")
    return data


def _relative(base: str, path: str) -> str:
    return path if os.path.isabs(path) else os.path.join(os.path.dirname(base) or ".", path)


def _landscape_from(spec, base) -> Landscape:
    spec = _section(spec, ("file", "generate", "uniform"), "landscape")
    if len(spec) != 1:
        raise ConfigError("landscape: give exactly one of 'file', 'generate', 'uniform'")
    if "file" in spec:
        return load(_relative(base, spec["file"]))
    if "uniform" in spec:
        n = int(spec["uniform"]) if not isinstance(spec["uniform"], bool) else 50
        return Landscape.uniform(n)
    g = _section(spec["generate"], ("n", "fraction", "s", "seed", "max_iterations"),
                 "landscape.generate")
    return generate(GeneratorConfig(g.get("n", 50), g.get("fraction", 0.1), g.get("s", 94),
                                    g.get("seed", 0), g.get("max_iterations", 20_000_000)))


def load_run_config(path: str):
    data = _section(read_config(path), ("params", "numerics", "strategy", "landscape", "output"),
                    path)
    params = _build(ModelParams, data.get("params"), "params")
    numerics = _build(NumericsConfig, data.get("numerics"), "numerics")
    strat = _section(data.get("strategy"), ("kind", "intensity"), "strategy")
    if "kind" not in strat or "intensity" not in strat:
        raise ConfigError("strategy: 'kind' and 'intensity' are required")
    strategy = HarvestStrategy(strat["kind"], float(strat["intensity"]), params.epsilon)
    landscape = _landscape_from(data.get("landscape", {"generate": {}}), path)
    output = _section(data.get("output"), ("csv",), "output")
    return params, numerics, strategy, landscape, output, data


def _intensity_grid(spec):
    if spec is None or isinstance(spec, list):
        return tuple(float(v) for v in spec or ())
    g = _section(spec, ("start", "stop", "count"), "intensities")
    import numpy as np
    return tuple(float(v) for v in np.linspace(g["start"], g["stop"], int(g["count"])))


def load_sweep_config(path: str, full_62: bool = False, workers: int = 1):
    data = _section(read_config(path), ("params", "numerics", "strategy", "intensities",
                                        "ensemble", "landscape_files", "observe_times",
                                        "output"), path)
    params = _build(ModelParams, data.get("params"), "params")
    numerics = _build(NumericsConfig, data.get("numerics"), "numerics")
    kind = data.get("strategy", "constant")
    if isinstance(kind, dict):
        kind = _section(kind, ("kind",), "strategy").get("kind")
    files = tuple(_relative(path, f) for f in data.get("landscape_files", ()))
    ensemble = None
    if not files:
        e = _section(data.get("ensemble"), ("n", "fraction", "s_values", "range", "master_seed",
                                            "max_iterations"), "ensemble")
        kw = {k: e[k] for k in ("n", "fraction", "master_seed", "max_iterations") if k in e}
        if full_62:
            ensemble = EnsembleSpec.full(**kw)
        elif "range" in e:
            ensemble = EnsembleSpec.from_range(*parse_range(e["range"]), **kw)
        elif "s_values" in e:
            ensemble = EnsembleSpec(s_values=tuple(int(s) for s in e["s_values"]), **kw)
        else:
            ensemble = EnsembleSpec(**kw)
    try:
        config = SweepConfig(kind=HarvestKind(kind), intensities=_intensity_grid(data.get("intensities")),
                             ensemble=ensemble, landscape_files=files, params=params,
                             numerics=numerics,
                             observe_times=tuple(float(t) for t in data.get("observe_times", (5.0,))),
                             workers=workers)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    output = _section(data.get("output"), ("csv", "dir", "plot", "split_times"), "output")
    return config, output


def parse_range(text: str):
    try:
        start, step, count = (int(v) for v in str(text).split(":"))
    except ValueError:
        raise ConfigError(f"ensemble range must look like start:step:count, got {text!r}") from None
    return start, step, count


# --------------------------------------------------------------------------
# commands


def cmd_gen(args) -> int:
    if args.ensemble:
        start, step, count = parse_range(args.ensemble)
        landscapes = build_ensemble(args.n, args.fraction, start, step, count, args.seed,
                                    workers=args.threads)
        out_dir = args.out or args.out_dir or "."
        os.makedirs(out_dir, exist_ok=True)
        for k, ls in enumerate(landscapes, start=1):
            path = os.path.join(out_dir, f"landscape_k{k:03d}_s{ls.s}.txt")
            save(ls, path)
            print(f"k={k} s={ls.s} protected={ls.protected_count} -> {path}")
        return EXIT_OK
    if args.s_target is None:
        raise ConfigError("gen needs --s-target or --ensemble")
    ls = generate(GeneratorConfig(args.n, args.fraction, args.s_target, args.seed))
    path = args.out or os.path.join(args.out_dir or ".", f"landscape_s{ls.s}.txt")
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    save(ls, path)
    print(f"s={ls.s} protected={ls.protected_count} -> {path}")
    if args.plot:
        from .plotting import landscape_figure
        print(landscape_figure(ls, os.path.splitext(path)[0] + ".svg"))
    return EXIT_OK


def write_trajectory_csv(traj, stream, metadata: dict) -> None:
    for key, value in metadata.items():
        stream.write(f"# {key}: {json.dumps(value, sort_keys=True)}\n")
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(("t", "P", "R", "flux"))
    for t, p, f in zip(traj.times, traj.population, traj.flux):
        r = annual_yield(traj, t) if t >= 1 - 1e-9 else math.nan
        writer.writerow([format_number(t), format_number(p), format_number(r), format_number(f)])


def cmd_run(args) -> int:
    params, numerics, strategy, landscape, output, raw = load_run_config(args.config)
    traj = solve(landscape, strategy, params, numerics)
    metadata = {"fragrd_version": __version__, "config": raw,
                "resolved": {"params": asdict(params), "numerics": asdict(numerics),
                             "strategy": {"kind": strategy.kind.value,
                                          "intensity": strategy.intensity,
                                          "epsilon": strategy.epsilon}},
                "landscape": {"s": landscape.s, "digest": landscape.digest()}}
    path = args.out or output.get("csv")
    if path:
        path = path if args.out else _relative(args.config, path)
        os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
        with open(path, "w", newline="") as fh:
            write_trajectory_csv(traj, fh, metadata)
        print(f"wrote {path}", file=sys.stderr)
    else:
        write_trajectory_csv(traj, sys.stdout, metadata)
    return EXIT_OK


def _write_result(result: SweepResult, path: str, times=None) -> str:
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    with open(path, "w", newline="") as fh:
        result.to_csv(fh, times)
    return path


def cmd_sweep(args) -> int:
    config, output = load_sweep_config(args.config, full_62=args.full_62,
                                       workers=args.threads or os.cpu_count() or 1)
    out_dir = args.out_dir or output.get("dir") or "."
    result = run_sweep(config)
    path = os.path.join(out_dir, output.get("csv", "sweep.csv"))
    print(_write_result(result, path))
    if output.get("split_times") or args.split_times:
        stem = os.path.splitext(path)[0]
        for t in result.times:
            print(_write_result(result, f"{stem}_t{t:g}.csv", [t]))
    if args.plot or output.get("plot"):
        from .plotting import render_sweep
        for p in render_sweep(result, out_dir, prefix=os.path.splitext(os.path.basename(path))[0]):
            print(p)
    return EXIT_OK


def cmd_verify(args) -> int:
    from .verify import run_checks, toroidal_aggregation_index
    kw = {"dt": args.dt, "refine": args.refine}
    if args.inject_toroidal:
        kw["index_fn"] = toroidal_aggregation_index
    results = run_checks(**kw)
    for r in results:
        print(r.line())
    ok = all(r.passed for r in results)
    print("all checks passed" if ok else "verification FAILED")
    return EXIT_OK if ok else EXIT_NUMERICAL


def cmd_plot(args) -> int:
    from .plotting import render_sweep
    try:
        with open(args.csv) as fh:
            result = SweepResult.from_csv(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read {args.csv}: {exc.strerror}") from None
    prefix = os.path.splitext(os.path.basename(args.csv))[0]
    for p in render_sweep(result, args.out_dir or os.path.dirname(args.csv) or ".", prefix, args.t):
        print(p)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fragrd", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"fragrd {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen", help="generate landscape file(s)")
    g.add_argument("--n", type=int, default=50)
    g.add_argument("--fraction", type=float, default=0.1)
    target = g.add_mutually_exclusive_group()
    target.add_argument("--s-target", type=int)
    target.add_argument("--ensemble", metavar="START:STEP:COUNT")
    g.add_argument("--seed", type=int, default=1)
    g.add_argument("--out", help="output file (single) or directory (ensemble)")
    g.add_argument("--out-dir")
    g.add_argument("--threads", type=int, default=1)
    g.add_argument("--plot", action="store_true", help="also draw the landscape as SVG")
    g.set_defaults(func=cmd_gen)

    r = sub.add_parser("run", help="solve one landscape and write the trajectory CSV")
    r.add_argument("config")
    r.add_argument("--out")
    r.set_defaults(func=cmd_run)

    s = sub.add_parser("sweep", help="run an ensemble x intensity sweep")
    s.add_argument("config")
    s.add_argument("--out-dir")
    s.add_argument("--plot", action="store_true")
    s.add_argument("--full-62", action="store_true", help="use all 62 landscapes s = 94, 100, ..., 460")
    s.add_argument("--threads", type=int, default=None, help="worker processes (default: all cores)")
    s.add_argument("--split-times", action="store_true", help="also write one CSV per observation time")
    s.set_defaults(func=cmd_sweep)

    v = sub.add_parser("verify", help="run built-in analytic checks")
    v.add_argument("--dt", type=float, default=None)
    v.add_argument("--refine", type=int, default=2)
    v.add_argument("--inject-toroidal", action="store_true",
                   help="fault injection: check a wraparound aggregation index against the oracle")
    v.set_defaults(func=cmd_verify)

    p = sub.add_parser("plot", help="re-draw figures from a sweep CSV")
    p.add_argument("csv")
    p.add_argument("--out-dir")
    p.add_argument("--t", type=float, default=None)
    p.set_defaults(func=cmd_plot)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except InfeasibleTargetError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NumericalError, ConvergenceError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
