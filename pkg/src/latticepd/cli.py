"""Command-line surface: `run` (single), `sweep` (grid), `snapshot` (grid dumps).

Flags mirror SimConfig field names. A key=value config file can supply any
of them; explicit flags win. --seed is required for reproducible runs; when
omitted a seed is drawn from system entropy and logged, and the manifest
written next to every output records the fully resolved configuration and
seed derivation of each job.
"""

from __future__ import annotations

import argparse
import dataclasses
import logging
import os
import secrets

import numpy as np

from .harness import (
    SimConfig,
    SweepSpec,
    build_manifest,
    dump_qtables,
    run_single,
    run_sweep,
    write_manifest,
    write_results_csv,
    write_series_csv,
    CellResult,
)
from .learning import ActionSet

log = logging.getLogger("latticepd")

_FIELD_TYPES = {
    "action_set": str, "L": int, "rho": float, "b": float, "p_d": float,
    "alpha": float, "gamma": float, "epsilon": float, "n_mcs": int,
    "replicas": int, "tail_fraction": float, "seed": int, "init_mode": str,
    "move_failure_mode": int, "persist_reward": int, "copy_best_fresh": bool,
    "copy_best_include_self": bool, "copy_best_play_first": bool,
}

_AXIS_FLAGS = ("b", "rho", "p_d")


def _parse_bool(text: str) -> bool:
    lowered = text.strip().lower()
    if lowered in ("1", "true", "yes", "on"):
        return True
    if lowered in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def parse_config_file(path: str) -> dict:
    """key=value lines, # comments; values typed per SimConfig field."""
    values = {}
    with open(path) as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{lineno}: expected key=value, got {raw!r}")
            key, _, text = line.partition("=")
            key = key.strip()
            if key not in _FIELD_TYPES:
                raise ValueError(f"{path}:{lineno}: unknown key {key!r}")
            caster = _parse_bool if _FIELD_TYPES[key] is bool else _FIELD_TYPES[key]
            values[key] = caster(text.strip())
    return values


def _add_config_flags(p: argparse.ArgumentParser, axes_as_lists: bool) -> None:
    p.add_argument("--config", help="key=value config file; flags override it")
    p.add_argument("--action-set", dest="action_set",
                   choices=[s.value for s in ActionSet])
    p.add_argument("--L", type=int, dest="L")
    for axis in _AXIS_FLAGS:
        flag = "--" + axis.replace("_", "-")
        if axes_as_lists:
            p.add_argument(flag, dest=axis, type=str, metavar="V[,V...]",
                           help=f"{axis} value(s); a comma list sweeps this axis")
        else:
            p.add_argument(flag, dest=axis, type=float)
    p.add_argument("--alpha", type=float)
    p.add_argument("--gamma", type=float)
    p.add_argument("--epsilon", type=float)
    p.add_argument("--n-mcs", dest="n_mcs", type=int)
    p.add_argument("--replicas", type=int)
    p.add_argument("--tail-fraction", dest="tail_fraction", type=float)
    p.add_argument("--seed", type=int)
    p.add_argument("--init-mode", dest="init_mode", choices=["random", "striped"])
    p.add_argument("--move-failure-mode", dest="move_failure_mode", type=int,
                   choices=[0, 1, 2],
                   help="failed move: 0 skip entirely, 1 learn with zero reward "
                        "(default), 2 learn with the stored payoff")
    p.add_argument("--persist-reward", dest="persist_reward", type=int,
                   choices=[0, 1, 2],
                   help="persist reward: 0 stored payoff (default), "
                        "1 fresh evaluation, 2 zero")
    p.add_argument("--copy-best-fresh", dest="copy_best_fresh", type=_parse_bool,
                   metavar="BOOL")
    p.add_argument("--copy-best-include-self", dest="copy_best_include_self",
                   type=_parse_bool, metavar="BOOL")
    p.add_argument("--copy-best-play-first", dest="copy_best_play_first",
                   type=_parse_bool, metavar="BOOL")
    p.add_argument("--engine", choices=["fast", "reference"], default="fast")


def _resolve(args, skip=()) -> dict:
    """Merge precedence: CLI flag > config file > SimConfig default."""
    file_values = parse_config_file(args.config) if args.config else {}
    kwargs = {}
    for field in _FIELD_TYPES:
        if field in skip:
            continue
        cli_value = getattr(args, field, None)
        if cli_value is not None:
            kwargs[field] = cli_value
        elif field in file_values:
            kwargs[field] = file_values[field]
    if "seed" not in kwargs:
        kwargs["seed"] = secrets.randbits(63)
        log.info("no --seed given; drew %d from system entropy", kwargs["seed"])
    return kwargs


def _single_config(args) -> SimConfig:
    kwargs = _resolve(args)
    try:
        return SimConfig(**kwargs)
    except (TypeError, ValueError) as exc:
        raise SystemExit(f"invalid configuration: {exc}")


def cmd_run(args) -> None:
    config = _single_config(args)
    result = run_single(config, engine=args.engine)
    cell = CellResult(cell_index=0, config=config,
                      f_c_tails=np.array([result.f_c_tail]),
                      action_tails=result.action_tail[None, :],
                      corr_tails=result.corr_tail[None, :])
    write_results_csv([cell], args.out)
    manifest_cfg = dataclasses.replace(config, replicas=1)
    write_manifest(build_manifest("run", config.seed, [manifest_cfg],
                                  extra={"engine": args.engine}),
                   args.out + ".manifest.json")
    if args.series:
        write_series_csv(result, args.series)
    if args.qtables:
        dump_qtables(result.final, args.qtables)
    log.info("run done: tail f_C = %.4f -> %s", result.f_c_tail, args.out)


def cmd_sweep(args) -> None:
    axes = {}
    for axis in _AXIS_FLAGS:
        raw = getattr(args, axis)
        if raw is not None:
            axes[axis] = [float(v) for v in str(raw).split(",") if v != ""]
    base_kwargs = _resolve(args, skip=_AXIS_FLAGS)
    for axis, values in axes.items():
        base_kwargs[axis] = values[0]
    try:
        base = SimConfig(**base_kwargs)
        spec = SweepSpec(base=base, axes=axes)
        cells = spec.cell_configs()
    except (TypeError, ValueError) as exc:
        raise SystemExit(f"invalid sweep: {exc}")
    log.info("sweep: %d cells x %d replicas", len(cells), base.replicas)
    results = run_sweep(spec, engine=args.engine, workers=args.workers)
    write_results_csv(results, args.out)
    write_manifest(build_manifest("sweep", base.seed, cells,
                                  extra={"engine": args.engine,
                                         "axes": {k: list(v) for k, v in axes.items()}}),
                   args.out + ".manifest.json")
    log.info("sweep done: %d rows -> %s", len(results), args.out)


def cmd_snapshot(args) -> None:
    config = _single_config(args)
    times = sorted({int(t) for t in args.snap_at.split(",")})
    bad = [t for t in times if t < 0 or t > config.n_mcs]
    if bad:
        raise SystemExit(f"snapshot times outside [0, n_mcs={config.n_mcs}]: {bad}")
    os.makedirs(args.out_dir, exist_ok=True)
    result = run_single(config, engine=args.engine, snapshot_times=times,
                        snapshot_dir=args.out_dir)
    if args.series:
        write_series_csv(result, args.series)
    manifest_cfg = dataclasses.replace(config, replicas=1)
    write_manifest(build_manifest("snapshot", config.seed, [manifest_cfg],
                                  extra={"engine": args.engine, "snap_at": times}),
                   os.path.join(args.out_dir, "manifest.json"))
    log.info("snapshot run done: grids at %s in %s", times, args.out_dir)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="latticepd",
        description="Diluted-lattice prisoner's dilemma with independent Q-learners")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="one simulation run")
    _add_config_flags(p_run, axes_as_lists=False)
    p_run.add_argument("--out", default="results.csv", help="summary CSV path")
    p_run.add_argument("--series", help="also write the per-MCS time series CSV")
    p_run.add_argument("--dump-qtables", dest="qtables")
    p_run.set_defaults(func=cmd_run)

    p_sweep = sub.add_parser("sweep", help="replicated parameter grid")
    _add_config_flags(p_sweep, axes_as_lists=True)
    p_sweep.add_argument("--out", default="sweep.csv", help="results CSV path")
    p_sweep.add_argument("--workers", type=int, help="bounded worker pool size")
    p_sweep.set_defaults(func=cmd_sweep)

    p_snap = sub.add_parser("snapshot", help="one run with lattice grid dumps")
    _add_config_flags(p_snap, axes_as_lists=False)
    p_snap.add_argument("--out-dir", required=True)
    p_snap.add_argument("--snap-at", default="0,10,100,1000,10000,100000",
                        help="comma list of MCS counts to dump (0 = initial)")
    p_snap.add_argument("--series", help="also write the per-MCS time series CSV")
    p_snap.set_defaults(func=cmd_snapshot)
    return parser


def main(argv=None) -> None:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(message)s")
    args = build_parser().parse_args(argv)
    args.func(args)


if __name__ == "__main__":
    main()
