"""Experiment orchestration: configs, replicas, sweeps, and persistence.

Seeding: every job (cell c, replica r) draws its stream from
``SeedSequence(base_seed, spawn_key=(c, r))``, so a job's trajectory depends
only on (base seed, cell index, replica index), never on execution order or
worker count. A plain single run is the (0, 0) job, which makes a one-cell,
one-replica sweep reproduce it bit for bit.

Results persist as CSV with a fixed, documented column set (see
RESULT_COLUMNS); per-MCS series and lattice snapshots are flag-gated.
"""

from __future__ import annotations

import dataclasses
import itertools
import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import metrics
from .dynamics import World, mcs
from .kernel import ArrayState, advance
from .learning import ActionKind, ActionSet
from .lattice import round_half_up
from .metrics import N_ACTION_KINDS, tail_average, tail_nanmean

NO_KNOWLEDGE_SETS = (ActionSet.STATIC, ActionSet.MOBILE)

# Fixed results schema: one row per parameter cell.
RESULT_COLUMNS = [
    "action_set", "L", "rho", "b", "p_d", "alpha", "gamma", "epsilon",
    "n_mcs", "replicas", "f_C_mean", "f_C_stderr",
    "frac_C_mean", "frac_D_mean", "frac_M_mean", "frac_B_mean", "frac_P_mean",
]

SERIES_COLUMNS = [
    "mcs", "f_C", "frac_C", "frac_D", "frac_M", "frac_B", "frac_P",
    "corr_C", "corr_D", "corr_M", "corr_B", "corr_P",
]

SWEEP_AXES = ("b", "rho", "p_d")


@dataclass
class SimConfig:
    """All run parameters. epsilon and n_mcs default per action set:
    0.02 / 2e4 for the no-knowledge sets, 0.15 / 1e5 for the exploring ones.
    """

    action_set: ActionSet
    rho: float
    seed: int
    L: int = 100
    b: float = 1.4
    p_d: float = 0.0
    alpha: float = 0.75
    gamma: float = 0.8
    epsilon: float | None = None
    n_mcs: int | None = None
    replicas: int = 10
    tail_fraction: float = 0.1
    init_mode: str = "random"
    move_failure_mode: int = 1
    persist_reward: int = 0
    copy_best_fresh: bool = True
    copy_best_include_self: bool = True
    copy_best_play_first: bool = False

    def __post_init__(self):
        if isinstance(self.action_set, str):
            self.action_set = ActionSet(self.action_set)
        if self.epsilon is None:
            self.epsilon = 0.02 if self.action_set in NO_KNOWLEDGE_SETS else 0.15
        if self.n_mcs is None:
            self.n_mcs = 20_000 if self.action_set in NO_KNOWLEDGE_SETS else 100_000
        if self.L < 2:
            raise ValueError(f"L must be >= 2, got {self.L}")
        if not 0.0 < self.rho <= 1.0:
            raise ValueError(f"rho must be in (0, 1], got {self.rho}")
        if round_half_up(self.rho * self.L * self.L) < 1:
            raise ValueError(f"rho={self.rho} rounds to zero players on L={self.L}")
        if not 1.0 < self.b < 2.0:
            raise ValueError(f"b must be in (1, 2), got {self.b}")
        if not 0.0 <= self.p_d <= 1.0:
            raise ValueError(f"p_d must be in [0, 1], got {self.p_d}")
        if not 0.0 < self.alpha <= 1.0:
            raise ValueError(f"alpha must be in (0, 1], got {self.alpha}")
        if not 0.0 <= self.gamma < 1.0:
            raise ValueError(f"gamma must be in [0, 1), got {self.gamma}")
        if not 0.0 <= self.epsilon <= 1.0:
            raise ValueError(f"epsilon must be in [0, 1], got {self.epsilon}")
        if self.n_mcs < 1:
            raise ValueError(f"n_mcs must be >= 1, got {self.n_mcs}")
        if self.replicas < 1:
            raise ValueError(f"replicas must be >= 1, got {self.replicas}")
        if not 0.0 < self.tail_fraction <= 1.0:
            raise ValueError(f"tail_fraction must be in (0, 1], got {self.tail_fraction}")
        if not 0 <= self.seed < 2 ** 64:
            raise ValueError(f"seed must be an unsigned 64-bit integer, got {self.seed}")
        if self.move_failure_mode not in (0, 1, 2):
            raise ValueError(f"move_failure_mode must be 0, 1 or 2, got {self.move_failure_mode}")
        if self.persist_reward not in (0, 1, 2):
            raise ValueError(f"persist_reward must be 0, 1 or 2, got {self.persist_reward}")
        if self.init_mode not in ("random", "striped"):
            raise ValueError(f"init_mode must be 'random' or 'striped', got {self.init_mode!r}")

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["action_set"] = self.action_set.value
        return d


def job_rng(base_seed: int, cell_index: int = 0, replica_index: int = 0) -> np.random.Generator:
    """The job's private stream; a pure function of its three indices."""
    ss = np.random.SeedSequence(base_seed, spawn_key=(cell_index, replica_index))
    return np.random.default_rng(ss)


def build_world(config: SimConfig, rng: np.random.Generator) -> World:
    return World.build(L=config.L, rho=config.rho, b=config.b,
                       alpha=config.alpha, gamma=config.gamma,
                       epsilon=config.epsilon, p_d=config.p_d,
                       action_set=config.action_set, rng=rng,
                       init_mode=config.init_mode,
                       move_failure_mode=config.move_failure_mode,
                       persist_reward=config.persist_reward,
                       copy_best_fresh=config.copy_best_fresh,
                       copy_best_include_self=config.copy_best_include_self,
                       copy_best_play_first=config.copy_best_play_first)


@dataclass
class RunResult:
    """Per-MCS series plus tail-averaged summary of one run."""

    config: SimConfig
    cell_index: int
    replica_index: int
    f_c: np.ndarray             # (n_mcs,)
    action_fractions: np.ndarray  # (n_mcs, 5) indexed by ActionKind
    correlations: np.ndarray    # (n_mcs, 5), NaN outside the action set
    f_c_tail: float
    action_tail: np.ndarray     # (5,)
    corr_tail: np.ndarray       # (5,), NaN-aware tail mean
    final: object               # the end-of-run World or ArrayState


def run_single(config: SimConfig, *, cell_index: int = 0, replica_index: int = 0,
               engine: str = "fast", snapshot_times=None, snapshot_dir=None,
               world_init=None) -> RunResult:
    """One full run: build a world, iterate n_mcs MCS, record observables.

    ``world_init``, if given, is applied to the freshly built World before
    any dynamics run (an experiment hook, e.g. for hand-set initial tables).
    ``snapshot_times`` dumps state/action grids at those MCS counts (0 means
    the initial configuration) into ``snapshot_dir``.
    """
    if engine not in ("fast", "reference"):
        raise ValueError(f"engine must be 'fast' or 'reference', got {engine!r}")
    snap = sorted(set(snapshot_times)) if snapshot_times else []
    if snap and snapshot_dir is None:
        raise ValueError("snapshot_times given without snapshot_dir")

    rng = job_rng(config.seed, cell_index, replica_index)
    world = build_world(config, rng)
    if world_init is not None:
        world_init(world)

    n = config.n_mcs
    f_c = np.empty(n)
    frac = np.empty((n, N_ACTION_KINDS))
    corr = np.full((n, N_ACTION_KINDS), np.nan)

    def maybe_dump(sim, t):
        if t in snap:
            dump_snapshot(sim, os.path.join(snapshot_dir, f"mcs{t:07d}"))

    if engine == "fast":
        state = ArrayState.from_world(world)
        maybe_dump(state, 0)
        done = 0
        boundaries = [t for t in snap if 0 < t <= n] + [n]
        for stop in sorted(set(boundaries)):
            if stop > done:
                advance(state, rng, stop - done, f_c, frac, corr, done)
                done = stop
            maybe_dump(state, stop)
    else:
        maybe_dump(world, 0)
        set_actions = [int(a) for a in config.action_set.actions]
        for m in range(n):
            mcs(world)
            f_c[m] = metrics.cooperator_fraction(world)
            frac[m] = metrics.action_fractions(world)
            for a in set_actions:
                corr[m, a] = metrics.state_action_correlation(world, ActionKind(a))
            maybe_dump(world, m + 1)

    tf = config.tail_fraction
    return RunResult(
        config=config, cell_index=cell_index, replica_index=replica_index,
        f_c=f_c, action_fractions=frac, correlations=corr,
        f_c_tail=tail_average(f_c, tf),
        action_tail=np.array([tail_average(frac[:, j], tf) for j in range(N_ACTION_KINDS)]),
        corr_tail=np.array([tail_nanmean(corr[:, j], tf) for j in range(N_ACTION_KINDS)]),
        final=state if engine == "fast" else world,
    )


def _stderr(values: np.ndarray) -> float:
    if len(values) < 2:
        return 0.0
    return float(np.std(values, ddof=1) / math.sqrt(len(values)))


def _nan_aware_mean(values: np.ndarray) -> np.ndarray:
    """Column means ignoring NaN; NaN where a column is all-NaN."""
    out = np.full(values.shape[1], np.nan)
    for j in range(values.shape[1]):
        col = values[:, j]
        good = col[~np.isnan(col)]
        if good.size:
            out[j] = good.mean()
    return out


@dataclass
class CellResult:
    """Replica-aggregated summary of one parameter cell."""

    cell_index: int
    config: SimConfig
    f_c_tails: np.ndarray    # (replicas,)
    action_tails: np.ndarray  # (replicas, 5)
    corr_tails: np.ndarray   # (replicas, 5)

    @property
    def replicas(self) -> int:
        return len(self.f_c_tails)

    @property
    def f_c_mean(self) -> float:
        return float(self.f_c_tails.mean())

    @property
    def f_c_stderr(self) -> float:
        return _stderr(self.f_c_tails)

    @property
    def action_mean(self) -> np.ndarray:
        return self.action_tails.mean(axis=0)

    @property
    def corr_mean(self) -> np.ndarray:
        return _nan_aware_mean(self.corr_tails)


def _aggregate(cell_index: int, config: SimConfig, runs: list[RunResult]) -> CellResult:
    return CellResult(
        cell_index=cell_index, config=config,
        f_c_tails=np.array([r.f_c_tail for r in runs]),
        action_tails=np.stack([r.action_tail for r in runs]),
        corr_tails=np.stack([r.corr_tail for r in runs]),
    )


def run_replicated(config: SimConfig, *, cell_index: int = 0, engine: str = "fast",
                   workers: int | None = None, world_init=None) -> CellResult:
    """``config.replicas`` independent runs with derived seeds, aggregated."""
    jobs = [(cell_index, r) for r in range(config.replicas)]
    results = _run_jobs({(cell_index): config}, jobs, engine, workers, world_init)
    runs = [results[(cell_index, r)] for r in range(config.replicas)]
    return _aggregate(cell_index, config, runs)


class SweepError(RuntimeError):
    """A sweep cell failed; carries the offending cell's identity."""


@dataclass
class SweepSpec:
    """Cartesian grid over any subset of (b, rho, p_d), replicated per cell.

    Cells are ordered by the product of the axis value lists taken in the
    fixed axis order (b, rho, p_d); the cell index is the position in that
    order and feeds the per-job seed derivation.
    """

    base: SimConfig
    axes: dict[str, list[float]]

    def __post_init__(self):
        if not self.axes:
            raise ValueError("sweep needs at least one axis")
        for name, values in self.axes.items():
            if name not in SWEEP_AXES:
                raise ValueError(f"unknown sweep axis {name!r}; choose from {SWEEP_AXES}")
            if not values:
                raise ValueError(f"sweep axis {name!r} has no values")

    def cell_configs(self) -> list[SimConfig]:
        """All cells, in deterministic order; invalid values reject here."""
        names = [a for a in SWEEP_AXES if a in self.axes]
        combos = itertools.product(*(self.axes[a] for a in names))
        return [dataclasses.replace(self.base, **dict(zip(names, combo)))
                for combo in combos]


def _run_jobs(configs_by_cell: dict[int, SimConfig], jobs, engine, workers, world_init):
    """Execute (cell, replica) jobs on a bounded pool; order-independent output."""
    def one(job):
        ci, ri = job
        return run_single(configs_by_cell[ci], cell_index=ci, replica_index=ri,
                          engine=engine, world_init=world_init)

    results = {}
    max_workers = workers or os.cpu_count() or 1
    if max_workers == 1:
        for job in jobs:
            try:
                results[job] = one(job)
            except Exception as exc:
                raise _sweep_error(job, configs_by_cell, exc) from exc
        return results
    with ThreadPoolExecutor(max_workers=max_workers) as pool:
        futures = {pool.submit(one, job): job for job in jobs}
        for fut, job in futures.items():
            try:
                results[job] = fut.result()
            except Exception as exc:
                raise _sweep_error(job, configs_by_cell, exc) from exc
    return results


def _sweep_error(job, configs_by_cell, exc):
    ci, ri = job
    cfg = configs_by_cell[ci]
    return SweepError(
        f"cell {ci} (b={cfg.b}, rho={cfg.rho}, p_d={cfg.p_d}), replica {ri} failed: {exc}")


def run_sweep(spec: SweepSpec, *, engine: str = "fast",
              workers: int | None = None) -> list[CellResult]:
    """All cells of the grid, each replicated; rows come back in cell order."""
    cells = spec.cell_configs()
    configs_by_cell = dict(enumerate(cells))
    jobs = [(ci, ri) for ci in range(len(cells)) for ri in range(cells[ci].replicas)]
    results = _run_jobs(configs_by_cell, jobs, engine, workers, None)
    out = []
    for ci, cfg in enumerate(cells):
        runs = [results[(ci, ri)] for ri in range(cfg.replicas)]
        out.append(_aggregate(ci, cfg, runs))
    return out


# -- persistence ----------------------------------------------------------

def _fmt(value) -> str:
    """Stable cell text: shortest round-trip float repr, empty for NaN."""
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    v = float(value)
    if math.isnan(v):
        return ""
    return repr(v)


def result_row(cell: CellResult) -> list[str]:
    cfg = cell.config
    am = cell.action_mean
    return [cfg.action_set.value, str(cfg.L), _fmt(cfg.rho), _fmt(cfg.b),
            _fmt(cfg.p_d), _fmt(cfg.alpha), _fmt(cfg.gamma), _fmt(cfg.epsilon),
            str(cfg.n_mcs), str(cell.replicas), _fmt(cell.f_c_mean),
            _fmt(cell.f_c_stderr)] + [_fmt(am[int(a)]) for a in ActionKind]


def write_results_csv(cells: list[CellResult], path: str) -> None:
    with open(path, "w") as fh:
        fh.write(",".join(RESULT_COLUMNS) + "\n")
        for cell in cells:
            fh.write(",".join(result_row(cell)) + "\n")


def write_series_csv(result: RunResult, path: str) -> None:
    """Flag-gated per-MCS time series of one run."""
    with open(path, "w") as fh:
        fh.write(",".join(SERIES_COLUMNS) + "\n")
        for m in range(len(result.f_c)):
            row = [str(m + 1), _fmt(result.f_c[m])]
            row += [_fmt(result.action_fractions[m, int(a)]) for a in ActionKind]
            row += [_fmt(result.correlations[m, int(a)]) for a in ActionKind]
            fh.write(",".join(row) + "\n")


def dump_snapshot(sim, path_prefix: str) -> tuple[str, str]:
    """Write aligned state and action grids as space-separated integer rows.

    State codes: 0 hole, 1 cooperator, 2 defector. Action codes: 0 hole,
    then 1..5 for C, D, M, B, P by the agent's last action.
    """
    paths = (path_prefix + ".state.txt", path_prefix + ".action.txt")
    for grid, path in zip((sim.state_grid(), sim.action_grid()), paths):
        with open(path, "w") as fh:
            for row in grid:
                fh.write(" ".join(str(int(v)) for v in row) + "\n")
    return paths


def load_grid(path: str) -> np.ndarray:
    return np.loadtxt(path, dtype=np.int64, ndmin=2)


def dump_qtables(sim, path: str) -> None:
    """One agent per line, its 2 x n table flattened row-major (C row first)."""
    if hasattr(sim, "q"):
        tables = sim.q
    else:
        tables = np.stack([a.qtable for a in sim.agents])
    with open(path, "w") as fh:
        for table in tables:
            fh.write(" ".join(repr(float(v)) for v in table.reshape(-1)) + "\n")


def build_manifest(kind: str, base_seed: int, cells: list[SimConfig],
                   extra: dict | None = None) -> dict:
    """Everything needed to reproduce a batch: per-job config and seed path."""
    manifest = {
        "kind": kind,
        "base_seed": base_seed,
        "jobs": [
            {"cell_index": ci, "replica_index": ri,
             "spawn_key": [ci, ri], **cfg.to_dict()}
            for ci, cfg in enumerate(cells)
            for ri in range(cfg.replicas)
        ],
    }
    if extra:
        manifest.update(extra)
    return manifest


def write_manifest(manifest: dict, path: str) -> None:
    with open(path, "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
