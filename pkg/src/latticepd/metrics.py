"""Observables: cooperator fraction, action populations, correlations, tails.

All observables are read-only functions over a simulation snapshot. Both
engines expose ``strategy_array`` / ``last_action_array`` properties, so
every function here works on either. Holes are excluded everywhere: the
population is the set of players, never the full grid.
"""

from __future__ import annotations

import math

import numpy as np

from .learning import ActionKind

N_ACTION_KINDS = len(ActionKind)


def binary_pearson(n: int, cx: int, cy: int, cxy: int) -> float:
    """Pearson correlation of two binary indicators from their counts.

    n observations, cx ones in x, cy ones in y, cxy joint ones. Returns NaN
    when either indicator is constant. Integer arithmetic until the final
    division, so any two implementations of the same counts agree bitwise.
    """
    num = n * cxy - cx * cy
    var_x = n * cx - cx * cx
    var_y = n * cy - cy * cy
    if var_x == 0 or var_y == 0:
        return math.nan
    return num / math.sqrt(var_x * var_y)


def cooperator_fraction(sim) -> float:
    """Fraction of players currently cooperating."""
    strategies = sim.strategy_array
    n = len(strategies)
    if n < 1:
        raise ValueError("cooperator_fraction needs at least one player")
    return int(np.count_nonzero(strategies == 0)) / n


def action_fractions(sim) -> np.ndarray:
    """Population fraction per action kind (length 5, indexed by ActionKind)."""
    last = sim.last_action_array
    n = len(last)
    if n < 1:
        raise ValueError("action_fractions needs at least one player")
    counts = np.bincount(last, minlength=N_ACTION_KINDS)
    return counts / n


def state_action_correlation(sim, action: ActionKind) -> float:
    """Pearson correlation between cooperating and having last chosen ``action``.

    Computed over players (holes excluded) with 0/1 indicators; NaN when
    either indicator is constant.
    """
    strategies = sim.strategy_array
    last = sim.last_action_array
    n = len(strategies)
    if n < 2:
        raise ValueError("correlation needs at least two players")
    x = strategies == 0
    y = last == int(action)
    return binary_pearson(n, int(np.count_nonzero(x)), int(np.count_nonzero(y)),
                          int(np.count_nonzero(x & y)))


def tail_average(series, fraction: float) -> float:
    """Mean of the last ceil(fraction * len) entries; the steady-state estimate."""
    arr = np.asarray(series, dtype=float)
    if arr.size == 0:
        raise ValueError("tail_average of an empty series")
    if not 0.0 < fraction <= 1.0:
        raise ValueError(f"fraction must be in (0, 1], got {fraction}")
    k = math.ceil(fraction * arr.size)
    return float(arr[-k:].mean())


def tail_nanmean(series, fraction: float) -> float:
    """tail_average that ignores NaNs; NaN if the whole tail is undefined."""
    arr = np.asarray(series, dtype=float)
    if arr.size == 0:
        raise ValueError("tail_nanmean of an empty series")
    k = math.ceil(fraction * arr.size)
    tail = arr[-k:]
    good = tail[~np.isnan(tail)]
    if good.size == 0:
        return math.nan
    return float(good.mean())
