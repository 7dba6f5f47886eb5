import math
from dataclasses import dataclass

import numpy as np
import pytest

from conftest import world_from_rows

from latticepd.harness import SimConfig, build_world, job_rng
from latticepd.learning import ActionKind, ActionSet
from latticepd.metrics import (
    action_fractions,
    binary_pearson,
    cooperator_fraction,
    state_action_correlation,
    tail_average,
    tail_nanmean,
)

B, M, P = ActionKind.COPY_BEST, ActionKind.MOVE, ActionKind.PERSIST


@dataclass
class FakeSim:
    strategy_array: np.ndarray
    last_action_array: np.ndarray


def sim(strats, actions):
    return FakeSim(np.array(strats, dtype=np.int8),
                   np.array([int(a) for a in actions], dtype=np.int8))


def test_cooperator_fraction_examples():
    assert cooperator_fraction(sim([0, 0, 0], [B] * 3)) == 1.0
    assert cooperator_fraction(sim([0, 0, 0, 1], [B] * 4)) == 0.75
    assert cooperator_fraction(sim([1, 1], [B, M])) == 0.0


def test_cooperator_fraction_empty_world_is_contract_failure():
    with pytest.raises(ValueError):
        cooperator_fraction(sim([], []))


def test_cooperator_fraction_matches_naive_scan_on_random_worlds():
    for seed in range(10):
        cfg = SimConfig(action_set=ActionSet.MOBILE, rho=0.55, seed=seed, L=12,
                        n_mcs=1, replicas=1)
        world = build_world(cfg, job_rng(seed))
        naive = sum(1 for a in world.agents if int(a.strategy) == 0) / len(world.agents)
        assert cooperator_fraction(world) == naive


def test_action_fractions_sum_to_one():
    s = sim([0, 1, 0, 1, 1], [B, B, M, M, P])
    frac = action_fractions(s)
    assert frac.sum() == pytest.approx(1.0)
    assert frac[int(B)] == pytest.approx(0.4)
    assert frac[int(P)] == pytest.approx(0.2)


def test_correlation_perfectly_aligned():
    s = sim([0, 0, 1, 1], [B, B, M, M])  # every C chose B, every D chose M
    assert state_action_correlation(s, B) == pytest.approx(1.0)
    assert state_action_correlation(s, M) == pytest.approx(-1.0)


def test_correlation_anti_aligned():
    s = sim([0, 0, 1, 1], [M, M, B, B])
    assert state_action_correlation(s, B) == pytest.approx(-1.0)


def test_correlation_undefined_when_indicator_constant():
    s = sim([0, 1, 0], [B, B, B])
    assert math.isnan(state_action_correlation(s, B))
    s = sim([0, 0, 0], [B, M, B])  # constant state side
    assert math.isnan(state_action_correlation(s, B))


def test_correlation_matches_covariance_oracle():
    rng = np.random.default_rng(31)
    for _ in range(500):
        n = int(rng.integers(2, 60))
        x = rng.integers(0, 2, size=n)
        y = rng.integers(0, 2, size=n)
        got = binary_pearson(n, int(x.sum()), int(y.sum()), int((x & y).sum()))
        if len(set(x)) == 1 or len(set(y)) == 1:
            assert math.isnan(got)
            continue
        expected = np.corrcoef(x, y)[0, 1]
        assert got == pytest.approx(expected, abs=1e-12)
        # Pearson is invariant under affine rescaling of either variable
        assert np.corrcoef(x, 3.7 * y + 11.0)[0, 1] == pytest.approx(expected, abs=1e-12)
        # simultaneous relabeling of both indicators preserves the value
        flipped = binary_pearson(n, int((1 - x).sum()), int((1 - y).sum()),
                                 int(((1 - x) & (1 - y)).sum()))
        assert flipped == pytest.approx(got, abs=1e-12)


def test_two_action_correlations_are_exact_negations():
    rng = np.random.default_rng(33)
    for _ in range(200):
        n = int(rng.integers(2, 40))
        strats = rng.integers(0, 2, size=n)
        acts = np.where(rng.integers(0, 2, size=n) == 0, int(B), int(M))
        s = FakeSim(strats.astype(np.int8), acts.astype(np.int8))
        cb = state_action_correlation(s, B)
        cm = state_action_correlation(s, M)
        if not (math.isnan(cb) or math.isnan(cm)):
            assert cb == -cm


def test_correlation_population_excludes_holes():
    # a heavily diluted world: the correlation must see only the 4 players
    w = world_from_rows(["C...D", ".....", "..C..", ".....", "D...."],
                        action_set=ActionSet.BEST)
    w.agents[0].last_action = B
    w.agents[1].last_action = M
    w.agents[2].last_action = B
    w.agents[3].last_action = M
    assert state_action_correlation(w, B) == pytest.approx(1.0)


def test_tail_average_examples():
    assert tail_average([0, 0, 0, 1, 1], 0.4) == 1.0
    assert tail_average([2.5] * 7, 0.3) == 2.5
    assert tail_average([1, 2, 3, 4], 1.0) == 2.5


def test_tail_average_uses_ceiling():
    # 0.25 of 5 entries -> ceil(1.25) = 2 entries
    assert tail_average([0, 0, 0, 2, 4], 0.25) == 3.0


def test_tail_average_contract_failures():
    with pytest.raises(ValueError):
        tail_average([], 0.5)
    with pytest.raises(ValueError):
        tail_average([1.0], 0.0)


def test_tail_nanmean():
    assert tail_nanmean([0.0, 1.0, math.nan, 3.0], 0.75) == pytest.approx(2.0)
    assert math.isnan(tail_nanmean([1.0, math.nan, math.nan], 0.5))
