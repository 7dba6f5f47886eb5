"""Weak prisoner's dilemma payoffs: R=1, T=b in (1,2), S=P=0."""

from __future__ import annotations

from dataclasses import dataclass
from enum import IntEnum

import numpy as np

from .lattice import Lattice, neighbors


class Strategy(IntEnum):
    COOPERATE = 0
    DEFECT = 1


@dataclass(frozen=True)
class PayoffParams:
    """Single free parameter b, the temptation to defect.

    1 < b < 2 keeps T > R > P = S and 2R > T + S.
    """

    b: float = 1.4

    def __post_init__(self):
        if not 1.0 < self.b < 2.0:
            raise ValueError(f"b must be in (1, 2), got {self.b}")

    def matrix(self) -> np.ndarray:
        return np.array([[1.0, 0.0], [self.b, 0.0]])


def pair_payoff(mine: Strategy, theirs: Strategy, params: PayoffParams) -> float:
    """Row player's payoff: (C,C)->1, (C,D)->0, (D,C)->b, (D,D)->0."""
    if mine == Strategy.COOPERATE:
        return 1.0 if theirs == Strategy.COOPERATE else 0.0
    return params.b if theirs == Strategy.COOPERATE else 0.0


def site_payoff(lattice: Lattice, strategies, site: tuple[int, int],
                params: PayoffParams) -> float:
    """Total payoff of the agent at ``site`` against its occupied neighbours.

    ``strategies`` is indexable by agent handle. Empty neighbours contribute
    nothing (they are skipped, not treated as zero-payoff opponents); an
    isolated agent earns 0. Payoffs are per-round quantities, computed fresh
    each interaction.
    """
    me = lattice.agent_at(site)
    if me is None:
        raise ValueError(f"site_payoff: site {site} is empty")
    mine = strategies[me]
    total = 0.0
    for nb in neighbors(site, lattice.side_length):
        h = lattice.agent_at(nb)
        if h is not None:
            total += pair_payoff(mine, strategies[h], params)
    return total
