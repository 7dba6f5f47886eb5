import numpy as np

from latticepd.dynamics import Agent, World
from latticepd.game import PayoffParams, Strategy
from latticepd.lattice import Lattice
from latticepd.learning import ActionKind, ActionSet, LearningParams, zero_qtable


def world_from_rows(rows, *, action_set=ActionSet.STATIC, b=1.4, alpha=0.75,
                    gamma=0.8, epsilon=0.0, p_d=0.0, seed=0, **world_kwargs):
    """Build a World from strings like 'C.D' ('.' = hole).

    Handles are assigned in row-major scan order of the occupied cells, so
    tests can address agents deterministically.
    """
    L = len(rows)
    lattice = Lattice(L)
    agents = []
    has_cd = ActionKind.COOPERATE in action_set.actions
    handle = 0
    for r, row in enumerate(rows):
        assert len(row) == L, "rows must form a square grid"
        for c, ch in enumerate(row):
            if ch == ".":
                continue
            strat = Strategy.COOPERATE if ch == "C" else Strategy.DEFECT
            lattice.place(handle, (r, c))
            first = ActionKind(int(strat)) if has_cd else ActionKind.COPY_BEST
            agents.append(Agent(id=handle, strategy=strat, last_action=first,
                                last_payoff=0.0, qtable=zero_qtable(action_set)))
            handle += 1
    return World(lattice, agents, PayoffParams(b),
                 LearningParams(alpha, gamma, epsilon), action_set, p_d,
                 np.random.default_rng(seed), **world_kwargs)
