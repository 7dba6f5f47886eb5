"""Per-agent tabular Q-learning: action sets, epsilon-greedy choice, value update.

Each agent owns a 2 x n table: rows are the agent's strategy in the previous
round (cooperator row first), columns follow the action set's listed order.
Tables start at zero, which makes a fresh greedy choice a uniform tie-break.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum, IntEnum

import numpy as np

from .game import Strategy


class ActionKind(IntEnum):
    COOPERATE = 0
    DEFECT = 1
    MOVE = 2
    COPY_BEST = 3
    PERSIST = 4


class ActionSet(Enum):
    STATIC = "static"
    MOBILE = "mobile"
    BEST = "best"
    PERSIST_BEST = "persist_best"

    @property
    def actions(self) -> tuple[ActionKind, ...]:
        return _SET_ACTIONS[self]

    @property
    def n_actions(self) -> int:
        return len(_SET_ACTIONS[self])

    def column_of(self, action: ActionKind) -> int:
        """Q-table column of ``action``; raises if not admissible in this set."""
        try:
            return _SET_ACTIONS[self].index(action)
        except ValueError:
            raise ValueError(f"action {action.name} not in set {self.value}") from None


# Listed order is the Q-table column order.
_SET_ACTIONS = {
    ActionSet.STATIC: (ActionKind.COOPERATE, ActionKind.DEFECT),
    ActionSet.MOBILE: (ActionKind.COOPERATE, ActionKind.DEFECT, ActionKind.MOVE),
    ActionSet.BEST: (ActionKind.COPY_BEST, ActionKind.MOVE),
    ActionSet.PERSIST_BEST: (ActionKind.COPY_BEST, ActionKind.PERSIST, ActionKind.MOVE),
}


@dataclass(frozen=True)
class LearningParams:
    alpha: float = 0.75   # learning rate, (0, 1]
    gamma: float = 0.8    # discount factor, [0, 1)
    epsilon: float = 0.02  # exploration probability, [0, 1]

    def __post_init__(self):
        if not 0.0 < self.alpha <= 1.0:
            raise ValueError(f"alpha must be in (0, 1], got {self.alpha}")
        if not 0.0 <= self.gamma < 1.0:
            raise ValueError(f"gamma must be in [0, 1), got {self.gamma}")
        if not 0.0 <= self.epsilon <= 1.0:
            raise ValueError(f"epsilon must be in [0, 1], got {self.epsilon}")


def zero_qtable(action_set: ActionSet) -> np.ndarray:
    return np.zeros((2, action_set.n_actions))


def pick_index(u: float, n: int) -> int:
    """floor(u * n) clamped to n-1; the clamp guards the u -> 1^- rounding edge."""
    j = int(u * n)
    return n - 1 if j >= n else j


def select_action_from_uniforms(q: np.ndarray, state: Strategy, action_set: ActionSet,
                                params: LearningParams, u_explore: float,
                                u_action: float) -> tuple[ActionKind, bool]:
    """Epsilon-greedy choice driven by two externally supplied uniforms.

    Explores iff u_explore < epsilon, picking uniformly from the set.
    Otherwise takes an argmax of the state's row, ties broken uniformly at
    random among maximal entries (u_action is ignored for a unique argmax).
    Returns (action, explored).
    """
    acts = action_set.actions
    if u_explore < params.epsilon:
        return acts[pick_index(u_action, len(acts))], True
    row = q[int(state)]
    best = row.max()
    tied = np.flatnonzero(row == best)
    if len(tied) == 1:
        col = int(tied[0])
    else:
        col = int(tied[pick_index(u_action, len(tied))])
    return acts[col], False


def select_action(q: np.ndarray, state: Strategy, action_set: ActionSet,
                  params: LearningParams, rng: np.random.Generator) -> tuple[ActionKind, bool]:
    """Epsilon-greedy choice; always consumes exactly two uniforms from ``rng``."""
    u = rng.random(2)
    return select_action_from_uniforms(q, state, action_set, params, u[0], u[1])


def update_q(q: np.ndarray, state: Strategy, action: ActionKind, reward: float,
             next_state: Strategy, params: LearningParams,
             action_set: ActionSet) -> np.ndarray:
    """Value update: Q[s,a] <- (1-alpha) Q[s,a] + alpha (reward + gamma max Q[s',:]).

    Mutates exactly one entry of ``q`` and returns it. The max is taken over
    the next-state row of the table as it stood before the write.
    """
    if not math.isfinite(reward):
        raise ValueError(f"reward must be finite, got {reward}")
    col = action_set.column_of(action)
    s = int(state)
    future = q[int(next_state)].max()
    q[s, col] = (1.0 - params.alpha) * q[s, col] + params.alpha * (reward + params.gamma * future)
    return q
