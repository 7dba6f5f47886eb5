"""Action semantics and the asynchronous Monte Carlo scheduler (reference engine).

One sample step: draw a player uniformly at random (with replacement across
samples), let it choose epsilon-greedily from its action set, execute the
action, and — unless the sample was skipped — apply the value update and
commit the resulting strategy. A Monte Carlo step (MCS) is L^2 sample steps,
regardless of how many players there are, so at density rho a given player
acts 1/rho times per MCS on average.

Action semantics:
  C/D  adopt that strategy, then play a round at the current site.
  M    with probability p_d and at least one vacant neighbour, relocate to a
       uniformly chosen vacant neighbour and play a round there. A failed
       attempt plays no game and moves nothing; by default it still feeds a
       zero reward to the value update (move_failure_mode=1), teaching the
       agent that blocked movement pays nothing. Modes 0 (skip the update
       entirely) and 2 (update with the stored payoff) are available.
  B    adopt the strategy of the best member of {self} + occupied
       neighbours (ties prefer self; tied neighbours are drawn uniformly),
       then play a round at the current site. Candidates are ranked by a
       fresh payoff evaluation of the current configuration by default;
       copy_best_fresh=False ranks by stored last-game payoffs instead.
  P    keep strategy and position, play no round; the stored payoff is fed
       to the value update as the reward (persist_reward selects stored,
       fresh or zero).

Every sample step consumes exactly DRAWS_PER_STEP uniforms in a fixed slot
order (player pick, explore, action/tie, move success, vacancy/best tie);
slots irrelevant to the branch taken are discarded. The numba kernel
consumes the same stream the same way, so both engines produce bit-identical
trajectories from the same seed.

This implementation favours clarity and contract checks; `kernel` holds the
array-based fast path used for production runs.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .game import PayoffParams, Strategy, site_payoff
from .lattice import Lattice, build_lattice, neighbors
from .learning import (
    ActionKind,
    ActionSet,
    LearningParams,
    pick_index,
    select_action_from_uniforms,
    update_q,
    zero_qtable,
)

DRAWS_PER_STEP = 5

SKIPPED = object()  # sentinel outcome of a failed move


@dataclass
class Agent:
    id: int
    strategy: Strategy
    last_action: ActionKind
    last_payoff: float = 0.0
    qtable: np.ndarray = field(default=None)  # (2, n) matrix, zeros at birth


class _StrategyView:
    """Read-only handle -> Strategy mapping over the agent list."""

    def __init__(self, agents):
        self._agents = agents

    def __getitem__(self, handle: int) -> Strategy:
        return self._agents[handle].strategy


class World:
    """A lattice, its agents, the run parameters, and one private RNG stream."""

    def __init__(self, lattice: Lattice, agents: list[Agent], payoff: PayoffParams,
                 learn: LearningParams, action_set: ActionSet, p_d: float,
                 rng: np.random.Generator, move_failure_mode: int = 1,
                 persist_reward: int = 0,
                 copy_best_fresh: bool = True,
                 copy_best_include_self: bool = True,
                 copy_best_play_first: bool = False):
        if not 0.0 <= p_d <= 1.0:
            raise ValueError(f"p_d must be in [0, 1], got {p_d}")
        self.lattice = lattice
        self.agents = agents
        self.payoff = payoff
        self.learn = learn
        self.action_set = action_set
        self.p_d = p_d
        self.rng = rng
        self.move_failure_mode = move_failure_mode
        self.persist_reward = persist_reward
        self.copy_best_fresh = copy_best_fresh
        self.copy_best_include_self = copy_best_include_self
        self.copy_best_play_first = copy_best_play_first
        self.mcs_clock = 0
        self.samples_run = 0
        self._strategies = _StrategyView(agents)

    @classmethod
    def build(cls, *, L: int, rho: float, b: float, alpha: float, gamma: float,
              epsilon: float, p_d: float, action_set: ActionSet,
              rng: np.random.Generator, init_mode: str = "random",
              move_failure_mode: int = 1, persist_reward: int = 0,
              copy_best_fresh: bool = True,
              copy_best_include_self: bool = True,
              copy_best_play_first: bool = False) -> "World":
        """Standard initialization: random placement, random or striped roles.

        Striped mode assigns the first role by the parity of the row band
        (ten horizontal bands), an approximation of banded starting patterns;
        random mode flips an independent fair coin per agent.
        """
        lattice = build_lattice(L, rho, rng)
        n = lattice.player_count
        if n < 1:
            raise ValueError(f"no players: rho={rho} rounds to zero agents on L={L}")
        if init_mode == "random":
            coins = rng.random(n)
            roles = [Strategy.COOPERATE if u < 0.5 else Strategy.DEFECT for u in coins]
        elif init_mode == "striped":
            roles = []
            for handle in range(n):
                row = lattice.site_of[handle][0]
                band = (row * 10) // L
                roles.append(Strategy.COOPERATE if band % 2 == 0 else Strategy.DEFECT)
        else:
            raise ValueError(f"init_mode must be 'random' or 'striped', got {init_mode!r}")

        has_cd = ActionKind.COOPERATE in action_set.actions
        agents = []
        for handle in range(n):
            first_action = ActionKind(int(roles[handle])) if has_cd else ActionKind.COPY_BEST
            agents.append(Agent(id=handle, strategy=roles[handle],
                                last_action=first_action, last_payoff=0.0,
                                qtable=zero_qtable(action_set)))
        return cls(lattice, agents, PayoffParams(b),
                   LearningParams(alpha, gamma, epsilon), action_set, p_d, rng,
                   move_failure_mode=move_failure_mode,
                   persist_reward=persist_reward,
                   copy_best_fresh=copy_best_fresh,
                   copy_best_include_self=copy_best_include_self,
                   copy_best_play_first=copy_best_play_first)

    # -- observable views ------------------------------------------------

    @property
    def strategy_array(self) -> np.ndarray:
        return np.array([int(a.strategy) for a in self.agents], dtype=np.int8)

    @property
    def last_action_array(self) -> np.ndarray:
        return np.array([int(a.last_action) for a in self.agents], dtype=np.int8)

    def state_grid(self) -> np.ndarray:
        """L x L integer grid: 0 = hole, 1 = cooperator, 2 = defector."""
        L = self.lattice.side_length
        out = np.zeros((L, L), dtype=np.int64)
        for handle, site in self.lattice.site_of.items():
            out[site] = int(self.agents[handle].strategy) + 1
        return out

    def action_grid(self) -> np.ndarray:
        """L x L integer grid: 0 = hole, then 1..5 = C, D, M, B, P by last action."""
        L = self.lattice.side_length
        out = np.zeros((L, L), dtype=np.int64)
        for handle, site in self.lattice.site_of.items():
            out[site] = int(self.agents[handle].last_action) + 1
        return out

    def audit(self) -> None:
        self.lattice.audit()
        assert len(self.agents) == self.lattice.player_count

    def _play(self, site: tuple[int, int]) -> float:
        return site_payoff(self.lattice, self._strategies, site, self.payoff)


@dataclass
class StepRecord:
    agent: int
    action: ActionKind
    explored: bool
    skipped: bool
    reward: float
    next_state: Strategy


# -- the four actions ----------------------------------------------------

def act_strategy(world: World, handle: int, chosen: Strategy) -> tuple[float, Strategy]:
    """Adopt ``chosen`` and play a round at the current site."""
    agent = world.agents[handle]
    agent.strategy = chosen
    payoff = world._play(world.lattice.site_of[handle])
    agent.last_payoff = payoff
    return payoff, chosen


def act_move(world: World, handle: int, u_success: float, u_pick: float):
    """Attempt a diffusive move; returns (reward, next_state) or SKIPPED.

    The move happens only when the success draw clears p_d AND a vacant
    neighbour exists; the mover then plays a round at the new site with its
    unchanged strategy. A failed attempt skips the entire sample.
    """
    if not u_success < world.p_d:
        return SKIPPED
    agent = world.agents[handle]
    src = world.lattice.site_of[handle]
    vacancies = world.lattice.vacant_neighbors(src)
    if not vacancies:
        return SKIPPED
    dst = vacancies[pick_index(u_pick, len(vacancies))]
    world.lattice.relocate(src, dst)
    payoff = world._play(dst)
    agent.last_payoff = payoff
    return payoff, agent.strategy


def act_copy_best(world: World, handle: int, u_tie: float) -> tuple[float, Strategy]:
    """Adopt the strategy of the best player in the neighbourhood (self
    included, ties prefer self), then play a round at the current site.

    By default each candidate's payoff is evaluated fresh from the current
    configuration — a pure comparison, no games are played for it and nobody
    earns a learning signal from it. With ``world.copy_best_fresh`` off, the
    stored payoffs from the candidates' own last games are compared instead.
    """
    agent = world.agents[handle]
    site = world.lattice.site_of[handle]

    def payoff_of(h: int) -> float:
        if world.copy_best_fresh:
            return world._play(world.lattice.site_of[h])
        return world.agents[h].last_payoff

    if world.copy_best_include_self:
        best = payoff_of(handle)
    else:
        best = -1.0  # any occupied neighbour beats this
    tied: list[int] = []  # neighbour handles at the current best, (N,S,W,E) order
    for nb in neighbors(site, world.lattice.side_length):
        h = world.lattice.agent_at(nb)
        if h is None:
            continue
        p = payoff_of(h)
        if p > best:
            best = p
            tied = [h]
        elif tied and p == best:
            tied.append(h)
    if not tied:
        adopted = agent.strategy
    elif len(tied) == 1:
        adopted = world.agents[tied[0]].strategy
    else:
        adopted = world.agents[tied[pick_index(u_tie, len(tied))]].strategy
    if world.copy_best_play_first:
        payoff = world._play(site)  # round played with the old strategy
        agent.strategy = adopted
    else:
        agent.strategy = adopted
        payoff = world._play(site)
    agent.last_payoff = payoff
    return payoff, adopted


def act_persist(world: World, handle: int) -> tuple[float, Strategy]:
    """Keep strategy and position; play no round.

    The reward fed to the value update is, per world.persist_reward: the
    stored payoff from the agent's own last game (0), a fresh evaluation
    of the current neighbourhood without storing it (1), or zero (2).
    """
    agent = world.agents[handle]
    if world.persist_reward == 0:
        reward = agent.last_payoff
    elif world.persist_reward == 1:
        reward = world._play(world.lattice.site_of[handle])
    else:
        reward = 0.0
    return reward, agent.strategy


# -- scheduler -----------------------------------------------------------

def sample_step(world: World) -> StepRecord:
    """One asynchronous update; consumes exactly DRAWS_PER_STEP uniforms."""
    u = world.rng.random(DRAWS_PER_STEP)
    return sample_step_from_uniforms(world, u)


def sample_step_from_uniforms(world: World, u: np.ndarray) -> StepRecord:
    n = world.lattice.player_count
    if n < 1:
        raise ValueError("sample_step needs at least one player")
    handle = pick_index(u[0], n)
    agent = world.agents[handle]
    state = agent.strategy
    action, explored = select_action_from_uniforms(
        agent.qtable, state, world.action_set, world.learn, u[1], u[2])

    skipped = False
    if action in (ActionKind.COOPERATE, ActionKind.DEFECT):
        reward, next_state = act_strategy(world, handle, Strategy(int(action)))
    elif action is ActionKind.MOVE:
        outcome = act_move(world, handle, u[3], u[4])
        if outcome is SKIPPED:
            skipped = True
            reward, next_state = 0.0, state
        else:
            reward, next_state = outcome
    elif action is ActionKind.COPY_BEST:
        reward, next_state = act_copy_best(world, handle, u[4])
    else:
        reward, next_state = act_persist(world, handle)

    if not skipped:
        update_q(agent.qtable, state, action, reward, next_state,
                 world.learn, world.action_set)
        agent.strategy = next_state
        agent.last_action = action
    elif world.move_failure_mode != 0:
        # Alternative readings of a failed move: still learn, with either a
        # zero reward (mode 1) or the stored payoff (mode 2), state unchanged.
        r_skip = 0.0 if world.move_failure_mode == 1 else agent.last_payoff
        update_q(agent.qtable, state, action, r_skip, state,
                 world.learn, world.action_set)

    world.samples_run += 1
    return StepRecord(agent=handle, action=action, explored=explored,
                      skipped=skipped, reward=reward, next_state=next_state)


def mcs(world: World) -> World:
    """One Monte Carlo step: exactly L^2 sample steps."""
    for _ in range(world.lattice.side_length ** 2):
        sample_step(world)
    world.mcs_clock += 1
    return world
