"""Array-based fast engine (numba) for production-size runs.

Mirrors `dynamics` exactly: same five-uniform slot protocol per sample step,
same scan orders, same tie rules, same float expressions. The equivalence
tests pin the two engines to bit-identical trajectories, so any semantic
change must land in both.

The kernel never generates randomness itself; the caller feeds it the
uniform stream in per-chunk buffers (5 * L^2 doubles per MCS), which keeps
the stream position identical to an engine that draws five uniforms per
step directly.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit

from .dynamics import DRAWS_PER_STEP, World
from .learning import ActionSet
from .metrics import N_ACTION_KINDS

DEFAULT_CHUNK = 64  # MCS per kernel call; 5*L^2*chunk doubles buffered


def neighbor_table(L: int) -> np.ndarray:
    """(L^2, 4) flat neighbour indices in (N, S, W, E) order."""
    out = np.empty((L * L, 4), dtype=np.int64)
    for r in range(L):
        for c in range(L):
            s = r * L + c
            out[s, 0] = ((r - 1) % L) * L + c
            out[s, 1] = ((r + 1) % L) * L + c
            out[s, 2] = r * L + (c - 1) % L
            out[s, 3] = r * L + (c + 1) % L
    return out


@dataclass
class ArrayState:
    """Flat mirror of a World: everything the kernel touches, nothing else."""

    L: int
    action_set: ActionSet
    site_agent: np.ndarray   # (L^2,) agent handle or -1
    agent_site: np.ndarray   # (n,) flat site per handle
    strategy: np.ndarray     # (n,) int8, 0=C 1=D
    last_payoff: np.ndarray  # (n,) float64
    last_action: np.ndarray  # (n,) int8, global action codes
    q: np.ndarray            # (n, 2, n_actions) float64
    nbrs: np.ndarray         # neighbor_table(L)
    b: float
    alpha: float
    gamma: float
    epsilon: float
    p_d: float
    move_failure_mode: int
    persist_reward: int
    copy_best_fresh: bool
    copy_best_include_self: bool
    copy_best_play_first: bool
    mcs_clock: int = 0

    @classmethod
    def from_world(cls, world: World) -> "ArrayState":
        L = world.lattice.side_length
        n = world.lattice.player_count
        site_agent = np.full(L * L, -1, dtype=np.int64)
        agent_site = np.empty(n, dtype=np.int64)
        for handle, (r, c) in world.lattice.site_of.items():
            site_agent[r * L + c] = handle
            agent_site[handle] = r * L + c
        q = np.stack([a.qtable for a in world.agents]).astype(np.float64)
        return cls(L=L, action_set=world.action_set, site_agent=site_agent,
                   agent_site=agent_site, strategy=world.strategy_array.copy(),
                   last_payoff=np.array([a.last_payoff for a in world.agents]),
                   last_action=world.last_action_array.copy(), q=q,
                   nbrs=neighbor_table(L), b=world.payoff.b,
                   alpha=world.learn.alpha, gamma=world.learn.gamma,
                   epsilon=world.learn.epsilon, p_d=world.p_d,
                   move_failure_mode=world.move_failure_mode,
                   persist_reward=world.persist_reward,
                   copy_best_fresh=world.copy_best_fresh,
                   copy_best_include_self=world.copy_best_include_self,
                   copy_best_play_first=world.copy_best_play_first,
                   mcs_clock=world.mcs_clock)

    @property
    def strategy_array(self) -> np.ndarray:
        return self.strategy

    @property
    def last_action_array(self) -> np.ndarray:
        return self.last_action

    @property
    def player_count(self) -> int:
        return len(self.agent_site)

    def state_grid(self) -> np.ndarray:
        """L x L integer grid: 0 = hole, 1 = cooperator, 2 = defector."""
        L = self.L
        out = np.zeros(L * L, dtype=np.int64)
        occ = self.site_agent >= 0
        out[occ] = self.strategy[self.site_agent[occ]].astype(np.int64) + 1
        return out.reshape(L, L)

    def action_grid(self) -> np.ndarray:
        """L x L integer grid: 0 = hole, then 1..5 = C, D, M, B, P by last action."""
        L = self.L
        out = np.zeros(L * L, dtype=np.int64)
        occ = self.site_agent >= 0
        out[occ] = self.last_action[self.site_agent[occ]].astype(np.int64) + 1
        return out.reshape(L, L)

    def act_codes(self) -> np.ndarray:
        return np.array([int(a) for a in self.action_set.actions], dtype=np.int8)

    def audit(self) -> None:
        occ = np.flatnonzero(self.site_agent >= 0)
        assert len(occ) == self.player_count, "occupancy count drifted"
        assert np.array_equal(self.agent_site[self.site_agent[occ]], occ), \
            "site<->agent maps disagree"


@njit(cache=True, nogil=True, inline="always")
def _pick(u, n):
    # floor(u*n) clamped; mirrors learning.pick_index
    j = int(u * n)
    if j >= n:
        j = n - 1
    return j


@njit(cache=True, nogil=True, inline="always")
def _play(site, me_strat, site_agent, strategy, nbrs, b):
    # Payoff of one round at `site`: sum over occupied (N,S,W,E) neighbours.
    # Only a cooperating neighbour pays: 1 to a cooperator, b to a defector.
    total = 0.0
    for d in range(4):
        h = site_agent[nbrs[site, d]]
        if h >= 0 and strategy[h] == 0:
            total += 1.0 if me_strat == 0 else b
    return total


@njit(cache=True, nogil=True)
def _run_chunk(site_agent, agent_site, strategy, last_payoff, last_action, q,
               nbrs, act_codes, b, alpha, gamma, epsilon, p_d,
               move_failure_mode, persist_reward, copy_best_fresh,
               copy_best_include_self, copy_best_play_first,
               u, k_mcs, fc_out, frac_out, corr_out, out_base):
    n_players = agent_site.shape[0]
    n_act = act_codes.shape[0]
    steps_per_mcs = site_agent.shape[0]
    vac = np.empty(4, dtype=np.int64)
    tied = np.empty(4, dtype=np.int64)
    counts = np.empty(N_ACTION_KINDS, dtype=np.int64)
    joint = np.empty(N_ACTION_KINDS, dtype=np.int64)
    pos = 0

    for m in range(k_mcs):
        for _ in range(steps_per_mcs):
            u0 = u[pos]
            u1 = u[pos + 1]
            u2 = u[pos + 2]
            u3 = u[pos + 3]
            u4 = u[pos + 4]
            pos += DRAWS_PER_STEP

            k = _pick(u0, n_players)
            s = strategy[k]

            # epsilon-greedy over the state row; greedy ties are uniform
            if u1 < epsilon:
                col = _pick(u2, n_act)
            else:
                best_q = q[k, s, 0]
                for j in range(1, n_act):
                    if q[k, s, j] > best_q:
                        best_q = q[k, s, j]
                n_ties = 0
                col = 0
                for j in range(n_act):
                    if q[k, s, j] == best_q:
                        if n_ties == 0:
                            col = j
                        n_ties += 1
                if n_ties > 1:
                    t = _pick(u2, n_ties)
                    c = -1
                    for j in range(n_act):
                        if q[k, s, j] == best_q:
                            c += 1
                            if c == t:
                                col = j
                                break
            a = act_codes[col]

            site = agent_site[k]
            skipped = False
            reward = 0.0
            next_s = s

            if a <= 1:  # cooperate / defect: codes match strategies
                strategy[k] = a
                pay = _play(site, a, site_agent, strategy, nbrs, b)
                last_payoff[k] = pay
                reward = pay
                next_s = a
            elif a == 2:  # move
                if u3 < p_d:
                    nv = 0
                    for d in range(4):
                        nb = nbrs[site, d]
                        if site_agent[nb] < 0:
                            vac[nv] = nb
                            nv += 1
                    if nv > 0:
                        dst = vac[_pick(u4, nv)]
                        site_agent[site] = -1
                        site_agent[dst] = k
                        agent_site[k] = dst
                        pay = _play(dst, s, site_agent, strategy, nbrs, b)
                        last_payoff[k] = pay
                        reward = pay
                    else:
                        skipped = True
                else:
                    skipped = True
            elif a == 3:  # copy the best player in the neighbourhood
                self_fresh = _play(site, s, site_agent, strategy, nbrs, b)
                if copy_best_include_self:
                    if copy_best_fresh:
                        best_p = self_fresh
                    else:
                        best_p = last_payoff[k]
                else:
                    best_p = -1.0  # any occupied neighbour beats this
                n_tied = 0  # stays 0 while self holds the best (prefer self)
                for d in range(4):
                    h = site_agent[nbrs[site, d]]
                    if h >= 0:
                        if copy_best_fresh:
                            p = _play(agent_site[h], strategy[h], site_agent,
                                      strategy, nbrs, b)
                        else:
                            p = last_payoff[h]
                        if p > best_p:
                            best_p = p
                            tied[0] = h
                            n_tied = 1
                        elif n_tied > 0 and p == best_p:
                            tied[n_tied] = h
                            n_tied += 1
                if n_tied == 0:
                    new_s = s
                elif n_tied == 1:
                    new_s = strategy[tied[0]]
                else:
                    new_s = strategy[tied[_pick(u4, n_tied)]]
                if copy_best_play_first:
                    pay = self_fresh  # the round was played with the old strategy
                    strategy[k] = new_s
                else:
                    strategy[k] = new_s
                    pay = _play(site, new_s, site_agent, strategy, nbrs, b)
                last_payoff[k] = pay
                reward = pay
                next_s = new_s
            else:  # persist: no game is played
                if persist_reward == 0:
                    reward = last_payoff[k]
                elif persist_reward == 1:
                    reward = _play(site, s, site_agent, strategy, nbrs, b)
                else:
                    reward = 0.0

            if not skipped:
                future = q[k, next_s, 0]
                for j in range(1, n_act):
                    if q[k, next_s, j] > future:
                        future = q[k, next_s, j]
                q[k, s, col] = (1.0 - alpha) * q[k, s, col] + alpha * (reward + gamma * future)
                strategy[k] = next_s
                last_action[k] = a
            elif move_failure_mode != 0:
                r_skip = 0.0 if move_failure_mode == 1 else last_payoff[k]
                future = q[k, s, 0]
                for j in range(1, n_act):
                    if q[k, s, j] > future:
                        future = q[k, s, j]
                q[k, s, col] = (1.0 - alpha) * q[k, s, col] + alpha * (r_skip + gamma * future)

        # per-MCS observables, one pass over the players
        n_coop = 0
        for j in range(N_ACTION_KINDS):
            counts[j] = 0
            joint[j] = 0
        for i in range(n_players):
            la = last_action[i]
            counts[la] += 1
            if strategy[i] == 0:
                n_coop += 1
                joint[la] += 1
        row = out_base + m
        fc_out[row] = n_coop / n_players
        for j in range(N_ACTION_KINDS):
            frac_out[row, j] = counts[j] / n_players
        for c5 in range(n_act):
            a5 = act_codes[c5]
            num = n_players * joint[a5] - n_coop * counts[a5]
            var_x = n_players * n_coop - n_coop * n_coop
            var_y = n_players * counts[a5] - counts[a5] * counts[a5]
            if var_x == 0 or var_y == 0:
                corr_out[row, a5] = np.nan
            else:
                corr_out[row, a5] = num / np.sqrt(var_x * var_y)

    return pos


def advance(state: ArrayState, rng: np.random.Generator, n_mcs: int,
            fc_out: np.ndarray, frac_out: np.ndarray, corr_out: np.ndarray,
            out_base: int, chunk: int = DEFAULT_CHUNK) -> None:
    """Run ``n_mcs`` Monte Carlo steps, recording observables per MCS.

    Output rows [out_base, out_base + n_mcs) are filled; correlations of
    actions outside the set stay NaN.
    """
    act_codes = state.act_codes()
    steps = state.L * state.L
    done = 0
    while done < n_mcs:
        k = min(chunk, n_mcs - done)
        u = rng.random(DRAWS_PER_STEP * steps * k)
        _run_chunk(state.site_agent, state.agent_site, state.strategy,
                   state.last_payoff, state.last_action, state.q,
                   state.nbrs, act_codes, state.b, state.alpha, state.gamma,
                   state.epsilon, state.p_d, state.move_failure_mode,
                   state.persist_reward, state.copy_best_fresh,
                   state.copy_best_include_self, state.copy_best_play_first,
                   u, k, fc_out, frac_out, corr_out, out_base + done)
        done += k
        state.mcs_clock += k
