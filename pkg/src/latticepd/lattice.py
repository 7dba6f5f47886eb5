"""Diluted periodic square grid with occupancy bookkeeping.

The grid is L x L with periodic boundary conditions. Each site is either
empty or holds exactly one agent, identified by a stable integer handle.
Handles are decoupled from position so per-agent state (Q-tables, payoffs)
travels with the agent when it relocates. After construction the number of
players is conserved forever: movement only relocates.
"""

from __future__ import annotations

import math

import numpy as np

EMPTY = -1

# von Neumann offsets in fixed (N, S, W, E) order. Uniform choices among
# neighbours must depend only on the RNG draw, never on iteration order.
NEIGHBOR_OFFSETS = ((-1, 0), (1, 0), (0, -1), (0, 1))


def round_half_up(x: float) -> int:
    """Python's round() takes 0.5 to the even side; occupancy counts use half-up."""
    return int(math.floor(x + 0.5))


def neighbors(site: tuple[int, int], L: int) -> list[tuple[int, int]]:
    """The four periodic von Neumann neighbours of ``site``, in (N, S, W, E) order."""
    r, c = site
    return [((r + dr) % L, (c + dc) % L) for dr, dc in NEIGHBOR_OFFSETS]


class Lattice:
    """Occupancy grid plus a reverse index from agent handle to site."""

    def __init__(self, side_length: int):
        if side_length < 2:
            raise ValueError(f"side_length must be >= 2, got {side_length}")
        self.side_length = side_length
        self.grid = np.full((side_length, side_length), EMPTY, dtype=np.int64)
        self.site_of: dict[int, tuple[int, int]] = {}

    @property
    def player_count(self) -> int:
        return len(self.site_of)

    def is_occupied(self, site: tuple[int, int]) -> bool:
        return self.grid[site] != EMPTY

    def agent_at(self, site: tuple[int, int]) -> int | None:
        h = self.grid[site]
        return None if h == EMPTY else int(h)

    def place(self, handle: int, site: tuple[int, int]) -> None:
        """Put a new agent on an empty site (construction-time only)."""
        if self.grid[site] != EMPTY:
            raise ValueError(f"site {site} already occupied")
        if handle in self.site_of:
            raise ValueError(f"handle {handle} already placed")
        self.grid[site] = handle
        self.site_of[handle] = site

    def vacant_neighbors(self, site: tuple[int, int]) -> list[tuple[int, int]]:
        """Empty von Neumann neighbours of an occupied site, in (N, S, W, E) order."""
        if not self.is_occupied(site):
            raise ValueError(f"site {site} is not occupied")
        return [nb for nb in neighbors(site, self.side_length) if self.grid[nb] == EMPTY]

    def relocate(self, src: tuple[int, int], dst: tuple[int, int]) -> None:
        """Move the agent at ``src`` to the adjacent empty site ``dst``.

        Precondition violations are programming errors and raise rather than
        being silently ignored.
        """
        if self.grid[src] == EMPTY:
            raise ValueError(f"relocate: source {src} is empty")
        if self.grid[dst] != EMPTY:
            raise ValueError(f"relocate: destination {dst} is occupied")
        if dst not in neighbors(src, self.side_length):
            raise ValueError(f"relocate: {dst} is not adjacent to {src}")
        handle = int(self.grid[src])
        self.grid[src] = EMPTY
        self.grid[dst] = handle
        self.site_of[handle] = dst

    def occupied_sites(self) -> list[tuple[int, int]]:
        rows, cols = np.nonzero(self.grid != EMPTY)
        return [(int(r), int(c)) for r, c in zip(rows, cols)]

    def audit(self) -> None:
        """Check the grid and the reverse index agree exactly (test builds)."""
        occupied = {(int(r), int(c)) for r, c in zip(*np.nonzero(self.grid != EMPTY))}
        assert len(self.site_of) == len(occupied), "player_count drifted"
        for handle, site in self.site_of.items():
            assert self.grid[site] == handle, f"handle {handle} lost at {site}"


def build_lattice(L: int, rho: float, rng: np.random.Generator) -> Lattice:
    """Populate an L x L grid with exactly round(rho * L^2) agents.

    Sites are chosen uniformly at random without replacement; handles are
    assigned 0..n-1 in draw order.
    """
    if L < 2:
        raise ValueError(f"L must be >= 2, got {L}")
    if not 0.0 < rho <= 1.0:
        raise ValueError(f"rho must be in (0, 1], got {rho}")
    n = round_half_up(rho * L * L)
    lat = Lattice(L)
    chosen = rng.permutation(L * L)[:n]
    for handle, flat in enumerate(chosen):
        lat.place(handle, (int(flat) // L, int(flat) % L))
    return lat
