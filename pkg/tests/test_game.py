import numpy as np
import pytest

from latticepd.game import PayoffParams, Strategy, pair_payoff, site_payoff
from latticepd.lattice import Lattice, build_lattice

C, D = Strategy.COOPERATE, Strategy.DEFECT


def test_pair_payoff_matrix():
    p = PayoffParams(1.4)
    assert pair_payoff(C, C, p) == 1.0
    assert pair_payoff(D, C, p) == 1.4
    assert pair_payoff(C, D, p) == 0.0
    assert pair_payoff(D, D, p) == 0.0


def test_payoff_params_range():
    for b in (1.0, 2.0, 0.9, 2.5):
        with pytest.raises(ValueError):
            PayoffParams(b)
    assert PayoffParams(1.9).matrix()[1, 0] == 1.9


def _lattice_with(center, neighbors_spec):
    """3x3 lattice: focal strategy at (1,1), neighbour strategies at N,S,W,E
    (None = hole). Returns (lattice, strategies-by-handle)."""
    lat = Lattice(3)
    strategies = {}
    lat.place(0, (1, 1))
    strategies[0] = center
    sites = [(0, 1), (2, 1), (1, 0), (1, 2)]
    handle = 1
    for site, strat in zip(sites, neighbors_spec):
        if strat is None:
            continue
        lat.place(handle, site)
        strategies[handle] = strat
        handle += 1
    return lat, strategies


def test_site_payoff_examples():
    p = PayoffParams(1.4)
    lat, strats = _lattice_with(C, [C, C, D, None])
    assert site_payoff(lat, strats, (1, 1), p) == 2.0
    lat, strats = _lattice_with(D, [C, C, None, None])
    assert site_payoff(lat, strats, (1, 1), p) == pytest.approx(2.8)
    lat, strats = _lattice_with(C, [None, None, None, None])
    assert site_payoff(lat, strats, (1, 1), p) == 0.0


def test_site_payoff_empty_site_is_contract_failure():
    lat, strats = _lattice_with(C, [None, None, None, None])
    with pytest.raises(ValueError):
        site_payoff(lat, strats, (0, 0), PayoffParams(1.4))


def test_defector_ring_pays_nothing():
    p = PayoffParams(1.7)
    for center in (C, D):
        lat, strats = _lattice_with(center, [D, D, D, D])
        assert site_payoff(lat, strats, (1, 1), p) == 0.0


def _oracle_site_payoff(lat, strategies, site, b):
    """Independent re-derivation: explicit wrap arithmetic and a payoff dict."""
    table = {(C, C): 1.0, (C, D): 0.0, (D, C): b, (D, D): 0.0}
    r, c = site
    me = strategies[lat.agent_at(site)]
    total = 0.0
    for dr, dc in [(-1, 0), (1, 0), (0, -1), (0, 1)]:
        nb = ((r + dr) % lat.side_length, (c + dc) % lat.side_length)
        h = lat.agent_at(nb)
        if h is not None:
            total += table[(me, strategies[h])]
    return total


def test_site_payoff_matches_brute_force_on_random_worlds():
    rng = np.random.default_rng(23)
    for _ in range(1000):
        b = float(rng.uniform(1.01, 1.99))
        p = PayoffParams(b)
        lat = build_lattice(4, float(rng.uniform(0.2, 1.0)), rng)
        strategies = {h: (C if rng.random() < 0.5 else D) for h in lat.site_of}
        for h, site in lat.site_of.items():
            got = site_payoff(lat, strategies, site, p)
            assert got == _oracle_site_payoff(lat, strategies, site, b)
            assert 0.0 <= got <= 4 * b
            if strategies[h] == C:
                assert got <= 4.0
