import numpy as np
import pytest

from mpmp.model import GameState, ScenarioConfig, generate_scenario, initial_codes, random_codes


def make(kind="PeerToPeer", K=4, B=None, N=8, seed=0, power=1.0, **kw):
    """Random scenario plus a starting state with matched-filter receivers."""
    if B is None:
        B = K if kind == "PeerToPeer" else 4
    cfg = ScenarioConfig(kind=kind, K=K, B=B, N=N, seed=seed, **kw)
    sc = generate_scenario(cfg)
    return sc, GameState.initial(initial_codes(cfg), power)


def random_state(sc, rng, p_max=1.0):
    """State with random codes, random powers in (0, p_max] and random receivers."""
    codes = random_codes(sc.N, sc.K, rng)
    powers = rng.uniform(0.05, 1.0, sc.K) * p_max
    receivers = rng.standard_normal((sc.N, sc.K)) * 1e3
    return GameState(codes, powers, receivers)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
